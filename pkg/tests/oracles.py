"""Independent reference computations. None of these call gmfg kernels."""

import itertools
import math

import numpy as np
from scipy.optimize import minimize


def enumerate_q(P, R, pi, lam):
    """Q_h(s, a) for one agent by summing over every continuation path.

    P [H,S,A,S], R [H,S,A], pi [H,S,A]. Each path (s_{h+1}, a_{h+1}, ...,
    s_H, a_H) contributes its probability times the reward collected and the
    entropy bonus -lam log pi(a_t|s_t) at every step after h.
    """
    H, S, A, _ = P.shape
    Q = np.zeros((H, S, A))
    for h in range(H):
        for s in range(S):
            for a in range(A):
                total = R[h, s, a]
                steps = H - h - 1
                for path in itertools.product(range(S), range(A), repeat=steps):
                    prob, ret = 1.0, 0.0
                    prev_s, prev_a = s, a
                    for k in range(steps):
                        t = h + 1 + k
                        s_t, a_t = path[2 * k], path[2 * k + 1]
                        prob *= P[t - 1, prev_s, prev_a, s_t] * pi[t, s_t, a_t]
                        if prob == 0.0:
                            break
                        ret += R[t, s_t, a_t] - lam * math.log(pi[t, s_t, a_t])
                        prev_s, prev_a = s_t, a_t
                    else:
                        total += prob * ret
                Q[h, s, a] = total
    return Q


def loop_best_response(P, R, lam, mu1):
    """Soft (or hard, lam=0) optimal value of one agent, plain loops."""
    H, S, A, _ = P.shape
    V = [0.0] * S
    for h in reversed(range(H)):
        new = []
        for s in range(S):
            qs = [R[h, s, a] + sum(P[h, s, a, t] * V[t] for t in range(S)) for a in range(A)]
            if lam > 0:
                m = max(qs)
                new.append(m + lam * math.log(sum(math.exp((q - m) / lam) for q in qs)))
            else:
                new.append(max(qs))
        V = new
    return sum(mu1[s] * V[s] for s in range(S))


def loop_policy_value(P, R, pi, lam, mu1):
    H, S, A, _ = P.shape
    V = [0.0] * S
    for h in reversed(range(H)):
        new = []
        for s in range(S):
            v = 0.0
            for a in range(A):
                q = R[h, s, a] + sum(P[h, s, a, t] * V[t] for t in range(S))
                p = pi[h, s, a]
                v += p * q - (lam * p * math.log(p) if p > 0 else 0.0)
            new.append(v)
        V = new
    return sum(mu1[s] * V[s] for s in range(S))


def loop_flow(P, pi, mu1):
    H, S, A, _ = P.shape
    mu = np.zeros((H, S))
    mu[0] = mu1
    for h in range(H - 1):
        for s in range(S):
            for a in range(A):
                for t in range(S):
                    mu[h + 1, t] += mu[h, s] * pi[h, s, a] * P[h, s, a, t]
    return mu


def kl_regularized_argmax(q, pi_t, eta, lam):
    """argmax_p  eta/(1-lam eta) [<q,p> - lam <p, log p>] - KL(p || pi_t)
    by quasi-Newton search over softmax logits."""
    c = eta / (1 - lam * eta)
    logpi = np.log(pi_t)

    def neg(theta):
        x = np.concatenate([[0.0], theta])
        x = x - x.max()
        p = np.exp(x) / np.exp(x).sum()
        logp = x - math.log(np.exp(x).sum())
        f = c * (q @ p - lam * (p @ logp)) - p @ (logp - logpi)
        # gradient wrt p, then chain rule through softmax
        g = c * (q - lam * (logp + 1)) - (logp - logpi + 1)
        gx = p * (g - p @ g)
        return -f, -gx[1:]

    x0 = np.log(pi_t[1:]) - np.log(pi_t[0])
    res = minimize(neg, x0, jac=True, method="BFGS", options={"gtol": 1e-14, "maxiter": 10_000})
    x = np.concatenate([[0.0], res.x])
    p = np.exp(x - x.max())
    return p / p.sum()
