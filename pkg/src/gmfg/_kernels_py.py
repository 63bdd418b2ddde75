"""Pure-numpy implementations of the numerical kernels.

Every function here has a twin with the same signature in ``_kernels.pyx``.
Array conventions (all float64 unless noted, all indices 0-based):

    P    transition   [H, S, A, S]
    R    reward       [N, H, S, A]
    pi   policy       [N, H, S, A]
    mu   flow         [N, H, S]
    W    graphon      [H, N, N]
    V    value        [N, H + 1, S]   (V[:, H] == 0)
"""

from __future__ import annotations

import numpy as np

TIE_TOL = 1e-12


def _xlogx(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = p[pos] * np.log(p[pos])
    return out


def forward_flow(P, pi, mu1):
    n, horizon, n_states, _ = pi.shape
    mu = np.empty((n, horizon, n_states))
    mu[:, 0] = mu1
    for h in range(horizon - 1):
        # occupancy [N, S, A] pushed through P[h]
        occ = mu[:, h, :, None] * pi[:, h]
        mu[:, h + 1] = np.einsum("nsa,sat->nt", occ, P[h])
    return mu


def aggregate(W, mu):
    # Shifted mean: (1/N) sum_j x_j = x_0 + (1/N) sum_j (x_j - x_0).
    # Exact whenever all x_j coincide; j is reduced in index order.
    n, horizon, n_states = mu.shape
    z = np.empty((n, horizon, n_states))
    for h in range(horizon):
        x = W[h][:, :, None] * mu[None, :, h, :]  # [i, j, s]
        x0 = x[:, :1, :]
        z[:, h] = x0[:, 0, :] + np.add.reduce(x - x0, axis=1) / n
    return z


def policy_evaluation(P, R, pi, lam):
    n, horizon, n_states, n_actions = R.shape
    Q = np.empty((n, horizon, n_states, n_actions))
    V = np.zeros((n, horizon + 1, n_states))
    for h in range(horizon - 1, -1, -1):
        Q[:, h] = R[:, h] + np.einsum("sat,nt->nsa", P[h], V[:, h + 1])
        V[:, h] = (pi[:, h] * Q[:, h]).sum(axis=-1) - lam * _xlogx(pi[:, h]).sum(axis=-1)
    return Q, V


def soft_bellman(P, R, lam):
    n, horizon, n_states, n_actions = R.shape
    pi = np.empty((n, horizon, n_states, n_actions))
    V = np.zeros((n, horizon + 1, n_states))
    for h in range(horizon - 1, -1, -1):
        q = R[:, h] + np.einsum("sat,nt->nsa", P[h], V[:, h + 1])
        m = q.max(axis=-1, keepdims=True)
        if lam > 0:
            e = np.exp((q - m) / lam)
            tot = e.sum(axis=-1, keepdims=True)
            pi[:, h] = e / tot
            V[:, h] = m[..., 0] + lam * np.log(tot[..., 0])
        else:
            ties = (q >= m - TIE_TOL).astype(float)
            pi[:, h] = ties / ties.sum(axis=-1, keepdims=True)
            V[:, h] = m[..., 0]
    return pi, V


def mirror_step(pi, q, eta, decay, beta):
    """pi_new ∝ pi**decay * exp(eta*q), then mixed with the uniform policy."""
    n_actions = pi.shape[-1]
    with np.errstate(divide="ignore"):
        logits = decay * np.log(pi) + eta * q
    logits -= logits.max(axis=-1, keepdims=True)
    e = np.exp(logits)
    p = e / e.sum(axis=-1, keepdims=True)
    return (1.0 - beta) * p + beta / n_actions


def _inverse_cdf(cdf, u):
    # first index k with u < cdf[k]; clipped for round-off at the top end
    idx = (u[..., None] >= cdf).sum(axis=-1)
    return np.minimum(idx, cdf.shape[-1] - 1)


def walk_episodes(mu1_cdf, pi_cdf, P_cdf, u):
    """Roll out episodes by inverse-CDF sampling of pre-drawn uniforms.

    ``u`` has shape [Ns, K, 1 + 2H]: slot 0 draws the initial state, slots
    1 + 2h and 2 + 2h draw the action and successor state at step h.
    """
    n_s, n_ep, _ = u.shape
    horizon = pi_cdf.shape[1]
    states = np.empty((n_s, n_ep, horizon + 1), dtype=np.int64)
    actions = np.empty((n_s, n_ep, horizon), dtype=np.int64)
    states[:, :, 0] = _inverse_cdf(mu1_cdf, u[:, :, 0])
    agent = np.arange(n_s)[:, None]
    for h in range(horizon):
        s = states[:, :, h]
        a = _inverse_cdf(pi_cdf[agent, h, s], u[:, :, 1 + 2 * h])
        actions[:, :, h] = a
        states[:, :, h + 1] = _inverse_cdf(P_cdf[h, s, a], u[:, :, 2 + 2 * h])
    return states, actions


def fit_tabular(states, actions, rewards, pi, lam, bounds):
    """Backward tabular least squares: per-cell mean of r + V(s'), clipped."""
    n_s, n_ep, horizon = actions.shape
    n_states, n_actions = pi.shape[2], pi.shape[3]
    n_cells = n_states * n_actions
    Q = np.zeros((n_s, horizon, n_states, n_actions))
    counts = np.zeros((n_s, horizon, n_states, n_actions), dtype=np.int64)
    v_next = np.zeros((n_s, n_states))
    ent = lam * _xlogx(pi).sum(axis=-1)  # [Ns, H, S]
    for h in range(horizon - 1, -1, -1):
        for i in range(n_s):
            cells = states[i, :, h] * n_actions + actions[i, :, h]
            y = rewards[i, :, h] + v_next[i, states[i, :, h + 1]]
            cnt = np.bincount(cells, minlength=n_cells)
            # shifted mean keeps constant targets exact
            _, first = np.unique(cells, return_index=True)
            base = np.zeros(n_cells)
            base[cells[first]] = y[first]
            dev = np.bincount(cells, weights=y - base[cells], minlength=n_cells)
            seen = cnt > 0
            q = np.zeros(n_cells)
            q[seen] = base[seen] + dev[seen] / cnt[seen]
            q = np.clip(q, -bounds[h], bounds[h])
            Q[i, h] = q.reshape(n_states, n_actions)
            counts[i, h] = cnt.reshape(n_states, n_actions)
        v_next = (Q[:, h] * pi[:, h]).sum(axis=-1) - ent[:, h]
    return Q, counts
