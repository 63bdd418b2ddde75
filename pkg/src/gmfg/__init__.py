"""Policy mirror descent for entropy-regularized graphon mean-field games."""

from .estimation import (
    BehaviorPolicySpec,
    EpisodeBatch,
    EstimationParams,
    TabularFunctionClass,
    assign_estimates,
    estimate_q,
    fitted_q_evaluation,
    sample_episodes,
)
from .evaluation import (
    eval_policy_exact,
    exploitability,
    kl_metric,
    reference_kl,
    soft_best_response,
)
from .experiment import ExperimentConfig, compare_runs, run_experiment
from .game import BeachBarConfig, GameSpec, build_beach_bar, monotonicity_probe
from .graphon import SBM, Constant, CustomGrid, DiscreteGraphon, Exp, GraphonSpec, discretize, evaluate
from .kernels import backend_name
from .meanfield import compute_aggregates, induce_flow, uniform_policy
from .solver import IterationRecord, PMDConfig, average_policies, pmd_run, pmd_step

__all__ = [
    "BeachBarConfig", "BehaviorPolicySpec", "Constant", "CustomGrid", "DiscreteGraphon",
    "EpisodeBatch", "EstimationParams", "Exp", "ExperimentConfig", "GameSpec", "GraphonSpec", "IterationRecord",
    "PMDConfig", "SBM", "TabularFunctionClass", "assign_estimates", "average_policies",
    "backend_name", "build_beach_bar", "compare_runs", "compute_aggregates", "discretize", "eval_policy_exact",
    "estimate_q", "evaluate", "exploitability", "fitted_q_evaluation", "induce_flow", "kl_metric",
    "monotonicity_probe", "pmd_run", "pmd_step", "reference_kl", "run_experiment", "sample_episodes", "soft_best_response",
    "uniform_policy",
]
