"""Augmented outcome-weighted learning of multi-stage treatment regimens."""
from .benchmark import BenchmarkReport, ScenarioSpec, run_benchmark
from .core import (DecisionRule, HistoryScheme, HistoryVector, KernelRule, LinearRule, Regimen,
                   StageObservation, Trajectory, TrialData, build_history, decide, history_matrix, sign)
from .io import DatasetSchema, load_csv, load_regimen, write_csv
from .kernels import KernelSpec, cross_gram, gram, kernel_eval, median_heuristic
from .lasso import LassoFit, fit_lasso, fit_lasso_cv, lambda_max, predict, select_lambda_cv
from .learners import (FitReport, LearnerConfig, PseudoOutcome, augmented_pseudo_outcome,
                       cross_validate_cost, fit_amol_efficient, fit_amol_simple, fit_methods,
                       fit_olearning, fit_qlearning, pseudo_outcomes, q_chain)
from .simulation import Setting1, Setting1Oracle, Setting2, Setting2Oracle, gen_setting1, gen_setting2
from .value import ValueEstimate, estimate_value, stage_value, true_value_mc
from .wsvm import (DualSolution, SolverConfig, SVMFit, WeightedSample, check_kkt, fit_weighted_svm,
                   solve_weighted_svm)

__version__ = "0.1.0"
