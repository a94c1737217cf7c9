"""Backward-induction learners for multi-stage regimens.

Four pipelines share the same stage machinery:

* ``fit_qlearning`` -- lasso regression of (reward + estimated future optimum) on
  ``(H_k, A_k, A_k * H_k)``; the rule picks the action with the larger prediction.
* ``fit_olearning`` -- weighted large-margin classification on subjects who
  followed the already-estimated later rules, weights = shifted future reward sum
  over the product of propensities.
* ``fit_amol_simple`` / ``fit_amol_efficient`` -- every subject contributes
  through an augmented inverse-probability-weighted pseudo-outcome for the
  future reward; the working weight is recentred by a lasso fit on ``H_k``
  and negative weights flip the label.

Stage indices in the public API are 1-based.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (HistoryScheme, HistoryVector, KernelRule, LinearRule, Regimen, TrialData,
                   as_trial_data, history_matrix, sign)
from .kernels import KernelSpec, gram
from .lasso import LassoFit, fit_lasso_cv, fold_ids, predict
from .wsvm import AllWeightsZeroError, ConvergenceWarning, SolverConfig, solve_weighted_svm

DEFAULT_COST_GRID = tuple(2.0 ** np.arange(-5, 10, 2))

METHODS = ("qlearn", "olearn", "amol", "amol-eff")


class DegenerateStageError(ValueError):
    pass


class NoFollowersError(ValueError):
    pass


@dataclass(frozen=True)
class LearnerConfig:
    kernel: KernelSpec = field(default_factory=KernelSpec.linear)
    cost_grid: tuple = DEFAULT_COST_GRID
    cost_folds: int = 4
    lasso_folds: int = 5
    lasso_grid_size: int = 50
    scheme: HistoryScheme = field(default_factory=HistoryScheme)
    seed: int = 0
    kkt_tolerance: float = 1e-3
    max_passes: int = 100_000
    standardize: bool = True
    normalize_weights: bool = True
    # True: a subject counts as compliant before stage k (M_{k-1} = 1)
    compliant_boundary: bool = True

    def to_dict(self) -> dict:
        return {"kernel": self.kernel.to_dict(), "cost_grid": list(self.cost_grid),
                "cost_folds": self.cost_folds, "lasso_folds": self.lasso_folds,
                "lasso_grid_size": self.lasso_grid_size, "scheme": self.scheme.to_dict(),
                "seed": self.seed, "kkt_tolerance": self.kkt_tolerance,
                "max_passes": self.max_passes, "standardize": self.standardize,
                "normalize_weights": self.normalize_weights,
                "compliant_boundary": self.compliant_boundary}


def _seed(config: LearnerConfig, stage: int, purpose: int) -> int:
    return int(np.random.SeedSequence([config.seed, stage, purpose]).generate_state(1)[0])


# -- diagnostics --------------------------------------------------------------

@dataclass(frozen=True)
class StageDiagnostics:
    stage: int
    n_used: int
    n_support: int | None = None
    cost: float | None = None
    cv_scores: tuple | None = None
    lambda_q: float | None = None
    lambda_s: float | None = None
    negative_weight_fraction: float | None = None
    converged: bool = True
    single_class: bool = False

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        if d["cv_scores"] is not None:
            d["cv_scores"] = list(d["cv_scores"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StageDiagnostics":
        d = dict(d)
        if d.get("cv_scores") is not None:
            d["cv_scores"] = tuple(d["cv_scores"])
        return cls(**d)


@dataclass(frozen=True)
class FitReport:
    method: str
    regimen: Regimen
    diagnostics: tuple

    def __post_init__(self):
        if len(self.diagnostics) != self.regimen.n_stages:
            raise ValueError("one diagnostics entry per stage required")

    def to_dict(self) -> dict:
        return {"format": "amol.fit_report", "version": 1, "method": self.method,
                "regimen": self.regimen.to_dict(),
                "diagnostics": [d.to_dict() for d in self.diagnostics]}

    @classmethod
    def from_dict(cls, d: dict) -> "FitReport":
        if d.get("format") != "amol.fit_report" or d.get("version") != 1:
            raise ValueError("not a version-1 fit report")
        return cls(d["method"], Regimen.from_dict(d["regimen"]),
                   tuple(StageDiagnostics.from_dict(x) for x in d["diagnostics"]))


# -- regression stages ----------------------------------------------------------

def stage_design(H, a) -> np.ndarray:
    """Regressors ``(H, a, a * H)`` for the stage regression."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    a = np.broadcast_to(np.asarray(a, dtype=float), (H.shape[0],))[:, None]
    return np.hstack([H, a, a * H])


@dataclass(frozen=True)
class QStageModel:
    stage: int
    fit: LassoFit

    def predict(self, H, a) -> np.ndarray:
        return predict(self.fit, stage_design(H, a))

    def value(self, H) -> np.ndarray:
        """Estimated optimal future reward ``max_a E[target | H, a]``."""
        return np.maximum(self.predict(H, 1), self.predict(H, -1))

    def rule(self) -> LinearRule:
        # Q(h, +1) - Q(h, -1) = 2 * (theta_a + theta_ah . h)
        c = self.fit.coefficients
        d = (len(c) - 1) // 2
        return LinearRule(2.0 * c[d], 2.0 * c[d + 1:])


@dataclass(frozen=True)
class QChain:
    models: tuple
    g_values: np.ndarray  # (n, K): ghat_k(H_k); observed target where ineligible


def q_chain(data, config: LearnerConfig = LearnerConfig()) -> QChain:
    """Backward regression chain shared by Q-learning and the AMOL imputation."""
    data = as_trial_data(data)
    n, K = data.n, data.n_stages
    g = np.zeros((n, K))
    models = [None] * K
    for t in reversed(range(K)):
        k = t + 1
        used = data.eligible[:, t]
        if not used.any():
            raise DegenerateStageError(f"no eligible subjects at stage {k}")
        H = history_matrix(data, k, config.scheme)
        target = data.rewards[:, t] + (g[:, t + 1] if t + 1 < K else 0.0)
        A = data.actions[:, t]
        fit = fit_lasso_cv(stage_design(H[used], A[used]), target[used], config.lasso_folds,
                           config.lasso_grid_size, _seed(config, k, 1))
        model = QStageModel(k, fit)
        models[t] = model
        g[:, t] = np.where(used, model.value(H), target)
    return QChain(tuple(models), g)


# -- pseudo-outcomes ------------------------------------------------------------

@dataclass(frozen=True)
class PseudoOutcome:
    value: np.ndarray | float
    ipw_term: np.ndarray | float
    augmentation_term: np.ndarray | float


def pseudo_outcomes(data: TrialData, k: int, rule_actions, g_values, variant: str = "simple",
                    m_values=None, compliant_boundary: bool = True) -> PseudoOutcome:
    """Augmented estimates of the reward from stage ``k`` on under the given rules.

    Parameters
    ----------
    data : TrialData
    k : int
        1-based stage the pseudo-outcome starts at.
    rule_actions : array, shape (n, K)
        ``rule_actions[:, j]`` is the action the rule for stage ``j+1`` recommends
        for each subject's observed history.  Only columns ``k-1..K-1`` are read.
    g_values : array, shape (n, K)
        ``g_values[:, j]`` is the imputed optimal future reward at stage ``j+1``.
        The simple variant reads only column ``k-1``.
    variant : {"simple", "efficient"}
    m_values : array, shape (n, K), optional
        Efficient variant only: overrides the per-stage augmentation regressors,
        which default to ``g_values[:, j] + R_k + ... + R_{j-1}``.
    compliant_boundary : bool
        Efficient variant only: treat every subject as compliant before stage
        ``k``.  ``False`` sets that indicator to 0 instead.
    """
    n, K = data.n, data.n_stages
    if not 1 <= k <= K:
        raise ValueError(f"stage {k} out of range 1..{K}")
    t0 = k - 1
    D = np.asarray(rule_actions)[:, t0:]
    A = data.actions[:, t0:]
    P = data.propensities[:, t0:]
    R = data.rewards[:, t0:]
    E = data.eligible[:, t0:]
    G = np.asarray(g_values, dtype=float)[:, t0:]
    follow = (A == D) | ~E
    total = R.sum(axis=1)
    if variant == "simple":
        match = follow.all(axis=1).astype(float)
        p_obs = P.prod(axis=1)
        ipw = match * total / p_obs
        aug = -(match - p_obs) / p_obs * G[:, 0]
        return PseudoOutcome(ipw + aug, ipw, aug)
    if variant != "efficient":
        raise ValueError(f"unknown variant {variant!r}")
    # probability the randomization would have produced the recommended action
    p_rule = np.where(E, np.where(A == D, P, 1.0 - P), 1.0)
    if m_values is None:
        partial = np.hstack([np.zeros((n, 1)), np.cumsum(R, axis=1)[:, :-1]])
        m = G + partial
    else:
        m = np.asarray(m_values, dtype=float)[:, t0:]
    # M_j = 1{followed from k through j}; only the boundary indicator M_{k-1} is configurable
    M_prev = np.full(n, 1.0 if compliant_boundary else 0.0)
    M = np.ones(n)
    P_M = np.ones(n)
    aug = np.zeros(n)
    for j in range(K - t0):
        M = M * follow[:, j]
        P_M = P_M * p_rule[:, j]
        C = M_prev - M
        hazard = 1.0 - p_rule[:, j]
        aug += (C - hazard * M_prev) / P_M * m[:, j]
        M_prev = M
    ipw = M * total / P_M
    return PseudoOutcome(ipw + aug, ipw, aug)


def augmented_pseudo_outcome(traj, k: int, future_rules: Sequence, g_hat: Callable,
                             variant: str = "simple", scheme: HistoryScheme = HistoryScheme(),
                             m_hat: Callable | None = None,
                             compliant_boundary: bool = True) -> PseudoOutcome:
    """Pseudo-outcome of one trajectory.

    ``future_rules[i]`` is the rule for stage ``k + i``.  ``g_hat(j, h)`` returns
    the imputed optimal future reward at 1-based stage ``j`` for the history
    vector ``h``; ``m_hat(j, h)``, if given, replaces the efficient-variant
    regressor at stage ``j``.
    """
    data = as_trial_data([traj])
    K = data.n_stages
    if not 1 <= k <= K:
        raise ValueError(f"stage {k} out of range 1..{K}")
    if len(future_rules) != K - k + 1:
        raise ValueError(f"need {K - k + 1} rules for stages {k}..{K}")
    D = np.ones((1, K), dtype=int)
    G = np.zeros((1, K))
    Mv = None if m_hat is None else np.zeros((1, K))
    for j in range(k, K + 1):
        h = HistoryVector(history_matrix(data, j, scheme)[0], j)
        D[0, j - 1] = 1 if future_rules[j - k].decision_function(h.values) >= 0 else -1
        if variant == "efficient" or j == k:
            G[0, j - 1] = g_hat(j, h)
        if Mv is not None:
            Mv[0, j - 1] = m_hat(j, h)
    out = pseudo_outcomes(data, k, D, G, variant, Mv, compliant_boundary)
    return PseudoOutcome(float(out.value[0]), float(out.ipw_term[0]), float(out.augmentation_term[0]))


# -- weighted classification stages ---------------------------------------------------

@dataclass(frozen=True)
class CostCV:
    cost: float
    grid: tuple
    scores: tuple


def _held_out_decision(K, train_kept, fit, test):
    if fit.single_class:
        return np.full(len(test), fit.solution.bias)
    coef = fit.solution.alphas * fit.labels
    return K[np.ix_(test, train_kept)] @ coef + fit.solution.bias


def cross_validate_cost(H, actions, weights, folds: int = 4, cost_grid=DEFAULT_COST_GRID,
                        kernel: KernelSpec = KernelSpec.linear(), seed: int = 0, K=None,
                        kkt_tolerance: float = 1e-3, max_passes: int = 100_000) -> CostCV:
    """Choose the cost by held-out inverse-probability-weighted value.

    For each cost, each fold is scored by ``mean(w_i * 1{a_i = rule(h_i)})`` over
    its held-out subjects with the signed working weights ``w``.  Costs are
    compared by mean fold score; ties go to the smaller cost.
    """
    grid = np.sort(np.asarray(cost_grid, dtype=float))
    if len(grid) == 0:
        raise ValueError("empty cost grid")
    if len(grid) == 1:
        return CostCV(float(grid[0]), (float(grid[0]),), (np.nan,))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    a = np.asarray(actions).astype(int)
    w = np.asarray(weights, dtype=float)
    if len(w) < folds:
        raise ValueError(f"{len(w)} subjects cannot fill {folds} folds")
    kernel = kernel.resolve(H)
    if K is None:
        K = gram(kernel, H)
    ids = fold_ids(len(w), folds, seed)
    scores = np.zeros(len(grid))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        for f in range(folds):
            train = np.flatnonzero(ids != f)
            test = np.flatnonzero(ids == f)
            Ktr = K[np.ix_(train, train)]
            fit = None
            for c, cost in enumerate(grid):
                cfg = SolverConfig(cost, kernel, kkt_tolerance, max_passes, kkt_tolerance)
                try:
                    # costs ascend, so the previous fit scaled up is a feasible start
                    fit = solve_weighted_svm(H[train], a[train], w[train], cfg, K=Ktr, warm=fit)
                    pred = sign(_held_out_decision(K, train[fit.kept], fit, test))
                except AllWeightsZeroError:
                    pred = np.ones(len(test), dtype=int)
                scores[c] += np.mean(w[test] * (a[test] == pred))
    scores /= folds
    best = int(np.flatnonzero(scores >= scores.max())[0])
    return CostCV(float(grid[best]), tuple(grid.tolist()), tuple(scores.tolist()))


def _fit_stage_rule(H, A, W, config: LearnerConfig, stage: int):
    """Standardize, normalize, cross-validate the cost and fit one stage rule."""
    d = H.shape[1]
    if config.standardize:
        shift = H.mean(axis=0)
        scale = H.std(axis=0)
        scale = np.where(scale > 1e-12, scale, 1.0)
    else:
        shift, scale = np.zeros(d), np.ones(d)
    Z = (H - shift) / scale
    nonzero = W != 0
    if not nonzero.any():
        rule = LinearRule(1.0, np.zeros(d))
        return rule, dict(n_support=0, cost=None, cv_scores=None, converged=True, single_class=True)
    Wn = W / np.mean(np.abs(W[nonzero])) if config.normalize_weights else W
    kernel = config.kernel.resolve(Z)
    K = gram(kernel, Z)
    cv = cross_validate_cost(Z, A, Wn, config.cost_folds, config.cost_grid, kernel,
                             _seed(config, stage, 2), K, config.kkt_tolerance, config.max_passes)
    cfg = SolverConfig(cv.cost, kernel, config.kkt_tolerance, config.max_passes,
                       config.kkt_tolerance)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        fit = solve_weighted_svm(Z, A, Wn, cfg, K=K)
    if isinstance(fit.rule, LinearRule):
        coef = fit.rule.coefficients / scale
        rule = LinearRule(fit.rule.bias - coef @ shift, coef)
    else:
        rule = KernelRule(fit.rule.support, fit.rule.dual_coef, fit.rule.bias, fit.rule.kernel,
                          shift, scale)
    diag = dict(n_support=fit.n_support, cost=cv.cost, cv_scores=cv.scores,
                converged=fit.converged, single_class=fit.single_class)
    return rule, diag


def _followed(data: TrialData, t: int, actions_by_rule) -> np.ndarray:
    return (data.actions[:, t] == actions_by_rule[:, t]) | ~data.eligible[:, t]


# -- pipelines -------------------------------------------------------------

def fit_qlearning(data, config: LearnerConfig = LearnerConfig(), chain: QChain | None = None) -> FitReport:
    data = as_trial_data(data)
    chain = q_chain(data, config) if chain is None else chain
    rules = tuple(m.rule() for m in chain.models)
    diags = tuple(StageDiagnostics(k, int(data.eligible[:, k - 1].sum()), lambda_q=m.fit.lam)
                  for k, m in enumerate(chain.models, start=1))
    return FitReport("qlearn", Regimen(rules, config.scheme, data.feature_dims), diags)


def fit_olearning(data, config: LearnerConfig = LearnerConfig()) -> FitReport:
    data = as_trial_data(data)
    n, K = data.n, data.n_stages
    rules = [None] * K
    diags = [None] * K
    rec = np.zeros((n, K), dtype=int)
    followers = np.ones(n, dtype=bool)
    for t in reversed(range(K)):
        k = t + 1
        if t + 1 < K:
            followers &= _followed(data, t + 1, rec)
        used = data.eligible[:, t] & followers
        if not data.eligible[:, t].any():
            raise DegenerateStageError(f"no eligible subjects at stage {k}")
        if not used.any():
            raise NoFollowersError(f"no subject follows the estimated rules after stage {k}")
        H = history_matrix(data, k, config.scheme)
        future = data.rewards[:, t:].sum(axis=1)
        prop = data.propensities[:, t:].prod(axis=1)
        w = (future[used] - future[used].min()) / prop[used]
        rule, info = _fit_stage_rule(H[used], data.actions[used, t], w, config, k)
        rules[t] = rule
        rec[:, t] = sign(rule.decision_function(H))
        diags[t] = StageDiagnostics(k, int(used.sum()), negative_weight_fraction=0.0, **info)
    return FitReport("olearn", Regimen(tuple(rules), config.scheme, data.feature_dims), tuple(diags))


def _fit_amol(data, config: LearnerConfig, variant: str, chain: QChain | None) -> FitReport:
    data = as_trial_data(data)
    n, K = data.n, data.n_stages
    chain = q_chain(data, config) if chain is None and K > 1 else chain
    rules = [None] * K
    diags = [None] * K
    rec = np.zeros((n, K), dtype=int)
    q_next = None
    for t in reversed(range(K)):
        k = t + 1
        used = data.eligible[:, t]
        if not used.any():
            raise DegenerateStageError(f"no eligible subjects at stage {k}")
        H = history_matrix(data, k, config.scheme)
        outcome = data.rewards[:, t] + (q_next if q_next is not None else 0.0)
        s_fit = fit_lasso_cv(H[used], outcome[used], config.lasso_folds, config.lasso_grid_size,
                             _seed(config, k, 3))
        w = (outcome[used] - predict(s_fit, H[used])) / data.propensities[used, t]
        rule, info = _fit_stage_rule(H[used], data.actions[used, t], w, config, k)
        rules[t] = rule
        rec[:, t] = np.where(used, sign(rule.decision_function(H)), data.actions[:, t])
        diags[t] = StageDiagnostics(k, int(used.sum()), lambda_s=s_fit.lam,
                                    lambda_q=chain.models[t].fit.lam if chain is not None else None,
                                    negative_weight_fraction=float(np.mean(w < 0)), **info)
        if t > 0:
            q_next = pseudo_outcomes(data, k, rec, chain.g_values, variant,
                                     compliant_boundary=config.compliant_boundary).value
    method = "amol" if variant == "simple" else "amol-eff"
    return FitReport(method, Regimen(tuple(rules), config.scheme, data.feature_dims), tuple(diags))


def fit_amol_simple(data, config: LearnerConfig = LearnerConfig(), chain: QChain | None = None) -> FitReport:
    return _fit_amol(data, config, "simple", chain)


def fit_amol_efficient(data, config: LearnerConfig = LearnerConfig(), chain: QChain | None = None) -> FitReport:
    return _fit_amol(data, config, "efficient", chain)


FITTERS = {"qlearn": fit_qlearning, "olearn": fit_olearning,
           "amol": fit_amol_simple, "amol-eff": fit_amol_efficient}


def fit_methods(data, methods: Sequence[str], config: LearnerConfig = LearnerConfig()) -> dict:
    """Fit several methods on one dataset, sharing the regression chain."""
    data = as_trial_data(data)
    unknown = set(methods) - set(FITTERS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    chain = None
    if any(m != "olearn" for m in methods) and (data.n_stages > 1 or "qlearn" in methods):
        chain = q_chain(data, config)
    out = {}
    for m in methods:
        out[m] = FITTERS[m](data, config) if m == "olearn" else FITTERS[m](data, config, chain)
    return out
