"""Outcome-weighted large-margin classifier.

Solves

    min_f  1/2 ||f||^2 + C * sum_i |w_i| * hinge(l_i * f(h_i)),   l_i = a_i * sign(w_i),

through its dual

    max_alpha  sum_i alpha_i - 1/2 sum_ij alpha_i l_i K_ij l_j alpha_j
    s.t.       0 <= alpha_i <= C |w_i|,   sum_i alpha_i l_i = 0,

with two-variable (SMO) coordinate ascent.  The first index of each pair is the
maximal KKT violator; the second is chosen by second-order ascent (or by
maximal violation with ``selection="mvp"``).
Negative weights are handled by flipping the label, which keeps the problem
convex.  In terms of the per-sample penalty ``lambda_n`` of the averaged
objective, ``C = 1 / (2 n lambda_n)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from .core import HistoryVector, KernelRule, LinearRule, sign
from .kernels import KernelSpec, gram


class AllWeightsZeroError(ValueError):
    pass


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class WeightedSample:
    history: HistoryVector | np.ndarray
    action: int
    weight: float

    def __post_init__(self):
        if self.action not in (-1, 1):
            raise ValueError(f"action must be -1 or +1, got {self.action!r}")
        if not np.isfinite(self.weight):
            raise ValueError("weight must be finite")


@dataclass(frozen=True)
class SolverConfig:
    cost: float = 1.0
    kernel: KernelSpec = field(default_factory=KernelSpec.linear)
    kkt_tolerance: float = 1e-3
    max_passes: int = 100_000
    # the solver keeps refining past kkt_tolerance down to this gap while within budget
    gap_tolerance: float = 1e-9
    # "second_order" picks j by guaranteed ascent, "mvp" by maximal violation
    selection: str = "second_order"

    def __post_init__(self):
        if not self.cost > 0:
            raise ValueError("cost must be positive")
        if not self.kkt_tolerance > 0:
            raise ValueError("kkt_tolerance must be positive")
        if self.max_passes < 1:
            raise ValueError("max_passes must be positive")
        if self.selection not in ("second_order", "mvp"):
            raise ValueError(f"unknown selection {self.selection!r}")


@dataclass(frozen=True)
class DualSolution:
    alphas: np.ndarray
    bias: float
    objective: float


@dataclass(frozen=True)
class SVMFit:
    """Result of :func:`fit_weighted_svm`.

    ``solution`` and ``labels`` refer to the samples kept after dropping zero
    weights (``kept`` indexes them in the input order).
    """

    rule: LinearRule | KernelRule
    solution: DualSolution
    labels: np.ndarray
    caps: np.ndarray
    kept: np.ndarray
    converged: bool
    single_class: bool
    n_iter: int
    gap: float

    @property
    def n_support(self) -> int:
        return int(np.sum(self.solution.alphas > 0))


@njit(cache=True)
def _smo(K, y, alpha, caps, eps_stop, max_iter, trace, second_order):
    n = y.shape[0]
    grad = -np.ones(n)  # gradient of 1/2 a'Qa - e'a
    for k in range(n):
        if alpha[k] != 0.0:
            for m in range(n):
                grad[m] += y[m] * y[k] * K[k, m] * alpha[k]
    obj = 0.0  # value of 1/2 a'Qa - e'a
    for k in range(n):
        obj += 0.5 * alpha[k] * (grad[k] - 1.0)
    it = 0
    gap = np.inf
    t = 0.0
    i = -1
    j = -1
    while True:
        # apply the previous pair update and find the next violators in one pass
        pi = i
        pj = j
        i = -1
        j = -1
        m_up = -np.inf
        m_low = np.inf
        for k in range(n):
            if pi >= 0:
                grad[k] += t * y[k] * (K[pi, k] - K[pj, k])
            v = -y[k] * grad[k]
            if (y[k] > 0 and alpha[k] < caps[k]) or (y[k] < 0 and alpha[k] > 0):
                if v > m_up:
                    m_up = v
                    i = k
            if (y[k] > 0 and alpha[k] > 0) or (y[k] < 0 and alpha[k] < caps[k]):
                if v < m_low:
                    m_low = v
                    j = k
        if i < 0 or j < 0:
            gap = 0.0
            break
        gap = m_up - m_low
        if gap <= eps_stop or it >= max_iter:
            break
        if second_order:
            # keep i, pick j with the largest guaranteed ascent b^2 / a
            best = np.inf
            kii = K[i, i]
            for k in range(n):
                if (y[k] > 0 and alpha[k] > 0) or (y[k] < 0 and alpha[k] < caps[k]):
                    b = m_up + y[k] * grad[k]
                    if b > 0:
                        ak = kii + K[k, k] - 2.0 * K[i, k]
                        if ak <= 1e-12:
                            ak = 1e-12
                        if -b * b / ak < best:
                            best = -b * b / ak
                            j = k
        diff = m_up + y[j] * grad[j]
        a = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if a <= 1e-12:
            a = 1e-12
        t = diff / a
        lim_i = caps[i] - alpha[i] if y[i] > 0 else alpha[i]
        lim_j = alpha[j] if y[j] > 0 else caps[j] - alpha[j]
        if lim_i < t:
            t = lim_i
        if lim_j < t:
            t = lim_j
        alpha[i] += y[i] * t
        alpha[j] -= y[j] * t
        if t == lim_i:
            alpha[i] = caps[i] if y[i] > 0 else 0.0
        if t == lim_j:
            alpha[j] = 0.0 if y[j] > 0 else caps[j]
        obj += -t * diff + 0.5 * t * t * a
        if trace.shape[0] > 0 and it < trace.shape[0]:
            trace[it] = -obj
        it += 1
    return alpha, grad, it, gap


def _bias(alpha, grad, y, caps):
    r = -y * grad
    free = (alpha > 0) & (alpha < caps)
    if np.any(free):
        return float(np.mean(r[free]))
    at_zero = alpha <= 0
    at_cap = ~at_zero
    lower = (at_zero & (y > 0)) | (at_cap & (y < 0))
    upper = (at_zero & (y < 0)) | (at_cap & (y > 0))
    lb = np.max(r[lower]) if np.any(lower) else None
    ub = np.min(r[upper]) if np.any(upper) else None
    if lb is None:
        return float(ub)
    if ub is None:
        return float(lb)
    return 0.5 * float(lb + ub)


def solve_dual(K, labels, caps, config: SolverConfig, trace_length: int = 0, alpha0=None):
    """Run SMO on a precomputed Gram matrix.

    ``alpha0`` is an optional feasible starting point.  Returns
    ``(DualSolution, n_iter, gap, trace)`` where ``trace`` holds the dual
    objective after each pair update (first ``trace_length`` updates).
    """
    y = np.asarray(labels, dtype=float)
    caps = np.asarray(caps, dtype=float)
    K = np.ascontiguousarray(K, dtype=float)
    trace = np.full(trace_length, np.nan)
    tol = min(config.gap_tolerance, config.kkt_tolerance)
    if alpha0 is None:
        alpha = np.zeros(len(y))
    else:
        alpha = np.clip(np.array(alpha0, dtype=float), 0.0, caps)
        if abs(alpha @ y) > 1e-9 * max(1.0, caps.sum()):
            raise ValueError("alpha0 violates sum(alpha * labels) = 0")
    alpha, grad, n_iter, gap = _smo(K, y, alpha, caps, tol, config.max_passes, trace,
                                    config.selection == "second_order")
    b = _bias(alpha, grad, y, caps)
    Q = (y[:, None] * K) * y[None, :]
    objective = float(alpha.sum() - 0.5 * alpha @ Q @ alpha)
    return DualSolution(alpha, b, objective), int(n_iter), float(gap), trace[:min(n_iter, trace_length)]


def _to_matrix(histories) -> np.ndarray:
    rows = [h.values if isinstance(h, HistoryVector) else np.asarray(h, dtype=float) for h in histories]
    return np.atleast_2d(np.array(rows, dtype=float))


def solve_weighted_svm(H, actions, weights, config: SolverConfig, K=None, warm: SVMFit | None = None) -> SVMFit:
    """Array form of :func:`fit_weighted_svm`.

    ``K`` optionally supplies the Gram matrix of ``H`` (with ``config.kernel``
    already resolved) so cross-validation can reuse it.  ``warm`` is a fit on the
    same samples at another cost; its multipliers, rescaled by the cost ratio,
    start the solver.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    a = np.asarray(actions).astype(int).reshape(-1)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if not (len(H) == len(a) == len(w)):
        raise ValueError("H, actions and weights must have equal length")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    kept = np.flatnonzero(w != 0)
    if len(kept) == 0:
        raise AllWeightsZeroError("all sample weights are zero")
    labels = a[kept] * sign(w[kept])
    caps = config.cost * np.abs(w[kept])
    Hk = H[kept]
    if np.all(labels == labels[0]):
        rule = LinearRule(float(labels[0]), np.zeros(H.shape[1]))
        sol = DualSolution(np.zeros(len(kept)), float(labels[0]), 0.0)
        return SVMFit(rule, sol, labels, caps, kept, True, True, 0, 0.0)
    kernel = config.kernel.resolve(Hk)
    if K is None:
        Kk = gram(kernel, Hk)
    else:
        Kk = np.asarray(K)[np.ix_(kept, kept)]
    alpha0 = None
    if warm is not None and not warm.single_class and len(warm.kept) == len(kept):
        alpha0 = warm.solution.alphas * (caps / np.where(warm.caps > 0, warm.caps, 1.0))
    sol, n_iter, gap, _ = solve_dual(Kk, labels, caps, config, alpha0=alpha0)
    converged = gap <= config.kkt_tolerance
    if not converged:
        warnings.warn(f"SMO stopped after {n_iter} pair updates with KKT gap {gap:.3g}",
                      ConvergenceWarning, stacklevel=2)
    coef = sol.alphas * labels
    if kernel.kind == "linear":
        rule = LinearRule(sol.bias, coef @ Hk)
    else:
        sv = sol.alphas > 0
        rule = KernelRule(Hk[sv], coef[sv], sol.bias, kernel)
    return SVMFit(rule, sol, labels, caps, kept, converged, False, n_iter, gap)


def fit_weighted_svm(samples: Sequence[WeightedSample], config: SolverConfig) -> SVMFit:
    """Fit the weighted large-margin rule to ``samples``; the rule is ``fit.rule``.

    Zero-weight samples are dropped.  If every remaining transformed label
    ``a_i * sign(w_i)`` is the same, a constant rule predicting it is returned
    with ``single_class=True``.  If the KKT tolerance is not reached within
    ``config.max_passes`` pair updates, the last (best) iterate is returned with
    ``converged=False`` and a :class:`ConvergenceWarning`.
    """
    if not samples:
        raise AllWeightsZeroError("no samples")
    H = _to_matrix([s.history for s in samples])
    return solve_weighted_svm(H, [s.action for s in samples], [s.weight for s in samples], config)


def check_kkt(samples, config: SolverConfig, solution: DualSolution) -> float:
    """Maximum KKT violation of ``solution`` for ``samples``.

    ``samples`` are those the solution was computed for (zero weights already
    removed).  Returns the largest of: margin violations ``1 - l_i f(h_i)`` for
    ``alpha_i = 0``, ``l_i f(h_i) - 1`` for capped ``alpha_i``, ``|l_i f(h_i) - 1|``
    for free ``alpha_i``, box violations and ``|sum_i alpha_i l_i|``.
    """
    H = _to_matrix([s.history for s in samples])
    w = np.array([s.weight for s in samples], dtype=float)
    a = np.array([s.action for s in samples])
    alpha = np.asarray(solution.alphas, dtype=float)
    if len(alpha) != len(samples):
        raise ValueError(f"solution has {len(alpha)} multipliers for {len(samples)} samples")
    labels = a * sign(w)
    caps = config.cost * np.abs(w)
    K = gram(config.kernel.resolve(H), H)
    margin = labels * (K @ (alpha * labels) + solution.bias)
    atol = 1e-12 * np.maximum(caps, 1.0)
    at_zero = alpha <= atol
    at_cap = alpha >= caps - atol
    free = ~at_zero & ~at_cap
    viol = np.zeros(len(alpha))
    viol[at_zero] = np.maximum(0.0, 1.0 - margin[at_zero])
    viol[at_cap & ~at_zero] = np.maximum(0.0, margin[at_cap & ~at_zero] - 1.0)
    viol[free] = np.abs(margin[free] - 1.0)
    box = np.maximum(np.maximum(-alpha, alpha - caps), 0.0)
    return float(max(viol.max(initial=0.0), box.max(initial=0.0), abs(float(alpha @ labels))))
