"""Four-stage simulation scenarios and their optimal regimens.

Setting 1
    20 baseline features (the first ten equicorrelated at 0.2, unit variances),
    rewards that feed forward into later stages, and history-dependent
    randomization probabilities.

Setting 2
    Ten latent groups with group-specific optimal treatment sequences; only
    the four-stage total ``R_4`` is nonzero.  The first ten of 30 features share
    a group mean, the rest are noise.  Treatments are fair coins.

Both generators expose ``simulate(n, rng, policy=None)``.  With a policy the
actions are set by ``policy.decide_stage(k, data_so_far, latent)`` instead of
being randomized, which is how the value of a regimen is measured.

Optimal regimen for setting 1
-----------------------------
Work backwards with ``e ~ N(0, 1)`` noise at every stage and ``c3 = X5^2 + X6``.

* Stage 4: ``E[R_4 | H_4, a] = (R_3 - 0.5) a`` so the rule is ``sign(R_3 - 0.5)`` and
  the stage-4 value is ``|R_3 - 0.5|``.
* Stage 3: ``R_3 + |R_3 - 0.5| = max(2 R_3 - 0.5, 0.5)`` is increasing in ``R_3``,
  and ``R_3 ~ N(2 (R_2 + X4) a + c3, 1)``, so the rule is ``sign(R_2 + X4)``.  With
  ``m = 2 |R_2 + X4| + c3`` the value from stage 3 on is
  ``0.5 + 2 * psi(m - 0.5)`` where ``psi(u) = u Phi(u) + phi(u)`` is ``E[max(N(u,1), 0)]``.
* Stage 2: ``R_2 = v a + e`` with ``v = R_1 + X2^2 + X3^2 - 0.8``.  Because the stage-3
  value grows with ``|R_2 + X4|``, ``sign(v)`` is not always optimal; the rule
  compares ``E[R_2 + V_3(R_2)]`` for both actions by Gauss-Hermite quadrature.
* Stage 1: same comparison one level up, with the stage-2 maximum inside a
  nested quadrature over ``R_1 = X1 a + e``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.stats import norm

from .core import TrialData

N_GROUPS = 10


def equicorrelated_cov(p: int, n_corr: int = 10, rho: float = 0.2) -> np.ndarray:
    """Unit-variance covariance with the first ``n_corr`` variables pairwise correlated at ``rho``."""
    cov = np.eye(p)
    cov[:n_corr, :n_corr] = rho
    np.fill_diagonal(cov, 1.0)
    return cov


def _partial(features, actions, rewards, props) -> TrialData:
    return TrialData(features, actions.copy(), rewards.copy(), props.copy())


def _draw_actions(policy, t, features, actions, rewards, props, latent, u, p_plus):
    if policy is None:
        return np.where(u < p_plus, 1, -1)
    a = np.asarray(policy.decide_stage(t + 1, _partial(features, actions, rewards, props), latent))
    return a.astype(np.int64)


# -- setting 1 --------------------------------------------------------------

def setting1_propensity(stage: int, X, R) -> np.ndarray:
    """``P(A_k = +1 | H_k)`` for 1-based ``stage``."""
    if stage == 1:
        return 1.0 / (1.0 + np.exp(-0.5 * X[:, 0]))
    if stage == 2:
        return 1.0 / (1.0 + np.exp(0.1 * R[:, 0]))
    if stage == 3:
        return 1.0 / (1.0 + np.exp(0.2 * X[:, 2]))
    if stage == 4:
        return 1.0 / (1.0 + np.exp(0.2 * X[:, 3]))
    raise ValueError(f"stage {stage} out of range 1..4")


def setting1_reward(stage: int, X, A, R, noise) -> np.ndarray:
    """Stage reward given features ``X``, stage action ``A`` and earlier rewards ``R``."""
    if stage == 1:
        return X[:, 0] * A + noise
    if stage == 2:
        return (R[:, 0] + X[:, 1] ** 2 + X[:, 2] ** 2 - 0.8) * A + noise
    if stage == 3:
        return 2.0 * (R[:, 1] + X[:, 3]) * A + X[:, 4] ** 2 + X[:, 5] + noise
    if stage == 4:
        return (R[:, 2] - 0.5) * A + noise
    raise ValueError(f"stage {stage} out of range 1..4")


class Setting1:
    n_stages = 4
    feature_dims = (20, 0, 0, 0)
    optimal_value = 10.1

    def __init__(self, noise_scale: float = 1.0):
        self.noise_scale = noise_scale
        self._chol = np.linalg.cholesky(equicorrelated_cov(20))

    def simulate(self, n: int, rng, policy=None):
        if n < 1:
            raise ValueError("n must be positive")
        X = rng.standard_normal((n, 20)) @ self._chol.T
        eps = self.noise_scale * rng.standard_normal((n, 4))
        u = rng.random((n, 4))
        features = (X, np.zeros((n, 0)), np.zeros((n, 0)), np.zeros((n, 0)))
        A = np.ones((n, 4), dtype=np.int64)
        R = np.zeros((n, 4))
        P = np.ones((n, 4))
        for t in range(4):
            p_plus = setting1_propensity(t + 1, X, R)
            A[:, t] = _draw_actions(policy, t, features, A, R, P, None, u[:, t], p_plus)
            P[:, t] = np.where(A[:, t] == 1, p_plus, 1.0 - p_plus)
            R[:, t] = setting1_reward(t + 1, X, A[:, t], R, eps[:, t])
        return TrialData(features, A, R, P), None


def _psi(u):
    return u * norm.cdf(u) + norm.pdf(u)


class Setting1Oracle:
    """Optimal regimen for :class:`Setting1` (derivation in the module docstring)."""

    def __init__(self, n_nodes: int = 24):
        x, w = hermegauss(n_nodes)
        self.nodes = x
        self.weights = w / w.sum()

    def _v3(self, r2, X):
        m = 2.0 * np.abs(r2 + X[:, 3:4]) + (X[:, 4:5] ** 2 + X[:, 5:6])
        return 0.5 + 2.0 * _psi(m - 0.5)

    def _q2(self, r1, X, a):
        # r1: (n, m) candidate stage-1 rewards; returns E[R_2 + V_3] for action a, shape (n, m)
        v = r1 + (X[:, 1:2] ** 2 + X[:, 2:3] ** 2 - 0.8)
        out = a * v
        for e, w in zip(self.nodes, self.weights):
            out = out + w * self._v3(a * v + e, X)
        return out

    def _q1(self, X, a):
        r1 = a * X[:, 0:1] + self.nodes[None, :]
        v2 = np.maximum(self._q2(r1, X, 1), self._q2(r1, X, -1))
        return a * X[:, 0] + v2 @ self.weights

    def decide_stage(self, k: int, data: TrialData, latent=None) -> np.ndarray:
        X = data.features[0]
        R = data.rewards
        if k == 4:
            return np.where(R[:, 2] - 0.5 >= 0, 1, -1)
        if k == 3:
            return np.where(R[:, 1] + X[:, 3] >= 0, 1, -1)
        if k == 2:
            r1 = R[:, 0:1]
            return np.where(self._q2(r1, X, 1)[:, 0] >= self._q2(r1, X, -1)[:, 0], 1, -1)
        if k == 1:
            out = np.empty(len(X), dtype=np.int64)
            for s in range(0, len(X), 20_000):
                Xs = X[s:s + 20_000]
                out[s:s + 20_000] = np.where(self._q1(Xs, 1) >= self._q1(Xs, -1), 1, -1)
            return out
        raise ValueError(f"stage {k} out of range 1..4")


# -- setting 2 ---------------------------------------------------------------------

def group_optimal_action(group, stage):
    """``2 * (floor(l / 2^(j-1)) mod 2) - 1`` for group ``l`` and 1-based stage ``j``."""
    group = np.asarray(group)
    return 2 * ((group // 2 ** (stage - 1)) % 2) - 1


class Setting2:
    n_stages = 4
    feature_dims = (30, 0, 0, 0)
    optimal_value = 4.0

    def __init__(self, group_means, noise_scale: float = 1.0):
        self.group_means = np.asarray(group_means, dtype=float)
        if self.group_means.shape != (N_GROUPS,):
            raise ValueError(f"need {N_GROUPS} group means")
        self.noise_scale = noise_scale
        self._chol = np.linalg.cholesky(equicorrelated_cov(30))

    @classmethod
    def draw(cls, rng, noise_scale: float = 1.0) -> "Setting2":
        """Group means from N(0, 5) (variance 5)."""
        return cls(rng.normal(0.0, np.sqrt(5.0), N_GROUPS), noise_scale)

    def simulate(self, n: int, rng, policy=None):
        if n < 1:
            raise ValueError("n must be positive")
        group = rng.integers(1, N_GROUPS + 1, n)
        X = rng.standard_normal((n, 30)) @ self._chol.T
        X[:, :10] += self.group_means[group - 1][:, None]
        eps = self.noise_scale * rng.standard_normal(n)
        u = rng.random((n, 4))
        features = (X, np.zeros((n, 0)), np.zeros((n, 0)), np.zeros((n, 0)))
        A = np.ones((n, 4), dtype=np.int64)
        R = np.zeros((n, 4))
        P = np.ones((n, 4))
        for t in range(4):
            A[:, t] = _draw_actions(policy, t, features, A, R, P, group, u[:, t], 0.5)
            P[:, t] = 0.5
        R[:, 3] = sum(A[:, t] * group_optimal_action(group, t + 1) for t in range(4)) + eps
        return TrialData(features, A, R, P), group


class Setting2Oracle:
    """Treats every subject with its group's optimal sequence (needs the latent group)."""

    def decide_stage(self, k: int, data: TrialData, latent=None) -> np.ndarray:
        if latent is None:
            raise ValueError("the setting-2 oracle needs the latent group labels")
        return group_optimal_action(latent, k)


class RandomPolicy:
    """Fair-coin treatment at every stage, independent of history."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def decide_stage(self, k: int, data: TrialData, latent=None) -> np.ndarray:
        return np.where(self.rng.random(data.n) < 0.5, 1, -1)


@dataclass(frozen=True)
class ConstantPolicy:
    action: int = 1

    def decide_stage(self, k: int, data: TrialData, latent=None) -> np.ndarray:
        return np.full(data.n, self.action, dtype=np.int64)


def make_generator(setting: int, population_seed: int = 0):
    if setting == 1:
        return Setting1()
    if setting == 2:
        return Setting2.draw(np.random.default_rng([population_seed, 2]))
    raise ValueError(f"unknown setting {setting!r}")


def oracle_for(setting: int):
    return Setting1Oracle() if setting == 1 else Setting2Oracle()


def gen_setting1(n: int, seed: int = 0) -> TrialData:
    data, _ = Setting1().simulate(n, np.random.default_rng(seed))
    return data


def gen_setting2(n: int, seed: int = 0, population_seed: int | None = None) -> TrialData:
    """Setting-2 sample; group means come from ``population_seed`` (default ``seed``)."""
    gen = make_generator(2, seed if population_seed is None else population_seed)
    data, _ = gen.simulate(n, np.random.default_rng(seed))
    return data
