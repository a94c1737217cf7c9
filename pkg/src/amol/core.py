"""Trajectories, histories and decision rules shared by every learner.

Two representations of a trial live here.  ``Trajectory`` / ``StageObservation``
are the per-subject records used by the I/O layer and small examples, and
``TrialData`` is the column-oriented form (one array per field, subjects in
rows) that the learners and simulators work on.  Both convert losslessly.

History vectors follow one fixed layout, controlled by ``HistoryScheme``::

    X_1, ..., X_k | A_1, ..., A_{k-1} | R_1, ..., R_{k-1} | A_1*X_1, ..., A_{k-1}*X_{k-1} | A_1*R_1, ...

Blocks switched off in the scheme are omitted; the last block is off by default.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .kernels import KernelSpec, cross_gram


def sign(values) -> np.ndarray:
    """Elementwise sign with the tie ``sign(0) = +1``."""
    return np.where(np.asarray(values) >= 0, 1, -1)


@dataclass(frozen=True)
class StageObservation:
    features: np.ndarray
    action: int
    reward: float
    propensity: float

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float).reshape(-1)
        feats.flags.writeable = False
        object.__setattr__(self, "features", feats)


@dataclass(frozen=True)
class Trajectory:
    stages: tuple[StageObservation, ...]
    eligible: tuple[bool, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if self.eligible is None:
            object.__setattr__(self, "eligible", (True,) * len(self.stages))
        else:
            object.__setattr__(self, "eligible", tuple(bool(e) for e in self.eligible))
        if len(self.eligible) != len(self.stages):
            raise ValueError("eligible must have one entry per stage")
        for k, (obs, ok) in enumerate(zip(self.stages, self.eligible), start=1):
            _check_stage(obs.action, obs.reward, obs.propensity, obs.features, ok, k)

    @property
    def n_stages(self) -> int:
        return len(self.stages)


def _check_stage(action, reward, propensity, features, eligible, k):
    if action not in (-1, 1):
        raise ValueError(f"stage {k}: action must be -1 or +1, got {action!r}")
    if not np.isfinite(reward):
        raise ValueError(f"stage {k}: reward is not finite")
    if not np.all(np.isfinite(features)):
        raise ValueError(f"stage {k}: features contain non-finite values")
    if eligible:
        if not 0.0 < propensity < 1.0:
            raise ValueError(f"stage {k}: propensity must lie in (0, 1), got {propensity!r}")
    elif propensity != 1.0:
        raise ValueError(f"stage {k}: ineligible stages carry propensity 1")


@dataclass(frozen=True)
class TrialData:
    """Column-oriented trial data.

    Attributes
    ----------
    features : tuple of arrays
        ``features[t]`` has shape ``(n, p_t)``; ``p_t`` may be zero.
    actions : int array, shape (n, K)
        Entries in {-1, +1}.
    rewards, propensities : float arrays, shape (n, K)
        ``propensities`` is the probability of the action actually received.
        Ineligible stages carry propensity 1.
    eligible : bool array, shape (n, K)
    """

    features: tuple
    actions: np.ndarray
    rewards: np.ndarray
    propensities: np.ndarray
    eligible: np.ndarray = None

    def __post_init__(self):
        feats = tuple(np.asarray(f, dtype=float).reshape(len(self.actions), -1) for f in self.features)
        actions = np.asarray(self.actions, dtype=np.int64)
        rewards = np.asarray(self.rewards, dtype=float)
        props = np.asarray(self.propensities, dtype=float)
        elig = (np.ones(actions.shape, dtype=bool) if self.eligible is None
                else np.asarray(self.eligible, dtype=bool))
        if actions.ndim != 2:
            raise ValueError("actions must be an (n, K) array")
        if not (rewards.shape == props.shape == elig.shape == actions.shape):
            raise ValueError("actions, rewards, propensities and eligible must share shape (n, K)")
        if len(feats) != actions.shape[1]:
            raise ValueError("need one feature block per stage")
        for name, arr in (("actions", actions), ("rewards", rewards),
                          ("propensities", props), ("eligible", elig)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        for f in feats:
            f.flags.writeable = False
        object.__setattr__(self, "features", feats)

    @property
    def n(self) -> int:
        return self.actions.shape[0]

    @property
    def n_stages(self) -> int:
        return self.actions.shape[1]

    @property
    def feature_dims(self) -> tuple[int, ...]:
        return tuple(f.shape[1] for f in self.features)

    def validate(self) -> "TrialData":
        """Raise ``ValueError`` on any invariant violation; return self."""
        if not np.all(np.isin(self.actions, (-1, 1))):
            raise ValueError("actions must be -1 or +1")
        for f in self.features:
            if not np.all(np.isfinite(f)):
                raise ValueError("features contain non-finite values")
        if not np.all(np.isfinite(self.rewards)):
            raise ValueError("rewards contain non-finite values")
        p, e = self.propensities, self.eligible
        if np.any(e & ~((p > 0) & (p < 1))):
            raise ValueError("propensities of eligible stages must lie in (0, 1)")
        if np.any(~e & (p != 1.0)):
            raise ValueError("ineligible stages must carry propensity 1")
        return self

    def subset(self, index) -> "TrialData":
        index = np.asarray(index)
        return TrialData(tuple(f[index] for f in self.features), self.actions[index],
                         self.rewards[index], self.propensities[index], self.eligible[index])

    @classmethod
    def from_trajectories(cls, trajectories: Sequence[Trajectory]) -> "TrialData":
        if not trajectories:
            raise ValueError("no trajectories")
        K = trajectories[0].n_stages
        dims = [len(s.features) for s in trajectories[0].stages]
        for i, tr in enumerate(trajectories):
            if tr.n_stages != K or [len(s.features) for s in tr.stages] != dims:
                raise ValueError(f"trajectory {i} does not match the dataset schema")
        feats = tuple(np.array([tr.stages[t].features for tr in trajectories]).reshape(len(trajectories), dims[t])
                      for t in range(K))
        actions = [[s.action for s in tr.stages] for tr in trajectories]
        rewards = [[s.reward for s in tr.stages] for tr in trajectories]
        props = [[s.propensity for s in tr.stages] for tr in trajectories]
        elig = [list(tr.eligible) for tr in trajectories]
        return cls(feats, actions, rewards, props, elig)

    def to_trajectories(self) -> list[Trajectory]:
        out = []
        for i in range(self.n):
            stages = tuple(StageObservation(self.features[t][i].copy(), int(self.actions[i, t]),
                                            float(self.rewards[i, t]), float(self.propensities[i, t]))
                           for t in range(self.n_stages))
            out.append(Trajectory(stages, tuple(bool(e) for e in self.eligible[i])))
        return out


def as_trial_data(data) -> TrialData:
    if isinstance(data, TrialData):
        return data
    return TrialData.from_trajectories(list(data))


@dataclass(frozen=True)
class HistoryScheme:
    actions: bool = True
    rewards: bool = True
    action_feature_interactions: bool = True
    action_reward_interactions: bool = False

    def length(self, feature_dims: Sequence[int], k: int) -> int:
        """Length of the stage-``k`` history (``k`` is 1-based)."""
        if not 1 <= k <= len(feature_dims):
            raise ValueError(f"stage {k} out of range 1..{len(feature_dims)}")
        prior = k - 1
        d = sum(feature_dims[:k])
        d += prior * self.actions + prior * self.rewards
        d += sum(feature_dims[:prior]) * self.action_feature_interactions
        d += prior * self.action_reward_interactions
        return d

    def to_dict(self) -> dict:
        return {"actions": self.actions, "rewards": self.rewards,
                "action_feature_interactions": self.action_feature_interactions,
                "action_reward_interactions": self.action_reward_interactions}

    @classmethod
    def from_dict(cls, d: dict) -> "HistoryScheme":
        return cls(**{k: bool(v) for k, v in d.items()})


@dataclass(frozen=True)
class HistoryVector:
    values: np.ndarray
    stage: int


def history_from_arrays(features, actions, rewards, k: int, scheme: HistoryScheme) -> np.ndarray:
    """Stage-``k`` history matrix from raw column blocks (only stages < k of A, R are read)."""
    n = actions.shape[0]
    prior = k - 1
    blocks = [features[t] for t in range(k)]
    A = actions[:, :prior].astype(float)
    R = rewards[:, :prior]
    if scheme.actions:
        blocks.append(A)
    if scheme.rewards:
        blocks.append(R)
    if scheme.action_feature_interactions:
        blocks.extend(A[:, [t]] * features[t] for t in range(prior))
    if scheme.action_reward_interactions:
        blocks.append(A * R)
    if not blocks:
        return np.zeros((n, 0))
    return np.hstack(blocks)


def history_matrix(data: TrialData, k: int, scheme: HistoryScheme = HistoryScheme()) -> np.ndarray:
    """Stacked stage-``k`` histories (1-based ``k``), shape ``(n, scheme.length(...))``."""
    if not 1 <= k <= data.n_stages:
        raise ValueError(f"stage {k} out of range 1..{data.n_stages}")
    return history_from_arrays(data.features, data.actions, data.rewards, k, scheme)


def build_history(traj: Trajectory, k: int, scheme: HistoryScheme = HistoryScheme(),
                  feature_dims: Sequence[int] | None = None) -> HistoryVector:
    if not 1 <= k <= traj.n_stages:
        raise ValueError(f"stage {k} out of range 1..{traj.n_stages}")
    dims = [len(s.features) for s in traj.stages]
    if feature_dims is not None and list(feature_dims) != dims:
        raise ValueError(f"feature dimensions {dims} do not match schema {list(feature_dims)}")
    data = TrialData.from_trajectories([traj])
    return HistoryVector(history_matrix(data, k, scheme)[0], k)


# -- decision rules ---------------------------------------------------------

def _as_matrix(h, dim):
    if isinstance(h, HistoryVector):
        h = h.values
    H = np.asarray(h, dtype=float)
    single = H.ndim == 1
    H = np.atleast_2d(H)
    if H.shape[1] != dim:
        raise ValueError(f"history has dimension {H.shape[1]}, rule expects {dim}")
    return H, single


@dataclass(frozen=True)
class LinearRule:
    bias: float
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float).reshape(-1)
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def dim(self) -> int:
        return len(self.coefficients)

    def decision_function(self, h):
        H, single = _as_matrix(h, self.dim)
        f = H @ self.coefficients + self.bias
        return f[0] if single else f

    def to_dict(self) -> dict:
        return {"kind": "linear", "bias": self.bias, "coefficients": self.coefficients.tolist()}


@dataclass(frozen=True)
class KernelRule:
    """``f(h) = sum_i dual_coef[i] * K(z_i, z(h)) + bias`` with ``z(h) = (h - shift) / scale``.

    ``support`` holds the already-transformed points ``z_i``.
    """

    support: np.ndarray
    dual_coef: np.ndarray
    bias: float
    kernel: KernelSpec
    shift: np.ndarray | None = None
    scale: np.ndarray | None = None

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.support, dtype=float))
        c = np.asarray(self.dual_coef, dtype=float).reshape(-1)
        if len(c) != len(S):
            raise ValueError("dual_coef and support must have equal length")
        d = S.shape[1]
        shift = np.zeros(d) if self.shift is None else np.asarray(self.shift, dtype=float)
        scale = np.ones(d) if self.scale is None else np.asarray(self.scale, dtype=float)
        for name, arr in (("support", S), ("dual_coef", c), ("shift", shift), ("scale", scale)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def dim(self) -> int:
        return self.support.shape[1]

    def decision_function(self, h):
        H, single = _as_matrix(h, self.dim)
        Z = (H - self.shift) / self.scale
        f = cross_gram(self.kernel, Z, self.support) @ self.dual_coef + self.bias
        return f[0] if single else f

    def to_dict(self) -> dict:
        return {"kind": "kernel", "kernel": self.kernel.to_dict(), "bias": self.bias,
                "support": self.support.tolist(), "dual_coef": self.dual_coef.tolist(),
                "shift": self.shift.tolist(), "scale": self.scale.tolist()}


DecisionRule = LinearRule | KernelRule


def rule_from_dict(d: dict) -> DecisionRule:
    if d["kind"] == "linear":
        return LinearRule(d["bias"], np.asarray(d["coefficients"], dtype=float))
    if d["kind"] == "kernel":
        support = np.asarray(d["support"], dtype=float)
        if support.ndim == 1:
            support = support.reshape(len(d["dual_coef"]), -1)
        return KernelRule(support, d["dual_coef"], d["bias"], KernelSpec.from_dict(d["kernel"]),
                          d.get("shift"), d.get("scale"))
    raise ValueError(f"unknown rule kind {d['kind']!r}")


def decide(rule: DecisionRule, h):
    """Treatment recommended by ``rule``: ``sign(f(h))`` with ties going to +1.

    Accepts a single history (returns an int) or a matrix of histories.
    """
    f = rule.decision_function(h)
    if np.ndim(f) == 0:
        return 1 if f >= 0 else -1
    return sign(f)


@dataclass(frozen=True)
class Regimen:
    rules: tuple
    scheme: HistoryScheme = field(default_factory=HistoryScheme)
    feature_dims: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        if self.feature_dims is not None:
            dims = tuple(int(p) for p in self.feature_dims)
            object.__setattr__(self, "feature_dims", dims)
            for k, rule in enumerate(self.rules, start=1):
                if rule.dim != self.scheme.length(dims, k):
                    raise ValueError(f"rule {k} expects dimension {rule.dim}, "
                                     f"stage-{k} histories have {self.scheme.length(dims, k)}")

    @property
    def n_stages(self) -> int:
        return len(self.rules)

    def decide(self, k: int, h):
        return decide(self.rules[k - 1], h)

    def decide_stage(self, k: int, data: TrialData, latent=None) -> np.ndarray:
        """Recommended stage-``k`` actions for every subject of ``data``."""
        return sign(self.rules[k - 1].decision_function(history_matrix(data, k, self.scheme)))

    def to_dict(self) -> dict:
        return {"format": "amol.regimen", "version": 1, "scheme": self.scheme.to_dict(),
                "feature_dims": None if self.feature_dims is None else list(self.feature_dims),
                "rules": [r.to_dict() for r in self.rules]}

    @classmethod
    def from_dict(cls, d: dict) -> "Regimen":
        if d.get("format") != "amol.regimen":
            raise ValueError("not a regimen document")
        if d.get("version") != 1:
            raise ValueError(f"unsupported regimen version {d.get('version')!r}")
        return cls(tuple(rule_from_dict(r) for r in d["rules"]), HistoryScheme.from_dict(d["scheme"]),
                   d.get("feature_dims"))
