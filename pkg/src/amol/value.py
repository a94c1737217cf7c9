"""Value of a regimen: inverse-probability-weighted estimate and simulated rollout."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Regimen, as_trial_data


@dataclass(frozen=True)
class ValueEstimate:
    value: float
    matched_fraction: float
    n: int

    def to_dict(self) -> dict:
        return {"value": self.value, "matched_fraction": self.matched_fraction, "n": self.n}


def _matches(regimen, data, first: int) -> np.ndarray:
    K = data.n_stages
    if regimen.n_stages != K:
        raise ValueError(f"regimen has {regimen.n_stages} rules, data has {K} stages")
    ok = np.ones(data.n, dtype=bool)
    for k in range(first, K + 1):
        t = k - 1
        rec = regimen.decide_stage(k, data)
        ok &= (data.actions[:, t] == rec) | ~data.eligible[:, t]
    return ok


def stage_value(regimen: Regimen, data, k: int = 1) -> ValueEstimate:
    """IPW value of the rewards from stage ``k`` on, following the regimen from ``k`` on."""
    data = as_trial_data(data)
    if data.n == 0:
        raise ValueError("no subjects")
    t = k - 1
    props = np.where(data.eligible[:, t:], data.propensities[:, t:], 1.0)
    if np.any(props <= 0):
        raise ValueError("zero propensity encountered")
    ok = _matches(regimen, data, k)
    # fixed subject order and pairwise summation keep the result reproducible
    terms = ok * data.rewards[:, t:].sum(axis=1) / props.prod(axis=1)
    return ValueEstimate(float(np.sum(terms) / data.n), float(ok.mean()), data.n)


def estimate_value(regimen: Regimen, data) -> ValueEstimate:
    """Mean over subjects of ``prod_k 1{A_k = D_k(H_k)} * sum_k R_k / prod_k pi_k``.

    Ineligible stages count as matched with propensity 1.
    """
    return stage_value(regimen, data, 1)


def true_value_mc(regimen, generator, n_test: int = 10_000, seed: int = 0) -> float:
    """Mean total reward of ``n_test`` simulated subjects treated by ``regimen``.

    ``generator`` must provide ``simulate(n, rng, policy=...)`` returning a
    ``(TrialData, latent)`` pair; ``regimen`` needs ``decide_stage(k, data, latent)``
    (a :class:`Regimen` or one of the simulation oracles).
    """
    rng = np.random.default_rng(seed)
    data, _ = generator.simulate(n_test, rng, policy=regimen)
    return float(np.mean(data.rewards.sum(axis=1)))
