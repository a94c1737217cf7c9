import json
from types import SimpleNamespace

import numpy as np
import pytest

from amol.core import LinearRule, TrialData, history_matrix
from amol.lasso import fit_lasso_cv, predict
from amol.learners import (FitReport, LearnerConfig, NoFollowersError, _fit_stage_rule, _seed,
                           augmented_pseudo_outcome, cross_validate_cost, fit_amol_efficient, fit_amol_simple,
                           fit_methods, fit_olearning, fit_qlearning, pseudo_outcomes, q_chain, stage_design)
from amol.simulation import gen_setting2

import two_stage
from conftest import random_trial

FAST = LearnerConfig(cost_grid=(0.25, 1.0, 4.0))


def single_stage(n, rng, effect=1.0):
    X = rng.normal(size=(n, 2))
    A = rng.choice([-1, 1], n)
    R = effect * A * X[:, 0] + 0.5 * rng.normal(size=n)
    return TrialData((X,), A[:, None], R[:, None], np.full((n, 1), 0.5))


def test_qlearning_recovers_single_stage_rule():
    rng = np.random.default_rng(0)
    report = fit_qlearning(single_stage(500, rng))
    grid = rng.uniform(-2, 2, size=(2000, 2))
    agree = report.regimen.decide(1, grid) == np.where(grid[:, 0] >= 0, 1, -1)
    assert agree.mean() >= 0.95


def test_qlearning_null_effect():
    rng = np.random.default_rng(1)
    data = single_stage(400, rng, effect=0.0)
    report = fit_qlearning(data)
    H = data.features[0]
    contrast = report.regimen.rules[0].decision_function(H)
    assert np.mean(np.abs(contrast)) < 0.2
    if np.all(contrast == 0):
        assert np.all(report.regimen.decide(1, H) == 1)


def test_q_chain_targets():
    rng = np.random.default_rng(2)
    data = random_trial(rng, n=80, K=2, dims=(2, 1))
    cfg = LearnerConfig()
    chain = q_chain(data, cfg)
    H2 = history_matrix(data, 2)
    np.testing.assert_allclose(chain.g_values[:, 1], np.maximum(chain.models[1].predict(H2, 1),
                                                                  chain.models[1].predict(H2, -1)))
    # stage 1 regresses R1 + ghat_2 on (H1, A1, A1 * H1)
    H1 = history_matrix(data, 1)
    target = data.rewards[:, 0] + chain.g_values[:, 1]
    fit = fit_lasso_cv(stage_design(H1, data.actions[:, 0]), target, seed=_seed(cfg, 1, 1))
    np.testing.assert_array_equal(fit.coefficients, chain.models[0].fit.coefficients)


def test_olearning_single_stage_matches_recentred_weights():
    rng = np.random.default_rng(3)
    data = random_trial(rng, n=60, K=1, dims=(2,))
    report = fit_olearning(data, FAST)
    R, P = data.rewards[:, 0], data.propensities[:, 0]
    # O-learning is the recentred fit with s == min R
    rule, _ = _fit_stage_rule(data.features[0], data.actions[:, 0], (R - R.min()) / P, FAST, 1)
    assert report.regimen.rules[0].to_dict() == rule.to_dict()


def test_olearning_stage_one_uses_followers_only():
    rng = np.random.default_rng(4)
    data = random_trial(rng, n=80, K=2, dims=(2, 1))
    report = fit_olearning(data, FAST)
    rec = report.regimen.decide(2, history_matrix(data, 2))
    assert report.diagnostics[1].n_used == 80
    assert report.diagnostics[0].n_used == int(np.sum(data.actions[:, 1] == rec))


def test_olearning_without_followers_fails(monkeypatch):
    import amol.learners as L

    def always_minus(H, A, W, config, stage):
        return LinearRule(-1.0, np.zeros(H.shape[1])), dict(n_support=0, cost=None, cv_scores=None,
                                                            converged=True, single_class=True)

    monkeypatch.setattr(L, "_fit_stage_rule", always_minus)
    rng = np.random.default_rng(5)
    data = random_trial(rng, n=20, K=2, dims=(1, 1))
    data = TrialData(data.features, np.ones((20, 2), dtype=int), data.rewards, data.propensities)
    with pytest.raises(NoFollowersError):
        fit_olearning(data, FAST)


def test_simple_pseudo_outcome_hand_computation():
    # K = 3, pseudo-outcome from stage 2, pi = 0.5 everywhere
    feats = (np.zeros((2, 1)), np.zeros((2, 0)), np.zeros((2, 0)))
    A = np.array([[1, 1, -1], [1, 1, 1]])
    R = np.array([[0.0, 2.0, 3.0], [0.0, 1.0, 4.0]])
    data = TrialData(feats, A, R, np.full((2, 3), 0.5))
    rules = np.array([[1, 1, -1], [1, 1, -1]])
    g = np.array([[0.0, 1.5, 0.0], [0.0, -2.0, 0.0]])
    out = pseudo_outcomes(data, 2, rules, g, "simple")
    # subject 1 follows both rules: (R2 + R3) / 0.25 - (0.75 / 0.25) * g
    assert out.value[0] == pytest.approx(5.0 / 0.25 - 3.0 * 1.5)
    # subject 2 deviates at stage 3: only the augmentation, -(0 - 0.25) / 0.25 * g
    assert out.value[1] == pytest.approx(-2.0)
    np.testing.assert_allclose(out.value, out.ipw_term + out.augmentation_term)


def test_efficient_pseudo_outcome_last_stage_deviation():
    # K = 2 from stage 1; follows stage 1 (pi 0.6) and deviates at stage 2 (pi of received 0.3)
    data = TrialData((np.zeros((1, 1)), np.zeros((1, 0))), [[1, -1]], [[2.0, 7.0]], [[0.6, 0.3]])
    rules = np.array([[1, 1]])
    g = np.array([[1.25, -0.5]])
    out = pseudo_outcomes(data, 1, rules, g, "efficient")
    m1, m2 = 1.25, -0.5 + 2.0
    # M = (1, 0), C = (0, 1), P(M) = (0.6, 0.42), hazards (0.4, 0.3)
    term1 = (0 - 0.4 * 1) / 0.6 * m1
    term2 = (1 - 0.3 * 1) / 0.42 * m2
    assert out.ipw_term == pytest.approx(0.0)
    assert out.augmentation_term[0] == pytest.approx(term1 + term2, abs=1e-12)
    # the deviation indicator is carried by the last stage only
    assert term2 == pytest.approx(m2 / 0.6)


def test_literal_boundary_drops_stage_k_term():
    data = TrialData((np.zeros((1, 1)), np.zeros((1, 0))), [[1, 1]], [[2.0, 7.0]], [[0.6, 0.3]])
    rules = np.array([[1, 1]])
    g = np.array([[1.25, -0.5]])
    lit = pseudo_outcomes(data, 1, rules, g, "efficient", compliant_boundary=False)
    full = pseudo_outcomes(data, 1, rules, g, "efficient")
    assert lit.ipw_term == pytest.approx(full.ipw_term)
    # with M_0 = 0 the stage-1 term is -M_1 / P(M_1) * m_1 instead of (1 - M_1 - 0.4) / P(M_1) * m_1
    diff = full.augmentation_term[0] - lit.augmentation_term[0]
    assert diff == pytest.approx((1 - 0.4) / 0.6 * 1.25)


def test_compliant_unit_propensity_gives_reward_sum():
    rng = np.random.default_rng(6)
    n, K = 10, 3
    R = rng.normal(size=(n, K))
    A = rng.choice([-1, 1], size=(n, K))
    # positivity forbids pi = 1 on eligible stages, so a plain record stands in for TrialData
    data = SimpleNamespace(n=n, n_stages=K, actions=A, rewards=R, propensities=np.ones((n, K)),
                           eligible=np.ones((n, K), dtype=bool))
    g = rng.normal(size=(n, K))
    for variant in ("simple", "efficient"):
        for k in (1, 2, 3):
            out = pseudo_outcomes(data, k, A, g, variant)
            np.testing.assert_allclose(out.value, R[:, k - 1:].sum(axis=1), atol=1e-12)


def test_ineligible_stages_count_as_followed():
    data = TrialData((np.zeros((1, 1)), np.zeros((1, 0))), [[1, 1]], [[1.0, 3.0]], [[0.5, 1.0]],
                     [[True, False]])
    out = pseudo_outcomes(data, 1, np.array([[1, -1]]), np.zeros((1, 2)), "simple")
    assert out.value[0] == pytest.approx(4.0 / 0.5)


def test_efficient_reduces_to_simple():
    rng = np.random.default_rng(7)
    data = random_trial(rng, n=1000, K=4, dims=(2, 1, 1, 1), ineligible_rate=0.1)
    rules = rng.choice([-1, 1], size=(1000, 4))
    g = rng.normal(size=(1000, 4)) * 3
    for k in range(1, 5):
        m = np.repeat(g[:, k - 1:k], 4, axis=1)
        eff = pseudo_outcomes(data, k, rules, g, "efficient", m_values=m)
        simple = pseudo_outcomes(data, k, rules, g, "simple")
        np.testing.assert_allclose(eff.value, simple.value, rtol=0, atol=1e-10)


def test_single_trajectory_matches_vectorized():
    rng = np.random.default_rng(8)
    data = random_trial(rng, n=5, K=3, dims=(2, 1, 1))
    rules = [LinearRule(0.1, rng.normal(size=history_matrix(data, j).shape[1])) for j in (1, 2, 3)]

    def g_hat(j, h):
        return float(np.sum(h.values)) + j

    D = np.column_stack([np.where(rules[j - 1].decision_function(history_matrix(data, j)) >= 0, 1, -1)
                         for j in (1, 2, 3)])
    G = np.column_stack([history_matrix(data, j).sum(axis=1) + j for j in (1, 2, 3)])
    for variant in ("simple", "efficient"):
        vec = pseudo_outcomes(data, 2, D, G, variant)
        for i, traj in enumerate(data.to_trajectories()):
            one = augmented_pseudo_outcome(traj, 2, rules[1:], g_hat, variant)
            assert one.value == pytest.approx(vec.value[i], abs=1e-12)
    with pytest.raises(ValueError):
        augmented_pseudo_outcome(data.to_trajectories()[0], 4, [], g_hat)
    with pytest.raises(ValueError):
        augmented_pseudo_outcome(data.to_trajectories()[0], 2, rules, g_hat)


@pytest.mark.parametrize("variant", ["simple", "efficient"])
def test_pseudo_outcome_unbiased_with_wrong_imputation(variant):
    rng = np.random.default_rng(9)
    data, rules = two_stage.draw(40_000, rng)
    q = pseudo_outcomes(data, 1, rules, two_stage.wrong_g(data), variant).value
    se = q.std(ddof=1) / np.sqrt(len(q))
    assert abs(q.mean() - two_stage.truth()) < 4 * se


def test_cost_cv_single_point_and_empty():
    rng = np.random.default_rng(10)
    H = rng.normal(size=(20, 2))
    assert cross_validate_cost(H, rng.choice([-1, 1], 20), rng.normal(size=20), cost_grid=[3.0]).cost == 3.0
    with pytest.raises(ValueError):
        cross_validate_cost(H, np.ones(20), np.ones(20), cost_grid=[])


def test_cost_cv_separable_stage():
    rng = np.random.default_rng(11)
    H = rng.uniform(-1, 1, size=(120, 2))
    a = np.where(H[:, 0] >= 0, 1, -1)
    w = rng.uniform(0.5, 1.5, size=120)
    cv = cross_validate_cost(H, a, w)
    scores = np.array(cv.scores)
    best = scores.max()
    assert cv.cost == cv.grid[int(np.flatnonzero(scores >= best)[0])]
    # the curve ends on its plateau
    assert scores[-1] >= best - 0.02


def test_cost_cv_pure_noise():
    rng = np.random.default_rng(12)
    n = 200
    H = rng.normal(size=(n, 3))
    a = rng.choice([-1, 1], n)
    w = rng.normal(size=n)
    cv = cross_validate_cost(H, a, w)
    constant = np.mean(w * (a == 1))
    assert abs(max(cv.scores) - constant) < 4 * w.std() / np.sqrt(n)


def test_k1_simple_and_efficient_agree():
    rng = np.random.default_rng(13)
    data = random_trial(rng, n=50, K=1, dims=(3,))
    a = fit_amol_simple(data, FAST)
    b = fit_amol_efficient(data, FAST)
    assert a.regimen.to_dict() == b.regimen.to_dict()


def test_fit_is_deterministic_and_round_trips():
    data = gen_setting2(80, seed=1)
    r1 = fit_amol_simple(data, FAST)
    r2 = fit_amol_simple(data, FAST)
    assert json.dumps(r1.to_dict()) == json.dumps(r2.to_dict())
    back = FitReport.from_dict(json.loads(json.dumps(r1.to_dict())))
    assert back.to_dict() == r1.to_dict()
    assert len(back.diagnostics) == 4


def test_fit_methods_shares_chain():
    data = gen_setting2(60, seed=2)
    both = fit_methods(data, ["qlearn", "amol"], FAST)
    assert both["qlearn"].to_dict() == fit_qlearning(data, FAST).to_dict()
    assert both["amol"].to_dict() == fit_amol_simple(data, FAST).to_dict()
    with pytest.raises(ValueError):
        fit_methods(data, ["nope"])


def test_amol_diagnostics():
    data = gen_setting2(60, seed=3)
    report = fit_amol_efficient(data, FAST)
    for k, d in enumerate(report.diagnostics, start=1):
        assert d.stage == k
        assert d.n_used == 60
        assert d.cost in FAST.cost_grid
        assert 0.0 <= d.negative_weight_fraction <= 1.0


def test_stage_design_layout():
    H = np.array([[1.0, 2.0]])
    np.testing.assert_array_equal(stage_design(H, -1), [[1, 2, -1, -1, -2]])
    np.testing.assert_allclose(predict(fit_lasso_cv(np.arange(10.0)[:, None], np.arange(10.0)), [[3.0]]), 3.0,
                               atol=0.1)
