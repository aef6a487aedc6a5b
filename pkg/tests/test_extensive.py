import numpy as np
import pytest
from household_schooling.errors import ConfigError
from household_schooling.model_core.types import Theta, ThreeChildShares
from household_schooling.model_core.extensive import (
    N_UNIFORMS,
    ExtensiveRule,
    costgap_from_threshold,
    draw_extensive_set,
    educated_probabilities,
    masks_from_uniforms,
    p_from_threshold,
    threshold_from_costgap,
    threshold_from_p,
)

FIRSTBORN_DAUGHTER_P = 0.1124
FIRSTBORN_DAUGHTER_THRESHOLD = 0.579


def test_threshold_and_probability_invert_each_other(beta):
    assert threshold_from_p(FIRSTBORN_DAUGHTER_P, beta) == pytest.approx(FIRSTBORN_DAUGHTER_THRESHOLD, abs=0.002)
    # dp/dt is about 3 near the threshold, so 0.002 in t is 0.006 in p
    assert p_from_threshold(FIRSTBORN_DAUGHTER_THRESHOLD, beta) == pytest.approx(FIRSTBORN_DAUGHTER_P, abs=0.006)
    t = threshold_from_p(0.3, beta)
    assert p_from_threshold(t, beta) == pytest.approx(0.3, abs=1e-10)


def test_cost_gap_round_trip():
    for gap in (-0.01, 0.0, 0.002, 0.03):
        t = threshold_from_costgap(gap, 18.0, 0.48, 0.5)
        assert costgap_from_threshold(t, 18.0, 0.48, 0.5) == pytest.approx(gap, abs=1e-14)
    assert threshold_from_costgap(0.0, 18.0, 0.5, 0.5) == pytest.approx(0.5)


def test_threshold_inputs_are_validated(beta):
    with pytest.raises(ConfigError):
        threshold_from_p(0.0, beta)
    with pytest.raises(ConfigError):
        p_from_threshold(1.0, beta)
    with pytest.raises(ConfigError):
        threshold_from_costgap(0.0, 0.0, 0.5, 0.5)


def test_pair_probabilities_follow_composition():
    theta = Theta(theta1=0.0, alpha_gap=0.0, p1=0.4, p_fb_d=0.1, p_sb_d=0.3)
    np.testing.assert_allclose(educated_probabilities("ss", theta), [0.4, 0.6])
    np.testing.assert_allclose(educated_probabilities("ds", theta), [0.1, 0.9])
    np.testing.assert_allclose(educated_probabilities("sd", theta), [0.7, 0.3])


def test_default_three_child_shares_treat_children_alike():
    theta = Theta(theta1=0.0, alpha_gap=0.0, p1=0.5, p_fb_d=0.5, p_sb_d=0.5)
    probs = educated_probabilities("dsd", theta)
    np.testing.assert_allclose(probs, np.full(3, probs[0]))
    assert probs.sum() == pytest.approx(0.5 * 2 + 0.5 * 1)


def test_three_child_probabilities_match_simulated_shares():
    shares = ThreeChildShares(p_medium=0.3, p_m1=0.8, p_m2=0.25, p_l1=0.6, p_l2=0.7)
    theta = Theta(theta1=0.0, alpha_gap=0.0, p1=0.5, p_fb_d=0.5, p_sb_d=0.5, three_child={"dds": shares})
    rng = np.random.default_rng(5)
    uniforms = rng.random((200_000, N_UNIFORMS))
    mask = masks_from_uniforms(uniforms, ["dds"] * uniforms.shape[0], theta)
    np.testing.assert_allclose(mask.mean(axis=0), educated_probabilities("dds", theta), atol=0.005)
    assert set(mask.sum(axis=1)) == {1, 2}


def test_high_aversion_educates_everyone(make_household):
    theta = Theta(theta1=0.0, alpha_gap=0.0, p1=0.5, p_fb_d=0.5, p_sb_d=0.5, p_high_aversion=1.0)
    rng = np.random.default_rng(0)
    for comp in ("ds", "ssd"):
        assert draw_extensive_set(make_household(comp, 10.0), theta, rng).all()


def test_low_aversion_pair_educates_exactly_one():
    theta = Theta(theta1=0.0, alpha_gap=0.0, p1=0.37, p_fb_d=0.11, p_sb_d=0.32)
    uniforms = np.random.default_rng(1).random((100_000, N_UNIFORMS))
    for comp, index, p in (("ss", 0, 0.37), ("ds", 0, 0.11), ("sd", 1, 0.32)):
        mask = masks_from_uniforms(uniforms, [comp] * len(uniforms), theta)
        assert (mask.sum(axis=1) == 1).all()
        assert mask[:, index].mean() == pytest.approx(p, abs=0.005)


def test_utility_rule_matches_threshold_probability(beta):
    theta = Theta(theta1=0.03, alpha_gap=0.004, p1=0.5, p_fb_d=0.5, p_sb_d=0.5)
    q_T = 18.0
    rng = np.random.default_rng(9)
    n = 40_000
    a1 = beta.sample(rng, size=n)
    mask = masks_from_uniforms(
        rng.random((n, N_UNIFORMS)), ["ds"] * n, theta, ExtensiveRule.UTILITY,
        abilities=np.column_stack([a1, 1 - a1]), q_T=np.full(n, q_T),
    )
    t = threshold_from_costgap(theta.alpha_gap, q_T, theta.gamma - theta.theta1, theta.gamma)
    assert mask[:, 0].mean() == pytest.approx(p_from_threshold(t, beta), abs=0.01)


def test_no_disadvantage_probabilities_are_symmetric(beta):
    theta = Theta(theta1=0.02, alpha_gap=0.002, p1=0.37, p_fb_d=0.11, p_sb_d=0.32,
                  three_child={"same": ThreeChildShares(p_medium=0.4, p_m1=0.9)}).no_disadvantage(beta)
    assert theta.p1 == theta.p_fb_d == pytest.approx(beta.sf(0.5))
    assert theta.p_sb_d == pytest.approx(beta.cdf(0.5))
    assert theta.three_child["same"] == ThreeChildShares(p_medium=0.4)
