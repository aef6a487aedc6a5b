import numpy as np
import pandas as pd
import pytest
import statsmodels.api as sm
from household_schooling.errors import ConfigError, EmptyCellError, RankError
from household_schooling.model_core.simulate import simulate_records
from household_schooling.regress import (
    child_regressors,
    decomposition_shares,
    diff_effects,
    diff_regression,
    fe_regression,
    margin_subpopulation,
    ols,
)

GENDER_EFFECT, BIRTH_EFFECT = -3.0, -1.0


def _mixed_pairs(n, seed=0, noise=1.0):
    """Mixed pairs whose daughter-son gap is gender +/- birth order plus noise."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        daughter_first = i % 2 == 0
        son = 10.0 + rng.normal(0.0, 2.0)
        gap = GENDER_EFFECT + (BIRTH_EFFECT if daughter_first else -BIRTH_EFFECT) + rng.normal(0.0, noise)
        children = [(True, son + gap), (False, son)] if daughter_first else [(False, son), (True, son + gap)]
        for t, (female, years) in enumerate(children, start=1):
            rows.append({"household_id": f"m{i}", "child_id": t, "female": female, "birth_order": t,
                         "educ_years": years, "n_c": 2, "parent_educ": "none"})
    return pd.DataFrame(rows)


def test_fixed_effects_match_dummy_regression():
    rng = np.random.default_rng(4)
    groups = np.repeat(np.arange(60), rng.integers(2, 5, size=60))
    X = pd.DataFrame({"x1": rng.normal(size=groups.size), "x2": rng.normal(size=groups.size)})
    y = 1.5 * X["x1"] - 0.5 * X["x2"] + rng.normal(size=60)[groups] + rng.normal(size=groups.size)

    fe = fe_regression(y, X, groups)
    dummies = pd.get_dummies(pd.Series(groups, name="g"), prefix="g", dtype=float)
    full = sm.OLS(y.to_numpy(), pd.concat([X, dummies], axis=1)).fit()

    np.testing.assert_allclose(fe.coefficients[["x1", "x2"]], full.params[:2], atol=1e-8)
    np.testing.assert_allclose(fe.std_errors[["x1", "x2"]], full.bse[:2], atol=1e-8)
    assert fe.n_groups == 60


def test_regressor_without_within_variation_raises():
    X = pd.DataFrame({"female": [1.0, 1.0, 0.0, 0.0], "firstborn": [1.0, 0.0, 1.0, 0.0]})
    with pytest.raises(RankError) as info:
        fe_regression([5.0, 4.0, 7.0, 6.0], X, ["a", "a", "b", "b"])
    assert info.value.regressor == "female"
    with pytest.raises(ConfigError):
        fe_regression([1.0, 2.0], X.iloc[:2], ["a", "b"])


def test_collinear_ols_names_the_culprit():
    X = pd.DataFrame({"a": [1.0, 2.0, 3.0, 4.0], "b": [2.0, 4.0, 6.0, 8.0]})
    with pytest.raises(RankError, match="'b'"):
        ols([1.0, 2.0, 2.5, 4.0], X)


def test_diff_effects_split_the_two_gaps():
    effects = diff_effects(-4.0, -2.0)
    assert effects.gender_effect == pytest.approx(-3.0)
    assert effects.birth_effect == pytest.approx(-1.0)


def test_diff_regression_recovers_planted_effects():
    effects = diff_regression(_mixed_pairs(2000))
    # standard errors are about 0.02 with unit noise on 2000 households
    assert effects.gender_effect == pytest.approx(GENDER_EFFECT, abs=0.1)
    assert effects.birth_effect == pytest.approx(BIRTH_EFFECT, abs=0.1)
    assert effects.n_households == 2000


def test_diff_regression_needs_both_orders():
    pop = _mixed_pairs(10)
    with pytest.raises(EmptyCellError):
        diff_regression(pop[pop["household_id"].isin([f"m{i}" for i in range(0, 10, 2)])])


def test_mixed_pairs_cannot_separate_the_interaction():
    pop = _mixed_pairs(200)
    with pytest.raises(RankError) as info:
        fe_regression(pop["educ_years"], child_regressors(pop), pop["household_id"])
    assert info.value.regressor == "female_x_firstborn"


def test_shares_sum_to_100(pair_template, beta, theta_hat):
    pop = simulate_records(pair_template(3000, seed=2), theta_hat, beta, seed=8)
    for margin in ("all", "intensive", "extensive"):
        shares = decomposition_shares(pop, margin)
        total = shares.gender_share + shares.birth_order_share + shares.ability_share
        assert total == pytest.approx(100.0)
        assert min(shares.gender_share, shares.birth_order_share, shares.ability_share) >= -1e-9


def test_gender_share_vanishes_without_disadvantage(pair_template, beta, neutral_theta):
    pop = simulate_records(pair_template(4000, seed=5), neutral_theta, beta, seed=9)
    shares = decomposition_shares(pop, "intensive")
    assert shares.gender_share < 5.0
    assert shares.birth_order_share < 5.0


def test_unknown_margin_is_rejected(household_frame):
    with pytest.raises(ConfigError):
        margin_subpopulation(household_frame({"a": [(1, 3), (0, 4)]}), "between")


def test_residuals_are_orthogonal_to_the_regressors():
    rng = np.random.default_rng(5)
    groups = np.repeat(np.arange(80), 3)
    X = pd.DataFrame({"x1": rng.normal(size=240), "x2": rng.uniform(size=240)})
    y = 2.0 * X["x1"] + X["x2"] + rng.normal(size=80)[groups] + rng.normal(size=240)

    fit = ols(y, X)
    np.testing.assert_allclose(X.to_numpy().T @ fit.residuals, 0.0, atol=1e-8)
    assert fit.residuals.sum() == pytest.approx(0.0, abs=1e-8)

    fe = fe_regression(y, X, groups)
    np.testing.assert_allclose(X.to_numpy().T @ fe.residuals, 0.0, atol=1e-8)
    np.testing.assert_allclose(np.bincount(groups, weights=fe.residuals), 0.0, atol=1e-8)


def _planted_children(n_per_comp, seed):
    """Child rows for the four pair compositions with gender and birth-order effects planted."""
    rng = np.random.default_rng(seed)
    rows = []
    for comp in ("dd", "ss", "ds", "sd"):
        for i in range(n_per_comp):
            level = 10.0 + rng.normal(0.0, 2.0)
            for t, ch in enumerate(comp, start=1):
                female = ch == "d"
                years = level + GENDER_EFFECT * female + BIRTH_EFFECT * (t == 1)
                rows.append({"household_id": f"{comp}{i}", "female": female, "birth_order": t,
                             "educ_years": years})
    return pd.DataFrame(rows)


def test_fixed_effects_recover_planted_effects():
    pop = _planted_children(250, seed=6)
    X = child_regressors(pop)
    groups = pop["household_id"]
    # noise with zero group means and no projection on the within regressors
    noise = pd.Series(np.random.default_rng(7).normal(size=len(pop)), index=pop.index)
    noise -= noise.groupby(groups).transform("mean")
    X_within = X - X.groupby(groups).transform("mean")
    coef, *_ = np.linalg.lstsq(X_within.to_numpy(), noise.to_numpy(), rcond=None)
    noise -= X_within.to_numpy() @ coef

    fe = fe_regression(pop["educ_years"] + noise, X, groups)
    planted = pd.Series({"female": GENDER_EFFECT, "firstborn": BIRTH_EFFECT, "female_x_firstborn": 0.0})
    for name, value in planted.items():
        assert abs(fe.coefficients[name] - value) <= 2.0 * fe.std_errors[name]
        assert fe.coefficients[name] == pytest.approx(value, abs=1e-8)
    assert (fe.std_errors > 0).all()
