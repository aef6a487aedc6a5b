import numpy as np
import pandas as pd
import pytest
from household_schooling.errors import ConfigError, DataError, IdentificationError
from household_schooling.model_core.solver import solve_allocation
from household_schooling.model_core.simulate import simulate_records
from household_schooling.recovery import (
    ability_diagnostics,
    first_ability,
    load_recovered_dist,
    recover_ability_pair,
    recover_population,
    write_recovered,
)

RECOVERY_TOL = 1e-4


def test_round_trip_through_the_solver(make_household, theta_hat):
    rng = np.random.default_rng(21)
    checked = 0
    for i in range(400):
        comp = ("dd", "ss", "ds", "sd")[i % 4]
        a1 = rng.uniform(0.02, 0.98)
        q_T = rng.uniform(2.0, 40.0)
        hh = make_household(comp, q_T, (a1, 1.0 - a1))
        q = solve_allocation(hh, theta_hat, [True, True]).q
        if q.max() >= 21.0 - 1e-6:
            continue
        rec = recover_ability_pair(q[0], q[1], q_T, make_household(comp, q_T), theta_hat)
        assert rec.a_hat[0] == pytest.approx(a1, abs=RECOVERY_TOL)
        assert rec.residual < 1e-6
        checked += 1
    assert checked > 120


def test_anchor_household_is_recovered(make_household, theta_hat):
    hh = make_household("ds", 20.0, (0.57, 0.43))
    q = solve_allocation(hh, theta_hat, [True, True]).q
    rec = recover_ability_pair(q[0], q[1], 20.0, make_household("ds", 20.0), theta_hat)
    assert rec.a_hat == pytest.approx((0.57, 0.43), abs=RECOVERY_TOL)


def test_more_years_for_the_firstborn_means_more_ability(theta_hat):
    q1 = np.linspace(4.0, 16.0, 25)
    a1 = first_ability(q1, 20.0 - q1, np.array([[True, False]]), theta_hat)
    assert (np.diff(a1) > 0).all()


def test_corners_only_bound_the_ability(make_household, theta_hat):
    hh = make_household("ss", 30.0)
    with pytest.raises(IdentificationError) as info:
        recover_ability_pair(21.0, 9.0, 30.0, hh, theta_hat)
    low, high = info.value.bounds
    assert 0.5 < low < high == 1.0

    with pytest.raises(IdentificationError) as info:
        recover_ability_pair(9.0, 21.0, 30.0, hh, theta_hat)
    assert info.value.bounds[0] == 0.0

    with pytest.raises(IdentificationError):
        recover_ability_pair(12.0, 0.0, 12.0, make_household("ss", 12.0), theta_hat)


def test_inputs_off_the_budget_line_are_rejected(make_household, theta_hat):
    with pytest.raises(ConfigError, match="budget line"):
        recover_ability_pair(8.0, 8.0, 20.0, make_household("ds", 20.0), theta_hat)
    with pytest.raises(ConfigError, match="two children"):
        recover_ability_pair(5.0, 5.0, 15.0, make_household("dsd", 15.0), theta_hat)


def test_population_recovery_matches_true_abilities(pair_template, beta, theta_hat, tmp_path):
    pop = simulate_records(pair_template(600, seed=4), theta_hat, beta, seed=12)
    recovered = recover_population(pop, theta_hat)

    both = pop[pop["n_educated"] == 2]
    assert len(recovered) == both["household_id"].nunique()
    truth = both[both["birth_order"] == 1].set_index("household_id")["ability"]
    ok = recovered[~recovered["corner_flag"]].set_index("household_id")
    np.testing.assert_allclose(ok["a1_hat"], truth.loc[ok.index], atol=RECOVERY_TOL)
    assert (ok["residual"] < 1e-6).all()

    path = tmp_path / "recovered.csv"
    write_recovered(recovered, path)
    assert list(pd.read_csv(path).columns) == ["household_id", "a1_hat", "a2_hat", "residual", "corner_flag"]
    dist = load_recovered_dist(path)
    assert dist.mean == pytest.approx(ok["a1_hat"].mean())


def test_abilities_look_alike_across_groups(pair_template, beta, theta_hat):
    pop = simulate_records(pair_template(4000, seed=6), theta_hat, beta, seed=13)
    diag = ability_diagnostics(pop, theta_hat)
    assert diag.gender_ks < 0.06
    assert diag.samples["firstborn"].size == diag.samples["second_born"].size
    payload = diag.to_dict()
    assert payload["n"]["daughters"] + payload["n"]["sons"] == 2 * payload["n"]["firstborn"]


def test_diagnostics_need_enough_households(household_frame, theta_hat):
    pop = household_frame({f"h{i}": [(1, 9.0), (0, 10.0)] for i in range(10)})
    with pytest.raises(DataError, match="at least 30"):
        ability_diagnostics(pop, theta_hat)


def test_wrong_disadvantage_separates_daughters_from_sons(pair_template, beta, theta_hat):
    pop = simulate_records(pair_template(4000, seed=6), theta_hat, beta, seed=13)
    right = ability_diagnostics(pop, theta_hat)
    wrong = ability_diagnostics(pop, theta_hat.replace(theta1=theta_hat.theta1 + 0.05))
    assert wrong.gender_ks > right.gender_ks
    assert wrong.gender_pvalue < right.gender_pvalue
