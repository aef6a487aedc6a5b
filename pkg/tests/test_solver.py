import numpy as np
import pytest
from household_schooling.errors import InfeasibleAllocationError, SolverError
from household_schooling.model_core.types import Allocation, Theta
from household_schooling.model_core.solver import (
    cost_vector,
    delta_exponent,
    delta_vector,
    household_utility,
    marginal_utility,
    solve_allocation,
    solve_batch,
)

Q_MAX = 21.0
GRID_STEP = 0.01
ORACLE_INSTANCES = 500
ORACLE_TOL = 1e-6


def _pair_utility(q1, q2, a, deltas, costs):
    return (a[0] * np.power(q1, deltas[0]) - costs[0] * q1
            + a[1] * np.power(q2, deltas[1]) - costs[1] * q2)


def test_pair_solution_beats_budget_line_grid(make_household):
    rng = np.random.default_rng(7)
    comps = ("dd", "ss", "ds", "sd")
    for i in range(ORACLE_INSTANCES):
        theta = Theta(theta1=rng.uniform(0, 0.1), alpha_gap=rng.uniform(0, 0.01),
                      p1=0.5, p_fb_d=0.5, p_sb_d=0.5)
        a1 = rng.uniform(0.05, 0.95)
        hh = make_household(comps[i % 4], rng.uniform(1.0, 2 * Q_MAX), (a1, 1.0 - a1))
        alloc = solve_allocation(hh, theta, [True, True])

        total = min(hh.q_T, 2 * Q_MAX)
        lo, hi = max(0.0, total - Q_MAX), min(total, Q_MAX)
        q1 = np.append(np.arange(lo, hi, GRID_STEP), hi)
        deltas = delta_vector(hh.females, theta)[0]
        grid_best = _pair_utility(q1, total - q1, hh.abilities, deltas, cost_vector(2, theta)).max()

        assert household_utility(alloc, hh, theta) >= grid_best - ORACLE_TOL
        assert alloc.q.sum() == pytest.approx(total, abs=1e-8)


def test_triple_solution_beats_coarse_grid(make_household):
    rng = np.random.default_rng(11)
    theta = Theta(theta1=0.05, alpha_gap=0.003, p1=0.5, p_fb_d=0.5, p_sb_d=0.5)
    for comp in ("dds", "sds", "ssd", "ddd"):
        raw = rng.uniform(0.2, 1.0, size=3)
        hh = make_household(comp, rng.uniform(5.0, 50.0), tuple(raw / raw.sum()))
        alloc = solve_allocation(hh, theta, [True, True, True])

        total = min(hh.q_T, 3 * Q_MAX)
        q1, q2 = np.meshgrid(np.arange(0, Q_MAX + 1e-9, 0.1), np.arange(0, Q_MAX + 1e-9, 0.1))
        q3 = total - q1 - q2
        ok = (q3 >= 0) & (q3 <= Q_MAX)
        a, d, c = hh.abilities, delta_vector(hh.females, theta)[0], cost_vector(3, theta)
        values = sum(a[k] * np.power(q, d[k]) - c[k] * q for k, q in enumerate((q1[ok], q2[ok], q3[ok])))

        assert household_utility(alloc, hh, theta) >= values.max() - ORACLE_TOL


def test_cap_binds_for_dominant_child(make_household):
    theta = Theta(theta1=0.0, alpha_gap=0.0, p1=0.5, p_fb_d=0.5, p_sb_d=0.5)
    hh = make_household("ss", 30.0, (0.99, 0.01))
    alloc = solve_allocation(hh, theta, [True, True])
    np.testing.assert_allclose(alloc.q, [21.0, 9.0], atol=1e-8)


def test_single_educated_child_takes_budget_up_to_cap(make_household, theta_hat):
    hh = make_household("ds", 30.0, (0.5, 0.5))
    alloc = solve_allocation(hh, theta_hat, [False, True])
    np.testing.assert_allclose(alloc.q, [0.0, 21.0])
    small = make_household("ds", 12.0, (0.5, 0.5))
    np.testing.assert_allclose(solve_allocation(small, theta_hat, [True, False]).q, [12.0, 0.0])


def test_abler_firstborn_gets_more_years(make_household, theta_hat):
    hh = make_household("ss", 20.0, (0.57, 0.43))
    alloc = solve_allocation(hh, theta_hat, [True, True])
    assert alloc.q[0] > alloc.q[1]

    def utility(q1, q2):
        return household_utility(Allocation(np.array([q1, q2]), np.array([True, True])), hh, theta_hat)

    assert utility(15.0, 5.0) > utility(5.0, 15.0)


def test_equal_abilities_without_disadvantage_split_evenly(make_household):
    theta = Theta(theta1=0.0, alpha_gap=0.0, p1=0.5, p_fb_d=0.5, p_sb_d=0.5)
    alloc = solve_allocation(make_household("ds", 17.0, (0.5, 0.5)), theta, [True, True])
    np.testing.assert_allclose(alloc.q, [8.5, 8.5], atol=1e-8)


def test_delta_exponent_scales_with_share_of_brothers(make_household):
    theta = Theta(theta1=0.04, alpha_gap=0.0, p1=0.5, p_fb_d=0.5, p_sb_d=0.5)
    pair = make_household("ds", 10.0)
    assert delta_exponent(pair.children[0], pair, theta) == pytest.approx(0.46)
    assert delta_exponent(pair.children[1], pair, theta) == pytest.approx(0.5)

    triple = make_household("dds", 10.0)
    assert delta_exponent(triple.children[0], triple, theta) == pytest.approx(0.48)
    np.testing.assert_allclose(delta_vector(triple.females, theta)[0], [0.48, 0.48, 0.5])
    np.testing.assert_allclose(delta_vector(make_household("dd", 10.0).females, theta)[0], [0.5, 0.5])


def test_cost_falls_with_birth_position():
    theta = Theta(theta1=0.0, alpha_gap=0.002, p1=0.5, p_fb_d=0.5, p_sb_d=0.5)
    np.testing.assert_allclose(cost_vector(3, theta), [0.014, 0.012, 0.01])
    np.testing.assert_allclose(cost_vector(2, theta, [0.5, 0.0]), [0.006, 0.01])


def test_uneducated_children_get_zero_years(make_household, theta_hat):
    hh = make_household("sds", 25.0, (0.3, 0.4, 0.3))
    alloc = solve_allocation(hh, theta_hat, [True, False, True])
    assert alloc.q[1] == 0.0
    assert alloc.q.sum() == pytest.approx(25.0)


def test_batch_matches_scalar_solves(make_household, theta_hat):
    rng = np.random.default_rng(3)
    a1 = rng.uniform(0.3, 0.7, size=20)
    budgets = rng.uniform(4.0, 40.0, size=20)
    females = np.tile([True, False], (20, 1))
    batch = solve_batch(np.column_stack([a1, 1 - a1]), delta_vector(females, theta_hat),
                        cost_vector(2, theta_hat)[None, :], np.ones((20, 2), dtype=bool), budgets, Q_MAX)
    for i in range(20):
        hh = make_household("ds", budgets[i], (a1[i], 1 - a1[i]))
        np.testing.assert_allclose(batch[i], solve_allocation(hh, theta_hat, [True, True]).q, atol=1e-9)


def test_invalid_inputs_raise(make_household, theta_hat):
    hh = make_household("ds", 10.0, (0.5, 0.5))
    with pytest.raises(SolverError):
        solve_allocation(hh, theta_hat, [False, False])
    with pytest.raises(SolverError):
        solve_allocation(make_household("ds", 0.0, (0.5, 0.5)), theta_hat, [True, True])
    with pytest.raises(InfeasibleAllocationError):
        Allocation(np.array([8.0, 8.0]), np.array([True, True])).check(hh)
    with pytest.raises(InfeasibleAllocationError):
        Allocation(np.array([2.0, 1.0]), np.array([True, False])).check(hh)


def test_swapping_abilities_swaps_years_without_disadvantage(make_household):
    theta = Theta(theta1=0.0, alpha_gap=0.0, p1=0.5, p_fb_d=0.5, p_sb_d=0.5)
    rng = np.random.default_rng(11)
    for i in range(100):
        comp = ("dd", "ss", "ds", "sd")[i % 4]
        a1 = rng.uniform(0.05, 0.95)
        q_T = rng.uniform(2.0, 2 * Q_MAX)
        q = solve_allocation(make_household(comp, q_T, (a1, 1.0 - a1)), theta, [True, True]).q
        swapped = solve_allocation(make_household(comp, q_T, (1.0 - a1, a1)), theta, [True, True]).q
        np.testing.assert_allclose(swapped, q[::-1], atol=1e-8)


def test_firstborn_years_rise_with_firstborn_ability(make_household, theta_hat):
    for comp in ("ds", "sd", "dd"):
        q1 = [solve_allocation(make_household(comp, 20.0, (a1, 1.0 - a1)), theta_hat, [True, True]).q[0]
              for a1 in np.linspace(0.05, 0.95, 91)]
        assert (np.diff(q1) >= -1e-9).all()
        assert q1[-1] > q1[0]


def test_interior_pairs_equalise_marginal_utility(make_household, theta_hat):
    rng = np.random.default_rng(12)
    costs = cost_vector(2, theta_hat)
    checked = 0
    for i in range(300):
        comp = ("dd", "ss", "ds", "sd")[i % 4]
        a1 = rng.uniform(0.1, 0.9)
        hh = make_household(comp, rng.uniform(4.0, 36.0), (a1, 1.0 - a1))
        q = solve_allocation(hh, theta_hat, [True, True]).q
        if q.min() < 0.5 or q.max() > Q_MAX - 1e-6:
            continue
        deltas = delta_vector(hh.females, theta_hat)[0]
        residual = (marginal_utility(a1, deltas[0], costs[0], q[0])
                    - marginal_utility(1.0 - a1, deltas[1], costs[1], q[1]))
        assert abs(residual) < 1e-8
        checked += 1
    assert checked > 100


def test_common_cost_level_leaves_allocation_unchanged(make_household, theta_hat):
    shifted = theta_hat.replace(alpha_base=0.05)
    rng = np.random.default_rng(13)
    for i in range(100):
        comp = ("ds", "sd", "dds", "sds")[i % 4]
        a = rng.dirichlet(np.full(len(comp), 5.0))
        hh = make_household(comp, rng.uniform(2.0, 50.0), tuple(a))
        mask = [True] * len(comp)
        np.testing.assert_allclose(solve_allocation(hh, shifted, mask).q,
                                   solve_allocation(hh, theta_hat, mask).q, atol=1e-7)
