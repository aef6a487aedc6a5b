import numpy as np
import pytest
from household_schooling.errors import ConfigError, EmptyCellError
from household_schooling.moments import (
    compute_moment_vector,
    extensive_share_cells,
    fit_report,
    inequality_stats,
    moments_payload,
    select_stratum,
    variance_decomposition,
)


@pytest.fixture
def partial_pop(household_frame):
    return household_frame({
        "h1": [(1, 10), (1, 10)],
        "h2": [(1, 7), (0, 9)],
        "h3": [(0, 10), (0, 0)],
        "h4": [(0, 0), (0, 8)],
        "h5": [(1, 0), (0, 12)],
    })


def test_daughter_gap_moment(household_frame):
    pop = household_frame({"dd": [(1, 10), (1, 10)], "ds": [(1, 7), (0, 9)]})
    mv = compute_moment_vector(pop)
    assert mv.m1 == pytest.approx(3.0)
    assert mv.m2 is mv.m3 is mv.m4 is None
    assert mv.m_all_educated == 1.0
    assert mv.labels == ["m1", "m_birth_daughters_1", "m_all_educated"]


def test_extensive_share_moments(partial_pop):
    mv = compute_moment_vector(partial_pop)
    assert mv.m1 == pytest.approx(10.0 - 3.5)
    assert mv.m2 == pytest.approx(0.5)
    assert mv.m3 == pytest.approx(0.0)
    assert mv.m4 is None
    assert mv.m_all_educated == pytest.approx(0.4)
    assert mv.m_birth == {"daughters": (0.0,), "sons": (-1.0,)}
    assert mv.n_households == 5


def test_share_cells_count_patterns(partial_pop):
    cells = extensive_share_cells(partial_pop)
    assert cells.to_dict("records") == [
        {"composition": "ds", "pattern": "01", "households": 1},
        {"composition": "ss", "pattern": "01", "households": 1},
        {"composition": "ss", "pattern": "10", "households": 1},
    ]


def test_moments_ignore_row_order(partial_pop):
    shuffled = partial_pop.sample(frac=1.0, random_state=3)
    assert compute_moment_vector(shuffled) == compute_moment_vector(partial_pop)


def test_missing_cells_raise(household_frame):
    only_mixed = household_frame({"a": [(1, 5), (0, 7)], "b": [(0, 6), (1, 6)]})
    with pytest.raises(EmptyCellError) as info:
        compute_moment_vector(only_mixed)
    assert info.value.cells == ["only daughters"]


def test_zero_budget_households_are_dropped(household_frame):
    pop = household_frame({"a": [(1, 0), (1, 0)], "b": [(1, 4), (0, 6)]})
    assert select_stratum(pop)["household_id"].unique().tolist() == ["b"]
    assert len(select_stratum(pop, drop_empty=False)) == 4


def test_variance_decomposition_example(household_frame):
    stats = variance_decomposition(household_frame({"a": [(1, 0), (0, 10)], "b": [(1, 5), (0, 5)]}))
    assert stats.total_var == pytest.approx(12.5)
    assert stats.within_var_mean == pytest.approx(12.5)
    assert stats.between_var == pytest.approx(0.0)
    assert stats.within_share == pytest.approx(1.0)


def test_variance_identity_holds_on_random_populations(household_frame):
    rng = np.random.default_rng(17)
    for _ in range(20):
        households = {
            f"h{i}": [(rng.integers(2), rng.uniform(0, 21)) for _ in range(rng.integers(2, 4))]
            for i in range(50)
        }
        stats = variance_decomposition(household_frame(households))
        assert abs(stats.total_var - stats.within_var_mean - stats.between_var) < 1e-9


def test_variance_decomposition_needs_two_households(household_frame):
    with pytest.raises(ConfigError):
        variance_decomposition(household_frame({"a": [(1, 3), (0, 5)]}))


def test_inequality_stats_per_household(household_frame):
    out = inequality_stats(household_frame({"a": [(1, 0), (0, 21)], "b": [(1, 3), (0, 6), (1, 9)]}))
    assert out.loc["a", "range"] == 21
    assert out.loc["a", "sd"] == pytest.approx(10.5)
    assert out.loc["b", "sd"] == pytest.approx(np.sqrt(6.0))
    assert out.loc["b", "qbar"] == pytest.approx(6.0)


def test_payload_and_fit_report(partial_pop):
    payload = moments_payload(partial_pop)
    assert list(payload) == ["all:2"]
    assert payload["all:2"]["moments"]["m2"] == pytest.approx(0.5)

    report = fit_report(partial_pop, partial_pop)
    assert list(report.columns) == ["table", "group", "statistic", "data", "model"]
    np.testing.assert_allclose(report["data"], report["model"])
