"""
Policy experiments on a fitted model: the ability a disadvantaged child needs
to break even, cost-cut policies against the no-disadvantage benchmark, and
an exogenous rise in household education budgets. Also the distribution
tools used to compare scenarios (ECDF, KS distance, stochastic dominance).
"""
from __future__ import annotations

import logging
import numpy as np
import pandas as pd
from pathlib import Path
from dataclasses import asdict, dataclass, field, fields
from typing import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor, as_completed
from household_schooling.config import COMPOSITIONS, GAP_COLUMNS, MODEL_DEFAULTS, REFERENCE_MAGNITUDES
from household_schooling.errors import ConfigError, EmptyCellError
from household_schooling.estimator.smm import EstimationConfig
from household_schooling.model_core.types import AbilityDist, EmpiricalAbilityDist, HouseholdSpec, Theta
from household_schooling.model_core.solver import cost_vector, delta_vector, solve_batch
from household_schooling.model_core.simulate import SimulationDraws, make_draws, simulate_batch
from household_schooling.model_core.extensive import (
    ExtensiveRule,
    costgap_from_threshold,
    p_from_threshold,
    threshold_from_costgap,
    threshold_from_p,
)

logger = logging.getLogger(__name__)

GAP_KINDS = ("gender", "birth_order")
SCENARIOS = ("baseline", "no_disadvantage", "policy", "extensive_fix")
FOSD_TOL = 0.01
SATURATION_WARN = 0.5
NEUTRAL_THRESHOLD = 0.5

Ability = AbilityDist | EmpiricalAbilityDist


def _check_cut(value: float, name: str) -> None:
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"must lie in [0, 1], got {value}", field=name)


@dataclass(frozen=True)
class PolicySpec:
    """
    Relative cost reductions. Firstborn cuts reach every firstborn; daughter
    cuts, indexed (firstborn daughter, later-born daughter), reach daughters
    who have a brother. Cuts on the same child combine multiplicatively.
    """
    firstborn_cost_cut_ext: float = 0.0
    firstborn_cost_cut_int: float = 0.0
    daughter_cost_cut_ext: tuple[float, float] = (0.0, 0.0)
    daughter_cost_cut_int: tuple[float, float] = (0.0, 0.0)
    extensive_fix: bool = False

    def __post_init__(self):
        _check_cut(self.firstborn_cost_cut_ext, "firstborn_cost_cut_ext")
        _check_cut(self.firstborn_cost_cut_int, "firstborn_cost_cut_int")
        for name in ("daughter_cost_cut_ext", "daughter_cost_cut_int"):
            values = tuple(float(v) for v in getattr(self, name))
            if len(values) != 2:
                raise ConfigError(f"need two cuts, got {len(values)}", field=name)
            for v in values:
                _check_cut(v, name)
            object.__setattr__(self, name, values)

    @property
    def is_zero(self) -> bool:
        cuts = (self.firstborn_cost_cut_ext, self.firstborn_cost_cut_int,
                *self.daughter_cost_cut_ext, *self.daughter_cost_cut_int)
        return not self.extensive_fix and not any(cuts)

    @classmethod
    def zero(cls) -> PolicySpec:
        return cls()

    @classmethod
    def reference(cls) -> PolicySpec:
        """Published cut magnitudes, stated in the original cost units."""
        ref = REFERENCE_MAGNITUDES["policy_cuts"]
        return cls(
            firstborn_cost_cut_ext=ref["firstborn"][0],
            firstborn_cost_cut_int=ref["firstborn"][1],
            daughter_cost_cut_ext=(ref["firstborn_daughter"][0], ref["second_daughter"][0]),
            daughter_cost_cut_int=(ref["firstborn_daughter"][1], ref["second_daughter"][1]),
        )

    @classmethod
    def from_dict(cls, data: Mapping) -> PolicySpec:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown key(s) {unknown}", field="policy")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(str(e), field="policy") from e

    def to_dict(self) -> dict:
        out = asdict(self)
        out["daughter_cost_cut_ext"] = list(self.daughter_cost_cut_ext)
        out["daughter_cost_cut_int"] = list(self.daughter_cost_cut_int)
        return out


@dataclass(frozen=True)
class GapDistribution:
    """Within-household education gaps (years) of one scenario, sorted ascending."""
    samples: np.ndarray
    scenario: str
    kind: str = "gender"

    def __post_init__(self):
        if self.kind not in GAP_KINDS:
            raise ConfigError(f"must be one of {GAP_KINDS}, got '{self.kind}'", field="kind")
        object.__setattr__(self, "samples", np.sort(np.asarray(self.samples, dtype=float)))

    @property
    def n(self) -> int:
        return int(self.samples.size)

    @property
    def mean(self) -> float:
        return float(self.samples.mean()) if self.n else float("nan")

    @property
    def std_error(self) -> float:
        if self.n < 2:
            return float("nan")
        return float(self.samples.std(ddof=1) / np.sqrt(self.n))


def ecdf(d: GapDistribution, x) -> np.ndarray:
    """Right-continuous empirical CDF of d at x."""
    if d.n == 0:
        raise ConfigError(f"scenario '{d.scenario}' has no samples", field="samples")
    return np.searchsorted(d.samples, x, side="right") / d.n


def ks_distance(d1: GapDistribution, d2: GapDistribution) -> float:
    """Sup-norm distance between the two ECDFs."""
    points = np.concatenate([d1.samples, d2.samples])
    return float(np.max(np.abs(ecdf(d1, points) - ecdf(d2, points))))


def fosd_violation(dominant: GapDistribution, dominated: GapDistribution) -> float:
    """Largest excess of the dominant ECDF over the dominated one; <= 0 under strict dominance."""
    points = np.concatenate([dominant.samples, dominated.samples])
    return float(np.max(ecdf(dominant, points) - ecdf(dominated, points)))


def dominates(dominant: GapDistribution, dominated: GapDistribution, tol: float = FOSD_TOL) -> bool:
    return fosd_violation(dominant, dominated) <= tol


def ecdf_asymmetry(d: GapDistribution) -> float:
    """sup_x |F(x) + P[X < -x] - 1|; zero for a distribution symmetric about 0."""
    points = np.concatenate([d.samples, -d.samples])
    left = np.searchsorted(d.samples, -points, side="left") / d.n
    return float(np.max(np.abs(ecdf(d, points) + left - 1.0)))


def gap_samples(simulated: pd.DataFrame, kind: str = "gender") -> np.ndarray:
    """
    One gap per household: mean daughter years minus mean son years over
    mixed households, or firstborn minus second-born over same-gender ones.
    """
    if kind not in GAP_KINDS:
        raise ConfigError(f"must be one of {GAP_KINDS}, got '{kind}'", field="kind")
    comp = simulated["composition"]
    mixed = comp.str.contains("d") & comp.str.contains("s")
    if kind == "gender":
        df = simulated[mixed]
        if df.empty:
            raise EmptyCellError(["mixed"], context="gender gap")
        means = df.groupby(["household_id", "female"])["educ_years"].mean().unstack("female")
        return (means[True] - means[False]).to_numpy()
    df = simulated[~mixed]
    if df.empty:
        raise EmptyCellError(["same gender"], context="birth-order gap")
    years = df.pivot(index="household_id", columns="birth_order", values="educ_years")
    return (years[1] - years[2]).to_numpy()


@dataclass(frozen=True)
class GapCurve:
    grid: np.ndarray
    gap_with: np.ndarray
    gap_without: np.ndarray
    q_T: float
    crossing: float | None
    crossing_without: float | None

    @property
    def crossing_ratio(self) -> float | None:
        """a1 / a2 at the crossing: how much abler the daughter must be."""
        if self.crossing is None:
            return None
        return self.crossing / (1.0 - self.crossing)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "a1": self.grid,
            "gap_with_disadvantage": self.gap_with,
            "gap_without_disadvantage": self.gap_without,
        })

    def to_dict(self) -> dict:
        ratio = self.crossing_ratio
        return {
            "q_T": self.q_T,
            "crossing_a1": self.crossing,
            "crossing_ratio": ratio,
            "extra_ability_pct": None if ratio is None else 100.0 * (ratio - 1.0),
            "crossing_a1_without": self.crossing_without,
            "reference_pct": REFERENCE_MAGNITUDES["cf1_crossing_pct"],
        }


def zero_crossing(grid: np.ndarray, values: np.ndarray) -> float | None:
    """First root of `values` over `grid` by linear interpolation, None without a sign change."""
    exact = np.flatnonzero(values == 0)
    if exact.size:
        return float(grid[exact[0]])
    change = np.flatnonzero(np.sign(values[:-1]) != np.sign(values[1:]))
    if change.size == 0:
        return None
    i = change[0]
    x0, x1, y0, y1 = grid[i], grid[i + 1], values[i], values[i + 1]
    return float(x0 - y0 * (x1 - x0) / (y1 - y0))


def _pair_gaps(theta: Theta, grid: np.ndarray, q_T: float, q_max: float) -> np.ndarray:
    females = np.array([[True, False]])
    abilities = np.column_stack([grid, 1.0 - grid])
    q = solve_batch(
        abilities,
        delta_vector(females, theta),
        cost_vector(2, theta)[None, :],
        np.ones_like(abilities, dtype=bool),
        np.full(grid.size, float(q_T)),
        q_max,
    )
    return q[:, 0] - q[:, 1]


def cf1_gap_curve(
    theta: Theta,
    q_T: float,
    ability_grid: Sequence[float],
    q_max: float = MODEL_DEFAULTS["Q_MAX"],
    ) -> GapCurve:
    """
    Daughter-minus-son years in a firstborn-daughter household educating
    both, along the firstborn's ability, with and without the disadvantages.
    """
    grid = np.asarray(ability_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ConfigError("need at least two grid points", field="ability_grid")
    if (grid <= 0).any() or (grid >= 1).any():
        raise ConfigError("grid must lie inside (0, 1)", field="ability_grid")
    if (np.diff(grid) <= 0).any():
        raise ConfigError("grid must be strictly increasing", field="ability_grid")
    if not 0 < q_T <= 2.0 * q_max:
        raise ConfigError(f"must lie in (0, {2.0 * q_max}], got {q_T}", field="q_T")

    with_dis = _pair_gaps(theta, grid, q_T, q_max)
    without = _pair_gaps(theta.replace(theta1=0.0, alpha_gap=0.0), grid, q_T, q_max)
    crossing = zero_crossing(grid, with_dis)
    if crossing is None:
        logger.info("daughter-son gap does not change sign on the grid at q_T=%s", q_T)
    return GapCurve(grid, with_dis, without, float(q_T), crossing, zero_crossing(grid, without))


# Extensive-margin cost levels are not identified, only their gaps. The
# later-born's level is pinned where a child of mean ability just breaks even
# on the whole budget: a q^delta - alpha q = 0 at a = 1/2.

def _cell_deltas(cell: str, theta: Theta) -> tuple[float, float]:
    penalised = theta.gamma - theta.theta1
    return {
        "same": (theta.gamma, theta.gamma),
        "ds": (penalised, theta.gamma),
        "sd": (theta.gamma, penalised),
    }[cell]


def _cell_probability(cell: str, theta: Theta) -> float:
    return {"same": theta.p1, "ds": theta.p_fb_d, "sd": theta.p_sb_d}[cell]


def _firstborn_threshold(cell: str, p: float, dist: Ability) -> float:
    if cell == "sd":
        # p_sb_d picks the second-born daughter: threshold on a2
        return 1.0 - threshold_from_p(p, dist.mirrored())
    return threshold_from_p(p, dist)


def _probability_at(cell: str, threshold: float, dist: Ability) -> float:
    if cell == "sd":
        threshold, dist = 1.0 - threshold, dist.mirrored()
    if threshold <= 0.0:
        return 1.0
    if threshold >= 1.0:
        return 0.0
    return p_from_threshold(threshold, dist)


def extensive_cost_levels(
    threshold: float,
    q_bar: float,
    delta1: float,
    delta2: float,
    ) -> tuple[float, float]:
    """(alpha1, alpha2) per year at the extensive margin consistent with `threshold`."""
    alpha2 = 0.5 * q_bar ** (delta2 - 1.0)
    alpha1 = alpha2 + costgap_from_threshold(threshold, q_bar, delta1, delta2)
    return max(alpha1, 0.0), alpha2


def _combine(*cuts: float) -> float:
    return 1.0 - float(np.prod([1.0 - c for c in cuts]))


def _extensive_cuts(cell: str, policy: PolicySpec) -> tuple[float, float]:
    fb = policy.firstborn_cost_cut_ext
    first_daughter, later_daughter = policy.daughter_cost_cut_ext
    if cell == "ds":
        return _combine(fb, first_daughter), 0.0
    if cell == "sd":
        return fb, later_daughter
    return fb, 0.0


def shifted_probability(
    cell: str,
    theta: Theta,
    cuts: tuple[float, float],
    q_bar: float,
    dist: Ability,
    ) -> float:
    """
    Selection probability of a two-child cell ('same', 'ds' or 'sd') after
    relative cuts to the two children's extensive costs.
    """
    p = _cell_probability(cell, theta)
    if cuts == (0.0, 0.0):
        return p
    if not 0.0 < p < 1.0:
        logger.warning("p=%s in cell '%s' has no interior threshold; left unchanged", p, cell)
        return p
    delta1, delta2 = _cell_deltas(cell, theta)
    alpha1, alpha2 = extensive_cost_levels(_firstborn_threshold(cell, p, dist), q_bar, delta1, delta2)
    gap = alpha1 * (1.0 - cuts[0]) - alpha2 * (1.0 - cuts[1])
    return _probability_at(cell, threshold_from_costgap(gap, q_bar, delta1, delta2), dist)


def intensive_cost_cuts(policy: PolicySpec, compositions: Sequence[str]) -> dict[str, np.ndarray]:
    out = {}
    first_daughter, later_daughter = policy.daughter_cost_cut_int
    for comp in compositions:
        has_son = "s" in comp
        cuts = []
        for position, child in enumerate(comp):
            parts = [policy.firstborn_cost_cut_int] if position == 0 else []
            if child == "d" and has_son:
                parts.append(first_daughter if position == 0 else later_daughter)
            cuts.append(_combine(*parts) if parts else 0.0)
        out[comp] = np.array(cuts)
    return out


def apply_policy(
    theta: Theta,
    policy: PolicySpec,
    q_bar: float,
    dist: Ability,
    ) -> tuple[Theta, dict[str, np.ndarray] | None]:
    """
    Policy-world parameters and intensive cost cuts. Three-child extensive
    shares are left as they are unless `extensive_fix` is set.
    """
    if policy.is_zero:
        return theta, None
    if policy.extensive_fix:
        fixed = theta.no_disadvantage(dist)
        moved = theta.replace(p1=fixed.p1, p_fb_d=fixed.p_fb_d, p_sb_d=fixed.p_sb_d,
                              three_child=fixed.three_child)
    else:
        moved = theta.replace(**{
            name: shifted_probability(cell, theta, _extensive_cuts(cell, policy), q_bar, dist)
            for cell, name in (("same", "p1"), ("ds", "p_fb_d"), ("sd", "p_sb_d"))
        })
    cuts = intensive_cost_cuts(policy, COMPOSITIONS[2] + COMPOSITIONS[3])
    if not any(c.any() for c in cuts.values()):
        cuts = None
    return moved, cuts


def mean_pair_budget(template: Sequence[HouseholdSpec]) -> float:
    budgets = [hh.q_T for hh in template if hh.n_c == 2]
    if not budgets:
        raise ConfigError("template has no two-child households", field="template")
    return float(np.mean(budgets))


def _clamped(value: float, name: str, notes: list[str]) -> float:
    if 0.0 <= value <= 1.0:
        return float(value)
    message = f"calibrated {name} = {value:.4g} clamped to [0, 1]"
    logger.warning(message)
    notes.append(message)
    return float(min(max(value, 0.0), 1.0))


def calibrate_policy(
    theta: Theta,
    template: Sequence[HouseholdSpec],
    dist: Ability,
    ) -> tuple[PolicySpec, list[str]]:
    """
    Cuts that remove each disadvantage at the template's mean two-child
    budget q_bar. Intensive: the firstborn cut equalises birth-order costs,
    the daughter cut equalises marginal returns of a mean-ability pair at
    q_bar / 2. Extensive: each cell's threshold is moved to 1/2.
    """
    q_bar = mean_pair_budget(template)
    notes: list[str] = []
    gamma, penalised = theta.gamma, theta.gamma - theta.theta1

    alpha1, alpha2 = cost_vector(2, theta)
    fb_int = 1.0 - alpha2 / alpha1 if alpha1 > 0 else 0.0
    q_child = q_bar / 2.0
    shortfall = 0.5 * (gamma * q_child ** (gamma - 1.0) - penalised * q_child ** (penalised - 1.0))
    d_int = _clamped(shortfall / theta.alpha_base, "daughter intensive cut", notes) \
        if theta.alpha_base > 0 else 0.0

    levels = {}
    for cell in ("same", "ds", "sd"):
        p = _cell_probability(cell, theta)
        if not 0.0 < p < 1.0:
            notes.append(f"cell '{cell}' has p={p}; no extensive cut calibrated")
            levels[cell] = None
            continue
        d1, d2 = _cell_deltas(cell, theta)
        levels[cell] = extensive_cost_levels(_firstborn_threshold(cell, p, dist), q_bar, d1, d2)

    fb_ext = 0.0
    if levels["same"] is not None:
        a1, a2 = levels["same"]
        fb_ext = _clamped(1.0 - a2 / a1 if a1 > 0 else 0.0, "firstborn extensive cut", notes)

    d_ext = [0.0, 0.0]
    if levels["ds"] is not None:
        a1, a2 = levels["ds"]
        target = costgap_from_threshold(NEUTRAL_THRESHOLD, q_bar, *_cell_deltas("ds", theta))
        base = a1 * (1.0 - fb_ext)
        raw = 1.0 - (target + a2) / base if base > 0 else 0.0
        d_ext[0] = _clamped(raw, "firstborn-daughter extensive cut", notes)
    if levels["sd"] is not None:
        a1, a2 = levels["sd"]
        target = costgap_from_threshold(NEUTRAL_THRESHOLD, q_bar, *_cell_deltas("sd", theta))
        raw = 1.0 - (a1 * (1.0 - fb_ext) - target) / a2
        d_ext[1] = _clamped(raw, "second-born daughter extensive cut", notes)

    policy = PolicySpec(
        firstborn_cost_cut_ext=fb_ext,
        firstborn_cost_cut_int=_clamped(fb_int, "firstborn intensive cut", notes),
        daughter_cost_cut_ext=tuple(d_ext),
        daughter_cost_cut_int=(d_int, d_int),
    )
    logger.info("calibrated policy at q_bar=%.3f: %s", q_bar, policy.to_dict())
    return policy, notes


@dataclass(frozen=True)
class PolicyResult:
    distributions: dict[str, GapDistribution]
    policy: PolicySpec
    theta_policy: Theta
    q_bar: float
    warnings: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        reference = self.distributions["no_disadvantage"]
        baseline = self.distributions["baseline"]
        return {
            "q_bar": self.q_bar,
            "policy": self.policy.to_dict(),
            "theta_policy": self.theta_policy.to_dict(),
            "scenarios": {
                name: {
                    "n": d.n,
                    "mean": d.mean,
                    "std_error": d.std_error,
                    "ks_to_no_disadvantage": ks_distance(d, reference),
                }
                for name, d in self.distributions.items()
            },
            "fosd_violation_no_disadvantage_over_baseline": fosd_violation(reference, baseline),
            "no_disadvantage_dominates_baseline": dominates(reference, baseline),
            "no_disadvantage_asymmetry": ecdf_asymmetry(reference),
            "warnings": list(self.warnings),
        }


def _scenario_frame(template, theta, draws, rule, cuts, budgets=None):
    return simulate_batch(template, theta, draws, rule, cost_cuts=cuts, budgets=budgets)


def _counterfactual_draws(template, cfg, dist, draws):
    if draws is not None:
        return draws
    return make_draws(template, cfg.s, dist, cfg.seed, label="counterfactual", threads=cfg.threads)


def cf2_policy_distributions(
    theta: Theta,
    policy: PolicySpec,
    template: Sequence[HouseholdSpec],
    cfg: EstimationConfig,
    dist: Ability | None = None,
    kind: str = "gender",
    draws: SimulationDraws | None = None,
    status: dict | None = None,
    ) -> PolicyResult:
    """
    Gap distributions under the baseline, the no-disadvantage world, the
    policy and the extensive-only fix. All four share one set of draws, so
    a zero policy reproduces the baseline exactly.
    """
    dist = dist or cfg.ability
    rule = ExtensiveRule(cfg.rule)
    q_bar = mean_pair_budget(template)
    draws = _counterfactual_draws(template, cfg, dist, draws)

    theta_policy, policy_cuts = apply_policy(theta, policy, q_bar, dist)
    theta_fix, _ = apply_policy(theta, PolicySpec(extensive_fix=True), q_bar, dist)
    setups = {
        "baseline": (theta, None),
        "no_disadvantage": (theta.no_disadvantage(dist), None),
        "policy": (theta_policy, policy_cuts),
        "extensive_fix": (theta_fix, None),
    }

    distributions = {}
    with ThreadPoolExecutor(max_workers=cfg.threads) as executor:
        futures = {
            executor.submit(_scenario_frame, template, t, draws, rule, cuts): name
            for name, (t, cuts) in setups.items()
        }
        for future in as_completed(futures):
            name = futures[future]
            distributions[name] = GapDistribution(gap_samples(future.result(), kind), name, kind)
            if status is not None:
                status['message'] = f"Scenarios ({len(distributions)}/{len(setups)})"

    ordered = {name: distributions[name] for name in SCENARIOS}
    return PolicyResult(ordered, policy, theta_policy, q_bar)


@dataclass(frozen=True)
class ResourceResult:
    before: GapDistribution
    after: GapDistribution
    qbar_from: float
    qbar_to: float
    saturated_share: float
    warnings: list[str] = field(default_factory=list)

    @property
    def distributions(self) -> dict[str, GapDistribution]:
        return {"before": self.before, "after": self.after}

    def summary(self) -> dict:
        return {
            "qbar_from": self.qbar_from,
            "qbar_to": self.qbar_to,
            "mean_before": self.before.mean,
            "mean_after": self.after.mean,
            "std_error_before": self.before.std_error,
            "std_error_after": self.after.std_error,
            "ks_before_after": ks_distance(self.before, self.after),
            "saturated_share": self.saturated_share,
            "warnings": list(self.warnings),
        }


def cf3_resource_increase(
    theta: Theta,
    template: Sequence[HouseholdSpec],
    qbar_from: float,
    qbar_to: float,
    cfg: EstimationConfig,
    dist: Ability | None = None,
    kind: str = "gender",
    draws: SimulationDraws | None = None,
    ) -> ResourceResult:
    """Scale every budget by qbar_to / qbar_from (capped at N_c * q_max) at fixed theta."""
    if qbar_from <= 0 or qbar_to <= 0:
        raise ConfigError(f"budgets must be positive, got {qbar_from} -> {qbar_to}", field="qbar")
    dist = dist or cfg.ability
    rule = ExtensiveRule(cfg.rule)
    draws = _counterfactual_draws(template, cfg, dist, draws)

    budgets = np.array([hh.q_T for hh in template], dtype=float)
    caps = np.array([hh.n_c * hh.q_max for hh in template], dtype=float)
    scaled = budgets * (qbar_to / qbar_from)
    saturated = scaled >= caps
    scaled = np.minimum(scaled, caps)
    share = float(saturated.mean())

    notes = []
    if share > SATURATION_WARN:
        message = f"{100.0 * share:.1f}% of households hit the N_c * q_max budget cap"
        logger.warning(message)
        notes.append(message)

    before = _scenario_frame(template, theta, draws, rule, None)
    after = before if qbar_to == qbar_from else _scenario_frame(template, theta, draws, rule, None, scaled)
    return ResourceResult(
        before=GapDistribution(gap_samples(before, kind), "before", kind),
        after=GapDistribution(gap_samples(after, kind), "after", kind),
        qbar_from=float(qbar_from),
        qbar_to=float(qbar_to),
        saturated_share=share,
        warnings=notes,
    )


def gaps_frame(distributions: Mapping[str, GapDistribution]) -> pd.DataFrame:
    frames = [
        pd.DataFrame({"scenario": name, "gap_years": d.samples})
        for name, d in distributions.items()
    ]
    return pd.concat(frames, ignore_index=True)[GAP_COLUMNS]


def write_gaps(distributions: Mapping[str, GapDistribution], path: str | Path) -> None:
    gaps_frame(distributions).to_csv(path, index=False)
