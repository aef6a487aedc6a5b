"""
Simulated method of moments for (theta1, alpha_gap), with the extensive
probabilities set beforehand by inverting the observed shares.
"""
from __future__ import annotations

import logging
import numpy as np
import pandas as pd
from scipy import optimize
from dataclasses import dataclass, field, fields, replace
from typing import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor, as_completed
from household_schooling.helpers import derive_rng
from household_schooling.population import frame_to_households
from household_schooling.model_core.types import AbilityDist, HouseholdSpec, Theta, ThreeChildShares
from household_schooling.model_core.extensive import ExtensiveRule, educated_probabilities
from household_schooling.model_core.simulate import SimulationDraws, make_draws, simulate_batch
from household_schooling.estimator.covariance import bootstrap_moment_cov, delta_method, numerical_jacobian
from household_schooling.errors import ConfigError, ConvergenceError
from household_schooling.config import ABILITY_DEFAULTS, ESTIMATION_DEFAULTS, PARENT_EDUC_STRATA
from household_schooling.moments import (
    MomentVector,
    Population,
    compute_moment_vector,
    extensive_share_cells,
    select_stratum,
)

logger = logging.getLogger(__name__)

OUT_OF_BOUNDS = 1e6

# two-child probability and the share moment it reproduces
SHARE_TARGETS = {
    "p1": "m2",
    "p_fb_d": "m3",
    "p_sb_d": "m4",
    "p_high_aversion": "m_all_educated",
}


@dataclass(frozen=True)
class EstimationConfig:
    """
    Simulation and optimiser settings. `H = None` uses the data households
    themselves as the simulation template.
    """
    s: int = ESTIMATION_DEFAULTS["S"]
    H: int | None = None
    max_evaluations: int = ESTIMATION_DEFAULTS["MAX_EVALUATIONS"]
    bootstrap_reps: int = ESTIMATION_DEFAULTS["BOOTSTRAP_REPS"]
    fd_step: float = ESTIMATION_DEFAULTS["FD_STEP"]
    grid_points: int = ESTIMATION_DEFAULTS["GRID_POINTS"]
    theta1_bounds: tuple[float, float] = ESTIMATION_DEFAULTS["THETA1_BOUNDS"]
    alpha_gap_bounds: tuple[float, float] = ESTIMATION_DEFAULTS["ALPHA_GAP_BOUNDS"]
    xatol: float = ESTIMATION_DEFAULTS["XATOL"]
    fatol: float = ESTIMATION_DEFAULTS["FATOL"]
    seed: int = ESTIMATION_DEFAULTS["SEED"]
    beta1: float = ABILITY_DEFAULTS["BETA1"]
    beta2: float = ABILITY_DEFAULTS["BETA2"]
    n_c: int = 2
    parent_educ: str | None = None
    rule: str = ExtensiveRule.BERNOULLI.value
    threads: int = 1

    def __post_init__(self):
        if self.s < 1:
            raise ConfigError(f"must be >= 1, got {self.s}", field="s")
        if self.H is not None and self.H < 1:
            raise ConfigError(f"must be >= 1, got {self.H}", field="H")
        if self.bootstrap_reps < 2:
            raise ConfigError(f"must be >= 2, got {self.bootstrap_reps}", field="bootstrap_reps")
        if self.fd_step <= 0:
            raise ConfigError(f"must be positive, got {self.fd_step}", field="fd_step")
        if self.max_evaluations < 1:
            raise ConfigError(f"must be >= 1, got {self.max_evaluations}", field="max_evaluations")
        if self.grid_points < 2:
            raise ConfigError(f"must be >= 2, got {self.grid_points}", field="grid_points")
        for name in ("theta1_bounds", "alpha_gap_bounds"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ConfigError(f"lower bound must be below upper, got ({lo}, {hi})", field=name)
        if self.n_c not in (2, 3):
            raise ConfigError(f"must be 2 or 3, got {self.n_c}", field="n_c")
        if self.parent_educ is not None and self.parent_educ not in PARENT_EDUC_STRATA:
            raise ConfigError(f"unknown stratum '{self.parent_educ}'", field="parent_educ")
        if self.rule not in {r.value for r in ExtensiveRule}:
            raise ConfigError(f"unknown rule '{self.rule}'", field="rule")
        if self.threads < 1:
            raise ConfigError(f"must be >= 1, got {self.threads}", field="threads")
        AbilityDist(self.beta1, self.beta2)

    @property
    def ability(self) -> AbilityDist:
        return AbilityDist(self.beta1, self.beta2)

    @property
    def bounds(self) -> dict[str, tuple[float, float]]:
        return {"theta1": tuple(self.theta1_bounds), "alpha_gap": tuple(self.alpha_gap_bounds)}

    def replace(self, **changes) -> EstimationConfig:
        return replace(self, **changes)

    @classmethod
    def from_dict(cls, data: Mapping) -> EstimationConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown key(s) {unknown}", field="estimation")
        payload = dict(data)
        for name in ("theta1_bounds", "alpha_gap_bounds"):
            if name in payload:
                payload[name] = tuple(payload[name])
        try:
            return cls(**payload)
        except TypeError as e:
            raise ConfigError(str(e), field="estimation") from e


@dataclass(frozen=True)
class EstimationResult:
    theta_hat: Theta
    objective_at_min: float
    data_moments: MomentVector
    model_moments: MomentVector
    V: pd.DataFrame
    jacobian: pd.DataFrame
    omega: pd.DataFrame
    std_errors: pd.Series
    n_evaluations: int
    grid_best: tuple[float, float]
    warnings: list[str] = field(default_factory=list)

    def moment_table(self) -> pd.DataFrame:
        data = self.data_moments.as_series()
        model = self.model_moments.as_series().reindex(data.index)
        return pd.DataFrame({"moment": data.index, "data": data.to_numpy(), "model": model.to_numpy()})

    def to_dict(self) -> dict:
        return {
            "theta_hat": self.theta_hat.to_dict(),
            "std_errors": self.std_errors.to_dict(),
            "objective_at_min": self.objective_at_min,
            "moments": self.moment_table().to_dict(orient="records"),
            "data_moments": self.data_moments.to_dict(),
            "model_moments": self.model_moments.to_dict(),
            "V": {"labels": list(self.V.index), "matrix": self.V.to_numpy()},
            "jacobian": {
                "moments": list(self.jacobian.index),
                "parameters": list(self.jacobian.columns),
                "matrix": self.jacobian.to_numpy(),
            },
            "omega": {"parameters": list(self.omega.index), "matrix": self.omega.to_numpy()},
            "n_evaluations": self.n_evaluations,
            "grid_best": list(self.grid_best),
            "warnings": list(self.warnings),
        }


def share_weights_from_template(template: Sequence[HouseholdSpec]) -> dict[str, int]:
    return pd.Series([hh.composition for hh in template]).value_counts().to_dict()


def analytic_share_moments(
    theta: Theta,
    weights: Mapping[str, float],
    ) -> dict[str, float | None]:
    """
    Expected m2-m4 under the Bernoulli rule, averaging the per-composition
    educated probabilities with `weights` (households per composition).
    """
    sums = {"m2": [0.0, 0.0], "m3": [0.0, 0.0], "m4": [0.0, 0.0]}
    for comp, weight in weights.items():
        if weight <= 0:
            continue
        probs = educated_probabilities(comp, theta)
        daughters = np.array([ch == "d" for ch in comp])
        if daughters.all() or not daughters.any():
            sums["m2"][0] += weight * probs[0]
            sums["m2"][1] += weight
        else:
            key = "m3" if comp[0] == "d" else "m4"
            sums[key][0] += weight * probs[daughters].sum()
            sums[key][1] += weight * daughters.sum()
    out = {k: (num / den if den > 0 else None) for k, (num, den) in sums.items()}
    out["m_all_educated"] = theta.p_high_aversion
    return out


def simulate_model_moments(
    theta: Theta,
    template: Sequence[HouseholdSpec],
    cfg: EstimationConfig,
    draws: SimulationDraws | None = None,
    share_weights: Mapping[str, float] | None = None,
    ) -> MomentVector:
    """
    Moments of s simulated replicates of every template household. Under the
    Bernoulli rule the share moments are taken at their expectation, which
    depends on the probabilities alone.
    """
    if draws is None:
        draws = make_draws(template, cfg.s, cfg.ability, cfg.seed, label="smm", threads=cfg.threads)
    simulated = simulate_batch(template, theta, draws, ExtensiveRule(cfg.rule))
    mv = compute_moment_vector(simulated)
    if ExtensiveRule(cfg.rule) is ExtensiveRule.BERNOULLI:
        weights = share_weights if share_weights is not None else share_weights_from_template(template)
        mv = replace(mv, **analytic_share_moments(theta, weights))
    return replace(mv, stratum=stratum_of(template))


def stratum_of(template: Sequence[HouseholdSpec]) -> str:
    strata = {hh.parent_educ for hh in template}
    sizes = {hh.n_c for hh in template}
    educ = strata.pop() if len(strata) == 1 else "all"
    n_c = sizes.pop() if len(sizes) == 1 else "all"
    return f"{educ}:{n_c}"


def moment_gaps(
    data_moments: MomentVector,
    model_moments: MomentVector,
    ) -> pd.Series:
    data = data_moments.as_series()
    model = model_moments.as_series()
    missing = [label for label in data.index if label not in model.index]
    if missing:
        raise ConfigError(f"model moments lack {missing}", field="moments")
    return data - model[data.index]


def objective_value(
    data_moments: MomentVector,
    model_moments: MomentVector,
    ) -> float:
    """Unweighted sum of squared moment gaps."""
    return float((moment_gaps(data_moments, model_moments) ** 2).sum())


def smm_objective(
    theta: Theta,
    data_moments: MomentVector,
    template: Sequence[HouseholdSpec],
    cfg: EstimationConfig,
    draws: SimulationDraws | None = None,
    share_weights: Mapping[str, float] | None = None,
    ) -> float:
    model = simulate_model_moments(theta, template, cfg, draws, share_weights)
    return objective_value(data_moments, model)


def _share_from_counts(numerator: float, denominator: float, default: float) -> float:
    return numerator / denominator if denominator > 0 else default


def invert_three_child_shares(cells: pd.DataFrame) -> dict[str, ThreeChildShares]:
    """
    Probabilities of the nested three-child draw that reproduce the observed
    educated patterns exactly; 'same' pools ddd and sss.
    """
    if cells.empty:
        return {}
    cells = cells[cells["composition"].str.len() == 3].copy()
    cells["key"] = np.where(cells["composition"].isin(["ddd", "sss"]), "same", cells["composition"])
    defaults = ThreeChildShares()
    out = {}
    for key, group in cells.groupby("key"):
        count = group.groupby("pattern")["households"].sum()

        def n(pattern):
            return float(count.get(pattern, 0))

        medium = n("110") + n("101") + n("011")
        low = n("100") + n("010") + n("001")
        p_m1 = _share_from_counts(n("110") + n("101"), medium, defaults.p_m1)
        out[key] = ThreeChildShares(
            p_medium=_share_from_counts(medium, medium + low, defaults.p_medium),
            p_m1=p_m1,
            p_m2=_share_from_counts(n("110"), n("110") + n("101"), defaults.p_m2),
            p_l1=_share_from_counts(n("100"), low, defaults.p_l1),
            p_l2=_share_from_counts(n("010"), n("010") + n("001"), defaults.p_l2),
        )
    return out


def stage_one(
    data_moments: MomentVector,
    cells: pd.DataFrame,
    start: Theta,
    n_c: int,
    ) -> Theta:
    """Set the extensive probabilities to the observed shares."""
    changes = {}
    if n_c == 2:
        for name, moment in SHARE_TARGETS.items():
            value = getattr(data_moments, moment)
            if value is None:
                logger.info("no observations for %s; %s kept at %.4f", moment, name, getattr(start, name))
            else:
                changes[name] = float(value)
    else:
        changes["p_high_aversion"] = float(data_moments.m_all_educated)
        changes["three_child"] = {**start.three_child, **invert_three_child_shares(cells)}
    return start.replace(**changes)


def build_template(
    households: Sequence[HouseholdSpec],
    H: int | None,
    seed: int,
    ) -> list[HouseholdSpec]:
    """The data households, or H of them drawn with replacement."""
    if H is None or H == len(households):
        return list(households)
    rng = derive_rng(seed, "template")
    picks = rng.integers(0, len(households), size=H)
    return [households[i] for i in picks]


def _fd_steps(theta: Theta, cfg: EstimationConfig) -> np.ndarray:
    """Step relative to the larger of |theta_j| and the width of its search range."""
    return np.array([
        cfg.fd_step * max(abs(getattr(theta, name)), hi - lo)
        for name, (lo, hi) in cfg.bounds.items()
    ])


def standard_errors(
    theta_hat: Theta,
    V: pd.DataFrame,
    template: Sequence[HouseholdSpec],
    cfg: EstimationConfig,
    draws: SimulationDraws | None = None,
    share_weights: Mapping[str, float] | None = None,
    ) -> tuple[pd.DataFrame, pd.DataFrame, pd.Series, list[str]]:
    """
    Forward-difference Jacobian of the moments in V's order, with the same
    draws at every point, and Omega = (J' V^-1 J)^-1.
    Returns (jacobian, omega, std_errors, warnings).
    """
    if draws is None:
        draws = make_draws(template, cfg.s, cfg.ability, cfg.seed, label="smm", threads=cfg.threads)
    labels = list(V.index)
    params = list(Theta.ESTIMATED)

    def moments_at(x):
        theta = theta_hat.replace(**dict(zip(params, map(float, x))))
        series = simulate_model_moments(theta, template, cfg, draws, share_weights).as_series()
        return series.reindex(labels).to_numpy()

    x0 = np.array([getattr(theta_hat, name) for name in params])
    J = numerical_jacobian(moments_at, x0, _fd_steps(theta_hat, cfg))
    omega, notes = delta_method(J, V.to_numpy())
    std = np.sqrt(np.clip(np.diag(omega), 0.0, None))
    return (
        pd.DataFrame(J, index=labels, columns=params),
        pd.DataFrame(omega, index=params, columns=params),
        pd.Series(std, index=params),
        notes,
    )


def _evaluate_grid(objective, points, threads):
    values = np.empty(len(points))
    if threads <= 1:
        for i, point in enumerate(points):
            values[i] = objective(point)
        return values
    with ThreadPoolExecutor(max_workers=threads) as executor:
        futures = {executor.submit(objective, point): i for i, point in enumerate(points)}
        for future in as_completed(futures):
            values[futures[future]] = future.result()
    return values


def estimate_theta(
    data: Population,
    cfg: EstimationConfig | None = None,
    start: Theta | None = None,
    status: dict | None = None,
    ) -> EstimationResult:
    """
    Two-stage SMM on one (parent_educ, N_c) stratum: (i) probabilities from
    the observed shares, (ii) (theta1, alpha_gap) by a coarse grid followed
    by Nelder-Mead, all evaluations sharing one set of draws.
    """
    cfg = cfg or EstimationConfig()
    start = start or Theta(theta1=0.0, alpha_gap=0.0, p1=0.5, p_fb_d=0.5, p_sb_d=0.5)

    def report(message):
        logger.info(message)
        if status is not None:
            status['message'] = message

    df = select_stratum(data, cfg.parent_educ, cfg.n_c)
    data_moments = compute_moment_vector(df, cfg.parent_educ, cfg.n_c)
    cells = extensive_share_cells(df)
    theta_p = stage_one(data_moments, cells, start, cfg.n_c)
    share_weights = cells.groupby("composition")["households"].sum().to_dict() if not cells.empty else {}

    template = build_template(frame_to_households(df), cfg.H, cfg.seed)
    report(f"Simulating {len(template)} households x {cfg.s} draws")
    draws = make_draws(template, cfg.s, cfg.ability, cfg.seed, label="smm", threads=cfg.threads)

    (t_lo, t_hi), (g_lo, g_hi) = cfg.bounds["theta1"], cfg.bounds["alpha_gap"]
    t_hi = min(t_hi, theta_p.gamma)

    def objective(x):
        theta1, alpha_gap = float(x[0]), float(x[1])
        if not (t_lo <= theta1 < t_hi and g_lo <= alpha_gap <= g_hi):
            return OUT_OF_BOUNDS
        theta = theta_p.replace(theta1=theta1, alpha_gap=alpha_gap)
        return smm_objective(theta, data_moments, template, cfg, draws, share_weights)

    theta1_grid = np.linspace(t_lo, t_hi, cfg.grid_points, endpoint=False)
    gap_grid = np.linspace(g_lo, g_hi, cfg.grid_points)
    points = [(t, g) for t in theta1_grid for g in gap_grid]
    report(f"Grid search over {len(points)} points")
    values = _evaluate_grid(objective, points, cfg.threads)
    grid_best = points[int(np.argmin(values))]
    logger.debug("grid minimum %.6g at %s", values.min(), grid_best)

    report("Refining with Nelder-Mead")
    step = np.array([theta1_grid[1] - theta1_grid[0], gap_grid[1] - gap_grid[0]]) / 2.0
    x0 = np.array(grid_best)
    simplex = np.array([x0, x0 + [step[0], 0.0], x0 + [0.0, step[1]]])
    res = optimize.minimize(
        objective, x0, method="Nelder-Mead",
        options={
            "maxfev": cfg.max_evaluations,
            "xatol": cfg.xatol,
            "fatol": cfg.fatol,
            "initial_simplex": simplex,
        },
    )
    theta_hat = theta_p.replace(theta1=float(res.x[0]), alpha_gap=float(res.x[1]))
    if not res.success:
        fvals = res.final_simplex[1]
        relative = (fvals.max() - fvals.min()) / max(abs(fvals.min()), cfg.fatol)
        if relative > 1e-6:
            raise ConvergenceError(
                f"Nelder-Mead stopped after {res.nfev} evaluations with relative "
                f"objective change {relative:.3g}", best=theta_hat)
        logger.warning("Nelder-Mead budget exhausted but the objective is flat: %s", res.message)

    model_moments = simulate_model_moments(theta_hat, template, cfg, draws, share_weights)

    report(f"Bootstrapping the moment covariance ({cfg.bootstrap_reps} replications)")
    V = bootstrap_moment_cov(df, cfg.bootstrap_reps, cfg.seed, data_moments.labels,
                             threads=cfg.threads, status=status)
    report("Computing standard errors")
    jacobian, omega, std, notes = standard_errors(theta_hat, V, template, cfg, draws, share_weights)

    if cfg.n_c == 2:
        for name, moment in SHARE_TARGETS.items():
            if moment in V.index:
                std[name] = float(np.sqrt(max(V.loc[moment, moment], 0.0)))

    logger.info("theta_hat: theta1=%.5f alpha_gap=%.5f objective=%.6g",
                theta_hat.theta1, theta_hat.alpha_gap, float(res.fun))
    return EstimationResult(
        theta_hat=theta_hat,
        objective_at_min=float(res.fun),
        data_moments=data_moments,
        model_moments=model_moments,
        V=V,
        jacobian=jacobian,
        omega=omega,
        std_errors=std,
        n_evaluations=len(points) + int(res.nfev),
        grid_best=tuple(float(v) for v in grid_best),
        warnings=notes,
    )


def objective_profile(
    theta_hat: Theta,
    data_moments: MomentVector,
    template: Sequence[HouseholdSpec],
    cfg: EstimationConfig,
    param: str,
    grid: Sequence[float],
    draws: SimulationDraws | None = None,
    share_weights: Mapping[str, float] | None = None,
    ) -> pd.DataFrame:
    """Objective along one parameter with the others held at theta_hat."""
    if param not in Theta.ESTIMATED:
        raise ConfigError(f"must be one of {Theta.ESTIMATED}, got '{param}'", field="param")
    if draws is None:
        draws = make_draws(template, cfg.s, cfg.ability, cfg.seed, label="smm", threads=cfg.threads)
    values = [
        smm_objective(theta_hat.replace(**{param: float(v)}), data_moments, template,
                      cfg, draws, share_weights)
        for v in grid
    ]
    return pd.DataFrame({param: np.asarray(grid, dtype=float), "objective": values})
