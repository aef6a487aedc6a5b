"""
Command-line entry point: `household-schooling COMMAND`.

Every command reads files, writes files under --out and embeds a provenance
block (tool version, seed, command, input digests) in its JSON output.
Exit status: 0 on success, 1 on invalid configuration, data or usage,
2 when an iterative procedure does not converge.
"""
from __future__ import annotations

import os
import sys
import json
import logging
import argparse
import numpy as np
import pandas as pd
from pathlib import Path
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Mapping, Sequence
from household_schooling.config import ESTIMATION_DEFAULTS, PARENT_EDUC_STRATA, REFERENCE_MAGNITUDES
from household_schooling.helpers import loading_animation, provenance, round_half_up, write_json
from household_schooling.errors import ConfigError, ConvergenceError, DataError, HouseholdSchoolingError
from household_schooling.model_core.types import Theta
from household_schooling.model_core.simulate import simulate_records
from household_schooling.moments import extensive_share_cells, moments_payload, select_stratum
from household_schooling.regress import MARGINS, decomposition_shares, diff_regression
from household_schooling.recovery import ability_diagnostics, load_recovered_dist, recover_population, write_recovered
from household_schooling.estimator.smm import (
    EstimationConfig,
    build_template,
    estimate_theta,
    objective_profile,
)
from household_schooling.population import (
    PopulationConfig,
    fit_beta_mle,
    frame_to_households,
    generate_population,
    load_population,
    load_scores,
    records_to_households,
    write_population,
)
from household_schooling.counterfactual import (
    GAP_KINDS,
    PolicySpec,
    calibrate_policy,
    cf1_gap_curve,
    cf2_policy_distributions,
    cf3_resource_increase,
    write_gaps,
)

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 2
PROFILE_POINTS = 21
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


@dataclass(frozen=True)
class CounterfactualSettings:
    q_T: float = 2.0 * REFERENCE_MAGNITUDES["cf3_qbar"][0]
    grid_points: int = 99
    qbar_from: float = REFERENCE_MAGNITUDES["cf3_qbar"][0]
    qbar_to: float = REFERENCE_MAGNITUDES["cf3_qbar"][1]
    kind: str = "gender"
    calibrate: bool = True
    ability_path: str | None = None
    households: int = ESTIMATION_DEFAULTS["H"]

    def __post_init__(self):
        if self.grid_points < 2:
            raise ConfigError(f"must be >= 2, got {self.grid_points}", field="counterfactual.grid_points")
        if self.kind not in GAP_KINDS:
            raise ConfigError(f"must be one of {GAP_KINDS}, got '{self.kind}'", field="counterfactual.kind")
        if self.households < 1:
            raise ConfigError(f"must be >= 1, got {self.households}", field="counterfactual.households")


def _reject_unknown(data: Mapping, cls, where: str) -> None:
    unknown = sorted(set(data) - {f.name for f in fields(cls)})
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}", field=where)


@dataclass(frozen=True)
class RunConfig:
    """Parameter blocks of one run, validated before any computation."""
    population: PopulationConfig | None = None
    estimation: EstimationConfig = field(default_factory=EstimationConfig)
    policy: PolicySpec | None = None
    counterfactual: CounterfactualSettings = field(default_factory=CounterfactualSettings)
    seed: int | None = None

    @classmethod
    def from_dict(cls, data: Mapping) -> RunConfig:
        _reject_unknown(data, cls, "config")
        counterfactual = dict(data.get("counterfactual") or {})
        _reject_unknown(counterfactual, CounterfactualSettings, "counterfactual")
        try:
            settings = CounterfactualSettings(**counterfactual)
        except TypeError as e:
            raise ConfigError(str(e), field="counterfactual") from e
        return cls(
            population=PopulationConfig.from_dict(data["population"]) if data.get("population") else None,
            estimation=EstimationConfig.from_dict(data.get("estimation") or {}),
            policy=PolicySpec.from_dict(data["policy"]) if data.get("policy") else None,
            counterfactual=settings,
            seed=None if data.get("seed") is None else int(data["seed"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        try:
            with open(path, encoding="utf-8") as f:
                return cls.from_dict(json.load(f))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read '{path}': {e}", field="config") from e

    def with_overrides(self, seed: int | None, stratum: str | None, threads: int) -> RunConfig:
        seed = self.seed if seed is None else seed
        estimation = self.estimation.replace(threads=threads)
        if stratum is not None:
            estimation = estimation.replace(parent_educ=stratum)
        population = self.population
        if seed is not None:
            estimation = estimation.replace(seed=seed)
            if population is not None:
                population = replace(population, seed=seed)
        return RunConfig(population, estimation, self.policy, self.counterfactual, seed)

    @property
    def resolved_seed(self) -> int:
        return self.estimation.seed

    def to_dict(self) -> dict:
        return {
            "population": None if self.population is None else asdict(self.population),
            "estimation": {k: v for k, v in asdict(self.estimation).items() if k != "threads"},
            "policy": None if self.policy is None else self.policy.to_dict(),
            "counterfactual": asdict(self.counterfactual),
            "seed": self.resolved_seed,
        }


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the validation status instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="household-schooling",
                     description="Intra-household education allocation: simulation, estimation, policy.")
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--stratum", choices=PARENT_EDUC_STRATA, help="parent-education stratum")
    parser.add_argument("--quiet", action="store_true", help="warnings only, no progress line")
    parser.add_argument("--verbose", action="store_true", help="debug logging")

    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    simulate = commands.add_parser("simulate", help="synthetic households CSV")
    simulate.add_argument("--theta", type=Path, required=True)
    simulate.add_argument("--integer-years", action="store_true",
                          help="report years rounded half up to whole years")

    moments = commands.add_parser("moments", help="moments and inequality statistics")
    moments.add_argument("--data", type=Path, required=True)

    estimate = commands.add_parser("estimate", help="two-stage SMM estimation")
    estimate.add_argument("--data", type=Path, required=True)
    estimate.add_argument("--theta", type=Path, help="starting values")

    decompose = commands.add_parser("decompose", help="inequality decomposition")
    decompose.add_argument("--data", type=Path, required=True)
    decompose.add_argument("--margin", choices=MARGINS)

    recover = commands.add_parser("recover", help="recover household abilities")
    recover.add_argument("--data", type=Path, required=True)
    recover.add_argument("--theta", type=Path, required=True)

    counterfactual = commands.add_parser("counterfactual", help="policy experiments")
    counterfactual.add_argument("experiment", choices=("cf1", "cf2", "cf3"))
    counterfactual.add_argument("--theta", type=Path, required=True)
    counterfactual.add_argument("--data", type=Path)

    fit_beta = commands.add_parser("fit-beta", help="maximum-likelihood ability law")
    fit_beta.add_argument("--scores", type=Path, required=True)
    return parser


def load_theta(path: Path) -> Theta:
    try:
        with open(path, encoding="utf-8") as f:
            return Theta.from_dict(json.load(f))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read '{path}': {e}", field="theta") from e


def _inputs(args) -> list[Path]:
    paths = [args.config] + [getattr(args, name, None) for name in ("theta", "data", "scores")]
    return [p for p in paths if p is not None]


def _emit(payload: dict, path: Path, args, run: RunConfig) -> None:
    payload = {
        **payload,
        "config": run.to_dict(),
        "provenance": provenance(run.resolved_seed, args.command, _inputs(args)),
    }
    write_json(payload, path)
    logger.info("wrote %s", path)


def _population_config(run: RunConfig, n_households: int) -> PopulationConfig:
    if run.population is not None:
        return run.population
    return PopulationConfig(n_households=n_households, seed=run.resolved_seed)


def cmd_simulate(args, run: RunConfig, status: dict) -> None:
    theta = load_theta(args.theta)
    pcfg = _population_config(run, ESTIMATION_DEFAULTS["H"])
    status['message'] = f"Generating {pcfg.n_households} households"
    template = generate_population(pcfg, threads=run.estimation.threads)
    status['message'] = "Simulating outcomes"
    frame = simulate_records(template, theta, run.estimation.ability, run.resolved_seed,
                             run.estimation.rule, run.estimation.threads)
    if args.integer_years:
        frame = frame.assign(educ_years=frame["educ_years"].map(round_half_up).astype(float))
    write_population(frame, args.out / "households.csv")
    _emit({"theta": theta.to_dict(), "n_households": len(template)},
          args.out / "simulate.json", args, run)


def cmd_moments(args, run: RunConfig, status: dict) -> None:
    records = load_population(args.data)
    _emit({"strata": moments_payload(records, run.estimation.parent_educ)},
          args.out / "moments.json", args, run)


def _profiles(result, records, cfg: EstimationConfig) -> pd.DataFrame:
    df = select_stratum(records, cfg.parent_educ, cfg.n_c)
    template = build_template(frame_to_households(df), cfg.H, cfg.seed)
    cells = extensive_share_cells(df)
    weights = cells.groupby("composition")["households"].sum().to_dict() if not cells.empty else {}
    frames = []
    for param, (lo, hi) in cfg.bounds.items():
        if param == "theta1":
            hi = min(hi, result.theta_hat.gamma)
        grid = np.linspace(lo, hi, PROFILE_POINTS, endpoint=param != "theta1")
        profile = objective_profile(result.theta_hat, result.data_moments, template, cfg,
                                    param, grid, share_weights=weights)
        frames.append(profile.rename(columns={param: "value"}).assign(parameter=param))
    return pd.concat(frames, ignore_index=True)[["parameter", "value", "objective"]]


def cmd_estimate(args, run: RunConfig, status: dict) -> None:
    records = load_population(args.data)
    start = load_theta(args.theta) if args.theta else None
    cfg = run.estimation
    result = estimate_theta(records, cfg, start, status=status)
    status['message'] = "Objective profiles"
    _profiles(result, records, cfg).to_csv(args.out / "objective_profile.csv", index=False)
    _emit({"result": result.to_dict()}, args.out / "estimate.json", args, run)


def cmd_decompose(args, run: RunConfig, status: dict) -> None:
    records = load_population(args.data)
    df = select_stratum(records, run.estimation.parent_educ)
    payload = {"shares": {}}
    for margin in [args.margin] if args.margin else MARGINS:
        try:
            payload["shares"][margin] = decomposition_shares(df, margin).to_dict()
        except ConfigError as e:
            if args.margin:
                raise
            logger.warning("skipping the %s margin: %s", margin, e)
            payload["shares"][margin] = {"error": str(e)}
    payload["diff_regression"] = diff_regression(df).to_dict()
    payload["reference"] = {
        "shares": REFERENCE_MAGNITUDES["decomposition_shares_qT12"],
        "fe": REFERENCE_MAGNITUDES["fe_coefficients_qT12"],
    }
    _emit(payload, args.out / "decompose.json", args, run)


def cmd_recover(args, run: RunConfig, status: dict) -> None:
    records = load_population(args.data)
    theta = load_theta(args.theta)
    recovered = recover_population(select_stratum(records, run.estimation.parent_educ), theta)
    write_recovered(recovered, args.out / "recovered.csv")
    payload = {"n_households": len(recovered), "n_corners": int(recovered["corner_flag"].sum())}
    try:
        payload["diagnostics"] = ability_diagnostics(records, theta, recovered=recovered).to_dict()
    except DataError as e:
        logger.warning("no ability diagnostics: %s", e)
        payload["diagnostics"] = None
    _emit(payload, args.out / "recovery.json", args, run)


def _counterfactual_template(args, run: RunConfig):
    if args.data is not None:
        records = load_population(args.data)
        return records_to_households(
            [r for r in records if run.estimation.parent_educ in (None, r.parent_educ)])
    pcfg = _population_config(run, run.counterfactual.households)
    return generate_population(pcfg, threads=run.estimation.threads)


def cmd_counterfactual(args, run: RunConfig, status: dict) -> None:
    theta = load_theta(args.theta)
    settings = run.counterfactual
    cfg = run.estimation
    dist = load_recovered_dist(settings.ability_path) if settings.ability_path else cfg.ability
    prefix = args.out / args.experiment

    if args.experiment == "cf1":
        grid = np.linspace(0.0, 1.0, settings.grid_points + 2)[1:-1]
        curve = cf1_gap_curve(theta, settings.q_T, grid)
        curve.to_frame().to_csv(f"{prefix}_curve.csv", index=False)
        _emit({"curve": curve.to_dict()}, Path(f"{prefix}_summary.json"), args, run)
        return

    template = _counterfactual_template(args, run)
    if args.experiment == "cf2":
        notes = []
        if run.policy is not None:
            policy = run.policy
        elif settings.calibrate:
            policy, notes = calibrate_policy(theta, template, dist)
        else:
            policy = PolicySpec.reference()
        result = cf2_policy_distributions(theta, policy, template, cfg, dist,
                                          settings.kind, status=status)
        summary = result.summary()
        summary["warnings"] = notes + summary["warnings"]
        summary["reference_policy"] = PolicySpec.reference().to_dict()
    else:
        result = cf3_resource_increase(theta, template, settings.qbar_from, settings.qbar_to,
                                       cfg, dist, settings.kind)
        summary = result.summary()

    write_gaps(result.distributions, f"{prefix}_gaps.csv")
    _emit({"summary": summary}, Path(f"{prefix}_summary.json"), args, run)


def cmd_fit_beta(args, run: RunConfig, status: dict) -> None:
    scores = load_scores(args.scores)
    dist = fit_beta_mle(scores)
    _emit({"ability": dist.to_dict(), "n": int(scores.size)}, args.out / "ability.json", args, run)


COMMANDS = {
    "simulate": cmd_simulate,
    "moments": cmd_moments,
    "estimate": cmd_estimate,
    "decompose": cmd_decompose,
    "recover": cmd_recover,
    "counterfactual": cmd_counterfactual,
    "fit-beta": cmd_fit_beta,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(format=LOG_FORMAT, level=level)

    try:
        if args.threads < 1:
            raise ConfigError(f"must be >= 1, got {args.threads}", field="threads")
        run = RunConfig.load(args.config) if args.config else RunConfig()
        run = run.with_overrides(args.seed, args.stratum, args.threads)
        logger.info("config: %s", json.dumps(run.to_dict(), sort_keys=True, default=str))
        args.out.mkdir(parents=True, exist_ok=True)
        with loading_animation(f"Running {args.command}", enabled=not args.quiet) as status:
            COMMANDS[args.command](args, run, status)
    except ConvergenceError as e:
        logger.error("%s", e)
        return EXIT_NOT_CONVERGED
    except HouseholdSchoolingError as e:
        logger.error("%s", e)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
