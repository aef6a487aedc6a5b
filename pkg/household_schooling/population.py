"""
Household populations: synthetic generation, ability draws, CSV ingestion and
the maximum-likelihood fit of the ability law.
"""
from __future__ import annotations

import json
import logging
import numpy as np
import pandas as pd
from pathlib import Path
from scipy import special, stats
from dataclasses import dataclass, field, fields
from typing import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from household_schooling.helpers import derive_rng
from household_schooling.errors import ConfigError, ConvergenceError, DataError
from household_schooling.model_core.types import (
    AbilityDist,
    ChildSpec,
    EmpiricalAbilityDist,
    HouseholdSpec,
)
from household_schooling.config import (
    ABILITY_COLUMNS,
    ABILITY_DEFAULTS,
    BUDGET_DEFAULTS,
    COMPOSITIONS,
    HOUSEHOLD_COLUMNS,
    MODEL_DEFAULTS,
    PARENT_EDUC_STRATA,
)

logger = logging.getLogger(__name__)

__all__ = [
    "AbilityDist", "EmpiricalAbilityDist", "PopulationConfig", "ChildRecord",
    "HouseholdRecord", "sample_ability_vector", "generate_population",
    "load_population", "write_population", "as_frame", "records_to_households",
    "frame_to_households", "load_scores", "fit_beta_mle",
]

CHUNK_SIZE = 4096
WEIGHT_TOL = 1e-9


def _uniform_compositions() -> dict[str, float]:
    return {comp: 0.5 ** len(comp) for n in COMPOSITIONS for comp in COMPOSITIONS[n]}


def _check_weights(
    weights: Mapping,
    name: str,
    allowed: Iterable,
    ) -> None:
    allowed = set(allowed)
    unknown = sorted(str(k) for k in weights if k not in allowed)
    if unknown:
        raise ConfigError(f"unknown categories {unknown}", field=name)
    values = np.array(list(weights.values()), dtype=float)
    if (values < 0).any():
        raise ConfigError("weights must be non-negative", field=name)
    if abs(values.sum() - 1.0) > WEIGHT_TOL:
        raise ConfigError(f"weights must sum to 1, got {values.sum()}", field=name)


@dataclass(frozen=True)
class PopulationConfig:
    """
    Observables of a synthetic population. Budgets are drawn as N_c times an
    average years-per-child draw from a normal truncated to (0, q_max], with
    (mean, sd) taken from `budget` for the household's parent-education stratum.
    """
    n_households: int
    nc_weights: Mapping[int, float] = field(default_factory=lambda: {2: 1.0})
    gender_comp_weights: Mapping[str, float] = field(default_factory=_uniform_compositions)
    parent_educ_weights: Mapping[str, float] = field(default_factory=lambda: {"none": 1.0})
    budget: Mapping[str, tuple[float, float]] = field(default_factory=lambda: dict(BUDGET_DEFAULTS))
    q_max: float = MODEL_DEFAULTS["Q_MAX"]
    seed: int = 0

    def __post_init__(self):
        if int(self.n_households) <= 0:
            raise ConfigError(f"must be positive, got {self.n_households}", field="n_households")
        _check_weights(self.nc_weights, "nc_weights", COMPOSITIONS)
        for n_c, weight in self.nc_weights.items():
            if weight == 0:
                continue
            subset = {c: w for c, w in self.gender_comp_weights.items() if len(c) == n_c}
            _check_weights(subset, f"gender_comp_weights[{n_c}]", COMPOSITIONS[n_c])
        _check_weights(self.parent_educ_weights, "parent_educ_weights", PARENT_EDUC_STRATA)
        for stratum, weight in self.parent_educ_weights.items():
            if weight > 0 and stratum not in self.budget:
                raise ConfigError(f"no budget law for stratum '{stratum}'", field="budget")
        for stratum, (mean, sd) in self.budget.items():
            if sd <= 0 or not 0 < mean <= self.q_max:
                raise ConfigError(f"invalid (mean, sd) = ({mean}, {sd})", field=f"budget.{stratum}")
        if self.q_max <= 0:
            raise ConfigError("must be positive", field="q_max")

    @classmethod
    def from_dict(cls, data: Mapping) -> PopulationConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown key(s) {unknown}", field="population")
        payload = dict(data)
        if "nc_weights" in payload:
            # JSON object keys arrive as strings
            payload["nc_weights"] = {int(k): float(v) for k, v in payload["nc_weights"].items()}
        if "budget" in payload:
            payload["budget"] = {k: tuple(v) for k, v in payload["budget"].items()}
        try:
            return cls(**payload)
        except TypeError as e:
            raise ConfigError(str(e), field="population") from e

    @classmethod
    def load(cls, path: str | Path) -> PopulationConfig:
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


@dataclass(frozen=True)
class ChildRecord:
    household_id: str
    child_id: int
    female: bool
    birth_order: int
    educ_years: float
    n_c: int
    parent_educ: str


@dataclass(frozen=True)
class HouseholdRecord:
    household_id: str
    parent_educ: str
    children: tuple[ChildRecord, ...]

    @property
    def n_c(self) -> int:
        return len(self.children)

    @property
    def q_T(self) -> float:
        return float(sum(c.educ_years for c in self.children))

    @property
    def composition(self) -> str:
        ordered = sorted(self.children, key=lambda c: c.birth_order)
        return "".join("d" if c.female else "s" for c in ordered)

    def to_spec(self, q_max: float = MODEL_DEFAULTS["Q_MAX"]) -> HouseholdSpec:
        children = tuple(ChildSpec(female=c.female, birth_order=c.birth_order) for c in self.children)
        return HouseholdSpec(children=children, q_T=self.q_T, q_max=q_max,
                             parent_educ=self.parent_educ, household_id=self.household_id)


def sample_ability_vector(
    n_children: int,
    dist: AbilityDist | EmpiricalAbilityDist,
    rng: np.random.Generator,
    size: int | None = None,
    ) -> np.ndarray:
    """
    Relative abilities summing to one, independent of gender and birth order.
    Pairs draw the firstborn share and give the rest to the second child;
    three children normalise three i.i.d. draws. With `size` the result is
    (size, n_children).
    """
    if n_children not in (2, 3):
        raise ConfigError(f"unsupported number of children {n_children}", field="n_children")
    rows = 1 if size is None else int(size)
    if n_children == 2:
        first = np.asarray(dist.sample(rng, size=rows), dtype=float)
        out = np.column_stack([first, 1.0 - first])
    else:
        raw = np.asarray(dist.sample(rng, size=(rows, 3)), dtype=float)
        out = raw / raw.sum(axis=1, keepdims=True)
        out[:, -1] = 1.0 - out[:, :-1].sum(axis=1)
    return out[0] if size is None else out


def _choose(rng, categories, weights, size):
    keys = list(categories)
    p = np.array([weights[k] for k in keys], dtype=float)
    return np.array(keys, dtype=object)[rng.choice(len(keys), size=size, p=p / p.sum())]


def _generate_chunk(cfg: PopulationConfig, chunk: int, size: int) -> list[HouseholdSpec]:
    rng = derive_rng(cfg.seed, "population", chunk)
    sizes = _choose(rng, sorted(cfg.nc_weights), cfg.nc_weights, size).astype(int)
    strata = _choose(rng, sorted(cfg.parent_educ_weights), cfg.parent_educ_weights, size)

    compositions = np.empty(size, dtype=object)
    for n_c in np.unique(sizes):
        hit = sizes == n_c
        comp_weights = {c: w for c, w in cfg.gender_comp_weights.items() if len(c) == n_c}
        compositions[hit] = _choose(rng, sorted(comp_weights), comp_weights, int(hit.sum()))

    mean = np.array([cfg.budget[s][0] for s in strata])
    sd = np.array([cfg.budget[s][1] for s in strata])
    lower, upper = (0.0 - mean) / sd, (cfg.q_max - mean) / sd
    qbar = stats.truncnorm.rvs(lower, upper, loc=mean, scale=sd, size=size, random_state=rng)

    households = []
    for i in range(size):
        children = tuple(
            ChildSpec(female=ch == "d", birth_order=t + 1)
            for t, ch in enumerate(compositions[i])
        )
        households.append(HouseholdSpec(
            children=children,
            q_T=float(sizes[i] * qbar[i]),
            q_max=cfg.q_max,
            parent_educ=str(strata[i]),
            household_id=f"h{chunk * CHUNK_SIZE + i:07d}",
        ))
    return households


def generate_population(
    cfg: PopulationConfig,
    threads: int = 1,
    ) -> list[HouseholdSpec]:
    """
    Synthetic households without abilities. Each block of CHUNK_SIZE
    households owns one derived random stream, so the output depends on the
    seed only.
    """
    n_chunks = -(-cfg.n_households // CHUNK_SIZE)
    sizes = [min(CHUNK_SIZE, cfg.n_households - c * CHUNK_SIZE) for c in range(n_chunks)]

    if threads <= 1 or n_chunks == 1:
        chunks = [_generate_chunk(cfg, c, size) for c, size in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            chunks = list(executor.map(lambda args: _generate_chunk(cfg, *args), enumerate(sizes)))

    households = [hh for chunk in chunks for hh in chunk]
    logger.info("generated %d households (seed=%d)", len(households), cfg.seed)
    return households


def _parse_bool(series: pd.Series) -> pd.Series:
    mapping = {"1": True, "0": False, "true": True, "false": False}
    return series.astype(str).str.strip().str.lower().map(mapping)


def load_population(
    path: str | Path,
    q_max: float = MODEL_DEFAULTS["Q_MAX"],
    ) -> list[HouseholdRecord]:
    """
    Read and validate a household CSV. Problems are reported together with
    their file line numbers (the header is line 1).
    """
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"cannot read '{path}': {e}") from e

    missing = [c for c in HOUSEHOLD_COLUMNS if c not in df.columns]
    if missing:
        raise DataError(f"missing column(s) {missing} in '{path}'")
    if df.empty:
        raise DataError(f"no rows in '{path}'")

    lines = df.index.to_numpy() + 2
    problems: list[tuple[int, str]] = []

    female = _parse_bool(df["female"])
    child_id = pd.to_numeric(df["child_id"], errors="coerce")
    birth_order = pd.to_numeric(df["birth_order"], errors="coerce")
    educ = pd.to_numeric(df["educ_years"], errors="coerce")
    n_c = pd.to_numeric(df["n_c"], errors="coerce")
    household_id = df["household_id"].str.strip()
    parent_educ = df["parent_educ"].str.strip()

    checks = [
        (household_id == "", "empty household_id"),
        (female.isna(), "female must be 0/1"),
        (child_id.isna(), "child_id must be an integer"),
        (birth_order.isna() | (birth_order < 1) | (birth_order % 1 != 0),
         "birth_order must be a positive integer"),
        (educ.isna(), "educ_years must be numeric"),
        (educ.notna() & ((educ < 0) | (educ > q_max)), f"educ_years outside [0, {q_max}]"),
        (n_c.isna() | ~n_c.isin([2, 3]), "n_c must be 2 or 3"),
        (birth_order.notna() & n_c.notna() & (birth_order > n_c), "birth_order exceeds n_c"),
        (~parent_educ.isin(PARENT_EDUC_STRATA), f"parent_educ not in {list(PARENT_EDUC_STRATA)}"),
    ]
    for bad, message in checks:
        problems.extend((int(line), message) for line in lines[bad.to_numpy()])

    duplicated = pd.DataFrame({"h": household_id, "b": birth_order}).duplicated(keep=False)
    for line, hid in zip(lines[duplicated.to_numpy()], household_id[duplicated]):
        problems.append((int(line), f"duplicate birth_order in household '{hid}'"))

    if problems:
        raise DataError(f"invalid household data in '{path}'", sorted(problems))

    frame = pd.DataFrame({
        "household_id": household_id,
        "child_id": child_id.astype(int),
        "female": female.astype(bool),
        "birth_order": birth_order.astype(int),
        "educ_years": educ.astype(float),
        "n_c": n_c.astype(int),
        "parent_educ": parent_educ,
    })

    counts = frame.groupby("household_id", sort=False).agg(
        rows=("n_c", "size"), n_c=("n_c", "first"),
        n_c_unique=("n_c", "nunique"), strata=("parent_educ", "nunique"))
    inconsistent = counts[(counts["rows"] != counts["n_c"]) | (counts["n_c_unique"] > 1)
                          | (counts["strata"] > 1)]
    if not inconsistent.empty:
        problems = [
            (int(lines[frame.index[frame["household_id"] == hid][0]]),
             f"household '{hid}' rows disagree with n_c or parent_educ")
            for hid in inconsistent.index
        ]
        raise DataError(f"inconsistent households in '{path}'", problems)

    records = frame_to_records(frame)
    logger.info("loaded %d households (%d children) from %s", len(records), len(frame), path)
    return records


def frame_to_records(frame: pd.DataFrame) -> list[HouseholdRecord]:
    records = []
    ordered = frame.sort_values(["household_id", "birth_order"], kind="stable")
    for hid, group in ordered.groupby("household_id", sort=False):
        children = tuple(
            ChildRecord(
                household_id=str(hid),
                child_id=int(row.child_id),
                female=bool(row.female),
                birth_order=int(row.birth_order),
                educ_years=float(row.educ_years),
                n_c=int(row.n_c),
                parent_educ=str(row.parent_educ),
            )
            for row in group.itertuples(index=False)
        )
        records.append(HouseholdRecord(str(hid), children[0].parent_educ, children))
    return records


def as_frame(pop: pd.DataFrame | Sequence[HouseholdRecord]) -> pd.DataFrame:
    """
    Child-level frame with the household columns plus `q_T`, `composition`
    and `n_educated`. Accepts records or an existing frame.
    """
    if isinstance(pop, pd.DataFrame):
        df = pop
    else:
        df = pd.DataFrame(
            [{f.name: getattr(c, f.name) for f in fields(ChildRecord)}
             for hh in pop for c in hh.children],
            columns=HOUSEHOLD_COLUMNS,
        )
    if {"q_T", "composition", "n_educated"} <= set(df.columns):
        return df

    df = df.sort_values(["household_id", "birth_order"], kind="stable", ignore_index=True)
    grouped = df.groupby("household_id", sort=False)
    letters = np.where(df["female"].astype(bool), "d", "s")
    return df.assign(
        q_T=grouped["educ_years"].transform("sum"),
        n_educated=(df["educ_years"] > 0).groupby(df["household_id"], sort=False).transform("sum"),
        composition=pd.Series(letters, index=df.index).groupby(df["household_id"], sort=False)
        .transform(lambda s: "".join(s)),
    )


def write_population(
    pop: pd.DataFrame | Sequence[HouseholdRecord],
    path: str | Path,
    ) -> None:
    df = as_frame(pop).copy()
    df["female"] = df["female"].astype(int)
    df[HOUSEHOLD_COLUMNS].to_csv(path, index=False)


def records_to_households(
    records: Sequence[HouseholdRecord],
    q_max: float = MODEL_DEFAULTS["Q_MAX"],
    ) -> list[HouseholdSpec]:
    """HouseholdSpecs for the modelled households; q_T = 0 households are dropped."""
    kept = [r.to_spec(q_max) for r in records if r.q_T > 0]
    dropped = len(records) - len(kept)
    if dropped:
        logger.info("excluded %d households with q_T = 0", dropped)
    return kept


def frame_to_households(
    pop: pd.DataFrame,
    q_max: float = MODEL_DEFAULTS["Q_MAX"],
    ) -> list[HouseholdSpec]:
    return records_to_households(frame_to_records(pop), q_max)


def load_scores(path: str | Path) -> np.ndarray:
    try:
        df = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"cannot read '{path}': {e}") from e
    column = ABILITY_COLUMNS[0]
    if column not in df.columns:
        raise DataError(f"missing column '{column}' in '{path}'")
    scores = pd.to_numeric(df[column], errors="coerce")
    bad = scores.isna() | (scores <= 0) | (scores >= 1)
    if bad.any():
        problems = [(int(i) + 2, f"{column} must lie in (0, 1)") for i in df.index[bad]]
        raise DataError(f"invalid scores in '{path}'", problems)
    return scores.to_numpy(dtype=float)


def _beta_loglik(b1: float, b2: float, mean_log: float, mean_log1m: float, n: int) -> float:
    return n * ((b1 - 1.0) * mean_log + (b2 - 1.0) * mean_log1m - special.betaln(b1, b2))


def fit_beta_mle(
    samples: Sequence[float],
    max_iter: int = ABILITY_DEFAULTS["MLE_MAX_ITER"],
    tol: float = ABILITY_DEFAULTS["MLE_TOL"],
    ) -> AbilityDist:
    """
    Maximum-likelihood Beta shapes. Newton iterations on the digamma score
    equations, started at the method-of-moments solution, with step halving
    so the log-likelihood never decreases and the shapes stay positive.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < ABILITY_DEFAULTS["MLE_MIN_SAMPLES"]:
        raise ConfigError(
            f"need at least {ABILITY_DEFAULTS['MLE_MIN_SAMPLES']} samples, got {x.size}",
            field="samples")
    if (x <= 0).any() or (x >= 1).any():
        raise ConfigError(
            "samples must lie strictly inside (0, 1); clip them to [eps, 1 - eps] first",
            field="samples")

    n = x.size
    mean_log, mean_log1m = np.log(x).mean(), np.log1p(-x).mean()

    m, v = x.mean(), x.var()
    common = m * (1.0 - m) / v - 1.0 if v > 0 else 0.0
    b = np.array([m * common, (1.0 - m) * common]) if common > 0 else np.ones(2)
    loglik = _beta_loglik(*b, mean_log, mean_log1m, n)
    logger.debug("beta MLE start %s loglik=%.6f", b, loglik)

    for iteration in range(1, max_iter + 1):
        total = b.sum()
        grad = np.array([
            mean_log - special.digamma(b[0]) + special.digamma(total),
            mean_log1m - special.digamma(b[1]) + special.digamma(total),
        ])
        shared = special.polygamma(1, total)
        hess = np.array([
            [shared - special.polygamma(1, b[0]), shared],
            [shared, shared - special.polygamma(1, b[1])],
        ])
        step = -np.linalg.solve(hess, grad)

        scale = 1.0
        while True:
            candidate = b + scale * step
            if (candidate > 0).all():
                new_loglik = _beta_loglik(*candidate, mean_log, mean_log1m, n)
                if new_loglik >= loglik - 1e-12 * abs(loglik):
                    break
            scale *= 0.5
            if scale < 1e-12:
                raise ConvergenceError(
                    f"Beta MLE line search stalled at iteration {iteration} "
                    f"(iterate {b.tolist()}, gradient {grad.tolist()})",
                    best=AbilityDist(float(b[0]), float(b[1])))

        converged = np.all(np.abs(candidate - b) <= tol * (1.0 + np.abs(b)))
        b, loglik = candidate, new_loglik
        if converged:
            logger.debug("beta MLE converged after %d iterations: %s", iteration, b)
            return AbilityDist(float(b[0]), float(b[1]))

    raise ConvergenceError(
        f"Beta MLE did not converge in {max_iter} iterations (last iterate {b.tolist()})",
        best=AbilityDist(float(b[0]), float(b[1])))
