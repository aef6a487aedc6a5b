"""
Descriptive inequality statistics and the moment vector matched by the
estimator. Every function takes a population as a child-level frame (or a
list of HouseholdRecord) so real and simulated data go through the same code.
"""
from __future__ import annotations

import logging
import numpy as np
import pandas as pd
from dataclasses import dataclass, field
from typing import Mapping, Sequence
from household_schooling.population import HouseholdRecord, as_frame
from household_schooling.errors import ConfigError, EmptyCellError

logger = logging.getLogger(__name__)

SHARE_MOMENTS = ("m2", "m3", "m4", "m_all_educated")
QBAR_BANDS = ((-np.inf, 10.0, "<10"), (10.0, 13.0, "10-13"), (13.0, np.inf, ">=13"))

Population = pd.DataFrame | Sequence[HouseholdRecord]


def stratum_label(parent_educ: str | None, n_c: int | None) -> str:
    return f"{parent_educ or 'all'}:{n_c or 'all'}"


@dataclass(frozen=True)
class MomentVector:
    """
    m1: daughters' years in only-daughter households minus in mixed ones.
    m2-m4: shares educated among households leaving someone out (same-gender
    firstborns, daughters of firstborn-daughter mixed households, daughters of
    firstborn-son mixed households); None when that cell is empty.
    m_birth: adjacent birth-order differences per same-gender group.
    """
    m1: float
    m2: float | None
    m3: float | None
    m4: float | None
    m_birth: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    m_all_educated: float | None = None
    stratum: str = "all:all"
    n_households: int = 0

    def as_series(self) -> pd.Series:
        """Present components keyed by label, in a fixed order."""
        values = {"m1": self.m1}
        for group in ("daughters", "sons"):
            for t, diff in enumerate(self.m_birth.get(group, ()), start=1):
                values[f"m_birth_{group}_{t}"] = diff
        for name in SHARE_MOMENTS:
            value = getattr(self, name)
            if value is not None:
                values[name] = value
        return pd.Series(values, dtype=float)

    @property
    def labels(self) -> list[str]:
        return list(self.as_series().index)

    def as_array(self) -> np.ndarray:
        return self.as_series().to_numpy()

    def to_dict(self) -> dict:
        return {
            "m1": self.m1, "m2": self.m2, "m3": self.m3, "m4": self.m4,
            "m_birth": {k: list(v) for k, v in self.m_birth.items()},
            "m_all_educated": self.m_all_educated,
            "stratum": self.stratum,
            "n_households": self.n_households,
        }


@dataclass(frozen=True)
class InequalityStats:
    within_var_mean: float
    between_var: float
    total_var: float
    within_share: float
    mean_range: float
    mean_sd: float
    n_households: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def select_stratum(
    pop: Population,
    parent_educ: str | None = None,
    n_c: int | None = None,
    drop_empty: bool = True,
    ) -> pd.DataFrame:
    """Children of one (parent_educ, N_c) cell; households with q_T = 0 dropped."""
    df = as_frame(pop)
    keep = np.ones(len(df), dtype=bool)
    if parent_educ is not None:
        keep &= (df["parent_educ"] == parent_educ).to_numpy()
    if n_c is not None:
        keep &= (df["n_c"] == n_c).to_numpy()
    if drop_empty:
        empty = (df["q_T"] <= 0).to_numpy()
        if (keep & empty).any():
            logger.debug("ignoring %d children in q_T = 0 households", int((keep & empty).sum()))
        keep &= ~empty
    return df[keep]


def variance_decomposition(pop: Population) -> InequalityStats:
    """
    Var(q) = Var_h E[q|h] + E_h Var(q|h), child-weighted and with the
    population (divide-by-n) convention, so the identity is exact.
    """
    df = as_frame(pop)
    sizes = df.groupby("household_id", sort=False)["educ_years"].size()
    if len(sizes) < 2:
        raise ConfigError("need at least two households", field="pop")
    if (sizes < 2).any():
        raise ConfigError(
            f"{int((sizes < 2).sum())} household(s) with a single child", field="pop")

    q = df["educ_years"].to_numpy(dtype=float)
    grouped = df.groupby("household_id", sort=False)["educ_years"]
    household_mean = grouped.transform("mean").to_numpy()
    within = float(np.mean((q - household_mean) ** 2))
    between = float(np.mean((household_mean - q.mean()) ** 2))
    total = float(np.mean((q - q.mean()) ** 2))

    per_household = inequality_stats(df)
    return InequalityStats(
        within_var_mean=within,
        between_var=between,
        total_var=total,
        within_share=within / total if total > 0 else 0.0,
        mean_range=float(per_household["range"].mean()),
        mean_sd=float(per_household["sd"].mean()),
        n_households=len(sizes),
    )


def inequality_stats(pop: Population) -> pd.DataFrame:
    """Per-household range, population sd, q_T and q̄ = q_T / N_c."""
    df = as_frame(pop)
    grouped = df.groupby("household_id", sort=False)
    out = grouped.agg(
        composition=("composition", "first"),
        n_c=("n_c", "first"),
        q_T=("q_T", "first"),
        q_max=("educ_years", "max"),
        q_min=("educ_years", "min"),
    )
    out["sd"] = grouped["educ_years"].std(ddof=0)
    out["range"] = out.pop("q_max") - out.pop("q_min")
    out["qbar"] = out["q_T"] / out["n_c"]
    return out


def _mean_or_none(values: pd.Series) -> float | None:
    return float(values.mean()) if len(values) else None


def compute_moment_vector(
    pop: Population,
    parent_educ: str | None = None,
    n_c: int | None = None,
    ) -> MomentVector:
    df = select_stratum(pop, parent_educ, n_c)
    stratum = stratum_label(parent_educ, n_c)

    comp = df["composition"]
    only_daughters = ~comp.str.contains("s")
    only_sons = ~comp.str.contains("d")
    mixed = ~only_daughters & ~only_sons
    female = df["female"].astype(bool)

    missing = [name for name, cell in (("only daughters", only_daughters), ("mixed", mixed))
               if not cell.any()]
    if missing:
        raise EmptyCellError(missing, context=f"stratum {stratum}")

    years = df["educ_years"]
    m1 = float(years[only_daughters & female].mean() - years[mixed & female].mean())

    m_birth = {}
    for group, cell in (("daughters", only_daughters), ("sons", only_sons)):
        if not cell.any():
            logger.info("no %s-only households in stratum %s; m_birth left empty", group[:-1], stratum)
            m_birth[group] = ()
            continue
        sub = df[cell]
        by_order = sub.pivot(index="household_id", columns="birth_order", values="educ_years")
        orders = sorted(by_order.columns)
        diffs = []
        for earlier, later in zip(orders, orders[1:]):
            both = by_order[[earlier, later]].dropna()
            diffs.append(float((both[later] - both[earlier]).mean()))
        m_birth[group] = tuple(diffs)

    partial = df["n_educated"] < df["n_c"]
    educated = df["educ_years"] > 0
    firstborn = df["birth_order"] == 1
    first_letter = comp.str[0]

    m2 = _mean_or_none(educated[partial & ~mixed & firstborn])
    m3 = _mean_or_none(educated[partial & mixed & female & (first_letter == "d")])
    m4 = _mean_or_none(educated[partial & mixed & female & (first_letter == "s")])

    households = df.drop_duplicates("household_id")
    m_all = float((households["n_educated"] == households["n_c"]).mean())

    return MomentVector(
        m1=m1, m2=m2, m3=m3, m4=m4,
        m_birth=m_birth,
        m_all_educated=m_all,
        stratum=stratum,
        n_households=len(households),
    )


def extensive_share_cells(
    pop: Population,
    parent_educ: str | None = None,
    n_c: int | None = None,
    ) -> pd.DataFrame:
    """
    Household counts of households leaving someone out, by composition and
    educated pattern ('1'/'0' per child in birth order, e.g. '101').
    """
    df = select_stratum(pop, parent_educ, n_c)
    df = df[df["n_educated"] < df["n_c"]]
    if df.empty:
        return pd.DataFrame(columns=["composition", "pattern", "households"])
    flags = np.where(df["educ_years"] > 0, "1", "0")
    patterns = pd.Series(flags, index=df.index).groupby(df["household_id"], sort=False).agg("".join)
    compositions = df.groupby("household_id", sort=False)["composition"].first()
    cells = pd.DataFrame({"composition": compositions, "pattern": patterns})
    return (cells.groupby(["composition", "pattern"]).size()
            .rename("households").reset_index())


def _qbar_band(qbar: pd.Series) -> pd.Series:
    labels = pd.Series("", index=qbar.index, dtype=object)
    for lo, hi, name in QBAR_BANDS:
        labels[(qbar >= lo) & (qbar < hi)] = name
    return labels


def _fit_rows(pop: Population) -> dict[tuple[str, str, str], float]:
    df = as_frame(pop)
    per_household = inequality_stats(df)
    per_household["band"] = _qbar_band(per_household["qbar"])
    rows = {}
    for table, key in (("composition", "composition"), ("qbar_band", "band")):
        summary = per_household.groupby(key)[["range", "sd"]].mean()
        for group, values in summary.iterrows():
            rows[(table, str(group), "mean_range")] = float(values["range"])
            rows[(table, str(group), "mean_sd")] = float(values["sd"])
    for order, name in ((1, "firstborn"), (2, "second_born")):
        years = df.loc[df["birth_order"] == order, "educ_years"]
        rows[("birth_order", name, "sd_years")] = float(np.std(years, ddof=0))
    return rows


def fit_report(
    data: Population,
    simulated: Population,
    ) -> pd.DataFrame:
    """Non-targeted statistics side by side: within-household range and sd."""
    data_rows, model_rows = _fit_rows(data), _fit_rows(simulated)
    keys = sorted(set(data_rows) | set(model_rows))
    return pd.DataFrame(
        [(*key, data_rows.get(key, np.nan), model_rows.get(key, np.nan)) for key in keys],
        columns=["table", "group", "statistic", "data", "model"],
    )


def moments_payload(
    pop: Population,
    parent_educ: str | None = None,
    n_c: int | None = None,
    ) -> dict:
    """JSON-ready moments and inequality statistics keyed by stratum."""
    df = select_stratum(pop, parent_educ, drop_empty=False)
    sizes = [n_c] if n_c is not None else sorted(int(n) for n in df["n_c"].unique())
    payload = {}
    for size in sizes:
        mv = compute_moment_vector(df, parent_educ, size)
        stats = variance_decomposition(select_stratum(df, None, size, drop_empty=False))
        payload[mv.stratum] = {"moments": mv.to_dict(), "inequality": stats.to_dict()}
    return payload
