"""
Reduced-form regressions: OLS, household fixed effects, the daughter-son
difference regression and the split of within-household inequality into
gender, birth-order and ability parts.
"""
from __future__ import annotations

import logging
import numpy as np
import pandas as pd
import statsmodels.api as sm
from dataclasses import dataclass
from typing import Sequence
from household_schooling.helpers import safe_divide
from household_schooling.population import HouseholdRecord, as_frame
from household_schooling.errors import ConfigError, EmptyCellError, RankError

logger = logging.getLogger(__name__)

MARGINS = ("all", "intensive", "extensive")
WITHIN_TOL = 1e-12


@dataclass(frozen=True)
class RegressionResult:
    coefficients: pd.Series
    std_errors: pd.Series
    residuals: np.ndarray
    r_squared: float
    n_obs: int
    n_groups: int | None = None

    def to_dict(self) -> dict:
        return {
            "coefficients": self.coefficients.to_dict(),
            "std_errors": self.std_errors.to_dict(),
            "r_squared": self.r_squared,
            "n_obs": self.n_obs,
            "n_groups": self.n_groups,
        }


def _check_rank(X: pd.DataFrame) -> None:
    values = X.to_numpy(dtype=float)
    if np.linalg.matrix_rank(values) == values.shape[1]:
        return
    # name the first column that adds nothing to the ones before it
    for k in range(1, values.shape[1] + 1):
        if np.linalg.matrix_rank(values[:, :k]) < k:
            raise RankError(str(X.columns[k - 1]))


def ols(
    outcome: Sequence[float] | pd.Series,
    regressors: pd.DataFrame,
    add_constant: bool = True,
    ) -> RegressionResult:
    y = pd.Series(np.asarray(outcome, dtype=float), index=regressors.index, name="outcome")
    X = regressors.astype(float)
    if add_constant:
        X = sm.add_constant(X, has_constant="add")
    _check_rank(X)
    fit = sm.OLS(y, X).fit()
    return RegressionResult(
        coefficients=fit.params,
        std_errors=fit.bse,
        residuals=fit.resid.to_numpy(),
        r_squared=float(fit.rsquared),
        n_obs=int(fit.nobs),
    )


def fe_regression(
    outcome: Sequence[float] | pd.Series,
    regressors: pd.DataFrame,
    group_ids: Sequence | pd.Series,
    ) -> RegressionResult:
    """
    Within estimator: demean outcome and regressors by group, then OLS
    without a constant. Standard errors carry the degrees-of-freedom
    correction for the absorbed group means, so they match the
    dummy-variable regression.
    """
    groups = pd.Series(np.asarray(group_ids), index=regressors.index)
    y = pd.Series(np.asarray(outcome, dtype=float), index=regressors.index)
    X = regressors.astype(float)

    sizes = groups.map(groups.value_counts())
    if not (sizes >= 2).any():
        raise ConfigError("every group has a single observation", field="group_ids")

    y_within = y - y.groupby(groups).transform("mean")
    X_within = X - X.groupby(groups).transform("mean")
    for name in X_within.columns:
        if (X_within[name].abs() <= WITHIN_TOL).all():
            raise RankError(name)
    _check_rank(X_within)

    fit = sm.OLS(y_within, X_within).fit()
    n_obs, k = len(y), X.shape[1]
    n_groups = int(groups.nunique())
    dof = n_obs - k - n_groups
    correction = np.sqrt((n_obs - k) / dof) if dof > 0 else np.inf

    sst = float((y_within ** 2).sum())
    ssr = float((fit.resid ** 2).sum())
    return RegressionResult(
        coefficients=fit.params,
        std_errors=fit.bse * correction,
        residuals=fit.resid.to_numpy(),
        r_squared=1.0 - ssr / sst if sst > 0 else 0.0,
        n_obs=n_obs,
        n_groups=n_groups,
    )


def child_regressors(df: pd.DataFrame) -> pd.DataFrame:
    female = df["female"].astype(float)
    firstborn = (df["birth_order"] == 1).astype(float)
    return pd.DataFrame({
        "female": female,
        "firstborn": firstborn,
        "female_x_firstborn": female * firstborn,
    }, index=df.index)


@dataclass(frozen=True)
class DiffEffects:
    gender_effect: float
    birth_effect: float
    firstborn_daughter_gap: float
    firstborn_son_gap: float
    n_households: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def diff_effects(
    firstborn_daughter_gap: float,
    firstborn_son_gap: float,
    n_households: int = 0,
    ) -> DiffEffects:
    """
    The daughter-son gap is gender plus birth order when the daughter is
    firstborn and gender minus birth order when the son is.
    """
    return DiffEffects(
        gender_effect=(firstborn_daughter_gap + firstborn_son_gap) / 2.0,
        birth_effect=(firstborn_daughter_gap - firstborn_son_gap) / 2.0,
        firstborn_daughter_gap=firstborn_daughter_gap,
        firstborn_son_gap=firstborn_son_gap,
        n_households=n_households,
    )


def diff_regression(pop: pd.DataFrame | Sequence[HouseholdRecord]) -> DiffEffects:
    """Daughter-son gap on a firstborn-daughter dummy over mixed two-child households."""
    df = as_frame(pop)
    df = df[(df["n_c"] == 2) & df["composition"].isin(["ds", "sd"])]
    missing = [comp for comp in ("ds", "sd") if not (df["composition"] == comp).any()]
    if missing:
        raise EmptyCellError(missing, context="difference regression")

    years = df.pivot(index="household_id", columns="female", values="educ_years")
    comp = df.groupby("household_id")["composition"].first()
    gap = years[True] - years[False]
    firstborn_daughter = (comp.loc[gap.index] == "ds").astype(float)

    fit = ols(gap, pd.DataFrame({"firstborn_daughter": firstborn_daughter}))
    son_first = float(fit.coefficients["const"])
    daughter_first = son_first + float(fit.coefficients["firstborn_daughter"])
    return diff_effects(daughter_first, son_first, n_households=len(gap))


@dataclass(frozen=True)
class DecompositionShares:
    gender_share: float
    birth_order_share: float
    ability_share: float
    margin: str
    clamped: bool
    fe: RegressionResult
    n_households: int

    def to_dict(self) -> dict:
        return {
            "gender_share": self.gender_share,
            "birth_order_share": self.birth_order_share,
            "ability_share": self.ability_share,
            "margin": self.margin,
            "clamped": self.clamped,
            "fe": self.fe.to_dict(),
            "n_households": self.n_households,
        }


def margin_subpopulation(
    pop: pd.DataFrame | Sequence[HouseholdRecord],
    margin: str,
    ) -> tuple[pd.DataFrame, pd.Series]:
    """Children of the households on `margin` and the matching outcome."""
    if margin not in MARGINS:
        raise ConfigError(f"must be one of {MARGINS}, got '{margin}'", field="margin")
    df = as_frame(pop)
    df = df[df["q_T"] > 0]
    if margin == "intensive":
        df = df[df["n_educated"] == df["n_c"]]
    elif margin == "extensive":
        df = df[df["n_educated"] < df["n_c"]]
    if df.empty:
        raise ConfigError(f"no households on the {margin} margin", field="margin")
    outcome = (df["educ_years"] > 0).astype(float) if margin == "extensive" else df["educ_years"]
    return df, outcome


def decomposition_shares(
    pop: pd.DataFrame | Sequence[HouseholdRecord],
    margin: str = "all",
    ) -> DecompositionShares:
    """
    Attribute the mean within-household range of the outcome to gender,
    birth order and the rest (ability).

    gender = |b_female + b_interaction * s_fb| * inc_gender, with s_fb the
    share of daughters who are firstborn and inc_gender the share of mixed
    households; birth order = |b_firstborn| (every household has a firstborn
    and a later-born); ability = range - gender - birth order. Negative parts
    are clamped at zero before normalising to 100.
    """
    df, outcome = margin_subpopulation(pop, margin)
    fit = fe_regression(outcome, child_regressors(df), df["household_id"])
    b = fit.coefficients

    female = df["female"].astype(bool)
    firstborn = df["birth_order"] == 1
    s_fb = safe_divide(float((female & firstborn).sum()), float(female.sum()), fallback=0.0)
    per_household = pd.DataFrame({"h": df["household_id"], "y": outcome, "f": female})
    grouped = per_household.groupby("h")
    inc_gender = float((grouped["f"].nunique() > 1).mean())
    avg_range = float((grouped["y"].max() - grouped["y"].min()).mean())

    raw = np.array([
        abs(b["female"] + b["female_x_firstborn"] * s_fb) * inc_gender,
        abs(b["firstborn"]),
        0.0,
    ])
    raw[2] = avg_range - raw[0] - raw[1]
    clamped = bool((raw < 0).any())
    if clamped:
        logger.warning("negative raw share clamped at 0 on the %s margin: %s", margin, raw.tolist())
    raw = np.maximum(raw, 0.0)
    total = raw.sum()
    if total <= 0:
        raise ConfigError(f"no within-household inequality on the {margin} margin", field="margin")

    shares = 100.0 * raw / total
    shares[2] = 100.0 - shares[0] - shares[1]
    return DecompositionShares(
        gender_share=float(shares[0]),
        birth_order_share=float(shares[1]),
        ability_share=float(shares[2]),
        margin=margin,
        clamped=clamped,
        fe=fit,
        n_households=int(fit.n_groups),
    )
