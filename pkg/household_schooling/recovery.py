"""
Recover each two-child household's ability pair from its observed split of
the budget, and compare the recovered abilities across gender and birth order.
"""
from __future__ import annotations

import logging
import numpy as np
import pandas as pd
from scipy import stats
from pathlib import Path
from dataclasses import dataclass
from typing import Sequence
from household_schooling.config import MODEL_DEFAULTS, RECOVERY_COLUMNS
from household_schooling.population import HouseholdRecord, as_frame
from household_schooling.model_core.types import EmpiricalAbilityDist, HouseholdSpec, Theta
from household_schooling.model_core.solver import cost_vector, delta_vector, solve_batch
from household_schooling.errors import ConfigError, DataError, IdentificationError

logger = logging.getLogger(__name__)

BUDGET_TOL = 1e-6
MIN_RECOVERED = 30


@dataclass(frozen=True)
class RecoveredAbility:
    household_id: str
    a_hat: tuple[float, float]
    residual: float


def _marginal_slopes(q1, q2, females, theta):
    deltas = delta_vector(females, theta)
    g1 = deltas[:, 0] * np.power(q1, deltas[:, 0] - 1.0)
    g2 = deltas[:, 1] * np.power(q2, deltas[:, 1] - 1.0)
    return g1, g2


def first_ability(
    q1: np.ndarray,
    q2: np.ndarray,
    females: np.ndarray,
    theta: Theta,
    ) -> np.ndarray:
    """
    Firstborn ability that makes (q1, q2) satisfy the interior first-order
    condition a1 g1 - alpha1 = (1 - a1) g2 - alpha2, g_i = delta_i q_i^(delta_i - 1).
    The condition is linear in a1.
    """
    q1, q2 = np.asarray(q1, dtype=float), np.asarray(q2, dtype=float)
    g1, g2 = _marginal_slopes(q1, q2, np.atleast_2d(females), theta)
    alpha = cost_vector(2, theta)
    return (g2 + alpha[0] - alpha[1]) / (g1 + g2)


def _round_trip(a1, females, q_T, theta, q_max):
    abilities = np.column_stack([a1, 1.0 - a1])
    q = solve_batch(
        abilities,
        delta_vector(females, theta),
        cost_vector(2, theta)[None, :],
        np.ones_like(abilities, dtype=bool),
        q_T,
        q_max,
    )
    return q[:, 0]


def recover_ability_pair(
    q1: float,
    q2: float,
    q_T: float,
    hh: HouseholdSpec,
    theta: Theta,
    ) -> RecoveredAbility:
    if hh.n_c != 2:
        raise ConfigError(f"recovery needs two children, got {hh.n_c}", field="n_c")
    q_max = hh.q_max
    if q1 < 0 or q2 < 0 or max(q1, q2) > q_max + BUDGET_TOL:
        raise ConfigError(f"years ({q1}, {q2}) outside [0, {q_max}]", field="q")
    if abs(q1 + q2 - min(q_T, 2.0 * q_max)) > BUDGET_TOL:
        raise ConfigError(f"q1 + q2 = {q1 + q2} is not on the budget line of q_T = {q_T}", field="q_T")

    females = hh.females[None, :]
    if q1 <= 0 or q2 <= 0:
        raise IdentificationError("a child with zero years is an extensive-margin corner", (0.0, 1.0))
    if q1 >= q_max - BUDGET_TOL:
        low = float(first_ability(q_max, q_T - q_max, females, theta)[0])
        raise IdentificationError("firstborn at the cap; only a lower bound is identified",
                                  (max(low, 0.0), 1.0))
    if q2 >= q_max - BUDGET_TOL:
        high = float(first_ability(q_T - q_max, q_max, females, theta)[0])
        raise IdentificationError("second-born at the cap; only an upper bound is identified",
                                  (0.0, min(high, 1.0)))

    a1 = float(first_ability(q1, q2, females, theta)[0])
    if not 0.0 < a1 < 1.0:
        raise IdentificationError(f"no ability in (0, 1) rationalises ({q1}, {q2})",
                                  (min(max(a1, 0.0), 1.0),) * 2)
    q1_hat = _round_trip(np.array([a1]), females, np.array([q_T]), theta, q_max)[0]
    return RecoveredAbility(hh.household_id, (a1, 1.0 - a1), float(abs(q1_hat - q1)))


def recover_population(
    pop: pd.DataFrame | Sequence[HouseholdRecord],
    theta: Theta,
    q_max: float = MODEL_DEFAULTS["Q_MAX"],
    ) -> pd.DataFrame:
    """
    Recovered abilities for every two-child household educating both children,
    in the export layout. Corner households get a flag and no point estimate.
    """
    df = as_frame(pop)
    df = df[(df["n_c"] == 2) & (df["n_educated"] == 2)]
    if df.empty:
        return pd.DataFrame(columns=RECOVERY_COLUMNS)

    wide = df.pivot(index="household_id", columns="birth_order", values="educ_years")
    female = df.pivot(index="household_id", columns="birth_order", values="female").astype(bool)
    q1, q2 = wide[1].to_numpy(), wide[2].to_numpy()
    q_T = q1 + q2
    females = female[[1, 2]].to_numpy()

    corner = (q1 >= q_max - BUDGET_TOL) | (q2 >= q_max - BUDGET_TOL)
    a1 = np.full(q1.size, np.nan)
    interior = ~corner
    a1[interior] = first_ability(q1[interior], q2[interior], females[interior], theta)
    outside = interior & ~((a1 > 0) & (a1 < 1))
    if outside.any():
        logger.warning("%d household(s) have no interior ability; flagged as corners", int(outside.sum()))
    corner |= outside
    a1[corner] = np.nan

    residual = np.full(q1.size, np.nan)
    ok = ~corner
    if ok.any():
        residual[ok] = np.abs(_round_trip(a1[ok], females[ok], q_T[ok], theta, q_max) - q1[ok])

    logger.info("recovered %d households, %d corners", int(ok.sum()), int(corner.sum()))
    return pd.DataFrame({
        "household_id": wide.index.to_numpy(),
        "a1_hat": a1,
        "a2_hat": 1.0 - a1,
        "residual": residual,
        "corner_flag": corner,
        "female1": females[:, 0],
        "female2": females[:, 1],
    })


@dataclass(frozen=True)
class AbilityDiagnostics:
    """Two-sample KS comparisons of recovered abilities."""
    gender_ks: float
    gender_pvalue: float
    birth_order_ks: float
    birth_order_pvalue: float
    samples: dict[str, np.ndarray]

    def to_dict(self) -> dict:
        return {
            "gender": {"ks": self.gender_ks, "pvalue": self.gender_pvalue},
            "birth_order": {"ks": self.birth_order_ks, "pvalue": self.birth_order_pvalue},
            "n": {k: int(v.size) for k, v in self.samples.items()},
            "samples": {k: np.sort(v) for k, v in self.samples.items()},
        }


def ability_diagnostics(
    pop: pd.DataFrame | Sequence[HouseholdRecord],
    theta: Theta,
    q_max: float = MODEL_DEFAULTS["Q_MAX"],
    recovered: pd.DataFrame | None = None,
    ) -> AbilityDiagnostics:
    """
    Distributions of recovered abilities by gender (daughters vs sons) and by
    birth order (firstborn vs second-born). Under the model they coincide.
    """
    if recovered is None:
        recovered = recover_population(pop, theta, q_max)
    ok = recovered[~recovered["corner_flag"].astype(bool)]
    if len(ok) < MIN_RECOVERED:
        raise DataError(f"need at least {MIN_RECOVERED} recoverable households, got {len(ok)}")

    abilities = np.concatenate([ok["a1_hat"].to_numpy(), ok["a2_hat"].to_numpy()])
    female = np.concatenate([ok["female1"].to_numpy(), ok["female2"].to_numpy()]).astype(bool)
    samples = {
        "daughters": abilities[female],
        "sons": abilities[~female],
        "firstborn": ok["a1_hat"].to_numpy(),
        "second_born": ok["a2_hat"].to_numpy(),
    }
    if samples["daughters"].size == 0 or samples["sons"].size == 0:
        raise DataError("recovered households contain a single gender")
    gender = stats.ks_2samp(samples["daughters"], samples["sons"])
    birth = stats.ks_2samp(samples["firstborn"], samples["second_born"])
    return AbilityDiagnostics(
        gender_ks=float(gender.statistic),
        gender_pvalue=float(gender.pvalue),
        birth_order_ks=float(birth.statistic),
        birth_order_pvalue=float(birth.pvalue),
        samples=samples,
    )


def write_recovered(recovered: pd.DataFrame, path: str | Path) -> None:
    out = recovered[RECOVERY_COLUMNS].copy()
    out["corner_flag"] = out["corner_flag"].astype(int)
    out.to_csv(path, index=False)


def load_recovered_dist(path: str | Path) -> EmpiricalAbilityDist:
    """Empirical firstborn-ability law from a recovery export."""
    try:
        df = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"cannot read '{path}': {e}") from e
    if "a1_hat" not in df.columns:
        raise DataError(f"missing column 'a1_hat' in '{path}'")
    values = pd.to_numeric(df["a1_hat"], errors="coerce").dropna().to_numpy()
    return EmpiricalAbilityDist(values)
