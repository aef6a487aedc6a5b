"""
Moment covariance by household bootstrap and the delta-method parameter
covariance Omega = (J' V^-1 J)^-1.
"""
from __future__ import annotations

import logging
import numpy as np
import pandas as pd
from typing import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor, as_completed
from household_schooling.config import ESTIMATION_DEFAULTS
from household_schooling.helpers import derive_rng
from household_schooling.moments import Population, compute_moment_vector, select_stratum
from household_schooling.errors import ConfigError, ConvergenceError, EmptyCellError

logger = logging.getLogger(__name__)

SINGULAR_COND = 1e12


def _resample(df: pd.DataFrame, rows_by_household: list[np.ndarray], rng: np.random.Generator) -> pd.DataFrame:
    picks = rng.integers(0, len(rows_by_household), size=len(rows_by_household))
    rows = np.concatenate([rows_by_household[p] for p in picks])
    sample = df.iloc[rows].copy()
    # duplicated households must stay distinct
    sample["household_id"] = np.repeat(np.arange(picks.size), [rows_by_household[p].size for p in picks])
    return sample


def _replicate(df, rows_by_household, labels, seed, b, max_retries):
    rng = derive_rng(seed, "bootstrap", b)
    missing: list[str] = []
    for _ in range(max_retries + 1):
        try:
            series = compute_moment_vector(_resample(df, rows_by_household, rng)).as_series()
        except EmptyCellError as e:
            missing = e.cells
            continue
        missing = [label for label in labels if label not in series.index]
        if not missing:
            return b, series[labels].to_numpy()
    raise EmptyCellError(missing, context=f"bootstrap replication {b} after {max_retries} redraws")


def bootstrap_moment_cov(
    data: Population,
    B: int = ESTIMATION_DEFAULTS["BOOTSTRAP_REPS"],
    seed: int = ESTIMATION_DEFAULTS["SEED"],
    labels: Sequence[str] | None = None,
    parent_educ: str | None = None,
    n_c: int | None = None,
    threads: int = 1,
    max_retries: int = ESTIMATION_DEFAULTS["BOOTSTRAP_MAX_RETRIES"],
    status: dict | None = None,
    ) -> pd.DataFrame:
    """
    Covariance of the moment vector over B household resamples. A resample
    that loses a composition cell is redrawn from the same stream.
    """
    if B < 2:
        raise ConfigError(f"need at least 2 replications, got {B}", field="bootstrap_reps")
    df = select_stratum(data, parent_educ, n_c).reset_index(drop=True)
    if labels is None:
        labels = compute_moment_vector(df).labels
    labels = list(labels)
    codes = pd.factorize(df["household_id"])[0]
    rows_by_household = [np.flatnonzero(codes == h) for h in range(codes.max() + 1)]

    stack = np.empty((B, len(labels)))
    if threads <= 1:
        for b in range(B):
            _, stack[b] = _replicate(df, rows_by_household, labels, seed, b, max_retries)
            if status is not None:
                status['message'] = f"Bootstrap ({b + 1}/{B})"
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            futures = [
                executor.submit(_replicate, df, rows_by_household, labels, seed, b, max_retries)
                for b in range(B)
            ]
            done = 0
            for future in as_completed(futures):
                b, values = future.result()
                stack[b] = values
                done += 1
                if status is not None:
                    status['message'] = f"Bootstrap ({done}/{B})"

    V = np.atleast_2d(np.cov(stack, rowvar=False))
    V = 0.5 * (V + V.T)
    logger.debug("bootstrap covariance over %d replications, %d moments", B, len(labels))
    return pd.DataFrame(V, index=labels, columns=labels)


def numerical_jacobian(
    moment_fn: Callable[[np.ndarray], np.ndarray],
    x: Sequence[float],
    steps: Sequence[float],
    ) -> np.ndarray:
    """Forward differences (m(x + h e_j) - m(x)) / h, one column per parameter."""
    x = np.asarray(x, dtype=float)
    base = np.asarray(moment_fn(x), dtype=float)
    columns = []
    for j, h in enumerate(steps):
        if h <= 0:
            raise ConfigError(f"step must be positive, got {h}", field="fd_step")
        shifted = x.copy()
        shifted[j] += h
        columns.append((np.asarray(moment_fn(shifted), dtype=float) - base) / h)
    return np.column_stack(columns)


def delta_method(
    jacobian: np.ndarray,
    V: np.ndarray,
    ) -> tuple[np.ndarray, list[str]]:
    """
    Omega = (J' V^-1 J)^-1. Moments with zero bootstrap variance and no
    sensitivity carry no information and are dropped; a singular remainder
    falls back to the pseudo-inverse with a warning.
    """
    J = np.atleast_2d(np.asarray(jacobian, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    notes = []

    keep = (np.diag(V) > 0) | (np.abs(J).sum(axis=1) > 0)
    J, V = J[keep], V[np.ix_(keep, keep)]

    if np.linalg.cond(V) > SINGULAR_COND:
        message = "moment covariance is singular; using its pseudo-inverse"
        logger.warning(message)
        notes.append(message)
        V_inv = np.linalg.pinv(V)
    else:
        V_inv = np.linalg.inv(V)

    A = J.T @ V_inv @ J
    if np.linalg.matrix_rank(A) < A.shape[0]:
        raise ConvergenceError(
            "J' V^-1 J is singular: the moments do not move with the parameters; "
            "increase the number of simulated households H * s")
    omega = np.linalg.inv(A)
    return 0.5 * (omega + omega.T), notes
