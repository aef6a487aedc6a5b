"""
Intensive margin: how a household splits its budget q_T among the children
it educates.

The kernels are vectorised over households: every array argument carries one
row per household, so a whole simulated population is solved with a fixed
number of numpy passes. The scalar entry points wrap a batch of one.
"""
from __future__ import annotations

import numpy as np
from typing import Sequence
from household_schooling.config import MODEL_DEFAULTS
from household_schooling.errors import SolverError, InfeasibleAllocationError
from household_schooling.model_core.types import Allocation, ChildSpec, HouseholdSpec, Theta

TOL = MODEL_DEFAULTS["BISECTION_TOL"]
MAX_ITER = MODEL_DEFAULTS["BISECTION_MAX_ITER"]


def delta_exponent(
    child: ChildSpec,
    hh: HouseholdSpec,
    theta: Theta,
    ) -> float:
    """gamma minus the daughter penalty, scaled by the share of brothers."""
    if child not in hh.children:
        raise SolverError("child does not belong to the household")
    brothers = sum(1 for c in hh.children if c is not child and not c.female)
    return theta.gamma - theta.theta1 * float(child.female) * brothers / (hh.n_c - 1)


def delta_vector(
    females: np.ndarray,
    theta: Theta,
    ) -> np.ndarray:
    """Row-wise delta_exponent for an (H, N_c) array of daughter flags."""
    females = np.atleast_2d(np.asarray(females, dtype=float))
    n_c = females.shape[1]
    brothers = (1.0 - females).sum(axis=1, keepdims=True) - (1.0 - females)
    return theta.gamma - theta.theta1 * females * brothers / (n_c - 1)


def cost_vector(
    n_c: int,
    theta: Theta,
    cost_cuts: Sequence[float] | np.ndarray | None = None,
    ) -> np.ndarray:
    """
    Per-year cost by birth position: the last-born pays alpha_base and each
    earlier position one alpha_gap more. `cost_cuts` are relative reductions.
    """
    positions = np.arange(1, n_c + 1)
    costs = theta.alpha_base + (n_c - positions) * theta.alpha_gap
    if cost_cuts is not None:
        costs = costs * (1.0 - np.asarray(cost_cuts, dtype=float))
    return costs


def household_utility(
    alloc: Allocation,
    hh: HouseholdSpec,
    theta: Theta,
    draws: np.ndarray | None = None,
    cost_cuts: Sequence[float] | None = None,
    ) -> float:
    """
    Utility of `alloc` for household `hh`. `draws` is the extensive-margin
    realisation (which children are in the active branch); it defaults to the
    allocation's own mask.
    """
    mask = np.asarray(alloc.educated_mask if draws is None else draws, dtype=bool)
    alloc.check(hh)
    q = np.asarray(alloc.q, dtype=float)
    if (q[~mask] > 0).any():
        raise InfeasibleAllocationError("positive years for a child outside the active branch")

    a = hh.abilities
    deltas = delta_vector(hh.females, theta)[0]
    costs = cost_vector(hh.n_c, theta, cost_cuts)
    terms = a * np.power(q, deltas) - costs * q
    return float(terms[mask].sum())


def marginal_utility(a, delta, alpha, q):
    with np.errstate(divide="ignore", invalid="ignore"):
        return a * delta * np.power(q, delta - 1.0) - alpha


def split_pair(
    a1, d1, al1,
    a2, d2, al2,
    total,
    q_max: float,
    tol: float = TOL,
    max_iter: int = MAX_ITER,
    ) -> np.ndarray:
    """
    Years for the first of two educated children; the second gets the rest.

    Bisection on the strictly decreasing first-order condition
    u1'(x) - u2'(total - x) over the cap-feasible interval, with corner checks
    at both ends.
    """
    total = np.minimum(np.asarray(total, dtype=float), 2.0 * q_max)
    lo = np.maximum(total - q_max, 0.0)
    hi = np.minimum(total, q_max)

    def foc(x):
        return marginal_utility(a1, d1, al1, x) - marginal_utility(a2, d2, al2, total - x)

    at_lo = (hi - lo <= 0) | ((lo > 0) & (foc(lo) <= 0))
    at_hi = ~at_lo & (hi < total) & (foc(hi) >= 0)

    left, right = lo.copy(), hi.copy()
    for _ in range(max_iter):
        mid = 0.5 * (left + right)
        go_right = foc(mid) > 0
        left = np.where(go_right, mid, left)
        right = np.where(go_right, right, mid)
        if np.all(right - left <= tol):
            break

    x = 0.5 * (left + right)
    x = np.where(at_lo, lo, x)
    return np.where(at_hi, hi, x)


def split_triple(
    a: np.ndarray,
    d: np.ndarray,
    al: np.ndarray,
    total,
    q_max: float,
    tol: float = TOL,
    max_iter: int = MAX_ITER,
    ) -> np.ndarray:
    """
    Nested solve for three educated children: outer bisection on q1, inner
    pair split of the remainder. The outer derivative uses the inner pair's
    marginal value, which is the smaller of the two marginal utilities.
    """
    total = np.minimum(np.asarray(total, dtype=float), 3.0 * q_max)
    lo = np.maximum(total - 2.0 * q_max, 0.0)
    hi = np.minimum(total, q_max)

    def inner(q1):
        rest = total - q1
        q2 = split_pair(a[:, 1], d[:, 1], al[:, 1], a[:, 2], d[:, 2], al[:, 2],
                        rest, q_max, tol, max_iter)
        return q2, rest - q2

    def outer_foc(q1):
        q2, q3 = inner(q1)
        pair_value = np.minimum(
            marginal_utility(a[:, 1], d[:, 1], al[:, 1], q2),
            marginal_utility(a[:, 2], d[:, 2], al[:, 2], q3),
        )
        return marginal_utility(a[:, 0], d[:, 0], al[:, 0], q1) - pair_value

    at_lo = (hi - lo <= 0) | ((lo > 0) & (outer_foc(lo) <= 0))
    at_hi = ~at_lo & (hi < total) & (outer_foc(hi) >= 0)

    left, right = lo.copy(), hi.copy()
    for _ in range(max_iter):
        mid = 0.5 * (left + right)
        go_right = outer_foc(mid) > 0
        left = np.where(go_right, mid, left)
        right = np.where(go_right, right, mid)
        if np.all(right - left <= tol):
            break

    q1 = 0.5 * (left + right)
    q1 = np.where(at_lo, lo, q1)
    q1 = np.where(at_hi, hi, q1)
    q2, q3 = inner(q1)
    return np.column_stack([q1, q2, q3])


def solve_batch(
    abilities: np.ndarray,
    deltas: np.ndarray,
    costs: np.ndarray,
    mask: np.ndarray,
    q_T: np.ndarray,
    q_max: float,
    ) -> np.ndarray:
    """
    Optimal years for H households of equal size. All matrices are (H, N_c);
    uneducated children get exactly zero.
    """
    abilities = np.asarray(abilities, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    q_T = np.asarray(q_T, dtype=float)
    deltas = np.broadcast_to(deltas, abilities.shape)
    costs = np.broadcast_to(costs, abilities.shape)
    n_rows = abilities.shape[0]

    k = mask.sum(axis=1)
    if (k == 0).any():
        raise SolverError("every child is uneducated in at least one household")
    if (q_T <= 0).any():
        raise SolverError("q_T must be positive")

    q = np.zeros_like(abilities)
    # Educated columns first, birth order preserved.
    order = np.argsort(~mask, axis=1, kind="stable")
    rows = np.arange(n_rows)

    single = k == 1
    if single.any():
        q[rows[single], order[single, 0]] = np.minimum(q_T[single], q_max)

    pair = k == 2
    if pair.any():
        r = rows[pair]
        i, j = order[pair, 0], order[pair, 1]
        x = split_pair(abilities[r, i], deltas[r, i], costs[r, i],
                       abilities[r, j], deltas[r, j], costs[r, j],
                       q_T[pair], q_max)
        q[r, i] = x
        q[r, j] = np.minimum(q_T[pair], 2.0 * q_max) - x

    triple = k == 3
    if triple.any():
        q[triple] = split_triple(abilities[triple], deltas[triple], costs[triple],
                                 q_T[triple], q_max)

    return np.clip(q, 0.0, q_max)


def solve_allocation(
    hh: HouseholdSpec,
    theta: Theta,
    educated_mask: Sequence[bool],
    cost_cuts: Sequence[float] | None = None,
    ) -> Allocation:
    """Utility-maximising split of hh.q_T among the educated children."""
    mask = np.asarray(educated_mask, dtype=bool)
    if mask.shape != (hh.n_c,):
        raise SolverError(f"mask has {mask.size} entries for {hh.n_c} children")
    if not mask.any():
        raise SolverError("at least one child must be educated")
    if hh.q_T <= 0:
        raise SolverError(f"q_T must be positive, got {hh.q_T}")

    q = solve_batch(
        abilities=hh.abilities[None, :],
        deltas=delta_vector(hh.females, theta),
        costs=cost_vector(hh.n_c, theta, cost_cuts)[None, :],
        mask=mask[None, :],
        q_T=np.array([hh.q_T]),
        q_max=hh.q_max,
    )[0]
    alloc = Allocation(q=q, educated_mask=mask)
    alloc.check(hh)
    return alloc
