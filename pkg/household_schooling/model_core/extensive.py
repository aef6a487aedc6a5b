"""
Extensive margin: which children a household educates at all, and the
threshold algebra that ties the selection probabilities to cost gaps.
"""
from __future__ import annotations

import numpy as np
from enum import Enum
from typing import Sequence
from household_schooling.errors import ConfigError, SolverError
from household_schooling.model_core.types import AbilityDist, HouseholdSpec, Theta
from household_schooling.model_core.solver import cost_vector, delta_vector

N_UNIFORMS = 4


class ExtensiveRule(str, Enum):
    BERNOULLI = "bernoulli"
    UTILITY = "utility"


def selection_probability(
    composition: str,
    theta: Theta,
    ) -> tuple[int, float]:
    """
    (child index, probability) of the two-child low-aversion draw: firstborn
    for same-gender pairs, the daughter for mixed pairs.
    """
    if len(set(composition)) == 1:
        return 0, theta.p1
    if composition == "ds":
        return 0, theta.p_fb_d
    return 1, theta.p_sb_d


def _pair_masks(uniforms, compositions, theta, standalone):
    rows = np.arange(uniforms.shape[0])
    mask = np.zeros((rows.size, 2), dtype=bool)
    if standalone is not None:
        # argmax keeps the lower birth order on ties
        mask[rows, np.argmax(standalone, axis=1)] = True
        return mask
    picks = [selection_probability(comp, theta) for comp in compositions]
    index = np.array([i for i, _ in picks])
    p = np.array([p for _, p in picks])
    mask[rows, np.where(uniforms[:, 1] < p, index, 1 - index)] = True
    return mask


def _triple_masks(uniforms, compositions, theta, standalone):
    rows = np.arange(uniforms.shape[0])
    mask = np.zeros((rows.size, 3), dtype=bool)
    shares = [theta.shares_for(comp) for comp in compositions]

    def column(name):
        return np.array([getattr(s, name) for s in shares])

    medium = uniforms[:, 1] < column("p_medium")

    if standalone is not None:
        ranking = np.argsort(-standalone, axis=1, kind="stable")
        mask[rows, ranking[:, 0]] = True
        mask[rows[medium], ranking[medium, 1]] = True
        return mask

    first = uniforms[:, 2] < column("p_m1")
    second = uniforms[:, 3] < column("p_m2")
    medium_mask = np.column_stack([first, ~first | second, ~first | ~second])

    only_first = uniforms[:, 2] < column("p_l1")
    only_second = ~only_first & (uniforms[:, 3] < column("p_l2"))
    low_mask = np.column_stack([only_first, only_second, ~only_first & ~only_second])

    mask[:] = np.where(medium[:, None], medium_mask, low_mask)
    return mask


def standalone_values(
    abilities: np.ndarray,
    females: np.ndarray,
    q_T: np.ndarray,
    theta: Theta,
    ) -> np.ndarray:
    """a_i q_T^delta_i - alpha_i q_T: value of giving child i the whole budget."""
    abilities = np.atleast_2d(abilities)
    n_c = abilities.shape[1]
    deltas = delta_vector(females, theta)
    costs = cost_vector(n_c, theta)[None, :]
    q_T = np.asarray(q_T, dtype=float).reshape(-1, 1)
    return abilities * np.power(q_T, deltas) - costs * q_T


def masks_from_uniforms(
    uniforms: np.ndarray,
    compositions: Sequence[str],
    theta: Theta,
    rule: ExtensiveRule = ExtensiveRule.BERNOULLI,
    abilities: np.ndarray | None = None,
    q_T: np.ndarray | None = None,
    ) -> np.ndarray:
    """
    Educated masks for households of one size from pre-drawn uniforms
    (one row of N_UNIFORMS per household). Keeping the uniforms fixed while
    theta moves gives common random numbers.
    """
    uniforms = np.atleast_2d(np.asarray(uniforms, dtype=float))
    n_c = len(compositions[0])
    if n_c not in (2, 3):
        raise SolverError(f"unsupported number of children {n_c}")

    standalone = None
    if ExtensiveRule(rule) is ExtensiveRule.UTILITY:
        if abilities is None or q_T is None:
            raise SolverError("the utility rule needs abilities and q_T")
        females = np.array([[ch == "d" for ch in comp] for comp in compositions])
        standalone = standalone_values(abilities, females, q_T, theta)

    high = uniforms[:, 0] < theta.p_high_aversion
    if n_c == 2:
        mask = _pair_masks(uniforms, compositions, theta, standalone)
    else:
        mask = _triple_masks(uniforms, compositions, theta, standalone)
    mask[high] = True
    return mask


def draw_extensive_set(
    hh: HouseholdSpec,
    theta: Theta,
    rng: np.random.Generator,
    rule: ExtensiveRule = ExtensiveRule.BERNOULLI,
    ) -> np.ndarray:
    """Draw the aversion type and, below high aversion, the educated subset."""
    if hh.n_c not in (2, 3):
        raise SolverError(f"unsupported number of children {hh.n_c}")
    uniforms = rng.random(N_UNIFORMS)[None, :]
    abilities = hh.abilities[None, :] if hh.has_abilities else None
    return masks_from_uniforms(
        uniforms, [hh.composition], theta, rule,
        abilities=abilities, q_T=np.array([hh.q_T]),
    )[0]


def educated_probabilities(
    composition: str,
    theta: Theta,
    ) -> np.ndarray:
    """
    Probability that each child is educated given the household does not
    educate everyone, under the Bernoulli rule.
    """
    if len(composition) == 2:
        index, p = selection_probability(composition, theta)
        probs = np.full(2, 1.0 - p)
        probs[index] = p
        return probs

    s = theta.shares_for(composition)
    medium = np.array([
        s.p_m1,
        s.p_m1 * s.p_m2 + (1.0 - s.p_m1),
        s.p_m1 * (1.0 - s.p_m2) + (1.0 - s.p_m1),
    ])
    low = np.array([
        s.p_l1,
        (1.0 - s.p_l1) * s.p_l2,
        (1.0 - s.p_l1) * (1.0 - s.p_l2),
    ])
    return s.p_medium * medium + (1.0 - s.p_medium) * low


def threshold_from_costgap(
    alpha_gap: float,
    q_T: float,
    delta1: float,
    delta2: float,
    ) -> float:
    """Firstborn ability above which the firstborn beats the second-born."""
    if q_T <= 0:
        raise ConfigError(f"must be positive, got {q_T}", field="q_T")
    return (alpha_gap * q_T + q_T ** delta2) / (q_T ** delta1 + q_T ** delta2)


def costgap_from_threshold(
    threshold: float,
    q_T: float,
    delta1: float,
    delta2: float,
    ) -> float:
    """Inverse of threshold_from_costgap in the cost gap."""
    if q_T <= 0:
        raise ConfigError(f"must be positive, got {q_T}", field="q_T")
    return (threshold * (q_T ** delta1 + q_T ** delta2) - q_T ** delta2) / q_T


def p_from_threshold(
    threshold: float,
    dist: AbilityDist,
    ) -> float:
    """P[a1 > threshold] under the ability law."""
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"must lie in (0, 1), got {threshold}", field="threshold")
    return float(dist.sf(threshold))


def threshold_from_p(
    p: float,
    dist: AbilityDist,
    ) -> float:
    """Quantile inverse of p_from_threshold."""
    if not 0.0 < p < 1.0:
        raise ConfigError(f"must lie in (0, 1), got {p}", field="p")
    return float(dist.isf(p))
