"""
Monte Carlo simulation of household outcomes: extensive draw, ability draw,
intensive solve.
"""
from __future__ import annotations

import logging
import numpy as np
import pandas as pd
from dataclasses import dataclass
from typing import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor, as_completed
from household_schooling.helpers import derive_rng
from household_schooling.errors import SolverError
from household_schooling.population import sample_ability_vector
from household_schooling.model_core.types import Allocation, AbilityDist, HouseholdSpec, Theta
from household_schooling.model_core.solver import cost_vector, delta_vector, solve_allocation, solve_batch
from household_schooling.model_core.extensive import (
    N_UNIFORMS,
    ExtensiveRule,
    draw_extensive_set,
    masks_from_uniforms,
)

logger = logging.getLogger(__name__)

OUTCOME_COLUMNS = [
    "household_id", "template_index", "replicate", "child_id", "female",
    "birth_order", "educ_years", "educated", "ability", "n_c", "parent_educ", "q_T",
    "composition", "n_educated",
]


def simulate_household(
    hh: HouseholdSpec,
    theta: Theta,
    rng: np.random.Generator,
    rule: ExtensiveRule = ExtensiveRule.BERNOULLI,
    ) -> Allocation:
    """Extensive draw followed by the intensive solve for one household."""
    if not hh.has_abilities:
        raise SolverError("attach abilities before simulating the household")
    mask = draw_extensive_set(hh, theta, rng, rule)
    return solve_allocation(hh, theta, mask)


@dataclass(frozen=True)
class SimulationDraws:
    """
    Fixed random inputs for a template population: `uniforms` (H, s, 4) for
    the extensive draws and `abilities` (H, s, 3), zero-padded for pairs.
    Reused across theta evaluations for common random numbers.
    """
    uniforms: np.ndarray
    abilities: np.ndarray
    seed: int
    label: str

    @property
    def s(self) -> int:
        return self.uniforms.shape[1]


def _household_draws(hh, s, dist, seed, label, index):
    rng = derive_rng(seed, label, index)
    uniforms = rng.random((s, N_UNIFORMS))
    abilities = np.zeros((s, 3))
    abilities[:, :hh.n_c] = sample_ability_vector(hh.n_c, dist, rng, size=s)
    return index, uniforms, abilities


def make_draws(
    template: Sequence[HouseholdSpec],
    s: int,
    dist: AbilityDist,
    seed: int,
    label: str = "model",
    threads: int = 1,
    ) -> SimulationDraws:
    """One derived stream per template household; output independent of `threads`."""
    n_households = len(template)
    uniforms = np.empty((n_households, s, N_UNIFORMS))
    abilities = np.empty((n_households, s, 3))

    if threads <= 1:
        results = (_household_draws(hh, s, dist, seed, label, h) for h, hh in enumerate(template))
        for index, u, a in results:
            uniforms[index], abilities[index] = u, a
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            futures = [
                executor.submit(_household_draws, hh, s, dist, seed, label, h)
                for h, hh in enumerate(template)
            ]
            for future in as_completed(futures):
                index, u, a = future.result()
                uniforms[index], abilities[index] = u, a

    return SimulationDraws(uniforms=uniforms, abilities=abilities, seed=seed, label=label)


def simulate_batch(
    template: Sequence[HouseholdSpec],
    theta: Theta,
    draws: SimulationDraws,
    rule: ExtensiveRule = ExtensiveRule.BERNOULLI,
    cost_cuts: Mapping[str, Sequence[float]] | None = None,
    budgets: np.ndarray | None = None,
    ) -> pd.DataFrame:
    """
    Child-level outcomes for every (template household, replicate) pair.

    `cost_cuts` maps a gender composition to per-child relative cost cuts;
    `budgets` overrides the template's q_T household by household.
    """
    s = draws.s
    q_T_all = np.array([hh.q_T for hh in template], dtype=float) if budgets is None \
        else np.asarray(budgets, dtype=float)
    if (q_T_all <= 0).any():
        raise SolverError("template contains households with q_T <= 0")
    sizes = np.array([hh.n_c for hh in template])
    frames = []

    for n_c in (2, 3):
        idx = np.flatnonzero(sizes == n_c)
        if idx.size == 0:
            continue
        rows = idx.size * s
        compositions = np.repeat([template[h].composition for h in idx], s)
        females = np.array([[ch == "d" for ch in comp] for comp in compositions])
        abilities = draws.abilities[idx, :, :n_c].reshape(rows, n_c)
        uniforms = draws.uniforms[idx].reshape(rows, N_UNIFORMS)
        q_T = np.repeat(q_T_all[idx], s)
        q_max = template[idx[0]].q_max

        costs = np.broadcast_to(cost_vector(n_c, theta), (rows, n_c)).copy()
        if cost_cuts:
            for comp, cuts in cost_cuts.items():
                if len(comp) != n_c:
                    continue
                hit = compositions == comp
                costs[hit] *= 1.0 - np.asarray(cuts, dtype=float)

        mask = masks_from_uniforms(uniforms, list(compositions), theta, rule,
                                   abilities=abilities, q_T=q_T)
        q = solve_batch(abilities, delta_vector(females, theta), costs, mask, q_T, q_max)

        template_index = np.repeat(idx, s)
        replicate = np.tile(np.arange(s), idx.size)
        frames.append(pd.DataFrame({
            "household_id": np.repeat(template_index * s + replicate, n_c),
            "template_index": np.repeat(template_index, n_c),
            "replicate": np.repeat(replicate, n_c),
            "child_id": np.tile(np.arange(1, n_c + 1), rows),
            "female": females.ravel(),
            "birth_order": np.tile(np.arange(1, n_c + 1), rows),
            "educ_years": q.ravel(),
            "educated": mask.ravel(),
            "ability": abilities.ravel(),
            "n_c": n_c,
            "parent_educ": np.repeat([template[h].parent_educ for h in template_index], n_c),
            "q_T": np.repeat(q_T, n_c),
            "composition": np.repeat(compositions, n_c),
            "n_educated": np.repeat(mask.sum(axis=1), n_c),
        }))

    out = pd.concat(frames, ignore_index=True)
    logger.debug("simulated %d households x %d replicates", len(template), s)
    return out.sort_values(["household_id", "birth_order"], ignore_index=True)[OUTCOME_COLUMNS]


def simulate_records(
    template: Sequence[HouseholdSpec],
    theta: Theta,
    dist: AbilityDist,
    seed: int,
    rule: ExtensiveRule = ExtensiveRule.BERNOULLI,
    threads: int = 1,
    ) -> pd.DataFrame:
    """One simulated realisation per template household, in the household CSV layout."""
    draws = make_draws(template, 1, dist, seed, label="records", threads=threads)
    out = simulate_batch(template, theta, draws, rule)
    ids = np.array([hh.household_id or f"h{h:07d}" for h, hh in enumerate(template)], dtype=object)
    out["household_id"] = ids[out["template_index"].to_numpy()]
    out["child_id"] = out["birth_order"]
    return out
