"""
Structural objects of the household allocation model: the parameter vector,
children, households, allocations and the relative-ability law.
"""
from __future__ import annotations

import numpy as np
from scipy import stats
from dataclasses import dataclass, field, fields, replace
from typing import Mapping, Sequence
from household_schooling.config import MODEL_DEFAULTS, PARENT_EDUC_STRATA
from household_schooling.errors import ConfigError, InfeasibleAllocationError

SUPPORTED_SIZES = (2, 3)


def _check_probability(value: float, name: str) -> None:
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"must lie in [0, 1], got {value}", field=name)


@dataclass(frozen=True)
class ThreeChildShares:
    """
    Extensive-margin probabilities of a three-child composition.

    p_medium is the chance of educating two children given the household is
    not high-aversion; p_m1/p_m2 drive the sequential pick of the two, and
    p_l1/p_l2 the pick of the single child under low aversion.
    """
    p_medium: float = 0.5
    p_m1: float = 2.0 / 3.0
    p_m2: float = 0.5
    p_l1: float = 1.0 / 3.0
    p_l2: float = 0.5

    def __post_init__(self):
        for f in fields(self):
            _check_probability(getattr(self, f.name), f"three_child.{f.name}")

    def symmetric(self) -> ThreeChildShares:
        """Same number of educated children, picked without regard to who they are."""
        return replace(self, p_m1=2.0 / 3.0, p_m2=0.5, p_l1=1.0 / 3.0, p_l2=0.5)


@dataclass(frozen=True)
class Theta:
    theta1: float
    alpha_gap: float
    p1: float
    p_fb_d: float
    p_sb_d: float
    gamma: float = MODEL_DEFAULTS["GAMMA"]
    p_high_aversion: float = 0.0
    alpha_base: float = MODEL_DEFAULTS["ALPHA_BASE"]
    three_child: Mapping[str, ThreeChildShares] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("p1", "p_fb_d", "p_sb_d", "p_high_aversion"):
            _check_probability(getattr(self, name), name)
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"must lie in (0, 1), got {self.gamma}", field="gamma")
        if not self.theta1 < self.gamma:
            raise ConfigError(
                f"must be below gamma={self.gamma}, got {self.theta1}", field="theta1")
        if self.alpha_base < 0:
            raise ConfigError("must be non-negative", field="alpha_base")

    ESTIMATED = ("theta1", "alpha_gap")
    PROBABILITIES = ("p1", "p_fb_d", "p_sb_d", "p_high_aversion")

    def replace(self, **changes) -> Theta:
        return replace(self, **changes)

    def shares_for(self, composition: str) -> ThreeChildShares:
        key = "same" if len(set(composition)) == 1 else composition
        return self.three_child.get(key, ThreeChildShares())

    def no_disadvantage(self, dist: AbilityDist) -> Theta:
        """Same household types, no gender or birth-order disadvantage."""
        p_first = float(dist.sf(0.5))
        return self.replace(
            theta1=0.0,
            alpha_gap=0.0,
            p1=p_first,
            p_fb_d=p_first,
            p_sb_d=1.0 - p_first,
            three_child={k: v.symmetric() for k, v in self.three_child.items()},
        )

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "three_child"}
        out["three_child"] = {
            key: {f.name: getattr(shares, f.name) for f in fields(shares)}
            for key, shares in sorted(self.three_child.items())
        }
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> Theta:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown key(s) {unknown}", field="theta")
        payload = dict(data)
        three_child = {}
        for key, block in (payload.pop("three_child", None) or {}).items():
            bad = sorted(set(block) - {f.name for f in fields(ThreeChildShares)})
            if bad:
                raise ConfigError(f"unknown key(s) {bad}", field=f"three_child.{key}")
            three_child[key] = ThreeChildShares(**block)
        missing = [name for name in ("theta1", "alpha_gap", "p1", "p_fb_d", "p_sb_d")
                   if name not in payload]
        if missing:
            raise ConfigError(f"missing key(s) {missing}", field="theta")
        try:
            return cls(**{k: float(v) for k, v in payload.items()}, three_child=three_child)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(str(e), field="theta") from e


@dataclass(frozen=True)
class ChildSpec:
    female: bool
    birth_order: int
    ability: float | None = None

    def __post_init__(self):
        if self.birth_order < 1:
            raise ConfigError(f"must be positive, got {self.birth_order}", field="birth_order")
        if self.ability is not None and not 0.0 < self.ability < 1.0:
            raise ConfigError(f"must lie in (0, 1), got {self.ability}", field="ability")


@dataclass(frozen=True)
class HouseholdSpec:
    children: tuple[ChildSpec, ...]
    q_T: float
    q_max: float = MODEL_DEFAULTS["Q_MAX"]
    parent_educ: str = "none"
    household_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "children",
                           tuple(sorted(self.children, key=lambda c: c.birth_order)))
        n_c = len(self.children)
        if n_c not in SUPPORTED_SIZES:
            raise ConfigError(f"unsupported number of children {n_c}", field="n_c")
        orders = [c.birth_order for c in self.children]
        if len(set(orders)) != n_c:
            raise ConfigError(f"duplicate birth orders {orders}", field="birth_order")
        if self.q_T < 0:
            raise ConfigError(f"must be non-negative, got {self.q_T}", field="q_T")
        if self.q_T > n_c * self.q_max + MODEL_DEFAULTS["FEASIBILITY_TOL"]:
            raise ConfigError(
                f"{self.q_T} exceeds N_c * q_max = {n_c * self.q_max}", field="q_T")
        if self.parent_educ not in PARENT_EDUC_STRATA:
            raise ConfigError(f"unknown stratum '{self.parent_educ}'", field="parent_educ")
        abilities = [c.ability for c in self.children]
        if all(a is not None for a in abilities) and abs(sum(abilities) - 1.0) > 1e-9:
            raise ConfigError(f"abilities must sum to 1, got {sum(abilities)}", field="ability")

    @property
    def n_c(self) -> int:
        return len(self.children)

    @property
    def females(self) -> np.ndarray:
        return np.array([c.female for c in self.children], dtype=bool)

    @property
    def composition(self) -> str:
        """Genders by birth order, 'd' for a daughter and 's' for a son."""
        return "".join("d" if c.female else "s" for c in self.children)

    @property
    def same_gender(self) -> bool:
        return len(set(self.composition)) == 1

    @property
    def s_h(self) -> int:
        return int(self.same_gender)

    @property
    def b_ds(self) -> int:
        return int(self.composition[:2] == "ds")

    @property
    def b_sd(self) -> int:
        return int(self.composition[:2] == "sd")

    @property
    def has_abilities(self) -> bool:
        return all(c.ability is not None for c in self.children)

    @property
    def abilities(self) -> np.ndarray:
        if not self.has_abilities:
            raise ConfigError("abilities not attached", field="ability")
        return np.array([c.ability for c in self.children], dtype=float)

    def with_abilities(self, abilities: Sequence[float]) -> HouseholdSpec:
        children = tuple(replace(c, ability=float(a)) for c, a in zip(self.children, abilities))
        return replace(self, children=children)

    def with_budget(self, q_T: float) -> HouseholdSpec:
        return replace(self, q_T=float(q_T))


@dataclass(frozen=True)
class Allocation:
    q: np.ndarray
    educated_mask: np.ndarray

    def check(self, hh: HouseholdSpec) -> None:
        tol = MODEL_DEFAULTS["FEASIBILITY_TOL"]
        q = np.asarray(self.q, dtype=float)
        mask = np.asarray(self.educated_mask, dtype=bool)
        if q.shape != (hh.n_c,) or mask.shape != (hh.n_c,):
            raise InfeasibleAllocationError(
                f"allocation has {q.shape[0]} entries for {hh.n_c} children")
        if q.sum() > hh.q_T + tol:
            raise InfeasibleAllocationError(f"sum(q)={q.sum()} exceeds q_T={hh.q_T}")
        if (q < -tol).any() or (q > hh.q_max + tol).any():
            raise InfeasibleAllocationError(f"q={q.tolist()} outside [0, {hh.q_max}]")
        if (q[~mask] != 0).any():
            raise InfeasibleAllocationError("uneducated child receives positive years")


@dataclass(frozen=True)
class AbilityDist:
    """Beta(beta1, beta2) law of a firstborn's relative ability."""
    beta1: float
    beta2: float

    def __post_init__(self):
        if self.beta1 <= 0 or self.beta2 <= 0:
            raise ConfigError(
                f"shapes must be positive, got ({self.beta1}, {self.beta2})", field="beta")

    @property
    def law(self):
        return stats.beta(self.beta1, self.beta2)

    @property
    def mean(self) -> float:
        return self.beta1 / (self.beta1 + self.beta2)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.beta(self.beta1, self.beta2, size=size)

    def cdf(self, x):
        return self.law.cdf(x)

    def sf(self, x):
        return self.law.sf(x)

    def isf(self, p):
        return self.law.isf(p)

    def ppf(self, p):
        return self.law.ppf(p)

    def mirrored(self) -> AbilityDist:
        """Law of 1 - a, i.e. the second child's share in a pair."""
        return AbilityDist(self.beta2, self.beta1)

    def to_dict(self) -> dict:
        return {"beta1": self.beta1, "beta2": self.beta2}


class EmpiricalAbilityDist:
    """
    Ability law given by recovered firstborn shares. Pairs are drawn by
    resampling, so ordering violations in the recovered values carry over.
    """

    def __init__(self, samples: Sequence[float]):
        values = np.sort(np.asarray(samples, dtype=float))
        if values.size == 0 or (values <= 0).any() or (values >= 1).any():
            raise ConfigError("need a nonempty sample inside (0, 1)", field="a1_hat")
        self.samples = values

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    def sample(self, rng: np.random.Generator, size=None):
        return rng.choice(self.samples, size=size, replace=True)

    def cdf(self, x):
        return np.searchsorted(self.samples, x, side="right") / self.samples.size

    def sf(self, x):
        return 1.0 - self.cdf(x)

    def ppf(self, p):
        return np.quantile(self.samples, p)

    def isf(self, p):
        return np.quantile(self.samples, 1.0 - np.asarray(p))

    def mirrored(self) -> EmpiricalAbilityDist:
        return EmpiricalAbilityDist(1.0 - self.samples)
