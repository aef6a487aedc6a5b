import numpy as np
import pandas as pd
import pytest
from household_schooling.model_core.types import AbilityDist, ChildSpec, HouseholdSpec, Theta

BETA1, BETA2 = 28.82, 28.78


@pytest.fixture
def beta():
    return AbilityDist(BETA1, BETA2)


@pytest.fixture
def theta_hat():
    """Magnitudes of the non-educated stratum estimates, with some all-educated households."""
    return Theta(theta1=0.0218, alpha_gap=0.0018, p1=0.3663, p_fb_d=0.1124, p_sb_d=0.3217,
                 p_high_aversion=0.6)


@pytest.fixture
def neutral_theta(beta):
    return Theta(theta1=0.0, alpha_gap=0.0, p1=0.5, p_fb_d=0.5, p_sb_d=0.5,
                 p_high_aversion=0.6).no_disadvantage(beta)


@pytest.fixture
def make_household():
    def build(composition, q_T, abilities=None, parent_educ="none", household_id=""):
        children = tuple(
            ChildSpec(female=ch == "d", birth_order=t + 1,
                      ability=None if abilities is None else abilities[t])
            for t, ch in enumerate(composition)
        )
        return HouseholdSpec(children=children, q_T=q_T, parent_educ=parent_educ,
                             household_id=household_id)
    return build


@pytest.fixture
def household_frame():
    """Child-level frame from {household_id: [(female, years), ...]} in birth order."""
    def build(households, parent_educ="none"):
        rows = []
        for hid, children in households.items():
            for t, (female, years) in enumerate(children, start=1):
                rows.append({
                    "household_id": hid,
                    "child_id": t,
                    "female": bool(female),
                    "birth_order": t,
                    "educ_years": float(years),
                    "n_c": len(children),
                    "parent_educ": parent_educ,
                })
        return pd.DataFrame(rows)
    return build


@pytest.fixture
def pair_template(make_household):
    """Two-child households cycling through the four compositions, budgets near 18."""
    def build(n, seed=0):
        rng = np.random.default_rng(seed)
        comps = ("dd", "ss", "ds", "sd")
        budgets = np.clip(rng.normal(18.4, 5.0, size=n), 2.0, 42.0)
        return [make_household(comps[i % 4], float(budgets[i]), household_id=f"t{i}")
                for i in range(n)]
    return build
