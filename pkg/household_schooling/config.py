"""
Constants and defaults for the household education allocation model.
"""

TOOL_VERSION = "0.1.0"

MODEL_DEFAULTS = {
    "GAMMA": 0.5,
    "ALPHA_BASE": 0.01,
    "Q_MAX": 21.0,
    "BISECTION_TOL": 1e-10,
    "BISECTION_MAX_ITER": 200,
    "FEASIBILITY_TOL": 1e-9,
}

ABILITY_DEFAULTS = {
    "BETA1": 28.82,
    "BETA2": 28.78,
    "MLE_MAX_ITER": 500,
    "MLE_TOL": 1e-10,
    "MLE_MIN_SAMPLES": 30,
}

ESTIMATION_DEFAULTS = {
    "S": 20,
    "H": 2000,
    "MAX_EVALUATIONS": 400,
    "BOOTSTRAP_REPS": 200,
    "FD_STEP": 1e-4,
    "GRID_POINTS": 11,
    "THETA1_BOUNDS": (0.0, 0.5),
    "ALPHA_GAP_BOUNDS": (0.0, 0.05),
    "XATOL": 1e-7,
    "FATOL": 1e-6,
    "SEED": 20240101,
    "BOOTSTRAP_MAX_RETRIES": 10,
}

PARENT_EDUC_STRATA = ("none", "primary", "junior", "senior", "college")

# Average years per child (mean, sd) by parent education.
BUDGET_DEFAULTS = {
    "none": (9.2, 3.0),
    "primary": (10.5, 3.0),
    "junior": (11.8, 2.8),
    "senior": (13.1, 2.6),
    "college": (14.5, 2.4),
}

COMPOSITIONS = {
    2: ("dd", "ss", "ds", "sd"),
    3: ("ddd", "sss", "dds", "dsd", "sdd", "dss", "sds", "ssd"),
}

HOUSEHOLD_COLUMNS = [
    "household_id", "child_id", "female", "birth_order",
    "educ_years", "n_c", "parent_educ",
]
ABILITY_COLUMNS = ["score"]
RECOVERY_COLUMNS = ["household_id", "a1_hat", "a2_hat", "residual", "corner_flag"]
GAP_COLUMNS = ["scenario", "gap_years"]

# Published magnitudes, reported next to computed values only.
REFERENCE_MAGNITUDES = {
    "theta_hat_none": {
        "theta1": 0.0218, "alpha_gap": 0.0018,
        "p1": 0.3663, "p_fb_d": 0.1124, "p_sb_d": 0.3217,
    },
    "theta_hat_college": {"theta1": 0.0115, "alpha_gap": 0.0016},
    "theta1_se_none": 0.0017,
    "targeted_moments_none": {
        "data": {"m1": 1.7028, "m2": 0.3642, "m3": 0.1116, "m4": 0.3177},
        "model": {"m1": 1.7169, "m2": 0.3678},
    },
    "variance_decomposition": {"within": 22.63, "between": 33.66, "share_pct": 67.0},
    "decomposition_shares_qT12": {"gender": 50.1, "birth_order": 30.5, "ability": 19.6},
    "fe_coefficients_qT12": {"female": -3.03, "firstborn": -3.24, "interaction": 1.26},
    "policy_cuts": {
        "firstborn": (0.019, 0.0018),
        "firstborn_daughter": (0.03, 0.013),
        "second_daughter": (0.038, 0.013),
    },
    "cf1_crossing_pct": {"none": (13.0, 78.0), "college": 8.0},
    "threshold_fb_d": 0.579,
    "threshold_sb_d": 0.53,
    "cf3_qbar": (9.2, 14.5),
}
