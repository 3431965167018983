"""Embedded statistical tables for the unit-root and cointegration tests.

Dickey-Fuller tail probabilities come from MacKinnon's (1994) response
surface (the 2010 update supplies the finite-sample critical values); the
Kwiatkowski-Phillips-Schmidt-Shin critical values are the published
asymptotic ones; the Johansen tables are the Osterwald-Lenum-style values
for each deterministic case, ordered (10%, 5%, 1%).  All constants were
cross-checked against large-sample Monte Carlo simulation of the
corresponding asymptotic distributions before being frozen here.
"""

from __future__ import annotations

import math

import numpy as np

# --- MacKinnon (1994) p-value response surfaces, single-series case -------
# p = Phi(poly(stat)); small-p polynomial below tau_star, large-p above.
# Beyond (tau_min, tau_max) the p-value saturates at 0 or 1.

_ADF_PVAL = {
    "none": {
        "star": -1.04, "min": -19.04, "max": math.inf,
        "smallp": (0.6344, 1.2378, 0.032496),
        "largep": (0.4797, 0.93557, -0.06999, 0.033066),
    },
    "constant": {
        "star": -1.61, "min": -18.83, "max": 2.74,
        "smallp": (2.1659, 1.4412, 0.038269),
        "largep": (1.7339, 0.93202, -0.12745, -0.010368),
    },
    "constant+trend": {
        "star": -2.89, "min": -16.18, "max": 0.7,
        "smallp": (3.2512, 1.6047, 0.049588),
        "largep": (2.5261, 0.61654, -0.37956, -0.060285),
    },
}

# --- MacKinnon (2010) critical-value response surfaces, single series -----
# cv(T) = b0 + b1/T + b2/T^2 + b3/T^3, rows for 1%, 5%, 10%.

_ADF_CRIT = {
    "none": (
        (-2.56574, -2.2358, -3.627, 0.0),
        (-1.94100, -0.2686, -3.365, 31.223),
        (-1.61682, 0.2656, -2.714, 25.364),
    ),
    "constant": (
        (-3.43035, -6.5393, -16.786, -79.433),
        (-2.86154, -2.8903, -4.234, -40.040),
        (-2.56677, -1.5384, -2.809, 0.0),
    ),
    "constant+trend": (
        (-3.95877, -9.0531, -28.428, -134.155),
        (-3.41049, -4.3904, -9.036, -45.374),
        (-3.12705, -2.5856, -3.925, -22.380),
    ),
}


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def adf_pvalue(stat: float, spec: str) -> float:
    """Tail probability of the Dickey-Fuller t distribution for ``spec``."""
    tab = _ADF_PVAL[spec]
    if stat > tab["max"]:
        return 1.0
    if stat < tab["min"]:
        return 0.0
    coeffs = tab["smallp"] if stat <= tab["star"] else tab["largep"]
    z = sum(c * stat ** i for i, c in enumerate(coeffs))
    return min(1.0, max(0.0, _norm_cdf(z)))


def adf_critical_values(nobs: int, spec: str) -> dict[float, float]:
    out = {}
    for level, row in zip((0.01, 0.05, 0.10), _ADF_CRIT[spec]):
        b0, b1, b2, b3 = row
        out[level] = b0 + b1 / nobs + b2 / nobs**2 + b3 / nobs**3
    return out


# --- KPSS critical values (level and trend stationarity) ------------------

KPSS_CRIT = {
    "constant": {0.10: 0.347, 0.05: 0.463, 0.01: 0.739},
    "constant+trend": {0.10: 0.119, 0.05: 0.146, 0.01: 0.216},
}


# --- Johansen critical values, per deterministic case ---------------------
# Indexed by k - r (number of common trends under the null), 1-based.
# Levels are (10%, 5%, 1%).  "constant" is the unrestricted-constant case,
# the toolkit default; "constant-in-CE" restricts the constant to the
# cointegrating relation; "none" has no deterministic terms.

_JOHANSEN = {
    "constant": {
        "trace": (
            (6.50, 8.18, 11.65),
            (15.66, 17.95, 23.52),
            (28.71, 31.52, 37.22),
            (45.23, 48.28, 55.43),
            (66.49, 70.60, 78.87),
        ),
        "maxeig": (
            (6.50, 8.18, 11.65),
            (12.91, 14.90, 19.19),
            (18.90, 21.07, 25.75),
            (24.78, 27.14, 32.14),
            (30.84, 33.32, 38.78),
        ),
    },
    "constant-in-CE": {
        "trace": (
            (7.52, 9.24, 12.97),
            (17.85, 19.96, 24.60),
            (32.00, 34.91, 41.07),
            (49.65, 53.12, 60.16),
            (71.86, 76.07, 84.45),
        ),
        "maxeig": (
            (7.52, 9.24, 12.97),
            (13.75, 15.67, 20.20),
            (19.77, 22.00, 26.81),
            (25.56, 28.14, 33.24),
            (31.66, 34.40, 39.79),
        ),
    },
    "none": {
        "trace": (
            (2.98, 4.13, 6.94),
            (10.47, 12.32, 16.36),
            (21.78, 24.28, 29.51),
            (37.03, 40.17, 46.57),
            (56.28, 60.06, 67.64),
        ),
        "maxeig": (
            (2.98, 4.13, 6.94),
            (9.47, 11.22, 15.09),
            (15.72, 17.80, 22.25),
            (21.84, 24.16, 29.06),
            (27.92, 30.44, 35.74),
        ),
    },
}

JOHANSEN_MAX_DIM = 5
JOHANSEN_LEVELS = (0.10, 0.05, 0.01)


def johansen_critical_values(n_trends: int, det_spec: str, statistic: str) -> dict[float, float]:
    """Critical values for ``n_trends`` = k - r common trends under the null."""
    if not 1 <= n_trends <= JOHANSEN_MAX_DIM:
        raise ValueError(
            f"Johansen critical values embedded for k - r up to {JOHANSEN_MAX_DIM}, got {n_trends}"
        )
    row = _JOHANSEN[det_spec][statistic][n_trends - 1]
    return dict(zip(JOHANSEN_LEVELS, row))


def newey_west_bandwidth(nobs: int) -> int:
    """Short lag-truncation rule floor(4 * (T/100)^(2/9))."""
    return int(math.floor(4.0 * (nobs / 100.0) ** (2.0 / 9.0)))


def kpss_bandwidth(nobs: int) -> int:
    """KPSS lag-truncation rule floor(8 * (T/100)^(1/4)).

    The short floor(4 (T/100)^(2/9)) rule badly over-rejects stationary but
    persistent series under the KPSS statistic, so KPSS defaults to the
    mid-length rule from the original KPSS truncation ladder instead.
    """
    return int(math.floor(8.0 * (nobs / 100.0) ** 0.25))


def bartlett_long_run_variance(u: np.ndarray, bandwidth: int) -> float:
    """Newey-West long-run variance of a residual vector (Bartlett kernel)."""
    u = np.asarray(u, dtype=float)
    n = len(u)
    gamma0 = float(u @ u) / n
    lrv = gamma0
    for lag in range(1, bandwidth + 1):
        w = 1.0 - lag / (bandwidth + 1.0)
        lrv += 2.0 * w * float(u[lag:] @ u[:-lag]) / n
    return lrv
