"""Unit-root and stationarity tests: ADF, Phillips-Perron, KPSS.

All three work on a univariate float array.  ADF and PP test the unit-root
null (reject when the statistic is *below* the critical value); KPSS tests
the stationarity null (reject when *above*).  P-values for ADF/PP come from
the embedded MacKinnon response surface; KPSS reports a critical-value band
instead of a p-value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _tables
from .errors import DataError, EstimationError

SPEC_NONE = "none"
SPEC_CONSTANT = "constant"
SPEC_TREND = "constant+trend"
_SPECS = (SPEC_NONE, SPEC_CONSTANT, SPEC_TREND)

REJECT = "reject-null"
FAIL_TO_REJECT = "fail-to-reject"


@dataclass(frozen=True)
class TestResult:
    """Statistic plus decision metadata for one stationarity test."""

    test: str
    statistic: float
    p_value: float | None
    critical_values: dict[float, float]
    lags_used: int
    deterministic_spec: str
    decision_hint: str
    nobs: int = 0

    def __post_init__(self):
        if self.p_value is not None and not 0.0 <= self.p_value <= 1.0:
            raise EstimationError(f"p-value {self.p_value} outside [0, 1]")
        if not set(self.critical_values) <= {0.01, 0.05, 0.10}:
            raise EstimationError(f"unexpected critical-value levels {set(self.critical_values)}")

    def to_dict(self) -> dict:
        return {
            "test": self.test,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "critical_values": {f"{lvl:g}": cv for lvl, cv in sorted(self.critical_values.items())},
            "lags_used": self.lags_used,
            "deterministic_spec": self.deterministic_spec,
            "decision_hint": self.decision_hint,
            "nobs": self.nobs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TestResult":
        return cls(
            test=d["test"],
            statistic=d["statistic"],
            p_value=d["p_value"],
            critical_values={float(k): v for k, v in d["critical_values"].items()},
            lags_used=d["lags_used"],
            deterministic_spec=d["deterministic_spec"],
            decision_hint=d["decision_hint"],
            nobs=d["nobs"],
        )


def _as_vector(y) -> np.ndarray:
    y = np.asarray(y, dtype=float).squeeze()
    if y.ndim != 1:
        raise DataError(f"univariate series required, got shape {y.shape}")
    if not np.isfinite(y).all():
        raise DataError("series contains missing or non-finite values")
    return y


def _det_terms(n: int, spec: str) -> np.ndarray:
    if spec == SPEC_NONE:
        return np.empty((n, 0))
    if spec == SPEC_CONSTANT:
        return np.ones((n, 1))
    if spec == SPEC_TREND:
        return np.column_stack([np.ones(n), np.arange(1, n + 1, dtype=float)])
    raise DataError(f"unknown deterministic spec {spec!r} (one of {_SPECS})")


def _ols(X: np.ndarray, y: np.ndarray):
    """Least squares with coefficient standard errors; raises on rank loss."""
    n, k = X.shape
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < k:
        raise EstimationError("singular regression (constant or collinear series?)")
    resid = y - X @ beta
    ssr = float(resid @ resid)
    dof = n - k
    if dof <= 0:
        raise DataError("series too short for this regression")
    s2 = ssr / dof
    xtx_inv = np.linalg.inv(X.T @ X)
    se = np.sqrt(np.maximum(s2 * np.diag(xtx_inv), 0.0))
    return beta, se, resid, ssr


def _df_design(y: np.ndarray, lags: int, spec: str, offset: int):
    """Design for Delta-y_t on [y_{t-1}, Delta-y lags, deterministics].

    ``offset`` holds back extra leading observations so several lag lengths
    can be compared on the same sample.
    """
    dy = np.diff(y)
    start = offset
    lhs = dy[start:]
    cols = [y[start:-1]]
    for i in range(1, lags + 1):
        cols.append(dy[start - i:-i])
    X = np.hstack([np.column_stack(cols), _det_terms(len(lhs), spec)])
    return X, lhs


def adf_test(y, max_lags: int | None = None, spec: str = SPEC_CONSTANT,
             lag_rule: str = "aic") -> TestResult:
    """Augmented Dickey-Fuller t test.

    The statistic is the t-ratio on the lagged level in the augmented
    regression.  With ``lag_rule="aic"`` the augmentation length is chosen
    by AIC over 0..max_lags on a common sample, then the test is refit at
    the chosen length; ``"fixed"`` uses max_lags directly.
    """
    y = _as_vector(y)
    T = len(y)
    if max_lags is None:
        max_lags = min(int(math.floor(12.0 * (T / 100.0) ** 0.25)), max(T // 2 - 3, 0))
    if max_lags < 0:
        raise DataError("max_lags must be nonnegative")
    if T < max_lags + 10:
        raise DataError(f"series too short: {T} observations for max_lags={max_lags}")
    if lag_rule not in ("aic", "fixed"):
        raise DataError(f"unknown lag rule {lag_rule!r} (aic or fixed)")

    if lag_rule == "fixed":
        lags = max_lags
    else:
        best = None
        for p in range(max_lags + 1):
            X, lhs = _df_design(y, p, spec, offset=max_lags)
            _, _, _, ssr = _ols(X, lhs)
            n = len(lhs)
            aic = n * math.log(ssr / n) + 2 * X.shape[1]
            if best is None or aic < best[0]:
                best = (aic, p)
        lags = best[1]

    X, lhs = _df_design(y, lags, spec, offset=lags)
    beta, se, _, _ = _ols(X, lhs)
    if se[0] == 0.0:
        raise EstimationError("zero standard error on the lagged level (constant series?)")
    stat = float(beta[0] / se[0])
    nobs = len(lhs)
    crit = _tables.adf_critical_values(nobs, spec)
    pval = _tables.adf_pvalue(stat, spec)
    decision = REJECT if stat < crit[0.05] else FAIL_TO_REJECT
    return TestResult("adf", stat, pval, crit, lags, spec, decision, nobs)


def pp_test(y, spec: str = SPEC_CONSTANT, bandwidth_rule: str = "newey-west-auto",
            bandwidth: int | None = None) -> TestResult:
    """Phillips-Perron Z-tau test with Bartlett-kernel long-run variance."""
    y = _as_vector(y)
    T = len(y)
    if T < 20:
        raise DataError(f"series too short for Phillips-Perron: {T} < 20")
    X, lhs = _df_design(y, 0, spec, offset=0)
    beta, se, resid, ssr = _ols(X, lhs)
    n, k = X.shape
    if bandwidth_rule == "newey-west-auto":
        bw = _tables.newey_west_bandwidth(n)
    elif bandwidth_rule == "fixed":
        if bandwidth is None or bandwidth < 0:
            raise DataError("fixed bandwidth rule requires a nonnegative bandwidth")
        bw = bandwidth
    else:
        raise DataError(f"unknown bandwidth rule {bandwidth_rule!r}")
    gamma0 = ssr / n
    lam2 = _tables.bartlett_long_run_variance(resid, bw)
    if lam2 <= 0.0:
        raise EstimationError("zero long-run variance in Phillips-Perron correction")
    s2 = ssr / (n - k)
    tau = float(beta[0] / se[0])
    stat = math.sqrt(gamma0 / lam2) * tau \
        - 0.5 * (lam2 - gamma0) / math.sqrt(lam2) * n * se[0] / math.sqrt(s2)
    crit = _tables.adf_critical_values(n, spec)
    pval = _tables.adf_pvalue(stat, spec)
    decision = REJECT if stat < crit[0.05] else FAIL_TO_REJECT
    return TestResult("pp", stat, pval, crit, bw, spec, decision, n)


def kpss_test(y, spec: str = SPEC_CONSTANT, bandwidth_rule: str = "newey-west-auto",
              bandwidth: int | None = None) -> TestResult:
    """KPSS LM test of the stationarity null (level or trend stationarity)."""
    y = _as_vector(y)
    T = len(y)
    if T < 20:
        raise DataError(f"series too short for KPSS: {T} < 20")
    if spec not in (SPEC_CONSTANT, SPEC_TREND):
        raise DataError(f"KPSS spec must be {SPEC_CONSTANT!r} or {SPEC_TREND!r}")
    Z = _det_terms(T, spec)
    coef, _, rank, _ = np.linalg.lstsq(Z, y, rcond=None)
    if rank < Z.shape[1]:
        raise EstimationError("singular KPSS regression")
    resid = y - Z @ coef
    if bandwidth_rule == "newey-west-auto":
        bw = _tables.kpss_bandwidth(T)
    elif bandwidth_rule == "fixed":
        if bandwidth is None or bandwidth < 0:
            raise DataError("fixed bandwidth rule requires a nonnegative bandwidth")
        bw = bandwidth
    else:
        raise DataError(f"unknown bandwidth rule {bandwidth_rule!r}")
    lam2 = _tables.bartlett_long_run_variance(resid, bw)
    partial = np.cumsum(resid)
    scale = max(1.0, float(np.abs(y).max()))
    if lam2 <= 0.0 or np.abs(resid).max() <= 1e-12 * scale:
        # exact deterministic fit (e.g. noiseless trend): statistic degenerates
        stat = 0.0
    else:
        stat = float(partial @ partial) / (T**2 * lam2)
    crit = dict(_tables.KPSS_CRIT[spec])
    decision = REJECT if stat > crit[0.05] else FAIL_TO_REJECT
    return TestResult("kpss", stat, None, crit, bw, spec, decision, T)
