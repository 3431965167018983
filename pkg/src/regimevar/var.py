"""Linear VAR estimation, lag selection, Johansen cointegration, impulse responses."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _tables
from .errors import DataError, EstimationError
from .timeseries import TimeSeries

SHOCK_UNIT = "one-unit"
SHOCK_ORTHOGONAL = "orthogonalized"
_SHOCKS = (SHOCK_UNIT, SHOCK_ORTHOGONAL)

DET_NONE = "none"
DET_CONSTANT_CE = "constant-in-CE"
DET_CONSTANT = "constant"
_DET_SPECS = (DET_NONE, DET_CONSTANT_CE, DET_CONSTANT)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(arr, dtype=float))
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class VarModel:
    """A fitted (or hand-specified) linear VAR(p)."""

    k: int
    p: int
    intercept: np.ndarray
    lag_coefficients: np.ndarray            # (p, k, k); row i of matrix j: eq i, lag of var j
    residual_covariance: np.ndarray         # (k, k)
    sample_size: int = 0
    log_likelihood: float = math.nan
    names: tuple[str, ...] = ()
    intercept_se: np.ndarray | None = None
    lag_coefficient_se: np.ndarray | None = None

    def __post_init__(self):
        intercept = np.asarray(self.intercept, dtype=float).reshape(self.k)
        lags = np.asarray(self.lag_coefficients, dtype=float).reshape(self.p, self.k, self.k)
        cov = np.asarray(self.residual_covariance, dtype=float).reshape(self.k, self.k)
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise EstimationError("residual covariance not symmetric")
        eig = np.linalg.eigvalsh(cov)
        if eig.min() < -1e-10:
            raise EstimationError(f"residual covariance not PSD (min eig {eig.min():.2e})")
        names = tuple(self.names) if self.names else tuple(f"y{i+1}" for i in range(self.k))
        if len(names) != self.k:
            raise DataError(f"{len(names)} names for k={self.k}")
        object.__setattr__(self, "intercept", _freeze(intercept))
        object.__setattr__(self, "lag_coefficients", _freeze(lags))
        object.__setattr__(self, "residual_covariance", _freeze(cov))
        object.__setattr__(self, "names", names)
        for f in ("intercept_se", "lag_coefficient_se"):
            v = getattr(self, f)
            if v is not None:
                object.__setattr__(self, f, _freeze(v))

    def companion(self) -> np.ndarray:
        """Companion matrix of the lag polynomial, (k*p, k*p)."""
        if self.p == 0:
            return np.zeros((self.k, self.k))
        kp = self.k * self.p
        F = np.zeros((kp, kp))
        F[: self.k, :] = np.hstack([self.lag_coefficients[i] for i in range(self.p)])
        if self.p > 1:
            F[self.k:, :-self.k] = np.eye(self.k * (self.p - 1))
        return F

    def spectral_radius(self) -> float:
        return float(np.abs(np.linalg.eigvals(self.companion())).max())

    def to_dict(self) -> dict:
        d = {
            "type": "var",
            "k": self.k,
            "p": self.p,
            "names": list(self.names),
            "intercept": self.intercept.tolist(),
            "lag_coefficients": self.lag_coefficients.tolist(),
            "residual_covariance": self.residual_covariance.tolist(),
            "sample_size": self.sample_size,
            "log_likelihood": self.log_likelihood,
        }
        if self.intercept_se is not None:
            d["intercept_se"] = self.intercept_se.tolist()
        if self.lag_coefficient_se is not None:
            d["lag_coefficient_se"] = self.lag_coefficient_se.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VarModel":
        return cls(
            k=d["k"], p=d["p"],
            intercept=np.asarray(d["intercept"]),
            lag_coefficients=np.asarray(d["lag_coefficients"]).reshape(d["p"], d["k"], d["k"]),
            residual_covariance=np.asarray(d["residual_covariance"]),
            sample_size=d["sample_size"],
            log_likelihood=d["log_likelihood"],
            names=tuple(d["names"]),
            intercept_se=None if "intercept_se" not in d else np.asarray(d["intercept_se"]),
            lag_coefficient_se=None if "lag_coefficient_se" not in d
            else np.asarray(d["lag_coefficient_se"]),
        )


@dataclass(frozen=True)
class LagSelectionTable:
    """Information criteria per candidate lag, with the minima starred."""

    max_lag: int
    log_likelihood: np.ndarray
    fpe: np.ndarray
    aic: np.ndarray
    sc: np.ndarray
    hq: np.ndarray
    starred: dict[str, int]
    sample_size: int

    CRITERIA = ("fpe", "aic", "sc", "hq")

    def __post_init__(self):
        for f in ("log_likelihood", "fpe", "aic", "sc", "hq"):
            arr = np.asarray(getattr(self, f), dtype=float)
            if arr.shape != (self.max_lag + 1,):
                raise EstimationError(f"lag table column {f} has shape {arr.shape}")
            object.__setattr__(self, f, _freeze(arr))
        if set(self.starred) != set(self.CRITERIA):
            raise EstimationError(f"starred map must cover {self.CRITERIA}")

    def to_dict(self) -> dict:
        return {
            "type": "lag_selection",
            "max_lag": self.max_lag,
            "sample_size": self.sample_size,
            "log_likelihood": self.log_likelihood.tolist(),
            "fpe": self.fpe.tolist(),
            "aic": self.aic.tolist(),
            "sc": self.sc.tolist(),
            "hq": self.hq.tolist(),
            "starred": dict(self.starred),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LagSelectionTable":
        return cls(
            max_lag=d["max_lag"],
            log_likelihood=np.asarray(d["log_likelihood"]),
            fpe=np.asarray(d["fpe"]),
            aic=np.asarray(d["aic"]),
            sc=np.asarray(d["sc"]),
            hq=np.asarray(d["hq"]),
            starred={k: int(v) for k, v in d["starred"].items()},
            sample_size=d["sample_size"],
        )


@dataclass(frozen=True)
class JohansenResult:
    """Trace / max-eigenvalue statistics per cointegration-rank hypothesis."""

    k: int
    p: int
    det_spec: str
    eigenvalues: np.ndarray
    trace_statistics: np.ndarray
    max_eigen_statistics: np.ndarray
    trace_critical_values: tuple[dict[float, float], ...]
    max_eigen_critical_values: tuple[dict[float, float], ...]
    selected_rank: int
    sample_size: int

    def __post_init__(self):
        eig = np.asarray(self.eigenvalues, dtype=float)
        if np.any(eig < 0.0) or np.any(eig >= 1.0):
            raise EstimationError(f"Johansen eigenvalues outside [0, 1): {eig}")
        if np.any(np.diff(eig) > 1e-12):
            raise EstimationError("Johansen eigenvalues must be sorted descending")
        for f in ("eigenvalues", "trace_statistics", "max_eigen_statistics"):
            object.__setattr__(self, f, _freeze(np.asarray(getattr(self, f))))

    def to_dict(self) -> dict:
        enc = lambda cvs: [{f"{lvl:g}": v for lvl, v in sorted(c.items())} for c in cvs]
        return {
            "type": "johansen",
            "k": self.k,
            "p": self.p,
            "det_spec": self.det_spec,
            "eigenvalues": self.eigenvalues.tolist(),
            "trace_statistics": self.trace_statistics.tolist(),
            "max_eigen_statistics": self.max_eigen_statistics.tolist(),
            "trace_critical_values": enc(self.trace_critical_values),
            "max_eigen_critical_values": enc(self.max_eigen_critical_values),
            "selected_rank": self.selected_rank,
            "sample_size": self.sample_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "JohansenResult":
        dec = lambda cvs: tuple({float(k): v for k, v in c.items()} for c in cvs)
        return cls(
            k=d["k"], p=d["p"], det_spec=d["det_spec"],
            eigenvalues=np.asarray(d["eigenvalues"]),
            trace_statistics=np.asarray(d["trace_statistics"]),
            max_eigen_statistics=np.asarray(d["max_eigen_statistics"]),
            trace_critical_values=dec(d["trace_critical_values"]),
            max_eigen_critical_values=dec(d["max_eigen_critical_values"]),
            selected_rank=d["selected_rank"],
            sample_size=d["sample_size"],
        )


@dataclass(frozen=True)
class IrfResult:
    """Impulse responses: responses[h][i, j] = variable i at horizon h to shock j."""

    horizon: int
    responses: np.ndarray                   # (horizon + 1, k, k)
    shock_type: str
    names: tuple[str, ...]
    ordering_note: str = ""
    stable: bool = True

    def __post_init__(self):
        arr = np.asarray(self.responses, dtype=float)
        k = arr.shape[-1]
        if arr.shape != (self.horizon + 1, k, k):
            raise EstimationError(f"responses shape {arr.shape} for horizon {self.horizon}")
        if self.shock_type not in _SHOCKS:
            raise DataError(f"shock type must be one of {_SHOCKS}")
        object.__setattr__(self, "responses", _freeze(arr))
        object.__setattr__(self, "names", tuple(self.names))

    def to_dict(self) -> dict:
        return {
            "type": "irf",
            "horizon": self.horizon,
            "shock_type": self.shock_type,
            "names": list(self.names),
            "responses": self.responses.tolist(),
            "ordering_note": self.ordering_note,
            "stable": self.stable,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IrfResult":
        return cls(
            horizon=d["horizon"],
            responses=np.asarray(d["responses"]),
            shock_type=d["shock_type"],
            names=tuple(d["names"]),
            ordering_note=d.get("ordering_note", ""),
            stable=d.get("stable", True),
        )


def _design(values: np.ndarray, p: int):
    """Stack [1, y_{t-1}, ..., y_{t-p}] regressor rows for t = p..T-1."""
    T, k = values.shape
    rows = T - p
    X = np.ones((rows, 1 + k * p))
    for i in range(1, p + 1):
        X[:, 1 + (i - 1) * k: 1 + i * k] = values[p - i: T - i]
    Y = values[p:]
    return X, Y


def _regressor_names(names: tuple[str, ...], p: int) -> list[str]:
    out = ["const"]
    for i in range(1, p + 1):
        out.extend(f"{n}.l{i}" for n in names)
    return out


def gaussian_log_likelihood(resid: np.ndarray, cov: np.ndarray) -> float:
    """Sum of multivariate-normal log densities of the residual rows."""
    n, k = resid.shape
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise EstimationError("residual covariance not positive definite")
    solve = np.linalg.solve(cov, resid.T)
    quad = float(np.einsum("ij,ji->", resid, solve))
    return -0.5 * (n * k * math.log(2.0 * math.pi) + n * logdet + quad)


def fit_var(data: TimeSeries, p: int) -> VarModel:
    """Equation-by-equation least squares VAR(p) with Gaussian log-likelihood.

    The residual covariance uses the maximum-likelihood divisor (the T - p
    effective sample size, no degrees-of-freedom correction).
    """
    if data.has_missing():
        raise DataError("VAR estimation requires complete data")
    T, k = data.values.shape
    if p < 0:
        raise DataError("lag order must be nonnegative")
    if T <= k * p + k + 10:
        raise DataError(f"sample too small: T={T} needs more than {k * p + k + 10} rows "
                        f"for k={k}, p={p}")
    X, Y = _design(data.values, p)
    rank = np.linalg.matrix_rank(X)
    if rank < X.shape[1]:
        rnames = _regressor_names(data.names, p)
        _, _, vt = np.linalg.svd(X, full_matrices=False)
        null = np.abs(vt[-1])
        involved = [rnames[j] for j in np.flatnonzero(null > 1e-8 * null.max())]
        raise EstimationError(f"rank-deficient regressor matrix; collinear columns: {involved}")
    beta, _, _, _ = np.linalg.lstsq(X, Y, rcond=None)
    resid = Y - X @ beta
    n = Y.shape[0]
    cov = resid.T @ resid / n
    cov = (cov + cov.T) / 2.0
    loglik = gaussian_log_likelihood(resid, cov)
    # classic OLS standard errors (per equation, dof-corrected)
    xtx_inv = np.linalg.inv(X.T @ X)
    dof = max(n - X.shape[1], 1)
    sigma2 = (resid**2).sum(axis=0) / dof
    se = np.sqrt(np.outer(np.diag(xtx_inv), sigma2))   # (regressors, k)
    intercept = beta[0]
    lag_mats = np.stack([beta[1 + (i - 1) * k: 1 + i * k].T for i in range(1, p + 1)]) \
        if p > 0 else np.zeros((0, k, k))
    se_int = se[0]
    se_lags = np.stack([se[1 + (i - 1) * k: 1 + i * k].T for i in range(1, p + 1)]) \
        if p > 0 else np.zeros((0, k, k))
    return VarModel(
        k=k, p=p, intercept=intercept, lag_coefficients=lag_mats,
        residual_covariance=cov, sample_size=n, log_likelihood=loglik,
        names=data.names, intercept_se=se_int, lag_coefficient_se=se_lags,
    )


def lag_selection(data: TimeSeries, max_lag: int) -> LagSelectionTable:
    """Fit lags 0..max_lag on the common sample and tabulate LogL/FPE/AIC/SC/HQ.

    AIC = (-2 lnL + 2m) / T, SC and HQ swap the penalty for m ln(T) and
    2 m ln(ln T), FPE = |Sigma| ((T + n*)/(T - n*))^k with n* regressors per
    equation; m counts every estimated coefficient, T is the common sample.
    """
    if data.has_missing():
        raise DataError("lag selection requires complete data")
    T, k = data.values.shape
    if max_lag < 0:
        raise DataError("max_lag must be nonnegative")
    if T <= k * max_lag + k + 10:
        raise DataError(f"sample too small: T={T} rows cannot support max_lag={max_lag} "
                        f"with k={k} series")
    n = T - max_lag
    cols = {"log_likelihood": [], "fpe": [], "aic": [], "sc": [], "hq": []}
    for p in range(max_lag + 1):
        X, Y = _design(data.values[max_lag - p:], p)
        beta, _, rank, _ = np.linalg.lstsq(X, Y, rcond=None)
        if rank < X.shape[1]:
            raise EstimationError(f"rank-deficient regression at lag {p}")
        resid = Y - X @ beta
        cov = resid.T @ resid / n
        cov = (cov + cov.T) / 2.0
        ll = gaussian_log_likelihood(resid, cov)
        m = k * (k * p + 1)
        nstar = k * p + 1
        sign, logdet = np.linalg.slogdet(cov)
        det = sign * math.exp(logdet)
        cols["log_likelihood"].append(ll)
        cols["aic"].append((-2.0 * ll + 2.0 * m) / n)
        cols["sc"].append((-2.0 * ll + m * math.log(n)) / n)
        cols["hq"].append((-2.0 * ll + 2.0 * m * math.log(math.log(n))) / n)
        if n - nstar <= 0:
            raise DataError(f"FPE undefined at lag {p}: T - n* = {n - nstar}")
        cols["fpe"].append(det * ((n + nstar) / (n - nstar)) ** k)
    starred = {c: int(np.argmin(cols[c])) for c in LagSelectionTable.CRITERIA}
    return LagSelectionTable(
        max_lag=max_lag,
        log_likelihood=np.array(cols["log_likelihood"]),
        fpe=np.array(cols["fpe"]),
        aic=np.array(cols["aic"]),
        sc=np.array(cols["sc"]),
        hq=np.array(cols["hq"]),
        starred=starred,
        sample_size=n,
    )


def _partial_out(target: np.ndarray, regressors: np.ndarray) -> np.ndarray:
    if regressors.shape[1] == 0:
        return target
    coef, _, _, _ = np.linalg.lstsq(regressors, target, rcond=None)
    return target - regressors @ coef


def johansen_test(data: TimeSeries, p: int, det_spec: str = DET_CONSTANT) -> JohansenResult:
    """Johansen reduced-rank cointegration test on a k-variate level series.

    ``p`` is the VAR order in levels, so p - 1 lagged differences enter the
    auxiliary regressions.  ``det_spec``: "constant" puts an unrestricted
    constant in the short-run dynamics (default), "constant-in-CE" restricts
    it to the cointegrating relation, "none" has no deterministic terms.
    The selected rank is the smallest r whose trace null is not rejected at
    the 5% level.
    """
    if data.has_missing():
        raise DataError("Johansen test requires complete data")
    if det_spec not in _DET_SPECS:
        raise DataError(f"unknown det_spec {det_spec!r} (one of {_DET_SPECS})")
    T, k = data.values.shape
    if k < 2:
        raise DataError("Johansen test needs at least two series")
    if p < 1:
        raise DataError("Johansen lag order must be at least 1")
    if T <= k * p + 20:
        raise DataError(f"sample too small: T={T} for k={k}, p={p}")
    if k > _tables.JOHANSEN_MAX_DIM:
        raise DataError(f"critical values embedded up to k={_tables.JOHANSEN_MAX_DIM}")

    y = data.values
    dy = np.diff(y, axis=0)                       # rows 1..T-1
    z0 = dy[p - 1:]                               # Delta y_t, t = p..T-1
    n = z0.shape[0]
    lag_blocks = [dy[p - 1 - i: len(dy) - i] for i in range(1, p)]
    z2 = np.hstack(lag_blocks) if lag_blocks else np.empty((n, 0))
    if det_spec == DET_CONSTANT:
        z2 = np.hstack([z2, np.ones((n, 1))])
    z1 = y[p - 1: T - 1]                          # y_{t-1}
    if det_spec == DET_CONSTANT_CE:
        z1 = np.hstack([z1, np.ones((n, 1))])

    r0 = _partial_out(z0, z2)
    r1 = _partial_out(z1, z2)
    s00 = r0.T @ r0 / n
    s11 = r1.T @ r1 / n
    s01 = r0.T @ r1 / n
    try:
        L = np.linalg.cholesky(s11)
        s00_inv = np.linalg.inv(s00)
    except np.linalg.LinAlgError as exc:
        raise EstimationError(f"singular moment matrix in Johansen test: {exc}") from None
    Li = np.linalg.inv(L)
    M = Li @ s01.T @ s00_inv @ s01 @ Li.T
    M = (M + M.T) / 2.0
    lam = np.sort(np.linalg.eigvalsh(M))[::-1][:k]
    lam = np.clip(lam, 0.0, 1.0 - 1e-15)

    log1m = np.log(1.0 - lam)
    trace = np.array([-n * log1m[r:].sum() for r in range(k)])
    maxeig = np.array([-n * log1m[r] for r in range(k)])
    trace_cv = tuple(_tables.johansen_critical_values(k - r, det_spec, "trace")
                     for r in range(k))
    maxeig_cv = tuple(_tables.johansen_critical_values(k - r, det_spec, "maxeig")
                      for r in range(k))
    selected = k
    for r in range(k):
        if trace[r] < trace_cv[r][0.05]:
            selected = r
            break
    return JohansenResult(
        k=k, p=p, det_spec=det_spec, eigenvalues=lam,
        trace_statistics=trace, max_eigen_statistics=maxeig,
        trace_critical_values=trace_cv, max_eigen_critical_values=maxeig_cv,
        selected_rank=selected, sample_size=n,
    )


def irf_from_coefficients(
    lag_coefficients: np.ndarray,
    covariance: np.ndarray,
    horizon: int,
    shock_type: str = SHOCK_UNIT,
    names: tuple[str, ...] = (),
) -> IrfResult:
    """Impulse responses from raw lag matrices via companion-matrix powers."""
    lag_coefficients = np.asarray(lag_coefficients, dtype=float)
    if lag_coefficients.ndim != 3:
        raise DataError("lag coefficients must have shape (p, k, k)")
    p, k, _ = lag_coefficients.shape
    if horizon < 0:
        raise DataError("horizon must be nonnegative")
    if shock_type not in _SHOCKS:
        raise DataError(f"shock type must be one of {_SHOCKS}")
    names = tuple(names) if names else tuple(f"y{i+1}" for i in range(k))

    if shock_type == SHOCK_ORTHOGONAL:
        try:
            impact = np.linalg.cholesky(np.asarray(covariance, dtype=float))
        except np.linalg.LinAlgError:
            raise EstimationError(
                "orthogonalized shocks need a positive-definite residual covariance"
            ) from None
        note = f"Cholesky ordering follows column order: {', '.join(names)}"
    else:
        impact = np.eye(k)
        note = ""

    kp = max(k * p, k)
    F = np.zeros((kp, kp))
    if p > 0:
        F[:k, : k * p] = np.hstack(list(lag_coefficients))
        if p > 1:
            F[k:k * p, : k * (p - 1)] = np.eye(k * (p - 1))
    responses = np.empty((horizon + 1, k, k))
    power = np.eye(kp)
    for h in range(horizon + 1):
        responses[h] = power[:k, :k] @ impact
        power = F @ power
    stable = bool(np.abs(np.linalg.eigvals(F)).max() < 1.0)
    return IrfResult(horizon=horizon, responses=responses, shock_type=shock_type,
                     names=names, ordering_note=note, stable=stable)


def irf(model: VarModel, horizon: int, shock_type: str = SHOCK_UNIT) -> IrfResult:
    """Impulse responses of a fitted VAR; one-unit or orthogonalized shocks."""
    return irf_from_coefficients(
        model.lag_coefficients, model.residual_covariance, horizon,
        shock_type=shock_type, names=model.names,
    )
