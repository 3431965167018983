"""Markov-switching VAR modeling.

The observation equation is

    x_t = a(s_t) + sum_i B_i(s_t) x_{t-i} + C(s_t) u_t        (intercept form)
    x_t = m(s_t) + sum_i B_i(s_t) (x_{t-i} - m(s_{t-i})) + C(s_t) u_t   (mean form)

with s_t an r-state first-order Markov chain.  Mean switching makes the
conditional density depend on the q lagged regimes as well, so the filter
runs on the extended state (s_t, ..., s_{t-q}) of size r^(q+1) and reports
probabilities marginalized to the current regime; intercept switching only
needs the r current-regime states.

Estimation is EM: the Hamilton filter and Kim smoother supply regime
probabilities and pairwise transition weights, the M-step solves weighted
least-squares blocks for means/intercepts and autoregressive matrices,
weighted covariances per regime, and row-normalized expected transition
counts.  Regimes are relabeled to ascending covariance trace after fitting,
so "regime 1" is deterministically the low-volatility one.
"""

from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError, DivergenceWarning, EstimationError
from .timeseries import TimeSeries
from .var import IrfResult, irf_from_coefficients

SWITCH_MEAN = "mean"
SWITCH_INTERCEPT = "intercept"

_TRANSITION_FLOOR = 1e-6


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(arr, dtype=float))
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class MsVarSpec:
    """Model shape: dimensions plus which parameter blocks switch."""

    k: int
    q: int
    r: int
    switch_target: str = SWITCH_MEAN
    switch_variance: bool = True
    switch_ar: bool = False

    def __post_init__(self):
        if self.r < 2:
            raise DataError(f"Markov switching requires r >= 2 regimes, got {self.r}")
        if self.q < 0 or self.k < 1:
            raise DataError(f"invalid dimensions k={self.k}, q={self.q}")
        if self.switch_target not in (SWITCH_MEAN, SWITCH_INTERCEPT):
            raise DataError(f"switch_target must be {SWITCH_MEAN!r} or {SWITCH_INTERCEPT!r}")

    @property
    def mean_switching(self) -> bool:
        return self.switch_target == SWITCH_MEAN

    def composite_states(self) -> tuple[tuple[int, ...], ...]:
        """Filter state labels: (s_t, ..., s_{t-q}) tuples for mean switching
        with q >= 1, plain (s_t,) otherwise."""
        depth = self.q + 1 if (self.mean_switching and self.q > 0) else 1
        return tuple(itertools.product(range(self.r), repeat=depth))

    @property
    def n_states(self) -> int:
        return len(self.composite_states())

    def to_dict(self) -> dict:
        return {
            "k": self.k, "q": self.q, "r": self.r,
            "switch_target": self.switch_target,
            "switch_variance": self.switch_variance,
            "switch_ar": self.switch_ar,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MsVarSpec":
        return cls(k=d["k"], q=d["q"], r=d["r"], switch_target=d["switch_target"],
                   switch_variance=d["switch_variance"], switch_ar=d["switch_ar"])


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic regime transition probabilities; probs[j, i] = P(j -> i)."""

    probs: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.probs, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise DataError(f"transition matrix must be square, got {P.shape}")
        if (P < 0).any() or (P > 1).any():
            raise DataError("transition probabilities must lie in [0, 1]")
        rows = P.sum(axis=1)
        if np.abs(rows - 1.0).max() > 1e-12:
            raise DataError(f"transition rows must sum to 1 (got {rows})")
        object.__setattr__(self, "probs", _freeze(P))

    @property
    def r(self) -> int:
        return self.probs.shape[0]

    def to_dict(self) -> dict:
        return {"probs": self.probs.tolist()}


def ergodic_distribution(transitions: TransitionMatrix | np.ndarray) -> np.ndarray:
    """Stationary distribution pi with pi P = pi, via the unit-eigenvector solve.

    Requires an irreducible aperiodic chain; reducible or periodic matrices
    are rejected.
    """
    P = transitions.probs if isinstance(transitions, TransitionMatrix) else \
        TransitionMatrix(transitions).probs
    r = P.shape[0]
    power = np.linalg.matrix_power(P, (r - 1) ** 2 + 1)
    if (power <= 0.0).any():
        raise EstimationError("chain is reducible or periodic; no ergodic distribution")
    A = np.vstack([P.T - np.eye(r), np.ones((1, r))])
    b = np.zeros(r + 1)
    b[-1] = 1.0
    pi, _, _, _ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def expected_duration(transitions: TransitionMatrix | np.ndarray) -> np.ndarray:
    """Mean sojourn length per regime, 1 / (1 - p_ii)."""
    P = transitions.probs if isinstance(transitions, TransitionMatrix) else \
        TransitionMatrix(transitions).probs
    diag = np.diag(P)
    if (diag >= 1.0).any():
        raise EstimationError(f"absorbing state: diagonal {diag}")
    return 1.0 / (1.0 - diag)


@dataclass(frozen=True)
class MsVarModel:
    """Parameters of a Markov-switching VAR.

    ``means`` holds regime means (mean form) or intercepts (intercept form),
    shape (r, k).  ``ar_coefficients`` is (r, q, k, k) and ``covariances``
    (r, k, k); a block whose switching flag is off has its slices tied
    (identical across regimes).
    """

    spec: MsVarSpec
    means: np.ndarray
    ar_coefficients: np.ndarray
    covariances: np.ndarray
    transitions: TransitionMatrix
    log_likelihood: float = math.nan
    names: tuple[str, ...] = ()

    def __post_init__(self):
        s = self.spec
        means = np.asarray(self.means, dtype=float).reshape(s.r, s.k)
        ar = np.asarray(self.ar_coefficients, dtype=float)
        if ar.size == s.q * s.k * s.k:                      # shared block given once
            ar = np.broadcast_to(ar.reshape(s.q, s.k, s.k), (s.r, s.q, s.k, s.k)).copy()
        ar = ar.reshape(s.r, s.q, s.k, s.k)
        cov = np.asarray(self.covariances, dtype=float)
        if cov.size == s.k * s.k:
            cov = np.broadcast_to(cov.reshape(s.k, s.k), (s.r, s.k, s.k)).copy()
        cov = cov.reshape(s.r, s.k, s.k)
        if self.transitions.r != s.r:
            raise DataError(f"transition matrix is {self.transitions.r}x{self.transitions.r} "
                            f"for r={s.r}")
        if not s.switch_ar and s.q > 0 and not all(
                np.array_equal(ar[m], ar[0]) for m in range(s.r)):
            raise DataError("spec ties AR coefficients across regimes but they differ")
        if not s.switch_variance and not all(
                np.array_equal(cov[m], cov[0]) for m in range(s.r)):
            raise DataError("spec ties covariances across regimes but they differ")
        for m in range(s.r):
            c = cov[m]
            if not np.allclose(c, c.T, atol=1e-12):
                raise EstimationError(f"regime {m + 1} covariance not symmetric")
            if np.linalg.eigvalsh(c).min() <= 0.0:
                raise EstimationError(f"regime {m + 1} covariance not positive definite")
        names = tuple(self.names) if self.names else tuple(f"y{i+1}" for i in range(s.k))
        if len(names) != s.k:
            raise DataError(f"{len(names)} names for k={s.k}")
        object.__setattr__(self, "means", _freeze(means))
        object.__setattr__(self, "ar_coefficients", _freeze(ar))
        object.__setattr__(self, "covariances", _freeze(cov))
        object.__setattr__(self, "names", names)

    def sigmas(self) -> np.ndarray:
        """Per-regime, per-equation residual standard deviations, (r, k)."""
        return np.sqrt(np.stack([np.diag(self.covariances[m]) for m in range(self.spec.r)]))

    def to_dict(self) -> dict:
        return {
            "format": "regimevar-model",
            "version": 1,
            "type": "msvar",
            "spec": self.spec.to_dict(),
            "names": list(self.names),
            "means": self.means.tolist(),
            "ar_coefficients": self.ar_coefficients.tolist(),
            "covariances": self.covariances.tolist(),
            "transitions": self.transitions.probs.tolist(),
            "log_likelihood": self.log_likelihood,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MsVarModel":
        if d.get("format") != "regimevar-model":
            raise DataError("not a regimevar model document")
        if d.get("version") != 1:
            raise DataError(f"unsupported model version {d.get('version')}")
        spec = MsVarSpec.from_dict(d["spec"])
        return cls(
            spec=spec,
            means=np.asarray(d["means"]),
            ar_coefficients=np.asarray(d["ar_coefficients"]).reshape(
                spec.r, spec.q, spec.k, spec.k),
            covariances=np.asarray(d["covariances"]).reshape(spec.r, spec.k, spec.k),
            transitions=TransitionMatrix(np.asarray(d["transitions"])),
            log_likelihood=d["log_likelihood"],
            names=tuple(d["names"]),
        )


@dataclass(frozen=True)
class FilterOutput:
    """Regime probabilities from the Hamilton filter (and Kim smoother).

    Rows cover the effective sample t = q..T-1.  Columns are the filter's
    composite states; ``marginal_*`` collapse them to the r current regimes.
    """

    states: tuple[tuple[int, ...], ...]
    r: int
    timestamps: np.ndarray
    predicted: np.ndarray
    filtered: np.ndarray
    log_likelihood: float
    smoothed: np.ndarray | None = None

    def __post_init__(self):
        if not math.isfinite(self.log_likelihood):
            raise EstimationError("filter log-likelihood is not finite")
        for f in ("predicted", "filtered", "smoothed"):
            v = getattr(self, f)
            if v is not None:
                object.__setattr__(self, f, _freeze(v))

    def __len__(self) -> int:
        return self.filtered.shape[0]

    def _marginalize(self, probs: np.ndarray) -> np.ndarray:
        out = np.zeros((probs.shape[0], self.r))
        for a, state in enumerate(self.states):
            out[:, state[0]] += probs[:, a]
        return out

    @property
    def marginal_predicted(self) -> np.ndarray:
        return self._marginalize(self.predicted)

    @property
    def marginal_filtered(self) -> np.ndarray:
        return self._marginalize(self.filtered)

    @property
    def marginal_smoothed(self) -> np.ndarray | None:
        return None if self.smoothed is None else self._marginalize(self.smoothed)

    @property
    def regime_path(self) -> np.ndarray:
        probs = self.marginal_smoothed if self.smoothed is not None else self.marginal_filtered
        return np.argmax(probs, axis=1)


def _composite_transition(P: np.ndarray, states) -> np.ndarray:
    R = len(states)
    out = np.zeros((R, R))
    for a, sa in enumerate(states):
        for b, sb in enumerate(states):
            if sb[1:] == sa[:-1]:
                out[a, b] = P[sa[0], sb[0]]
    return out


def _initial_distribution(P: np.ndarray, states, r: int) -> np.ndarray:
    """Stationary joint distribution of (s_t, ..., s_{t-q}); uniform marginal
    fallback when the chain has no ergodic distribution."""
    try:
        pi = ergodic_distribution(P)
    except EstimationError:
        pi = np.full(r, 1.0 / r)
    dist = np.empty(len(states))
    for a, s in enumerate(states):
        p = pi[s[-1]]
        for i in range(len(s) - 1, 0, -1):
            p *= P[s[i], s[i - 1]]
        dist[a] = p
    total = dist.sum()
    if total <= 0.0:
        dist = np.full(len(states), 1.0 / len(states))
    else:
        dist = dist / total
    return dist


def _lag_matrix(values: np.ndarray, q: int) -> np.ndarray:
    """Z[t] = (x_{t-1}, ..., x_{t-q}) stacked, rows for t = q..T-1; (T-q, k*q)."""
    T, k = values.shape
    if q == 0:
        return np.empty((T, 0))
    cols = [values[q - i: T - i] for i in range(1, q + 1)]
    return np.hstack(cols)


def _conditional_means(model: MsVarModel, values: np.ndarray) -> np.ndarray:
    """Conditional mean of x_t per composite state; (T-q, n_states, k)."""
    s = model.spec
    T, k = values.shape
    states = s.composite_states()
    Z = _lag_matrix(values, s.q)
    n = T - s.q
    # lag contribution per current regime: sum_i x_{t-i} B_i'
    lagterm = np.zeros((s.r, n, k))
    for m in range(s.r):
        for i in range(s.q):
            lagterm[m] += Z[:, i * k:(i + 1) * k] @ model.ar_coefficients[m, i].T
    means = np.empty((n, len(states), k))
    for a, state in enumerate(states):
        j0 = state[0]
        if s.mean_switching:
            adj = model.means[j0].copy()
            for i in range(1, len(state)):
                adj -= model.ar_coefficients[j0, i - 1] @ model.means[state[i]]
            means[:, a, :] = lagterm[j0] + adj
        else:
            means[:, a, :] = lagterm[j0] + model.means[j0]
    return means


def _log_density_factors(model: MsVarModel):
    """Cholesky factor and log-determinant per regime."""
    chols, logdets = [], []
    for m in range(model.spec.r):
        try:
            L = np.linalg.cholesky(model.covariances[m])
        except np.linalg.LinAlgError:
            raise EstimationError(f"regime {m + 1} covariance not positive definite") from None
        chols.append(L)
        logdets.append(2.0 * float(np.log(np.diag(L)).sum()))
    return chols, logdets


def _log_densities(model: MsVarModel, values: np.ndarray) -> np.ndarray:
    """log p(x_t | state, history) for every t and composite state; (T-q, n_states)."""
    s = model.spec
    states = s.composite_states()
    means = _conditional_means(model, values)
    Y = values[s.q:]
    chols, logdets = _log_density_factors(model)
    const = s.k * math.log(2.0 * math.pi)
    out = np.empty((Y.shape[0], len(states)))
    for a, state in enumerate(states):
        j0 = state[0]
        resid = Y - means[:, a, :]
        z = np.linalg.solve(chols[j0], resid.T)
        quad = np.einsum("ij,ij->j", z, z)
        out[:, a] = -0.5 * (const + logdets[j0] + quad)
    return out


def conditional_density(model: MsVarModel, regime, x_t, history=None) -> float:
    """Log density of one observation given a regime and q lagged observations.

    ``regime`` is a current-regime index, or a (q+1)-tuple of regime indices
    (current first) when mean switching makes lagged regimes matter; a bare
    index means every lag shares the current regime.  ``history`` lists the
    q most recent observations, most recent first.
    """
    s = model.spec
    x_t = np.asarray(x_t, dtype=float).reshape(s.k)
    history = np.zeros((0, s.k)) if history is None else \
        np.asarray(history, dtype=float).reshape(-1, s.k)
    if history.shape[0] < s.q:
        raise DataError(f"history supplies {history.shape[0]} lags, need q={s.q}")
    if isinstance(regime, (tuple, list)):
        state = tuple(int(j) for j in regime)
    else:
        depth = s.q + 1 if (s.mean_switching and s.q > 0) else 1
        state = (int(regime),) * depth
    for j in state:
        if not 0 <= j < s.r:
            raise DataError(f"regime index {j} outside 0..{s.r - 1}")
    j0 = state[0]
    mean = model.means[j0].copy()
    for i in range(1, s.q + 1):
        lag_regime = state[i] if i < len(state) else j0
        if s.mean_switching:
            mean += model.ar_coefficients[j0, i - 1] @ (history[i - 1] - model.means[lag_regime])
        else:
            mean += model.ar_coefficients[j0, i - 1] @ history[i - 1]
    chols, logdets = _log_density_factors(model)
    resid = x_t - mean
    z = np.linalg.solve(chols[j0], resid)
    return float(-0.5 * (s.k * math.log(2.0 * math.pi) + logdets[j0] + z @ z))


def hamilton_filter(model: MsVarModel, data: TimeSeries) -> FilterOutput:
    """Forward recursion: predict with the transition matrix, update by Bayes.

    The initial state distribution is the ergodic distribution of the chain
    (stationary joint for composite states); per-step normalizers accumulate
    the log-likelihood so densities never leave log space un-normalized.
    """
    s = model.spec
    if data.values.shape[1] != s.k:
        raise DataError(f"model is k={s.k} but data has {data.values.shape[1]} columns")
    if data.has_missing():
        raise DataError("filtering requires complete data")
    T = data.values.shape[0]
    if T <= s.q:
        raise DataError(f"need more than q={s.q} observations, got {T}")
    states = s.composite_states()
    P = model.transitions.probs
    Pstar = _composite_transition(P, states)
    logdens = _log_densities(model, data.values)
    n, R = logdens.shape
    shift = logdens.max(axis=1)
    if not np.isfinite(shift).all():
        t_bad = int(np.flatnonzero(~np.isfinite(shift))[0])
        if shift[t_bad] == -math.inf:
            raise EstimationError(
                f"all regimes have zero density at t={t_bad + s.q} (numeric underflow)"
            )
        raise EstimationError(f"non-finite density at t={t_bad + s.q}")
    edens = np.exp(logdens - shift[:, None])

    predicted = np.empty((n, R))
    filtered = np.empty((n, R))
    pred = _initial_distribution(P, states, s.r)
    loglik = 0.0
    for t in range(n):
        predicted[t] = pred
        w = pred * edens[t]
        c = w.sum()
        if not (c > 0.0) or not math.isfinite(c):
            raise EstimationError(
                f"all regimes have zero density at t={t + s.q} (numeric underflow)"
            )
        filtered[t] = w / c
        loglik += math.log(c) + shift[t]
        pred = filtered[t] @ Pstar
    return FilterOutput(
        states=states, r=s.r, timestamps=data.timestamps[s.q:],
        predicted=predicted, filtered=filtered, log_likelihood=loglik,
    )


def kim_smoother(filter_output: FilterOutput, transitions: TransitionMatrix) -> FilterOutput:
    """Backward recursion filling P(state_t | full sample); smoothed_T = filtered_T."""
    Pstar = _composite_transition(transitions.probs, filter_output.states)
    filt = filter_output.filtered
    pred = filter_output.predicted
    n, R = filt.shape
    sm = np.empty((n, R))
    sm[n - 1] = filt[n - 1]
    for t in range(n - 2, -1, -1):
        ratio = sm[t + 1] / np.maximum(pred[t + 1], 1e-300)
        sm[t] = filt[t] * (Pstar @ ratio)
    return replace(filter_output, smoothed=sm)


def _pairwise_regime_counts(filter_output: FilterOutput, transitions: TransitionMatrix) -> np.ndarray:
    """Expected underlying-transition counts n[j, i] from smoothed pairs."""
    if filter_output.smoothed is None:
        raise EstimationError("pairwise counts need smoothed probabilities")
    states = filter_output.states
    Pstar = _composite_transition(transitions.probs, states)
    filt, pred, sm = filter_output.filtered, filter_output.predicted, filter_output.smoothed
    ratio = sm[1:] / np.maximum(pred[1:], 1e-300)          # (n-1, R)
    pair_sum = np.einsum("ta,ab,tb->ab", filt[:-1], Pstar, ratio)
    r = filter_output.r
    cur = np.zeros((len(states), r))
    for a, state in enumerate(states):
        cur[a, state[0]] = 1.0
    return cur.T @ pair_sum @ cur


def regime_irf(model: MsVarModel, regime: int, horizon: int,
               shock_type: str = "one-unit") -> IrfResult:
    """Impulse responses under the counterfactual that the chain stays in
    ``regime`` at every horizon, using that regime's AR matrices and
    covariance.  Unstable regime dynamics are reported with a warning."""
    s = model.spec
    if not 0 <= regime < s.r:
        raise DataError(f"regime index {regime} outside 0..{s.r - 1}")
    result = irf_from_coefficients(
        model.ar_coefficients[regime], model.covariances[regime], horizon,
        shock_type=shock_type, names=model.names,
    )
    if not result.stable:
        warnings.warn(
            f"regime {regime + 1} dynamics are unstable; responses diverge",
            DivergenceWarning, stacklevel=2,
        )
    return result


# --------------------------------------------------------------------------
# EM estimation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RestartReport:
    index: int
    status: str                 # converged | max-iter | stalled | abandoned
    iterations: int
    log_likelihood: float
    message: str = ""


@dataclass(frozen=True)
class EmFitResult:
    model: MsVarModel
    filter_output: FilterOutput
    log_likelihood_path: tuple[float, ...]
    converged: bool
    iterations: int
    restarts: tuple[RestartReport, ...]


def _rolling_volatility(resid: np.ndarray, window: int) -> np.ndarray:
    mag = np.sqrt((resid**2).sum(axis=1))
    n = len(mag)
    out = np.empty(n)
    c = np.concatenate([[0.0], np.cumsum(mag**2)])
    for t in range(n):
        lo = max(0, t - window + 1)
        out[t] = math.sqrt((c[t + 1] - c[lo]) / (t + 1 - lo))
    return out


def _kmeans_1d(x: np.ndarray, r: int, iters: int = 50) -> np.ndarray:
    """Deterministic 1-D Lloyd clustering seeded at quantiles; returns labels
    sorted so cluster 0 has the smallest center."""
    centers = np.quantile(x, (np.arange(r) + 0.5) / r)
    for _ in range(iters):
        labels = np.argmin(np.abs(x[:, None] - centers[None, :]), axis=1)
        new = centers.copy()
        for m in range(r):
            if (labels == m).any():
                new[m] = x[labels == m].mean()
        if np.allclose(new, centers):
            break
        centers = new
    order = np.argsort(centers)
    remap = np.empty(r, dtype=int)
    remap[order] = np.arange(r)
    return remap[labels]


def _linear_var_start(values: np.ndarray, q: int):
    """Shared-AR starting point: OLS fit of the linear VAR(q)."""
    T, k = values.shape
    Z = _lag_matrix(values, q)
    X = np.hstack([np.ones((T - q, 1)), Z])
    Y = values[q:]
    beta, _, rank, _ = np.linalg.lstsq(X, Y, rcond=None)
    if rank < X.shape[1]:
        raise EstimationError("rank-deficient starting regression; collinear series?")
    resid = Y - X @ beta
    B = np.stack([beta[1 + i * k: 1 + (i + 1) * k].T for i in range(q)]) \
        if q > 0 else np.zeros((0, k, k))
    return B, resid


def _initial_model(data: TimeSeries, spec: MsVarSpec, rng: np.random.Generator,
                   perturb: bool) -> MsVarModel:
    """Seed EM from a k-means split of rolling residual volatility."""
    values = data.values
    T, k = values.shape
    B0, resid = _linear_var_start(values, spec.q)
    window = min(12, max(4, (T - spec.q) // 10))
    vol = _rolling_volatility(resid, window)
    labels = _kmeans_1d(vol, spec.r)
    Y = values[spec.q:]

    means = np.empty((spec.r, k))
    covs = np.empty((spec.r, k, k))
    overall_cov = resid.T @ resid / len(resid)
    for m in range(spec.r):
        mask = labels == m
        if mask.sum() >= max(3, k + 1):
            means[m] = Y[mask].mean(axis=0)
            seg = resid[mask]
            covs[m] = seg.T @ seg / mask.sum()
        else:
            means[m] = Y.mean(axis=0)
            covs[m] = overall_cov * (0.5 + m)
        covs[m] += np.eye(k) * (1e-8 + 1e-4 * np.trace(overall_cov) / k)
    if perturb:
        scale = np.sqrt(np.diag(overall_cov))
        means = means + rng.standard_normal(means.shape) * 0.25 * scale
        covs = covs * np.exp(rng.standard_normal((spec.r, 1, 1)) * 0.3)
    if not spec.switch_variance:
        covs[:] = covs.mean(axis=0)
    ar = np.broadcast_to(B0, (spec.r, spec.q, k, k)).copy()
    P = np.full((spec.r, spec.r), 0.1 / max(spec.r - 1, 1))
    np.fill_diagonal(P, 0.9)
    return MsVarModel(spec=spec, means=means, ar_coefficients=ar, covariances=covs,
                      transitions=TransitionMatrix(P), names=data.names)


def _clamp_rows(P: np.ndarray) -> np.ndarray:
    P = np.clip(P, _TRANSITION_FLOOR, 1.0 - _TRANSITION_FLOOR)
    return P / P.sum(axis=1, keepdims=True)


def _m_step(model: MsVarModel, data: TimeSeries, smoothed_filter: FilterOutput) -> MsVarModel:
    """One conditional-maximization pass over transitions, means, AR, covariances."""
    s = model.spec
    values = data.values
    k, q, r = s.k, s.q, s.r
    states = smoothed_filter.states
    W = smoothed_filter.smoothed                          # (n, R)
    n = W.shape[0]
    Y = values[q:]
    Z = _lag_matrix(values, q)                            # (n, kq)

    # occupancy guard: a regime carrying less than one observation of weight
    # cannot support its own parameters
    marg = smoothed_filter.marginal_smoothed
    occupancy = marg.sum(axis=0)
    if occupancy.min() < 1.0:
        m = int(np.argmin(occupancy))
        raise EstimationError(
            f"degenerate regime {m + 1}: total smoothed weight {occupancy[m]:.3g} < 1"
        )

    # ---- transitions ----
    counts = _pairwise_regime_counts(smoothed_filter, model.transitions)
    row_sums = counts.sum(axis=1, keepdims=True)
    if (row_sums <= 0.0).any():
        m = int(np.argmin(row_sums[:, 0]))
        raise EstimationError(f"regime {m + 1} never occupied; cannot update transitions")
    P_new = _clamp_rows(counts / row_sums)

    cur_regime = np.array([st[0] for st in states])
    omegas = np.stack([np.linalg.inv(model.covariances[m]) for m in range(r)])
    Wsum = W.sum(axis=0)                                  # per composite state
    WY = W.T @ Y                                          # (R, k)
    WZ = W.T @ Z                                          # (R, kq)

    # lag contribution with the *current* AR matrices, per current regime
    lagterm = np.zeros((r, n, k))
    for m in range(r):
        for i in range(q):
            lagterm[m] += Z[:, i * k:(i + 1) * k] @ model.ar_coefficients[m, i].T

    # ---- means / intercepts (given current AR, covariances) ----
    A = np.zeros((r * k, r * k))
    b = np.zeros(r * k)
    for a, state in enumerate(states):
        j0 = state[0]
        om = omegas[j0]
        C = np.zeros((r, k, k))
        C[j0] += np.eye(k)
        if s.mean_switching:
            for i in range(1, q + 1):
                lag_regime = state[i] if i < len(state) else j0
                C[lag_regime] -= model.ar_coefficients[j0, i - 1]
        target = WY[a] - W[:, a] @ lagterm[j0]            # sum_t w (x_t - d_t)
        for m1 in range(r):
            if not C[m1].any():
                continue
            b[m1 * k:(m1 + 1) * k] += C[m1].T @ om @ target
            for m2 in range(r):
                if not C[m2].any():
                    continue
                A[m1 * k:(m1 + 1) * k, m2 * k:(m2 + 1) * k] += \
                    Wsum[a] * (C[m1].T @ om @ C[m2])
    try:
        theta = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        raise EstimationError("singular mean-update system (degenerate regime?)") from None
    means_new = theta.reshape(r, k)

    # ---- AR matrices (given new means, current covariances) ----
    if q > 0:
        # per-composite-state moments of the (possibly mean-adjusted) lags
        if s.mean_switching:
            M_a = np.empty((len(states), k * q))
            for a, state in enumerate(states):
                parts = []
                for i in range(1, q + 1):
                    lag_regime = state[i] if i < len(state) else state[0]
                    parts.append(means_new[lag_regime])
                M_a[a] = np.concatenate(parts)
        else:
            M_a = np.zeros((len(states), k * q))
        # in both forms the target is x_t net of the current regime's
        # mean/intercept; only the lag adjustment M_a differs
        x_center = np.stack([means_new[j0] for j0 in cur_regime])

        WZZ = np.einsum("ta,ti,tj->aij", W, Z, Z)          # (R, kq, kq)
        WYZ = np.einsum("ta,ti,tj->aij", W, Y, Z)          # (R, k, kq)
        Szz = WZZ - np.einsum("ai,aj->aij", M_a, WZ) - np.einsum("ai,aj->aij", WZ, M_a) \
            + np.einsum("a,ai,aj->aij", Wsum, M_a, M_a)
        Sxz = WYZ - np.einsum("ai,aj->aij", x_center, WZ) - np.einsum("ai,aj->aij", WY, M_a) \
            + np.einsum("a,ai,aj->aij", Wsum, x_center, M_a)

        ar_new = np.empty((r, q, k, k))
        if s.switch_ar:
            for m in range(r):
                sel = cur_regime == m
                szz = Szz[sel].sum(axis=0)
                sxz = Sxz[sel].sum(axis=0)
                try:
                    Bm = np.linalg.solve(szz.T, sxz.T).T   # (k, kq)
                except np.linalg.LinAlgError:
                    raise EstimationError(
                        f"singular AR update for regime {m + 1}"
                    ) from None
                for i in range(q):
                    ar_new[m, i] = Bm[:, i * k:(i + 1) * k]
        else:
            dim = k * q * k
            Abig = np.zeros((dim, dim))
            bbig = np.zeros(dim)
            for a in range(len(states)):
                om = omegas[cur_regime[a]]
                Abig += np.kron(Szz[a], om)
                bbig += (om @ Sxz[a]).reshape(-1, order="F")
            try:
                vecB = np.linalg.solve(Abig, bbig)
            except np.linalg.LinAlgError:
                raise EstimationError("singular shared-AR update") from None
            B = vecB.reshape(k, k * q, order="F")
            for i in range(q):
                ar_new[:, i] = B[:, i * k:(i + 1) * k]
    else:
        ar_new = np.zeros((r, 0, k, k))

    # ---- covariances (given new means and AR) ----
    interim = MsVarModel(
        spec=s, means=means_new, ar_coefficients=ar_new,
        covariances=model.covariances, transitions=TransitionMatrix(P_new),
        names=model.names,
    )
    means_ts = _conditional_means(interim, values)        # (n, R, k)
    resid = Y[:, None, :] - means_ts                      # (n, R, k)
    wrr = np.einsum("ta,tai,taj->aij", W, resid, resid)   # (R, k, k)
    covs_new = np.empty((r, k, k))
    if s.switch_variance:
        for m in range(r):
            sel = cur_regime == m
            total = Wsum[sel].sum()
            cm = wrr[sel].sum(axis=0) / total
            covs_new[m] = (cm + cm.T) / 2.0
    else:
        pooled = wrr.sum(axis=0) / Wsum.sum()
        covs_new[:] = (pooled + pooled.T) / 2.0
    for m in range(r):
        eig = np.linalg.eigvalsh(covs_new[m])
        if eig.min() <= 1e-12 * max(1.0, abs(eig.max())):
            raise EstimationError(
                f"regime {m + 1} covariance collapsed (min eigenvalue {eig.min():.3g})"
            )

    return MsVarModel(
        spec=s, means=means_new, ar_coefficients=ar_new, covariances=covs_new,
        transitions=TransitionMatrix(P_new), names=model.names,
    )


def _blend(old: MsVarModel, new: MsVarModel, lam: float) -> MsVarModel:
    mix = lambda a, b: (1.0 - lam) * a + lam * b
    return MsVarModel(
        spec=old.spec,
        means=mix(old.means, new.means),
        ar_coefficients=mix(old.ar_coefficients, new.ar_coefficients),
        covariances=mix(old.covariances, new.covariances),
        transitions=TransitionMatrix(mix(old.transitions.probs, new.transitions.probs)),
        names=old.names,
    )


def _run_em(data: TimeSeries, model: MsVarModel, tol: float, max_iter: int):
    """EM iterations from one starting point.  Returns (model, history, status)."""
    filt = hamilton_filter(model, data)
    history = [filt.log_likelihood]
    status = "max-iter"
    for _ in range(max_iter):
        sm = kim_smoother(filt, model.transitions)
        candidate = _m_step(model, data, sm)
        cand_filt = hamilton_filter(candidate, data)
        if cand_filt.log_likelihood < history[-1] - 1e-10:
            # The ergodic initial distribution ties the likelihood to the
            # transition matrix in a way the M-step ignores; damp the update
            # until the step is uphill (generalized EM), else stop.
            lam, accepted = 0.5, False
            while lam > 1e-4:
                blended = _blend(model, candidate, lam)
                blended_filt = hamilton_filter(blended, data)
                if blended_filt.log_likelihood >= history[-1] - 1e-12:
                    candidate, cand_filt, accepted = blended, blended_filt, True
                    break
                lam *= 0.5
            if not accepted:
                status = "stalled"
                break
        improvement = cand_filt.log_likelihood - history[-1]
        model, filt = candidate, cand_filt
        history.append(filt.log_likelihood)
        if improvement < tol:
            status = "converged"
            break
    return model, history, status


def _canonical_order(model: MsVarModel) -> MsVarModel:
    """Relabel regimes to ascending covariance trace (ties: ascending first mean)."""
    r = model.spec.r
    keys = [(float(np.trace(model.covariances[m])), float(model.means[m, 0]), m)
            for m in range(r)]
    perm = [m for _, _, m in sorted(keys)]
    if perm == list(range(r)):
        return model
    idx = np.array(perm)
    P = model.transitions.probs[np.ix_(idx, idx)]
    return MsVarModel(
        spec=model.spec,
        means=model.means[idx],
        ar_coefficients=model.ar_coefficients[idx],
        covariances=model.covariances[idx],
        transitions=TransitionMatrix(P),
        log_likelihood=model.log_likelihood,
        names=model.names,
    )


def em_fit(data: TimeSeries, spec: MsVarSpec, tol: float = 1e-6, max_iter: int = 200,
           restarts: int = 5, seed: int = 0, workers: int = 1) -> EmFitResult:
    """Maximum-likelihood fit by EM over ``restarts`` seeded initializations.

    Restarts draw independent substreams from ``seed``; the best final
    log-likelihood wins (ties break on restart index, so the result is
    reproducible).  Non-convergence at max_iter is reported, not discarded;
    a restart whose regimes degenerate is abandoned with its reason recorded.
    """
    if data.has_missing():
        raise DataError("EM estimation requires complete data")
    T, k = data.values.shape
    if k != spec.k:
        raise DataError(f"spec is k={spec.k} but data has {k} columns")
    if T <= spec.q + spec.r * spec.k + 5:
        raise DataError(f"sample too small: T={T} for q={spec.q}, r={spec.r}, k={spec.k}")
    if restarts < 1:
        raise DataError("need at least one restart")

    seeds = np.random.SeedSequence(seed).spawn(restarts)

    def one_restart(i: int):
        rng = np.random.default_rng(seeds[i])
        try:
            start = _initial_model(data, spec, rng, perturb=(i > 0))
            model, history, status = _run_em(data, start, tol, max_iter)
        except EstimationError as exc:
            return RestartReport(i, "abandoned", 0, -math.inf, str(exc)), None, ()
        report = RestartReport(i, status, len(history) - 1, history[-1])
        return report, model, tuple(history)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one_restart, range(restarts)))
    else:
        results = [one_restart(i) for i in range(restarts)]

    reports = tuple(rep for rep, _, _ in results)
    best = None
    for rep, model, history in results:
        if model is None:
            continue
        key = (-rep.log_likelihood, rep.index)
        if best is None or key < best[0]:
            best = (key, model, history, rep)
    if best is None:
        reasons = "; ".join(f"restart {r.index}: {r.message}" for r in reports)
        raise EstimationError(f"all EM restarts degenerated ({reasons})")

    _, model, history, rep = best
    model = _canonical_order(model)
    filt = hamilton_filter(model, data)
    filt = kim_smoother(filt, model.transitions)
    model = replace(model, log_likelihood=filt.log_likelihood)
    return EmFitResult(
        model=model,
        filter_output=filt,
        log_likelihood_path=history,
        converged=(rep.status == "converged"),
        iterations=rep.iterations,
        restarts=reports,
    )


# --------------------------------------------------------------------------
# Wald standard errors from a numerical Hessian
# --------------------------------------------------------------------------

def _pack_parameters(model: MsVarModel):
    """Flatten the free parameters, honoring tied blocks; returns
    (theta, labels, unpack)."""
    s = model.spec
    k, q, r = s.k, s.q, s.r
    names = model.names
    theta, labels = [], []

    for m in range(r):
        for j in range(k):
            theta.append(model.means[m, j])
            kind = "mean" if s.mean_switching else "const"
            labels.append(f"{kind}[regime {m + 1}][{names[j]}]")
    n_ar_blocks = r if s.switch_ar else 1
    for m in range(n_ar_blocks):
        tag = f"regime {m + 1}" if s.switch_ar else "shared"
        for i in range(q):
            for e in range(k):
                for j in range(k):
                    theta.append(model.ar_coefficients[m, i, e, j])
                    labels.append(f"ar[{tag}][lag {i + 1}][{names[e]}<-{names[j]}]")
    n_cov_blocks = r if s.switch_variance else 1
    tril = [(i, j) for i in range(k) for j in range(i + 1)]
    for m in range(n_cov_blocks):
        tag = f"regime {m + 1}" if s.switch_variance else "shared"
        for (i, j) in tril:
            theta.append(model.covariances[m, i, j])
            labels.append(f"cov[{tag}][{names[i]},{names[j]}]")
    for i in range(r):
        for j in range(r - 1):
            theta.append(model.transitions.probs[i, j])
            labels.append(f"p[{i + 1}->{j + 1}]")

    theta = np.array(theta)

    def unpack(vec: np.ndarray) -> MsVarModel:
        pos = 0
        means = vec[pos: pos + r * k].reshape(r, k)
        pos += r * k
        ar = np.empty((r, q, k, k))
        block = vec[pos: pos + n_ar_blocks * q * k * k].reshape(n_ar_blocks, q, k, k)
        pos += n_ar_blocks * q * k * k
        ar[:] = block if s.switch_ar else block[0]
        covs = np.empty((r, k, k))
        for m in range(n_cov_blocks):
            c = np.zeros((k, k))
            for (i, j) in tril:
                c[i, j] = vec[pos]
                c[j, i] = vec[pos]
                pos += 1
            covs[m] = c
        if not s.switch_variance:
            covs[:] = covs[0]
        P = np.empty((r, r))
        for i in range(r):
            row = vec[pos: pos + r - 1]
            pos += r - 1
            P[i, :-1] = row
            P[i, -1] = 1.0 - row.sum()
        return MsVarModel(spec=s, means=means, ar_coefficients=ar, covariances=covs,
                          transitions=TransitionMatrix(P), names=names)

    return theta, labels, unpack


def _norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def standard_errors(model: MsVarModel, data: TimeSeries, rel_step: float = 1e-5) -> dict:
    """Wald standard errors and p-values from a central-difference Hessian of
    the filter log-likelihood at the fitted parameters.

    Sigma rows report the per-equation residual standard deviations with
    delta-method standard errors derived from the variance entries.
    """
    theta, labels, unpack = _pack_parameters(model)
    n_par = len(theta)
    steps = np.maximum(np.abs(theta), 1.0) * rel_step
    # keep transition probabilities strictly inside (0, 1) when perturbed
    for i, lbl in enumerate(labels):
        if lbl.startswith("p["):
            p = theta[i]
            steps[i] = max(min(steps[i], 0.2 * p, 0.2 * (1.0 - p)), 1e-10)

    def loglik(vec: np.ndarray) -> float:
        try:
            return hamilton_filter(unpack(vec), data).log_likelihood
        except (DataError, EstimationError):
            return math.nan

    H = np.empty((n_par, n_par))
    f0 = loglik(theta)
    for i in range(n_par):
        ei = np.zeros(n_par)
        ei[i] = steps[i]
        fpp = loglik(theta + 2 * ei)
        fmm = loglik(theta - 2 * ei)
        H[i, i] = (fpp - 2 * f0 + fmm) / (4 * steps[i] ** 2)
    for i in range(n_par):
        for j in range(i + 1, n_par):
            ei = np.zeros(n_par)
            ej = np.zeros(n_par)
            ei[i] = steps[i]
            ej[j] = steps[j]
            val = (loglik(theta + ei + ej) - loglik(theta + ei - ej)
                   - loglik(theta - ei + ej) + loglik(theta - ei - ej)) \
                / (4 * steps[i] * steps[j])
            H[i, j] = H[j, i] = val
    if np.isnan(H).any():
        warnings.warn("Hessian evaluation failed near a parameter boundary; "
                      "affected standard errors reported as NaN", stacklevel=2)
        H = np.nan_to_num(H, nan=0.0)

    info = -H
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(info)
    variances = np.diag(cov)
    se = np.sqrt(np.where(variances > 0, variances, np.nan))

    rows = {}
    for lbl, est, s_ in zip(labels, theta, se):
        if math.isnan(s_) or s_ == 0.0:
            rows[lbl] = {"estimate": float(est), "se": float(s_), "p_value": math.nan}
        else:
            z = est / s_
            rows[lbl] = {"estimate": float(est), "se": float(s_),
                         "p_value": 2.0 * _norm_sf(abs(z))}

    # delta-method rows for the per-equation sigmas
    names = model.names
    n_cov_blocks = model.spec.r if model.spec.switch_variance else 1
    for m in range(n_cov_blocks):
        tag = f"regime {m + 1}" if model.spec.switch_variance else "shared"
        for j in range(model.spec.k):
            var_lbl = f"cov[{tag}][{names[j]},{names[j]}]"
            v = rows[var_lbl]
            sigma = math.sqrt(v["estimate"])
            if math.isnan(v["se"]) or sigma == 0.0:
                se_sigma = math.nan
                p = math.nan
            else:
                se_sigma = v["se"] / (2.0 * sigma)
                p = 2.0 * _norm_sf(abs(sigma / se_sigma))
            rows[f"sigma[{tag}][{names[j]}]"] = {
                "estimate": sigma, "se": se_sigma, "p_value": p,
            }
    return rows
