"""Seeded data-generating processes: ground-truth oracles for the estimators.

Reproducibility contract: all draws come from NumPy's PCG64 bit generator.
A simulation seed is expanded with ``SeedSequence(seed).spawn(2)`` -- child 0
drives the regime chain, child 1 the Gaussian innovations (ziggurat normals
via ``Generator.standard_normal``).  The same seed therefore yields the same
series bit-for-bit, and a regime-switching simulation whose regimes share
identical parameters reproduces the single-regime simulation exactly,
because both read the identical innovation substream.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import DataError, DivergenceWarning, EstimationError
from .msvar import MsVarModel, TransitionMatrix, ergodic_distribution
from .timeseries import HOURLY, MONTHLY, TimeSeries
from .var import VarModel

DEFAULT_BURN_IN = 200


def _check_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)) or not 0 <= int(seed) < 2**64:
        raise DataError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return int(seed)


def _spawned_generators(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    chain_ss, innov_ss = np.random.SeedSequence(_check_seed(seed)).spawn(2)
    return (np.random.Generator(np.random.PCG64(chain_ss)),
            np.random.Generator(np.random.PCG64(innov_ss)))


def make_timestamps(T: int, frequency: str = MONTHLY, start: str = "2000-01-01") -> np.ndarray:
    if frequency == MONTHLY:
        first = np.datetime64(start[:7], "M")
        return (first + np.arange(T)).astype("datetime64[s]")
    if frequency == HOURLY:
        first = np.datetime64(start, "s")
        return first + np.arange(T) * np.timedelta64(3600, "s")
    raise DataError(f"cannot generate {frequency!r} timestamps")


def sample_markov_chain(transitions: TransitionMatrix | np.ndarray, T: int,
                        initial="ergodic", seed: int = 0) -> np.ndarray:
    """Draw a length-T state path; deterministic given the seed.

    ``initial`` is "ergodic" (first state from the stationary distribution)
    or a fixed state index.
    """
    tm = transitions if isinstance(transitions, TransitionMatrix) else \
        TransitionMatrix(transitions)
    if T < 1:
        raise DataError("chain length must be at least 1")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(_check_seed(seed))))
    return _sample_chain(tm.probs, T, initial, rng)


def _sample_chain(P: np.ndarray, T: int, initial, rng: np.random.Generator) -> np.ndarray:
    r = P.shape[0]
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0
    path = np.empty(T, dtype=int)
    if initial == "ergodic":
        pi = ergodic_distribution(P)
        path[0] = min(int(np.searchsorted(np.cumsum(pi), rng.random(), side="right")), r - 1)
    else:
        state = int(initial)
        if not 0 <= state < r:
            raise DataError(f"initial state {state} outside 0..{r - 1}")
        path[0] = state
    u = rng.random(T - 1)
    for t in range(1, T):
        path[t] = min(int(np.searchsorted(cum[path[t - 1]], u[t - 1], side="right")), r - 1)
    return path


def _companion_radius(ar: np.ndarray) -> float:
    q, k = ar.shape[0], ar.shape[1]
    if q == 0:
        return 0.0
    F = np.zeros((k * q, k * q))
    F[:k] = np.hstack(list(ar))
    if q > 1:
        F[k:, :-k] = np.eye(k * (q - 1))
    return float(np.abs(np.linalg.eigvals(F)).max())


def _simulate_observations(states: np.ndarray, pre_states: np.ndarray, means: np.ndarray,
                           ar: np.ndarray, chols: list[np.ndarray], mean_form: bool,
                           rng_innov: np.random.Generator) -> np.ndarray:
    """Shared recursion used by both the switching and linear simulators."""
    q = ar.shape[1]
    k = means.shape[1]
    total = len(states)
    u = rng_innov.standard_normal((total, k))
    x = np.empty((total + q, k))
    for i in range(q):
        x[i] = means[pre_states[i]]
    all_states = np.concatenate([pre_states, states])
    for t in range(total):
        s = states[t]
        m = means[s].copy()
        for i in range(1, q + 1):
            lag = x[q + t - i]
            if mean_form:
                m = m + ar[s, i - 1] @ (lag - means[all_states[q + t - i]])
            else:
                m = m + ar[s, i - 1] @ lag
        x[q + t] = m + chols[s] @ u[t]
    out = x[q:]
    if not np.isfinite(out).all():
        raise EstimationError("simulation overflowed (explosive dynamics?)")
    return out


def simulate_msvar(model: MsVarModel, T: int, burn_in: int = DEFAULT_BURN_IN,
                   seed: int = 0, initial="ergodic",
                   frequency: str = MONTHLY, start: str = "2000-01-01"):
    """Simulate a Markov-switching VAR; returns (TimeSeries, latent state path).

    Regimes are drawn first from the chain substream, observations from the
    innovation substream; ``burn_in`` leading observations are discarded and
    the returned latent path matches the returned series row-for-row.
    Unstable regime dynamics are allowed but flagged with a warning.
    """
    s = model.spec
    if T < 1:
        raise DataError("T must be at least 1")
    if burn_in < 0:
        raise DataError("burn_in must be nonnegative")
    for m in range(s.r):
        radius = _companion_radius(model.ar_coefficients[m])
        if radius >= 1.0:
            warnings.warn(
                f"regime {m + 1} dynamics unstable (spectral radius {radius:.3f}); "
                "simulation may diverge", DivergenceWarning, stacklevel=2,
            )
    rng_chain, rng_innov = _spawned_generators(seed)
    total = burn_in + T
    full_path = _sample_chain(model.transitions.probs, s.q + total, initial, rng_chain)
    pre_states, states = full_path[:s.q], full_path[s.q:]
    chols = [np.linalg.cholesky(model.covariances[m]) for m in range(s.r)]
    x = _simulate_observations(states, pre_states, model.means, model.ar_coefficients,
                               chols, s.mean_switching, rng_innov)
    x = x[burn_in:]
    latent = states[burn_in:]
    series = TimeSeries(make_timestamps(T, frequency, start), model.names, x, frequency)
    return series, latent


def simulate_var(model: VarModel, T: int, burn_in: int = DEFAULT_BURN_IN, seed: int = 0,
                 frequency: str = MONTHLY, start: str = "2000-01-01") -> TimeSeries:
    """Simulate a linear VAR (single regime, intercept form)."""
    if T < 1:
        raise DataError("T must be at least 1")
    if burn_in < 0:
        raise DataError("burn_in must be nonnegative")
    radius = model.spectral_radius()
    if radius >= 1.0:
        warnings.warn(
            f"VAR dynamics unstable (spectral radius {radius:.3f}); simulation may diverge",
            DivergenceWarning, stacklevel=2,
        )
    _, rng_innov = _spawned_generators(seed)
    total = burn_in + T
    states = np.zeros(total, dtype=int)
    pre_states = np.zeros(model.p, dtype=int)
    try:
        chol = np.linalg.cholesky(model.residual_covariance)
    except np.linalg.LinAlgError:
        raise EstimationError("residual covariance not positive definite") from None
    x = _simulate_observations(
        states, pre_states, model.intercept[None, :],
        model.lag_coefficients[None, ...], [chol], False, rng_innov,
    )
    x = x[burn_in:]
    return TimeSeries(make_timestamps(T, frequency, start), model.names, x, frequency)


def simulate_cointegrated_pair(T: int, seed: int = 0, spread_ar: float = 0.5) -> TimeSeries:
    """A pair sharing one stochastic trend with a stationary AR(1) spread.

    The two columns are I(1) individually and cointegrated with rank 1 by
    construction; their difference is the (stationary) spread itself.
    """
    if T < 50:
        raise DataError(f"T must be at least 50, got {T}")
    if not -1.0 < spread_ar < 1.0:
        raise DataError(f"spread_ar must lie in (-1, 1), got {spread_ar}")
    rng_trend, rng_spread = _spawned_generators(seed)
    trend = np.cumsum(rng_trend.standard_normal(T))
    eps = rng_spread.standard_normal(T)
    spread = np.empty(T)
    spread[0] = eps[0] / np.sqrt(1.0 - spread_ar**2)
    for t in range(1, T):
        spread[t] = spread_ar * spread[t - 1] + eps[t]
    values = np.column_stack([trend + 0.5 * spread, trend - 0.5 * spread])
    return TimeSeries(make_timestamps(T), ("y1", "y2"), values, MONTHLY)
