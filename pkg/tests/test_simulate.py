import numpy as np
import pytest
from scipy.linalg import solve_discrete_lyapunov

import regimevar as rv
from regimevar.errors import DataError, DivergenceWarning


TABLE_P = np.array([[0.895, 0.105], [0.03, 0.97]])


class TestMarkovChain:
    def test_identity_constant_path(self):
        path = rv.sample_markov_chain(np.eye(2), 50, initial=1, seed=0)
        assert np.all(path == 1)

    def test_periodic_alternating(self):
        path = rv.sample_markov_chain(np.array([[0.0, 1.0], [1.0, 0.0]]), 20,
                                      initial=0, seed=0)
        assert np.array_equal(path, np.arange(20) % 2)

    def test_occupancy_matches_ergodic(self):
        path = rv.sample_markov_chain(TABLE_P, 100_000, initial="ergodic", seed=3)
        pi = rv.ergodic_distribution(TABLE_P)
        occupancy = np.mean(path == 1)
        assert abs(occupancy - pi[1]) <= 0.01

    def test_deterministic_given_seed(self):
        a = rv.sample_markov_chain(TABLE_P, 100, seed=11)
        b = rv.sample_markov_chain(TABLE_P, 100, seed=11)
        assert np.array_equal(a, b)

    def test_golden_path(self):
        # frozen stream contract: PCG64(seed), ergodic draw then transitions
        path = rv.sample_markov_chain(rv.TransitionMatrix(TABLE_P), 12, seed=0)
        assert path.tolist() == [1, 1, 1, 0, 0, 1, 1, 1, 1, 1, 1, 0]

    def test_bad_seed_rejected(self):
        with pytest.raises(DataError, match="seed"):
            rv.sample_markov_chain(TABLE_P, 10, seed=-1)

    def test_length_guard(self):
        with pytest.raises(DataError, match="at least 1"):
            rv.sample_markov_chain(TABLE_P, 0)


def simple_model(ar_value=0.3, means=((-1.0,), (1.0,)), sigmas=(0.5, 1.0),
                 P=None, target="mean", q=1):
    spec = rv.MsVarSpec(k=1, q=q, r=2, switch_target=target, switch_variance=True)
    if P is None:
        P = TABLE_P
    ar = np.broadcast_to(np.float64(ar_value).reshape(1, 1, 1), (2, q, 1, 1)).copy() \
        if q else np.zeros((2, 0, 1, 1))
    return rv.MsVarModel(spec=spec, means=np.asarray(means),
                         ar_coefficients=ar,
                         covariances=np.stack([[[sigmas[0]**2]], [[sigmas[1]**2]]]),
                         transitions=rv.TransitionMatrix(P))


class TestSimulateMsvar:
    def test_white_noise_moments(self):
        model = simple_model(ar_value=0.0, means=((0.0,), (0.0,)), sigmas=(1.0, 1.0),
                             P=[[0.5, 0.5], [0.5, 0.5]], q=0)
        series, latent = rv.simulate_msvar(model, 20_000, seed=4)
        x = series.values[:, 0]
        assert abs(x.mean()) < 0.03
        assert abs(x.std() - 1.0) < 0.03

    def test_plateaus_follow_latent_path(self):
        model = simple_model(ar_value=0.0, means=((-1.0,), (1.0,)),
                             sigmas=(0.01, 0.01),
                             P=[[0.99, 0.01], [0.01, 0.99]], q=0)
        series, latent = rv.simulate_msvar(model, 2000, seed=5)
        implied = (series.values[:, 0] > 0).astype(int)
        assert np.mean(implied == latent) >= 0.99

    def test_calibrated_dispersion_band(self):
        # monthly-return calibration: consts 0.027/0.286, sigmas 0.242/0.513,
        # persistence 0.97 on the low-volatility regime; the unconditional
        # standard deviation should land near 0.3248
        spec = rv.MsVarSpec(k=1, q=1, r=2, switch_target="mean",
                            switch_variance=True, switch_ar=True)
        model = rv.MsVarModel(
            spec=spec, means=[[0.027], [0.286]],
            ar_coefficients=np.array([0.127, 0.05]).reshape(2, 1, 1, 1),
            covariances=np.stack([[[0.242**2]], [[0.513**2]]]),
            transitions=rv.TransitionMatrix([[0.97, 0.03], [0.105, 0.895]]))
        sds = []
        for rep in range(50):
            series, _ = rv.simulate_msvar(model, 157, seed=900 + rep)
            sds.append(series.values[:, 0].std(ddof=1))
        assert abs(np.mean(sds) / 0.3248 - 1.0) <= 0.15

    def test_latent_path_matches_length(self):
        model = simple_model()
        series, latent = rv.simulate_msvar(model, 123, seed=6)
        assert len(series) == len(latent) == 123

    def test_identical_regimes_match_linear_sim_bitwise(self):
        B = np.array([[0.4]])
        cov = np.array([[0.49]])
        spec = rv.MsVarSpec(k=1, q=1, r=2, switch_target="intercept",
                            switch_variance=False)
        switching = rv.MsVarModel(
            spec=spec, means=[[0.2], [0.2]],
            ar_coefficients=np.broadcast_to(B, (2, 1, 1, 1)).copy(),
            covariances=np.broadcast_to(cov, (2, 1, 1)).copy(),
            transitions=rv.TransitionMatrix([[0.9, 0.1], [0.2, 0.8]]))
        linear = rv.VarModel(k=1, p=1, intercept=[0.2],
                             lag_coefficients=B.reshape(1, 1, 1),
                             residual_covariance=cov)
        a, _ = rv.simulate_msvar(switching, 200, seed=7)
        b = rv.simulate_var(linear, 200, seed=7)
        assert np.array_equal(a.values, b.values)

    def test_unstable_regime_warns(self):
        spec = rv.MsVarSpec(k=1, q=1, r=2, switch_target="mean",
                            switch_variance=True, switch_ar=True)
        model = rv.MsVarModel(
            spec=spec, means=np.zeros((2, 1)),
            ar_coefficients=np.array([1.05, 0.2]).reshape(2, 1, 1, 1),
            covariances=np.stack([np.eye(1), np.eye(1)]),
            transitions=rv.TransitionMatrix([[0.99, 0.01], [0.01, 0.99]]))
        with pytest.warns(DivergenceWarning):
            rv.simulate_msvar(model, 50, burn_in=10, seed=8)

    def test_golden_values(self):
        model = simple_model(ar_value=0.3, means=((-1.0,), (1.0,)),
                             sigmas=(0.5, 1.0), P=TABLE_P)
        series, latent = rv.simulate_msvar(model, 5, burn_in=3, seed=0)
        expected = [0.7344370029134765, 2.213965407646949, 1.0162389583568645,
                    1.3204626176216323, 0.057866485605539975]
        assert series.values[:, 0].tolist() == expected
        assert latent.tolist() == [1, 1, 1, 1, 1]


class TestSimulateVar:
    def test_zero_coefficients_white_noise(self):
        cov = np.array([[2.0, 0.5], [0.5, 1.0]])
        model = rv.VarModel(k=2, p=0, intercept=np.zeros(2),
                            lag_coefficients=np.zeros((0, 2, 2)),
                            residual_covariance=cov)
        series = rv.simulate_var(model, 30_000, seed=9)
        sample_cov = np.cov(series.values.T)
        assert np.abs(sample_cov - cov).max() < 0.06

    def test_lag1_autocovariance_lyapunov(self):
        B = np.array([[0.6, 0.1], [-0.2, 0.4]])
        cov = np.array([[1.0, 0.2], [0.2, 0.8]])
        model = rv.VarModel(k=2, p=1, intercept=np.zeros(2),
                            lag_coefficients=B.reshape(1, 2, 2),
                            residual_covariance=cov)
        series = rv.simulate_var(model, 60_000, seed=10)
        x = series.values - series.values.mean(axis=0)
        gamma0 = solve_discrete_lyapunov(B, cov)
        gamma1 = B @ gamma0
        sample_gamma1 = x[1:].T @ x[:-1] / (len(x) - 1)
        assert np.abs(sample_gamma1 - gamma1).max() < 0.05

    def test_explosive_flagged(self):
        model = rv.VarModel(k=1, p=1, intercept=[0.0],
                            lag_coefficients=np.array([[[1.05]]]),
                            residual_covariance=np.eye(1))
        with pytest.warns(DivergenceWarning):
            rv.simulate_var(model, 40, burn_in=5, seed=11)

    def test_deterministic(self):
        model = rv.VarModel(k=1, p=1, intercept=[0.1],
                            lag_coefficients=np.array([[[0.5]]]),
                            residual_covariance=np.eye(1))
        a = rv.simulate_var(model, 100, seed=12)
        b = rv.simulate_var(model, 100, seed=12)
        assert np.array_equal(a.values, b.values)


class TestCointegratedPair:
    def test_golden_first_row(self):
        pair = rv.simulate_cointegrated_pair(60, seed=0)
        assert pair.values[0, 0] == 1.9085095782951242
        assert pair.values[0, 1] == 0.9788723311011269

    def test_johansen_rejects_white_spread(self):
        pair = rv.simulate_cointegrated_pair(1000, seed=13, spread_ar=0.0)
        res = rv.johansen_test(pair, 1)
        assert res.trace_statistics[0] > res.trace_critical_values[0][0.01]

    def test_difference_is_stationary(self):
        hits = 0
        n = 100
        for i in range(n):
            pair = rv.simulate_cointegrated_pair(1000, seed=14_000 + i)
            diff = pair.values[:, 0] - pair.values[:, 1]
            res = rv.adf_test(diff)
            hits += res.p_value < 0.01
        assert hits / n >= 0.95

    def test_columns_individually_nonstationary(self):
        fails = 0
        n = 100
        for i in range(n):
            pair = rv.simulate_cointegrated_pair(1000, seed=15_000 + i)
            res = rv.adf_test(pair.values[:, 0])
            fails += res.decision_hint == "fail-to-reject"
        assert fails / n >= 0.85

    def test_spread_ar_bounds(self):
        with pytest.raises(DataError, match="spread_ar"):
            rv.simulate_cointegrated_pair(100, seed=0, spread_ar=1.0)

    def test_min_length(self):
        with pytest.raises(DataError, match="at least 50"):
            rv.simulate_cointegrated_pair(10, seed=0)


class TestCsvRoundTrip:
    def test_simulated_series_roundtrip(self, tmp_path):
        model = simple_model()
        series, _ = rv.simulate_msvar(model, 150, seed=16)
        path = tmp_path / "sim.csv"
        rv.to_csv(series, path)
        back = rv.load_csv(path)
        assert np.array_equal(back.values, series.values)
        assert np.array_equal(back.timestamps, series.timestamps)
        assert back.frequency == series.frequency

    def test_hourly_roundtrip(self, tmp_path):
        model = simple_model()
        series, _ = rv.simulate_msvar(model, 48, seed=17, frequency="hourly",
                                      start="2022-05-01 00:00:00")
        path = tmp_path / "sim_hourly.csv"
        rv.to_csv(series, path)
        back = rv.load_csv(path)
        assert back.frequency == "hourly"
        assert np.array_equal(back.values, series.values)
