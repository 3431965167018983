import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import regimevar as rv
from regimevar.errors import DataError, EstimationError


def df_tstat_oracle(y, lags, spec):
    """Dickey-Fuller t-ratio via an explicit normal-equations solve,
    independent of the library's regression path."""
    y = np.asarray(y, dtype=float)
    dy = np.diff(y)
    lhs = dy[lags:]
    cols = [y[lags:-1]]
    for i in range(1, lags + 1):
        cols.append(dy[lags - i: -i])
    n = len(lhs)
    if spec == "constant":
        cols.append(np.ones(n))
    elif spec == "constant+trend":
        cols.append(np.ones(n))
        cols.append(np.arange(1, n + 1, dtype=float))
    X = np.column_stack(cols)
    xtx = X.T @ X
    beta = np.linalg.solve(xtx, X.T @ lhs)
    resid = lhs - X @ beta
    s2 = resid @ resid / (n - X.shape[1])
    se = math.sqrt(s2 * np.linalg.inv(xtx)[0, 0])
    return beta[0] / se


def ar1(T, phi, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(T) * scale
    out = np.empty(T)
    out[0] = e[0] / math.sqrt(1 - phi**2) if abs(phi) < 1 else e[0]
    for t in range(1, T):
        out[t] = phi * out[t - 1] + e[t]
    return out


class TestAdf:
    def test_matches_regression_oracle_no_lags(self):
        y = np.cumsum(np.random.default_rng(1).standard_normal(300))
        res = rv.adf_test(y, max_lags=0, lag_rule="fixed")
        assert abs(res.statistic - df_tstat_oracle(y, 0, "constant")) < 1e-8

    @pytest.mark.parametrize("spec", ["none", "constant", "constant+trend"])
    @pytest.mark.parametrize("lags", [0, 3])
    def test_matches_oracle_all_specs(self, spec, lags):
        y = np.cumsum(np.random.default_rng(7).standard_normal(250))
        res = rv.adf_test(y, max_lags=lags, spec=spec, lag_rule="fixed")
        assert abs(res.statistic - df_tstat_oracle(y, lags, spec)) < 1e-8
        assert res.lags_used == lags

    def test_random_walk_fails_to_reject(self):
        y = np.cumsum(np.random.default_rng(11).standard_normal(500))
        res = rv.adf_test(y, spec="constant")
        assert res.decision_hint == "fail-to-reject"
        assert res.statistic > res.critical_values[0.05]

    def test_stationary_ar_rejects_at_1pct(self):
        y = ar1(500, 0.2, seed=13)
        res = rv.adf_test(y, spec="constant")
        assert res.statistic < res.critical_values[0.01]
        assert res.p_value < 0.01

    def test_aic_lag_rule_runs(self):
        y = ar1(400, 0.6, seed=3)
        res = rv.adf_test(y, max_lags=8, lag_rule="aic")
        assert 0 <= res.lags_used <= 8

    def test_too_short_rejected(self):
        with pytest.raises(DataError, match="too short"):
            rv.adf_test(np.arange(12.0), max_lags=6)

    def test_constant_series_rejected(self):
        with pytest.raises(EstimationError):
            rv.adf_test(np.ones(100), max_lags=0, lag_rule="fixed")

    @pytest.mark.parametrize("c", [2.0, -3.0, 1e-3])
    def test_scale_invariance(self, c):
        y = np.cumsum(np.random.default_rng(5).standard_normal(200))
        a = rv.adf_test(y, max_lags=2, lag_rule="fixed")
        b = rv.adf_test(c * y, max_lags=2, lag_rule="fixed")
        assert abs(a.statistic - b.statistic) < 1e-10

    def test_pvalue_monotone_in_statistic(self):
        from regimevar._tables import adf_pvalue
        grid = np.linspace(-6.0, 1.0, 40)
        ps = [adf_pvalue(s, "constant") for s in grid]
        assert all(p1 <= p2 + 1e-12 for p1, p2 in zip(ps, ps[1:]))

    def test_pvalue_calibrated_at_5pct_critical_value(self):
        # the 5% critical value should map to a p-value near 0.05
        from regimevar._tables import adf_pvalue
        assert 0.03 < adf_pvalue(-2.86, "constant") < 0.07
        assert 0.03 < adf_pvalue(-3.41, "constant+trend") < 0.07


class TestPhillipsPerron:
    def test_white_noise_close_to_adf0(self):
        y = np.random.default_rng(17).standard_normal(500)
        pp = rv.pp_test(y)
        adf0 = rv.adf_test(y, max_lags=0, lag_rule="fixed")
        assert pp.decision_hint == "reject-null"
        assert abs(pp.statistic - adf0.statistic) / abs(adf0.statistic) < 0.05

    def test_random_walk_size(self):
        rejections = 0
        n = 200
        for i in range(n):
            y = np.cumsum(np.random.default_rng(100 + i).standard_normal(500))
            res = rv.pp_test(y)
            rejections += res.decision_hint == "reject-null"
        assert rejections / n <= 0.10

    def test_near_constant_series_flagged_not_crashed(self):
        rng = np.random.default_rng(23)
        y = 5.0 + 1e-8 * rng.standard_normal(200)
        res = rv.pp_test(y)
        assert res.statistic < -10.0

    def test_too_short(self):
        with pytest.raises(DataError, match="too short"):
            rv.pp_test(np.arange(10.0))

    @pytest.mark.parametrize("c", [4.0, -0.5])
    def test_scale_invariance(self, c):
        y = ar1(300, 0.5, seed=31)
        a = rv.pp_test(y)
        b = rv.pp_test(c * y)
        assert abs(a.statistic - b.statistic) < 1e-10

    def test_fixed_bandwidth(self):
        y = ar1(200, 0.3, seed=37)
        res = rv.pp_test(y, bandwidth_rule="fixed", bandwidth=8)
        assert res.lags_used == 8


class TestKpss:
    def test_critical_values_pinned(self):
        res = rv.kpss_test(np.random.default_rng(0).standard_normal(100))
        assert res.critical_values == {0.10: 0.347, 0.05: 0.463, 0.01: 0.739}
        assert res.p_value is None

    def test_fixture_level_rejects(self, monthly_levels):
        res = rv.kpss_test(monthly_levels.column("btc"))
        assert res.decision_hint == "reject-null"

    def test_white_noise_size(self):
        fails = 0
        n = 200
        for i in range(n):
            y = np.random.default_rng(500 + i).standard_normal(1000)
            fails += rv.kpss_test(y).decision_hint == "fail-to-reject"
        assert fails / n >= 0.90

    def test_noiseless_trend_absorbed(self):
        y = 0.5 * np.arange(100.0) + 2.0
        res = rv.kpss_test(y, spec="constant+trend")
        assert res.statistic < res.critical_values[0.05]

    def test_random_walk_rejects(self):
        y = np.cumsum(np.random.default_rng(41).standard_normal(500))
        assert rv.kpss_test(y).decision_hint == "reject-null"

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_nonnegative(self, seed):
        y = np.random.default_rng(seed).standard_normal(60)
        assert rv.kpss_test(y).statistic >= 0.0

    @pytest.mark.parametrize("c", [10.0, -2.0])
    def test_scale_invariance(self, c):
        y = ar1(150, 0.4, seed=43)
        a = rv.kpss_test(y)
        b = rv.kpss_test(c * y)
        assert abs(a.statistic - b.statistic) < 1e-12

    def test_too_short(self):
        with pytest.raises(DataError, match="too short"):
            rv.kpss_test(np.arange(5.0))

    def test_spec_restricted(self):
        with pytest.raises(DataError, match="spec"):
            rv.kpss_test(np.random.default_rng(0).standard_normal(50), spec="none")


class TestResultContract:
    def test_json_roundtrip(self):
        res = rv.adf_test(ar1(100, 0.3, seed=3))
        back = rv.TestResult.from_dict(res.to_dict())
        assert back == res

    def test_critical_value_ordering_adf(self):
        res = rv.adf_test(ar1(200, 0.5, seed=5))
        cv = res.critical_values
        assert cv[0.01] < cv[0.05] < cv[0.10]

    def test_critical_value_ordering_kpss(self):
        res = rv.kpss_test(ar1(200, 0.5, seed=5))
        cv = res.critical_values
        assert cv[0.01] > cv[0.05] > cv[0.10]

    def test_pvalue_bounds(self):
        res = rv.pp_test(ar1(300, 0.2, seed=7))
        assert 0.0 <= res.p_value <= 1.0

    def test_fixture_return_rejects(self, monthly_returns):
        res = rv.adf_test(monthly_returns.column("btc"))
        assert res.statistic < 0
        assert res.decision_hint == "reject-null"
