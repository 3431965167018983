"""Regenerate the repository fixtures under fixtures/ (fully deterministic).

The monthly BTC/MPU pair is drawn from a two-regime switching VAR whose
regimes differ sharply in volatility, whose uncertainty-lag coefficients in
the BTC equation are negative in both regimes, and whose regime chain is
highly persistent -- the qualitative structure the toolkit's fit and
replication tests check for.  Levels integrate the simulated returns.  The
hourly price file carries 6-hour bar windows around each calendar event,
with the post-announcement bar wired to respond negatively to the prior
rate change.

Run:  python tools/make_fixtures.py
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import regimevar as rv  # noqa: E402
from regimevar.timeseries import format_timestamp  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"

MONTHLY_SEED = 20100703
HOURLY_SEED = 20170201
N_MONTHS = 158          # Jul 2010 .. Aug 2023 inclusive
BTC_MAX_LEVEL = 60955.77
MPU_START = 95.0


def monthly_model() -> rv.MsVarModel:
    spec = rv.MsVarSpec(k=2, q=1, r=2, switch_target="mean",
                        switch_variance=True, switch_ar=True)
    means = np.array([[0.055, 0.000],
                      [0.110, 0.015]])
    ar = np.array([
        [[[0.08, -0.15],
          [0.02, -0.22]]],
        [[[0.22, -0.45],
          [0.05, -0.15]]],
    ])
    covs = np.array([
        np.diag([0.12**2, 0.26**2]),
        np.diag([0.46**2, 0.36**2]),
    ])
    P = rv.TransitionMatrix([[0.92, 0.08], [0.04, 0.96]])
    return rv.MsVarModel(spec=spec, means=means, ar_coefficients=ar,
                         covariances=covs, transitions=P, names=("btc", "mpu"))


def month_stamps(n: int) -> list[str]:
    first = np.datetime64("2010-07", "M")
    return [str(first + i) + "-01" for i in range(n)]


def write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def make_monthly() -> None:
    model = monthly_model()
    returns, _ = rv.simulate_msvar(model, N_MONTHS - 1, burn_in=300, seed=MONTHLY_SEED)
    r_btc = returns.values[:, 0]
    r_mpu = returns.values[:, 1]

    log_btc = np.concatenate([[0.0], np.cumsum(r_btc)])
    log_btc += math.log(BTC_MAX_LEVEL) - log_btc.max()     # peak pinned to the max
    btc = np.exp(log_btc)
    log_mpu = np.concatenate([[math.log(MPU_START)], math.log(MPU_START) + np.cumsum(r_mpu)])
    mpu = np.exp(log_mpu)

    dates = month_stamps(N_MONTHS)
    fmt = lambda v: f"{v:.8g}"
    write_csv(FIXTURES / "btc_monthly.csv", ["date", "btc"],
              [[d, fmt(v)] for d, v in zip(dates, btc)])
    write_csv(FIXTURES / "mpu_monthly.csv", ["date", "mpu"],
              [[d, fmt(v)] for d, v in zip(dates, mpu)])
    write_csv(FIXTURES / "btc_mpu_monthly.csv", ["date", "btc", "mpu"],
              [[d, fmt(b), fmt(m)] for d, b, m in zip(dates, btc, mpu)])


# FOMC-style calendar: 55 meetings, Feb 2017 .. Sep 2023; 18 hikes, 5 cuts,
# 32 holds; the last ten rows reproduce the event-table rows used in tests.
MEETINGS = [
    ("2017-02-01 15:00:00", 0.0075), ("2017-03-15 14:00:00", 0.0100),
    ("2017-05-03 14:00:00", 0.0100), ("2017-06-14 14:00:00", 0.0125),
    ("2017-07-26 14:00:00", 0.0125), ("2017-09-20 14:00:00", 0.0125),
    ("2017-11-01 14:00:00", 0.0125), ("2017-12-13 15:00:00", 0.0150),
    ("2018-01-31 15:00:00", 0.0150), ("2018-03-21 14:00:00", 0.0175),
    ("2018-05-02 14:00:00", 0.0175), ("2018-06-13 14:00:00", 0.0200),
    ("2018-08-01 14:00:00", 0.0200), ("2018-09-26 14:00:00", 0.0225),
    ("2018-11-08 15:00:00", 0.0225), ("2018-12-19 15:00:00", 0.0250),
    ("2019-01-30 15:00:00", 0.0250), ("2019-03-20 14:00:00", 0.0250),
    ("2019-05-01 14:00:00", 0.0250), ("2019-06-19 14:00:00", 0.0250),
    ("2019-07-31 14:00:00", 0.0225), ("2019-09-18 14:00:00", 0.0200),
    ("2019-10-30 14:00:00", 0.0175), ("2019-12-11 15:00:00", 0.0175),
    ("2020-01-29 15:00:00", 0.0175), ("2020-03-03 15:00:00", 0.0125),
    ("2020-03-15 15:00:00", 0.0025), ("2020-04-29 14:00:00", 0.0025),
    ("2020-06-10 14:00:00", 0.0025), ("2020-07-29 14:00:00", 0.0025),
    ("2020-09-16 14:00:00", 0.0025), ("2020-11-05 15:00:00", 0.0025),
    ("2020-12-16 15:00:00", 0.0025), ("2021-01-27 15:00:00", 0.0025),
    ("2021-03-17 14:00:00", 0.0025), ("2021-04-28 14:00:00", 0.0025),
    ("2021-06-16 14:00:00", 0.0025), ("2021-07-28 14:00:00", 0.0025),
    ("2021-09-22 14:00:00", 0.0025), ("2021-11-03 14:00:00", 0.0025),
    ("2021-12-15 15:00:00", 0.0025), ("2022-01-26 15:00:00", 0.0025),
    ("2022-03-16 14:00:00", 0.0050), ("2022-05-04 14:00:00", 0.0100),
    ("2022-06-15 14:00:00", 0.0175), ("2022-07-27 14:00:00", 0.0250),
    ("2022-09-21 14:00:00", 0.0325), ("2022-11-02 14:00:00", 0.0400),
    ("2022-12-14 15:00:00", 0.0450), ("2023-02-01 15:00:00", 0.0475),
    ("2023-03-22 14:00:00", 0.0500), ("2023-05-03 14:00:00", 0.0525),
    ("2023-06-14 14:00:00", 0.0525), ("2023-07-26 14:00:00", 0.0550),
    ("2023-09-20 14:00:00", 0.0550),
]
PREVIOUS_START = 0.0075   # level going into the first 2017 meeting


def make_calendar() -> list[tuple[str, float, float, float]]:
    rows = []
    prev = PREVIOUS_START
    for when, actual in MEETINGS:
        rows.append((when, actual, actual, prev))
        prev = actual
    write_csv(FIXTURES / "fomc_events.csv",
              ["datetime", "actual", "forecast", "previous"],
              [[w, f"{a:.4f}", f"{f:.4f}", f"{p:.4f}"] for w, a, f, p in rows])
    return rows


def make_hourly(calendar) -> None:
    rng = np.random.default_rng(HOURLY_SEED)
    window_half = 6
    log_p = math.log(1000.0)
    drift_per_gap = math.log(26000.0 / 1000.0) / len(calendar)
    rows = []
    prev_return = 0.0
    prev_change = 0.0
    for when, actual, _, previous in calendar:
        event = np.datetime64(when.replace(" ", "T"), "s")
        hours = [event + np.timedelta64(3600 * h, "s")
                 for h in range(-window_half, window_half + 1)]
        log_p += drift_per_gap + rng.normal(0.0, 0.02)
        # pre-event bars: plain hourly noise
        levels = {}
        lp = log_p
        levels[hours[window_half]] = lp                    # bar at the event
        for h in range(window_half - 1, -1, -1):
            lp -= rng.normal(0.0, 0.004)
            levels[hours[h]] = lp
        # the post-announcement hour carries the structured response
        event_return = (0.002 - 2.0 * prev_change + 0.15 * prev_return
                        + rng.normal(0.0, 0.01))
        lp = log_p + event_return
        levels[hours[window_half + 1]] = lp
        for h in range(window_half + 2, 2 * window_half + 1):
            lp += rng.normal(0.0, 0.004)
            levels[hours[h]] = lp
        log_p = lp
        prev_return = event_return
        prev_change = actual - previous
        for hour in hours:
            rows.append([format_timestamp(hour), f"{math.exp(levels[hour]):.8g}"])
    write_csv(FIXTURES / "btc_hourly.csv", ["date", "btc"], rows)


def verify() -> None:
    """Re-load the written files and check every contract the tests rely on."""
    levels = rv.load_csv(FIXTURES / "btc_mpu_monthly.csv")
    assert len(levels) == N_MONTHS, len(levels)
    returns = rv.log_returns(levels)
    assert len(returns) == N_MONTHS - 1

    adf = rv.adf_test(returns.column("btc"))
    assert adf.decision_hint == "reject-null", adf
    kpss = rv.kpss_test(levels.column("btc"))
    assert kpss.statistic > kpss.critical_values[0.05], kpss

    log_levels = rv.TimeSeries(levels.timestamps, levels.names,
                               np.log(levels.values), levels.frequency)
    joh = rv.johansen_test(log_levels, 1)
    assert joh.selected_rank == 0, (joh.trace_statistics, joh.selected_rank)

    table = rv.lag_selection(returns, 8)
    assert len(table.aic) == 9

    spec = rv.MsVarSpec(k=2, q=1, r=2, switch_target="mean",
                        switch_variance=True, switch_ar=True)
    fit = rv.em_fit(returns, spec, restarts=5, seed=42)
    m = fit.model
    sig = m.sigmas()
    assert sig[1, 0] > 1.5 * sig[0, 0], sig          # distinct volatility ordering
    mpu_to_btc = m.ar_coefficients[:, 0, 0, 1]
    assert (mpu_to_btc < 0).all(), mpu_to_btc        # negative MPU lag, both regimes
    diag = np.diag(m.transitions.probs)
    assert (diag > 0.7).all(), diag                  # persistent regimes

    prices = rv.load_csv(FIXTURES / "btc_hourly.csv")
    assert prices.frequency == "hourly", prices.frequency
    calendar = rv.load_event_calendar(FIXTURES / "fomc_events.csv")
    assert len(calendar) == 55
    panel = rv.event_returns(prices, calendar, window=1)
    event_var = rv.fit_var(panel, 1)
    assert event_var.lag_coefficients[0, 0, 1] < 0, event_var.lag_coefficients
    print("fixture verification passed:")
    print("  monthly rows:", len(levels), "returns:", len(returns))
    print("  fitted sigmas:", np.round(sig, 4).tolist())
    print("  MPU->BTC lag coefficients:", np.round(mpu_to_btc, 4).tolist())
    print("  transition diagonals:", np.round(diag, 4).tolist())
    print("  johansen trace:", np.round(joh.trace_statistics, 3).tolist(),
          "rank", joh.selected_rank)
    print("  event VAR rate-change coefficient:",
          round(float(event_var.lag_coefficients[0, 0, 1]), 4))


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    make_monthly()
    calendar = make_calendar()
    make_hourly(calendar)
    verify()


if __name__ == "__main__":
    main()
