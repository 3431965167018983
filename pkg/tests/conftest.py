import numpy as np
import pytest

import regimevar as rv
from regimevar.fixtures import fixture_path


@pytest.fixture(scope="session")
def monthly_levels() -> rv.TimeSeries:
    return rv.load_csv(fixture_path("btc_mpu_monthly.csv"))


@pytest.fixture(scope="session")
def monthly_returns(monthly_levels) -> rv.TimeSeries:
    return rv.log_returns(monthly_levels)


@pytest.fixture(scope="session")
def hourly_prices() -> rv.TimeSeries:
    return rv.load_csv(fixture_path("btc_hourly.csv"))


@pytest.fixture(scope="session")
def fomc_calendar() -> rv.EventCalendar:
    return rv.load_event_calendar(fixture_path("fomc_events.csv"))


def make_series(values, names=None, freq="monthly", start="2000-01-01"):
    """Wrap a plain array in a TimeSeries with synthetic timestamps."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    T, k = values.shape
    if names is None:
        names = tuple(f"y{i+1}" for i in range(k))
    from regimevar.simulate import make_timestamps
    return rv.TimeSeries(make_timestamps(T, freq, start), names, values, freq)
