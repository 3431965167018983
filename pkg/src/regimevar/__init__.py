"""regimevar: Markov-switching VAR toolkit with stationarity, lag-selection,
cointegration, and impulse-response machinery, plus seeded simulation oracles."""

from .errors import DataError, DivergenceWarning, EstimationError, RegimeVarError
from .msvar import (
    EmFitResult,
    FilterOutput,
    MsVarModel,
    MsVarSpec,
    TransitionMatrix,
    conditional_density,
    em_fit,
    ergodic_distribution,
    expected_duration,
    hamilton_filter,
    kim_smoother,
    regime_irf,
    standard_errors,
)
from .simulate import (
    sample_markov_chain,
    simulate_cointegrated_pair,
    simulate_msvar,
    simulate_var,
)
from .stationarity import TestResult, adf_test, kpss_test, pp_test
from .timeseries import (
    EventCalendar,
    StatsSummary,
    TimeSeries,
    align,
    describe,
    event_returns,
    load_csv,
    load_event_calendar,
    log_returns,
    to_csv,
)
from .var import (
    IrfResult,
    JohansenResult,
    LagSelectionTable,
    VarModel,
    fit_var,
    irf,
    johansen_test,
    lag_selection,
)

__version__ = "0.1.0"

__all__ = [
    "DataError", "DivergenceWarning", "EstimationError", "RegimeVarError",
    "EmFitResult", "FilterOutput", "MsVarModel", "MsVarSpec", "TransitionMatrix",
    "conditional_density", "em_fit", "ergodic_distribution", "expected_duration",
    "hamilton_filter", "kim_smoother", "regime_irf", "standard_errors",
    "sample_markov_chain", "simulate_cointegrated_pair", "simulate_msvar", "simulate_var",
    "TestResult", "adf_test", "kpss_test", "pp_test",
    "EventCalendar", "StatsSummary", "TimeSeries", "align", "describe", "event_returns",
    "load_csv", "load_event_calendar", "log_returns", "to_csv",
    "IrfResult", "JohansenResult", "LagSelectionTable", "VarModel",
    "fit_var", "irf", "johansen_test", "lag_selection",
    "__version__",
]
