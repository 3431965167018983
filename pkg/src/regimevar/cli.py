"""Command-line pipeline: every analysis as a subcommand, reports plus figures.

Exit codes: 0 success, 1 analysis error (bad data, numerical failure),
2 usage error.  Every run writes ``run.manifest.json`` beside its outputs
recording the command, resolved flags, input content hashes, and the file
list, so any published table can be regenerated.
"""

from __future__ import annotations

import functools
from pathlib import Path

import click
import numpy as np

from . import __version__, msvar, report, stationarity, var
from . import timeseries as ts
from .errors import RegimeVarError

_FMT = click.Choice(report.FORMATS)


def _analysis_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except RegimeVarError as exc:
            raise click.ClickException(str(exc)) from exc
    return wrapper


def _split_csv_list(value: str | None) -> tuple[str, ...] | None:
    if value is None:
        return None
    items = tuple(s.strip() for s in value.split(",") if s.strip())
    if not items:
        raise click.UsageError(f"empty list option: {value!r}")
    return items


def _load_series(input_path: str, timestamp_column: str, columns: str | None,
                 returns: bool) -> ts.TimeSeries:
    series = ts.load_csv(input_path, timestamp_column=timestamp_column,
                         value_columns=_split_csv_list(columns))
    if returns:
        series = ts.log_returns(series)
    return series


def _out_dir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _stamp(t) -> str:
    return ts.format_timestamp(t)


@click.group()
@click.version_option(__version__, prog_name="regimevar")
def main():
    """Regime-switching time-series toolkit."""


# --------------------------------------------------------------------------
# describe
# --------------------------------------------------------------------------

@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--timestamp-column", default="date", show_default=True)
@click.option("--columns", default=None, help="Comma-separated value columns.")
@click.option("--returns", is_flag=True, help="Also summarize log returns (two panels).")
@click.option("--format", "fmt", type=_FMT, default="markdown", show_default=True)
@click.option("--out", default=".", show_default=True, type=click.Path(file_okay=False))
@_analysis_errors
def describe(input_path, timestamp_column, columns, returns, fmt, out):
    """Descriptive statistics per column (levels, optionally returns)."""
    out_path = _out_dir(out)
    series = _load_series(input_path, timestamp_column, columns, returns=False)
    panels = [("level", ts.describe(series))]
    if returns:
        panels.append(("returns", ts.describe(ts.log_returns(series))))

    headers = ["panel", "series", *ts.StatsSummary.FIELDS]
    rows, payload = [], {"panels": {}}
    for panel, summary in panels:
        payload["panels"][panel] = {c: summary.for_column(c) for c in summary.columns}
        for c in summary.columns:
            d = summary.for_column(c)
            rows.append([panel, c, *[d[f] for f in ts.StatsSummary.FIELDS]])
    outputs = report.write_table(out_path / "describe", fmt, "Descriptive statistics",
                                 headers, rows, payload)
    report.write_manifest(
        out_path, "describe",
        {"input": input_path, "timestamp_column": timestamp_column, "columns": columns,
         "returns": returns, "format": fmt},
        {"input": input_path}, outputs + ["run.manifest.json"], __version__)
    click.echo(f"wrote {', '.join(outputs)} to {out_path}")


# --------------------------------------------------------------------------
# unitroot
# --------------------------------------------------------------------------

_TEST_RUNNERS = {
    "adf": lambda y, spec, max_lags, lag_rule: stationarity.adf_test(
        y, max_lags=max_lags, spec=spec, lag_rule=lag_rule),
    "pp": lambda y, spec, max_lags, lag_rule: stationarity.pp_test(y, spec=spec),
    "kpss": lambda y, spec, max_lags, lag_rule: stationarity.kpss_test(
        y, spec=spec if spec != "none" else "constant"),
}


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--timestamp-column", default="date", show_default=True)
@click.option("--columns", default=None, help="Comma-separated value columns.")
@click.option("--tests", default="adf,pp,kpss", show_default=True)
@click.option("--forms", default="level,log,return", show_default=True)
@click.option("--spec", type=click.Choice(["none", "constant", "constant+trend"]),
              default="constant", show_default=True,
              help="Deterministic terms; KPSS has no 'none' case and uses constant.")
@click.option("--max-lags", default=None, type=int)
@click.option("--lag-rule", type=click.Choice(["aic", "fixed"]), default="aic",
              show_default=True)
@click.option("--format", "fmt", type=_FMT, default="markdown", show_default=True)
@click.option("--out", default=".", show_default=True, type=click.Path(file_okay=False))
@_analysis_errors
def unitroot(input_path, timestamp_column, columns, tests, forms, spec, max_lags,
             lag_rule, fmt, out):
    """ADF / Phillips-Perron / KPSS grid over levels, logs, and returns."""
    test_names = _split_csv_list(tests)
    form_names = _split_csv_list(forms)
    for t in test_names:
        if t not in _TEST_RUNNERS:
            raise click.UsageError(f"unknown test {t!r} (choose from adf, pp, kpss)")
    for f in form_names:
        if f not in ("level", "log", "return"):
            raise click.UsageError(f"unknown form {f!r} (choose from level, log, return)")

    out_path = _out_dir(out)
    series = _load_series(input_path, timestamp_column, columns, returns=False)
    results = {}
    payload = {"results": []}
    for name in series.names:
        base = series.column(name)
        for form in form_names:
            if form == "level":
                y = base
            else:
                if (base <= 0).any():
                    raise click.ClickException(
                        f"column {name!r} has non-positive values; {form} form undefined")
                y = np.log(base) if form == "log" else np.diff(np.log(base))
            for t in test_names:
                res = _TEST_RUNNERS[t](y, spec, max_lags, lag_rule)
                results[(name, form, t)] = res
                payload["results"].append({"series": name, "form": form, **res.to_dict()})
    if fmt == "markdown":
        # grid layout: one row per (series, form), statistic (p-value) per test
        headers = ["series", "form"] + list(test_names)
        rows = []
        for name in series.names:
            for form in form_names:
                cells = []
                for t in test_names:
                    res = results[(name, form, t)]
                    cells.append(f"{res.statistic:.6g}"
                                 + (f" ({res.p_value:.4f})" if res.p_value is not None
                                    else ""))
                rows.append([name, form, *cells])
    else:
        headers = ["series", "form", "test", "statistic", "p_value",
                   "cv_1%", "cv_5%", "cv_10%", "lags", "decision"]
        rows = []
        for (name, form, t), res in results.items():
            rows.append([name, form, t, res.statistic, res.p_value,
                         res.critical_values[0.01], res.critical_values[0.05],
                         res.critical_values[0.10], res.lags_used, res.decision_hint])
    outputs = report.write_table(out_path / "unitroot", fmt, "Unit-root tests",
                                 headers, rows, payload)
    report.write_manifest(
        out_path, "unitroot",
        {"input": input_path, "timestamp_column": timestamp_column, "columns": columns,
         "tests": tests, "forms": forms, "spec": spec, "max_lags": max_lags,
         "lag_rule": lag_rule, "format": fmt},
        {"input": input_path}, outputs + ["run.manifest.json"], __version__)
    click.echo(f"wrote {', '.join(outputs)} to {out_path}")


# --------------------------------------------------------------------------
# lagselect / johansen
# --------------------------------------------------------------------------

@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--timestamp-column", default="date", show_default=True)
@click.option("--columns", default=None)
@click.option("--returns", is_flag=True, help="Analyze log returns of the input.")
@click.option("--max-lag", required=True, type=int)
@click.option("--format", "fmt", type=_FMT, default="markdown", show_default=True)
@click.option("--out", default=".", show_default=True, type=click.Path(file_okay=False))
@_analysis_errors
def lagselect(input_path, timestamp_column, columns, returns, max_lag, fmt, out):
    """Information-criterion VAR lag-order selection table."""
    out_path = _out_dir(out)
    series = _load_series(input_path, timestamp_column, columns, returns)
    table = var.lag_selection(series, max_lag)
    headers = ["lag", "log_likelihood", "fpe", "aic", "sc", "hq"]
    rows = []
    for lag in range(table.max_lag + 1):
        row = [lag, table.log_likelihood[lag]]
        for crit in table.CRITERIA:
            val = getattr(table, crit)[lag]
            cell = f"{val:.6g}*" if table.starred[crit] == lag else f"{val:.6g}"
            row.append(cell)
        rows.append(row)
    outputs = report.write_table(out_path / "lagselect", fmt, "VAR lag order selection",
                                 headers, rows, table.to_dict())
    report.write_manifest(
        out_path, "lagselect",
        {"input": input_path, "timestamp_column": timestamp_column, "columns": columns,
         "returns": returns, "max_lag": max_lag, "format": fmt},
        {"input": input_path}, outputs + ["run.manifest.json"], __version__)
    click.echo(f"wrote {', '.join(outputs)} to {out_path}; "
               f"starred: {table.starred}")


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--timestamp-column", default="date", show_default=True)
@click.option("--columns", default=None)
@click.option("--returns", is_flag=True, help="Analyze log returns of the input.")
@click.option("--log", "log_form", is_flag=True,
              help="Analyze natural logs of the input levels.")
@click.option("--lags", default=1, show_default=True, type=int,
              help="VAR order in levels.")
@click.option("--det", type=click.Choice(["none", "constant-in-CE", "constant"]),
              default="constant", show_default=True)
@click.option("--format", "fmt", type=_FMT, default="markdown", show_default=True)
@click.option("--out", default=".", show_default=True, type=click.Path(file_okay=False))
@_analysis_errors
def johansen(input_path, timestamp_column, columns, returns, log_form, lags, det, fmt, out):
    """Johansen trace / maximum-eigenvalue cointegration test."""
    if returns and log_form:
        raise click.UsageError("--returns and --log are mutually exclusive")
    out_path = _out_dir(out)
    series = _load_series(input_path, timestamp_column, columns, returns)
    if log_form:
        if (series.values <= 0).any():
            raise click.ClickException("log form undefined: non-positive values present")
        series = ts.TimeSeries(series.timestamps, series.names,
                               np.log(series.values), series.frequency)
    res = var.johansen_test(series, lags, det_spec=det)
    headers = ["rank_null", "eigenvalue", "trace", "trace_cv_10%", "trace_cv_5%",
               "trace_cv_1%", "maxeig", "maxeig_cv_10%", "maxeig_cv_5%", "maxeig_cv_1%"]
    rows = []
    for r in range(res.k):
        tcv, mcv = res.trace_critical_values[r], res.max_eigen_critical_values[r]
        rows.append([f"r<={r}" if r else "r=0", res.eigenvalues[r],
                     res.trace_statistics[r], tcv[0.10], tcv[0.05], tcv[0.01],
                     res.max_eigen_statistics[r], mcv[0.10], mcv[0.05], mcv[0.01]])
    outputs = report.write_table(out_path / "johansen", fmt, "Johansen cointegration test",
                                 headers, rows, res.to_dict())
    report.write_manifest(
        out_path, "johansen",
        {"input": input_path, "timestamp_column": timestamp_column, "columns": columns,
         "returns": returns, "log": log_form, "lags": lags, "det": det, "format": fmt},
        {"input": input_path}, outputs + ["run.manifest.json"], __version__)
    click.echo(f"wrote {', '.join(outputs)} to {out_path}; "
               f"selected rank {res.selected_rank}")


# --------------------------------------------------------------------------
# fit-msvar
# --------------------------------------------------------------------------

def _positive_regimes(ctx, param, value):
    if value < 2:
        raise click.BadParameter("Markov switching requires at least 2 regimes")
    return value


@main.command("fit-msvar")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--timestamp-column", default="date", show_default=True)
@click.option("--columns", default=None)
@click.option("--returns", is_flag=True, help="Fit on log returns of the input.")
@click.option("--regimes", default=2, show_default=True, callback=_positive_regimes)
@click.option("--lags", default=1, show_default=True, type=int)
@click.option("--switch", type=click.Choice(["mean", "intercept"]), default="mean",
              show_default=True)
@click.option("--switch-variance/--no-switch-variance", default=True, show_default=True)
@click.option("--switch-ar/--no-switch-ar", default=False, show_default=True)
@click.option("--restarts", default=5, show_default=True, type=int)
@click.option("--max-iter", default=200, show_default=True, type=int)
@click.option("--tol", default=1e-6, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--stderr/--no-stderr", "with_stderr", default=True, show_default=True,
              help="Wald standard errors from a numerical Hessian.")
@click.option("--format", "fmt", type=_FMT, default="markdown", show_default=True)
@click.option("--out", default=".", show_default=True, type=click.Path(file_okay=False))
@_analysis_errors
def fit_msvar(input_path, timestamp_column, columns, returns, regimes, lags, switch,
              switch_variance, switch_ar, restarts, max_iter, tol, seed, with_stderr,
              fmt, out):
    """EM fit of a Markov-switching VAR; model JSON, probability CSVs, report."""
    out_path = _out_dir(out)
    series = _load_series(input_path, timestamp_column, columns, returns)
    spec = msvar.MsVarSpec(k=series.k, q=lags, r=regimes, switch_target=switch,
                           switch_variance=switch_variance, switch_ar=switch_ar)
    fit = msvar.em_fit(series, spec, tol=tol, max_iter=max_iter,
                       restarts=restarts, seed=seed)
    model = fit.model
    outputs = ["model.json"]
    report.write_json(out_path / "model.json", model.to_dict())

    filt = fit.filter_output
    for label, probs in (("filtered", filt.marginal_filtered),
                         ("smoothed", filt.marginal_smoothed)):
        fname = f"{label}_probabilities.csv"
        with open(out_path / fname, "w", newline="", encoding="utf-8") as fh:
            fh.write(",".join(["date"] + [f"prob_regime_{m+1}" for m in range(regimes)])
                     + "\n")
            for t, row in zip(filt.timestamps, probs):
                fh.write(",".join([_stamp(t)] + [repr(float(p)) for p in row]) + "\n")
        outputs.append(fname)

    # parameter report
    errors = msvar.standard_errors(model, series) if with_stderr else {}
    headers = ["parameter", "estimate", "se", "p_value"]
    rows, payload_params = [], {}
    sigmas = model.sigmas()
    display = []
    for m in range(regimes):
        kind = "mean" if spec.mean_switching else "const"
        for j, name in enumerate(model.names):
            display.append((f"{kind}[regime {m + 1}][{name}]", model.means[m, j]))
    ar_blocks = range(regimes) if switch_ar else [None]
    for m in ar_blocks:
        tag = "shared" if m is None else f"regime {m + 1}"
        src = 0 if m is None else m
        for i in range(lags):
            for e, en in enumerate(model.names):
                for j, jn in enumerate(model.names):
                    display.append((f"ar[{tag}][lag {i + 1}][{en}<-{jn}]",
                                    model.ar_coefficients[src, i, e, j]))
    cov_blocks = range(regimes) if switch_variance else [None]
    for m in cov_blocks:
        tag = "shared" if m is None else f"regime {m + 1}"
        src = 0 if m is None else m
        for j, name in enumerate(model.names):
            display.append((f"sigma[{tag}][{name}]", sigmas[src, j]))
    for label, est in display:
        err = errors.get(label, {})
        rows.append([label, est, err.get("se"), err.get("p_value")])
        payload_params[label] = {"estimate": float(est), "se": err.get("se"),
                                 "p_value": err.get("p_value")}

    P = model.transitions.probs
    trans_rows = [[f"regime {i + 1}", *[P[i, j] for j in range(regimes)]]
                  for i in range(regimes)]
    try:
        ergodic = msvar.ergodic_distribution(model.transitions).tolist()
    except RegimeVarError:
        ergodic = None
    try:
        durations = msvar.expected_duration(model.transitions).tolist()
    except RegimeVarError:
        durations = None

    payload = {
        "model": model.to_dict(),
        "parameters": payload_params,
        "transition_matrix": P.tolist(),
        "ergodic_distribution": ergodic,
        "expected_durations": durations,
        "log_likelihood": model.log_likelihood,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "restarts": [{"index": r.index, "status": r.status, "iterations": r.iterations,
                      "log_likelihood": r.log_likelihood, "message": r.message}
                     for r in fit.restarts],
    }
    outputs += report.write_table(out_path / "msvar_params", fmt,
                                  "Markov-switching VAR estimates", headers, rows, payload)
    if fmt != "json":
        trans_headers = ["from \\ to", *[f"regime {j + 1}" for j in range(regimes)]]
        if ergodic is not None:
            trans_rows.append(["ergodic probability", *ergodic])
        if durations is not None:
            trans_rows.append(["expected duration", *durations])
        outputs += report.write_table(out_path / "msvar_transitions", fmt,
                                      "Transition probabilities", trans_headers,
                                      trans_rows, payload)

    report.probability_figure(out_path / "filtered_probabilities.svg", filt.timestamps,
                              filt.marginal_filtered, "Filtered regime probabilities")
    outputs.append("filtered_probabilities.svg")

    report.write_manifest(
        out_path, "fit-msvar",
        {"input": input_path, "timestamp_column": timestamp_column, "columns": columns,
         "returns": returns, "regimes": regimes, "lags": lags, "switch": switch,
         "switch_variance": switch_variance, "switch_ar": switch_ar,
         "restarts": restarts, "max_iter": max_iter, "tol": tol, "seed": seed,
         "stderr": with_stderr, "format": fmt},
        {"input": input_path}, outputs + ["run.manifest.json"], __version__)
    click.echo(f"wrote {', '.join(outputs)} to {out_path}; "
               f"loglik {model.log_likelihood:.4f}, converged={fit.converged}")


# --------------------------------------------------------------------------
# irf
# --------------------------------------------------------------------------

_SHOCK_MAP = {"unit": var.SHOCK_UNIT, "orthogonalized": var.SHOCK_ORTHOGONAL}


@main.command("irf")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--horizon", default=12, show_default=True, type=int)
@click.option("--regime", default=None, type=int,
              help="1-based regime for a regime-frozen IRF (switching models).")
@click.option("--shock", type=click.Choice(list(_SHOCK_MAP)), default="unit",
              show_default=True)
@click.option("--out", default=".", show_default=True, type=click.Path(file_okay=False))
@_analysis_errors
def irf_cmd(model_path, horizon, regime, shock, out):
    """Impulse responses from a saved model file (VAR or MS-VAR)."""
    out_path = _out_dir(out)
    doc = report.read_json(model_path)
    shock_type = _SHOCK_MAP[shock]
    if doc.get("type") == "msvar" or doc.get("format") == "regimevar-model":
        model = msvar.MsVarModel.from_dict(doc)
        if regime is None:
            raise click.UsageError("switching models need --regime (1-based)")
        result = msvar.regime_irf(model, regime - 1, horizon, shock_type=shock_type)
        title = f"Regime {regime} impulse responses"
    elif doc.get("type") == "var":
        model = var.VarModel.from_dict(doc)
        if regime is not None:
            raise click.UsageError("--regime only applies to switching models")
        result = var.irf(model, horizon, shock_type=shock_type)
        title = "Impulse responses"
    else:
        raise click.ClickException(f"{model_path}: not a recognized model document")

    report.write_irf_csv(out_path / "irf.csv", result.responses, result.names)
    report.write_json(out_path / "irf.json", result.to_dict())
    report.irf_figure(out_path / "irf.svg", result.responses, result.names, title)
    outputs = ["irf.csv", "irf.json", "irf.svg"]
    report.write_manifest(
        out_path, "irf",
        {"model": model_path, "horizon": horizon, "regime": regime, "shock": shock},
        {"model": model_path}, outputs + ["run.manifest.json"], __version__)
    if not result.stable:
        click.echo("warning: unstable dynamics; responses diverge", err=True)
    click.echo(f"wrote {', '.join(outputs)} to {out_path}")


# --------------------------------------------------------------------------
# event-study
# --------------------------------------------------------------------------

@main.command("event-study")
@click.option("--prices", "prices_path", required=True, type=click.Path(exists=True))
@click.option("--calendar", "calendar_path", required=True, type=click.Path(exists=True))
@click.option("--price-column", default=None, help="Column holding prices.")
@click.option("--timestamp-column", default="date", show_default=True)
@click.option("--window", default=1, show_default=True, type=int,
              help="Hours after each announcement for the event return.")
@click.option("--lags", default=1, show_default=True, type=int)
@click.option("--horizon", default=12, show_default=True, type=int)
@click.option("--shock", type=click.Choice(list(_SHOCK_MAP)), default="unit",
              show_default=True)
@click.option("--format", "fmt", type=_FMT, default="markdown", show_default=True)
@click.option("--out", default=".", show_default=True, type=click.Path(file_okay=False))
@_analysis_errors
def event_study(prices_path, calendar_path, price_column, timestamp_column, window,
                lags, horizon, shock, fmt, out):
    """Announcement-window VAR: event returns on rate changes, plus the IRF."""
    out_path = _out_dir(out)
    columns = (price_column,) if price_column else None
    prices = ts.load_csv(prices_path, timestamp_column=timestamp_column,
                         value_columns=columns)
    calendar = ts.load_event_calendar(calendar_path)
    panel = ts.event_returns(prices, calendar, window=window)
    model = var.fit_var(panel, lags)

    headers = ["equation", "regressor", "coefficient", "se"]
    rows = []
    for e, en in enumerate(model.names):
        rows.append([en, "const", model.intercept[e],
                     None if model.intercept_se is None else model.intercept_se[e]])
        for i in range(model.p):
            for j, jn in enumerate(model.names):
                se = None if model.lag_coefficient_se is None \
                    else model.lag_coefficient_se[i, e, j]
                rows.append([en, f"{jn}.l{i + 1}", model.lag_coefficients[i, e, j], se])
    payload = {"model": model.to_dict(), "events": len(panel), "window_hours": window}
    outputs = ["event_var.json"]
    report.write_json(out_path / "event_var.json", model.to_dict())
    outputs += report.write_table(out_path / "event_study", fmt,
                                  "Event-study VAR estimates", headers, rows, payload)

    result = var.irf(model, horizon, shock_type=_SHOCK_MAP[shock])
    report.write_irf_csv(out_path / "event_irf.csv", result.responses, result.names)
    report.irf_figure(out_path / "event_irf.svg", result.responses, result.names,
                      "Event-study impulse responses")
    outputs += ["event_irf.csv", "event_irf.svg"]
    report.write_manifest(
        out_path, "event-study",
        {"prices": prices_path, "calendar": calendar_path, "price_column": price_column,
         "timestamp_column": timestamp_column, "window": window, "lags": lags,
         "horizon": horizon, "shock": shock, "format": fmt},
        {"prices": prices_path, "calendar": calendar_path},
        outputs + ["run.manifest.json"], __version__)
    click.echo(f"wrote {', '.join(outputs)} to {out_path}")


if __name__ == "__main__":
    main()
