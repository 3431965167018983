"""Report rendering: delimited tables, canonical JSON, run manifests, figures.

Everything written here is deterministic for fixed inputs: JSON is emitted
with sorted keys, figures carry no timestamps and use a fixed SVG hash salt,
and manifests record content hashes rather than mtimes, so re-running a
command reproduces its outputs byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

FORMATS = ("markdown", "csv", "json")


def content_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(canonical_json(obj), encoding="utf-8")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if v != v:
            return "nan"
        return f"{v:.6g}"
    return str(v)


def render_markdown(title: str, headers: list[str], rows: list[list]) -> str:
    out = [f"# {title}", ""]
    cells = [[fmt_cell(c) for c in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h)
              for i, h in enumerate(headers)]
    fmt_row = lambda row: "| " + " | ".join(c.ljust(w) for c, w in zip(row, widths)) + " |"
    out.append(fmt_row(headers))
    out.append("|" + "|".join("-" * (w + 2) for w in widths) + "|")
    out.extend(fmt_row(r) for r in cells)
    out.append("")
    return "\n".join(out)


def write_table(path_base: Path, fmt: str, title: str, headers: list[str],
                rows: list[list], json_payload: dict) -> list[str]:
    """Write one report table in the chosen format; returns file names written."""
    if fmt == "markdown":
        path = path_base.with_suffix(".md")
        path.write_text(render_markdown(title, headers, rows), encoding="utf-8")
    elif fmt == "csv":
        path = path_base.with_suffix(".csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(headers)
            for row in rows:
                writer.writerow([repr(float(c)) if isinstance(c, float) else fmt_cell(c)
                                 for c in row])
    elif fmt == "json":
        path = path_base.with_suffix(".json")
        write_json(path, json_payload)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return [path.name]


def write_manifest(out_dir: Path, command: str, flags: dict, inputs: dict,
                   outputs: list[str], version: str) -> None:
    manifest = {
        "command": command,
        "toolkit_version": version,
        "flags": {k: v for k, v in sorted(flags.items())},
        "inputs": {str(p): content_hash(p) for p in inputs.values() if p is not None},
        "outputs": sorted(outputs),
    }
    write_json(out_dir / "run.manifest.json", manifest)


# --------------------------------------------------------------------------
# Figures (matplotlib, rendered to SVG next to the delimited output)
# --------------------------------------------------------------------------

def _matplotlib():
    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "regimevar"
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})


def probability_figure(path, timestamps, probs: np.ndarray, title: str) -> None:
    """Stacked per-regime panels of regime probabilities over time."""
    plt = _matplotlib()
    r = probs.shape[1]
    fig, axes = plt.subplots(r, 1, figsize=(8, 2.2 * r), sharex=True, squeeze=False)
    x = np.asarray(timestamps).astype("datetime64[s]").astype("datetime64[D]")
    for m in range(r):
        ax = axes[m, 0]
        ax.plot(x, probs[:, m], lw=1.0)
        ax.set_ylim(-0.05, 1.05)
        ax.set_ylabel(f"regime {m + 1}")
    axes[0, 0].set_title(title)
    fig.autofmt_xdate()
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def irf_figure(path, responses: np.ndarray, names: tuple[str, ...], title: str) -> None:
    """k x k grid: response of variable i (row) to a shock in variable j (col)."""
    plt = _matplotlib()
    H1, k, _ = responses.shape
    fig, axes = plt.subplots(k, k, figsize=(3.2 * k, 2.4 * k), squeeze=False,
                             sharex=True)
    h = np.arange(H1)
    for i in range(k):
        for j in range(k):
            ax = axes[i, j]
            ax.plot(h, responses[:, i, j], lw=1.2)
            ax.axhline(0.0, color="grey", lw=0.6)
            ax.set_title(f"{names[i]} <- {names[j]}", fontsize=9)
    for j in range(k):
        axes[-1, j].set_xlabel("horizon")
    fig.suptitle(title)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def series_figure(path, timestamps, values: np.ndarray, names: tuple[str, ...],
                  title: str) -> None:
    plt = _matplotlib()
    k = values.shape[1]
    fig, axes = plt.subplots(k, 1, figsize=(8, 2.2 * k), sharex=True, squeeze=False)
    x = np.asarray(timestamps).astype("datetime64[s]").astype("datetime64[D]")
    for j in range(k):
        ax = axes[j, 0]
        ax.plot(x, values[:, j], lw=0.9)
        ax.set_ylabel(names[j])
    axes[0, 0].set_title(title)
    fig.autofmt_xdate()
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def irf_csv_rows(responses: np.ndarray, names: tuple[str, ...]):
    """Rows (horizon, response_i_to_j...) matching the documented CSV schema."""
    H1, k, _ = responses.shape
    headers = ["horizon"] + [f"response_{names[i]}_to_{names[j]}"
                             for i in range(k) for j in range(k)]
    rows = []
    for h in range(H1):
        rows.append([h] + [float(responses[h, i, j]) for i in range(k) for j in range(k)])
    return headers, rows


def write_irf_csv(path, responses: np.ndarray, names: tuple[str, ...]) -> None:
    headers, rows = irf_csv_rows(responses, names)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(headers)
        for row in rows:
            writer.writerow([row[0]] + [repr(v) for v in row[1:]])
