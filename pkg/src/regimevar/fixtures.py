"""Locate the repository's fixture CSVs.

Tests and examples resolve fixtures through here; the REGIMEVAR_FIXTURES
environment variable overrides the default ``fixtures/`` directory at the
repository root.
"""

from __future__ import annotations

import os
from pathlib import Path

from .errors import DataError

ENV_VAR = "REGIMEVAR_FIXTURES"


def fixtures_dir() -> Path:
    override = os.environ.get(ENV_VAR)
    if override:
        return Path(override)
    return Path(__file__).resolve().parents[2] / "fixtures"


def fixture_path(name: str) -> Path:
    path = fixtures_dir() / name
    if not path.exists():
        raise DataError(f"fixture {name!r} not found under {fixtures_dir()} "
                        f"(set {ENV_VAR} to override)")
    return path
