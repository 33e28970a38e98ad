"""Dynamic principal-agent contracts on scenario trees."""

import json

from ._core import ContractError, oce_value
from . import _core

__all__ = ["ContractError", "oce_value", "parse_config", "solve", "verify"]


def parse_config(text):
    """Parse and validate INI text; returns the normalized configuration."""
    return json.loads(_core.parse_config(text))


def solve(config, mode=None, tol=None):
    """Solve, assemble and verify a configuration given as INI text; returns the report."""
    return json.loads(_core.solve(config, mode, tol))


def verify(config, report):
    """Re-verify a report (dict or JSON text) against its configuration."""
    text = report if isinstance(report, str) else json.dumps(report)
    return json.loads(_core.verify(config, text))
