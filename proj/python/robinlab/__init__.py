"""Robin harmonic measure on rough planar domains (C++ core)."""

import json as _json

from ._core import *  # noqa: F401,F403
from ._core import RobinlabError, canonical_config as _canonical, run_experiment as _run


def run(config):
    """Run an experiment from a dict or JSON text; returns the report as a dict."""
    text = config if isinstance(config, str) else _json.dumps(config)
    return _json.loads(_run(text))


def canonical_config(config):
    """Parse, validate and re-serialize a config; returns a dict."""
    text = config if isinstance(config, str) else _json.dumps(config)
    return _json.loads(_canonical(text))


__all__ = [name for name in dir() if not name.startswith("_")]
