"""Python access to the openinc C++ core."""

import json

from ._core import (
    ConfigError,
    OpenIncError,
    SessionFailure,
    auroc,
    ce_loss,
    generate_blobs,
    isometric_select,
    knn_class_similarity,
    osr_score,
    plan_sessions,
    response_kd_loss,
    rkd_loss,
    spread_report,
    supcon_loss,
)
from . import _core

__all__ = [
    "ConfigError",
    "OpenIncError",
    "SessionFailure",
    "auroc",
    "ce_loss",
    "generate_blobs",
    "isometric_select",
    "knn_class_similarity",
    "osr_score",
    "plan_sessions",
    "response_kd_loss",
    "rkd_loss",
    "run_experiment",
    "run_method",
    "spread_report",
    "supcon_loss",
    "validate_config",
]


def _text(config):
    return config if isinstance(config, str) else json.dumps(config)


def validate_config(config):
    """Raises ConfigError for an invalid config dict or JSON string."""
    _core.validate_config(_text(config))


def run_method(method, seed=1, dataset="default", **params):
    """Runs one method and returns the per-session reports as dicts."""
    config = {"dataset": dataset, "methods": [method], "seeds": [seed], **params}
    return _core.run_method(_text(config), 0, seed)


def run_experiment(config, threads=0):
    """Runs every (method, seed) pair of a config; returns (exit code, log)."""
    return _core.run_experiment(_text(config), threads)
