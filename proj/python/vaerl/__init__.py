"""Python access to the vaerl core: graph metrics, the toy model, baselines and the CLI."""

import json

from ._core import (
    ConfigError,
    DimensionError,
    Error,
    InvalidArgument,
    MissingArtifact,
    Topology,
    __version__,
    betweenness,
    config_hash,
    degrees,
    density_category,
    evaluate_random,
    link_slots,
    run_cli,
    welch_test,
)
from . import _core


def toy_report():
    """Flipping-rank toy model as a dict (networks, averages, ranks)."""
    return json.loads(_core.toy_report_json())


def toy_report_text():
    return _core.toy_report_text()


def profile(name="desk"):
    """Resolved configuration of a built-in profile."""
    return json.loads(_core.profile_json(name))


__all__ = [
    "ConfigError",
    "DimensionError",
    "Error",
    "InvalidArgument",
    "MissingArtifact",
    "Topology",
    "__version__",
    "betweenness",
    "config_hash",
    "degrees",
    "density_category",
    "evaluate_random",
    "link_slots",
    "profile",
    "run_cli",
    "toy_report",
    "toy_report_text",
    "welch_test",
]
