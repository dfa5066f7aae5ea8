"""Python access to the muplab core: schemes, training, diagnostics, infinite width."""

import json as _json

from ._core import (
    MuplabError,
    ValidationError,
    activation,
    activation_names,
    check_dataset,
    cli,
    feature_change,
    good_suite,
    layer_plan,
    min_eig,
    spacetime_min_eig,
)
from . import _core


def _dump(config):
    return config if isinstance(config, str) else _json.dumps(config)


def train(config, scheme="mup", width=64, seed=42):
    """Train one network; config is a dict or JSON string in the sweep format."""
    return _core.train(_dump(config), scheme, width, seed)


def sweep_csv(config, workers=0):
    return _core.sweep_csv(_dump(config), workers)


def infwidth(config):
    """Simulate the limit; returns {"f": [[...]], "chi": [[...]]} indexed [step][sample]."""
    return _core.infwidth(_dump(config))


__all__ = [
    "MuplabError",
    "ValidationError",
    "activation",
    "activation_names",
    "check_dataset",
    "cli",
    "feature_change",
    "good_suite",
    "infwidth",
    "layer_plan",
    "min_eig",
    "spacetime_min_eig",
    "sweep_csv",
    "train",
]
