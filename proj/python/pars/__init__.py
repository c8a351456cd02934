"""Python access to the noisy-label training core.

Configs are plain dicts with the same keys as the JSON files the ``pars``
command line tool reads.
"""

import json

from . import _core

softmax = _core.softmax
nl = _core.nl
confidence_penalty = _core.confidence_penalty
select = _core.select
make_pseudo = _core.make_pseudo
cosine_lr = _core.cosine_lr
inject_noise = _core.inject_noise

__all__ = [
    "softmax", "loss", "nl", "confidence_penalty", "select", "make_pseudo", "cosine_lr",
    "inject_noise", "resolve_config", "generate", "train", "run",
]


def loss(spec, probs, label):
    """Value and logit gradient of a loss given by name or dict, e.g. "mae" or
    {"name": "apl", "active": "nce", "passive": "rce"}."""
    return _core.loss(json.dumps(spec), list(probs), int(label))


def resolve_config(config):
    """Validated config with every default filled in. Raises ValueError naming the bad key."""
    return json.loads(_core.resolve_config(json.dumps(config)))


def generate(config, seed=0):
    """Train/test splits (features, clean and noisy labels) the config would train on."""
    return _core.generate(json.dumps(config), seed)


def train(config, seed=0):
    """One training run; returns the per-epoch metrics as dicts."""
    return _core.train(json.dumps(config), seed)


def run(config, jobs=0):
    """All seeds of a config, artifacts written to config["out"]; returns the summary."""
    return json.loads(_core.run(json.dumps(config), jobs))
