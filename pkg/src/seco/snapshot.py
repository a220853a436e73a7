"""Versioned JSON snapshots of a training state."""

import json

import numpy as np

from . import model
from .config import ExperimentConfig
from .errors import InvalidConfigError, SnapshotError
from .prototypes import PrototypeBank

SNAPSHOT_VERSION = 1


def _flat(params, keys):
    return {
        "shapes": {k: list(params[k].shape) for k in keys},
        "values": model.flatten(params, keys).tolist(),
    }


def _unflat(d, keys):
    shapes = {k: tuple(d["shapes"][k]) for k in keys}
    return model.unflatten(np.asarray(d["values"], dtype=np.float64), shapes, keys)


def state_to_dict(state, cfg):
    return {
        "version": SNAPSHOT_VERSION,
        "step": int(state.step),
        "config": cfg.to_dict(),
        "params": _flat(state.params, model.PARAM_KEYS),
        "teacher": _flat(state.teacher, model.ENCODER_KEYS),
        "bank": state.bank.to_dict(),
    }


def save_snapshot(state, cfg, path):
    with open(path, "w") as fh:
        json.dump(state_to_dict(state, cfg), fh, sort_keys=True)
        fh.write("\n")


def load_snapshot(path):
    """Returns ``(params, teacher, bank, cfg, step)``; raises SnapshotError on
    unreadable, malformed or wrong-version files."""
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SnapshotError(f"cannot read snapshot {path}: {exc}") from exc
    if not isinstance(d, dict):
        raise SnapshotError("snapshot is not a JSON object")
    if d.get("version") != SNAPSHOT_VERSION:
        raise SnapshotError(
            f"snapshot version {d.get('version')!r} does not match {SNAPSHOT_VERSION}"
        )
    try:
        cfg = ExperimentConfig.from_dict(d["config"])
        params = _unflat(d["params"], model.PARAM_KEYS)
        teacher = _unflat(d["teacher"], model.ENCODER_KEYS)
        bank = PrototypeBank.from_dict(d["bank"])
        step = int(d["step"])
    except (KeyError, TypeError, ValueError, InvalidConfigError) as exc:
        raise SnapshotError(f"malformed snapshot: {exc}") from exc
    sc = cfg.scenario
    expected = model.init_params(sc.feature_dim, sc.embed_dim, sc.num_classes, np.random.default_rng(0))
    for k in model.PARAM_KEYS:
        if params[k].shape != expected[k].shape:
            raise SnapshotError(f"parameter {k} has shape {params[k].shape}, expected {expected[k].shape}")
    if bank.vectors.shape != (sc.num_classes, sc.embed_dim) or bank.initialized.shape != (sc.num_classes,):
        raise SnapshotError("prototype bank shape does not match the config")
    for name, arr in [("bank", bank.vectors)] + [(k, v) for k, v in params.items()]:
        if not np.all(np.isfinite(arr)):
            raise SnapshotError(f"non-finite values in {name}")
    return params, teacher, bank, cfg, step
