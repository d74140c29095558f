"""Checkpoint files: a JSON envelope holding base64-encoded float64 arrays.

Layout (``format_version`` 1)::

    {"format_version": 1, "timestamp": "...",
     "status": {"episode": ..., "epoch": ..., "best_validation_loss": ...},
     "model_names": [...],
     "models": {model: {param: {"shape": [...], "data": "<base64 <f8>"}}},
     "optimizer_state": {model: {param: {buffer: array-or-int}}}}
"""

from __future__ import annotations

import base64
import json
import math
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


@dataclass
class TrainingStatus:
    episode: int = 0
    epoch: int = 0
    best_validation_loss: float = math.inf

    def to_json(self) -> dict:
        best = self.best_validation_loss
        return {"episode": self.episode, "epoch": self.epoch,
                "best_validation_loss": best if math.isfinite(best) else None}

    @classmethod
    def from_json(cls, data: dict) -> "TrainingStatus":
        best = data.get("best_validation_loss")
        return cls(int(data.get("episode", 0)), int(data.get("epoch", 0)),
                   math.inf if best is None else float(best))


def encode_array(a) -> dict:
    a = np.asarray(a, dtype="<f8").copy(order="C")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def decode_array(entry: dict) -> np.ndarray:
    raw = base64.b64decode(entry["data"])
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(entry["shape"])


def _encode_buffer(value):
    return encode_array(value) if isinstance(value, np.ndarray) else value


def _decode_buffer(value):
    return decode_array(value) if isinstance(value, dict) and "data" in value else value


def checkpoint_dict(pipeline, status: TrainingStatus, optimizer=None, timestamp: str | None = None) -> dict:
    models = {name: {p: encode_array(v) for p, v in sorted(m.store.values.items())}
              for name, m in sorted(pipeline.models.items())}
    opt_state = {}
    if optimizer is not None:
        for store, params in sorted(optimizer.state_dict().items()):
            opt_state[store] = {p: {k: _encode_buffer(v) for k, v in sorted(buf.items())}
                                for p, buf in sorted(params.items())}
    return {
        "format_version": FORMAT_VERSION,
        "timestamp": timestamp or datetime.now().isoformat(timespec="seconds"),
        "status": status.to_json(),
        "model_names": sorted(models),
        "models": models,
        "optimizer_state": opt_state,
    }


def write_json_atomic(data: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            json.dump(data, handle, indent=1, sort_keys=True)
            handle.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_checkpoint(pipeline, status: TrainingStatus, path, optimizer=None,
                    timestamp: str | None = None) -> Path:
    """Write every model's parameters (and optimizer state) to ``path`` atomically."""
    write_json_atomic(checkpoint_dict(pipeline, status, optimizer, timestamp), path)
    return Path(path)


def read_checkpoint(path) -> dict:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path} is not a valid checkpoint: {exc}") from None
    if data.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format_version {data.get('format_version')!r}")
    return data


def list_models(path) -> list[str]:
    return list(read_checkpoint(path)["model_names"])


def load_parameters(path, saved_name: str) -> dict[str, np.ndarray]:
    data = read_checkpoint(path)
    if saved_name not in data["models"]:
        raise CheckpointError(f"{path} has no model {saved_name!r}; "
                              f"available: {', '.join(data['model_names']) or 'none'}")
    return {p: decode_array(e) for p, e in data["models"][saved_name].items()}


def load_into_component(path, saved_name: str, component) -> None:
    """Replace a model component's parameters with those saved under ``saved_name``.

    The component's frozen flag is left untouched.
    """
    params = load_parameters(path, saved_name)
    store = component.store
    missing = sorted(set(store.values) - set(params))
    extra = sorted(set(params) - set(store.values))
    if missing or extra:
        raise CheckpointError(f"{component.name}: parameter names differ from {saved_name!r} "
                              f"(missing {missing}, unexpected {extra})")
    for name, value in params.items():
        if value.shape != store.values[name].shape:
            raise CheckpointError(
                f"{component.name}: parameter {name!r} has shape {store.values[name].shape}, "
                f"checkpoint {saved_name!r} has {value.shape}")
    for name, value in params.items():
        store.assign(name, value)


def load_pipeline_state(path, pipeline, optimizer=None) -> TrainingStatus:
    """Restore all models present in the checkpoint (and optimizer state)."""
    data = read_checkpoint(path)
    for name, model in pipeline.models.items():
        if name in data["models"]:
            load_into_component(path, name, model)
    if optimizer is not None:
        optimizer.load_state_dict({
            store: {p: {k: _decode_buffer(v) for k, v in buf.items()} for p, buf in params.items()}
            for store, params in data.get("optimizer_state", {}).items()})
    return TrainingStatus.from_json(data["status"])


def load_configured(pipeline) -> list[str]:
    """Apply every component's ``load:`` setting; returns the loaded component names."""
    loaded = []
    for name, model in pipeline.models.items():
        if model.config.load_from is not None:
            path, saved_name = model.config.load_from
            load_into_component(path, saved_name, model)
            loaded.append(name)
    return loaded


def track_best(status: TrainingStatus, validation_loss: float, pipeline, exp_dir,
               optimizer=None, timestamp: str | None = None) -> bool:
    """Save ``best.ckpt`` when ``validation_loss`` strictly improves on the best so far."""
    if not math.isfinite(validation_loss):
        raise ValueError(f"validation loss is not finite: {validation_loss}")
    if validation_loss >= status.best_validation_loss:
        return False
    status.best_validation_loss = float(validation_loss)
    save_checkpoint(pipeline, status, Path(exp_dir) / "best.ckpt", optimizer, timestamp)
    return True
