"""Configuration registry: YAML loading, deep merging and global parameters.

Configurations are plain nested dicts (the "config tree"). Keys can be
addressed with dotted paths, e.g. ``training.task.batch_size``.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

logger = logging.getLogger(__name__)

DEFAULT_CONFIGS_KEY = "default_configs"
MAX_INCLUDE_DEPTH = 32

SECTIONS = ("training", "validation", "test")
RESERVED_KEYS = frozenset(
    {"type", "priority", "streams", "globals", "freeze", "load", "disable"}
)

_MISSING = object()


class ConfigurationError(Exception):
    """Raised for malformed, inconsistent or unresolvable configuration."""


class GlobalParameterError(ConfigurationError):
    pass


# ---------------------------------------------------------------------------
# Config trees
# ---------------------------------------------------------------------------

def merge(base: Mapping, override: Mapping) -> dict:
    """Deep-merge ``override`` into a copy of ``base``.

    Nested maps are merged recursively; anything else in ``override``
    (scalars, lists, or a map replacing a scalar) replaces the base value.
    Neither argument is modified.
    """
    merged = copy.deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def get_path(tree: Mapping, path: str, default: Any = _MISSING) -> Any:
    node: Any = tree
    for part in path.split("."):
        if not isinstance(node, Mapping) or part not in node:
            if default is _MISSING:
                raise KeyError(path)
            return default
        node = node[part]
    return node


def set_path(tree: dict, path: str, value: Any) -> None:
    """Set ``value`` at a dotted path, creating intermediate maps."""
    parts = path.split(".")
    node = tree
    for part in parts[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            child = node[part] = {}
        node = child
    node[parts[-1]] = value


def parse_override(text: str) -> tuple[str, Any]:
    """Parse a ``key.path=value`` command-line override.

    The value is interpreted as a YAML scalar, so ``64`` becomes an int and
    ``[1, 2]`` a list.
    """
    key, sep, raw = text.partition("=")
    key = key.strip()
    if not sep or not key or any(not part for part in key.split(".")):
        raise ConfigurationError(f"cannot parse override {text!r}; expected key.path=value")
    try:
        value = yaml.safe_load(raw) if raw.strip() else ""
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse value of override {text!r}: {exc}") from None
    return key, value


def apply_overrides(tree: Mapping, overrides) -> dict:
    """Apply ``key.path=value`` strings (or (key, value) pairs) as a final merge layer."""
    layer: dict = {}
    for item in overrides:
        key, value = parse_override(item) if isinstance(item, str) else item
        set_path(layer, key, value)
    return merge(tree, layer)


def _read_yaml(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigurationError(f"configuration file not found: {path}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark is not None else str(path)
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigurationError(f"YAML parse error in {where}: {problem}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top level must be a map, got {type(data).__name__}")
    return data


def _load_layered(path: Path, stack: tuple[Path, ...]) -> dict:
    path = path.resolve()
    if path in stack:
        chain = " -> ".join(str(p) for p in (*stack, path))
        raise ConfigurationError(
            f"{DEFAULT_CONFIGS_KEY} cycle between {stack[-1]} and {path} ({chain})"
        )
    if len(stack) >= MAX_INCLUDE_DEPTH:
        raise ConfigurationError(
            f"{DEFAULT_CONFIGS_KEY} nesting deeper than {MAX_INCLUDE_DEPTH} at {path}"
        )
    raw = _read_yaml(path)
    includes = raw.pop(DEFAULT_CONFIGS_KEY, None)
    tree: dict = {}
    if includes:
        if isinstance(includes, str):
            includes = includes.split(",")
        for rel in includes:
            rel = str(rel).strip()
            if rel:
                tree = merge(tree, _load_layered(path.parent / rel, (*stack, path)))
    return merge(tree, raw)


def load_config(paths) -> dict:
    """Load and merge YAML files left to right (later files win).

    ``paths`` may be a single path, a comma-separated string or a list.
    Files may pull in others through a top-level ``default_configs`` key,
    resolved relative to the referring file; the referring file takes
    precedence over what it includes.
    """
    if isinstance(paths, (str, Path)):
        paths = [p for p in str(paths).split(",") if p.strip()]
    tree: dict = {}
    for p in paths:
        tree = merge(tree, _load_layered(Path(p.strip() if isinstance(p, str) else p), ()))
    return tree


def dump_config(tree: Mapping) -> str:
    return yaml.safe_dump(dict(tree), default_flow_style=False, sort_keys=False)


# ---------------------------------------------------------------------------
# Global parameters
# ---------------------------------------------------------------------------

@dataclass
class GlobalParams:
    """Write-once store of values shared between components."""

    entries: dict = field(default_factory=dict)
    publishers: dict = field(default_factory=dict)
    frozen: bool = False

    def publish(self, key: str, value: Any, publisher: str) -> None:
        if not key:
            raise GlobalParameterError("global parameter key must be nonempty")
        if key in self.entries:
            if self.entries[key] == value:
                return
            raise GlobalParameterError(
                f"global {key!r} already set to {self.entries[key]!r} by "
                f"{self.publishers[key]!r}; {publisher!r} tried to set {value!r}"
            )
        if self.frozen:
            raise GlobalParameterError(f"cannot publish {key!r} after initialization")
        self.entries[key] = value
        self.publishers[key] = publisher

    def get(self, key: str, reader: str = "?") -> Any:
        try:
            return self.entries[key]
        except KeyError:
            raise GlobalParameterError(
                f"{reader!r} reads global {key!r} which nobody published"
            ) from None

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def freeze(self) -> None:
        self.frozen = True


# ---------------------------------------------------------------------------
# Component configuration
# ---------------------------------------------------------------------------

@dataclass
class ComponentConfig:
    name: str
    type_id: str
    priority: float | None = None
    stream_remap: dict = field(default_factory=dict)
    global_remap: dict = field(default_factory=dict)
    frozen: bool = False
    load_from: tuple[str, str] | None = None
    disable: tuple[str, ...] = ()
    params: dict = field(default_factory=dict)

    def stream(self, default: str) -> str:
        return self.stream_remap.get(default, default)

    def global_key(self, default: str) -> str:
        return self.global_remap.get(default, default)


def _remap_table(section: Mapping, key: str, name: str) -> dict:
    table = section.get(key) or {}
    if not isinstance(table, Mapping):
        raise ConfigurationError(f"{name}: '{key}' must be a map of default name -> actual name")
    out = {}
    for src, dst in table.items():
        if not isinstance(dst, str) or not dst:
            raise ConfigurationError(f"{name}: {key}.{src} must be a nonempty string")
        out[str(src)] = dst
    return out


def _parse_load(value: Any, name: str) -> tuple[str, str] | None:
    if value in (None, False, ""):
        return None
    if isinstance(value, str):
        return value, name
    if isinstance(value, Mapping) and "file" in value:
        return str(value["file"]), str(value.get("model", name))
    raise ConfigurationError(f"{name}: 'load' must be a path or {{file: ..., model: ...}}")


def resolve_component_config(type_defaults: Mapping, section: Mapping, name: str,
                             require_priority: bool = True) -> ComponentConfig:
    """Build a :class:`ComponentConfig` from defaults plus an experiment section."""
    if not isinstance(section, Mapping):
        raise ConfigurationError(f"section of component {name!r} must be a map")
    if "type" not in section:
        raise ConfigurationError(f"component {name!r} has no 'type'")

    priority = section.get("priority")
    if priority is None:
        if require_priority:
            raise ConfigurationError(f"component {name!r} has no 'priority'")
    else:
        if isinstance(priority, bool):
            raise ConfigurationError(f"component {name!r}: priority must be numeric")
        try:
            priority = float(priority)
        except (TypeError, ValueError):
            raise ConfigurationError(
                f"component {name!r}: priority {priority!r} is not numeric"
            ) from None
        if not math.isfinite(priority):
            raise ConfigurationError(f"component {name!r}: priority must be finite")

    disable = section.get("disable") or ()
    if isinstance(disable, str):
        disable = [s.strip() for s in disable.split(",") if s.strip()]
    params = {k: v for k, v in section.items() if k not in RESERVED_KEYS}
    unknown = sorted(set(params) - set(type_defaults))
    if unknown:
        logger.warning("component %r (%s): ignoring unknown keys %s",
                       name, section["type"], ", ".join(unknown))
    return ComponentConfig(
        name=name,
        type_id=str(section["type"]),
        priority=priority,
        stream_remap=_remap_table(section, "streams", name),
        global_remap=_remap_table(section, "globals", name),
        frozen=bool(section.get("freeze", False)),
        load_from=_parse_load(section.get("load"), name),
        disable=tuple(disable),
        params=merge(type_defaults, params),
    )
