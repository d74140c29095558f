"""Stream values, batches and the definitions checked during handshaking.

Values carried by streams are plain Python/numpy objects:

* numeric array -- ``np.ndarray`` of float64, first dim is the batch
* index list    -- 1-D ``np.ndarray`` of non-negative int64
* string list   -- ``list`` / ``tuple`` of ``str``
* scalar        -- ``float``
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Iterator, Mapping

import numpy as np

BATCH = "BATCH"
ANY = "ANY"


class Kind(str, enum.Enum):
    NUMERIC_ARRAY = "numeric_array"
    INDEX_LIST = "index_list"
    STRING_LIST = "string_list"
    SCALAR = "scalar"
    # Accepts any produced kind; used by pass-through consumers (viewers, exporters).
    ANY = "any"


class StreamCollisionError(KeyError):
    pass


@dataclass(frozen=True)
class StreamDefinition:
    kind: Kind
    shape: tuple = ()
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "shape", tuple(self.shape))
        if self.kind is Kind.NUMERIC_ARRAY:
            if not self.shape or self.shape[0] != BATCH:
                raise ValueError(f"numeric array pattern must start with BATCH: {self.shape}")
            for dim in self.shape[1:]:
                if dim not in (BATCH, ANY) and not (isinstance(dim, int) and dim >= 1):
                    raise ValueError(f"invalid dimension {dim!r} in {self.shape}")
        elif self.shape:
            raise ValueError(f"{self.kind.value} streams take no shape pattern")

    def __str__(self):
        if self.kind is Kind.NUMERIC_ARRAY:
            return f"{self.kind.value}[{', '.join(str(d) for d in self.shape)}]"
        return self.kind.value


def numeric(*dims, description: str = "") -> StreamDefinition:
    """Shorthand: ``numeric(BATCH, 10)``."""
    return StreamDefinition(Kind.NUMERIC_ARRAY, dims, description)


def index_list(description: str = "") -> StreamDefinition:
    return StreamDefinition(Kind.INDEX_LIST, (), description)


def string_list(description: str = "") -> StreamDefinition:
    return StreamDefinition(Kind.STRING_LIST, (), description)


def scalar(description: str = "") -> StreamDefinition:
    return StreamDefinition(Kind.SCALAR, (), description)


def any_stream(description: str = "") -> StreamDefinition:
    return StreamDefinition(Kind.ANY, (), description)


def definition_satisfies(produced: StreamDefinition, required: StreamDefinition) -> bool:
    """Whether a stream produced as ``produced`` can feed a consumer requiring ``required``."""
    if required.kind is Kind.ANY:
        return True
    if produced.kind is not required.kind:
        return False
    if produced.kind is not Kind.NUMERIC_ARRAY:
        return True
    if len(produced.shape) != len(required.shape):
        return False
    for have, want in zip(produced.shape, required.shape):
        if want == ANY:
            continue
        if have != want:
            return False
    return True


def kind_of(value: Any) -> Kind | None:
    if isinstance(value, np.ndarray):
        if np.issubdtype(value.dtype, np.floating):
            return Kind.NUMERIC_ARRAY
        if np.issubdtype(value.dtype, np.integer) and value.ndim == 1:
            return Kind.INDEX_LIST
        return None
    if isinstance(value, (list, tuple)) and all(isinstance(v, str) for v in value):
        return Kind.STRING_LIST
    if isinstance(value, (float, int)) and not isinstance(value, bool):
        return Kind.SCALAR
    return None


def _freeze(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        value = value.view()
        value.flags.writeable = False
    elif isinstance(value, list):
        value = tuple(value)
    return value


class Batch:
    """Ordered mapping of stream name to value for one mini-batch.

    Streams can be added but never replaced or removed.
    """

    def __init__(self, streams: Mapping[str, Any] | None = None, batch_size: int | None = None,
                 sample_indices=None):
        self._streams: dict[str, Any] = {}
        if sample_indices is not None:
            sample_indices = tuple(int(i) for i in sample_indices)
        if batch_size is None:
            if sample_indices is None:
                raise ValueError("batch_size or sample_indices required")
            batch_size = len(sample_indices)
        if batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {batch_size}")
        self.batch_size = int(batch_size)
        self.sample_indices = sample_indices if sample_indices is not None else tuple(range(batch_size))
        for name, value in (streams or {}).items():
            self.add(name, value)

    def add(self, name: str, value: Any) -> None:
        if name in self._streams:
            raise StreamCollisionError(f"stream {name!r} already present in batch")
        self._streams[name] = _freeze(value)

    def __getitem__(self, name: str) -> Any:
        try:
            return self._streams[name]
        except KeyError:
            raise KeyError(f"stream {name!r} not in batch (have: {', '.join(self._streams)})") from None

    def __contains__(self, name: object) -> bool:
        return name in self._streams

    def __iter__(self) -> Iterator[str]:
        return iter(self._streams)

    def __len__(self) -> int:
        return len(self._streams)

    def items(self):
        return self._streams.items()

    def copy(self) -> "Batch":
        new = Batch(batch_size=self.batch_size, sample_indices=self.sample_indices)
        new._streams = dict(self._streams)
        return new

    def __repr__(self):
        return f"Batch(size={self.batch_size}, streams={list(self._streams)})"


def _check_value(name: str, value: Any, definition: StreamDefinition, batch_size: int) -> list[str]:
    kind = kind_of(value)
    if definition.kind is Kind.ANY:
        return [] if kind is not None else [f"{name}: unrecognized value type {type(value).__name__}"]
    if kind is not definition.kind:
        got = kind.value if kind else type(value).__name__
        return [f"{name}: expected {definition.kind.value}, got {got}"]
    if kind is Kind.NUMERIC_ARRAY:
        if value.ndim != len(definition.shape):
            return [f"{name}: expected rank {len(definition.shape)} {definition}, got shape {value.shape}"]
        for axis, (dim, want) in enumerate(zip(value.shape, definition.shape)):
            if want == BATCH and dim != batch_size:
                return [f"{name}: dim {axis} is {dim}, batch size is {batch_size}"]
            if isinstance(want, int) and dim != want:
                return [f"{name}: dim {axis} is {dim}, expected {want} ({definition})"]
    elif kind is Kind.INDEX_LIST:
        if len(value) != batch_size:
            return [f"{name}: length {len(value)} does not match batch size {batch_size}"]
        if len(value) and value.min() < 0:
            return [f"{name}: negative index"]
    elif kind is Kind.STRING_LIST:
        if len(value) != batch_size:
            return [f"{name}: length {len(value)} does not match batch size {batch_size}"]
    return []


def validate_batch(batch: Batch, definitions: Mapping[str, StreamDefinition]) -> list[str]:
    """Check concrete batch contents against definitions; returns all violations."""
    if not definitions:
        raise ValueError("no definitions to validate against")
    violations = []
    for name, definition in definitions.items():
        if name not in batch:
            violations.append(f"{name}: missing from batch")
            continue
        violations.extend(_check_value(name, batch[name], definition, batch.batch_size))
    return violations


class GradTable:
    """Gradients of the loss w.r.t. stream values, summed over consumers."""

    def __init__(self):
        self._grads: dict[str, np.ndarray] = {}

    def add(self, name: str, grad, like=None) -> None:
        grad = np.asarray(grad, dtype=np.float64)
        if like is not None and grad.shape != np.shape(like):
            raise ValueError(f"gradient for stream {name!r} has shape {grad.shape}, "
                             f"stream value has {np.shape(like)}")
        if name in self._grads:
            if self._grads[name].shape != grad.shape:
                raise ValueError(f"gradient shape mismatch for stream {name!r}: "
                                 f"{self._grads[name].shape} vs {grad.shape}")
            self._grads[name] = self._grads[name] + grad
        else:
            self._grads[name] = grad.copy()

    def get(self, name: str):
        return self._grads.get(name)

    def __contains__(self, name: object) -> bool:
        return name in self._grads

    def __getitem__(self, name: str) -> np.ndarray:
        return self._grads[name]

    def __iter__(self):
        return iter(self._grads)
