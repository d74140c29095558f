"""Non-trainable stream transformations."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ptp.components.base import Component, register
from ptp.config import ConfigurationError
from ptp.streams import ANY, BATCH, index_list, numeric, string_list

UNK = "<unk>"


class Vocabulary:
    """Bijective token <-> index mapping with contiguous indices from 0."""

    def __init__(self, tokens, unk_policy: str = "error"):
        if unk_policy not in ("error", "unk_token"):
            raise ConfigurationError(f"unknown unk_policy {unk_policy!r}")
        tokens = list(dict.fromkeys(tokens))
        if unk_policy == "unk_token" and UNK not in tokens:
            tokens.insert(0, UNK)
        self.tokens = tokens
        self.index = {t: i for i, t in enumerate(tokens)}
        self.unk_policy = unk_policy

    def __len__(self):
        return len(self.tokens)

    def encode(self, labels) -> np.ndarray:
        out = np.empty(len(labels), dtype=np.int64)
        for i, token in enumerate(labels):
            if token in self.index:
                out[i] = self.index[token]
            elif self.unk_policy == "unk_token":
                out[i] = self.index[UNK]
            else:
                raise KeyError(f"unknown token {token!r} at sample {i}")
        return out

    def decode(self, indices) -> list[str]:
        return [self.tokens[i] for i in indices]


@register("label_indexer")
class LabelIndexer(Component):
    """Maps string labels to class indices and publishes ``num_classes``.

    ``vocab_source`` is either ``from_data`` (sorted unique labels of the
    training task) or a path to a whitespace-separated token file.
    """

    defaults = {"vocab_source": "from_data", "unk_policy": "error"}

    def __init__(self, config, seed=1337, workdir=None):
        super().__init__(config, seed, workdir)
        self.vocabulary: Vocabulary | None = None

    def fit(self, task) -> None:
        if self.params["vocab_source"] != "from_data" or self.vocabulary is not None:
            return
        labels = task.stream_values(self.stream("labels"))
        self.vocabulary = Vocabulary(sorted(set(labels)), self.params["unk_policy"])

    def initialize(self, globals_):
        source = self.params["vocab_source"]
        if source != "from_data":
            path = Path(source)
            try:
                tokens = path.read_text(encoding="utf-8").split()
            except OSError as exc:
                raise ConfigurationError(f"{self.name}: cannot read vocabulary {path}: {exc}") from None
            self.vocabulary = Vocabulary(tokens, self.params["unk_policy"])
        if self.vocabulary is None:
            raise ConfigurationError(f"{self.name}: no task data to build the vocabulary from")
        self.publish_global(globals_, "num_classes", len(self.vocabulary))

    def input_definitions(self):
        return {"labels": string_list()}

    def output_definitions(self):
        return {"targets": index_list()}

    def execute(self, batch):
        batch.add(self.stream("targets"), self.vocabulary.encode(batch[self.stream("labels")]))


@register("one_hot")
class OneHot(Component):
    defaults = {"num_classes": None}

    def initialize(self, globals_):
        n = self.params.get("num_classes")
        self.num_classes = int(n if n is not None else self.get_global(globals_, "num_classes"))

    def input_definitions(self):
        return {"targets": index_list()}

    def output_definitions(self):
        return {"one_hot": numeric(BATCH, getattr(self, "num_classes", None) or ANY)}

    def execute(self, batch):
        idx = batch[self.stream("targets")]
        if len(idx) and (idx.max() >= self.num_classes or idx.min() < 0):
            raise IndexError(f"{self.name}: index {int(idx.max())} out of range "
                             f"for {self.num_classes} classes")
        out = np.zeros((len(idx), self.num_classes))
        out[np.arange(len(idx)), idx] = 1.0
        batch.add(self.stream("one_hot"), out)


@register("concat")
class Concat(Component):
    """Concatenates rank-2 streams along the feature axis.

    Publishes the output width as global ``output_size``.
    """

    defaults = {"input_streams": [], "input_sizes": None, "output_stream": "concatenated"}
    differentiable = True

    def __init__(self, config, seed=1337, workdir=None):
        super().__init__(config, seed, workdir)
        self.inputs = [str(s) for s in self.params["input_streams"]]
        if not self.inputs:
            raise ConfigurationError(f"{self.name}: input_streams must list at least one stream")
        sizes = self.params.get("input_sizes")
        if sizes is not None and len(sizes) != len(self.inputs):
            raise ConfigurationError(f"{self.name}: input_sizes must match input_streams")
        self.sizes = [int(s) for s in sizes] if sizes is not None else None

    def initialize(self, globals_):
        if self.sizes is not None:
            self.publish_global(globals_, "output_size", sum(self.sizes))

    def input_definitions(self):
        if self.sizes is None:
            return {s: numeric(BATCH, ANY) for s in self.inputs}
        return {s: numeric(BATCH, n) for s, n in zip(self.inputs, self.sizes)}

    def output_definitions(self):
        width = sum(self.sizes) if self.sizes is not None else ANY
        return {self.params["output_stream"]: numeric(BATCH, width)}

    def execute(self, batch):
        parts = [batch[self.stream(s)] for s in self.inputs]
        for s, p in zip(self.inputs, parts):
            if p.ndim != 2 or p.shape[0] != batch.batch_size:
                raise ValueError(f"{self.name}: stream {self.stream(s)!r} has shape {p.shape}; "
                                 f"expected ({batch.batch_size}, n)")
        self._widths = [p.shape[1] for p in parts]
        batch.add(self.stream(self.params["output_stream"]), np.concatenate(parts, axis=1))

    def backward(self, batch, grads):
        g = grads.get(self.stream(self.params["output_stream"]))
        if g is None:
            return
        offsets = np.cumsum([0, *self._widths])
        for s, lo, hi in zip(self.inputs, offsets[:-1], offsets[1:]):
            grads.add(self.stream(s), g[:, lo:hi], like=batch[self.stream(s)])
