from __future__ import annotations

import numpy as np

from ptp.components.base import Loss, register
from ptp.streams import ANY, BATCH, index_list, numeric


@register("nll_loss")
class NLLLoss(Loss):
    """Negative log-likelihood of target classes given row-wise log-probabilities."""

    defaults = {"weight": 1.0, "statistic": None}

    def input_definitions(self):
        return {"predictions": numeric(BATCH, ANY, description="log-probabilities"),
                "targets": index_list()}

    def execute(self, batch):
        pred = batch[self.stream("predictions")]
        tgt = batch[self.stream("targets")]
        if not np.all(np.isfinite(pred)):
            raise FloatingPointError(f"{self.name}: non-finite predictions")
        if len(tgt) and tgt.max() >= pred.shape[1]:
            raise IndexError(f"{self.name}: target {int(tgt.max())} outside {pred.shape[1]} classes")
        batch.add(self.stream("loss"), float(-pred[np.arange(len(tgt)), tgt].mean()))

    def loss_gradients(self, batch):
        pred_name = self.stream("predictions")
        pred = batch[pred_name]
        tgt = batch[self.stream("targets")]
        g = np.zeros_like(pred)
        g[np.arange(len(tgt)), tgt] = -1.0 / len(tgt)
        return {pred_name: g}


@register("mse_loss")
class MSELoss(Loss):
    """Mean squared error over all elements."""

    defaults = {"weight": 1.0, "statistic": None}

    def input_definitions(self):
        return {"predictions": numeric(BATCH, ANY), "targets": numeric(BATCH, ANY)}

    def _pair(self, batch):
        p, t = batch[self.stream("predictions")], batch[self.stream("targets")]
        if p.shape != t.shape:
            raise ValueError(f"{self.name}: predictions {p.shape} vs targets {t.shape}")
        return p, t

    def execute(self, batch):
        p, t = self._pair(batch)
        batch.add(self.stream("loss"), float(np.mean((p - t) ** 2)))

    def loss_gradients(self, batch):
        p, t = self._pair(batch)
        g = 2.0 * (p - t) / p.size
        # targets may themselves be produced by a differentiable component
        return {self.stream("predictions"): g, self.stream("targets"): -g}
