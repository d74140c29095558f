"""The randomized gradient trials shared by the acceptance check and its diagnostics."""

import numpy as np

from oracles import central_difference
from ptp.components import create_component
from ptp.config import GlobalParams
from ptp.pipeline import build_pipeline
from ptp.streams import Batch, GradTable


def make_component(type_id, seed, **params):
    comp = create_component("c", {"type": type_id, "priority": 1, **params}, seed=seed)
    comp.initialize(GlobalParams())
    return comp


def component_pairs(comp, inputs, outputs, rng):
    """Yield ``(analytic, numeric)`` gradients of sum(R * out), or of the loss when ``outputs`` is None."""
    upstream = {}
    size = len(next(iter(inputs.values())))

    def objective():
        comp.rng = np.random.default_rng(0)  # fixed dropout mask
        b = Batch({k: v.copy() for k, v in inputs.items()}, batch_size=size)
        comp.execute(b)
        if outputs is None:
            return b[comp.stream("loss")]
        return sum(float(np.sum(upstream[s] * b[s])) for s in outputs)

    comp.rng = np.random.default_rng(0)
    batch = Batch({k: v.copy() for k, v in inputs.items()}, batch_size=size)
    comp.execute(batch)
    grads = GradTable()
    if outputs is None:
        for s, g in comp.loss_gradients(batch).items():
            grads.add(s, g)
    else:
        for s in outputs:
            upstream[s] = rng.normal(size=batch[s].shape)
            grads.add(s, upstream[s])
        if hasattr(comp, "store"):
            comp.store.zero_grad()
        comp.backward(batch, grads)
    for name, x in inputs.items():
        if x.dtype.kind == "f" and name in grads:
            yield grads[name], central_difference(objective, x)
    if hasattr(comp, "store"):
        for name, value in comp.store.values.items():
            yield comp.store.grads[name].copy(), central_difference(objective, value)


def gradient_trials(seed=7, trials=100):
    """Yield ``(kind, analytic, numeric)`` for every checked tensor of every trial."""
    rng = np.random.default_rng(seed)
    for trial in range(trials):
        b = int(rng.integers(1, 5))
        n_in, n_out = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        hidden = [int(h) for h in rng.integers(1, 5, size=rng.integers(0, 3))]
        act = ["relu", "tanh", "sigmoid", "identity"][trial % 4]
        final = ["log_softmax", "identity", "tanh"][trial % 3]
        ffn = make_component("feed_forward", trial, input_size=n_in, prediction_size=n_out,
                             hidden_sizes=hidden, activation=act, final_activation=final,
                             dropout=float(rng.choice([0.0, 0.3])))
        for a, n in component_pairs(ffn, {"inputs": rng.normal(size=(b, n_in))}, ["predictions"], rng):
            yield "feed_forward", a, n

        widths = [int(w) for w in rng.integers(1, 4, size=rng.integers(1, 4))]
        names = [f"s{i}" for i in range(len(widths))]
        cat = make_component("concat", trial, input_streams=names, input_sizes=widths,
                             output_stream="joined")
        parts = {s: rng.normal(size=(b, w)) for s, w in zip(names, widths)}
        for a, n in component_pairs(cat, parts, ["joined"], rng):
            yield "concat", a, n

        k = int(rng.integers(2, 6))
        logits = rng.normal(size=(b, k))
        logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
        nll = make_component("nll_loss", trial)
        for a, n in component_pairs(nll, {"predictions": logp,
                                          "targets": rng.integers(0, k, size=b)}, None, rng):
            yield "nll_loss", a, n

        mse = make_component("mse_loss", trial)
        for a, n in component_pairs(mse, {"predictions": rng.normal(size=(b, n_out)),
                                          "targets": rng.normal(size=(b, n_out))}, None, rng):
            yield "mse_loss", a, n

        # three components composed through the pipeline: ffn -> ffn -> nll
        cfg = {"training": {"task": {"type": "gaussian_blobs", "num_classes": k, "dim": n_in,
                                     "samples_per_class": 2, "batch_size": b, "seed": trial}},
               "pipeline": {
                   "enc": {"type": "feed_forward", "priority": 1, "prediction_size": 3,
                           "hidden_sizes": hidden, "activation": act, "final_activation": "tanh",
                           "streams": {"predictions": "features"}},
                   "head": {"type": "feed_forward", "priority": 2, "input_size": 3,
                            "streams": {"inputs": "features"}},
                   "nll": {"type": "nll_loss", "priority": 3}}}
        p = build_pipeline(cfg, seed=trial)
        batch = next(p.tasks["training"].batches())
        p.backward(p.forward(batch))
        for m in p.models.values():
            for name, value in m.store.values.items():
                yield "pipeline", m.store.grads[name].copy(), \
                    central_difference(lambda: p.forward(batch)["loss"], value)
