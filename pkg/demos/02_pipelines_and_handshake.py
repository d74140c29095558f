# # Building a pipeline and checking its wiring
#
# Components run in ascending priority. Each one declares the streams it reads
# and writes; the handshake checks every declaration against what upstream
# components produce before any data moves.

# %%
import copy

from ptp.pipeline import build_pipeline

config = {
    "training": {"task": {"type": "gaussian_blobs", "num_classes": 3, "dim": 2,
                          "samples_per_class": 4, "batch_size": 6}},
    "pipeline": {
        "encoder": {"type": "feed_forward", "priority": 1, "prediction_size": 4,
                    "final_activation": "tanh", "streams": {"predictions": "features"}},
        "peek": {"type": "stream_viewer", "priority": 1.5, "input_streams": ["features"]},
        "head": {"type": "feed_forward", "priority": 2, "input_size": 4,
                 "streams": {"inputs": "features"}},
        "nll": {"type": "nll_loss", "priority": 3},
        "accuracy": {"type": "accuracy", "priority": 4},
    },
}
pipeline = build_pipeline(config)
print([(c.name, c.priority) for c in pipeline.components])
print("diagnostics:", pipeline.handshake())

# %% [markdown]
# One forward pass. The batch only grows: every component adds its outputs.

# %%
batch = next(pipeline.tasks["training"].batches())
out = pipeline.forward(batch)
print(sorted(out), out["loss"])

# %% [markdown]
# Break the wiring in two places at once. Every problem is reported, not just
# the first one.

# %%
broken = copy.deepcopy(config)
broken["pipeline"]["head"]["streams"]["inputs"] = "featurez"
broken["pipeline"]["accuracy"]["streams"] = {"targets": "labels"}
for d in build_pipeline(broken).handshake():
    print(d)
