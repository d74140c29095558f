# # Checkpoint files
#
# A checkpoint is JSON: training status, optimizer buffers, and every model's
# parameters as base64 little-endian float64. Writes go through a temporary
# file, so a crash never leaves half a checkpoint behind.

# %%
import tempfile
from pathlib import Path

from ptp.checkpoint import (TrainingStatus, list_models, load_configured, load_parameters,
                            save_checkpoint)
from ptp.pipeline import build_pipeline

work = Path(tempfile.mkdtemp())
config = {
    "training": {"task": {"type": "gaussian_blobs"}},
    "pipeline": {
        "encoder": {"type": "feed_forward", "priority": 1, "prediction_size": 4,
                    "streams": {"predictions": "features"}},
        "head": {"type": "feed_forward", "priority": 2, "input_size": 4,
                 "streams": {"inputs": "features"}},
    },
}
source = build_pipeline(config, seed=1)
path = save_checkpoint(source, TrainingStatus(epoch=3), work / "demo.ckpt")
print(list_models(path), {k: v.shape for k, v in load_parameters(path, "head").items()})

# %% [markdown]
# Load only the encoder into a pipeline with a different seed; the head keeps
# its own initialization.

# %%
config["pipeline"]["encoder"]["load"] = str(path)
target = build_pipeline(config, seed=2)
print("loaded:", load_configured(target))
enc_same = (target.models["encoder"].store["layers.0.weight"]
            == source.models["encoder"].store["layers.0.weight"]).all()
head_same = (target.models["head"].store["layers.0.weight"]
             == source.models["head"].store["layers.0.weight"]).all()
print("encoder copied:", enc_same, "head copied:", head_same)
