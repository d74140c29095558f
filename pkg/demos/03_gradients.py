# # Backward through a pipeline
#
# Each differentiable component owns its backward pass. The pipeline seeds the
# loss gradients and walks the components in reverse priority; gradients of a
# stream read by several components are summed.

# %%
import numpy as np

from ptp.pipeline import build_pipeline
from ptp.streams import Batch

# %% [markdown]
# A single linear unit, w = 2, x = 3, target 5: loss (6 - 5)^2 = 1 and
# dL/dw = 2 * (6 - 5) * 3 = 6.

# %%
config = {
    "training": {"task": {"type": "parity"}},
    "pipeline": {
        "linear": {"type": "feed_forward", "priority": 1, "input_size": 1,
                   "prediction_size": 1, "final_activation": "identity"},
        "mse": {"type": "mse_loss", "priority": 2},
    },
}
pipeline = build_pipeline(config)
linear = pipeline.component("linear")
linear.store.assign("layers.0.weight", [[2.0]])
linear.store.assign("layers.0.bias", [0.0])

batch = Batch({"inputs": np.array([[3.0]]), "targets": np.array([[5.0]])}, batch_size=1)
out = pipeline.forward(batch)
pipeline.backward(out)
print("loss", out["loss"], "dL/dw", linear.store.grads["layers.0.weight"])

# %% [markdown]
# The same number from a central difference.

# %%
h = 1e-6
w = linear.store["layers.0.weight"]
w[0, 0] += h
up = pipeline.forward(batch)["loss"]
w[0, 0] -= 2 * h
down = pipeline.forward(batch)["loss"]
w[0, 0] += h
print("finite difference", (up - down) / (2 * h))

# %% [markdown]
# Freezing stops parameter updates but not the gradient flowing through.
# Parameter gradients accumulate across backward calls (the optimizer step
# clears them), so clear them by hand first.

# %%
linear.freeze()
linear.store.zero_grad()
grads = pipeline.backward(pipeline.forward(batch))
print("frozen weight grad", linear.store.grads["layers.0.weight"], "input grad", grads["inputs"])
