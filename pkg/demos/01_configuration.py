# # Configuration trees
#
# Everything a run needs lives in YAML. Files are merged left to right, a
# file can pull in others through `default_configs`, and single values can
# be overridden from the command line with `--set key.path=value`.

# %%
import tempfile
from pathlib import Path

from ptp.config import GlobalParams, apply_overrides, dump_config, get_path, load_config, merge

work = Path(tempfile.mkdtemp())

# %% [markdown]
# Maps merge recursively, anything else (lists included) is replaced by the
# right-hand side.

# %%
base = {"training": {"optimizer": {"type": "sgd", "lr": 0.1}, "tags": ["a", "b"]}}
print(merge(base, {"training": {"optimizer": {"lr": 0.01}, "tags": ["c"]}}))

# %% [markdown]
# A file that includes another one. The include is resolved relative to the
# file that mentions it.

# %%
(work / "base.yml").write_text("""
training:
  task: {type: parity, num_bits: 2}
  optimizer: {type: sgd, lr: 0.1}
pipeline:
  classifier: {type: feed_forward, priority: 1, hidden_sizes: [4]}
""")
(work / "experiment.yml").write_text("""
default_configs: base.yml
training:
  optimizer: {lr: 0.05}
""")
tree = load_config([work / "experiment.yml"])
tree = apply_overrides(tree, ["pipeline.classifier.hidden_sizes=[8, 8]"])
print(get_path(tree, "training.optimizer.lr"), get_path(tree, "pipeline.classifier.hidden_sizes"))
print(dump_config(tree))

# %% [markdown]
# Global parameters are write-once. Publishing the same value twice is fine,
# a conflicting value names both publishers.

# %%
g = GlobalParams()
g.publish("num_classes", 3, "training.task")
g.publish("num_classes", 3, "label_indexer")
try:
    g.publish("num_classes", 4, "other_indexer")
except Exception as exc:
    print(type(exc).__name__, exc)
