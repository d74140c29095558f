# # Training with the workers
#
# The online trainer counts episodes and validates one batch every interval;
# the offline trainer makes full passes. Both write CSV statistics and
# checkpoints into a fresh experiment directory.

# %%
import tempfile
from pathlib import Path

from ptp.workers import OfflineTrainer, OnlineTrainer, Processor

configs = Path(__file__).resolve().parents[1] / "configs"
expdir = Path(tempfile.mkdtemp())

# %%
xor = OnlineTrainer([configs / "xor_online.yml"], expdir=expdir, log_level="warning", seed=1337)
print("exit code", xor.run())
for agg in xor.history["validation"][:5]:
    print(agg.episode, round(agg.mean("loss"), 4), agg.mean("accuracy"))

# %%
blobs = OfflineTrainer([configs / "blobs_offline.yml"], expdir=expdir, log_level="warning")
blobs.run()
print((blobs.experiment_dir / "validation.csv").read_text()[:200])

# %% [markdown]
# Evaluate the best checkpoint on the held-out split. The overlay only adds a
# `load:` key; nothing else changes.

# %%
overlay = expdir / "load_best.yml"
overlay.write_text(f"pipeline:\n  classifier:\n    load: {blobs.experiment_dir / 'best.ckpt'}\n")
Processor([configs / "blobs_offline.yml", overlay], expdir=expdir, log_level="warning").run()
