# # Pre-train, freeze, fine-tune
#
# Three runs over the same data, driven only by configuration:
# a categorizer is trained alone, then reused frozen under a new head with a
# second loss, then everything is unfrozen and tuned together.

# %%
import tempfile
from pathlib import Path

from ptp.checkpoint import read_checkpoint
from ptp.workers import OfflineTrainer

staged = Path(__file__).resolve().parents[1] / "configs" / "staged"
work = Path(tempfile.mkdtemp())


def train(*files):
    w = OfflineTrainer([str(f) for f in files], expdir=work, log_level="warning")
    assert w.run() == 0
    return w


# %%
stage1 = train(staged / "stage1_categorizer.yml")
pretrained = stage1.experiment_dir / "final.ckpt"

load2 = work / "stage2_load.yml"
load2.write_text(f"pipeline:\n  categorizer:\n    load: {pretrained}\n")
stage2 = train(staged / "stage2_frozen.yml", load2)

same = read_checkpoint(stage2.experiment_dir / "final.ckpt")["models"]["categorizer"] == \
    read_checkpoint(pretrained)["models"]["categorizer"]
print("categorizer untouched while frozen:", same)

# %%
ckpt = stage2.experiment_dir / "final.ckpt"
load3 = work / "stage3_load.yml"
load3.write_text(f"pipeline:\n  categorizer:\n    load: {ckpt}\n  head:\n    load: {ckpt}\n")
stage3 = train(staged / "stage3_finetune.yml", load3)
print("best validation loss, frozen:", round(stage2.status.best_validation_loss, 4),
      "fine-tuned:", round(stage3.status.best_validation_loss, 4))
