# A short end-to-end run on a small synthetic scenario.
import numpy as np

from seco.config import ExperimentConfig
from seco.trainer import train

cfg = ExperimentConfig()
cfg.scenario.num_classes = 3
cfg.scenario.images_per_epoch = 120
cfg.scenario.test_images = 60
cfg.epochs = 8


def show(record, state):
    ev = record["eval"]
    losses = {k: round(v, 3) for k, v in record["losses"].items()}
    print(f"epoch {record['epoch']}: mIoU={ev['miou']:.3f} losses={losses} tags={record['tags']}")


report, state = train(cfg, callback=show)
ev = report.records[-1]["eval"]
for row in ev["classes"]:
    print(row)
print("pair", ev["pairs"][0])
if ev["prototype_similarity"] is not None:
    print(np.round(np.array(ev["prototype_similarity"]), 3))
