"""Full method vs. an ablation without the two contrastive losses.

Both arms train on the same scenario and seed; only the LiG and LiL loss
weights differ.  Results are averaged over seeds:

* the confusion ratio of the co-occurring pair is the mean over both classes
  of the pair, and the relative reduction is ``1 - full / ablation``;
* prototype separation compares seed-averaged similarity matrices.
"""

import copy
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .trainer import train

MIN_REDUCTION = 0.30
MAX_OFFDIAG = 0.6


def ablation_config(cfg):
    cfg = copy.deepcopy(cfg)
    cfg.hyper.use_lig = False
    cfg.hyper.use_lil = False
    return cfg


def with_seed(cfg, seed):
    cfg = copy.deepcopy(cfg)
    cfg.scenario.seed = seed
    cfg.hyper.seed = seed
    return cfg


@dataclass
class ArmResult:
    seed: int
    confusion_ratio: float  # mean over the pair's two classes
    similarity: np.ndarray
    miou: float


@dataclass
class DecouplingResult:
    full: list
    ablation: list
    pair: tuple

    @property
    def full_confusion(self):
        return float(np.mean([r.confusion_ratio for r in self.full]))

    @property
    def ablation_confusion(self):
        return float(np.mean([r.confusion_ratio for r in self.ablation]))

    @property
    def reduction(self):
        return 1.0 - self.full_confusion / self.ablation_confusion

    @property
    def full_similarity(self):
        return np.mean([r.similarity for r in self.full], axis=0)

    @property
    def ablation_similarity(self):
        return np.mean([r.similarity for r in self.ablation], axis=0)

    @property
    def max_offdiag(self):
        sim = self.full_similarity
        return float(sim[~np.eye(len(sim), dtype=bool)].max())

    def pair_similarity(self, sim):
        a, b = self.pair
        return float(sim[a - 1, b - 1])

    @property
    def confusion_passed(self):
        return self.reduction >= MIN_REDUCTION

    @property
    def separation_passed(self):
        return self.max_offdiag < MAX_OFFDIAG and self.pair_similarity(
            self.ablation_similarity
        ) > self.pair_similarity(self.full_similarity)

    def summary(self):
        return {
            "pair": list(self.pair),
            "full_confusion_ratio": self.full_confusion,
            "ablation_confusion_ratio": self.ablation_confusion,
            "relative_reduction": self.reduction,
            "full_max_offdiag": self.max_offdiag,
            "full_pair_similarity": self.pair_similarity(self.full_similarity),
            "ablation_pair_similarity": self.pair_similarity(self.ablation_similarity),
            "per_seed": [
                {
                    "seed": f.seed,
                    "full_confusion_ratio": f.confusion_ratio,
                    "ablation_confusion_ratio": a.confusion_ratio,
                    "full_miou": f.miou,
                    "ablation_miou": a.miou,
                }
                for f, a in zip(self.full, self.ablation)
            ],
        }


def _arm(cfg, seed, epochs):
    report, _ = train(cfg, epochs)
    ev = report.records[-1]["eval"]
    ratio = ev["pairs"][0]["mean_confusion_ratio"]
    sim = ev["prototype_similarity"]
    return ArmResult(
        seed,
        float("inf") if ratio is None else ratio,
        np.full((cfg.scenario.num_classes,) * 2, np.nan) if sim is None else np.array(sim),
        ev["miou"],
    )


def decoupling_experiment(cfg=None, seeds=(0, 1, 2), epochs=None, log=None):
    """Train both arms for each seed; ``log`` receives one line per run."""
    cfg = ExperimentConfig() if cfg is None else cfg
    full, ablation = [], []
    for seed in seeds:
        base = with_seed(cfg, seed)
        for arm, out in ((base, full), (ablation_config(base), ablation)):
            res = _arm(arm, seed, epochs)
            out.append(res)
            if log is not None:
                name = "full" if out is full else "ablation"
                log(f"seed={seed} {name:<8s} confusion={res.confusion_ratio:.4f} miou={res.miou:.4f}")
    a, b, _ = cfg.scenario.cooccurrence[0]
    return DecouplingResult(full, ablation, (int(a), int(b)))
