"""Acceptance gate: one test (and one summary line) per criterion."""

import itertools
import json
import math
import time

import numpy as np
import pytest

from seco import cli, selftest
from seco.config import ExperimentConfig, save_config
from seco.experiment import MAX_OFFDIAG, MIN_REDUCTION, decoupling_experiment
from seco.losses import lig_loss, lil_loss
from seco.metrics import confusion_ratio_from_counts, miou, precision_recall_from_counts
from seco.numerics import l2_normalize
from seco.rectification import noisy_pair_count, rectify_batch, rectify_tag
from seco.reservoir import ReservoirView, TagReservoir
from seco.tagging import assign_tag

from helpers import tiny_config


# 1. gradient correctness

def test_gradient_correctness(criterion):
    start = time.perf_counter()
    results = [selftest.gradient_check(name, seeds=20) for name in selftest.GRADIENT_CASES]
    elapsed = time.perf_counter() - start
    worst = max(r.max_error for r in results)
    ok = all(r.max_error < 1e-4 for r in results) and elapsed < 30
    detail = ", ".join(f"{r.name}={r.max_error:.1e}" for r in results) + f"; {elapsed:.1f}s"
    criterion(1, "gradient correctness", ok, detail)
    assert worst < 1e-4
    assert elapsed < 30


# 2. oracle equivalence

class _ListModel:
    def __init__(self, capacity):
        self.capacity = capacity
        self.entries = []

    def push(self, q, q_tags, k, k_tags):
        self.entries += [(tuple(e), int(t)) for e, t in zip(q, q_tags)]
        self.entries += [(tuple(e), int(t)) for e, t in zip(k, k_tags)]
        while len(self.entries) > self.capacity:
            self.entries.pop(0)


def _reservoir_mismatches(total_ops=10_000, seed=11):
    rng = np.random.default_rng(seed)
    ops = mismatches = 0
    while ops < total_ops:
        cap = int(rng.integers(4, 65))
        res, ref = TagReservoir(cap, 2), _ListModel(cap)
        for _ in range(int(rng.integers(10, 120))):
            if ops >= total_ops:
                break
            ops += 1
            if rng.random() < 0.5:
                n = int(rng.integers(0, cap // 2 + 1))
                q = rng.normal(size=(n, 2))
                k = rng.normal(size=(n, 2))
                tags = rng.integers(-1, 5, size=n)
                res.push_batch(q, tags, k, tags)
                ref.push(q, tags, k, tags)
            else:
                view = res.view()
                got = [(tuple(e), int(t)) for e, t in zip(view.embeddings, view.tags)]
                tag = int(rng.integers(-1, 5))
                pos = [tuple(e) for e in view.positives(tag)]
                want = [e for e, t in ref.entries if t == tag]
                if got != ref.entries or pos != want:
                    mismatches += 1
    return ops, mismatches


def _brute(q, positives):
    sims = [sum(a * b for a, b in zip(q, p)) for p in positives]
    mu = sum(sims) / len(sims)
    return mu, sum(1 for s in sims if s < mu)


def _rectification_mismatches(cases=1000, seed=12, sigma=0.6):
    rng = np.random.default_rng(seed)
    mismatches = 0
    for i in range(cases):
        n = int(rng.integers(1, 50))
        # entries of +-1/4 in 16 dims: unit vectors with exact dot products
        q = rng.choice([-0.25, 0.25], size=16)
        pos = rng.choice([-0.25, 0.25], size=(n, 16))
        tag = int(rng.integers(1, 5))
        mu, n_v = noisy_pair_count(q, pos)
        b_mu, b_nv = _brute(q, pos)
        expected = -1 if b_nv / n > sigma else tag
        view = ReservoirView(pos, np.full(n, tag), np.arange(n))
        batch, _ = rectify_batch(q[None], np.array([tag]), view, sigma, min_positives=1)
        if (mu, n_v) != (b_mu, b_nv) or rectify_tag(q, tag, pos, sigma) != expected or batch[0] != expected:
            mismatches += 1
    return mismatches


def test_oracle_equivalence(criterion):
    ops, res_bad = _reservoir_mismatches()
    rect_bad = _rectification_mismatches()
    detail = f"reservoir {res_bad}/{ops} mismatches, rectification {rect_bad}/1000 mismatches"
    criterion(2, "oracle equivalence", res_bad == 0 and rect_bad == 0, detail)
    assert res_bad == 0
    assert rect_bad == 0


# 3. loss trivial cases

def test_loss_trivial_cases(criterion):
    rng = np.random.default_rng(3)
    q = l2_normalize(rng.normal(size=(6, 5)))
    P = l2_normalize(rng.normal(size=(3, 5)))
    single = max(
        abs(lig_loss(q, np.full(6, l), P, np.eye(3, dtype=bool)[l - 1]).value) for l in (1, 2, 3)
    )
    uncertain = lil_loss(q, np.full(6, -1), P, [1, 2, 0]).value
    hand = math.log(1 + math.exp(-1))
    e1, e2 = np.array([[1.0, 0.0]]), np.array([[1.0, 0.0], [0.0, 1.0]])
    g = lig_loss(e1, [1], e2, [True, True], 1.0).value
    l = lil_loss(e1, [1], e2, [1, 2], 1.0).value
    ok = single < 1e-12 and uncertain == 0 and abs(g - 0.3133) < 1e-4 and abs(l - 0.3133) < 1e-4
    criterion(3, "loss trivial cases", ok,
              f"|P_s|=1 -> {single:.1e}, all-uncertain -> {uncertain}, lig={g:.5f}, lil={l:.5f}, exact={hand:.5f}")
    assert single < 1e-12
    assert uncertain == 0
    assert abs(g - 0.3133) < 1e-4 and abs(l - 0.3133) < 1e-4


# 4. decoupling experiment

@pytest.fixture(scope="module")
def decoupling():
    start = time.perf_counter()
    result = decoupling_experiment(ExperimentConfig(), seeds=(0, 1, 2), log=print)
    return result, time.perf_counter() - start


def test_decoupling_setup():
    cfg = ExperimentConfig()
    sc = cfg.scenario
    assert sc.num_classes == 4 and sc.embed_dim == 16
    assert sc.cooccurrence == [[1, 2, 0.9]]
    assert sc.images_per_epoch == 400 and cfg.epochs == 30


def test_decoupling_confusion_reduction(decoupling, criterion):
    result, elapsed = decoupling
    detail = (
        f"confusion ratio full={result.full_confusion:.4f} ablation={result.ablation_confusion:.4f} "
        f"reduction={100 * result.reduction:.1f}% (need >= {100 * MIN_REDUCTION:.0f}%); {elapsed:.0f}s"
    )
    ok = result.confusion_passed and elapsed < 600
    criterion("4a", "decoupling: confusion reduction", ok, detail)
    reduction = result.reduction
    assert reduction >= MIN_REDUCTION
    assert elapsed < 600


def test_decoupling_prototype_separation(decoupling, criterion):
    result, _ = decoupling
    a, b = result.pair
    full_pair = result.pair_similarity(result.full_similarity)
    ablation_pair = result.pair_similarity(result.ablation_similarity)
    detail = (
        f"full max off-diagonal={result.max_offdiag:.3f} (need < {MAX_OFFDIAG}); "
        f"P{a}.P{b} full={full_pair:.3f} ablation={ablation_pair:.3f}"
    )
    criterion("4b", "decoupling: prototype separation", result.separation_passed, detail)
    max_offdiag = result.max_offdiag
    assert max_offdiag < MAX_OFFDIAG
    assert ablation_pair > full_pair


# 5. tag assignment

# Rule table over 2x2 patches with labels {0, 1, 2} at phi = 0.9: 3 of 4
# cells is only 0.75, so a patch is tagged only when all four cells agree.
TAG_TABLE = {
    (0, 0, 0, 0): 0,
    (1, 1, 1, 1): 1,
    (2, 2, 2, 2): 2,
}


def test_tag_assignment_enumeration(criterion):
    cases = list(itertools.product((0, 1, 2), repeat=4))
    wrong = [c for c in cases if assign_tag(np.array(c).reshape(2, 2), 0.9) != TAG_TABLE.get(c, -1)]
    criterion(5, "tag assignment", len(cases) == 81 and not wrong, f"{81 - len(wrong)}/{len(cases)} cases match")
    assert len(cases) == 81
    assert wrong == []


# 6. metric identities

def test_metric_identities(criterion):
    rng = np.random.default_rng(6)
    worst, checked = 0.0, 0
    for _ in range(500):
        K = int(rng.integers(1, 6))
        cm = rng.integers(0, 1000, size=(K + 1, K + 1))
        for label in range(1, K + 1):
            tp = int(cm[label, label])
            fp = int(cm[:, label].sum()) - tp
            fn = int(cm[label, :].sum()) - tp
            if tp == 0:
                continue
            precision, _ = precision_recall_from_counts(tp, fp, fn)
            worst = max(worst, abs(confusion_ratio_from_counts(tp, fp) - (1 - precision) / precision))
            checked += 1
    gts = [rng.integers(0, 5, size=(6, 6)) for _ in range(5)]
    _, perfect = miou(gts, gts, 4)
    ok = worst <= 1e-12 and perfect == 1.0
    criterion(6, "metric identities", ok, f"max |ratio identity error|={worst:.1e} over {checked} classes, mIoU(gt, gt)={perfect}")
    assert worst <= 1e-12
    assert perfect == 1.0


# 7. determinism

def test_train_determinism(tmp_path, criterion):
    cfg_path = tmp_path / "cfg.json"
    save_config(tiny_config(epochs=3), cfg_path)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(["train", "--config", str(cfg_path), "--out", str(out), "--seed", "5"]) == 0
        outs.append(out)
    same_report = (outs[0] / "report.jsonl").read_bytes() == (outs[1] / "report.jsonl").read_bytes()
    same_state = (outs[0] / "state.json").read_bytes() == (outs[1] / "state.json").read_bytes()
    criterion(7, "determinism", same_report and same_state, f"report identical={same_report}, snapshot identical={same_state}")
    assert same_report and same_state


# 8. default constants

def test_default_constants(tmp_path, criterion):
    cfg = ExperimentConfig()
    cfg.epochs = 0
    cfg_path = tmp_path / "default.json"
    save_config(cfg, cfg_path)
    assert cli.main(["train", "--config", str(cfg_path), "--out", str(tmp_path / "run")]) == 0
    header = json.loads((tmp_path / "run" / "report.jsonl").read_text().splitlines()[0])
    const = header["constants"]
    defaults = ExperimentConfig()
    ok = (
        defaults.scenario.num_patches == 12
        and defaults.hyper.reservoir_capacity == 4608
        and (defaults.hyper.alpha, defaults.hyper.beta, defaults.hyper.gamma) == (0.5, 0.5, 0.12)
        and const == {"num_patches": 12, "reservoir_capacity": 4608, "loss_weights": [0.5, 0.5, 0.12]}
    )
    criterion(8, "default constants", ok, f"report constants {const}")
    assert ok
