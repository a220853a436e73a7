"""Dual-teacher single-student training on synthetic co-occurrence scenarios.

The global teacher shares its encoder with the student, so class tokens and
CAMs come from the student's own parameters.  The local teacher is an EMA
copy of the student encoder and projection head; its embeddings of strongly
augmented patches fill the reservoir together with the student's queries.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import model
from .cam import cam_to_pseudo_mask
from .config import ExperimentConfig
from .decomposition import crop, decompose_grid, random_origins
from .losses import LossWeights, lig_loss, lil_loss, multilabel_soft_margin, seco_total, seg_cross_entropy
from .metrics import class_table, confusion_matrix, miou
from .prototypes import ClassToken, PrototypeBank, similarity_matrix, update_bank
from .rectification import rectify_batch
from .reservoir import TagReservoir, ema_update
from .scenario import generate_scenario
from .tagging import BACKGROUND, UNCERTAIN, assign_tag

LOSS_NAMES = ("cls", "cls_aux", "lig", "lil", "seg", "total")


@dataclass
class TrainState:
    params: dict
    teacher: dict
    bank: PrototypeBank
    reservoir: TagReservoir
    step: int = 0

    @property
    def global_teacher(self):
        """The global teacher is a view of the student's parameters."""
        return self.params


def init_state(cfg: ExperimentConfig, rng):
    sc, hp = cfg.scenario, cfg.hyper
    params = model.init_params(sc.feature_dim, sc.embed_dim, sc.num_classes, rng)
    teacher = {k: params[k].copy() for k in model.ENCODER_KEYS}
    return TrainState(
        params=params,
        teacher=teacher,
        bank=PrototypeBank.empty(sc.num_classes, sc.embed_dim),
        reservoir=TagReservoir(hp.reservoir_capacity, sc.embed_dim),
    )


@dataclass
class StepInputs:
    """Everything the differentiable objective needs, with all discrete
    decisions (pseudo masks, crops, tags, augmentation noise) frozen."""

    images: np.ndarray  # (B, H, W, D)
    targets: np.ndarray  # (B, K) binary image labels
    pseudo_masks: np.ndarray  # (B, H, W)
    weak_patches: np.ndarray  # (P, h, w, D)
    tags: np.ndarray  # (P,) after rectification
    candidates: np.ndarray  # (P, K) prototypes allowed in each query's LiG denominator
    prototypes: np.ndarray  # (K, C) bank snapshot
    prototype_ready: np.ndarray  # (K,)
    keys: np.ndarray  # (N, C) reservoir snapshot
    key_tags: np.ndarray  # (N,)
    weights: LossWeights = field(default_factory=LossWeights)
    tau_global: float = 0.5
    tau_local: float = 0.2


def _head_losses(params, f, inputs, grads):
    B = f.shape[0]
    C = f.shape[-1]
    cells = f.shape[1] * f.shape[2]
    pooled = f.reshape(B, -1, C).mean(axis=1)
    grad_pooled = np.zeros_like(pooled)
    values = {}
    for name, key in (("cls", "Wcls"), ("cls_aux", "Waux")):
        value, dlogits = multilabel_soft_margin(pooled @ params[key].T, inputs.targets)
        values[name] = value
        grads[key] += dlogits.T @ pooled
        grad_pooled += dlogits @ params[key]
    grad_f = np.broadcast_to((grad_pooled / cells)[:, None, None, :], f.shape).copy()

    value, dscores = seg_cross_entropy(model.seg_scores(params, f), inputs.pseudo_masks)
    values["seg"] = value
    g = inputs.weights.gamma
    flat_scores = dscores.reshape(-1, dscores.shape[-1])
    grads["Wseg"] += g * flat_scores.T @ f.reshape(-1, C)
    grads["bseg"] += g * flat_scores.sum(axis=0)
    grad_f += g * dscores @ params["Wseg"]
    return values, grad_f


def lig_selection(tags, candidates, ready):
    """Queries eligible for LiG: foreground tag with an initialized prototype."""
    cand = candidates & ready[None, :]
    sel = tags > 0
    sel[sel] = cand[np.flatnonzero(sel), tags[sel] - 1]
    return sel, cand


def objective(params, inputs: StepInputs):
    """Total loss, its components and gradients for every student parameter."""
    grads = model.zeros_like(params)
    f, enc_cache = model.encode(params, inputs.images)
    values, grad_f = _head_losses(params, f, inputs, grads)

    q, q_cache = model.embed(params, inputs.weak_patches)
    grad_q = np.zeros_like(q)
    sel, cand = lig_selection(inputs.tags, inputs.candidates, inputs.prototype_ready)
    lig = lig_loss(q[sel], inputs.tags[sel], inputs.prototypes, cand[sel], inputs.tau_global)
    grad_q[sel] += inputs.weights.alpha * lig.grad
    lil = lil_loss(q, inputs.tags, inputs.keys, inputs.key_tags, inputs.tau_local)
    grad_q += inputs.weights.beta * lil.grad
    values["lig"] = lig.value
    values["lil"] = lil.value
    values["total"] = seco_total(
        values["cls"], values["cls_aux"], lig.value, lil.value, values["seg"], inputs.weights
    )

    model.encode_backward(params, enc_cache, grad_f, grads)
    if np.any(grad_q):
        model.embed_backward(params, q_cache, grad_q, grads)
    values["lig_pairs"] = lig.num_positive_pairs
    values["lil_pairs"] = lil.num_positive_pairs
    return values["total"], values, grads


def augment(patches, eps, dropout, rng):
    out = patches + eps * rng.normal(size=patches.shape)
    if dropout > 0:
        keep = rng.random((patches.shape[0], 1, 1, patches.shape[-1])) >= dropout
        out = out * keep / (1.0 - dropout)
    return out


def encode_views(patches, params, teacher, eps_weak, eps_strong, dropout, rng):
    """Student embeddings of weakly augmented patches and local-teacher
    embeddings of strongly augmented ones.  Returns ``(q, k, weak_inputs)``."""
    weak = augment(patches, eps_weak, 0.0, rng)
    strong = augment(patches, eps_strong, dropout, rng)
    q, _ = model.embed(params, weak)
    k, _ = model.embed(teacher, strong)
    return q, k, weak


def pseudo_masks(params, f, labels, hp):
    cams = np.maximum(np.einsum("bhwc,kc->bkhw", f, params["Waux"]), 0.0)
    return np.stack(
        [cam_to_pseudo_mask(cam, lab, hp.theta_low, hp.theta_high) for cam, lab in zip(cams, labels)]
    )


def prepare_step(state, images, labels, cfg, rng):
    """Run the non-differentiable front half of a step.

    Returns the frozen objective inputs, the class tokens and the patch
    embeddings/tags needed afterwards for the bank and reservoir updates.
    """
    sc, hp = cfg.scenario, cfg.hyper
    params = state.params
    K = sc.num_classes
    h, w = sc.patch
    n = sc.num_patches
    B = len(images)

    f, _ = model.encode(params, images)
    tokens = model.class_tokens(f)
    masks = pseudo_masks(params, f, labels, hp)

    patch_x, patch_m, owner = [], [], []
    for b in range(B):
        origins = random_origins(sc.grid, h, w, n, rng)
        ps = crop(images[b], masks[b], origins, h, w)
        patch_x.append(ps.features)
        patch_m.append(ps.masks)
        owner.extend([b] * n)
    patch_x = np.concatenate(patch_x)
    patch_m = np.concatenate(patch_m)
    owner = np.asarray(owner)
    raw_tags = np.array([assign_tag(m, hp.phi) for m in patch_m], dtype=np.int64)

    q, k, weak = encode_views(
        patch_x, params, state.teacher, hp.eps_weak, hp.eps_strong, hp.channel_dropout, rng
    )
    view = state.reservoir.view()
    if hp.use_rectify:
        tags, flipped = rectify_batch(q, raw_tags, view, hp.sigma, hp.min_positives)
    else:
        tags, flipped = raw_tags, 0

    targets = np.zeros((B, K))
    for b, lab in enumerate(labels):
        targets[b, [l - 1 for l in lab]] = 1.0
    inputs = StepInputs(
        images=images,
        targets=targets,
        pseudo_masks=masks,
        weak_patches=weak,
        tags=tags,
        candidates=targets[owner].astype(bool),
        prototypes=state.bank.vectors.copy(),
        prototype_ready=state.bank.initialized.copy(),
        keys=view.embeddings,
        key_tags=view.tags,
        weights=LossWeights(
            hp.alpha if hp.use_lig else 0.0, hp.beta if hp.use_lil else 0.0, hp.gamma
        ),
        tau_global=hp.tau_global,
        tau_local=hp.tau_local,
    )
    extras = {
        "tokens": tokens,
        "q": q,
        "k": k,
        "raw_tags": raw_tags,
        "flipped": flipped,
    }
    return inputs, extras


def train_step(state, images, labels, cfg, rng, lr):
    """One full pipeline step; mutates ``state`` and returns step metrics."""
    hp = cfg.hyper
    inputs, extras = prepare_step(state, images, labels, cfg, rng)
    _, values, grads = objective(state.params, inputs)
    for key in model.PARAM_KEYS:
        state.params[key] -= lr * grads[key]

    tokens = [ClassToken(z, tuple(lab)) for z, lab in zip(extras["tokens"], labels)]
    state.bank, bank_stats = update_bank(state.bank, tokens, hp.eta, hp.relevance_tau)
    state.reservoir.push_batch(extras["q"], inputs.tags, extras["k"], inputs.tags)
    for key in model.ENCODER_KEYS:
        state.teacher[key] = ema_update(state.teacher[key], state.params[key], hp.ema_momentum)
    state.step += 1

    tags = inputs.tags
    values.update(
        rectified=int(extras["flipped"]),
        tag_background=int(np.sum(tags == BACKGROUND)),
        tag_class=int(np.sum(tags > 0)),
        tag_uncertain=int(np.sum(tags == UNCERTAIN)),
        bank_skipped=bank_stats.skipped,
    )
    return values


def predict(params, images):
    f, _ = model.encode(params, images)
    return np.argmax(model.seg_scores(params, f), axis=-1)


def nearest_prototype_accuracy(params, bank, data, cfg):
    """Fraction of ground-truth single-class tiles whose embedding is closest
    to the prototype of their class."""
    sc, hp = cfg.scenario, cfg.hyper
    if not bank.initialized.any():
        return None
    h, w = sc.patch
    xs, tags = [], []
    for x, m in zip(data.features, data.masks):
        ps = decompose_grid(x, m, h, w)
        for px, pm in zip(ps.features, ps.masks):
            t = assign_tag(pm, hp.phi)
            if t > 0:
                xs.append(px)
                tags.append(t)
    if not tags:
        return None
    q, _ = model.embed(params, np.stack(xs))
    sims = np.where(bank.initialized[None, :], q @ bank.vectors.T, -np.inf)
    return float(np.mean(np.argmax(sims, axis=1) + 1 == np.asarray(tags)))


def _num(x):
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) else x


def evaluate(state, data, cfg):
    """Segmentation metrics of the student's segmentation head on ``data``."""
    K = cfg.scenario.num_classes
    preds = predict(state.params, data.features)
    cm = confusion_matrix(preds, data.masks, K)
    iou, mean_iou = miou(preds, data.masks, K)
    table = class_table(cm)
    pairs = []
    for a, b, _ in cfg.scenario.cooccurrence:
        ratios = [table[a - 1][2], table[b - 1][2]]
        pairs.append(
            {
                "pair": [int(a), int(b)],
                "confusion_ratio": [_num(r) for r in ratios],
                "mean_confusion_ratio": _num(np.mean(ratios)) if None not in ratios else None,
            }
        )
    if state.bank.initialized.all():
        sim = similarity_matrix(state.bank)
        off = sim[~np.eye(K, dtype=bool)]
        sim_list = sim.tolist()
        max_off = float(off.max()) if off.size else None
    else:
        sim_list, max_off = None, None
    return {
        "miou": _num(mean_iou),
        "iou": [_num(v) for v in iou],
        "classes": [
            {
                "class": c,
                "iou": _num(i),
                "confusion_ratio": _num(r),
                "precision": _num(p),
                "recall": _num(rc),
            }
            for c, i, r, p, rc in table
        ],
        "pairs": pairs,
        "prototype_similarity": sim_list,
        "max_offdiag_similarity": max_off,
        "nearest_prototype_accuracy": nearest_prototype_accuracy(state.params, state.bank, data, cfg),
        "confusion_matrix": cm.tolist(),
    }


@dataclass
class TrainReport:
    header: dict
    records: list

    def lines(self):
        out = [json.dumps({"type": "header", **self.header}, sort_keys=True)]
        out += [json.dumps({"type": "epoch", **r}, sort_keys=True) for r in self.records]
        return out


def report_header(cfg):
    sc, hp = cfg.scenario, cfg.hyper
    return {
        "config": cfg.to_dict(),
        "flags": {
            "disable_lig": not hp.use_lig,
            "disable_lil": not hp.use_lil,
            "disable_rectify": not hp.use_rectify,
        },
        "constants": {
            "num_patches": sc.num_patches,
            "reservoir_capacity": hp.reservoir_capacity,
            "loss_weights": [hp.alpha, hp.beta, hp.gamma],
        },
    }


def train(cfg: ExperimentConfig, epochs=None, callback=None):
    """Train from scratch; returns ``(report, state)``.

    With zero epochs the report holds a single evaluation of the initial
    state.  The whole run is a pure function of the config.
    """
    cfg.validate()
    epochs = cfg.epochs if epochs is None else epochs
    sc, hp = cfg.scenario, cfg.hyper
    rng = np.random.default_rng(hp.seed)
    state = init_state(cfg, rng)
    train_data = generate_scenario(sc, "train")
    test_data = generate_scenario(sc, "test")

    V = len(train_data)
    steps_per_epoch = math.ceil(V / hp.batch_size)
    total_steps = max(1, steps_per_epoch * epochs)
    records = []
    if epochs == 0:
        records.append({"epoch": 0, "eval": evaluate(state, test_data, cfg)})
    for epoch in range(1, epochs + 1):
        order = rng.permutation(V)
        sums = {name: 0.0 for name in LOSS_NAMES}
        counts = {"rectified": 0, "tag_background": 0, "tag_class": 0, "tag_uncertain": 0}
        for s in range(steps_per_epoch):
            idx = order[s * hp.batch_size:(s + 1) * hp.batch_size]
            lr = hp.lr
            if hp.cosine_decay:
                lr *= 0.5 * (1.0 + math.cos(math.pi * state.step / total_steps))
            values = train_step(
                state, train_data.features[idx], [train_data.labels[i] for i in idx], cfg, rng, lr
            )
            for name in LOSS_NAMES:
                sums[name] += values[name]
            for name in counts:
                counts[name] += values[name]
        record = {
            "epoch": epoch,
            "losses": {name: sums[name] / steps_per_epoch for name in LOSS_NAMES},
            "tags": counts,
            "reservoir": state.reservoir.occupancy(sc.num_classes),
            "eval": evaluate(state, test_data, cfg),
        }
        records.append(record)
        if callback is not None:
            callback(record, state)
    return TrainReport(report_header(cfg), records), state
