import copy

import numpy as np

from seco import model
from seco.scenario import generate_scenario
from seco.trainer import encode_views, init_state, train, train_step

from helpers import tiny_config


def _batch(cfg, n=4):
    data = generate_scenario(cfg.scenario)
    return data.features[:n], data.labels[:n]


def test_zero_epochs_evaluates_initial_state():
    report, state = train(tiny_config(), epochs=0)
    assert len(report.records) == 1 and report.records[0]["epoch"] == 0
    assert state.step == 0 and "eval" in report.records[0]


def test_one_record_per_epoch_and_deterministic():
    cfg = tiny_config(epochs=2)
    a, _ = train(cfg)
    b, _ = train(copy.deepcopy(cfg))
    assert [r["epoch"] for r in a.records] == [1, 2]
    assert a.lines() == b.lines()


def test_step_invariants():
    cfg = tiny_config()
    state = init_state(cfg, np.random.default_rng(0))
    images, labels = _batch(cfg)
    rng = np.random.default_rng(1)
    for _ in range(6):
        values = train_step(state, images, labels, cfg, rng, 0.5)
        for name in ("cls", "cls_aux", "lig", "lil", "seg", "total"):
            assert np.isfinite(values[name]) and values[name] >= 0
        tags = values["tag_background"] + values["tag_class"] + values["tag_uncertain"]
        assert tags == cfg.scenario.num_patches * len(images)
        assert len(state.reservoir) <= state.reservoir.capacity
        norms = np.linalg.norm(state.bank.vectors[state.bank.initialized], axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-9)
        assert all(np.all(np.isfinite(v)) for v in state.params.values())
    assert state.global_teacher is state.params
    assert any(not np.array_equal(state.teacher[k], state.params[k]) for k in model.ENCODER_KEYS)


def test_teacher_follows_ema():
    cfg = tiny_config()
    state = init_state(cfg, np.random.default_rng(0))
    images, labels = _batch(cfg)
    before = {k: state.teacher[k].copy() for k in model.ENCODER_KEYS}
    train_step(state, images, labels, cfg, np.random.default_rng(1), 0.5)
    m = cfg.hyper.ema_momentum
    for k in model.ENCODER_KEYS:
        np.testing.assert_allclose(state.teacher[k], m * before[k] + (1 - m) * state.params[k])


def test_zero_contrastive_weights_match_ablation():
    base = tiny_config()
    zero = copy.deepcopy(base)
    zero.hyper.alpha = zero.hyper.beta = 0.0
    ablate = copy.deepcopy(base)
    ablate.hyper.use_lig = ablate.hyper.use_lil = False
    images, labels = _batch(base)
    results = []
    for cfg in (zero, ablate):
        state = init_state(cfg, np.random.default_rng(0))
        rng = np.random.default_rng(1)
        for _ in range(3):
            train_step(state, images, labels, cfg, rng, 0.5)
        results.append(state.params)
    for k in model.PARAM_KEYS:
        np.testing.assert_array_equal(results[0][k], results[1][k])


def test_encode_views_contracts(rng):
    params = model.init_params(3, 4, 2, rng)
    teacher = {k: params[k].copy() for k in model.ENCODER_KEYS}
    patches = rng.normal(size=(5, 2, 2, 3))
    q, k, _ = encode_views(patches, params, teacher, 0.0, 0.0, 0.0, np.random.default_rng(0))
    np.testing.assert_allclose(q, k, atol=1e-15)
    q, k, _ = encode_views(patches, params, teacher, 0.05, 0.2, 0.3, np.random.default_rng(0))
    np.testing.assert_allclose(np.linalg.norm(q, axis=1), 1.0)
    np.testing.assert_allclose(np.linalg.norm(k, axis=1), 1.0)
    q2, k2, _ = encode_views(patches, params, teacher, 0.05, 0.2, 0.3, np.random.default_rng(0))
    np.testing.assert_array_equal(q, q2)
    np.testing.assert_array_equal(k, k2)


def test_report_header_and_records():
    cfg = tiny_config(epochs=1)
    cfg.hyper.use_lil = False
    report, _ = train(cfg)
    h = report.header
    assert h["flags"] == {"disable_lig": False, "disable_lil": True, "disable_rectify": False}
    assert h["constants"]["num_patches"] == 4
    rec = report.records[0]
    assert set(rec["losses"]) == {"cls", "cls_aux", "lig", "lil", "seg", "total"}
    assert sum(rec["reservoir"].values()) <= cfg.hyper.reservoir_capacity
    ev = rec["eval"]
    assert 0 <= ev["miou"] <= 1 and len(ev["classes"]) == 3
    assert ev["pairs"][0]["pair"] == [1, 2]
