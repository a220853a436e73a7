import numpy as np
import pytest

from seco.errors import InvalidConfigError
from seco.scenario import generate_scenario, scenario_geometry

from helpers import tiny_config


def test_deterministic():
    cfg = tiny_config().scenario
    a, b = generate_scenario(cfg), generate_scenario(cfg)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.masks, b.masks)
    assert a.labels == b.labels


def test_splits_share_geometry_but_differ():
    cfg = tiny_config().scenario
    train, test = generate_scenario(cfg, "train"), generate_scenario(cfg, "test")
    assert len(train) == cfg.images_per_epoch and len(test) == cfg.test_images
    assert not np.array_equal(train.features[0], test.features[0])
    with pytest.raises(ValueError):
        generate_scenario(cfg, "val")


def test_labels_match_masks():
    cfg = tiny_config(images_per_epoch=60).scenario
    data = generate_scenario(cfg)
    for m, labels in zip(data.masks, data.labels):
        assert set(np.unique(m)) - {0} == set(labels)
    y = data.label_matrix(cfg.num_classes)
    assert y.shape == (60, 3) and y.sum() == sum(len(l) for l in data.labels)


def test_rho_zero_never_pairs():
    cfg = tiny_config(images_per_epoch=80, cooccurrence=[[1, 2, 0.0]]).scenario
    data = generate_scenario(cfg)
    assert all(len(l) == 1 for l in data.labels) and not data.confounded.any()


def test_rho_one_always_pairs_with_shared_confound():
    cfg = tiny_config(images_per_epoch=80, cooccurrence=[[1, 2, 1.0]], noise_std=0.0).scenario
    data = generate_scenario(cfg)
    geo = scenario_geometry(cfg)
    for x, m, labels, conf in zip(data.features, data.masks, data.labels, data.confounded):
        if 1 in labels:
            assert labels == (1, 2) and conf
            for l in (1, 2):
                np.testing.assert_allclose(
                    x[m == l], np.broadcast_to(geo.centers[l] + cfg.confound_scale * geo.confounds[0], x[m == l].shape)
                )
            np.testing.assert_allclose(x[m == 0], np.broadcast_to(geo.centers[0], x[m == 0].shape))
        else:
            assert len(labels) == 1 and not conf


def test_geometry_unit_centers():
    geo = scenario_geometry(tiny_config().scenario)
    np.testing.assert_allclose(np.linalg.norm(geo.centers, axis=1), 1.0)


def test_invalid_config():
    cfg = tiny_config().scenario
    cfg.cooccurrence = [[1, 5, 0.5]]
    with pytest.raises(InvalidConfigError):
        generate_scenario(cfg)
