from seco.config import ExperimentConfig


def tiny_config(epochs=2, **scenario):
    cfg = ExperimentConfig()
    sc = cfg.scenario
    sc.num_classes = 3
    sc.grid = (8, 8)
    sc.patch = (2, 2)
    sc.num_patches = 4
    sc.images_per_epoch = 24
    sc.test_images = 8
    for k, v in scenario.items():
        setattr(sc, k, v)
    cfg.hyper.batch_size = 4
    cfg.hyper.lr = 0.5
    cfg.epochs = epochs
    return cfg.validate()
