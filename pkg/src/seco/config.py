"""Scenario and training configuration, with JSON round-tripping."""

import json
from dataclasses import asdict, dataclass, field, fields

from .cam import THETA_HIGH, THETA_LOW
from .errors import InvalidConfigError
from .losses import TAU_GLOBAL, TAU_LOCAL
from .prototypes import ETA, RELEVANCE_TAU
from .rectification import MIN_POSITIVES, SIGMA
from .reservoir import CAPACITY, EMA_MOMENTUM
from .tagging import PHI

# 64x64-pixel crops at 16 pixels per feature cell.
PATCH_CELLS = 4
NUM_PATCHES = 12


@dataclass
class ScenarioConfig:
    num_classes: int = 4
    embed_dim: int = 16
    feature_dim: int = 16
    grid: tuple = (16, 16)
    patch: tuple = (PATCH_CELLS, PATCH_CELLS)
    num_patches: int = NUM_PATCHES
    # (class_a, class_b, rho): a fraction rho of class-a images also contain b
    cooccurrence: list = field(default_factory=lambda: [[1, 2, 0.9]])
    images_per_epoch: int = 400
    test_images: int = 300
    # side length of a single-class region as a fraction of the grid side
    region_frac: tuple = (0.4, 0.75)
    center_scale: float = 1.0
    # length of the background center; 0 makes background zero-mean clutter
    background_scale: float = 1.0
    noise_std: float = 0.3
    confound_scale: float = 3.0
    seed: int = 0

    def validate(self):
        K = self.num_classes
        if K < 1 or self.embed_dim < 1 or self.feature_dim < 1:
            raise InvalidConfigError("num_classes, embed_dim and feature_dim must be >= 1")
        H, W = self.grid
        h, w = self.patch
        if not (1 <= h <= H and 1 <= w <= W):
            raise InvalidConfigError(f"patch {self.patch} does not fit grid {self.grid}")
        if H < 2 or W < 2:
            raise InvalidConfigError("grid must be at least 2x2")
        if self.num_patches < 1 or self.images_per_epoch < 1 or self.test_images < 1:
            raise InvalidConfigError("counts must be >= 1")
        lo, hi = self.region_frac
        if not 0.0 < lo <= hi <= 1.0:
            raise InvalidConfigError(f"region_frac must satisfy 0 < lo <= hi <= 1, got {self.region_frac}")
        if self.noise_std < 0 or self.confound_scale < 0 or self.center_scale <= 0 or self.background_scale < 0:
            raise InvalidConfigError("scales must be nonnegative")
        for pair in self.cooccurrence:
            if len(pair) != 3:
                raise InvalidConfigError(f"co-occurrence entry {pair} is not (a, b, rho)")
            a, b, rho = pair
            if a == b or not (1 <= a <= K and 1 <= b <= K):
                raise InvalidConfigError(f"co-occurrence pair {a},{b} must be distinct classes in 1..{K}")
            if not 0.0 <= rho <= 1.0:
                raise InvalidConfigError(f"rho must lie in [0, 1], got {rho}")
        return self


@dataclass
class HyperParams:
    phi: float = PHI
    sigma: float = SIGMA
    eta: float = ETA
    relevance_tau: float = RELEVANCE_TAU
    ema_momentum: float = EMA_MOMENTUM
    tau_global: float = TAU_GLOBAL
    tau_local: float = TAU_LOCAL
    alpha: float = 0.5
    beta: float = 0.5
    gamma: float = 0.12
    theta_low: float = THETA_LOW
    theta_high: float = THETA_HIGH
    eps_weak: float = 0.05
    eps_strong: float = 0.2
    channel_dropout: float = 0.1
    reservoir_capacity: int = CAPACITY
    min_positives: int = MIN_POSITIVES
    batch_size: int = 8
    lr: float = 2.0
    cosine_decay: bool = True
    use_lig: bool = True
    use_lil: bool = True
    use_rectify: bool = True
    seed: int = 0

    def validate(self):
        if not 0.5 < self.phi <= 1.0:
            raise InvalidConfigError("phi must lie in (0.5, 1]")
        if not 0.0 < self.sigma < 1.0:
            raise InvalidConfigError("sigma must lie in (0, 1)")
        for name in ("eta", "ema_momentum", "channel_dropout"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidConfigError(f"{name} must lie in [0, 1]")
        if self.channel_dropout >= 1.0:
            raise InvalidConfigError("channel_dropout must be < 1")
        if self.tau_global <= 0 or self.tau_local <= 0 or self.relevance_tau <= 0:
            raise InvalidConfigError("temperatures must be > 0")
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise InvalidConfigError("loss weights must be >= 0")
        if not 0.0 <= self.theta_low <= self.theta_high <= 1.0:
            raise InvalidConfigError("need 0 <= theta_low <= theta_high <= 1")
        if self.eps_weak < 0 or self.eps_strong < 0:
            raise InvalidConfigError("augmentation noise must be >= 0")
        if self.batch_size < 1 or self.reservoir_capacity < 1 or self.lr <= 0:
            raise InvalidConfigError("batch_size, reservoir_capacity and lr must be positive")
        return self


@dataclass
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    hyper: HyperParams = field(default_factory=HyperParams)
    epochs: int = 30

    def validate(self):
        self.scenario.validate()
        self.hyper.validate()
        if self.epochs < 0:
            raise InvalidConfigError("epochs must be >= 0")
        n = self.hyper.batch_size * self.scenario.num_patches
        if 2 * n > self.hyper.reservoir_capacity:
            raise InvalidConfigError(
                f"a batch pushes {2 * n} entries, more than reservoir capacity "
                f"{self.hyper.reservoir_capacity}"
            )
        return self

    def to_dict(self):
        d = asdict(self)
        d["scenario"]["grid"] = list(self.scenario.grid)
        d["scenario"]["patch"] = list(self.scenario.patch)
        d["scenario"]["region_frac"] = list(self.scenario.region_frac)
        return d

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise InvalidConfigError("config must be a JSON object")
        unknown = set(d) - {"scenario", "hyper", "epochs"}
        if unknown:
            raise InvalidConfigError(f"unknown config keys: {sorted(unknown)}")
        scenario = _build(ScenarioConfig, d.get("scenario", {}))
        scenario.grid = tuple(scenario.grid)
        scenario.patch = tuple(scenario.patch)
        scenario.region_frac = tuple(scenario.region_frac)
        scenario.cooccurrence = [list(p) for p in scenario.cooccurrence]
        hyper = _build(HyperParams, d.get("hyper", {}))
        return cls(scenario, hyper, int(d.get("epochs", 30))).validate()


def _build(cls, values):
    if not isinstance(values, dict):
        raise InvalidConfigError(f"{cls.__name__} section must be an object")
    names = {f.name for f in fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise InvalidConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    try:
        return cls(**values)
    except TypeError as exc:
        raise InvalidConfigError(str(exc)) from exc


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"{path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)


def save_config(cfg, path):
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
