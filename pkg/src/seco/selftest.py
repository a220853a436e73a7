"""Self-verification: finite-difference gradient checks and brute-force oracles.

Every check returns a :class:`CheckResult` with the worst error it saw.
Gradient errors are norm-relative, ``|g_a - g_n| / max(|g_a|, |g_n|, 1e-8)``,
with central differences at step ``1e-5``.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import losses, model
from .losses import LossWeights
from .numerics import l2_normalize
from .prototypes import ClassToken, PrototypeBank, update_bank
from .rectification import noisy_pair_count, rectify_batch
from .reservoir import TagReservoir
from .trainer import StepInputs, objective

FD_STEP = 1e-5
GRAD_TOL = 1e-4
NUM_SEEDS = 20


@dataclass
class CheckResult:
    name: str
    max_error: float
    tolerance: float
    cases: int
    seconds: float = 0.0

    @property
    def passed(self):
        return bool(self.max_error <= self.tolerance) if self.tolerance > 0 else self.max_error == 0

    def line(self):
        status = "ok" if self.passed else "FAIL"
        return (
            f"{self.name:<22s} {status:<4s} max_error={self.max_error:.3e} "
            f"tol={self.tolerance:.0e} cases={self.cases}"
        )


def relative_error(analytic, numeric):
    analytic = np.ravel(analytic)
    numeric = np.ravel(numeric)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-8)
    return float(np.linalg.norm(analytic - numeric) / scale)


def numeric_gradient(fn, x, step=FD_STEP):
    """Central differences of scalar ``fn`` at array ``x``."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = fn(x)
        flat[i] = orig - step
        down = fn(x)
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * step)
    return grad


def _unit(rng, n, c):
    return l2_normalize(rng.normal(size=(n, c)))


# The loss callables are looked up on the module at call time so that a
# patched implementation is the one under test.

def _lig_case(rng):
    C, K, u = 6, 4, 5
    P = _unit(rng, K, C)
    q0 = _unit(rng, u, C)
    tags = rng.integers(1, K + 1, size=u)
    cand = rng.random((u, K)) < 0.6
    cand[np.arange(u), tags - 1] = True
    fn = lambda q: losses.lig_loss(q, tags, P, cand, 0.5).value
    return losses.lig_loss(q0, tags, P, cand, 0.5).grad, numeric_gradient(fn, q0)


def _lil_case(rng):
    C, a, N = 6, 5, 14
    keys = _unit(rng, N, C)
    key_tags = rng.integers(-1, 3, size=N)
    tags = rng.integers(-1, 3, size=a)
    tags[0] = key_tags[0] = 1
    q0 = _unit(rng, a, C)
    fn = lambda q: losses.lil_loss(q, tags, keys, key_tags, 0.2).value
    return losses.lil_loss(q0, tags, keys, key_tags, 0.2).grad, numeric_gradient(fn, q0)


def _msm_case(rng):
    x0 = rng.normal(scale=2.0, size=(3, 4))
    y = (rng.random((3, 4)) < 0.5).astype(float)
    fn = lambda x: losses.multilabel_soft_margin(x, y)[0]
    return losses.multilabel_soft_margin(x0, y)[1], numeric_gradient(fn, x0)


def _seg_case(rng):
    K = 3
    s0 = rng.normal(size=(3, 3, K + 1))
    mask = rng.integers(0, K + 1, size=(3, 3))
    mask[rng.random((3, 3)) < 0.2] = 255
    mask[0, 0] = 1
    fn = lambda s: losses.seg_cross_entropy(s, mask)[0]
    return losses.seg_cross_entropy(s0, mask)[1], numeric_gradient(fn, s0)


def chain_inputs(rng, D=3, C=4, K=3, B=2, grid=4, patch=2, n=3, N=12):
    """A small random objective with every loss active."""
    params = model.init_params(D, C, K, rng)
    for k in ("b1", "b2", "bo", "bseg"):
        params[k] = rng.normal(scale=0.1, size=params[k].shape)
    for k in ("Wcls", "Waux", "Wseg"):
        params[k] = rng.normal(scale=0.5, size=params[k].shape)
    images = rng.normal(size=(B, grid, grid, D))
    targets = np.zeros((B, K))
    targets[0, 0] = targets[1, [0, 1]] = 1.0
    masks = rng.integers(0, K + 1, size=(B, grid, grid))
    weak = rng.normal(size=(B * n, patch, patch, D))
    tags = rng.integers(-1, K + 1, size=B * n)
    tags[0] = 1
    owner = np.repeat(np.arange(B), n)
    key_tags = rng.integers(-1, K + 1, size=N)
    key_tags[0] = 1
    inputs = StepInputs(
        images=images,
        targets=targets,
        pseudo_masks=masks,
        weak_patches=weak,
        tags=tags,
        candidates=targets[owner].astype(bool),
        prototypes=_unit(rng, K, C),
        prototype_ready=np.ones(K, dtype=bool),
        keys=_unit(rng, N, C),
        key_tags=key_tags,
        weights=LossWeights(),
    )
    return params, inputs


def _chain_case(rng):
    params, inputs = chain_inputs(rng)
    shapes = model.param_shapes(params)
    _, _, grads = objective(params, inputs)
    theta0 = model.flatten(params)
    fn = lambda theta: objective(model.unflatten(theta, shapes), inputs)[0]
    return model.flatten(grads), numeric_gradient(fn, theta0)


GRADIENT_CASES = {
    "lig_loss": _lig_case,
    "lil_loss": _lil_case,
    "multilabel_soft_margin": _msm_case,
    "seg_cross_entropy": _seg_case,
    "encoder_chain": _chain_case,
}


def gradient_check(name, seeds=NUM_SEEDS):
    start = time.perf_counter()
    case = GRADIENT_CASES[name]
    worst = 0.0
    for seed in range(seeds):
        analytic, numeric = case(np.random.default_rng(seed))
        worst = max(worst, relative_error(analytic, numeric))
    return CheckResult(name, worst, GRAD_TOL, seeds, time.perf_counter() - start)


class ListReservoir:
    """Naive FIFO model: a Python list trimmed from the front."""

    def __init__(self, capacity):
        self.capacity = capacity
        self.items = []

    def push_batch(self, q, q_tags, k, k_tags):
        for e, t in zip(q, q_tags):
            self.items.append((tuple(e), int(t)))
        for e, t in zip(k, k_tags):
            self.items.append((tuple(e), int(t)))
        del self.items[: max(0, len(self.items) - self.capacity)]


def reservoir_oracle(ops=10_000, seed=0):
    """Random pushes and reads against :class:`ListReservoir`; the error is
    the number of reads that disagree."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    mismatches = 0
    done = 0
    while done < ops:
        cap = int(rng.integers(4, 65))
        dim = int(rng.integers(1, 4))
        res, ref = TagReservoir(cap, dim), ListReservoir(cap)
        for _ in range(int(rng.integers(20, 200))):
            if rng.random() < 0.6:
                n = int(rng.integers(0, cap // 2 + 1))
                q = rng.integers(-8, 8, size=(n, dim)).astype(float)
                k = rng.integers(-8, 8, size=(n, dim)).astype(float)
                tags = rng.integers(-1, 4, size=n)
                res.push_batch(q, tags, k, tags)
                ref.push_batch(q, tags, k, tags)
            else:
                view = res.view()
                got = [(tuple(e), int(t)) for e, t in zip(view.embeddings, view.tags)]
                tag = int(rng.integers(-1, 4))
                want_pos = [e for e, t in ref.items if t == tag]
                got_pos = [tuple(e) for e in view.positives(tag)]
                if got != ref.items or got_pos != want_pos or len(res) != len(ref.items):
                    mismatches += 1
            done += 1
            if done >= ops:
                break
    return CheckResult("reservoir_fifo", float(mismatches), 0.0, ops, time.perf_counter() - start)


def brute_rectify(q, tag, positives, sigma):
    """Loop-by-loop recomputation of the mean similarity, the noisy-pair
    count and the rectified tag."""
    sims = []
    for p in positives:
        s = 0.0
        for a, b in zip(q, p):
            s += a * b
        sims.append(s)
    mu = sum(sims) / len(sims)
    n_v = sum(1 for s in sims if s < mu)
    return mu, n_v, (-1 if n_v / len(sims) > sigma else tag)


def dyadic_units(rng, n, dim=16):
    """Unit vectors with entries ``+-1/4`` (``dim=16``): dot products and sums
    of them are exact in floating point."""
    return rng.choice([-0.25, 0.25], size=(n, dim))


def rectification_oracle(cases=1000, seed=0, sigma=0.6):
    """Compare rectification with :func:`brute_rectify` on dyadic inputs,
    where every quantity is exact; the error counts any disagreement."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(cases):
        n = int(rng.integers(1, 40))
        tag = int(rng.integers(1, 4))
        q = dyadic_units(rng, 1)[0]
        pos = dyadic_units(rng, n)
        others = dyadic_units(rng, int(rng.integers(0, 10)))
        mu, n_v = noisy_pair_count(q, pos)
        b_mu, b_nv, b_tag = brute_rectify(q, tag, pos, sigma)
        keys = np.concatenate([pos, others])
        key_tags = np.concatenate([np.full(n, tag), np.full(len(others), tag % 3 + 1)])
        order = rng.permutation(len(keys))

        class _View:
            embeddings = keys[order]
            tags = key_tags[order]

        new, _ = rectify_batch(q[None, :], np.array([tag]), _View, sigma, min_positives=1)
        if mu != b_mu or n_v != b_nv or int(new[0]) != b_tag:
            mismatches += 1
    return CheckResult("rectification", float(mismatches), 0.0, cases, time.perf_counter() - start)


def prototype_norm_sweep(trials=200, seed=0):
    """Random token streams through the bank; error is the worst deviation of
    an initialized prototype's norm from 1."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        K, C = int(rng.integers(1, 6)), int(rng.integers(1, 9))
        bank = PrototypeBank.empty(K, C)
        eta = float(rng.random())
        tokens = []
        for _ in range(int(rng.integers(1, 30))):
            labels = tuple(sorted(rng.choice(np.arange(1, K + 1), size=int(rng.integers(1, K + 1)), replace=False)))
            z = rng.normal(scale=float(10 ** rng.uniform(-3, 3)), size=C)
            tokens.append(ClassToken(z, tuple(int(l) for l in labels)))
        bank, _ = update_bank(bank, tokens, eta)
        norms = np.linalg.norm(bank.vectors[bank.initialized], axis=1)
        if norms.size:
            worst = max(worst, float(np.max(np.abs(norms - 1.0))))
    return CheckResult("prototype_norm", worst, 1e-12, trials, time.perf_counter() - start)


def run_all():
    results = [gradient_check(name) for name in GRADIENT_CASES]
    results.append(reservoir_oracle())
    results.append(rectification_oracle())
    results.append(prototype_norm_sweep())
    return results
