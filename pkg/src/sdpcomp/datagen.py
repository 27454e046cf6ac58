"""Synthetic data, SD-Pcomp pair generation, label noise and prior estimation."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from .core import (
    ClassPrior,
    EmptyDataset,
    InsufficientSamples,
    NoiseRates,
    PairArrays,
    SingleClassData,
    as_pair_arrays,
    rng_for,
)
from .losses import loss_grad
from .model import OptimizerState, Scorer, optimizer_step


@dataclass(frozen=True)
class GaussianMixtureSpec:
    """Two isotropic Gaussian classes with a shared standard deviation."""

    mean_plus: np.ndarray
    mean_minus: np.ndarray
    sigma: float
    prior: ClassPrior

    def __post_init__(self):
        mp = np.asarray(self.mean_plus, dtype=np.float64).reshape(-1)
        mm = np.asarray(self.mean_minus, dtype=np.float64).reshape(-1)
        if mp.shape != mm.shape or mp.size == 0:
            raise ValueError("class means must be non-empty and of equal length")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "mean_plus", mp)
        object.__setattr__(self, "mean_minus", mm)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def dim(self) -> int:
        return self.mean_plus.size

    @classmethod
    def symmetric(cls, pi_plus: float, dim: int = 1, mean_gap: float = 2.0, sigma: float = 1.0):
        """Means at +/- (mean_gap / 2) along the first axis."""
        mp = np.zeros(dim)
        mp[0] = mean_gap / 2.0
        return cls(mp, -mp, sigma, ClassPrior(pi_plus))

    def draw(self, labels, rng: np.random.Generator) -> np.ndarray:
        """Instances for the given labels (one row per label)."""
        labels = np.asarray(labels)
        means = np.where(labels[:, None] == 1, self.mean_plus, self.mean_minus)
        return means + self.sigma * rng.standard_normal((labels.size, self.dim))


@dataclass(frozen=True)
class LabeledSamples:
    X: np.ndarray
    y: np.ndarray

    def __len__(self):
        return self.y.shape[0]


def sample_labeled(
    spec: GaussianMixtureSpec, n: int, seed: int, stream: int = 1
) -> LabeledSamples:
    """i.i.d. labelled draws; ``stream`` separates e.g. training pool from test set."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = rng_for(seed, stream)
    y = np.where(rng.random(n) < spec.prior.pi_plus, 1, -1)
    return LabeledSamples(spec.draw(y, rng), y)


@dataclass(frozen=True)
class SDPairs:
    """Unordered pairs with their true SD sign and (hidden) class labels."""

    first: np.ndarray
    second: np.ndarray
    sd: np.ndarray
    y_first: np.ndarray
    y_second: np.ndarray

    def __len__(self):
        return self.sd.shape[0]


def make_sd_pairs(samples: LabeledSamples, n_pairs: int, seed: int) -> SDPairs:
    """Draw both members independently, with replacement, from the labelled pool."""
    n = len(samples)
    if n < 2:
        raise InsufficientSamples("need at least two labelled samples to form pairs")
    if n_pairs < 1:
        raise ValueError("n_pairs must be at least 1")
    rng = rng_for(seed, 2)
    i = rng.integers(0, n, size=n_pairs)
    j = rng.integers(0, n, size=n_pairs)
    y1, y2 = samples.y[i], samples.y[j]
    sd = np.where(y1 == y2, 1, -1)
    return SDPairs(samples.X[i], samples.X[j], sd, y1, y2)


class Annotator:
    """Probabilistic ranker r(x) = sigmoid(g(x)) with values clipped inside (0, 1)."""

    def __init__(self, scorer: Scorer):
        self.scorer = scorer

    def confidence(self, X) -> np.ndarray:
        return np.clip(expit(self.scorer.predict(X)), 1e-15, 1.0 - 1e-15)

    __call__ = confidence


def train_annotator(
    samples: LabeledSamples,
    epochs: int = 10,
    seed: int = 0,
    hidden: Sequence[int] = (),
    batch_size: int = 256,
    learning_rate: float = 1e-2,
) -> Annotator:
    """Fit a logistic-link scorer on true labels with minibatch Adam."""
    if epochs < 1:
        raise ValueError("epochs must be at least 1")
    if np.unique(samples.y).size < 2:
        raise SingleClassData("annotator training needs both classes")
    d = samples.X.shape[1]
    scorer = Scorer.mlp(d, hidden, seed=seed) if hidden else Scorer.linear(d)
    state = OptimizerState("adam", learning_rate=learning_rate)
    rng = rng_for(seed, 3)
    n = len(samples)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            z, acts = scorer.forward_batch(samples.X[idx])
            upstream = loss_grad("logistic", z, samples.y[idx]) / idx.size
            scorer.params = optimizer_step(state, scorer.params, scorer.backward_batch(acts, upstream))
    return Annotator(scorer)


def order_by_confidence(pairs: SDPairs, annotator) -> PairArrays:
    """Put the more confidently positive instance first; ties are swapped."""
    r1 = annotator(pairs.first)
    r2 = annotator(pairs.second)
    swap = r1 <= r2
    first = np.where(swap[:, None], pairs.second, pairs.first)
    second = np.where(swap[:, None], pairs.first, pairs.second)
    return PairArrays(first, second, pairs.sd.copy())


def corrupt(pairs, rates: NoiseRates, seed: int) -> PairArrays:
    """Flip SD signs (rho_s on similar, rho_d on dissimilar), then reverse order w.p. rho_c."""
    arr = as_pair_arrays(pairs)
    if rates.rho_s + rates.rho_d >= 1.0:
        warnings.warn("rho_s + rho_d >= 1: observed SD labels are uninformative or inverted")
    rng = rng_for(seed, 4)
    n = len(arr)
    u_sd = rng.random(n)
    u_order = rng.random(n)
    flip_p = np.where(arr.sd == 1, rates.rho_s, rates.rho_d)
    sd = np.where(u_sd < flip_p, -arr.sd, arr.sd)
    swap = u_order < rates.rho_c
    first = np.where(swap[:, None], arr.second, arr.first)
    second = np.where(swap[:, None], arr.first, arr.second)
    return PairArrays(first, second, sd)


class PriorSide(str, Enum):
    GE_HALF = "ge"
    LT_HALF = "lt"


@dataclass(frozen=True)
class PriorEstimate:
    pi_plus: float
    pi_s_hat: float
    clamped: bool


def estimate_prior_detail(n_s: int, n_d: int, side=PriorSide.GE_HALF) -> PriorEstimate:
    if n_s < 0 or n_d < 0:
        raise ValueError("counts must be non-negative")
    if n_s + n_d < 1:
        raise EmptyDataset("need at least one pair to estimate the prior")
    pi_s_hat = n_s / (n_s + n_d)
    radicand = 2.0 * pi_s_hat - 1.0
    clamped = radicand < 0.0
    root = math.sqrt(min(max(radicand, 0.0), 1.0))
    if PriorSide(side) is PriorSide.GE_HALF:
        pi = (1.0 + root) / 2.0
    else:
        pi = (1.0 - root) / 2.0
    return PriorEstimate(pi, pi_s_hat, clamped)


def estimate_prior(n_s: int, n_d: int, side=PriorSide.GE_HALF) -> float:
    """pi_+ from the observed fraction of similar pairs.

    pi_S = pi_+^2 + pi_-^2 gives 2 pi_S - 1 = (2 pi_+ - 1)^2; the root is picked
    by ``side``. A negative radicand (possible from sampling noise) is clamped
    to 0, returning 0.5.
    """
    est = estimate_prior_detail(n_s, n_d, side)
    if est.clamped:
        warnings.warn("similar fraction below 1/2; prior estimate clamped to 0.5")
    return est.pi_plus


def generate_sdpc_pairs(
    spec: GaussianMixtureSpec,
    n_pairs: int,
    seed: int,
    rates: Optional[NoiseRates] = None,
    annotator_epochs: int = 10,
    pool_size: Optional[int] = None,
) -> tuple[PairArrays, dict]:
    """Full synthetic pipeline: pool -> SD pairs -> confidence order -> noise.

    Returns the pairs and a dict with the annotator and the clean pairs, for
    inspection.
    """
    pool = sample_labeled(spec, pool_size or 2 * n_pairs, seed)
    raw = make_sd_pairs(pool, n_pairs, seed)
    annotator = train_annotator(pool, epochs=annotator_epochs, seed=seed)
    clean = order_by_confidence(raw, annotator)
    noisy = corrupt(clean, rates, seed) if rates is not None and not rates.is_clean else clean
    return noisy, {"annotator": annotator, "clean": clean, "raw": raw, "pool": pool}
