"""Shared domain types, validation and the seeding contract."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence, Union

import numpy as np

# Estimators with a 1/(pi_+ - pi_-) factor refuse priors this close to 0.5.
EPS_PRIOR = 1e-6


class SDPcompError(Exception):
    """Base class for every error raised by this package."""


class EmptyDataset(SDPcompError):
    pass


class DimensionMismatch(SDPcompError):
    pass


class NonFiniteFeature(SDPcompError):
    pass


class PriorOutOfRange(SDPcompError):
    pass


class DegeneratePrior(SDPcompError):
    pass


class MissingPairKind(SDPcompError):
    pass


class NonDifferentiableLoss(SDPcompError):
    pass


class GammaOutOfRange(SDPcompError):
    pass


class LambdaOutOfRange(SDPcompError):
    pass


class InvalidNoiseRates(SDPcompError):
    pass


class InsufficientSamples(SDPcompError):
    pass


class SingleClassData(SDPcompError):
    pass


class SingleClassTest(SDPcompError):
    pass


class NonFiniteRisk(SDPcompError):
    def __init__(self, epoch: int, value: float):
        super().__init__(f"risk became non-finite ({value}) at epoch {epoch}")
        self.epoch = epoch
        self.value = value


class NonFiniteScore(SDPcompError, ValueError):
    """A scorer produced inf or nan."""


class LengthMismatch(SDPcompError):
    pass


class InvalidSpec(SDPcompError):
    pass


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for ``(seed, *stream)``; same key, same draws."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(x)):
            raise NonFiniteFeature("sample features must be finite")
        if self.label is not None and self.label not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.label!r}")
        object.__setattr__(self, "features", x)


@dataclass(frozen=True)
class LabeledPair:
    """An instance pair with its SD sign. ``first`` is the Pcomp-preferred instance."""

    first: np.ndarray
    second: np.ndarray
    sd: int

    def __post_init__(self):
        a = np.asarray(self.first, dtype=np.float64).reshape(-1)
        b = np.asarray(self.second, dtype=np.float64).reshape(-1)
        if a.size == 0 or a.shape != b.shape:
            raise DimensionMismatch(f"pair halves have shapes {a.shape} and {b.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise NonFiniteFeature("pair features must be finite")
        if self.sd not in (-1, 1):
            raise ValueError(f"sd must be -1 or +1, got {self.sd!r}")
        object.__setattr__(self, "first", a)
        object.__setattr__(self, "second", b)


@dataclass(frozen=True)
class PairArrays:
    """Column-stacked pair dataset: ``first`` and ``second`` are (n, d), ``sd`` is (n,)."""

    first: np.ndarray
    second: np.ndarray
    sd: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.first, dtype=np.float64))
        b = np.atleast_2d(np.asarray(self.second, dtype=np.float64))
        s = np.asarray(self.sd, dtype=np.int64).reshape(-1)
        if a.shape != b.shape or a.shape[0] != s.shape[0]:
            raise DimensionMismatch(
                f"inconsistent shapes first={a.shape} second={b.shape} sd={s.shape}"
            )
        object.__setattr__(self, "first", a)
        object.__setattr__(self, "second", b)
        object.__setattr__(self, "sd", s)

    def __len__(self) -> int:
        return self.sd.shape[0]

    @property
    def dim(self) -> int:
        return self.first.shape[1]

    def subset(self, idx) -> "PairArrays":
        return PairArrays(self.first[idx], self.second[idx], self.sd[idx])

    def to_pairs(self) -> list[LabeledPair]:
        return [LabeledPair(a, b, int(s)) for a, b, s in zip(self.first, self.second, self.sd)]

    @classmethod
    def from_pairs(cls, pairs: Iterable[LabeledPair]) -> "PairArrays":
        pairs = list(pairs)
        if not pairs:
            raise EmptyDataset("no pairs")
        dims = {p.first.shape[0] for p in pairs}
        if len(dims) > 1:
            raise DimensionMismatch(f"pairs have mixed dimensions {sorted(dims)}")
        return cls(
            np.stack([p.first for p in pairs]),
            np.stack([p.second for p in pairs]),
            np.array([p.sd for p in pairs], dtype=np.int64),
        )


PairData = Union[PairArrays, Sequence[LabeledPair]]


def as_pair_arrays(pairs: PairData) -> PairArrays:
    if isinstance(pairs, PairArrays):
        return pairs
    return PairArrays.from_pairs(pairs)


def validate_pair_dataset(pairs: PairData) -> tuple[int, int, int]:
    """Return ``(n_s, n_d, d)`` after checking dimensions, finiteness and signs."""
    if isinstance(pairs, PairArrays):
        if len(pairs) == 0:
            raise EmptyDataset("no pairs")
        arr = pairs
    else:
        pairs = list(pairs)
        if not pairs:
            raise EmptyDataset("no pairs")
        arr = PairArrays.from_pairs(pairs)
    if arr.dim == 0:
        raise DimensionMismatch("pairs must have d > 0")
    if not (np.all(np.isfinite(arr.first)) and np.all(np.isfinite(arr.second))):
        raise NonFiniteFeature("pair features must be finite")
    if not np.all(np.isin(arr.sd, (-1, 1))):
        raise ValueError("sd signs must be -1 or +1")
    n_s = int(np.count_nonzero(arr.sd == 1))
    return n_s, len(arr) - n_s, arr.dim


@dataclass(frozen=True)
class ClassPrior:
    pi_plus: float

    def __post_init__(self):
        p = float(self.pi_plus)
        if not (0.0 < p < 1.0) or math.isnan(p):
            raise PriorOutOfRange(f"pi_plus must lie in (0, 1), got {self.pi_plus}")
        object.__setattr__(self, "pi_plus", p)

    @property
    def pi_minus(self) -> float:
        return 1.0 - self.pi_plus

    @property
    def pi_s(self) -> float:
        return self.pi_plus**2 + self.pi_minus**2

    @property
    def pi_d(self) -> float:
        return 2.0 * self.pi_plus * self.pi_minus

    @property
    def gap(self) -> float:
        """pi_+ - pi_-."""
        return self.pi_plus - self.pi_minus

    def require_nondegenerate(self, what: str = "estimator") -> None:
        if abs(self.gap) < EPS_PRIOR:
            raise DegeneratePrior(
                f"{what} undefined at pi_plus={self.pi_plus:g}: "
                "the risk rewrite divides by pi_plus - pi_minus"
            )


def class_prior_from(pi_plus: float) -> ClassPrior:
    return ClassPrior(pi_plus)


@dataclass(frozen=True)
class NoiseRates:
    rho_s: float = 0.0
    rho_d: float = 0.0
    rho_c: float = 0.0

    def __post_init__(self):
        for name in ("rho_s", "rho_d", "rho_c"):
            v = float(getattr(self, name))
            if not (0.0 <= v < 1.0):
                raise InvalidNoiseRates(f"{name} must lie in [0, 1), got {v}")
            object.__setattr__(self, name, v)

    @property
    def is_clean(self) -> bool:
        return self.rho_s == 0.0 and self.rho_d == 0.0 and self.rho_c == 0.0


class Estimator(str, Enum):
    SD = "sd"
    PC = "pc"
    CONVEX = "convex"
    SDPC = "sdpc"
    COMBINED = "combined"


class Correction(str, Enum):
    IDENTITY = "id"
    RELU = "relu"
    ABS = "abs"


class LossKind(str, Enum):
    LOGISTIC = "logistic"
    ZERO_ONE = "zero_one"


@dataclass(frozen=True)
class RiskSpec:
    estimator: Estimator = Estimator.SDPC
    correction: Correction = Correction.IDENTITY
    loss: LossKind = LossKind.LOGISTIC
    gamma: Optional[float] = None
    lam: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        object.__setattr__(self, "correction", Correction(self.correction))
        object.__setattr__(self, "loss", LossKind(self.loss))
        if (self.gamma is not None) != (self.estimator is Estimator.CONVEX):
            raise InvalidSpec("gamma is given exactly when the estimator is convex")
        if (self.lam is not None) != (self.estimator is Estimator.COMBINED):
            raise InvalidSpec("lambda is given exactly when the estimator is combined")
        if self.gamma is not None and not (0.0 <= self.gamma <= 1.0):
            raise GammaOutOfRange(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.lam is not None and not (0.0 <= self.lam <= 1.0):
            raise LambdaOutOfRange(f"lambda must lie in [0, 1], got {self.lam}")

    @property
    def trainable(self) -> bool:
        return self.loss is LossKind.LOGISTIC

    @property
    def needs_both_kinds(self) -> bool:
        """True when the estimator normalises by n_S and n_D separately."""
        if self.estimator is Estimator.PC:
            return False
        if self.estimator is Estimator.CONVEX:
            return self.gamma > 0.0
        if self.estimator is Estimator.COMBINED:
            return self.lam > 0.0
        return True

    def label(self) -> str:
        name = self.estimator.value
        if self.gamma is not None:
            name += f"({self.gamma:g})"
        if self.lam is not None:
            name += f"({self.lam:g})"
        return f"{name}-{self.correction.value}"
