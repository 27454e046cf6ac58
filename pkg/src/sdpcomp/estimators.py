"""Empirical risk estimators for SD / Pcomp / SD-Pcomp pair data.

Every estimator here is a function of the scores g(x), g(x') of the pairs and
of the class prior. Gradients are returned with respect to those scores;
:func:`risk_gradient` chains them through a :class:`~sdpcomp.model.Scorer`.

Internally each estimator is written as a sum of *partial terms*. A partial
term is a signed sum of per-instance losses with fixed targets; the risk
correction f is applied to each partial term before summing. For the unified
estimator the partial terms are the eight sums A_S ... D_D; for SD and Pcomp
they are the positive-class and negative-class parts of the risk.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    ClassPrior,
    Correction,
    EmptyDataset,
    Estimator,
    GammaOutOfRange,
    LambdaOutOfRange,
    LossKind,
    MissingPairKind,
    NonDifferentiableLoss,
    NonFiniteScore,
    RiskSpec,
    as_pair_arrays,
)
from .losses import corrected_loss, loss, loss_grad

FIRST, SECOND = 0, 1


@dataclass(frozen=True)
class PairScores:
    s_first: np.ndarray
    s_second: np.ndarray
    sd: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.s_first, dtype=np.float64).reshape(-1)
        b = np.asarray(self.s_second, dtype=np.float64).reshape(-1)
        s = np.asarray(self.sd, dtype=np.int64).reshape(-1)
        if not (a.shape == b.shape == s.shape):
            raise ValueError("score and sign vectors must have equal length")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise NonFiniteScore("scores must be finite")
        object.__setattr__(self, "s_first", a)
        object.__setattr__(self, "s_second", b)
        object.__setattr__(self, "sd", s)

    def __len__(self):
        return self.sd.shape[0]

    @property
    def similar(self) -> np.ndarray:
        return self.sd == 1

    @property
    def dissimilar(self) -> np.ndarray:
        return self.sd == -1

    def counts(self) -> tuple[int, int]:
        n_s = int(np.count_nonzero(self.similar))
        return n_s, len(self) - n_s

    def slot(self, which: int) -> np.ndarray:
        return self.s_first if which == FIRST else self.s_second


@dataclass(frozen=True)
class AlphaCoefficients:
    alpha_s_plus: tuple[float, float]
    alpha_s_minus: tuple[float, float]
    alpha_d_plus: tuple[float, float]
    alpha_d_minus: tuple[float, float]


@dataclass(frozen=True)
class EightTerms:
    a_s: float
    b_s: float
    c_s: float
    d_s: float
    a_d: float
    b_d: float
    c_d: float
    d_d: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.a_s, self.b_s, self.c_s, self.d_s, self.a_d, self.b_d, self.c_d, self.d_d)

    @property
    def similar_sum(self) -> float:
        return self.a_s + self.b_s + self.c_s + self.d_s

    @property
    def dissimilar_sum(self) -> float:
        return self.a_d + self.b_d + self.c_d + self.d_d


# ---------------------------------------------------------------------------
# correction functions


def apply_correction(correction, values):
    v = np.asarray(values, dtype=np.float64)
    c = Correction(correction)
    if c is Correction.IDENTITY:
        return v
    if c is Correction.RELU:
        return np.maximum(v, 0.0)
    return np.abs(v)


def correction_derivative(correction, values):
    """f'(v) with the kink convention f'(0) = 0 for ReLU and ABS."""
    v = np.asarray(values, dtype=np.float64)
    c = Correction(correction)
    if c is Correction.IDENTITY:
        return np.ones_like(v)
    if c is Correction.RELU:
        return (v > 0.0).astype(np.float64)
    return np.sign(v)


# ---------------------------------------------------------------------------
# partial-term representation

# One linear component: sum_i weight[i] * loss(score_slot[i], target).
# ``weight`` is a full-length vector over pairs (zero outside the group).


@dataclass
class _Component:
    weight: np.ndarray
    slot: int
    target: int


@dataclass
class _Partial:
    components: list

    def value(self, scores: PairScores, kind) -> float:
        total = 0.0
        for c in self.components:
            total += float(np.dot(c.weight, loss(kind, scores.slot(c.slot), c.target)))
        return total

    def add_grad(self, scores: PairScores, kind, scale: float, g_first, g_second):
        for c in self.components:
            g = scale * c.weight * loss_grad(kind, scores.slot(c.slot), c.target)
            if c.slot == FIRST:
                g_first += g
            else:
                g_second += g


def _group_weights(mask: np.ndarray, n: int) -> np.ndarray:
    return mask.astype(np.float64) / n


def _require_kinds(scores: PairScores) -> tuple[int, int]:
    n_s, n_d = scores.counts()
    if n_s == 0 or n_d == 0:
        raise MissingPairKind(
            f"estimator needs both similar and dissimilar pairs (n_S={n_s}, n_D={n_d})"
        )
    return n_s, n_d


def eight_term_coefficients(prior: ClassPrior) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Coefficients of the eight partial sums, before the 1/n_S or 1/n_D factor.

    Each 4-tuple is ordered (first,+1), (first,-1), (second,+1), (second,-1).
    """
    prior.require_nondegenerate("SD-Pcomp estimator")
    p, m, gap = prior.pi_plus, prior.pi_minus, prior.gap
    sim = (p**3 / gap, -(p**2) * m / gap, p * m**2 / gap, -(m**3) / gap)
    dis = (
        m * (p**2 - m) / gap,
        p * (m - p**2) / gap,
        m * (m**2 - p) / gap,
        p * (p - m**2) / gap,
    )
    return sim, dis


_SLOTS = ((FIRST, 1), (FIRST, -1), (SECOND, 1), (SECOND, -1))


def _sdpc_partials(scores: PairScores, prior: ClassPrior) -> list:
    n_s, n_d = _require_kinds(scores)
    sim, dis = eight_term_coefficients(prior)
    ws = _group_weights(scores.similar, n_s)
    wd = _group_weights(scores.dissimilar, n_d)
    parts = []
    for coefs, w in ((sim, ws), (dis, wd)):
        for coef, (slot, target) in zip(coefs, _SLOTS):
            parts.append(_Partial([_Component(coef * w, slot, target)]))
    return parts


def _sd_partials(scores: PairScores, prior: ClassPrior) -> list:
    """Positive-target and negative-target parts of the SD risk."""
    prior.require_nondegenerate("SD estimator")
    n_s, n_d = _require_kinds(scores)
    a, b = prior.pi_plus / prior.gap, -prior.pi_minus / prior.gap
    ws = _group_weights(scores.similar, n_s) * prior.pi_s / 2.0
    wd = _group_weights(scores.dissimilar, n_d) * prior.pi_d / 2.0
    pos, neg = [], []
    for slot in (FIRST, SECOND):
        # similar pairs: L(z,+1) = a l(z,+1) + b l(z,-1)
        pos.append(_Component(a * ws, slot, 1))
        neg.append(_Component(b * ws, slot, -1))
        # dissimilar pairs: L(z,-1) = a l(z,-1) + b l(z,+1)
        neg.append(_Component(a * wd, slot, -1))
        pos.append(_Component(b * wd, slot, 1))
    return [_Partial(pos), _Partial(neg)]


def _pc_partials(scores: PairScores, prior: ClassPrior) -> list:
    n = len(scores)
    if n == 0:
        raise EmptyDataset("Pcomp estimator needs at least one pair")
    w = np.full(n, 1.0 / n)
    pos = _Partial([_Component(w, FIRST, 1), _Component(-prior.pi_minus * w, SECOND, 1)])
    neg = _Partial([_Component(w, SECOND, -1), _Component(-prior.pi_plus * w, FIRST, -1)])
    return [pos, neg]


def _weighted_partials(spec: RiskSpec, scores: PairScores, prior: ClassPrior):
    """List of (weight, partial) making up the pair part of ``spec``'s risk."""
    est = spec.estimator
    if est is Estimator.SD:
        return [(1.0, p) for p in _sd_partials(scores, prior)]
    if est is Estimator.PC:
        return [(1.0, p) for p in _pc_partials(scores, prior)]
    if est is Estimator.SDPC:
        return [(1.0, p) for p in _sdpc_partials(scores, prior)]
    if est is Estimator.CONVEX:
        out = []
        if spec.gamma > 0.0:
            out += [(spec.gamma, p) for p in _sd_partials(scores, prior)]
        if spec.gamma < 1.0:
            out += [(1.0 - spec.gamma, p) for p in _pc_partials(scores, prior)]
        return out
    if est is Estimator.COMBINED:
        if spec.lam > 0.0:
            return [(spec.lam, p) for p in _sdpc_partials(scores, prior)]
        return []
    raise ValueError(f"unknown estimator {est!r}")


# ---------------------------------------------------------------------------
# public estimator values


def alpha_coefficients(prior: ClassPrior) -> AlphaCoefficients:
    prior.require_nondegenerate("SD-Pcomp estimator")
    p, m, gap = prior.pi_plus, prior.pi_minus, prior.gap
    pi = {1: p, -1: m}

    def a_s(t):
        return (pi[t] ** 2 / gap * p, -(pi[t] ** 2) / gap * m)

    def a_d(t):
        return (m * (pi[t] ** 2 - pi[-t]) / gap, p * (pi[-t] - pi[t] ** 2) / gap)

    return AlphaCoefficients(a_s(1), a_s(-1), a_d(1), a_d(-1))


def risk_sd(scores: PairScores, prior: ClassPrior, kind=LossKind.LOGISTIC) -> float:
    """SD-only estimator: similar pairs target +1, dissimilar pairs target -1."""
    prior.require_nondegenerate("SD estimator")
    n_s, n_d = _require_kinds(scores)
    sim, dis = scores.similar, scores.dissimilar
    r_s = (
        prior.pi_s
        / n_s
        * np.sum(
            (
                corrected_loss(prior, kind, scores.s_first[sim], 1)
                + corrected_loss(prior, kind, scores.s_second[sim], 1)
            )
            / 2.0
        )
    )
    r_d = (
        prior.pi_d
        / n_d
        * np.sum(
            (
                corrected_loss(prior, kind, scores.s_first[dis], -1)
                + corrected_loss(prior, kind, scores.s_second[dis], -1)
            )
            / 2.0
        )
    )
    return float(r_s + r_d)


def risk_pcomp(scores: PairScores, prior: ClassPrior, kind=LossKind.LOGISTIC) -> float:
    """Pcomp-only estimator; SD signs are ignored."""
    n = len(scores)
    if n == 0:
        raise EmptyDataset("Pcomp estimator needs at least one pair")
    x, xp = scores.s_first, scores.s_second
    per_pair = (
        loss(kind, x, 1)
        - prior.pi_plus * loss(kind, x, -1)
        + loss(kind, xp, -1)
        - prior.pi_minus * loss(kind, xp, 1)
    )
    return float(np.sum(per_pair) / n)


def risk_convex(
    scores: PairScores, prior: ClassPrior, kind=LossKind.LOGISTIC, gamma: float = 0.5
) -> float:
    if not (0.0 <= gamma <= 1.0):
        raise GammaOutOfRange(f"gamma must lie in [0, 1], got {gamma}")
    r_sd = risk_sd(scores, prior, kind) if gamma > 0.0 else 0.0
    r_pc = risk_pcomp(scores, prior, kind) if gamma < 1.0 else 0.0
    return gamma * r_sd + (1.0 - gamma) * r_pc


def eight_terms(scores: PairScores, prior: ClassPrior, kind=LossKind.LOGISTIC) -> EightTerms:
    parts = _sdpc_partials(scores, prior)
    return EightTerms(*(p.value(scores, kind) for p in parts))


def risk_sdpc(
    scores: PairScores,
    prior: ClassPrior,
    kind=LossKind.LOGISTIC,
    correction=Correction.IDENTITY,
) -> float:
    """Unified SD-Pcomp risk; ``correction`` is applied to each of the eight terms."""
    terms = np.array(eight_terms(scores, prior, kind).as_tuple())
    return float(np.sum(apply_correction(correction, terms)))


def risk_sdpc_alpha(scores: PairScores, prior: ClassPrior, kind=LossKind.LOGISTIC) -> float:
    """The same unbiased risk written with the per-mixture alpha weights."""
    n_s, n_d = _require_kinds(scores)
    al = alpha_coefficients(prior)
    total = 0.0
    for mask, n, (a_plus, a_minus) in (
        (scores.similar, n_s, (al.alpha_s_plus, al.alpha_s_minus)),
        (scores.dissimilar, n_d, (al.alpha_d_plus, al.alpha_d_minus)),
    ):
        for alpha, z in ((a_plus, scores.s_first[mask]), (a_minus, scores.s_second[mask])):
            total += np.sum(alpha[0] * loss(kind, z, 1) + alpha[1] * loss(kind, z, -1)) / n
    return float(total)


def ordinary_risk(scores, labels, kind=LossKind.LOGISTIC) -> float:
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if scores.size == 0:
        raise EmptyDataset("ordinary labelled set is empty")
    return float(np.mean(loss(kind, scores, np.asarray(labels))))


def risk_combined(
    scores: PairScores,
    ordinary_scores,
    ordinary_labels,
    prior: ClassPrior,
    kind=LossKind.LOGISTIC,
    lam: float = 0.5,
    correction=Correction.IDENTITY,
) -> float:
    """lam * SD-Pcomp risk + (1 - lam) * mean loss on ordinarily labelled points."""
    if not (0.0 <= lam <= 1.0):
        raise LambdaOutOfRange(f"lambda must lie in [0, 1], got {lam}")
    r_pairs = risk_sdpc(scores, prior, kind, correction) if lam > 0.0 else 0.0
    r_ord = ordinary_risk(ordinary_scores, ordinary_labels, kind) if lam < 1.0 else 0.0
    return lam * r_pairs + (1.0 - lam) * r_ord


def risk_value(
    spec: RiskSpec,
    scores: PairScores,
    prior: ClassPrior,
    ordinary_scores=None,
    ordinary_labels=None,
) -> float:
    """Value of the estimator described by ``spec`` (correction included)."""
    if spec.correction is Correction.IDENTITY:
        est = spec.estimator
        if est is Estimator.SD:
            return risk_sd(scores, prior, spec.loss)
        if est is Estimator.PC:
            return risk_pcomp(scores, prior, spec.loss)
        if est is Estimator.CONVEX:
            return risk_convex(scores, prior, spec.loss, spec.gamma)
        if est is Estimator.SDPC:
            return risk_sdpc(scores, prior, spec.loss)
    if spec.estimator is Estimator.SDPC:
        return risk_sdpc(scores, prior, spec.loss, spec.correction)
    if spec.estimator is Estimator.COMBINED:
        if spec.lam < 1.0 and ordinary_scores is None:
            raise EmptyDataset("combined estimator with lambda < 1 needs ordinary data")
        return risk_combined(
            scores, ordinary_scores, ordinary_labels, prior, spec.loss, spec.lam, spec.correction
        )
    total = 0.0
    for w, part in _weighted_partials(spec, scores, prior):
        total += w * float(apply_correction(spec.correction, part.value(scores, spec.loss)))
    return total


def risk_score_gradient(
    spec: RiskSpec,
    scores: PairScores,
    prior: ClassPrior,
    ordinary_scores=None,
    ordinary_labels=None,
):
    """Gradient of :func:`risk_value` with respect to the scores.

    Returns ``(d/d s_first, d/d s_second, d/d ordinary_scores)``; the last is
    ``None`` unless the estimator uses ordinary data.
    """
    if not spec.trainable:
        raise NonDifferentiableLoss("training requires the logistic loss")
    g_first = np.zeros(len(scores))
    g_second = np.zeros(len(scores))
    for w, part in _weighted_partials(spec, scores, prior):
        if spec.correction is Correction.IDENTITY:
            scale = w
        else:
            scale = w * float(correction_derivative(spec.correction, part.value(scores, spec.loss)))
        if scale != 0.0:
            part.add_grad(scores, spec.loss, scale, g_first, g_second)
    g_ord = None
    if spec.estimator is Estimator.COMBINED and spec.lam < 1.0:
        if ordinary_scores is None:
            raise EmptyDataset("combined estimator with lambda < 1 needs ordinary data")
        z = np.asarray(ordinary_scores, dtype=np.float64).reshape(-1)
        if z.size == 0:
            raise EmptyDataset("ordinary labelled set is empty")
        g_ord = (1.0 - spec.lam) * loss_grad(spec.loss, z, np.asarray(ordinary_labels)) / z.size
    return g_first, g_second, g_ord


def score_pairs(scorer, pairs) -> PairScores:
    arr = as_pair_arrays(pairs)
    return PairScores(scorer.predict(arr.first), scorer.predict(arr.second), arr.sd)


def risk_gradient(
    spec: RiskSpec,
    pairs,
    scorer,
    prior: ClassPrior,
    ordinary: Optional[tuple] = None,
) -> np.ndarray:
    """Gradient of the selected empirical risk with respect to ``scorer.params``.

    ``ordinary`` is an ``(X, y)`` tuple, used only by the combined estimator.
    """
    arr = as_pair_arrays(pairs)
    s_first, cache_first = scorer.forward_batch(arr.first)
    s_second, cache_second = scorer.forward_batch(arr.second)
    scores = PairScores(s_first, s_second, arr.sd)
    ord_scores = ord_labels = cache_ord = None
    if ordinary is not None:
        ord_scores, cache_ord = scorer.forward_batch(np.atleast_2d(ordinary[0]))
        ord_labels = np.asarray(ordinary[1])
    g_first, g_second, g_ord = risk_score_gradient(spec, scores, prior, ord_scores, ord_labels)
    grad = scorer.backward_batch(cache_first, g_first) + scorer.backward_batch(cache_second, g_second)
    if g_ord is not None:
        grad = grad + scorer.backward_batch(cache_ord, g_ord)
    return grad


def risk_of(spec: RiskSpec, pairs, scorer, prior: ClassPrior, ordinary=None) -> float:
    scores = score_pairs(scorer, pairs)
    if ordinary is not None:
        return risk_value(spec, scores, prior, scorer.predict(np.atleast_2d(ordinary[0])), ordinary[1])
    return risk_value(spec, scores, prior)
