"""Ground truth for tests: true risk, Bayes accuracy, slow estimator recomputation
and pair generators with exactly known expected estimates.

Nothing here imports :mod:`sdpcomp.estimators`; every formula is rewritten
from scratch so the two code paths can be checked against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.stats import norm

from .core import (
    ClassPrior,
    Correction,
    EmptyDataset,
    Estimator,
    LossKind,
    MissingPairKind,
    PairArrays,
    SDPcompError,
    as_pair_arrays,
    rng_for,
)
from .datagen import GaussianMixtureSpec
from .model import Scorer


class QuadratureUnsupportedDim(SDPcompError):
    """Quadrature is only implemented for one-dimensional features."""


@dataclass(frozen=True)
class Quadrature1D:
    tol: float = 1e-9
    width: float = 10.0  # integrate over mean +/- width * sigma


@dataclass(frozen=True)
class MonteCarlo:
    n: int
    seed: int = 0


@dataclass(frozen=True)
class TrueRisk:
    value: float
    error: float  # absolute tolerance (quadrature) or standard error (MC)


# ---------------------------------------------------------------------------
# scalar losses, written independently of sdpcomp.losses


def _ell(kind: LossKind, z: float, y: int) -> float:
    if kind is LossKind.ZERO_ONE:
        return 1.0 if y * z <= 0.0 else 0.0
    m = -y * z
    if m > 0:
        return m + math.log1p(math.exp(-m))
    return math.log1p(math.exp(m))


def _ell_vec(kind: LossKind, z, y):
    z = np.asarray(z, dtype=np.float64)
    if kind is LossKind.ZERO_ONE:
        return (y * z <= 0.0).astype(np.float64)
    return np.logaddexp(0.0, -y * z)


# ---------------------------------------------------------------------------
# true risk


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-9, max_depth: int = 60) -> float:
    """Adaptive Simpson quadrature with Richardson correction, iterative."""

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    total = 0.0
    stack = [(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 0)]
    while stack:
        a, b, fa, fm, fb, whole, eps, depth = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if depth >= max_depth or abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
        else:
            stack.append((a, m, fa, flm, fm, left, eps / 2.0, depth + 1))
            stack.append((m, b, fm, frm, fb, right, eps / 2.0, depth + 1))
    return total


def class_expectations(
    scorer: Scorer, spec: GaussianMixtureSpec, kind=LossKind.LOGISTIC, tol: float = 1e-9
) -> np.ndarray:
    """(E_+ l(g,+1), E_+ l(g,-1), E_- l(g,+1), E_- l(g,-1)) by 1-D quadrature."""
    if spec.dim != 1:
        raise QuadratureUnsupportedDim(f"quadrature needs d=1, got d={spec.dim}")
    kind = LossKind(kind)
    out = []
    for mu in (spec.mean_plus[0], spec.mean_minus[0]):
        lo, hi = mu - 10.0 * spec.sigma, mu + 10.0 * spec.sigma
        for y in (1, -1):
            f = lambda x, mu=mu, y=y: _ell(kind, scorer.forward([x]), y) * norm.pdf(x, mu, spec.sigma)
            out.append(adaptive_simpson(f, lo, hi, tol / 4.0))
    return np.array(out)


def true_risk(
    scorer: Scorer,
    spec: GaussianMixtureSpec,
    kind=LossKind.LOGISTIC,
    method: Union[Quadrature1D, MonteCarlo] = Quadrature1D(),
) -> TrueRisk:
    """R(g) = pi_+ E_+[l(g(x), +1)] + pi_- E_-[l(g(x), -1)]."""
    kind = LossKind(kind)
    pp, pm = spec.prior.pi_plus, spec.prior.pi_minus
    if isinstance(method, Quadrature1D):
        e = class_expectations(scorer, spec, kind, method.tol)
        return TrueRisk(pp * e[0] + pm * e[3], method.tol)
    if method.n < 1:
        raise ValueError("Monte Carlo needs n >= 1")
    rng = rng_for(method.seed, 0x4D43)
    y = np.where(rng.random(method.n) < pp, 1, -1)
    X = spec.draw(y, rng)
    losses = _ell_vec(kind, scorer.predict(X), y)
    se = float(losses.std(ddof=1) / math.sqrt(method.n)) if method.n > 1 else math.inf
    return TrueRisk(float(losses.mean()), se)


def bayes_accuracy(spec: GaussianMixtureSpec) -> float:
    """Accuracy of the Bayes rule for two isotropic Gaussians with a shared sigma.

    Along the mean-difference axis the classes sit at +/- delta/2 and the
    decision threshold moves by sigma^2 ln(pi_-/pi_+) / delta.
    """
    pp, pm = spec.prior.pi_plus, spec.prior.pi_minus
    delta = float(np.linalg.norm(spec.mean_plus - spec.mean_minus))
    if delta == 0.0:
        return max(pp, pm)
    s = spec.sigma
    t = s * s * math.log(pm / pp) / delta
    return pp * norm.cdf((delta / 2.0 - t) / s) + pm * norm.cdf((delta / 2.0 + t) / s)


# ---------------------------------------------------------------------------
# slow reference estimators


def _triples(pairs, scorer):
    if scorer is not None:
        arr = as_pair_arrays(pairs)
        return [
            (scorer.forward(a), scorer.forward(b), int(s))
            for a, b, s in zip(arr.first, arr.second, arr.sd)
        ]
    if hasattr(pairs, "s_first"):
        return [(float(a), float(b), int(s)) for a, b, s in zip(pairs.s_first, pairs.s_second, pairs.sd)]
    return [(float(a), float(b), int(s)) for a, b, s in pairs]


def _f(correction: Correction, v: float) -> float:
    if correction is Correction.RELU:
        return max(0.0, v)
    if correction is Correction.ABS:
        return abs(v)
    return v


def naive_estimator_recompute(
    pairs,
    prior: ClassPrior,
    kind=LossKind.LOGISTIC,
    which=Estimator.SDPC,
    gamma: Optional[float] = None,
    lam: Optional[float] = None,
    ordinary=None,
    correction=Correction.IDENTITY,
    scorer: Optional[Scorer] = None,
) -> float:
    """Loop-based re-evaluation of an estimator.

    ``pairs`` is either a sequence of ``(score_first, score_second, sd)``
    triples, a ``PairScores``-like object, or raw pairs together with
    ``scorer``. ``ordinary`` is a sequence of ``(score, y)``.
    """
    kind, which, correction = LossKind(kind), Estimator(which), Correction(correction)
    rows = _triples(pairs, scorer)
    if not rows:
        raise EmptyDataset("no pairs")
    p, q = prior.pi_plus, prior.pi_minus
    L = lambda z, y: _ell(kind, z, y)

    def sd_value():
        sim = [r for r in rows if r[2] == 1]
        dis = [r for r in rows if r[2] == -1]
        if not sim or not dis:
            raise MissingPairKind("need both pair kinds")
        k = p - q

        def corr(z, t):
            return (p * L(z, t) - q * L(z, -t)) / k

        rs = sum((corr(a, 1) + corr(b, 1)) / 2 for a, b, _ in sim) * (p * p + q * q) / len(sim)
        rd = sum((corr(a, -1) + corr(b, -1)) / 2 for a, b, _ in dis) * (2 * p * q) / len(dis)
        return rs + rd

    def pc_value():
        acc = 0.0
        for a, b, _ in rows:
            acc += L(a, 1) - p * L(a, -1) + L(b, -1) - q * L(b, 1)
        return acc / len(rows)

    def sdpc_value():
        sim = [r for r in rows if r[2] == 1]
        dis = [r for r in rows if r[2] == -1]
        if not sim or not dis:
            raise MissingPairKind("need both pair kinds")
        k = p - q
        terms = [0.0] * 8
        for a, b, _ in sim:
            terms[0] += p**3 * L(a, 1)
            terms[1] += -(p**2) * q * L(a, -1)
            terms[2] += p * q**2 * L(b, 1)
            terms[3] += -(q**3) * L(b, -1)
        for a, b, _ in dis:
            terms[4] += q * (p**2 - q) * L(a, 1)
            terms[5] += p * (q - p**2) * L(a, -1)
            terms[6] += q * (q**2 - p) * L(b, 1)
            terms[7] += p * (p - q**2) * L(b, -1)
        for i in range(4):
            terms[i] /= k * len(sim)
            terms[4 + i] /= k * len(dis)
        return sum(_f(correction, t) for t in terms)

    if which is Estimator.SD:
        return sd_value()
    if which is Estimator.PC:
        return pc_value()
    if which is Estimator.SDPC:
        return sdpc_value()
    if which is Estimator.CONVEX:
        g = 0.5 if gamma is None else gamma
        out = 0.0
        if g > 0:
            out += g * sd_value()
        if g < 1:
            out += (1 - g) * pc_value()
        return out
    lm = 0.5 if lam is None else lam
    out = lm * sdpc_value() if lm > 0 else 0.0
    if lm < 1:
        ordinary = list(ordinary or [])
        if not ordinary:
            raise EmptyDataset("no ordinary data")
        out += (1 - lm) * sum(L(float(z), int(y)) for z, y in ordinary) / len(ordinary)
    return out


# ---------------------------------------------------------------------------
# pair generators with known slot marginals


@dataclass(frozen=True)
class PairModel:
    """A pair generator specified by the positive-class probability of each slot.

    With ``truthful=True`` the SD sign is honest: a similar pair is (+,+) with
    probability ``sim_first`` and (-,-) otherwise, and a dissimilar pair puts
    the positive instance first with probability ``dis_first``.  With
    ``truthful=False`` each slot's label is drawn on its own, using
    ``sim_first``/``sim_second`` for pairs labelled similar and
    ``dis_first``/``dis_second`` for pairs labelled dissimilar.
    """

    mixture: GaussianMixtureSpec
    sim_first: float
    sim_second: float
    dis_first: float
    dis_second: float
    truthful: bool
    name: str = ""

    def draw(self, n_s: int, n_d: int, rng: np.random.Generator) -> PairArrays:
        if self.truthful:
            ys = np.where(rng.random(n_s) < self.sim_first, 1, -1)
            yd = np.where(rng.random(n_d) < self.dis_first, 1, -1)
            y1 = np.concatenate([ys, yd])
            y2 = np.concatenate([ys, -yd])
        else:
            y1 = np.concatenate(
                [np.where(rng.random(n_s) < self.sim_first, 1, -1), np.where(rng.random(n_d) < self.dis_first, 1, -1)]
            )
            y2 = np.concatenate(
                [np.where(rng.random(n_s) < self.sim_second, 1, -1), np.where(rng.random(n_d) < self.dis_second, 1, -1)]
            )
        sd = np.concatenate([np.ones(n_s, dtype=np.int64), -np.ones(n_d, dtype=np.int64)])
        return PairArrays(self.mixture.draw(y1, rng), self.mixture.draw(y2, rng), sd)


def exchangeable_model(mixture: GaussianMixtureSpec) -> PairModel:
    """Honest SD labels and a coin-flip order: the comparison carries no information."""
    p = mixture.prior
    a = p.pi_plus**2 / p.pi_s
    return PairModel(mixture, a, a, 0.5, 0.5, True, "exchangeable")


def comparison_model(mixture: GaussianMixtureSpec) -> PairModel:
    """Every first instance from p~_+ and every second from p~_-, in both groups.

    p~_+ = (pi_+ p_+ + pi_-^2 p_-)/(1 - pi_+ pi_-) and
    p~_- = (pi_+^2 p_+ + pi_- p_-)/(1 - pi_+ pi_-) are the marginals of a pair
    of i.i.d. instances conditioned on not being ordered (-, +).
    """
    p, q = mixture.prior.pi_plus, mixture.prior.pi_minus
    z = 1.0 - p * q
    return PairModel(mixture, p / z, p * p / z, p / z, p * p / z, False, "comparison")


# Expected-value weights. An estimator's expectation under a PairModel is a
# linear function of the four class-conditional expectations
# (E_+ l(g,+1), E_+ l(g,-1), E_- l(g,+1), E_- l(g,-1)).


def _slot(p_pos: float, w_plus: float, w_minus: float) -> np.ndarray:
    return np.array([p_pos * w_plus, p_pos * w_minus, (1 - p_pos) * w_plus, (1 - p_pos) * w_minus])


def _slot_probs(model: PairModel):
    if model.truthful:
        return model.sim_first, model.sim_first, model.dis_first, 1.0 - model.dis_first
    return model.sim_first, model.sim_second, model.dis_first, model.dis_second


def expected_weights(
    which, prior: ClassPrior, model: PairModel, frac_similar: float = 0.5, gamma: float = 0.5
) -> np.ndarray:
    """Weights w with E[estimate] = w . class_expectations, for fixed group sizes."""
    which = Estimator(which)
    p, q = prior.pi_plus, prior.pi_minus
    s1, s2, d1, d2 = _slot_probs(model)
    if which is Estimator.SD:
        a, b = p / (p - q), -q / (p - q)
        return prior.pi_s * 0.5 * (_slot(s1, a, b) + _slot(s2, a, b)) + prior.pi_d * 0.5 * (
            _slot(d1, b, a) + _slot(d2, b, a)
        )
    if which is Estimator.PC:
        return frac_similar * (_slot(s1, 1, -p) + _slot(s2, -q, 1)) + (1 - frac_similar) * (
            _slot(d1, 1, -p) + _slot(d2, -q, 1)
        )
    if which is Estimator.CONVEX:
        return gamma * expected_weights(Estimator.SD, prior, model, frac_similar) + (1 - gamma) * expected_weights(
            Estimator.PC, prior, model, frac_similar
        )
    if which is Estimator.SDPC:
        k = p - q
        return (
            _slot(s1, p**3 / k, -(p**2) * q / k)
            + _slot(s2, p * q * q / k, -(q**3) / k)
            + _slot(d1, q * (p * p - q) / k, p * (q - p * p) / k)
            + _slot(d2, q * (q * q - p) / k, p * (p - q * q) / k)
        )
    raise ValueError(f"no expectation weights for {which.value}")


def risk_weights(prior: ClassPrior) -> np.ndarray:
    return np.array([prior.pi_plus, 0.0, 0.0, prior.pi_minus])


def convex_model(mixture: GaussianMixtureSpec, gamma: float = 0.5, frac_similar: float = 0.5) -> PairModel:
    """Honest-SD generator under which the convex estimator has zero bias.

    The two free numbers (P(+,+) among similar pairs, P(positive first) among
    dissimilar pairs) are solved from the linear unbiasedness conditions.
    """
    prior = mixture.prior

    def residual(x):
        m = PairModel(mixture, x[0], x[0], x[1], 1 - x[1], True)
        return expected_weights(Estimator.CONVEX, prior, m, frac_similar, gamma) - risk_weights(prior)

    r0 = residual(np.zeros(2))
    J = np.column_stack([residual(np.eye(2)[i]) - r0 for i in range(2)])
    x, *_ = np.linalg.lstsq(J, -r0, rcond=None)
    if np.max(np.abs(J @ x + r0)) > 1e-10 or np.any(x < 0) or np.any(x > 1):
        raise ValueError(f"no honest-SD generator makes convex(gamma={gamma}) unbiased here")
    a, f = float(x[0]), float(x[1])
    return PairModel(mixture, a, a, f, 1.0 - f, True, f"convex-{gamma}")


def expected_estimate(
    which, scorer: Scorer, model: PairModel, frac_similar: float = 0.5, gamma: float = 0.5, kind=LossKind.LOGISTIC
) -> float:
    e = class_expectations(scorer, model.mixture, kind)
    return float(expected_weights(which, model.mixture.prior, model, frac_similar, gamma) @ e)


@dataclass(frozen=True)
class UnbiasednessResult:
    estimator: str
    model: str
    mean: float
    std_error: float
    truth: float

    @property
    def z(self) -> float:
        return (self.mean - self.truth) / self.std_error

    def within(self, k: float = 4.0) -> bool:
        return abs(self.mean - self.truth) <= k * self.std_error


def estimates_over_datasets(
    estimate_fn, scorer: Scorer, model: PairModel, n_s: int, n_d: int, reps: int, seed: int
) -> np.ndarray:
    """Apply ``estimate_fn(first_scores, second_scores, sd)`` to ``reps`` fresh datasets."""
    rng = rng_for(seed, 0x5542)
    out = np.empty(reps)
    for r in range(reps):
        arr = model.draw(n_s, n_d, rng)
        out[r] = estimate_fn(scorer.predict(arr.first), scorer.predict(arr.second), arr.sd)
    return out


def unbiasedness_check(
    estimate_fn, name: str, scorer: Scorer, model: PairModel, n_s=500, n_d=500, reps=1000, seed=0
) -> UnbiasednessResult:
    vals = estimates_over_datasets(estimate_fn, scorer, model, n_s, n_d, reps, seed)
    truth = true_risk(scorer, model.mixture).value
    return UnbiasednessResult(name, model.name, float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(reps)), truth)
