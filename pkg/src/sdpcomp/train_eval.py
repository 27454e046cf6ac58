"""Minibatch training on pair data, evaluation metrics and single trials."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np
from scipy.stats import rankdata

from .core import (
    ClassPrior,
    EmptyDataset,
    MissingPairKind,
    NoiseRates,
    NonFiniteRisk,
    NonFiniteScore,
    PairArrays,
    RiskSpec,
    SingleClassTest,
    as_pair_arrays,
    rng_for,
    validate_pair_dataset,
)
from .datagen import (
    GaussianMixtureSpec,
    LabeledSamples,
    PriorSide,
    estimate_prior_detail,
    generate_sdpc_pairs,
    sample_labeled,
)
from .estimators import risk_gradient, risk_of
from .model import OptimizerState, Scorer, optimizer_step, parse_arch


@dataclass(frozen=True)
class KnownPrior:
    pi_plus: float


@dataclass(frozen=True)
class EstimatedPrior:
    side: PriorSide = PriorSide.GE_HALF


PriorSource = Union[KnownPrior, EstimatedPrior]


@dataclass(frozen=True)
class TrainConfig:
    risk: RiskSpec
    prior_source: PriorSource
    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be a positive integer")
        if self.batch_size < 1:
            raise ValueError("batch_size must be a positive integer")
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ValueError("learning rate and weight decay must be non-negative")


@dataclass
class TrainResult:
    scorer: Scorer
    risk_trace: list  # (epoch, full-data risk) after each epoch
    prior: ClassPrior
    pi_hat: Optional[float] = None
    accuracy_trace: list = field(default_factory=list)


def resolve_prior(source: PriorSource, n_s: int, n_d: int) -> tuple[ClassPrior, Optional[float]]:
    if isinstance(source, KnownPrior):
        return ClassPrior(source.pi_plus), None
    est = estimate_prior_detail(n_s, n_d, source.side)
    return ClassPrior(est.pi_plus), est.pi_plus


def _batch_partition(sd: np.ndarray, batch_size: int, rng, need_both: bool) -> list:
    """Shuffled minibatch index arrays; the last short batch is kept.

    With ``need_both`` every batch gets at least one similar and one
    dissimilar pair: reshuffle a few times, then fall back to stratified
    batches.
    """
    n = sd.size
    n_batches = math.ceil(n / batch_size)
    if not need_both:
        order = rng.permutation(n)
        return [order[i : i + batch_size] for i in range(0, n, batch_size)]
    sim = np.flatnonzero(sd == 1)
    dis = np.flatnonzero(sd == -1)
    if sim.size < n_batches or dis.size < n_batches:
        raise MissingPairKind(
            f"cannot give each of {n_batches} minibatches both pair kinds "
            f"(n_S={sim.size}, n_D={dis.size})"
        )
    for _ in range(20):
        order = rng.permutation(n)
        batches = [order[i : i + batch_size] for i in range(0, n, batch_size)]
        if all(np.any(sd[b] == 1) and np.any(sd[b] == -1) for b in batches):
            return batches
    s_parts = np.array_split(rng.permutation(sim), n_batches)
    d_parts = np.array_split(rng.permutation(dis), n_batches)
    return [rng.permutation(np.concatenate([a, b])) for a, b in zip(s_parts, d_parts)]


def train(
    pairs,
    config: TrainConfig,
    scorer_init: Scorer,
    test: Optional[LabeledSamples] = None,
    ordinary: Optional[LabeledSamples] = None,
) -> TrainResult:
    """Minimise the configured empirical risk with minibatch first-order updates.

    When ``test`` is given, test accuracy is recorded after every epoch.
    """
    arr = as_pair_arrays(pairs)
    n_s, n_d, d = validate_pair_dataset(arr)
    if d != scorer_init.d_in:
        raise ValueError(f"scorer expects d={scorer_init.d_in}, pairs have d={d}")
    spec = config.risk
    prior, pi_hat = resolve_prior(config.prior_source, n_s, n_d)
    if spec.needs_both_kinds and (n_s == 0 or n_d == 0):
        raise MissingPairKind(f"{spec.estimator.value} needs both pair kinds (n_S={n_s}, n_D={n_d})")
    ord_full = None
    if ordinary is not None:
        ord_full = (ordinary.X, ordinary.y)

    scorer = scorer_init.copy()
    state = OptimizerState(
        config.optimizer, learning_rate=config.learning_rate, weight_decay=config.weight_decay
    )
    rng = rng_for(config.seed, 5)
    trace, acc_trace = [], []
    for epoch in range(1, config.epochs + 1):
        batches = _batch_partition(arr.sd, config.batch_size, rng, spec.needs_both_kinds)
        ord_batches = None
        if ordinary is not None:
            ord_batches = np.array_split(rng.permutation(len(ordinary)), len(batches))
        for k, idx in enumerate(batches):
            ord_b = None
            if ord_batches is not None and ord_batches[k].size:
                ob = ord_batches[k]
                ord_b = (ordinary.X[ob], ordinary.y[ob])
            try:
                with np.errstate(over="ignore", invalid="ignore"):
                    g = risk_gradient(spec, arr.subset(idx), scorer, prior, ord_b)
                    scorer.params = optimizer_step(state, scorer.params, g)
            except NonFiniteScore:
                raise NonFiniteRisk(epoch, math.nan) from None
            if not np.all(np.isfinite(scorer.params)):
                raise NonFiniteRisk(epoch, math.nan)
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                r = risk_of(spec, arr, scorer, prior, ord_full)
        except NonFiniteScore:
            r = math.nan
        if not math.isfinite(r):
            raise NonFiniteRisk(epoch, r)
        trace.append((epoch, r))
        if test is not None:
            acc_trace.append(accuracy(scorer, test))
    return TrainResult(scorer, trace, prior, pi_hat, acc_trace)


def _as_xy(scorer_or_scores, test):
    if isinstance(test, LabeledSamples):
        X, y = test.X, test.y
    else:
        X, y = test
    y = np.asarray(y).reshape(-1)
    if y.size == 0:
        raise EmptyDataset("test set is empty")
    if isinstance(scorer_or_scores, Scorer):
        scores = scorer_or_scores.predict(X)
    else:
        scores = np.asarray(scorer_or_scores(X), dtype=np.float64)
    return scores, y


def accuracy(scorer, test) -> float:
    """Fraction with sign(g(x)) == y; a score of exactly 0 counts as wrong."""
    scores, y = _as_xy(scorer, test)
    return accuracy_from_scores(scores, y)


def accuracy_from_scores(scores, y) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y)
    if y.size == 0:
        raise EmptyDataset("test set is empty")
    return float(np.mean(scores * y > 0.0))


def auc(scorer, test) -> float:
    scores, y = _as_xy(scorer, test)
    return auc_from_scores(scores, y)


def auc_from_scores(scores, y) -> float:
    """Mann-Whitney AUC: P(s+ > s-) + P(s+ == s-)/2, exact with ties."""
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y)
    pos = y == 1
    n_pos = int(np.count_nonzero(pos))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassTest("AUC needs both classes in the test set")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


# ---------------------------------------------------------------------------
# trial reports

REPORT_COLUMNS = (
    "seed",
    "estimator",
    "correction",
    "gamma",
    "lambda",
    "pi_plus",
    "pi_hat",
    "rho_s",
    "rho_d",
    "rho_c",
    "n_pairs",
    "accuracy",
    "accuracy_last10",
    "auc",
)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class TrialReport:
    seed: int
    estimator: str
    correction: str
    gamma: Optional[float]
    lam: Optional[float]
    pi_plus: Optional[float]
    pi_hat: Optional[float]
    rho_s: Optional[float]
    rho_d: Optional[float]
    rho_c: Optional[float]
    n_pairs: int
    final_accuracy: Optional[float]
    accuracy_last10: Optional[float]
    final_auc: Optional[float]
    final_risk: float
    risk_trace: list
    wall_seconds: float = 0.0

    def row(self) -> dict:
        return {
            "seed": self.seed,
            "estimator": self.estimator,
            "correction": self.correction,
            "gamma": self.gamma,
            "lambda": self.lam,
            "pi_plus": self.pi_plus,
            "pi_hat": self.pi_hat,
            "rho_s": self.rho_s,
            "rho_d": self.rho_d,
            "rho_c": self.rho_c,
            "n_pairs": self.n_pairs,
            "accuracy": self.final_accuracy,
            "accuracy_last10": self.accuracy_last10,
            "auc": self.final_auc,
        }

    def csv_values(self) -> list:
        row = self.row()
        return [_fmt(row[c]) for c in REPORT_COLUMNS]

    def to_kv(self, include_wall: bool = True) -> str:
        lines = [f"{k}={_fmt(v)}" for k, v in self.row().items()]
        lines.append(f"final_risk={_fmt(self.final_risk)}")
        lines.append("risk_trace=" + ";".join(f"{e}:{r!r}" for e, r in self.risk_trace))
        if include_wall:
            lines.append(f"wall_seconds={self.wall_seconds:.3f}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def parse_kv(text: str) -> dict:
        out = {}
        for line in text.splitlines():
            if "=" in line:
                k, _, v = line.partition("=")
                out[k] = v
        return out


@dataclass(frozen=True)
class TrialSpec:
    """Everything needed to reproduce one trial from a seed."""

    config: TrainConfig
    mixture: Optional[GaussianMixtureSpec] = None
    pairs: Optional[PairArrays] = None
    test: Optional[LabeledSamples] = None
    rates: NoiseRates = NoiseRates()
    n_pairs: int = 2000
    n_test: int = 2000
    arch: str = "linear"
    ordinary: Optional[LabeledSamples] = None
    n_ordinary: int = 0


def run_trial(trial: TrialSpec) -> TrialReport:
    """generate (or take given data) -> corrupt -> order -> train -> evaluate."""
    t0 = time.perf_counter()
    cfg = trial.config
    seed = cfg.seed
    if trial.pairs is not None:
        pairs = trial.pairs
        if trial.rates is not None and not trial.rates.is_clean:
            from .datagen import corrupt

            pairs = corrupt(pairs, trial.rates, seed)
        test = trial.test
        ordinary = trial.ordinary
    elif trial.mixture is not None:
        pairs, _ = generate_sdpc_pairs(trial.mixture, trial.n_pairs, seed, trial.rates)
        test = sample_labeled(trial.mixture, trial.n_test, seed, stream=11)
        ordinary = trial.ordinary
        if ordinary is None and trial.n_ordinary > 0:
            ordinary = sample_labeled(trial.mixture, trial.n_ordinary, seed, stream=12)
    else:
        raise ValueError("trial needs either a mixture spec or explicit pairs")

    d = as_pair_arrays(pairs).dim
    scorer0 = parse_arch(trial.arch, d, seed=seed)
    result = train(pairs, cfg, scorer0, test=test, ordinary=ordinary)

    acc = acc10 = auc_v = None
    if test is not None:
        acc = accuracy(result.scorer, test)
        acc10 = float(np.mean(result.accuracy_trace[-10:]))
        try:
            auc_v = auc(result.scorer, test)
        except SingleClassTest:
            auc_v = None
    spec = cfg.risk
    known = cfg.prior_source.pi_plus if isinstance(cfg.prior_source, KnownPrior) else None
    return TrialReport(
        seed=seed,
        estimator=spec.estimator.value,
        correction=spec.correction.value,
        gamma=spec.gamma,
        lam=spec.lam,
        pi_plus=known,
        pi_hat=result.pi_hat,
        rho_s=trial.rates.rho_s,
        rho_d=trial.rates.rho_d,
        rho_c=trial.rates.rho_c,
        n_pairs=len(as_pair_arrays(pairs)),
        final_accuracy=acc,
        accuracy_last10=acc10,
        final_auc=auc_v,
        final_risk=result.risk_trace[-1][1],
        risk_trace=result.risk_trace,
        wall_seconds=time.perf_counter() - t0,
    )
