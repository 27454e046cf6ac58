import numpy as np
import pytest

from sdpcomp.core import (
    EmptyDataset,
    MissingPairKind,
    NoiseRates,
    NonFiniteRisk,
    PairArrays,
    RiskSpec,
    SingleClassTest,
)
from sdpcomp.datagen import LabeledSamples, PriorSide
from sdpcomp.model import Scorer
from sdpcomp.train_eval import (
    REPORT_COLUMNS,
    EstimatedPrior,
    KnownPrior,
    TrainConfig,
    TrialReport,
    TrialSpec,
    _batch_partition,
    accuracy,
    auc,
    auc_from_scores,
    run_trial,
    train,
)


def _pairs(n=200, seed=0):
    rng = np.random.default_rng(seed)
    sd = rng.choice([-1, 1], size=n)
    return PairArrays(rng.normal(1.0, 1.0, size=(n, 1)), rng.normal(-0.5, 1.0, size=(n, 1)), sd)


def test_config_defaults():
    cfg = TrainConfig(RiskSpec(), KnownPrior(0.7))
    assert (cfg.epochs, cfg.batch_size, cfg.learning_rate, cfg.weight_decay) == (100, 256, 1e-3, 1e-5)
    with pytest.raises(ValueError):
        TrainConfig(RiskSpec(), KnownPrior(0.7), epochs=0)


def test_zero_learning_rate_keeps_parameters():
    init = Scorer(1, (), [0.3, -0.1])
    cfg = TrainConfig(RiskSpec(), KnownPrior(0.7), epochs=1, learning_rate=0.0, weight_decay=0.0)
    res = train(_pairs(), cfg, init)
    assert np.array_equal(res.scorer.params, init.params)
    assert len(res.risk_trace) == 1


def test_trace_length_and_determinism():
    cfg = TrainConfig(RiskSpec("sdpc", "relu"), KnownPrior(0.7), epochs=5, batch_size=32, seed=3)
    a = train(_pairs(), cfg, Scorer.linear(1))
    b = train(_pairs(), cfg, Scorer.linear(1))
    assert [e for e, _ in a.risk_trace] == [1, 2, 3, 4, 5]
    assert a.risk_trace == b.risk_trace
    assert np.array_equal(a.scorer.params, b.scorer.params)


def test_batches_have_both_kinds():
    sd = np.array([1] * 95 + [-1] * 5)
    rng = np.random.default_rng(0)
    batches = _batch_partition(sd, 20, rng, need_both=True)
    assert sorted(np.concatenate(batches).tolist()) == list(range(100))
    assert all(np.any(sd[b] == 1) and np.any(sd[b] == -1) for b in batches)
    with pytest.raises(MissingPairKind):
        _batch_partition(np.array([1] * 95 + [-1] * 4), 20, rng, need_both=True)


def test_last_batch_kept():
    batches = _batch_partition(np.ones(70), 32, np.random.default_rng(0), need_both=False)
    assert [len(b) for b in batches] == [32, 32, 6]


def test_single_kind_rejected_for_sd():
    p = _pairs()
    only_sim = PairArrays(p.first, p.second, np.ones(len(p), dtype=int))
    with pytest.raises(MissingPairKind):
        train(only_sim, TrainConfig(RiskSpec("sd"), KnownPrior(0.7), epochs=1), Scorer.linear(1))
    # Pcomp ignores SD signs
    train(only_sim, TrainConfig(RiskSpec("pc"), KnownPrior(0.7), epochs=1), Scorer.linear(1))


def test_non_finite_risk_reports_epoch():
    cfg = TrainConfig(RiskSpec("sdpc"), KnownPrior(0.7), epochs=3, learning_rate=1e308, optimizer="sgd")
    with pytest.raises(NonFiniteRisk) as exc:
        train(_pairs(), cfg, Scorer.linear(1))
    assert exc.value.epoch == 1


def test_sgd_full_batch_trace_non_increasing(mixture):
    from sdpcomp.datagen import generate_sdpc_pairs

    pairs, _ = generate_sdpc_pairs(mixture, 1000, seed=0)
    cfg = TrainConfig(
        RiskSpec("sdpc"), KnownPrior(0.7), epochs=10, batch_size=1000, learning_rate=1e-4,
        weight_decay=0.0, optimizer="sgd",
    )
    r = [v for _, v in train(pairs, cfg, Scorer.linear(1)).risk_trace]
    assert all(b <= a + 1e-15 for a, b in zip(r, r[1:]))


def test_accuracy_rules():
    test = LabeledSamples(np.array([[1.0], [2.0], [-1.0], [-3.0]]), np.array([1, 1, -1, 1]))
    ident = Scorer(1, (), [1.0, 0.0])
    assert accuracy(ident, test) == 0.75
    assert accuracy(Scorer.linear(1), test) == 0.0
    perfect = LabeledSamples(test.X[:3], test.y[:3])
    assert accuracy(ident, perfect) == 1.0
    with pytest.raises(EmptyDataset):
        accuracy(ident, LabeledSamples(np.zeros((0, 1)), np.zeros(0)))


def test_auc_rules():
    assert auc_from_scores([0.9, 0.8, 0.2], [1, 1, -1]) == 1.0
    assert auc_from_scores([0.2, 0.8], [1, -1]) == 0.0
    assert auc_from_scores([0.5, 0.5, 0.5], [1, -1, 1]) == 0.5
    with pytest.raises(SingleClassTest):
        auc_from_scores([0.1, 0.2], [1, 1])


def test_auc_brute_force(rng):
    s = np.round(rng.normal(size=60), 1)
    y = rng.choice([-1, 1], size=60)
    pos, neg = s[y == 1], s[y == -1]
    brute = np.mean([(a > b) + 0.5 * (a == b) for a in pos for b in neg])
    assert auc_from_scores(s, y) == pytest.approx(brute, abs=1e-12)


def test_metric_invariance(rng):
    X = rng.normal(size=(100, 1))
    test = LabeledSamples(X, np.where(X[:, 0] + rng.normal(size=100) > 0, 1, -1))
    s = Scorer(1, (), [0.8, 0.1])
    s2 = s.with_params(3.0 * s.params)
    assert accuracy(s, test) == accuracy(s2, test)
    z = s.predict(X)
    assert auc_from_scores(z, test.y) == auc_from_scores(np.exp(z), test.y)


def test_run_trial_deterministic(mixture):
    cfg = TrainConfig(RiskSpec("sdpc"), KnownPrior(0.7), epochs=12, seed=1)
    t = TrialSpec(cfg, mixture=mixture, n_pairs=400, n_test=300, rates=NoiseRates(0.1, 0.0, 0.2))
    a, b = run_trial(t), run_trial(t)
    assert a.to_kv(include_wall=False) == b.to_kv(include_wall=False)
    assert a.csv_values() == b.csv_values()
    assert len(a.risk_trace) == 12


def test_run_trial_estimated_prior(mixture):
    cfg = TrainConfig(RiskSpec("sdpc"), EstimatedPrior(PriorSide.GE_HALF), epochs=1)
    rep = run_trial(TrialSpec(cfg, mixture=mixture, n_pairs=10_000, n_test=100))
    assert 0.68 <= rep.pi_hat <= 0.72
    assert rep.pi_plus is None


def test_combined_trial(mixture):
    cfg = TrainConfig(RiskSpec("combined", lam=0.5), KnownPrior(0.7), epochs=3)
    rep = run_trial(TrialSpec(cfg, mixture=mixture, n_pairs=300, n_test=100, n_ordinary=100))
    assert np.isfinite(rep.final_risk)


def test_report_format():
    rep = TrialReport(
        seed=0, estimator="convex", correction="id", gamma=0.5, lam=None, pi_plus=0.7, pi_hat=None,
        rho_s=0.0, rho_d=0.0, rho_c=0.0, n_pairs=10, final_accuracy=0.5, accuracy_last10=0.25,
        final_auc=None, final_risk=1.0, risk_trace=[(1, 2.0), (2, 1.0)],
    )
    assert REPORT_COLUMNS[0] == "seed" and REPORT_COLUMNS[-1] == "auc"
    assert rep.csv_values() == ["0", "convex", "id", "0.5", "", "0.7", "", "0.0", "0.0", "0.0", "10", "0.5", "0.25", ""]
    kv = TrialReport.parse_kv(rep.to_kv())
    assert kv["risk_trace"] == "1:2.0;2:1.0" and kv["lambda"] == ""
