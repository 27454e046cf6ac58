import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdpcomp.core import DimensionMismatch, LengthMismatch
from sdpcomp.model import OptimizerState, Scorer, optimizer_step, parse_arch


def test_linear_forward():
    s = Scorer(2, (), [1.0, -2.0, 0.5])
    assert s.forward([2.0, 1.0]) == pytest.approx(0.5)


def test_zero_mlp_is_zero():
    s = Scorer(3, (4, 2))
    assert s.forward([1.0, -5.0, 2.0]) == 0.0


def test_one_hidden_unit():
    # W1 = 1, b1 = -1, W2 = 2, b2 = 0
    s = Scorer(1, (1,), [1.0, -1.0, 2.0, 0.0])
    assert s.forward([3.0]) == pytest.approx(4.0)


def test_dimension_checked():
    with pytest.raises(DimensionMismatch):
        Scorer.linear(2).forward([1.0])
    with pytest.raises(DimensionMismatch):
        Scorer.linear(2).predict(np.zeros((3, 3)))


def test_linear_backward():
    s = Scorer(2, (), [0.3, 0.1, -0.2])
    np.testing.assert_allclose(s.backward([2.0, 1.0], 1.0), [2.0, 1.0, 1.0])
    np.testing.assert_array_equal(s.backward([2.0, 1.0], 0.0), np.zeros(3))


def _fd_grad(s, x, h=1e-5):
    out = np.empty(s.n_params)
    for k in range(s.n_params):
        p1 = s.params.copy()
        p1[k] += h
        p2 = s.params.copy()
        p2[k] -= h
        out[k] = (s.with_params(p1).forward(x) - s.with_params(p2).forward(x)) / (2 * h)
    return out


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(0)
    for trial in range(50):
        d = int(rng.integers(1, 4))
        hidden = tuple(int(w) for w in rng.integers(1, 5, size=rng.integers(0, 3)))
        s = Scorer.mlp(d, hidden, seed=trial) if hidden else Scorer(d, (), rng.normal(size=d + 1))
        s.params = s.params + 0.1 * rng.normal(size=s.n_params)
        x = rng.normal(size=d)
        g = s.backward(x, 1.0)
        fd = _fd_grad(s, x)
        assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(fd), 1e-8)


def test_batch_backward_is_sum_of_singles():
    s = Scorer.mlp(2, (3,), seed=1)
    X = np.random.default_rng(2).normal(size=(5, 2))
    u = np.arange(5.0)
    _, acts = s.forward_batch(X)
    total = sum(s.backward(x, ui) for x, ui in zip(X, u))
    np.testing.assert_allclose(s.backward_batch(acts, u), total, atol=1e-12)


@given(st.floats(min_value=1e-3, max_value=1e3), st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_linear_scale_covariance(c, x):
    s = Scorer(2, (), [0.4, -1.3, 0.2])
    scaled = s.with_params(c * s.params)
    assert scaled.forward(x[:2]) == pytest.approx(c * s.forward(x[:2]), rel=1e-12, abs=1e-12)


def test_mlp_init_deterministic():
    a = Scorer.mlp(3, seed=7)
    b = Scorer.mlp(3, seed=7)
    c = Scorer.mlp(3, seed=8)
    assert np.array_equal(a.params, b.params)
    assert not np.array_equal(a.params, c.params)
    assert a.n_params == 3 * 32 + 32 + 32 * 32 + 32 + 32 + 1


def test_sgd_step():
    st_ = OptimizerState("sgd", learning_rate=0.1)
    assert optimizer_step(st_, np.array([1.0]), np.array([2.0]))[0] == pytest.approx(0.8)


def test_adam_first_step():
    st_ = OptimizerState("adam", learning_rate=1e-3)
    out = optimizer_step(st_, np.array([0.0]), np.array([1.0]))
    assert out[0] == pytest.approx(-1e-3, rel=1e-6)
    assert st_.step_count == 1


def test_adam_decoupled_decay():
    st_ = OptimizerState("adam", learning_rate=0.1, weight_decay=0.5)
    out = optimizer_step(st_, np.array([2.0]), np.array([0.0]))
    assert out[0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0)


def test_zero_gradient_fixed_point():
    for kind in ("sgd", "adam"):
        st_ = OptimizerState(kind, learning_rate=0.1)
        p = np.array([1.0, -2.0])
        for _ in range(3):
            p2 = optimizer_step(st_, p, np.zeros(2))
            assert np.array_equal(p2, p)
            p = p2


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        optimizer_step(OptimizerState(), np.zeros(2), np.zeros(3))


def test_save_load_roundtrip(tmp_path):
    s = Scorer.mlp(2, (3, 2), seed=4)
    path = tmp_path / "m.txt"
    s.save(path)
    text = path.read_text()
    assert text.splitlines()[0] == "mlp 2 3 2"
    back = Scorer.load(path)
    assert back.hidden == (3, 2) and np.array_equal(back.params, s.params)
    lin = Scorer(1, (), [0.1, 0.2])
    assert lin.dumps() == "linear 1\n0.1\n0.2\n"


def test_parse_arch():
    assert parse_arch("linear", 3).n_params == 4
    assert parse_arch("mlp:5", 2).hidden == (5,)
    assert parse_arch("mlp", 2).hidden == (32, 32)
    with pytest.raises(ValueError):
        parse_arch("cnn", 2)
