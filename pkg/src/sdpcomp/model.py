"""Linear and MLP scorers with hand-written backprop, plus SGD/Adam."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import DimensionMismatch, LengthMismatch, rng_for

DEFAULT_HIDDEN = (32, 32)


class Scorer:
    """A decision function g: R^d -> R with a flat parameter vector.

    ``hidden=()`` is the linear model ``w.x + b``; otherwise ReLU layers of the
    given widths followed by a scalar affine output. Parameters are laid out
    layer by layer as (W row-major, then b).
    """

    def __init__(self, d_in: int, hidden: Sequence[int] = (), params: Optional[np.ndarray] = None):
        if d_in <= 0:
            raise ValueError("d_in must be positive")
        if any(int(h) <= 0 for h in hidden):
            raise ValueError("hidden widths must be positive")
        self.d_in = int(d_in)
        self.hidden = tuple(int(h) for h in hidden)
        self.sizes = (self.d_in, *self.hidden, 1)
        self.n_params = sum(o * i + o for i, o in zip(self.sizes[:-1], self.sizes[1:]))
        if params is None:
            params = np.zeros(self.n_params)
        params = np.asarray(params, dtype=np.float64).reshape(-1)
        if params.size != self.n_params:
            raise LengthMismatch(f"expected {self.n_params} parameters, got {params.size}")
        self.params = params.copy()

    @classmethod
    def linear(cls, d_in: int) -> "Scorer":
        return cls(d_in)

    @classmethod
    def mlp(cls, d_in: int, hidden: Sequence[int] = DEFAULT_HIDDEN, seed: int = 0) -> "Scorer":
        """MLP with Glorot-uniform weights and zero biases."""
        s = cls(d_in, hidden)
        rng = rng_for(seed, 0x6D6C70)
        chunks = []
        for fan_in, fan_out in zip(s.sizes[:-1], s.sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            chunks.append(rng.uniform(-limit, limit, size=fan_out * fan_in))
            chunks.append(np.zeros(fan_out))
        s.params = np.concatenate(chunks)
        return s

    @property
    def is_linear(self) -> bool:
        return not self.hidden

    def copy(self) -> "Scorer":
        return Scorer(self.d_in, self.hidden, self.params)

    def with_params(self, params) -> "Scorer":
        return Scorer(self.d_in, self.hidden, params)

    def layers(self, params=None):
        """Yield ``(W, b)`` views into the parameter vector."""
        p = self.params if params is None else params
        pos = 0
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            W = p[pos : pos + fan_in * fan_out].reshape(fan_out, fan_in)
            pos += fan_in * fan_out
            b = p[pos : pos + fan_out]
            pos += fan_out
            yield W, b

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.d_in:
            raise DimensionMismatch(f"expected inputs of dimension {self.d_in}, got {X.shape[1]}")
        return X

    def forward_batch(self, X):
        """Scores for the rows of X plus the activations needed by backward."""
        X = self._check(X)
        acts = [X]
        h = X
        layers = list(self.layers())
        for k, (W, b) in enumerate(layers):
            z = h @ W.T + b
            if k < len(layers) - 1:
                h = np.maximum(z, 0.0)
            else:
                h = z
            acts.append(h)
        return h[:, 0], acts

    def backward_batch(self, acts, upstream) -> np.ndarray:
        """Gradient of sum_i upstream[i] * g(x_i) with respect to the parameters."""
        upstream = np.asarray(upstream, dtype=np.float64).reshape(-1, 1)
        layers = list(self.layers())
        grads = []
        delta = upstream
        for k in range(len(layers) - 1, -1, -1):
            W, _ = layers[k]
            h_in = acts[k]
            grads.append((delta.T @ h_in).reshape(-1))
            grads.append(delta.sum(axis=0))
            if k > 0:
                # ReLU derivative is 0 at exactly 0
                delta = (delta @ W) * (acts[k] > 0.0)
        out = []
        for gW, gb in zip(grads[0::2][::-1], grads[1::2][::-1]):
            out.append(gW)
            out.append(gb)
        return np.concatenate(out)

    def predict(self, X) -> np.ndarray:
        return self.forward_batch(X)[0]

    def forward(self, x) -> float:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.size != self.d_in:
            raise DimensionMismatch(f"expected input of dimension {self.d_in}, got {x.size}")
        return float(self.predict(x)[0])

    def backward(self, x, upstream: float = 1.0) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.size != self.d_in:
            raise DimensionMismatch(f"expected input of dimension {self.d_in}, got {x.size}")
        _, acts = self.forward_batch(x)
        return self.backward_batch(acts, [upstream])

    # -- persistence -------------------------------------------------------

    def header(self) -> str:
        if self.is_linear:
            return f"linear {self.d_in}"
        return "mlp " + " ".join(str(v) for v in (self.d_in, *self.hidden))

    def dumps(self) -> str:
        return self.header() + "\n" + "".join(f"{float(v)!r}\n" for v in self.params)

    @classmethod
    def loads(cls, text: str) -> "Scorer":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty model file")
        head = lines[0].split()
        if head[0] == "linear" and len(head) == 2:
            d, hidden = int(head[1]), ()
        elif head[0] == "mlp" and len(head) >= 3:
            d, hidden = int(head[1]), tuple(int(v) for v in head[2:])
        else:
            raise ValueError(f"bad model header: {lines[0]!r}")
        return cls(d, hidden, np.array([float(v) for v in lines[1:]]))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8", newline="\n")

    @classmethod
    def load(cls, path) -> "Scorer":
        return cls.loads(Path(path).read_text(encoding="utf-8"))

    def __repr__(self):
        return f"Scorer({self.header()!r}, n_params={self.n_params})"


def parse_arch(arch: str, d_in: int, seed: int = 0) -> Scorer:
    """``"linear"`` or ``"mlp:32,32"`` (``"mlp"`` alone uses the default widths)."""
    if arch == "linear":
        return Scorer.linear(d_in)
    if arch.startswith("mlp"):
        _, _, widths = arch.partition(":")
        hidden = tuple(int(w) for w in widths.split(",")) if widths else DEFAULT_HIDDEN
        return Scorer.mlp(d_in, hidden, seed=seed)
    raise ValueError(f"unknown architecture {arch!r}")


@dataclass
class OptimizerState:
    kind: str = "adam"
    learning_rate: float = 1e-3
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: Optional[np.ndarray] = field(default=None, repr=False)
    v: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ValueError("learning rate and weight decay must be non-negative")


def optimizer_step(state: OptimizerState, params, grads) -> np.ndarray:
    """One update; returns new parameters and mutates ``state`` in place.

    SGD uses coupled decay, ``theta -= lr * (g + wd * theta)``. Adam applies
    ``theta -= lr * wd * theta`` first and then the bias-corrected Adam step.
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise LengthMismatch(f"params {params.shape} and grads {grads.shape} differ")
    lr, wd = state.learning_rate, state.weight_decay
    state.step_count += 1
    if state.kind == "sgd":
        return params - lr * (grads + wd * params)

    if state.m is None or state.m.shape != params.shape:
        state.m = np.zeros_like(params)
        state.v = np.zeros_like(params)
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1**state.step_count)
    v_hat = state.v / (1.0 - state.beta2**state.step_count)
    decayed = params - lr * wd * params
    return decayed - lr * m_hat / (np.sqrt(v_hat) + state.eps)
