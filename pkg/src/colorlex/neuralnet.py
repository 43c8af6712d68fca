"""Minimal dense-network core: forward, exact backprop, Adam, checkpoints.

Everything is float64 numpy.  Batches are row-major (batch, features).
Backward returns gradients summed over the batch; callers divide by the
batch size when they want mean-loss semantics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_FORMAT_VERSION = 1

_ACTIVATIONS = ("relu", "identity")


@dataclass
class DenseLayer:
    weights: np.ndarray  # [out, in]
    bias: np.ndarray     # [out]
    activation: str

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ValueError("bias/weight shape mismatch")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ValueError("non-finite layer parameters")


def init_layer(n_in: int, n_out: int, activation: str, rng: np.random.Generator) -> DenseLayer:
    # uniform fan-based init, zero bias
    bound = np.sqrt(6.0 / (n_in + n_out))
    w = rng.uniform(-bound, bound, size=(n_out, n_in))
    return DenseLayer(weights=w, bias=np.zeros(n_out), activation=activation)


class Mlp:
    def __init__(self, layers: list[DenseLayer]):
        for prev, nxt in zip(layers, layers[1:]):
            if nxt.weights.shape[1] != prev.weights.shape[0]:
                raise ValueError("adjacent layer shapes do not chain")
        self.layers = layers

    @classmethod
    def create(cls, sizes: list[int], activations: list[str],
               rng: np.random.Generator) -> "Mlp":
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        layers = [init_layer(sizes[i], sizes[i + 1], activations[i], rng)
                  for i in range(len(sizes) - 1)]
        return cls(layers)

    @property
    def n_in(self) -> int:
        return self.layers[0].weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.layers[-1].weights.shape[0]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.append(layer.weights)
            out.append(layer.bias)
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.forward_batch(np.asarray(x, dtype=float)[None, :])[0]

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[1] != self.n_in:
            raise ValueError(f"input width {x.shape[1]} != {self.n_in}")
        for layer in self.layers:
            x = x @ layer.weights.T + layer.bias
            if layer.activation == "relu":
                x = np.maximum(x, 0.0)
        return x

    def forward_batch_cached(self, x: np.ndarray):
        """Forward pass retaining pre-activations for backprop."""
        x = np.asarray(x, dtype=float)
        if x.shape[1] != self.n_in:
            raise ValueError(f"input width {x.shape[1]} != {self.n_in}")
        inputs = [x]
        pre = []
        for layer in self.layers:
            z = x @ layer.weights.T + layer.bias
            pre.append(z)
            x = np.maximum(z, 0.0) if layer.activation == "relu" else z
            inputs.append(x)
        return x, (inputs, pre)

    def backward_batch(self, cache, upstream: np.ndarray):
        """Reverse-mode gradients for a cached forward pass.

        Returns (grads, input_grad) where grads matches parameters() order
        and is summed over the batch.
        """
        inputs, pre = cache
        g = np.asarray(upstream, dtype=float)
        if g.shape != pre[-1].shape:
            raise ValueError("upstream gradient shape mismatch")
        grads: list[np.ndarray] = []
        for li in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[li]
            if layer.activation == "relu":
                g = g * (pre[li] > 0.0)
            gw = g.T @ inputs[li]
            gb = g.sum(axis=0)
            grads.append(gb)
            grads.append(gw)
            g = g @ layer.weights
        grads.reverse()
        return grads, g

    def backward(self, x: np.ndarray, upstream: np.ndarray):
        """Single-sample convenience wrapper around backward_batch."""
        _, cache = self.forward_batch_cached(np.asarray(x, dtype=float)[None, :])
        grads, gx = self.backward_batch(cache, np.asarray(upstream, dtype=float)[None, :])
        return grads, gx[0]


def softmax(z: np.ndarray) -> np.ndarray:
    """Stable softmax along the last axis."""
    z = np.asarray(z, dtype=float)
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    m = z.max(axis=-1, keepdims=True)
    shifted = z - m
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


@dataclass
class OptimizerState:
    """Adam with bias correction, one slot pair per parameter array."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def _ensure_slots(self, params: list[np.ndarray]):
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        if len(self.m) != len(params):
            raise ValueError("optimizer slot count mismatch")

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]):
        """Update params in place; fails fast on non-finite gradients."""
        self._ensure_slots(params)
        for g in grads:
            if not np.isfinite(g).all():
                raise FloatingPointError("non-finite gradient")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def clip_gradients(grads: list[np.ndarray], max_norm: float) -> float:
    """Scale gradients in place to a global max norm; returns the norm."""
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
    if total > max_norm and total > 0.0:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total


# ---------------------------------------------------------------------------
# checkpoints: versioned JSON with decimal-string arrays; save(load(x)) == x
# ---------------------------------------------------------------------------

def mlp_to_checkpoint(mlp: Mlp, metadata: dict) -> dict:
    layers = []
    for layer in mlp.layers:
        layers.append({
            "activation": layer.activation,
            "in": int(layer.weights.shape[1]),
            "out": int(layer.weights.shape[0]),
            "weights": [repr(float(x)) for x in layer.weights.ravel(order="C")],
            "bias": [repr(float(x)) for x in layer.bias],
        })
    return {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "metadata": metadata,
        "layers": layers,
    }


def mlp_from_checkpoint(doc: dict) -> Mlp:
    if doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('format_version')}")
    layers = []
    for spec in doc["layers"]:
        w = np.array([float(s) for s in spec["weights"]],
                     dtype=float).reshape(spec["out"], spec["in"])
        b = np.array([float(s) for s in spec["bias"]], dtype=float)
        layers.append(DenseLayer(weights=w, bias=b, activation=spec["activation"]))
    return Mlp(layers)


def checkpoint_dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1)


def save_checkpoint(path, doc: dict):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(checkpoint_dumps(doc))


def load_checkpoint(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
