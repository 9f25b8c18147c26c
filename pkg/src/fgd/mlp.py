"""Two-layer tanh network trained with mixed orthogonal/Euclidean groups.

Architecture: features (d) -> dense W1 (d x h, orthonormal columns) + b1 ->
tanh -> dense W2 (h x c) + b2 -> softmax cross-entropy. W1 is the
"orthogonal" parameter, following the convention that a layer's weight is
stored as (fan-in x fan-out) with fan-in >= fan-out.
"""
from dataclasses import dataclass, field
import csv
import math
from typing import List

import numpy as np

from .errors import ShapeError
from .linalg import make_rng, matmul, random_orthonormal
from .optim import ParamGroup

PARAM_NAMES = ("w1", "b1", "w2", "b2")
PARAM_KINDS = ("orthogonal", "euclidean", "euclidean", "euclidean")


@dataclass
class Dataset:
    features: np.ndarray   # N x d
    labels: np.ndarray     # N, int class indices
    n_classes: int = 2

    def __len__(self):
        return len(self.labels)


def two_moons(n_samples, noise=0.1, seed=0):
    """Interleaved half circles, classes balanced (n_samples // 2 each)."""
    rng = make_rng(seed, 7)
    n0 = n_samples // 2
    n1 = n_samples - n0
    t0 = rng.uniform(0.0, math.pi, n0)
    t1 = rng.uniform(0.0, math.pi, n1)
    outer = np.column_stack([np.cos(t0), np.sin(t0)])
    inner = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    x = np.vstack([outer, inner]) + noise * rng.standard_normal((n_samples, 2))
    y = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    perm = rng.permutation(n_samples)
    return x[perm], y[perm]


def poly_features(x):
    """All monomials of degree 1..3 in the two coordinates (9 columns)."""
    u, v = x[:, 0], x[:, 1]
    return np.column_stack([u, v, u * u, u * v, v * v, u ** 3, u * u * v, u * v * v, v ** 3])


def two_moons_split(n_train=400, n_test=400, noise=0.1, seed=0):
    """Train/test datasets of lifted two-moons points, standardised with train statistics."""
    x, y = two_moons(n_train + n_test, noise, seed)
    f = poly_features(x)
    mu = f[:n_train].mean(axis=0)
    sd = f[:n_train].std(axis=0)
    f = (f - mu) / sd
    return Dataset(f[:n_train].copy(), y[:n_train].copy()), Dataset(f[n_train:].copy(), y[n_train:].copy())


def export_dataset(ds, path):
    """Comma-separated text: feature columns, then the label."""
    d = ds.features.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(d)] + ["label"])
        for row, lab in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


@dataclass
class MlpModel:
    params: List[np.ndarray]
    kinds: tuple = PARAM_KINDS
    names: tuple = PARAM_NAMES

    @classmethod
    def init(cls, d, h, c, seed, zero_output=False):
        if d < h:
            raise ShapeError(f"orthogonal layer needs fan-in >= fan-out, got {d} x {h}")
        w1 = random_orthonormal(d, h, seed)
        if zero_output:
            w2 = np.zeros((h, c))
        else:
            w2 = 0.1 * make_rng(seed, 3).standard_normal((h, c))
        return cls([w1, np.zeros((1, h)), w2, np.zeros((1, c))])

    def groups(self):
        return [ParamGroup(k, p.copy(), np.zeros_like(p), name=nm)
                for k, p, nm in zip(self.kinds, self.params, self.names)]


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(params, x):
    w1, b1, w2, b2 = params
    hidden = np.tanh(matmul(x, w1) + b1)
    return hidden, matmul(hidden, w2) + b2


def loss_and_grads(params, ds):
    """Mean cross-entropy and its gradient for every parameter (explicit chain rule)."""
    w1, b1, w2, b2 = params
    x, y = ds.features, ds.labels
    m = len(y)
    hidden, logits = forward(params, x)
    probs = _softmax(logits)
    picked = probs[np.arange(m), y]
    loss = float(-np.mean(np.log(picked)))
    dlogits = probs.copy()
    dlogits[np.arange(m), y] -= 1.0
    dlogits /= m
    g_w2 = matmul(hidden.T, dlogits)
    g_b2 = dlogits.sum(axis=0, keepdims=True)
    dpre = matmul(dlogits, w2.T) * (1.0 - hidden * hidden)
    g_w1 = matmul(x.T, dpre)
    g_b1 = dpre.sum(axis=0, keepdims=True)
    return loss, [g_w1, g_b1, g_w2, g_b2]


def accuracy(params, ds):
    _, logits = forward(params, ds.features)
    return float(np.mean(np.argmax(logits, axis=1) == ds.labels))


def mlp_problem(model, ds):
    """Gradient provider over all parameters: values -> (loss, grads)."""
    if len(ds) == 0:
        raise ShapeError("empty dataset")
    if ds.features.shape[1] != model.params[0].shape[0]:
        raise ShapeError(f"feature dim {ds.features.shape[1]} does not match W1 {model.params[0].shape}")

    def grad_fn(values):
        return loss_and_grads(values, ds)

    return grad_fn
