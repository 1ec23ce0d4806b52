"""Small numpy victims (softmax regression, one-hidden-layer MLP) with input
gradients, a seeded SGD trainer, synthetic data, and white-box baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .blocks import ImageSpec
from .errors import ConfigurationError, DomainError
from .oracle import LossReport

ACTIVATIONS = ("relu", "identity")


class Layer(NamedTuple):
    weight: np.ndarray  # (out, in)
    bias: np.ndarray    # (out,)
    activation: str = "identity"


class MLP:
    """Stack of dense layers; the last layer's output feeds softmax
    cross-entropy."""

    def __init__(self, layers: Sequence[Layer], spec: Optional[ImageSpec] = None):
        if not layers:
            raise ConfigurationError("a model needs at least one layer")
        clean = []
        for i, (W, b, act) in enumerate(layers):
            W = np.array(W, dtype=float)
            b = np.array(b, dtype=float)
            if act not in ACTIVATIONS:
                raise ConfigurationError(f"unknown activation {act!r}")
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ConfigurationError(f"layer {i}: weight {W.shape} and bias {b.shape} disagree")
            if clean and clean[-1].weight.shape[0] != W.shape[1]:
                raise ConfigurationError(f"layer {i} input dim {W.shape[1]} != previous output")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ConfigurationError(f"layer {i} has non-finite entries")
            W.flags.writeable = False
            b.flags.writeable = False
            clean.append(Layer(W, b, act))
        self.layers = tuple(clean)
        self.spec = spec
        if spec is not None and spec.size != self.input_dim:
            raise ConfigurationError(f"image spec has {spec.size} values, model expects {self.input_dim}")

    @property
    def input_dim(self):
        return self.layers[0].weight.shape[1]

    @property
    def num_classes(self):
        return self.layers[-1].weight.shape[0]

    @classmethod
    def random(cls, sizes, seed=0, scale=None, hidden_activation="relu", spec=None):
        rng = np.random.default_rng(seed)
        layers = []
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            s = scale if scale is not None else 1.0 / np.sqrt(n_in)
            act = "identity" if i == len(sizes) - 2 else hidden_activation
            layers.append(Layer(rng.normal(0, s, (n_out, n_in)), rng.normal(0, s, n_out), act))
        return cls(layers, spec)

    def logits(self, x):
        h = np.asarray(x, dtype=float)
        for W, b, act in self.layers:
            h = h @ W.T
            h += b
            if act == "relu":
                h = np.maximum(h, 0.0)
        return h

    def predict(self, x):
        return np.argmax(self.logits(x), axis=-1)

    def loss_report(self, x, y) -> LossReport:
        z = self.logits(x)
        top = z.argmax()
        m = z[top]
        loss = m + math.log(np.exp(z - m).sum()) - z[y]
        return LossReport(max(float(loss), 0.0), int(top))

    def _forward_cache(self, x):
        acts = [x]
        pre = []
        h = x
        for W, b, act in self.layers:
            a = h @ W.T + b
            pre.append(a)
            h = np.maximum(a, 0.0) if act == "relu" else a
            acts.append(h)
        return pre, acts

    def _backward(self, pre, acts, dz):
        """Backprop ``dz`` (dL/dlogits, batch-major) to parameter and input grads."""
        grads = []
        g = dz
        for (W, b, act), a, h_in in zip(self.layers[::-1], pre[::-1], acts[-2::-1]):
            if act == "relu":
                g = g * (a > 0)
            grads.append((g.T @ h_in, g.sum(axis=0)))
            g = g @ W
        return grads[::-1], g


class SoftmaxRegression(MLP):
    """Multinomial logistic regression: one identity layer."""

    def __init__(self, W, b, spec=None):
        super().__init__([Layer(W, b, "identity")], spec)

    @property
    def W(self):
        return self.layers[0].weight

    @property
    def b(self):
        return self.layers[0].bias

    @classmethod
    def zeros(cls, classes, dim, spec=None):
        return cls(np.zeros((classes, dim)), np.zeros(classes), spec)


def binary_logistic(w, b=0.0, spec=None) -> SoftmaxRegression:
    """Two-class softmax with logits (0, w.x + b), i.e. p(class 1) = sigmoid(w.x + b).

    The class-1 loss is ``log(1 + exp(-(w.x + b)))``.
    """
    w = np.asarray(w, dtype=float)
    return SoftmaxRegression(np.stack([np.zeros_like(w), w]), np.array([0.0, b]), spec)


def _log_softmax_loss(z, y):
    m = np.max(z, axis=-1, keepdims=True)
    lse = m[..., 0] + np.log(np.sum(np.exp(z - m), axis=-1))
    return lse - np.take_along_axis(z, np.asarray(y).reshape(*z.shape[:-1], 1), axis=-1)[..., 0]


def _softmax(z):
    e = np.exp(z - np.max(z, axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def forward_loss(model: MLP, x, y):
    """Cross-entropy loss, predicted class and input gradient at one point."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != model.input_dim:
        raise DomainError(f"input has {x.shape[0]} values, model expects {model.input_dim}")
    if not 0 <= y < model.num_classes:
        raise DomainError(f"label {y} out of range")
    pre, acts = model._forward_cache(x[None, :])
    z = acts[-1]
    if not np.all(np.isfinite(z)):
        raise FloatingPointError("non-finite logits")
    dz = _softmax(z)
    dz[0, y] -= 1.0
    _, gx = model._backward(pre, acts, dz)
    return float(_log_softmax_loss(z[0], y)), int(np.argmax(z[0])), gx[0]


def sign(g):
    """Sign with sign(0) = +1."""
    return np.where(np.asarray(g) >= 0, 1.0, -1.0)


def _clip(x, spec, clip):
    if not clip:
        return x
    lo, hi = (spec.lo, spec.hi) if spec is not None else (0.0, 1.0)
    return np.clip(x, lo, hi)


def fgsm(model, x, y, epsilon, clip=False, spec=None, targeted=False):
    if not epsilon > 0:
        raise ConfigurationError("epsilon must be positive")
    x = np.asarray(x, dtype=float)
    _, _, g = forward_loss(model, x, y)
    direction = sign(g).reshape(x.shape)
    if targeted:
        direction = -direction
    return _clip(x + epsilon * direction, spec, clip)


def pgd(model, x, y, epsilon, steps=20, step_size=None, clip=False, spec=None, targeted=False):
    """Iterated signed-gradient steps projected onto the epsilon ball around x.

    Ascends the loss at ``y`` (untargeted) or descends it (targeted, ``y`` is
    the target class).
    """
    if steps < 1:
        raise ConfigurationError("steps must be >= 1")
    x0 = np.asarray(x, dtype=float)
    step_size = epsilon / 4 if step_size is None else step_size
    xa = x0.copy()
    for _ in range(steps):
        _, _, g = forward_loss(model, xa, y)
        direction = sign(g).reshape(x0.shape)
        if targeted:
            direction = -direction
        xa = np.clip(xa + step_size * direction, x0 - epsilon, x0 + epsilon)
        xa = _clip(xa, spec, clip)
    return xa


def vertex_fraction(x_adv, x, epsilon, tol=1e-9):
    """Fraction of coordinates whose perturbation magnitude is epsilon."""
    d = np.abs(np.asarray(x_adv, dtype=float) - np.asarray(x, dtype=float)).reshape(-1)
    if d.size == 0:
        return 0.0
    return float(np.mean(np.abs(d - epsilon) <= tol))


@dataclass(frozen=True)
class LabeledDataset:
    images: np.ndarray  # (n, h*w*c) in [lo, hi]
    labels: np.ndarray  # (n,)
    spec: ImageSpec

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ConfigurationError("images and labels differ in length")
        if self.images.ndim != 2 or self.images.shape[1] != self.spec.size:
            raise ConfigurationError("image array does not match spec")

    def __len__(self):
        return len(self.labels)

    @property
    def num_classes(self):
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def image(self, i):
        return self.images[i].reshape(self.spec.shape)

    def split(self, n_first):
        return (LabeledDataset(self.images[:n_first], self.labels[:n_first], self.spec),
                LabeledDataset(self.images[n_first:], self.labels[n_first:], self.spec))


def gen_synthetic(classes, spec, n, seed=0, spread=0.25, noise=0.12):
    """Gaussian blobs clipped to [0, 1]: one random mean per class, centred at
    0.5 with per-pixel offsets uniform in +/-spread."""
    if classes < 2:
        raise ConfigurationError("need at least two classes")
    if isinstance(spec, int):
        spec = ImageSpec(spec, 1, 1)
    rng = np.random.default_rng(seed)
    means = 0.5 + rng.uniform(-spread, spread, (classes, spec.size))
    labels = rng.integers(0, classes, n)
    images = means[labels] + rng.normal(0, noise, (n, spec.size))
    images = np.clip(images, spec.lo, spec.hi)
    return LabeledDataset(images, labels, spec)


def train_sgd(model: MLP, data: LabeledDataset, epochs=10, lr=0.1, seed=0, batch_size=32,
              weight_decay=0.0) -> MLP:
    """Mini-batch SGD on mean cross-entropy; returns a new model."""
    if not lr > 0:
        raise ConfigurationError("lr must be positive")
    if len(np.unique(data.labels)) < 2:
        raise ConfigurationError("training data has a single class")
    if data.labels.max() >= model.num_classes:
        raise ConfigurationError("labels exceed model class count")
    rng = np.random.default_rng(seed)
    params = [(W.copy(), b.copy(), act) for W, b, act in model.layers]
    work = MLP([Layer(*p) for p in params])
    n = len(data)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            X, Y = data.images[idx], data.labels[idx]
            pre, acts = work._forward_cache(X)
            dz = _softmax(acts[-1])
            dz[np.arange(len(idx)), Y] -= 1.0
            dz /= len(idx)
            grads, _ = work._backward(pre, acts, dz)
            params = [(W - lr * (gW + weight_decay * W), b - lr * gb, act)
                      for (W, b, act), (gW, gb) in zip(params, grads)]
            work = MLP([Layer(*p) for p in params])
    out = MLP(work.layers, model.spec)
    if isinstance(model, SoftmaxRegression):
        out = SoftmaxRegression(out.layers[0].weight, out.layers[0].bias, model.spec)
    return out


def accuracy(model, data: LabeledDataset):
    return float(np.mean(model.predict(data.images) == data.labels))
