"""Feed-forward building blocks with hand-written backpropagation.

Every layer follows the same small protocol::

    y  = layer.forward(x, train=False)
    dx = layer.backward(dy)          # accumulates into layer.grads

Parameters and their gradients are exposed as parallel lists so optimizers
can walk them without knowing the layer type.  Activations are row-major
``(batch, features)`` arrays.
"""

from __future__ import annotations

import math

import numpy as np

from .tensor import NonFiniteError, RandomSource, ShapeError

LEAKY_SLOPE = 0.01


def glorot_uniform(rs: RandomSource, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return -limit + 2.0 * limit * rs.uniform((fan_out, fan_in))


class Layer:
    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def params(self) -> list[np.ndarray]:
        return []

    @property
    def grads(self) -> list[np.ndarray]:
        return []

    def zero_grad(self) -> None:
        for g in self.grads:
            g[...] = 0.0


class Dense(Layer):
    """Affine map ``y = x W^T + b`` with ``W`` stored as (out, in)."""

    def __init__(self, n_in: int, n_out: int, rs: RandomSource | None = None):
        if n_in < 1 or n_out < 1:
            raise ValueError(f"Dense: invalid size {n_in}->{n_out}")
        self.W = glorot_uniform(rs, n_in, n_out) if rs is not None else np.zeros((n_out, n_in))
        self.b = np.zeros(n_out)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)
        self._x = None

    @property
    def n_in(self) -> int:
        return self.W.shape[1]

    @property
    def n_out(self) -> int:
        return self.W.shape[0]

    def forward(self, x, train=False):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeError(f"Dense: input shape {x.shape} vs weight shape {self.W.shape}")
        self._x = x
        return x @ self.W.T + self.b

    def backward(self, grad):
        if self._x is None:
            raise RuntimeError("Dense.backward called before forward")
        if grad.shape != (self._x.shape[0], self.n_out):
            raise ShapeError(f"Dense: upstream gradient {grad.shape} vs output {(self._x.shape[0], self.n_out)}")
        self.dW += grad.T @ self._x
        self.db += grad.sum(axis=0)
        return grad @ self.W

    def astype(self, dtype) -> None:
        """Convert parameters and gradient buffers to ``dtype`` in place of the old arrays."""
        self.W, self.b = self.W.astype(dtype), self.b.astype(dtype)
        self.dW, self.db = np.zeros_like(self.W), np.zeros_like(self.b)

    @property
    def params(self):
        return [self.W, self.b]

    @property
    def grads(self):
        return [self.dW, self.db]


class LeakyReLU(Layer):
    def __init__(self, slope: float = LEAKY_SLOPE):
        self.slope = slope
        self._d = None

    def forward(self, x, train=False):
        # derivative at exactly 0 is taken as 1
        self._d = np.where(x >= 0, 1.0, self.slope).astype(x.dtype, copy=False)
        return x * self._d

    def backward(self, grad):
        if self._d is None:
            raise RuntimeError("LeakyReLU.backward called before forward")
        return grad * self._d


class Dropout(Layer):
    """Inverted dropout: kept units are scaled by 1/(1-p) in train mode."""

    def __init__(self, p: float = 0.5, rs: RandomSource | None = None):
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout probability must be in [0, 1), got {p}")
        self.p = p
        self.rs = rs
        self._mask = None

    def forward(self, x, train=False):
        if not train or self.p == 0.0:
            self._mask = None
            return x
        if self.rs is None:
            raise RuntimeError("Dropout in train mode needs a RandomSource")
        self._mask = ((self.rs.uniform(x.shape) >= self.p) / (1.0 - self.p)).astype(x.dtype)
        return x * self._mask

    def backward(self, grad):
        return grad if self._mask is None else grad * self._mask


class GradReversal(Layer):
    """Identity forward; the backward pass multiplies the gradient by -alpha."""

    def __init__(self, alpha: float = 1.0):
        if alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {alpha}")
        self.alpha = float(alpha)

    def forward(self, x, train=False):
        return x

    def backward(self, grad):
        return -self.alpha * grad


class Sequential(Layer):
    def __init__(self, layers: list[Layer]):
        self.layers = list(layers)

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    @property
    def params(self):
        return [p for layer in self.layers for p in layer.params]

    @property
    def grads(self):
        return [g for layer in self.layers for g in layer.grads]

    def dense_layers(self) -> list[Dense]:
        return [layer for layer in self.layers if isinstance(layer, Dense)]


def mlp(sizes: list[int], rs: RandomSource, dropout: float = 0.5, dropout_after: int | None = None,
        final_activation: bool = False, slope: float = LEAKY_SLOPE) -> Sequential:
    """Dense/leaky-ReLU stack over ``sizes``.

    Dropout follows the activation of every hidden layer whose index is below
    ``dropout_after`` (all hidden layers when None).  The last dense layer is
    linear unless ``final_activation`` is set, and never gets dropout.
    """
    layers: list[Layer] = []
    n_dense = len(sizes) - 1
    limit = n_dense - 1 if dropout_after is None else dropout_after
    for i in range(n_dense):
        layers.append(Dense(sizes[i], sizes[i + 1], rs))
        last = i == n_dense - 1
        if not last or final_activation:
            layers.append(LeakyReLU(slope))
        if not last and i < limit and dropout > 0:
            layers.append(Dropout(dropout, rs))
    return Sequential(layers)


def mse_loss(x: np.ndarray, x_hat: np.ndarray) -> tuple[float, np.ndarray]:
    """Batch mean of per-sample squared L2 distance, and its gradient in x_hat."""
    if x.shape != x_hat.shape:
        raise ShapeError(f"mse_loss: shape mismatch {x.shape} vs {x_hat.shape}")
    n = x.shape[0]
    diff = x_hat - x
    return float(np.sum(diff * diff) / n), 2.0 * diff / n


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_xent(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean negative log-softmax of the true class, and its gradient in logits."""
    labels = np.asarray(labels, dtype=np.intp)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"softmax_xent: {labels.shape[0] if labels.ndim else 0} labels for {n} rows")
    if n and (labels.min() < 0 or labels.max() >= k):
        raise IndexError(f"softmax_xent: class index out of range for {k} classes")
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    value = float(np.mean(log_norm - z[rows, labels]))
    grad = np.exp(z - log_norm[:, None])
    grad[rows, labels] -= 1.0
    return value, grad / n


def _check_pairs(params, grads):
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} parameters but {len(grads)} gradients")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeError(f"parameter shape {p.shape} vs gradient shape {g.shape}")


def step_sgd(params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
    _check_pairs(params, grads)
    for p, g in zip(params, grads):
        p -= lr * g


class Adam:
    """Adam with bias correction; updates the parameter arrays in place."""

    def __init__(self, params: list[np.ndarray], lr: float = 1e-5,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        _check_pairs(params, grads)
        if len(params) != len(self.m):
            raise ShapeError(f"Adam state holds {len(self.m)} parameters, got {len(params)}")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        step = self.lr * math.sqrt(1 - b2**self.t) / (1 - b1**self.t)
        eps_hat = self.eps * math.sqrt(1 - b2**self.t)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if m.shape != p.shape:
                raise ShapeError(f"Adam accumulator {m.shape} vs parameter {p.shape}")
            tmp = np.multiply(g, 1 - b1)
            m *= b1
            m += tmp
            np.multiply(g, g, out=tmp)
            tmp *= 1 - b2
            v *= b2
            v += tmp
            np.sqrt(v, out=tmp)
            tmp += eps_hat
            np.divide(m, tmp, out=tmp)
            tmp *= step
            p -= tmp


def step_adam(params, grads, state: Adam) -> None:
    state.step(params, grads)


class SupervisedStack:
    """A Sequential plus a loss, exposing the interface :func:`grad_check` uses."""

    def __init__(self, net: Sequential, loss: str = "mse"):
        if loss not in ("mse", "xent"):
            raise ValueError(f"unknown loss {loss!r}")
        self.net = net
        self.loss_name = loss

    def parameters(self) -> list[np.ndarray]:
        return self.net.params

    def _loss(self, out, target):
        return mse_loss(target, out) if self.loss_name == "mse" else softmax_xent(out, target)

    def loss(self, batch) -> float:
        x, target = batch
        return self._loss(self.net.forward(x), target)[0]

    def loss_and_grads(self, batch):
        x, target = batch
        self.net.zero_grad()
        value, g = self._loss(self.net.forward(x), target)
        self.net.backward(g)
        return value, [g.copy() for g in self.net.grads]

    def _factors(self) -> list[float]:
        # a parameter below k reversal layers receives prod(-alpha_k) times its true gradient
        out, f = [], 1.0
        for layer in reversed(self.net.layers):
            if isinstance(layer, GradReversal):
                f *= -layer.alpha
            out.extend([f] * len(layer.params))
        return out[::-1]

    def check_objective(self, batch, index: int) -> float:
        return self._factors()[index] * self.loss(batch)


def grad_check(net, batch, epsilon: float = 1e-5) -> float:
    """Largest relative error between analytic and central-difference gradients.

    ``net`` needs ``parameters()``, ``loss(batch)`` and ``loss_and_grads(batch)``.
    When it also defines ``check_objective(batch, index)``, that scalar is the
    function differentiated for parameter ``index``; networks with gradient
    reversal use it because their heads follow their own loss, not the total.
    Relative error is ``|a - n| / max(|a| + |n|, 1e-6)``.
    """
    _, analytic = net.loss_and_grads(batch)
    params = net.parameters()
    objective = getattr(net, "check_objective", None)
    worst = 0.0
    for idx, (p, a) in enumerate(zip(params, analytic)):
        f = (lambda: objective(batch, idx)) if objective else (lambda: net.loss(batch))
        flat = p.reshape(-1)
        a_flat = a.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + epsilon
            up = f()
            flat[j] = orig - epsilon
            down = f()
            flat[j] = orig
            num = (up - down) / (2 * epsilon)
            if not (math.isfinite(up) and math.isfinite(down)):
                raise NonFiniteError("grad_check: non-finite loss")
            err = abs(a_flat[j] - num) / max(abs(a_flat[j]) + abs(num), 1e-6)
            worst = max(worst, err)
    return worst
