"""Independent reference computations used by several test files.

Nothing here imports the SMO solver; each routine recomputes its quantity
from first principles so a shared bug cannot make both sides agree.
"""

import math

import numpy as np


def rbf(u, v, gamma):
    return math.exp(-gamma * sum((a - b) ** 2 for a, b in zip(u, v)))


def kernel_sum_decision(sv, coef, bias, gamma, x):
    """Decision value by an explicit Python loop over support vectors."""
    return sum(c * rbf(s, x, gamma) for s, c in zip(sv, coef)) + bias


def toy_2d(n=20, seed=0):
    """Two overlapping Gaussian blobs in the plane with labels -1/+1."""
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.r_[rng.normal([-1.0, -0.5], 0.9, (half, 2)), rng.normal([1.0, 0.5], 0.9, (n - half, 2))]
    y = np.r_[-np.ones(half), np.ones(n - half)]
    return X, y


def dual_objective(a, y, Q):
    return float(a.sum() - 0.5 * a @ Q @ a)


def _project(v, y, C):
    """Euclidean projection onto {0 <= a <= C, y.a = 0}.

    With a = clip(v - lam * y, 0, C), the sum y.a is piecewise linear and
    non-increasing in lam, with kinks where some a_i touches 0 or C.  Evaluate
    it at every kink and interpolate linearly across the sign change.
    """
    kinks = np.sort(np.r_[v * y, (v - C) * y])
    kinks = np.r_[kinks[0] - 1.0, kinks, kinks[-1] + 1.0]
    s = (y * np.clip(v[None, :] - kinks[:, None] * y[None, :], 0.0, C)).sum(axis=1)
    k = int(np.flatnonzero(s >= 0)[-1])
    if k == len(kinks) - 1 or s[k] == 0:
        lam = kinks[k]
    else:
        lam = kinks[k] + s[k] / (s[k] - s[k + 1]) * (kinks[k + 1] - kinks[k])
    return np.clip(v - lam * y, 0.0, C)


def projected_gradient_dual(X, y, C, gamma, iters=20000):
    """Maximise the SVM dual by accelerated projected gradient ascent.

    Returns (alphas, bias, Q).  The bias is the midpoint of the interval allowed
    by the KKT conditions, averaged over margin vectors when there are any.
    """
    X, y = np.asarray(X, float), np.asarray(y, float)
    sq = np.sum(X * X, axis=1)
    K = np.exp(-gamma * np.maximum(sq[:, None] + sq[None, :] - 2 * X @ X.T, 0.0))
    Q = (y[:, None] * y[None, :]) * K
    step = 1.0 / np.linalg.eigvalsh(Q).max()
    a = np.zeros(len(y))
    prev, t = a.copy(), 1.0
    for _ in range(iters):
        t_next = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        v = a + ((t - 1) / t_next) * (a - prev)
        prev = a
        a = _project(v + step * (1.0 - Q @ v), y, C)
        t = t_next
    grad = y * (1.0 - Q @ a)  # = y_i - f_i without bias, times y_i^2
    free = (a > 1e-6 * C) & (a < C * (1 - 1e-6))
    if free.any():
        b = float(np.mean(grad[free]))
    else:
        b = 0.0
    return a, b, Q


def kkt_violation(a, y, f, C):
    """Largest KKT violation given decision values f (with bias) on the training set."""
    m = y * f
    worst = 0.0
    for ai, mi in zip(a, m):
        if ai <= 1e-12:
            worst = max(worst, 1.0 - mi)
        elif ai >= C - 1e-12:
            worst = max(worst, mi - 1.0)
        else:
            worst = max(worst, abs(mi - 1.0))
    return worst


def explicit_encoder_grads(model, X, labels, alpha):
    """dL_AE/dtheta_e - alpha * sum_h dL_h/dtheta_e, each term from its own plain backward pass.

    Uses only the encoder, decoder and head stacks, never the reversal layer,
    so it assembles the min-max gradient independently of the GRL wiring.
    """
    from peec import nn
    from peec.model import HEADS

    total = plain_ae_encoder_grads(model, X)
    z = model.encoder.forward(X)
    for h in HEADS:
        model.zero_grad()
        _, g = nn.softmax_xent(model.heads[h].forward(z), labels[h])
        model.encoder.backward(model.heads[h].backward(g))
        total = [t - alpha * g for t, g in zip(total, model.encoder.grads)]
    return total


def plain_ae_encoder_grads(model, X):
    """Encoder gradient of the reconstruction loss alone, heads untouched."""
    from peec import nn

    z = model.encoder.forward(X)
    model.zero_grad()
    _, g = nn.mse_loss(X, model.decoder.forward(z))
    model.encoder.backward(model.decoder.backward(g))
    return [g.copy() for g in model.encoder.grads]
