"""Non-adversarial comparison arms: PCA compression and the plain autoencoder."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .corpus import Corpus
from .model import TrainConfig, fit_encoder


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, D), orthonormal rows
    eigenvalues: np.ndarray  # (k,), non-increasing

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.components.shape[1]


def pca_fit(X, k: int) -> PcaModel:
    """Top-``k`` principal axes from the eigendecomposition of the covariance.

    When there are fewer rows than dimensions the (n x n) Gram matrix is
    decomposed instead and its eigenvectors mapped back, which yields the
    same axes at a fraction of the cost.  Each component is signed so that
    its largest-magnitude entry is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError(f"pca_fit: need at least 2 rows, got shape {X.shape}")
    n, d = X.shape
    if not 1 <= k <= min(n - 1, d):
        raise ValueError(f"pca_fit: k={k} outside [1, {min(n - 1, d)}]")
    mean = X.mean(axis=0)
    Xc = X - mean
    if not np.any(Xc):
        raise ValueError("pca_fit: zero variance (all rows identical)")

    if d <= n:
        vals, vecs = np.linalg.eigh(Xc.T @ Xc / (n - 1))
        order = np.argsort(vals)[::-1][:k]
        vals, comps = vals[order], vecs[:, order].T
    else:
        vals, vecs = np.linalg.eigh(Xc @ Xc.T / (n - 1))
        order = np.argsort(vals)[::-1][:k]
        vals, u = vals[order], vecs[:, order]
        comps = (Xc.T @ u).T
        norms = np.linalg.norm(comps, axis=1)
        # null directions of the Gram matrix carry no variance; complete them
        # with an orthonormal basis of the remaining subspace
        good = norms > 1e-12 * max(norms.max(), 1.0)
        comps[good] /= norms[good, None]
        if not np.all(good):
            comps = _complete_basis(comps, good)
    vals = np.clip(vals, 0.0, None)
    idx = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(k), idx])
    signs[signs == 0] = 1.0
    comps = comps * signs[:, None]
    return PcaModel(mean, comps, vals)


def _complete_basis(comps, good):
    k, d = comps.shape
    kept = comps[good]
    q, _ = np.linalg.qr(np.vstack([kept, np.eye(d)]).T)
    fill = q[:, len(kept):len(kept) + (k - len(kept))].T
    out = comps.copy()
    out[~good] = fill
    return out


def _check_width(model: PcaModel, X):
    if X.shape[-1] != model.dim:
        raise ValueError(f"width {X.shape[-1]} does not match PCA dim {model.dim}")


def pca_transform(model: PcaModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _check_width(model, X)
    return (X - model.mean) @ model.components.T


def pca_reconstruct(model: PcaModel, scores) -> np.ndarray:
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    if scores.shape[-1] != model.k:
        raise ValueError(f"scores width {scores.shape[-1]} does not match k={model.k}")
    return scores @ model.components + model.mean


def plain_ae(corpus: Corpus, rows, config: TrainConfig):
    """The alpha = 0 autoencoder baseline; same seed gives the same parameters."""
    return fit_encoder(corpus, rows, replace(config, alpha=0.0))
