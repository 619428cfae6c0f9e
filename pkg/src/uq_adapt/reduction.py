"""Kernel PCA with inverse-squared-distance pre-images.

Data follow the column convention: a training matrix ``X`` is ``d x ns`` (one
sample per column) and reduced scores ``Z`` are ``k x ns``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

SNAP_TOL = 1e-12


@dataclass(frozen=True)
class KernelDescriptor:
    type: str
    beta: float | None = None
    b: float = 0.0
    p: int = 1

    def __post_init__(self):
        if self.type not in ("gaussian", "linear", "polynomial"):
            raise ValueError(f"unknown kernel type {self.type!r}")
        if self.type == "gaussian" and (self.beta is None or not self.beta > 0):
            raise ValueError("gaussian kernel needs beta > 0")
        if self.type == "polynomial":
            if int(self.p) != self.p or self.p < 1:
                raise ValueError("polynomial kernel needs an integer degree p >= 1")
            object.__setattr__(self, "p", int(self.p))
            object.__setattr__(self, "b", float(self.b))

    def __str__(self):
        if self.type == "gaussian":
            return f"gaussian(beta={self.beta:g})"
        if self.type == "polynomial":
            return f"polynomial(b={self.b:g}, p={self.p})"
        return "linear"


def gram(Xa: np.ndarray, Xb: np.ndarray, kernel: KernelDescriptor) -> np.ndarray:
    """Kernel matrix between the columns of ``Xa`` (d x na) and ``Xb`` (d x nb)."""
    inner = Xa.T @ Xb
    if kernel.type == "linear":
        return inner
    if kernel.type == "polynomial":
        return (inner + kernel.b) ** kernel.p
    sq = np.sum(Xa * Xa, axis=0)[:, None] + np.sum(Xb * Xb, axis=0)[None, :] - 2.0 * inner
    return np.exp(-kernel.beta * np.maximum(sq, 0.0))


def kernel_eval(xa, xb, kernel: KernelDescriptor) -> float:
    xa, xb = np.asarray(xa, dtype=float), np.asarray(xb, dtype=float)
    if xa.shape != xb.shape:
        raise ValueError("kernel arguments must have equal length")
    if kernel.type == "gaussian":
        diff = xa - xb
        return float(np.exp(-kernel.beta * np.dot(diff, diff)))
    inner = float(np.dot(xa, xb))
    return inner if kernel.type == "linear" else (inner + kernel.b) ** kernel.p


def center_gram(K: np.ndarray) -> np.ndarray:
    col = K.mean(axis=0)
    return K - col[None, :] - K.mean(axis=1)[:, None] + K.mean()


@dataclass(frozen=True)
class ReducedModel:
    kernel: KernelDescriptor
    X_train: np.ndarray     # d x ns
    K: np.ndarray           # ns x ns, uncentred
    col_means: np.ndarray   # ns
    grand_mean: float
    eigvals: np.ndarray     # all ns, descending
    alphas: np.ndarray      # ns x k, lambda_m * |alpha_m|^2 = 1
    k: int
    Z: np.ndarray           # k x ns training scores

    @property
    def ns(self) -> int:
        return self.X_train.shape[1]

    @property
    def d(self) -> int:
        return self.X_train.shape[0]

    @property
    def retained_fraction(self) -> float:
        pos = np.maximum(self.eigvals, 0.0)
        total = pos.sum()
        return float(pos[: self.k].sum() / total) if total > 0 else 1.0

    def flip(self, signs) -> "ReducedModel":
        """Same model with component ``m`` multiplied by ``signs[m]`` (each +1 or -1)."""
        s = np.asarray(signs, dtype=float)
        return replace(self, alphas=self.alphas * s[None, :], Z=self.Z * s[:, None])


def _fix_signs(V: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(V), axis=0)
    s = np.sign(V[idx, np.arange(V.shape[1])])
    s[s == 0] = 1.0
    return V * s


def retained_count(eigvals: np.ndarray, retain_fraction: float) -> int:
    pos = np.maximum(eigvals, 0.0)
    total = pos.sum()
    if total <= 0:
        return 1
    frac = np.cumsum(pos) / total
    k = int(np.searchsorted(frac, retain_fraction - 1e-12) + 1)
    return max(1, min(k, len(eigvals)))


def fit_kpca(X, kernel: KernelDescriptor, retain_fraction: float = 0.90,
             K: np.ndarray | None = None) -> ReducedModel:
    """Fit kernel PCA on the columns of ``X`` and keep the fewest components reaching ``retain_fraction``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise ValueError("kPCA needs a d x ns matrix with ns >= 2")
    if not np.all(np.isfinite(X)):
        raise ValueError("training outputs contain non-finite values")
    if K is None:
        K = gram(X, X, kernel)
    col = K.mean(axis=0)
    grand = float(K.mean())
    Kc = K - col[None, :] - col[:, None] + grand
    Kc = 0.5 * (Kc + Kc.T)

    lam, V = np.linalg.eigh(Kc)
    order = np.argsort(lam)[::-1]
    lam, V = lam[order], _fix_signs(V[:, order])

    k = retained_count(lam, retain_fraction)
    tiny = 1e-14 * max(float(np.abs(lam).max()), np.finfo(float).tiny)
    lam_k = lam[:k]
    good = lam_k > tiny
    root = np.where(good, np.sqrt(np.where(good, lam_k, 1.0)), 0.0)
    inv_root = np.where(good, 1.0 / np.where(good, root, 1.0), 0.0)
    alphas = V[:, :k] * inv_root[None, :]
    Z = (V[:, :k] * root[None, :]).T
    return ReducedModel(kernel, X.copy(), K, col, grand, lam, alphas, k, Z)


def project(model: ReducedModel, x) -> np.ndarray:
    """Forward map: ``d``-vector -> ``k``-vector, or ``d x n`` -> ``k x n``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    Xq = x[:, None] if single else x
    if Xq.shape[0] != model.d:
        raise ValueError(f"expected length-{model.d} inputs")
    Kq = gram(model.X_train, Xq, model.kernel)              # ns x n
    Kq_c = Kq - model.col_means[:, None] - Kq.mean(axis=0)[None, :] + model.grand_mean
    z = model.alphas.T @ Kq_c
    return z[:, 0] if single else z


def _preimage_weights(model: ReducedModel, zq: np.ndarray):
    d2 = np.zeros((zq.shape[1], model.ns))
    for m in range(model.k):
        d2 += (zq[m][:, None] - model.Z[m][None, :]) ** 2
    nearest = np.argmin(d2, axis=1)
    snap = d2[np.arange(len(nearest)), nearest] < SNAP_TOL**2
    with np.errstate(divide="ignore"):
        w = 1.0 / d2
    w[snap] = 0.0
    w[snap, nearest[snap]] = 1.0
    w /= w.sum(axis=1, keepdims=True)
    return w, np.where(snap, nearest, -1)


def preimage_weights(model: ReducedModel, z) -> np.ndarray:
    """Inverse-squared-distance weights (n x ns) of query scores ``z`` (k x n) against training scores."""
    return _preimage_weights(model, np.asarray(z, dtype=float).reshape(model.k, -1))[0]


def backward_map(model: ReducedModel, z, chunk: int = 4096) -> np.ndarray:
    """Pre-image: ``k``-vector -> ``d``-vector (or ``k x n`` -> ``d x n``).

    Scores within ``SNAP_TOL`` of a training score return that training output
    exactly; anything else is an inverse-squared-distance blend of training outputs.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    zq = z.reshape(model.k, -1)
    out = np.empty((model.d, zq.shape[1]))
    for lo in range(0, zq.shape[1], chunk):
        w, snapped = _preimage_weights(model, zq[:, lo:lo + chunk])
        blk = model.X_train @ w.T
        for r in np.flatnonzero(snapped >= 0):
            blk[:, r] = model.X_train[:, snapped[r]]
        out[:, lo:lo + chunk] = blk
    return out[:, 0] if single else out


def reconstruction_error(model: ReducedModel, X) -> np.ndarray:
    """Relative error ``|x - backward(project(x))| / |x|`` for each column of ``X``."""
    X = np.asarray(X, dtype=float)
    R = backward_map(model, project(model, X).reshape(model.k, -1))
    return np.linalg.norm(X - R, axis=0) / np.linalg.norm(X, axis=0)


def select_kernel(X, candidates: Sequence[KernelDescriptor], retain_fraction: float = 0.90,
                  seed: int = 0, holdout: float = 0.2) -> KernelDescriptor:
    """Pick the candidate with the lowest held-out reconstruction error (ties: smaller k, then order)."""
    if not candidates:
        raise ValueError("no candidate kernels given")
    if len(candidates) == 1:
        return candidates[0]
    X = np.asarray(X, dtype=float)
    ns = X.shape[1]
    perm = np.random.default_rng(seed).permutation(ns)
    n_test = max(1, int(round(holdout * ns)))
    test, train = perm[:n_test], perm[n_test:]
    if len(train) < 2:
        raise ValueError("too few samples for a train/test split")
    scored = []
    for pos, cand in enumerate(candidates):
        model = fit_kpca(X[:, train], cand, retain_fraction)
        err = float(np.mean(reconstruction_error(model, X[:, test])))
        scored.append((err, model.k, pos))
    return candidates[min(scored)[2]]
