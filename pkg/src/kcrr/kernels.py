"""Gaussian kernel and Gram matrix construction.

The kernel is parametrized by a length scale gamma > 0:

    k(x, x') = exp(-||x - x'||^2 / gamma^2)

Squared distances are accumulated directly per coordinate pair rather than
through the expanded form ||x||^2 + ||x'||^2 - 2<x, x'>, which loses digits
to cancellation for nearby points.  The cost is an extra factor of d in
memory, handled by computing in row blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# cap per-block scratch at ~64 MB of float64
_BLOCK_BUDGET = 8_000_000


@dataclass(frozen=True)
class GaussianKernel:
    gamma: float

    def __post_init__(self) -> None:
        g = float(self.gamma)
        if not np.isfinite(g) or g <= 0.0:
            raise ValueError(f"kernel length scale must be positive and finite, got {self.gamma}")
        object.__setattr__(self, "gamma", g)


def _check_matrix(X, name: str, allow_empty: bool = False) -> np.ndarray:
    A = np.asarray(X, dtype=float)
    min_rows = 0 if allow_empty else 1
    if A.ndim != 2 or A.shape[0] < min_rows or A.shape[1] == 0:
        raise ValueError(f"{name} must be a nonempty 2-d array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite values")
    return A


def kernel_eval(kernel: GaussianKernel, x, x2) -> float:
    """k(x, x2) for two d-vectors."""
    a = np.asarray(x, dtype=float).ravel()
    b = np.asarray(x2, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.exp(-(d @ d) / kernel.gamma**2))


def cross_gram(kernel: GaussianKernel, X_train, X_query) -> np.ndarray:
    """Matrix of k(X_query[i], X_train[j]), shape (m, n)."""
    Xt = _check_matrix(X_train, "X_train")
    Xq = _check_matrix(X_query, "X_query", allow_empty=True)
    if Xt.shape[1] != Xq.shape[1]:
        raise ValueError(f"feature dimension mismatch: {Xt.shape[1]} vs {Xq.shape[1]}")
    n, d = Xt.shape
    m = Xq.shape[0]
    out = np.empty((m, n))
    block = max(1, _BLOCK_BUDGET // max(1, n * d))
    inv_g2 = 1.0 / kernel.gamma**2
    for lo in range(0, m, block):
        hi = min(m, lo + block)
        diff = Xq[lo:hi, None, :] - Xt[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        out[lo:hi] = np.exp(-d2 * inv_g2)
    return out


def gram(kernel: GaussianKernel, X) -> np.ndarray:
    """Symmetric PSD Gram matrix with unit diagonal."""
    return cross_gram(kernel, X, X)
