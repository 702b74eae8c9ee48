"""IRLS fitting of kernel ridge regressors under robust losses.

The model is f(x) = sum_i a_i k(x, X_i) + b.  A fit minimizes the penalized
empirical risk

    J(a, b) = sum_i loss(y_i - f(X_i)) + lam * a' K a

by iteratively reweighted least squares: starting from unit weights, each
round solves the weighted ridge system for (a, b) and then refreshes the
weights as loss(r) / r^2 at the new residuals.  The robust objective is
tracked every round and the iterate with the lowest objective is returned,
so the returned model never does worse than the zero model.

The stationarity conditions of the weighted problem

    sum_i w_i (y_i - (Ka)_i - b)^2 + lam * a' K a

are K(Wr - lam*a) = 0 and 1'Wr = 0 with r = y - Ka - b.  Dropping the
leading K and substituting a = Wr / lam reduces them to the symmetric
positive definite bordered system

    (K + lam * W^{-1}) a + b 1 = y,     1' a = 0,

which is solved by one Cholesky factorization with two right-hand sides.
If factorization fails, a diagonal jitter escalates by factors of 10 from
1e-10 to 1e-6 before giving up with a SolverError.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .kernels import GaussianKernel, cross_gram, gram
from .losses import ClipBound, ScaledLoss, clip, eval_loss, irls_weight

_JITTER_LADDER = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


class SolverError(RuntimeError):
    """Numerical failure in the linear-algebra core.

    Carries a ``diagnostics`` dict (problem size, regularization, weight
    range, jitters tried) for post-mortem logging.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


@dataclass(frozen=True)
class SolverConfig:
    loss: ScaledLoss
    lam: float
    clip: ClipBound | None = None
    max_iters: int = 100
    rel_tol: float = 1e-8
    floor_eps: float = 1e-12
    jitter: float = 0.0

    def __post_init__(self) -> None:
        lam = float(self.lam)
        if not np.isfinite(lam) or lam <= 0.0:
            raise ValueError(f"regularization lam must be positive and finite, got {self.lam}")
        object.__setattr__(self, "lam", lam)
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not (np.isfinite(self.rel_tol) and self.rel_tol > 0.0):
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if not (np.isfinite(self.floor_eps) and self.floor_eps > 0.0):
            raise ValueError(f"floor_eps must be positive, got {self.floor_eps}")
        if not (np.isfinite(self.jitter) and self.jitter >= 0.0):
            raise ValueError(f"jitter must be nonnegative, got {self.jitter}")


@dataclass(frozen=True)
class IrlsState:
    """Weights after the last completed iteration plus the objective trace.

    ``objective_trace[0]`` is the objective of the zero model (a = 0, b = 0);
    entry t is the objective after the t-th weighted solve.
    """

    weights: np.ndarray
    objective_trace: tuple[float, ...]


@dataclass(frozen=True)
class FittedModel:
    """Immutable fit result; safe to share across threads.

    ``standardizer`` (if set) is applied around prediction: features are
    standardized before kernel evaluation and the clipped output is mapped
    back to original response units.  It must provide ``transform_features``
    and ``inverse_response``.
    """

    kernel: GaussianKernel
    X_train: np.ndarray
    a: np.ndarray
    b: float
    clip: ClipBound | None = None
    standardizer: object | None = None
    iterations_used: int = 0
    final_objective: float = float("nan")
    state: IrlsState | None = field(default=None, repr=False)


def _validate_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"X {X.shape} and y {y.shape} do not align")
    if y.shape[0] == 0:
        raise ValueError("empty training set")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("training data contains non-finite values")
    return X, y


def weighted_krr_solve(K, y, weights, lam, jitter: float = 0.0) -> tuple[np.ndarray, float]:
    """Solve the weighted ridge system; returns (a, b).

    ``K`` must be the symmetric PSD Gram matrix of the training inputs and
    ``weights`` strictly positive.  Raises SolverError when factorization
    fails at every jitter level.
    """
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    n = y.shape[0]
    if K.shape != (n, n):
        raise ValueError(f"K has shape {K.shape}, expected ({n}, {n})")
    if w.shape != (n,):
        raise ValueError(f"weights have shape {w.shape}, expected ({n},)")
    if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
        raise ValueError("weights must be positive and finite")
    lam = float(lam)
    if not np.isfinite(lam) or lam <= 0.0:
        raise ValueError(f"lam must be positive and finite, got {lam}")

    # w near underflow would put inf on the diagonal; such points are
    # effectively dropped from the fit (their a_i -> 0), so cap the entry
    diag = np.minimum(lam / w, 1e300)
    S = K + np.diag(diag)
    rhs = np.column_stack([y, np.ones(n)])

    ladder = [float(jitter)] + [j for j in _JITTER_LADDER if j > jitter]
    tried: list[float] = []
    failure = "factorization failed"
    for j in ladder:
        tried.append(j)
        Sj = S if j == 0.0 else S + j * np.eye(n)
        try:
            factor = cho_factor(Sj, lower=True, check_finite=False)
            sol = cho_solve(factor, rhs, check_finite=False)
        except LinAlgError as exc:
            failure = str(exc)
            continue
        u, v = sol[:, 0], sol[:, 1]
        denom = float(v.sum())
        if not np.all(np.isfinite(sol)) or denom <= 0.0:
            failure = "non-finite solution"
            continue
        b = float(u.sum()) / denom
        a = u - b * v
        if not (np.isfinite(b) and np.all(np.isfinite(a))):
            failure = "non-finite coefficients"
            continue
        return a, b

    raise SolverError(
        f"weighted solve failed after jitter escalation: {failure}",
        diagnostics={
            "n": n,
            "lam": lam,
            "min_weight": float(w.min()),
            "max_weight": float(w.max()),
            "jitters_tried": tried,
        },
    )


def robust_objective(K, y, a, b, loss: ScaledLoss, lam: float) -> float:
    """J(a, b) = sum_i loss(y_i - (Ka)_i - b) + lam * a' K a."""
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    a = np.asarray(a, dtype=float).ravel()
    Ka = K @ a
    r = y - Ka - float(b)
    return float(np.sum(eval_loss(loss, r)) + float(lam) * (a @ Ka))


def fit(
    config: SolverConfig,
    kernel: GaussianKernel,
    X,
    y,
    gram_matrix: np.ndarray | None = None,
) -> FittedModel:
    """Fit by IRLS and return the iterate with the lowest robust objective.

    ``gram_matrix`` may supply a precomputed ``gram(kernel, X)`` (callers
    running many fits on one split reuse it); it is trusted as-is.
    """
    X, y = _validate_xy(X, y)
    n = y.shape[0]
    if n < 2:
        raise ValueError("fit requires at least two observations")
    K = gram(kernel, X) if gram_matrix is None else np.asarray(gram_matrix, dtype=float)
    if K.shape != (n, n):
        raise ValueError(f"gram matrix has shape {K.shape}, expected ({n}, {n})")

    zero = np.zeros(n)
    best_a, best_b = zero, 0.0
    best_obj = float(np.sum(eval_loss(config.loss, y)))
    trace = [best_obj]
    w = np.ones(n)
    iterations = 0
    for _ in range(config.max_iters):
        a, b = weighted_krr_solve(K, y, w, config.lam, config.jitter)
        iterations += 1
        Ka = K @ a
        r = y - Ka - b
        obj = float(np.sum(eval_loss(config.loss, r)) + config.lam * (a @ Ka))
        trace.append(obj)
        if obj < best_obj:
            best_a, best_b, best_obj = a, b, obj
        prev = trace[-2]
        if abs(obj - prev) <= config.rel_tol * max(abs(prev), 1e-300):
            break
        w = irls_weight(config.loss, r, config.floor_eps)

    return FittedModel(
        kernel=kernel,
        X_train=X,
        a=best_a,
        b=best_b,
        clip=config.clip,
        standardizer=None,
        iterations_used=iterations,
        final_objective=best_obj,
        state=IrlsState(weights=w, objective_trace=tuple(trace)),
    )


def predict(model: FittedModel, X_query) -> np.ndarray:
    """Evaluate the fitted regressor, with clipping and de-standardization."""
    Xq = np.asarray(X_query, dtype=float)
    if Xq.ndim == 1:
        Xq = Xq.reshape(1, -1)
    std = model.standardizer
    if std is not None:
        Xq = std.transform_features(Xq)
    z = cross_gram(model.kernel, model.X_train, Xq) @ model.a + model.b
    if model.clip is not None:
        z = clip(z, model.clip)
    if std is not None:
        z = std.inverse_response(z)
    return z
