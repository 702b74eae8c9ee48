"""Robust losses, their IRLS weights, and output clipping.

Residual r = y - f(x).  With scale sigma > 0:

    cauchy(r)      = sigma^2 * log(1 + r^2 / sigma^2)
    correntropy(r) = sigma^2 * (1 - exp(-r^2 / sigma^2))
    absolute(r)    = |r|                      (no scale)
    huber(r)       = r^2 / 2                  if |r| <= sigma
                     sigma*|r| - sigma^2 / 2  otherwise

All four are even, nonnegative and zero only at r = 0.  The huber branch
constant is chosen so the loss is continuous at |r| = sigma.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

_TINY = np.finfo(float).tiny


class LossKind(Enum):
    CAUCHY = "cauchy"
    CORRENTROPY = "correntropy"
    ABSOLUTE = "absolute"
    HUBER = "huber"


@dataclass(frozen=True)
class ScaledLoss:
    """A loss kind together with its scale.

    ``sigma`` must be a positive finite float, except for the absolute loss
    which takes no scale (``sigma`` must be left as None).
    """

    kind: LossKind
    sigma: float | None = None

    def __post_init__(self) -> None:
        if self.kind is LossKind.ABSOLUTE:
            if self.sigma is not None:
                raise ValueError("absolute loss takes no scale")
            return
        if self.sigma is None:
            raise ValueError(f"{self.kind.value} loss requires a scale")
        s = float(self.sigma)
        if not np.isfinite(s) or s <= 0.0:
            raise ValueError(f"loss scale must be positive and finite, got {self.sigma}")
        object.__setattr__(self, "sigma", s)


@dataclass(frozen=True)
class ClipBound:
    """Symmetric clipping bound: values are projected onto [-m, m]."""

    m: float

    def __post_init__(self) -> None:
        m = float(self.m)
        if not np.isfinite(m) or m <= 0.0:
            raise ValueError(f"clip bound must be positive and finite, got {self.m}")
        object.__setattr__(self, "m", m)


def _as_residuals(residual) -> tuple[np.ndarray, bool]:
    r = np.asarray(residual, dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("residuals must be finite")
    return r, r.ndim == 0


def eval_loss(loss: ScaledLoss, residual):
    """Evaluate the loss elementwise; scalar in, scalar out."""
    r, scalar = _as_residuals(residual)
    if loss.kind is LossKind.ABSOLUTE:
        out = np.abs(r)
    elif loss.kind is LossKind.CAUCHY:
        s2 = loss.sigma * loss.sigma
        out = s2 * np.log1p(r * r / s2)
    elif loss.kind is LossKind.CORRENTROPY:
        s2 = loss.sigma * loss.sigma
        out = s2 * -np.expm1(-(r * r) / s2)
    else:
        s = loss.sigma
        a = np.abs(r)
        out = np.where(a <= s, 0.5 * r * r, s * a - 0.5 * s * s)
    return float(out) if scalar else out


def irls_weight(loss: ScaledLoss, residual, floor_eps: float = 1e-12):
    """Weight eval_loss(r) / r^2, with analytic limits below |r| < floor_eps.

    The limits as r -> 0 are 1 (cauchy, correntropy), 1/2 (huber) and
    1/floor_eps (absolute, whose true weight diverges).  Weights are always
    positive and finite; cauchy and correntropy weights lie in (0, 1].
    """
    if not (np.isfinite(floor_eps) and floor_eps > 0.0):
        raise ValueError(f"floor_eps must be positive, got {floor_eps}")
    r, scalar = _as_residuals(residual)
    a = np.abs(r)
    small = a < floor_eps
    # the weight is even in r; clamp the magnitude away from 0 (limits are
    # patched below) and away from sqrt(float max) so r^2 cannot overflow
    a_safe = np.clip(a, floor_eps, 1e150)
    if loss.kind is LossKind.ABSOLUTE:
        w = 1.0 / a_safe
        limit = 1.0 / floor_eps
    else:
        w = eval_loss(loss, a_safe) / (a_safe * a_safe)
        limit = 0.5 if loss.kind is LossKind.HUBER else 1.0
    out = np.where(small, limit, w)
    # loss underflow at huge residuals must not produce a zero weight
    out = np.maximum(out, _TINY)
    return float(out) if scalar else out


def clip(value, bound: ClipBound):
    """Project value(s) onto [-bound.m, bound.m]."""
    v = np.asarray(value, dtype=float)
    out = np.clip(v, -bound.m, bound.m)
    return float(out) if v.ndim == 0 else out
