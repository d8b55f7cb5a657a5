"""Permanent price impact: post-trade price, marginal impact, liquidation value."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class ImpactKind(str, enum.Enum):
    EXPONENTIAL = "exp"
    LINEAR = "linear"
    NONE = "none"


class InvalidTradeSize(ValueError):
    pass


@dataclass(frozen=True)
class ImpactModel:
    kind: ImpactKind
    lam: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ImpactKind(self.kind))
        if self.lam < 0:
            raise ValueError(f"impact intensity must be non-negative, got {self.lam}")

    @classmethod
    def exponential(cls, lam):
        return cls(ImpactKind.EXPONENTIAL, lam)

    @classmethod
    def linear(cls, lam):
        return cls(ImpactKind.LINEAR, lam)

    @classmethod
    def none(cls):
        return cls(ImpactKind.NONE, 0.0)

    @property
    def trivial(self) -> bool:
        return self.kind is ImpactKind.NONE or self.lam == 0.0

    def alpha(self, zeta, p):
        return post_trade_price(self, zeta, p)

    def gamma(self, p):
        return marginal_impact(self, p)


def _scalar(out):
    return out[()] if np.ndim(out) == 0 else out


def post_trade_price(im: ImpactModel, zeta, p, *, return_clamped: bool = False):
    """Price after selling ``zeta`` shares at pre-trade price ``p``.

    Linear impact is clamped at zero. With ``return_clamped=True`` a boolean
    (array) marking clamped entries is returned alongside the price.
    """
    zeta = np.asarray(zeta, dtype=float)
    p = np.asarray(p, dtype=float)
    if im.kind is ImpactKind.EXPONENTIAL:
        out = p * np.exp(-im.lam * zeta)
        clamped = np.zeros(out.shape, dtype=bool)
    elif im.kind is ImpactKind.LINEAR:
        raw = p - im.lam * zeta
        clamped = raw < 0
        out = np.where(clamped, 0.0, raw)
    else:
        out = np.broadcast_to(p, np.broadcast(zeta, p).shape).astype(float)
        clamped = np.zeros(out.shape, dtype=bool)
    if return_clamped:
        return _scalar(out), _scalar(clamped)
    return _scalar(out)


def impulse_transition(im: ImpactModel, y, zeta):
    """State after an instantaneous sale: ``(x - zeta, alpha(zeta, p))``."""
    x, p = y
    if zeta < 0 or zeta > x:
        raise InvalidTradeSize(f"trade size {zeta} outside [0, {x}]")
    return x - zeta, float(post_trade_price(im, zeta, p))


def marginal_impact(im: ImpactModel, p):
    p = np.asarray(p, dtype=float)
    if im.kind is ImpactKind.EXPONENTIAL:
        out = im.lam * p
    elif im.kind is ImpactKind.LINEAR:
        out = np.full_like(p, im.lam)
    else:
        out = np.zeros_like(p)
    return _scalar(out)


def liquidation_value(im: ImpactModel, x, p):
    """Revenue of splitting ``x`` shares into infinitesimal immediate sales.

    This is the integral of ``alpha(s, p)`` over ``s`` in ``[0, x]``.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    lam = im.lam
    if im.trivial:
        out = x * p
    elif im.kind is ImpactKind.EXPONENTIAL:
        out = p * -np.expm1(-lam * x) / lam
    else:
        # integrand p - lam*s is clamped at zero beyond s = p/lam
        s = np.minimum(x, p / lam)
        out = p * s - 0.5 * lam * s * s
    return _scalar(out)
