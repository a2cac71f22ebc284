"""Discrete VaR / CVaR, the CVaR tilting representation and capital ratios.

All losses are in currency units; ``alpha`` is the confidence level, so the
tail that CVaR averages over has probability ``1 - alpha``.

CVaR is evaluated by two separate routes that must agree on every discrete
law:

* :func:`cvar` integrates the lower quantile function over ``(alpha, 1)``.
* :func:`cvar_by_tilting` maximises ``E_G[L]`` over reweightings ``G`` whose
  density against the base law is at most ``1 / (1 - alpha)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

_SUM_TOL = 1e-9
# cumulative-probability slack when locating a quantile step
_CDF_TOL = 1e-12

EC_MODES = ("cvar_minus_el", "var_minus_el", "cvar", "var")


@dataclass(frozen=True)
class DiscreteDistribution:
    outcomes: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.outcomes, dtype=float).ravel()
        p = np.ascontiguousarray(self.probs, dtype=float).ravel()
        if x.shape != p.shape or x.size == 0:
            raise ValidationError("outcomes and probs must be non-empty and the same length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
            raise ValidationError("outcomes and probs must be finite")
        if np.any(p < 0):
            raise ValidationError("probs must be nonnegative")
        s = math.fsum(p)
        if abs(s - 1.0) > _SUM_TOL:
            raise ValidationError(f"probs sum to {s!r}")
        if s != 1.0:
            p = p / s
        x.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "outcomes", x)
        object.__setattr__(self, "probs", p)

    @classmethod
    def empirical(cls, samples) -> "DiscreteDistribution":
        samples = np.asarray(samples, dtype=float).ravel()
        return cls(samples, np.full(samples.size, 1.0 / samples.size))

    @classmethod
    def from_coupling(cls, losses, joint) -> "DiscreteDistribution":
        """Flatten an ``M x N`` loss matrix under an ``M x N`` joint law."""
        losses = np.asarray(losses, dtype=float)
        joint = np.asarray(joint, dtype=float)
        if losses.shape != joint.shape:
            raise ValidationError(f"loss shape {losses.shape} != coupling shape {joint.shape}")
        keep = joint.ravel() > 0
        return cls(losses.ravel()[keep], joint.ravel()[keep])

    def mean(self) -> float:
        return float(np.dot(self.outcomes, self.probs))


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha!r}")


def _ascending(d):
    order = np.argsort(d.outcomes, kind="stable")
    x = d.outcomes[order]
    cdf = np.cumsum(d.probs[order])
    cdf[-1] = 1.0
    return x, cdf


def var(d: DiscreteDistribution, alpha: float) -> float:
    """Lower alpha-quantile: smallest outcome x with P(L <= x) >= alpha."""
    _check_alpha(alpha)
    x, cdf = _ascending(d)
    i = int(np.searchsorted(cdf, alpha - _CDF_TOL, side="left"))
    return float(x[min(i, x.size - 1)])


def cvar(d: DiscreteDistribution, alpha: float) -> float:
    """CVaR as the normalised integral of the quantile function over (alpha, 1).

    The quantile function of a discrete law is a step function equal to the
    j-th smallest outcome on ``(F_{j-1}, F_j]``, so the integral is a finite
    sum of outcome times the length of each step inside ``(alpha, 1]``.
    """
    _check_alpha(alpha)
    x, cdf = _ascending(d)
    prev = np.concatenate(([0.0], cdf[:-1]))
    width = np.clip(cdf - np.maximum(prev, alpha), 0.0, None)
    return float(np.dot(x, width) / (1.0 - alpha))


def cvar_by_tilting(d: DiscreteDistribution, alpha: float):
    """Return ``(value, weights)`` of the optimal bounded-density tilt.

    Atoms are visited from the largest outcome down; each receives as much
    tilted mass as the density cap ``probs / (1 - alpha)`` allows until the
    tilted law carries total mass 1.
    """
    _check_alpha(alpha)
    cap = d.probs / (1.0 - alpha)
    order = np.argsort(-d.outcomes, kind="stable")
    filled_before = np.concatenate(([0.0], np.cumsum(cap[order])[:-1]))
    g_sorted = np.clip(np.minimum(cap[order], 1.0 - filled_before), 0.0, None)
    g = np.empty_like(g_sorted)
    g[order] = g_sorted
    return float(np.dot(d.outcomes, g)), g


def economic_capital(d: DiscreteDistribution, alpha: float, mode: str = "cvar_minus_el") -> float:
    if mode not in EC_MODES:
        raise ValidationError(f"unknown economic-capital mode {mode!r}; expected one of {EC_MODES}")
    tail = cvar(d, alpha) if mode.startswith("cvar") else var(d, alpha)
    if mode.endswith("_minus_el"):
        return tail - d.mean()
    return tail


def alpha_multiplier(ec_total: float, ec_epe: float) -> float:
    """Ratio of full-simulation capital to constant-EPE capital.

    The regulatory floor (1.2) and default (1.4) are not applied here.
    """
    if not ec_epe > 0:
        raise ValidationError(f"EPE capital must be positive, got {ec_epe!r}")
    return ec_total / ec_epe


REGULATORY_ALPHA = {"default": 1.4, "floor": 1.2}
