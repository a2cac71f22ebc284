"""Gaussian-copula stress comparator.

Market scenarios are ranked by total portfolio exposure and linked to the
systematic credit factor through a bivariate Gaussian copula with
correlation ``r``. Positive ``r`` is the wrong-way direction: high exposure
ranks are paired with low values of Z (bad credit states).

Cell masses are exact rectangle probabilities of the copula, so the
construction is deterministic; the CVaR of the resulting loss law is
compared with the worst-case bound.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .credit import CreditGrid, LossSurface
from .errors import ValidationError
from .portfolio import ExposureMatrix
from .risk import DiscreteDistribution, cvar

SIGN_CONVENTION = "r > 0 pairs high total exposure with low systematic factor Z (wrong-way)"

# 20-point Gauss-Legendre nodes/weights on [-1, 1], positive half
_GL_X = np.array([
    0.9931285991850949, 0.9639719272779138, 0.9122344282513259, 0.8391169718222188,
    0.7463319064601508, 0.6360536807265150, 0.5108670019508271, 0.3737060887154196,
    0.2277858511416451, 0.07652652113349733])
_GL_W = np.array([
    0.01761400713915212, 0.04060142980038694, 0.06267204833410906, 0.08327674157670475,
    0.1019301198172404, 0.1181945319615184, 0.1316886384491766, 0.1420961093183821,
    0.1491729864726037, 0.1527533871307259])
# nodes mapped to [0, 2] so that x/2 runs over (0, 1)
_X = np.concatenate([1.0 - _GL_X, 1.0 + _GL_X])
_W = np.concatenate([_GL_W, _GL_W])
_TWO_PI = 2.0 * np.pi


def _bvn_upper(h, k, r):
    """P(X > h, Y > k) for finite arrays h, k and scalar |r| < 1 (Genz's method)."""
    hk = h * k
    if abs(r) < 0.925:
        hs = 0.5 * (h * h + k * k)
        asr = 0.5 * np.arcsin(r)
        sn = np.sin(asr * _X)
        e = np.exp((sn[None, :] * hk[:, None] - hs[:, None]) / (1.0 - sn * sn)[None, :])
        return (e @ _W) * asr / _TWO_PI + special.ndtr(-h) * special.ndtr(-k)

    if r < 0:
        k = -k
        hk = -hk
    a2 = 1.0 - r * r
    a = np.sqrt(a2)
    bs = (h - k) ** 2
    c = (4.0 - hk) / 8.0
    d = (12.0 - hk) / 80.0
    asr = -(bs / a2 + hk) / 2.0
    with np.errstate(over="ignore", invalid="ignore"):
        bvn = np.where(asr > -100.0,
                       a * np.exp(asr) * (1.0 - c * (bs - a2) * (1.0 - d * bs) / 3.0 + c * d * a2 * a2),
                       0.0)
        b = np.sqrt(bs)
        tail = np.exp(-hk / 2.0) * np.sqrt(_TWO_PI) * special.ndtr(-b / a) * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0)
        bvn = bvn - np.where(hk > -100.0, tail, 0.0)

        half = a / 2.0
        xs = (half * _X) ** 2
        asr_q = -(bs[:, None] / xs[None, :] + hk[:, None]) / 2.0
        sp_ = 1.0 + c[:, None] * xs[None, :] * (1.0 + 5.0 * d[:, None] * xs[None, :])
        rs = np.sqrt(1.0 - xs)
        ep = np.exp(-(hk[:, None] / 2.0) * xs[None, :] / ((1.0 + rs) ** 2)[None, :]) / rs[None, :]
        terms = np.where(asr_q > -100.0, np.exp(asr_q) * (sp_ - ep), 0.0)
    bvn = (half * (terms @ _W) - bvn) / _TWO_PI
    if r > 0:
        return bvn + special.ndtr(-np.maximum(h, k))
    span = np.where(h < 0, special.ndtr(k) - special.ndtr(h), special.ndtr(-h) - special.ndtr(-k))
    return np.where(h >= k, -bvn, span - bvn)


def bivariate_normal_cdf(h, k, r):
    """P(X <= h, Y <= k) for standard normals with correlation ``r``.

    ``h`` and ``k`` broadcast against each other and may be infinite;
    ``r = +-1`` uses the degenerate (co/counter-monotone) limits.
    """
    if not -1.0 <= r <= 1.0:
        raise ValidationError(f"correlation must lie in [-1, 1], got {r!r}")
    h, k = np.broadcast_arrays(np.asarray(h, dtype=float), np.asarray(k, dtype=float))
    shape = h.shape
    h = h.ravel().copy()
    k = k.ravel().copy()
    if r == 1.0:
        out = special.ndtr(np.minimum(h, k))
    elif r == -1.0:
        out = np.clip(special.ndtr(h) - special.ndtr(-k), 0.0, None)
    elif r == 0.0:
        out = special.ndtr(h) * special.ndtr(k)
    else:
        out = np.empty_like(h)
        h_inf_hi, k_inf_hi = h == np.inf, k == np.inf
        zero = (h == -np.inf) | (k == -np.inf)
        out[h_inf_hi] = special.ndtr(k[h_inf_hi])
        out[k_inf_hi] = special.ndtr(h[k_inf_hi])
        out[zero] = 0.0
        fin = ~(h_inf_hi | k_inf_hi | zero)
        if fin.any():
            out[fin] = _bvn_upper(-h[fin], -k[fin], r)
        out = np.clip(out, 0.0, 1.0)
    out = out.reshape(shape)
    return float(out) if out.ndim == 0 else out


def sort_scenarios(x: ExposureMatrix, key: str = "total_exposure") -> np.ndarray:
    """Permutation putting scenarios in ascending order of ``key`` (stable on ties)."""
    if key != "total_exposure":
        raise ValidationError(f"unsupported sort key {key!r}")
    return np.argsort(x.totals(), kind="stable")


def _overlap(a_lo, a_hi, b_lo, b_hi):
    return np.clip(np.minimum(a_hi[:, None], b_hi[None, :]) - np.maximum(a_lo[:, None], b_lo[None, :]), 0.0, None)


def copula_coupling(sorted_p, grid: CreditGrid, r: float) -> np.ndarray:
    """Joint law of (exposure rank, credit cell) under a Gaussian copula.

    Rows follow ``sorted_p`` (scenarios already in ascending exposure order);
    columns are the credit cells of ``grid``.
    """
    if not -1.0 <= r <= 1.0:
        raise ValidationError(f"correlation must lie in [-1, 1], got {r!r}")
    p = np.asarray(sorted_p, dtype=float)
    q = grid.cell_probs
    u = np.concatenate(([0.0], np.cumsum(p)))
    u[-1] = 1.0
    v = np.concatenate(([0.0], np.cumsum(q)))
    v[-1] = 1.0
    if r == 0.0:
        return np.outer(p, q)
    if r == 1.0:
        # exposure uniform U = 1 - Phi(Z)
        return _overlap(u[:-1], u[1:], 1.0 - v[1:], 1.0 - v[:-1])
    if r == -1.0:
        return _overlap(u[:-1], u[1:], v[:-1], v[1:])

    with np.errstate(divide="ignore"):
        x_edges = special.ndtri(u)
    z_edges = np.concatenate(([-np.inf], grid.interior_points, [np.inf]))
    F = bivariate_normal_cdf(x_edges[:, None], z_edges[None, :], -r)
    # pin the edges to the exact marginals so rows and columns telescope
    F[:, 0] = 0.0
    F[0, :] = 0.0
    F[:, -1] = u
    F[-1, :] = v
    cells = F[1:, 1:] - F[:-1, 1:] - F[1:, :-1] + F[:-1, :-1]
    return np.clip(cells, 0.0, None)


def coupling_in_scenario_order(sorted_coupling, order):
    """Undo the exposure sort: row i of the sorted coupling is scenario ``order[i]``."""
    out = np.empty_like(sorted_coupling)
    out[np.asarray(order)] = sorted_coupling
    return out


@dataclass(frozen=True)
class RatioCurve:
    correlations: np.ndarray
    ratio: np.ndarray
    comparator_cvar: np.ndarray
    wcc_cvar: float
    alpha: float
    loss_kind: str = "systematic"

    @property
    def min_ratio(self) -> float:
        return float(np.min(self.ratio))

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratio))

    @property
    def argmin(self) -> float:
        return float(self.correlations[int(np.argmin(self.ratio))])

    @property
    def argmax(self) -> float:
        return float(self.correlations[int(np.argmax(self.ratio))])


def comparator_coupling(x: ExposureMatrix, grid: CreditGrid, r: float, order=None) -> np.ndarray:
    order = sort_scenarios(x) if order is None else np.asarray(order)
    return coupling_in_scenario_order(copula_coupling(x.probs[order], grid, r), order)


def ratio_curve(L: LossSurface, wcc_cvar: float, alpha: float, r_grid, grid: CreditGrid, order,
                loss_kind: str = "systematic", evaluate=None) -> RatioCurve:
    """Comparator CVaR over worst-case CVaR for each copula correlation in ``r_grid``.

    ``order`` is the exposure sort permutation. ``evaluate(coupling)`` returns
    the comparator CVaR for an ``M x N`` coupling in scenario order; the
    default is the exact CVaR of the systematic loss law.
    """
    if not wcc_cvar > 0:
        raise ValidationError("worst-case CVaR must be positive to form a ratio")
    order = np.asarray(order)
    p_sorted = L.market_probs[order]
    if evaluate is None:
        def evaluate(psi):
            return cvar(DiscreteDistribution.from_coupling(L.values, psi), alpha)
    rs = np.asarray(list(r_grid), dtype=float)
    values = np.array([evaluate(coupling_in_scenario_order(copula_coupling(p_sorted, grid, r), order))
                       for r in rs])
    return RatioCurve(correlations=rs, ratio=values / wcc_cvar, comparator_cvar=values,
                      wcc_cvar=float(wcc_cvar), alpha=alpha, loss_kind=loss_kind)
