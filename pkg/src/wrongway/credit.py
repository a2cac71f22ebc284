"""Single-factor Gaussian copula credit model.

Counterparty k defaults when its creditworthiness index

    cwi_k = sqrt(rho_k) * Z + sqrt(1 - rho_k) * eps_k

falls to or below ``norm_inv(pd_k)``. Conditional on the systematic factor
``Z = z`` the default probability is ``norm_cdf((norm_inv(pd) - sqrt(rho) z) /
sqrt(1 - rho))``; averaging losses over the idiosyncratic ``eps`` gives the
systematic loss surface used by the worst-case LP.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from . import _prob
from .errors import ValidationError
from .portfolio import Counterparty, ExposureMatrix, align

_INV_SQRT_2PI = 0.3989422804014327

# Rational approximations for the normal CDF in three ranges of |x| (Cody's
# minimax coefficients): central, intermediate up to sqrt(32), and tail.
_A = np.array([2.2352520354606839287, 161.02823106855587881, 1067.6894854603709582,
               18154.981253343561249, 0.065682337918207449113])
_B = np.array([47.20258190468824187, 976.09855173777669322, 10260.932208618978205,
               45507.789335026729956])
_C = np.array([0.39894151208813466764, 8.8831497943883759412, 93.506656132177855979,
               597.27027639480026226, 2494.5375852903726711, 6848.1904505362823326,
               11602.651437647350124, 9842.7148383839780218, 1.0765576773720192317e-8])
_D = np.array([22.266688044328115691, 235.38790178262499861, 1519.377599407554805,
               6485.558298266760755, 18615.571640885098091, 34900.952721145977266,
               38912.003286093271411, 19685.429676859990727])
_P = np.array([0.21589853405795699, 0.1274011611602473639, 0.022235277870649807,
               0.001421619193227893466, 2.9112874951168792e-5, 0.02307344176494017303])
_Q = np.array([1.28426009614491121, 0.468238212480865118, 0.0659881378689285515,
               0.00378239633202758244, 7.29751555083966205e-5])
_SQRT32 = 5.656854249492380195206754896838


def _gauss_tail(y, ratio):
    """``exp(-y^2 / 2) * ratio`` with y^2 split so the exponent keeps full precision."""
    head = np.trunc(y * 16.0) / 16.0
    rest = (y - head) * (y + head)
    return np.exp(-head * head * 0.5) * np.exp(-rest * 0.5) * ratio


def _phi_both(x):
    """Return ``(P(X <= x), P(X > x))`` with small relative error in both tails."""
    x = np.asarray(x, dtype=float)
    y = np.abs(x)
    lower = np.full(x.shape, np.nan)
    upper = np.full(x.shape, np.nan)

    mid = y <= 0.67448975
    xs = x[mid]
    xsq = xs * xs
    num, den = _A[4] * xsq, xsq
    for i in range(3):
        num = (num + _A[i]) * xsq
        den = (den + _B[i]) * xsq
    t = xs * (num + _A[3]) / (den + _B[3])
    lower[mid] = 0.5 + t
    upper[mid] = 0.5 - t

    inter = ~mid & (y <= _SQRT32)
    yi = y[inter]
    num, den = _C[8] * yi, yi
    for i in range(7):
        num = (num + _C[i]) * yi
        den = (den + _D[i]) * yi
    small_inter = _gauss_tail(yi, (num + _C[7]) / (den + _D[7]))

    far = y > _SQRT32
    yf = y[far]
    with np.errstate(over="ignore", invalid="ignore"):
        r = 1.0 / (yf * yf)
        num, den = _P[5] * r, r
        for i in range(4):
            num = (num + _P[i]) * r
            den = (den + _Q[i]) * r
        t = (_INV_SQRT_2PI - r * (num + _P[4]) / (den + _Q[4])) / yf
        small_far = np.where(np.isinf(yf), 0.0, _gauss_tail(yf, t))

    for mask, small in ((inter, small_inter), (far, small_far)):
        neg = x[mask] < 0
        lower[mask] = np.where(neg, small, 1.0 - small)
        upper[mask] = np.where(neg, 1.0 - small, small)
    return lower, upper


def norm_cdf(x):
    """Standard normal CDF; scalar in, float out."""
    out = _phi_both(x)[0]
    return float(out) if out.ndim == 0 else out


def norm_sf(x):
    out = _phi_both(x)[1]
    return float(out) if out.ndim == 0 else out


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    out = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return float(out) if out.ndim == 0 else out


def norm_inv(p):
    """Inverse standard normal CDF; raises for p outside (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any(~(arr > 0) | ~(arr < 1)):
        raise ValidationError("norm_inv is defined only on the open interval (0, 1)")
    out = special.ndtri(arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CreditGrid:
    """Partition of the real line into cells for the systematic factor Z.

    ``lower[n]`` / ``upper[n]`` are the cell boundaries (the outer ones are
    infinite); ``cell_reps[n]`` is E[Z | Z in cell n].
    """

    interior_points: np.ndarray
    cell_probs: np.ndarray
    cell_reps: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.cell_probs.size

    @property
    def lower(self) -> np.ndarray:
        return np.concatenate(([-np.inf], self.interior_points))

    @property
    def upper(self) -> np.ndarray:
        return np.concatenate((self.interior_points, [np.inf]))


def build_credit_grid(n_cells: int, z_lo: float = -5.0, z_hi: float = 5.0) -> CreditGrid:
    """Split [z_lo, z_hi] into ``n_cells`` equal cells and push the outer edges to +-inf."""
    if int(n_cells) != n_cells or n_cells < 1:
        raise ValidationError(f"n_cells must be a positive integer, got {n_cells!r}")
    if not z_lo < z_hi:
        raise ValidationError(f"need z_lo < z_hi, got {z_lo!r}, {z_hi!r}")
    n_cells = int(n_cells)
    inner = np.linspace(z_lo, z_hi, n_cells + 1)[1:-1]
    lo = np.concatenate(([-np.inf], inner))
    hi = np.concatenate((inner, [np.inf]))
    # each cell's mass from whichever tail keeps the subtraction well conditioned
    right = lo >= 0
    q = np.where(right, norm_sf(lo) - norm_sf(hi), norm_cdf(hi) - norm_cdf(lo))
    if np.any(q <= 0):
        raise ValidationError("grid has a cell with zero probability in double precision; narrow [z_lo, z_hi]")
    reps = (norm_pdf(lo) - norm_pdf(hi)) / q
    q = _prob.normalize_exact(q)
    for a in (inner, q, reps):
        a.setflags(write=False)
    return CreditGrid(interior_points=inner, cell_probs=q, cell_reps=reps)


def _cp_arrays(cps):
    pd = np.array([c.pd for c in cps], dtype=float)
    rho = np.array([c.rho for c in cps], dtype=float)
    lgd = np.array([c.lgd for c in cps], dtype=float)
    return pd, rho, lgd


def conditional_pd_matrix(pd, rho, z):
    """``K x len(z)`` matrix of default probabilities given Z = z."""
    pd = np.asarray(pd, dtype=float)[:, None]
    rho = np.asarray(rho, dtype=float)[:, None]
    z = np.asarray(z, dtype=float)[None, :]
    return norm_cdf((special.ndtri(pd) - np.sqrt(rho) * z) / np.sqrt(1.0 - rho))


def conditional_pd(cp: Counterparty, z):
    out = conditional_pd_matrix([cp.pd], [cp.rho], np.atleast_1d(z))[0]
    return float(out[0]) if np.ndim(z) == 0 else out


@dataclass(frozen=True)
class LossSurface:
    """Systematic losses ``values[m, n]`` with their two marginals."""

    values: np.ndarray
    market_probs: np.ndarray
    credit_probs: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape != (len(self.market_probs), len(self.credit_probs)):
            raise ValidationError(
                f"loss matrix {v.shape} inconsistent with marginals "
                f"({len(self.market_probs)}, {len(self.credit_probs)})")
        if not np.all(np.isfinite(v)):
            raise ValidationError("loss surface has non-finite entries")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "market_probs", np.asarray(self.market_probs, dtype=float))
        object.__setattr__(self, "credit_probs", np.asarray(self.credit_probs, dtype=float))

    @property
    def shape(self):
        return self.values.shape


def systematic_loss_surface(x: ExposureMatrix, cps, grid: CreditGrid) -> LossSurface:
    """``L[m, n] = sum_k lgd_k * y[k, m] * P(default_k | Z = rep_n)``."""
    cps = align(x, cps)
    pd, rho, lgd = _cp_arrays(cps)
    cond = conditional_pd_matrix(pd, rho, grid.cell_reps)
    weighted = x.exposures * lgd[:, None]
    return LossSurface(weighted.T @ cond, x.probs, grid.cell_probs)


def systematic_loss_at(x: ExposureMatrix, cps, m, z):
    """Systematic loss for scenario indices ``m`` at factor values ``z`` (same length)."""
    cps = align(x, cps)
    pd, rho, lgd = _cp_arrays(cps)
    m = np.asarray(m)
    z = np.asarray(z, dtype=float)
    cond = conditional_pd_matrix(pd, rho, z)
    return np.einsum("kj,kj->j", x.exposures[:, m] * lgd[:, None], cond)


def cwi(z, eps, rho):
    return np.sqrt(rho) * z + np.sqrt(1.0 - rho) * eps


def default_indicator(cwi_value, pd):
    return np.asarray(cwi_value) <= special.ndtri(pd)


def total_loss(y_col, cps, z: float, eps) -> float:
    """Realised loss in one market scenario given Z and the idiosyncratic draws."""
    y_col = np.asarray(y_col, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if not (y_col.size == eps.size == len(cps)):
        raise ValidationError("exposures, counterparties and eps must have equal length")
    pd, rho, lgd = _cp_arrays(cps)
    hit = default_indicator(cwi(z, eps, rho), pd)
    return float(np.sum(lgd * y_col * hit))


@dataclass(frozen=True)
class BaselInputs:
    ead: float
    lgd: float
    pd: float
    rho: float
    maturity_adjustment: float = 1.0
    tail_level: float = 0.999

    def __post_init__(self):
        if not self.ead >= 0:
            raise ValidationError("ead must be nonnegative")
        if not 0 <= self.lgd <= 1:
            raise ValidationError("lgd must lie in [0, 1]")
        if not 0 < self.pd < 1:
            raise ValidationError("pd must lie in (0, 1)")
        if not 0 <= self.rho < 1:
            raise ValidationError("rho must lie in [0, 1)")
        if not self.maturity_adjustment > 0:
            raise ValidationError("maturity_adjustment must be positive")
        if not 0 < self.tail_level < 1:
            raise ValidationError("tail_level must lie in (0, 1)")


def basel_capital(b: BaselInputs) -> float:
    stressed = norm_cdf((norm_inv(b.pd) + np.sqrt(b.rho) * norm_inv(b.tail_level)) / np.sqrt(1.0 - b.rho))
    return b.ead * b.lgd * stressed * b.maturity_adjustment
