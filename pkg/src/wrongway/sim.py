"""Monte Carlo losses from a discrete market/credit coupling.

Each draw picks a cell ``(m, n)`` from the coupling, samples the systematic
factor Z from a standard normal restricted to credit cell ``n`` and then
evaluates either the systematic loss at that Z or, in ``total`` mode, the
realised defaults from fresh idiosyncratic normals.

Randomness is counter based: draw ``j`` of stream ``s`` reads a fixed block
of Philox output addressed by ``(seed, s, j)``, so results do not depend on
how the draws are chunked.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .credit import CreditGrid, _cp_arrays, conditional_pd_matrix
from .errors import ValidationError
from .portfolio import ExposureMatrix, align
from .risk import DiscreteDistribution, cvar, var

LOSS_KINDS = ("systematic", "total")
_MASK64 = (1 << 64) - 1
_TO_UNIT = 2.0 ** -53


@dataclass(frozen=True)
class SimConfig:
    n_draws: int
    seed: int = 0
    loss_kind: str = "systematic"
    stream_id: int = 0
    chunk_size: int = 65_536

    def __post_init__(self):
        if int(self.n_draws) != self.n_draws or self.n_draws < 1:
            raise ValidationError("n_draws must be a positive integer")
        if self.loss_kind not in LOSS_KINDS:
            raise ValidationError(f"loss_kind must be one of {LOSS_KINDS}")
        if self.chunk_size < 1:
            raise ValidationError("chunk_size must be positive")


class CounterStream:
    """Uniforms in (0, 1) addressed by draw index, ``width`` per draw."""

    def __init__(self, seed: int, stream_id: int, width: int):
        self.key = np.array([int(seed) & _MASK64, int(stream_id) & _MASK64], dtype=np.uint64)
        # Philox emits four 64-bit words per counter step
        self.blocks = -(-width // 4)
        self.width = width

    def uniforms(self, start: int, count: int) -> np.ndarray:
        """``count x width`` uniforms for draws ``start .. start + count - 1``."""
        bitgen = np.random.Philox(key=self.key, counter=start * self.blocks)
        raw = bitgen.random_raw(count * self.blocks * 4).reshape(count, self.blocks * 4)[:, : self.width]
        return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TO_UNIT


class AliasTable:
    """Walker/Vose alias sampler over the positive entries of a probability array."""

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float).ravel()
        if np.any(w < 0) or not w.sum() > 0:
            raise ValidationError("alias weights must be nonnegative with positive total")
        self.support = np.flatnonzero(w > 0)
        pw = w[self.support]
        n = pw.size
        scaled = pw * (n / pw.sum())
        prob = np.ones(n)
        alias = np.arange(n)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            g = large[-1]
            prob[s] = scaled[s]
            alias[s] = g
            scaled[g] -= 1.0 - scaled[s]
            if scaled[g] < 1.0:
                small.append(large.pop())
        self.prob = prob
        self.alias = alias

    def sample(self, u_pick, u_accept):
        n = self.prob.size
        i = np.minimum((u_pick * n).astype(np.int64), n - 1)
        j = np.where(u_accept < self.prob[i], i, self.alias[i])
        return self.support[j]


def sample_cell(psi, u_pick, u_accept, table: AliasTable | None = None):
    """Draw ``(m, n)`` indices from the joint matrix ``psi`` given two uniform arrays."""
    psi = np.asarray(psi, dtype=float)
    table = table or AliasTable(psi)
    flat = table.sample(np.asarray(u_pick), np.asarray(u_accept))
    return np.divmod(flat, psi.shape[1])


def _left_side_inverse(a, b, u):
    la = special.log_ndtr(a)
    lb = special.log_ndtr(b)
    return special.ndtri_exp(lb + np.log1p((1.0 - u) * np.expm1(la - lb)))


def sample_truncated_normal(a, b, u):
    """Standard normal restricted to ``(a, b)``, one draw per uniform in ``u``.

    Inverse-CDF sampling done in log space on whichever side of zero the
    interval leans, so deep-tail cells keep full relative precision.
    """
    a, b, u = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float),
                                  np.asarray(u, dtype=float))
    if np.any(~(a < b)):
        raise ValidationError("truncation interval must satisfy a < b")
    with np.errstate(invalid="ignore"):
        right = (a + b) > 0
    z = np.empty(a.shape)
    left = ~right
    z[left] = _left_side_inverse(a[left], b[left], u[left])
    z[right] = -_left_side_inverse(-b[right], -a[right], 1.0 - u[right])
    # keep samples strictly inside the open interval
    z = np.clip(z, np.nextafter(a, np.inf), np.nextafter(b, -np.inf))
    return z


def simulate_losses(coupling, x: ExposureMatrix, cps, grid: CreditGrid, cfg: SimConfig,
                    return_cells: bool = False):
    """Draw ``cfg.n_draws`` portfolio losses under the joint law ``coupling`` (M x N)."""
    psi = np.asarray(getattr(coupling, "psi", coupling), dtype=float)
    if psi.shape != (x.n_scenarios, grid.n_cells):
        raise ValidationError(f"coupling shape {psi.shape} != ({x.n_scenarios}, {grid.n_cells})")
    cps = align(x, cps)
    pd, rho, lgd = _cp_arrays(cps)
    K = len(cps)
    weighted = x.exposures * lgd[:, None]
    table = AliasTable(psi)
    lower, upper = grid.lower, grid.upper
    total = cfg.loss_kind == "total"
    width = 3 + (K if total else 0)
    stream = CounterStream(cfg.seed, cfg.stream_id, width)
    thresh = special.ndtri(pd)[:, None]
    sq_rho = np.sqrt(rho)[:, None]
    sq_idio = np.sqrt(1.0 - rho)[:, None]

    losses = np.empty(cfg.n_draws)
    cells_m = np.empty(cfg.n_draws, dtype=np.int64) if return_cells else None
    cells_n = np.empty(cfg.n_draws, dtype=np.int64) if return_cells else None
    for start in range(0, cfg.n_draws, cfg.chunk_size):
        count = min(cfg.chunk_size, cfg.n_draws - start)
        u = stream.uniforms(start, count)
        m, n = np.divmod(table.sample(u[:, 0], u[:, 1]), psi.shape[1])
        z = sample_truncated_normal(lower[n], upper[n], u[:, 2])
        y = weighted[:, m]
        if total:
            eps = special.ndtri(u[:, 3:].T)
            defaulted = sq_rho * z[None, :] + sq_idio * eps <= thresh
            chunk = np.sum(y * defaulted, axis=0)
        else:
            chunk = np.einsum("kj,kj->j", y, conditional_pd_matrix(pd, rho, z))
        losses[start:start + count] = chunk
        if return_cells:
            cells_m[start:start + count] = m
            cells_n[start:start + count] = n
    dist = DiscreteDistribution.empirical(losses)
    if return_cells:
        return dist, cells_m, cells_n
    return dist


def summarize(losses, alphas) -> dict:
    """Mean, variance and VaR/CVaR at each requested level for a loss sample."""
    losses = np.asarray(losses, dtype=float)
    dist = DiscreteDistribution.empirical(losses)
    out = {
        "n_draws": int(losses.size),
        "mean": float(losses.mean()),
        "var": float(losses.var(ddof=1)) if losses.size > 1 else None,
        "degenerate": bool(losses.size < 2),
        "levels": [],
    }
    for a in alphas:
        out["levels"].append({"alpha": float(a), "var_alpha": var(dist, a), "cvar_alpha": cvar(dist, a)})
    return out


def _equal_weight_cvar(s, alpha):
    # mean of the largest (1 - alpha) n values, the boundary value taken fractionally
    n = s.size
    k = (1.0 - alpha) * n
    whole = min(int(np.floor(k)), n - 1)
    top = np.partition(s, n - whole - 1)[n - whole - 1:]
    return (float(np.sum(top[1:])) + (k - whole) * float(top[0])) / k


def bootstrap_cvar_se(losses, alpha, n_boot: int = 100, seed: int = 0) -> float:
    """Bootstrap standard error of the empirical CVaR."""
    losses = np.asarray(losses, dtype=float)
    rng = np.random.Generator(np.random.Philox(seed))
    n = losses.size
    est = np.empty(n_boot)
    for i in range(n_boot):
        est[i] = _equal_weight_cvar(losses[rng.integers(0, n, n)], alpha)
    return float(est.std(ddof=1))


def discretization_gap(psi, x: ExposureMatrix, cps, grid: CreditGrid, nodes: int = 20) -> dict:
    """Compare losses at the cell representatives with their within-cell averages.

    Returns the psi-weighted mean and the maximum of
    ``|L(rep_n) - E[L(Z) | Z in cell n]|`` over cells carrying mass.
    """
    cps = align(x, cps)
    pd, rho, lgd = _cp_arrays(cps)
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    u = 0.5 * (gx + 1.0)
    w = 0.5 * gw
    lo, hi = grid.lower, grid.upper
    z = sample_truncated_normal(lo[:, None], hi[:, None], u[None, :])
    cond = conditional_pd_matrix(pd, rho, z.ravel()).reshape(len(cps), grid.n_cells, nodes)
    mean_pd = cond @ w
    weighted = (x.exposures * lgd[:, None]).T
    at_rep = weighted @ conditional_pd_matrix(pd, rho, grid.cell_reps)
    averaged = weighted @ mean_pd
    diff = np.abs(at_rep - averaged)
    psi = np.asarray(psi, dtype=float)
    return {
        "weighted_mean_abs": float(np.sum(psi * diff)),
        "max_abs": float(np.max(np.where(psi > 0, diff, 0.0))),
    }
