"""Worst-case CVaR over all couplings of a market and a credit marginal.

For a loss matrix ``L[m, n]`` with market marginal ``p`` and credit marginal
``q`` the bound is the LP

    max  1/(1-alpha) * sum L[m, n] mu[m, n]
    s.t. sum_n psi[m, n] = p[m],  sum_m psi[m, n] = q[n]
         sum mu = 1 - alpha,      0 <= mu <= psi

``psi`` is the worst-case joint law and ``mu`` the tail it tilts onto. The
reduced program drops ``psi`` and keeps only the caps it implies on ``mu``
(row sums <= p, column sums <= q); :func:`extend_mu_to_psi` rebuilds a full
coupling from any feasible ``mu``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import lp as lpe
from .credit import LossSurface
from .errors import SolverError, ValidationError

FORMULATIONS = ("full", "reduced", "both")


@dataclass(frozen=True)
class WorstCaseCoupling:
    psi: np.ndarray
    mu: np.ndarray
    alpha: float
    wcc_cvar: float
    formulation: str
    certificate: dict = field(default_factory=dict)

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.psi > 0))


def _unpack(L, p=None, q=None):
    if isinstance(L, LossSurface):
        return L.values, L.market_probs, L.credit_probs
    L = np.asarray(L, dtype=float)
    if p is None or q is None:
        raise ValidationError("marginals required when L is a plain matrix")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if L.shape != (p.size, q.size):
        raise ValidationError(f"loss matrix {L.shape} does not match marginals ({p.size}, {q.size})")
    return L, p, q


def _check(alpha, p, q):
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha!r}")
    for v, name in ((p, "market"), (q, "credit")):
        if np.any(v < 0) or abs(math.fsum(v) - 1.0) > 1e-9:
            raise ValidationError(f"{name} marginal is not a probability vector")


def _row_col_blocks(M, N):
    """Sparse ``M x MN`` row-sum and ``N x MN`` column-sum operators (row-major cells)."""
    cells = np.arange(M * N)
    R = sp.csr_matrix((np.ones(M * N), (cells // N, cells)), shape=(M, M * N))
    C = sp.csr_matrix((np.ones(M * N), (cells % N, cells)), shape=(N, M * N))
    return R, C


def build_full_lp(L, alpha, p=None, q=None) -> lpe.LinearProgram:
    """Variables ``[psi (row-major), mu (row-major)]``; rows: market sums, credit sums, tail mass, caps."""
    L, p, q = _unpack(L, p, q)
    _check(alpha, p, q)
    M, N = L.shape
    K = M * N
    R, C = _row_col_blocks(M, N)
    Z = sp.csr_matrix((M, K))
    Zc = sp.csr_matrix((N, K))
    ones = sp.csr_matrix(np.ones((1, K)))
    eye = sp.identity(K, format="csr")
    A = sp.vstack([
        sp.hstack([R, Z]),
        sp.hstack([C, Zc]),
        sp.hstack([sp.csr_matrix((1, K)), ones]),
        sp.hstack([-eye, eye]),
    ], format="csr")
    senses = ["="] * (M + N + 1) + ["<="] * K
    rhs = np.concatenate([p, q, [1.0 - alpha], np.zeros(K)])
    c = np.concatenate([np.zeros(K), L.ravel()])
    names = [f"PSI{m}_{n}" for m in range(M) for n in range(N)] + [f"MU{m}_{n}" for m in range(M) for n in range(N)]
    rows = ([f"ROW{m}" for m in range(M)] + [f"COL{n}" for n in range(N)] + ["TAIL"]
            + [f"CAP{m}_{n}" for m in range(M) for n in range(N)])
    return lpe.LinearProgram(c, A, senses, rhs, col_names=names, row_names=rows, name="WCCFULL")


def build_reduced_lp(L, alpha, p=None, q=None) -> lpe.LinearProgram:
    """Variables ``mu`` (row-major) only; rows: market caps, credit caps, tail mass."""
    L, p, q = _unpack(L, p, q)
    _check(alpha, p, q)
    M, N = L.shape
    R, C = _row_col_blocks(M, N)
    A = sp.vstack([R, C, sp.csr_matrix(np.ones((1, M * N)))], format="csr")
    senses = ["<="] * (M + N) + ["="]
    rhs = np.concatenate([p, q, [1.0 - alpha]])
    return lpe.LinearProgram(L.ravel().copy(), A, senses, rhs, name="WCCRED")


def extend_mu_to_psi(mu, p, q, tol: float = 1e-12):
    """Complete a feasible tail ``mu`` to a coupling with marginals exactly ``p`` and ``q``.

    The untilted remainder ``p - rowsum(mu)`` x ``q - colsum(mu)`` is spread
    proportionally (an independent-shaped fill), which keeps ``psi >= mu``.
    """
    mu = np.asarray(mu, dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(mu < -tol):
        raise ValidationError("mu has negative entries")
    mu = np.clip(mu, 0.0, None)
    rp = p - mu.sum(axis=1)
    rq = q - mu.sum(axis=0)
    if rp.min(initial=0.0) < -tol or rq.min(initial=0.0) < -tol:
        raise ValidationError("mu row or column sums exceed the marginals")
    rest = math.fsum(rp.clip(0.0))
    if rest <= 0.0:
        return mu.copy()
    return mu + np.outer(rp.clip(0.0), rq.clip(0.0)) / rest


def greedy_upper_start(L, p, q, alpha):
    """Feasible tail ``mu`` filled cell by cell in decreasing loss order."""
    L = np.asarray(L, dtype=float)
    M, N = L.shape
    row = np.array(p, dtype=float)
    col = np.array(q, dtype=float)
    left = 1.0 - alpha
    mu = np.zeros(M * N)
    for cell in np.argsort(-L.ravel(), kind="stable"):
        if left <= 0.0:
            break
        m, n = divmod(int(cell), N)
        amt = min(row[m], col[n], left)
        if amt <= 0.0:
            continue
        mu[cell] = amt
        row[m] -= amt
        col[n] -= amt
        left -= amt
    return mu.reshape(M, N)


def _lp_summary(sol: lpe.LpSolution, lp, opts):
    cert = lpe.check_certificate(lp, sol, opts.feas_tol, opts.opt_tol)
    return {
        "status": sol.status,
        "iterations": sol.iterations,
        "objective": sol.objective_value,
        "duality_gap": cert.gap,
        "primal_residual": max(cert.primal_residual, cert.bound_violation),
        "dual_residual": max(cert.dual_sign_violation, cert.dual_residual),
        "n_vars": lp.n_vars,
        "n_rows": lp.n_rows,
    }


def _run(lp, opts, x0=None):
    sol = lpe.solve(lp, opts, x0=x0)
    if sol.status != lpe.OPTIMAL:
        raise SolverError(f"{lp.name}: solver stopped with status {sol.status} after {sol.iterations} iterations",
                          solution=sol)
    return sol


def _solve_reduced(L, p, q, alpha, opts):
    lp = build_reduced_lp(L, alpha, p, q)
    start = greedy_upper_start(L, p, q, alpha).ravel()
    sol = _run(lp, opts, x0=start)
    mu = np.clip(sol.primal.reshape(L.shape), 0.0, None)
    psi = extend_mu_to_psi(mu, p, q, tol=opts.feas_tol)
    return psi, mu, sol, lp


def _solve_full(L, p, q, alpha, opts):
    lp = build_full_lp(L, alpha, p, q)
    sol = _run(lp, opts)
    K = L.size
    psi = np.clip(sol.primal[:K].reshape(L.shape), 0.0, None)
    mu = np.clip(sol.primal[K:].reshape(L.shape), 0.0, None)
    mu = np.minimum(mu, psi)
    return psi, mu, sol, lp


def solve_wcc(L, alpha: float, formulation: str = "reduced", p=None, q=None,
              opts: lpe.SolveOptions | None = None) -> WorstCaseCoupling:
    L, p, q = _unpack(L, p, q)
    _check(alpha, p, q)
    if formulation not in FORMULATIONS:
        raise ValidationError(f"formulation must be one of {FORMULATIONS}")
    opts = opts or lpe.SolveOptions()
    scale = 1.0 + float(np.max(np.abs(L), initial=0.0))

    if formulation == "full":
        psi, mu, sol, lp = _solve_full(L, p, q, alpha, opts)
        cert = _lp_summary(sol, lp, opts)
    else:
        psi, mu, sol, lp = _solve_reduced(L, p, q, alpha, opts)
        cert = _lp_summary(sol, lp, opts)
        if formulation == "both":
            _, _, sol_full, lp_full = _solve_full(L, p, q, alpha, opts)
            agreement = abs(sol_full.objective_value - sol.objective_value) / (1.0 - alpha)
            cert["full"] = _lp_summary(sol_full, lp_full, opts)
            cert["agreement_gap"] = agreement
            if agreement > 1e-8 * scale:
                raise SolverError(f"full and reduced bounds disagree by {agreement:.3g}", solution=sol_full)
    value = float(np.sum(L * mu) / (1.0 - alpha))
    return WorstCaseCoupling(psi=psi, mu=mu, alpha=alpha, wcc_cvar=value, formulation=formulation,
                             certificate=cert)
