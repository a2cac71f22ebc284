"""Bounded-variable revised simplex for maximisation LPs.

Problems have the form::

    maximise    c @ x
    subject to  A[i] @ x  (<=, >=, ==)  b[i]
                lo <= x <= hi

Slack and artificial columns are appended internally. The basis is held as a
dense LU factorisation plus a product-form eta file, refactorised every
``refactor_every`` pivots. Pricing is Dantzig (largest reduced cost, lowest
index on ties); after ``bland_after`` consecutive degenerate pivots the
solver switches to Bland's rule until the objective moves again.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import ValidationError

log = logging.getLogger(__name__)

LE, GE, EQ = "L", "G", "E"
_SENSE_ALIASES = {"<=": LE, "<": LE, "L": LE, ">=": GE, ">": GE, "G": GE, "=": EQ, "==": EQ, "E": EQ}

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass
class LinearProgram:
    objective: np.ndarray
    A: sp.csr_matrix
    senses: np.ndarray
    rhs: np.ndarray
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    col_names: Optional[list] = None
    row_names: Optional[list] = None
    name: str = "LP"

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        n = self.objective.size
        A = sp.csr_matrix(self.A, dtype=float)
        if A.shape[1] != n:
            raise ValidationError(f"A has {A.shape[1]} columns for {n} objective coefficients")
        A.sum_duplicates()
        A.eliminate_zeros()
        self.A = A
        m = A.shape[0]
        self.senses = np.array([_SENSE_ALIASES.get(str(s), None) for s in self.senses], dtype=object)
        if self.senses.size != m or any(s is None for s in self.senses):
            raise ValidationError("senses must give one of <=, >=, = per row")
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        if self.rhs.size != m:
            raise ValidationError(f"rhs has {self.rhs.size} entries for {m} rows")
        self.lo = np.zeros(n) if self.lo is None else np.asarray(self.lo, dtype=float).ravel()
        self.hi = np.full(n, np.inf) if self.hi is None else np.asarray(self.hi, dtype=float).ravel()
        if self.lo.size != n or self.hi.size != n:
            raise ValidationError("bounds must have one entry per variable")
        if not np.all(np.isfinite(self.lo)):
            raise ValidationError("lower bounds must be finite")
        if np.any(self.hi < self.lo):
            raise ValidationError("some upper bound lies below its lower bound")
        for arr, what in ((self.objective, "objective"), (A.data, "constraint"), (self.rhs, "rhs")):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"non-finite {what} coefficient")

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]


@dataclass
class SolveOptions:
    feas_tol: float = 1e-9
    opt_tol: float = 1e-8
    max_iters: int = 200_000
    refactor_every: int = 100
    bland_after: int = 50
    pivot_tol: float = 1e-9
    # the basis is factorised densely; larger problems should go out via MPS
    max_dense_rows: int = 6000


@dataclass
class LpSolution:
    status: str
    primal: np.ndarray
    dual: np.ndarray
    objective_value: float
    duality_gap: float
    iterations: int
    basis: Optional[np.ndarray] = field(default=None, repr=False)
    phase1_iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Basis:
    """Dense LU of the basis matrix with a product-form eta file."""

    def __init__(self, cols_dense):
        self.lu = sla.lu_factor(cols_dense, check_finite=False)
        self.etas = []

    def ftran(self, a):
        v = sla.lu_solve(self.lu, a, check_finite=False)
        for r, w in self.etas:
            vr = v[r] / w[r]
            v -= w * vr
            v[r] = vr
        return v

    def btran(self, c):
        u = np.array(c, dtype=float)
        for r, w in reversed(self.etas):
            ur = u[r]
            u[r] = (ur - (u @ w - ur * w[r])) / w[r]
        return sla.lu_solve(self.lu, u, trans=1, check_finite=False)

    def push(self, r, w):
        self.etas.append((r, w))


class _Simplex:
    def __init__(self, lp: LinearProgram, opts: SolveOptions):
        self.lp, self.opts = lp, opts
        m, n = lp.n_rows, lp.n_vars
        self.m, self.n = m, n
        A = lp.A.tocsc()

        x = lp.lo.copy()
        resid = lp.rhs - lp.A @ x
        slack_rows, slack_sign = [], []
        for i, s in enumerate(lp.senses):
            if s == LE:
                slack_rows.append(i)
                slack_sign.append(1.0)
            elif s == GE:
                slack_rows.append(i)
                slack_sign.append(-1.0)
        slack_rows = np.array(slack_rows, dtype=int)
        slack_sign = np.array(slack_sign)
        self.slack_of_row = np.full(m, -1)
        self.slack_of_row[slack_rows] = n + np.arange(slack_rows.size)
        ns = slack_rows.size

        slack_val = np.zeros(ns)
        if ns:
            slack_val = resid[slack_rows] * slack_sign
        needs_art = np.ones(m, dtype=bool)
        ok = slack_val >= 0
        needs_art[slack_rows[ok]] = False
        art_rows = np.flatnonzero(needs_art)
        art_sign = np.where(resid[art_rows] >= 0, 1.0, -1.0)
        na = art_rows.size
        self.art_start = n + ns
        self.art_of_row = np.full(m, -1)
        self.art_of_row[art_rows] = self.art_start + np.arange(na)

        S = sp.csc_matrix((slack_sign, (slack_rows, np.arange(ns))), shape=(m, ns))
        R = sp.csc_matrix((art_sign, (art_rows, np.arange(na))), shape=(m, na))
        self.cols = sp.hstack([A, S, R], format="csc")
        self.rows_T = self.cols.T.tocsr()
        self.N = n + ns + na

        self.lo = np.concatenate([lp.lo, np.zeros(ns), np.zeros(na)])
        self.hi = np.concatenate([lp.hi, np.full(ns, np.inf), np.full(na, np.inf)])
        self.x = np.concatenate([x, np.where(ok, slack_val, 0.0), np.abs(resid[art_rows])])

        basis = np.empty(m, dtype=int)
        basis[slack_rows[ok]] = n + np.flatnonzero(ok)
        basis[art_rows] = self.art_start + np.arange(na)
        self.basis = basis
        self.is_basic = np.zeros(self.N, dtype=bool)
        self.is_basic[basis] = True
        self.iterations = 0
        self.scale_b = max(1.0, float(np.max(np.abs(lp.rhs), initial=0.0)))
        self._refactor()

    # -- basis bookkeeping -------------------------------------------------
    def _refactor(self):
        B = self.cols[:, self.basis].toarray()
        self.B = _Basis(B)
        self.since_refactor = 0
        nb = ~self.is_basic
        rhs = self.lp.rhs - self.cols[:, nb] @ self.x[nb]
        self.x[self.basis] = self.B.ftran(rhs)

    def crash(self, x0, tol):
        """Try to start from a feasible structural point ``x0`` lying on a vertex."""
        lp, n, m = self.lp, self.n, self.m
        x0 = np.clip(np.asarray(x0, dtype=float), lp.lo, lp.hi)
        ax = lp.A @ x0
        r = lp.rhs - ax
        viol = np.where(lp.senses == LE, -r, np.where(lp.senses == GE, r, np.abs(r)))
        if np.max(viol, initial=0.0) > tol * self.scale_b:
            return False
        x = np.zeros(self.N)
        x[:n] = x0
        for i in range(m):
            s = self.slack_of_row[i]
            if s >= 0:
                x[s] = max(0.0, r[i] * self.cols[i, s])
        span = np.maximum(1.0, np.abs(x))
        free = (x - self.lo > tol * span) & (self.hi - x > tol * span)
        free[self.art_start:] = False
        cand = np.flatnonzero(free)
        if cand.size > m:
            return False
        if cand.size:
            C = self.cols[:, cand].toarray()
            P, L, U = sla.lu(C, check_finite=False)
            diag = np.abs(np.diag(U))
            if diag.size and diag.min() <= 1e-9 * max(1.0, diag.max()):
                return False
            pivot_rows = np.argmax(P[:, : cand.size], axis=0)
        else:
            pivot_rows = np.array([], dtype=int)
        rest = np.setdiff1d(np.arange(m), pivot_rows)
        fill = []
        for i in rest:
            s = self.slack_of_row[i]
            a = self.art_of_row[i]
            if s >= 0 and not free[s]:
                fill.append(s)
            elif a >= 0:
                fill.append(a)
            else:
                return False
        basis = np.concatenate([cand, np.array(fill, dtype=int)]).astype(int)
        if np.unique(basis).size != m:
            return False
        old = (self.basis, self.is_basic, self.x)
        self.basis = basis
        self.is_basic = np.zeros(self.N, dtype=bool)
        self.is_basic[basis] = True
        self.x = x
        self.lo[self.art_start:] = 0.0
        self.hi[self.art_start:] = 0.0
        try:
            self._refactor()
        except (np.linalg.LinAlgError, ValueError):
            self.basis, self.is_basic, self.x = old
            self.hi[self.art_start:] = np.inf
            return False
        xb = self.x[basis]
        lob, hib = self.lo[basis], self.hi[basis]
        bad = np.maximum(lob - xb, xb - hib)
        if np.max(bad, initial=0.0) > tol * self.scale_b:
            self.basis, self.is_basic, self.x = old
            self.hi[self.art_start:] = np.inf
            self._refactor()
            return False
        return True

    # -- one simplex phase -------------------------------------------------
    def run(self, cost, max_iters):
        opts = self.opts
        cscale = max(1.0, float(np.max(np.abs(cost), initial=0.0)))
        dtol = 1e-11 * cscale
        degenerate_streak = 0
        bland = False
        fixed = self.hi - self.lo <= 0
        while self.iterations < max_iters:
            y = self.B.btran(cost[self.basis])
            d = cost - self.rows_T @ y
            at_upper = (~self.is_basic) & (self.x >= self.hi) & np.isfinite(self.hi)
            elig_up = (~self.is_basic) & (~at_upper) & (~fixed) & (d > dtol)
            elig_dn = at_upper & (~fixed) & (d < -dtol)
            score = np.where(elig_up | elig_dn, np.abs(d), 0.0)
            if not score.any():
                return "optimal", y, d
            q = int(np.flatnonzero(score)[0]) if bland else int(np.argmax(score))
            direction = 1.0 if elig_up[q] else -1.0

            a_q = self.cols[:, q].toarray().ravel()
            w = self.B.ftran(a_q)
            delta = direction * w
            xb = self.x[self.basis]
            lob, hib = self.lo[self.basis], self.hi[self.basis]
            ratios = np.full(self.m, np.inf)
            dec = delta > opts.pivot_tol
            inc = delta < -opts.pivot_tol
            ratios[dec] = (xb[dec] - lob[dec]) / delta[dec]
            fin = inc & np.isfinite(hib)
            ratios[fin] = (hib[fin] - xb[fin]) / (-delta[fin])
            ratios = np.maximum(ratios, 0.0)
            t_flip = self.hi[q] - self.lo[q]
            r = -1
            t = t_flip
            if np.isfinite(ratios).any():
                tmin = ratios.min()
                if tmin < t_flip:
                    ties = np.flatnonzero(ratios <= tmin + 1e-12 * max(1.0, tmin))
                    if bland:
                        r = int(ties[np.argmin(self.basis[ties])])
                    else:
                        r = int(ties[np.argmax(np.abs(delta[ties]))])
                    t = ratios[r]
            if not np.isfinite(t):
                return "unbounded", y, d

            self.iterations += 1
            if t <= 1e-12:
                degenerate_streak += 1
                if degenerate_streak >= opts.bland_after and not bland:
                    bland = True
                    log.debug("switching to Bland's rule at iteration %d", self.iterations)
            else:
                degenerate_streak = 0
                bland = False

            self.x[self.basis] = xb - delta * t
            if r < 0:
                # bound flip: land exactly on the bound so the status test stays exact
                self.x[q] = self.hi[q] if direction > 0 else self.lo[q]
                continue
            self.x[q] += direction * t
            leaving = self.basis[r]
            self.x[leaving] = lob[r] if delta[r] > 0 else hib[r]
            self.is_basic[leaving] = False
            self.is_basic[q] = True
            self.basis[r] = q
            self.B.push(r, w)
            self.since_refactor += 1
            if self.since_refactor >= opts.refactor_every:
                self._refactor()
        return "iteration_limit", self.B.btran(cost[self.basis]), None


def solve(lp: LinearProgram, opts: Optional[SolveOptions] = None, x0=None, **kw) -> LpSolution:
    """Solve ``lp`` (a maximisation). Never raises on infeasible/unbounded input.

    ``x0`` is an optional feasible structural point at a vertex used to skip
    phase one; it is ignored when it is infeasible or not a basic solution.
    """
    opts = opts or SolveOptions(**kw)
    if lp.n_rows > opts.max_dense_rows:
        raise ValidationError(
            f"{lp.name}: {lp.n_rows} rows exceeds the dense-basis limit of {opts.max_dense_rows}; "
            "use the reduced formulation or export to MPS")
    s = _Simplex(lp, opts)
    n = lp.n_vars
    warm = x0 is not None and s.crash(x0, opts.feas_tol)

    phase1_iters = 0
    if not warm:
        art = np.arange(s.art_start, s.N)
        if art.size:
            c1 = np.zeros(s.N)
            c1[art] = -1.0
            status, _, _ = s.run(c1, opts.max_iters)
            phase1_iters = s.iterations
            infeas = float(np.sum(s.x[art]))
            if status == "iteration_limit":
                return _result(s, ITERATION_LIMIT, None, None, phase1_iters)
            if infeas > opts.feas_tol * s.scale_b:
                return _result(s, INFEASIBLE, None, None, phase1_iters)
            s.x[art] = np.where(s.is_basic[art], s.x[art], 0.0)
            s.hi[art] = 0.0
            s._refactor()

    c2 = np.zeros(s.N)
    c2[:n] = lp.objective
    status, y, d = s.run(c2, opts.max_iters)
    return _result(s, status, y, d, phase1_iters)


def _result(s, status, y, d, phase1_iters):
    lp = s.lp
    x = s.x[: s.n].copy()
    if y is None:
        y = np.zeros(s.m)
    obj = float(lp.objective @ x)
    gap = np.nan
    if status == OPTIMAL:
        gap = _duality_gap(lp, x, y)
        if gap > s.opts.opt_tol * (1.0 + abs(obj)):
            log.warning("duality gap %.3g exceeds tolerance at termination", gap)
    return LpSolution(status=status, primal=x, dual=np.asarray(y, dtype=float), objective_value=obj,
                      duality_gap=float(gap), iterations=s.iterations, basis=s.basis.copy(),
                      phase1_iterations=phase1_iters)


def _dual_objective(lp: LinearProgram, y):
    d = lp.objective - lp.A.T @ y
    upper_part = np.where(d > 0, d, 0.0)
    lower_part = np.where(d < 0, d, 0.0)
    finite_hi = np.isfinite(lp.hi)
    dual_obj = float(lp.rhs @ y + upper_part[finite_hi] @ lp.hi[finite_hi] + lower_part @ lp.lo)
    # positive reduced cost on an uncapped column cannot be absorbed by a bound multiplier
    dual_infeas = float(np.max(upper_part[~finite_hi], initial=0.0))
    return dual_obj, dual_infeas, d


def _duality_gap(lp, x, y):
    dual_obj, _, _ = _dual_objective(lp, y)
    return abs(dual_obj - float(lp.objective @ x))


@dataclass
class CertificateReport:
    primal_residual: float
    bound_violation: float
    dual_sign_violation: float
    dual_residual: float
    primal_objective: float
    dual_objective: float
    gap: float
    feas_tol: float
    opt_tol: float

    @property
    def feasible(self) -> bool:
        return max(self.primal_residual, self.bound_violation) <= self.feas_tol

    @property
    def optimal(self) -> bool:
        return (self.feasible and max(self.dual_sign_violation, self.dual_residual) <= self.opt_tol
                and self.gap <= self.opt_tol * (1.0 + abs(self.primal_objective)))


def check_certificate(lp: LinearProgram, sol: LpSolution, feas_tol: float = 1e-9,
                      opt_tol: float = 1e-8) -> CertificateReport:
    """Recompute primal/dual feasibility and the duality gap from the raw LP data."""
    x = np.asarray(sol.primal, dtype=float)
    y = np.asarray(sol.dual, dtype=float)
    ax = lp.A @ x
    senses = lp.senses
    r = ax - lp.rhs
    row_viol = np.where(senses == LE, np.maximum(r, 0.0),
                        np.where(senses == GE, np.maximum(-r, 0.0), np.abs(r)))
    bound_viol = np.maximum(np.maximum(lp.lo - x, x - lp.hi), 0.0)
    # maximisation: a <= row has a nonnegative multiplier, a >= row a nonpositive one
    sign_viol = np.where(senses == LE, np.maximum(-y, 0.0),
                         np.where(senses == GE, np.maximum(y, 0.0), 0.0))
    dual_obj, dual_infeas, _ = _dual_objective(lp, y)
    primal_obj = float(lp.objective @ x)
    return CertificateReport(
        primal_residual=float(np.max(row_viol, initial=0.0)),
        bound_violation=float(np.max(bound_viol, initial=0.0)),
        dual_sign_violation=float(np.max(sign_viol, initial=0.0)),
        dual_residual=dual_infeas,
        primal_objective=primal_obj,
        dual_objective=dual_obj,
        gap=abs(dual_obj - primal_obj),
        feas_tol=feas_tol,
        opt_tol=opt_tol,
    )
