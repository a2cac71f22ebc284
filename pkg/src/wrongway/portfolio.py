"""Counterparties, exposure scenarios and exposure/concentration reports."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import _prob
from .errors import ParseError, ValidationError
from .risk import DiscreteDistribution, var

PROBS_ROW = "__probs__"
EXPOSURE_PROB_TOL = 1e-9


@dataclass(frozen=True)
class Counterparty:
    id: str
    pd: float
    rho: float
    lgd: float = 1.0
    ead_override: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.pd < 1.0:
            raise ValidationError(f"{self.id}: pd must lie in (0, 1), got {self.pd!r}")
        if not 0.0 <= self.rho < 1.0:
            raise ValidationError(f"{self.id}: rho must lie in [0, 1), got {self.rho!r}")
        if not 0.0 <= self.lgd <= 1.0:
            raise ValidationError(f"{self.id}: lgd must lie in [0, 1], got {self.lgd!r}")
        if self.ead_override is not None and not self.ead_override >= 0:
            raise ValidationError(f"{self.id}: ead_override must be nonnegative")


@dataclass(frozen=True)
class ExposureMatrix:
    """Exposures ``y[k, m]`` of counterparty k under market scenario m."""

    counterparty_ids: tuple
    exposures: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        ids = tuple(str(i) for i in self.counterparty_ids)
        y = np.array(self.exposures, dtype=float)
        if y.ndim != 2 or y.shape[0] < 1 or y.shape[1] < 1:
            raise ValidationError("exposures must be a K x M matrix with K, M >= 1")
        if len(ids) != y.shape[0]:
            raise ValidationError(f"{len(ids)} ids for {y.shape[0]} exposure rows")
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate counterparty id in exposure matrix")
        bad = np.argwhere(~np.isfinite(y) | (y < 0))
        if bad.size:
            k, m = bad[0]
            raise ValidationError(
                f"exposure for {ids[k]!r} (row {k}, col {m}) is {y[k, m]!r}; must be finite and >= 0")
        p = _prob.check_probs(self.probs, EXPOSURE_PROB_TOL, "scenario probabilities")
        if p.size != y.shape[1]:
            raise ValidationError(f"{p.size} probabilities for {y.shape[1]} scenarios")
        p = _prob.normalize_exact(p / math.fsum(p))
        y.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "counterparty_ids", ids)
        object.__setattr__(self, "exposures", y)
        object.__setattr__(self, "probs", p)

    @property
    def n_counterparties(self) -> int:
        return self.exposures.shape[0]

    @property
    def n_scenarios(self) -> int:
        return self.exposures.shape[1]

    def epe(self) -> np.ndarray:
        """Probability-weighted mean exposure per counterparty."""
        return self.exposures @ self.probs

    def totals(self) -> np.ndarray:
        return self.exposures.sum(axis=0)


@dataclass(frozen=True)
class ConcentrationReport:
    herfindahl: float
    effective_counterparties: float
    cumulative_exposure_share: np.ndarray
    # 1/H_n for n = 1..K over the sorted exposures; the curve behind the
    # "effective number of counterparties among the largest n" plots
    effective_by_rank: np.ndarray = field(repr=False)
    top_n: int = 0


def _float(text, where):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"{where}: cannot parse {text!r} as a number") from None


def load_exposures(path, probs_mode: str = "uniform") -> ExposureMatrix:
    """Read an exposure CSV (``counterparty_id,s1,...,sM``).

    ``probs_mode="explicit"`` takes scenario probabilities from a final
    ``__probs__`` row; ``"uniform"`` assigns 1/M to every scenario and ignores
    such a row if present.
    """
    if probs_mode not in ("uniform", "explicit"):
        raise ValidationError(f"probs_mode must be 'uniform' or 'explicit', got {probs_mode!r}")
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if header[0].strip() != "counterparty_id" or len(header) < 2:
        raise ParseError(f"{path}: header must start with 'counterparty_id' followed by scenario columns")
    width = len(header)
    ids, values, probs = [], [], None
    for i, row in enumerate(body, start=2):
        if len(row) != width:
            raise ParseError(f"{path}: row {i} has {len(row)} fields, expected {width}")
        name = row[0].strip()
        cells = [_float(c, f"{path}: row {i}") for c in row[1:]]
        if name == PROBS_ROW:
            probs = np.array(cells)
            continue
        if probs is not None:
            raise ParseError(f"{path}: row {i} follows the {PROBS_ROW} row, which must be last")
        neg = [j for j, v in enumerate(cells, start=1) if v < 0]
        if neg:
            raise ValidationError(f"{path}: negative exposure at (row {i}, col {neg[0]})")
        ids.append(name)
        values.append(cells)
    if not ids:
        raise ValidationError(f"{path}: no counterparties")
    m = width - 1
    if probs_mode == "explicit":
        if probs is None:
            raise ValidationError(f"{path}: explicit probabilities requested but no {PROBS_ROW} row")
        if np.any(probs < 0) or abs(math.fsum(probs) - 1.0) > EXPOSURE_PROB_TOL:
            raise ValidationError(f"{path}: scenario probabilities sum to {math.fsum(probs)!r}")
    else:
        probs = _prob.uniform(m)
    return ExposureMatrix(tuple(ids), np.array(values), probs)


def load_counterparties(path) -> list[Counterparty]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"counterparty_id", "pd", "rho"}
        if reader.fieldnames is None or not need <= {f.strip() for f in reader.fieldnames}:
            raise ParseError(f"{path}: header must contain counterparty_id,pd,rho[,lgd,ead_override]")
        out, seen = [], set()
        for i, raw in enumerate(reader, start=2):
            row = {k.strip(): (v or "").strip() for k, v in raw.items() if k is not None}
            cid = row["counterparty_id"]
            if cid in seen:
                raise ValidationError(f"{path}: duplicate counterparty id {cid!r} at row {i}")
            seen.add(cid)
            lgd = row.get("lgd", "")
            ead = row.get("ead_override", "")
            where = f"{path}: row {i}"
            out.append(Counterparty(
                id=cid,
                pd=_float(row["pd"], where),
                rho=_float(row["rho"], where),
                lgd=_float(lgd, where) if lgd else 1.0,
                ead_override=_float(ead, where) if ead else None,
            ))
    return out


def align(x: ExposureMatrix, cps) -> list[Counterparty]:
    """Order ``cps`` to match the rows of ``x``; every id must be present."""
    by_id = {c.id: c for c in cps}
    missing = [i for i in x.counterparty_ids if i not in by_id]
    if missing:
        raise ValidationError(f"no credit data for counterparties {missing[:5]}")
    return [by_id[i] for i in x.counterparty_ids]


def concentration(epe, top_n: int) -> ConcentrationReport:
    w = np.sort(np.asarray(epe, dtype=float).ravel())[::-1]
    if w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValidationError("exposures must be a non-empty nonnegative vector")
    if top_n < 1:
        raise ValidationError("top_n must be >= 1")
    if top_n > w.size:
        warnings.warn(f"top_n={top_n} exceeds {w.size} counterparties; clamped", stacklevel=2)
        top_n = w.size
    top = w[:top_n]
    total = top.sum()
    if not total > 0:
        raise ValidationError("Herfindahl index undefined: top exposures are all zero")
    h = float(np.dot(top, top) / total**2)

    csum = np.cumsum(w)
    with np.errstate(divide="ignore", invalid="ignore"):
        curve = np.where(csum > 0, csum**2 / np.cumsum(w * w), np.nan)
        share = csum / csum[-1] if csum[-1] > 0 else np.zeros_like(csum)
    return ConcentrationReport(
        herfindahl=h,
        effective_counterparties=1.0 / h,
        cumulative_exposure_share=share,
        effective_by_rank=curve,
        top_n=top_n,
    )


def exposure_band_report(x: ExposureMatrix):
    """Per-counterparty mean and 5%/95% exposure quantiles as % of the mean.

    Returns ``(rows, excluded)`` where rows are sorted by decreasing mean and
    ``excluded`` lists ids whose mean exposure is zero.
    """
    means = x.epe()
    rows, excluded = [], []
    for k in np.argsort(-means, kind="stable"):
        cid = x.counterparty_ids[k]
        mean = float(means[k])
        if not mean > 0:
            excluded.append(cid)
            continue
        d = DiscreteDistribution(x.exposures[k], x.probs)
        rows.append({
            "counterparty_id": cid,
            "mean": mean,
            "p5_pct_of_mean": 100.0 * var(d, 0.05) / mean,
            "p95_pct_of_mean": 100.0 * var(d, 0.95) / mean,
        })
    return rows, excluded


def total_exposure_histogram(x: ExposureMatrix, bins: int):
    """Equal-width histogram of scenario totals, weighted by scenario probability.

    Returns ``(edges, mass)`` with ``len(edges) == bins + 1``.
    """
    if bins < 1:
        raise ValidationError("bins must be >= 1")
    totals = x.totals()
    mass, edges = np.histogram(totals, bins=bins, weights=x.probs)
    return edges, mass
