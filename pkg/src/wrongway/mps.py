"""MPS writer for :class:`~wrongway.lp.LinearProgram`.

Free format (the default) writes every number with full double precision;
fixed format squeezes numbers into 12-character fields for old readers and
may round them. MPS has no portable way to say "maximise", so the objective row is written
negated (an external minimiser then returns minus the optimal value) and a
comment record states this.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .lp import EQ, GE, LE, LinearProgram

_SENSE_CODE = {LE: "L", GE: "G", EQ: "E"}


def _num(v: float) -> str:
    """Render ``v`` in at most 12 characters, keeping as many digits as fit."""
    v = float(v)
    if v == 0.0:
        return "0"
    s = repr(v)
    if len(s) <= 12:
        return s
    for prec in range(17, 0, -1):
        s = f"{v:.{prec}g}"
        if len(s) <= 12:
            return s
    raise ValueError(f"cannot encode {v!r} in 12 characters")


def _names(given, prefix, count, max_len=8):
    ok = given is not None and len(given) == count and all(
        0 < len(n) <= max_len and " " not in n for n in given) and len(set(given)) == count
    if ok:
        return list(given)
    width = max(1, min(7, len(str(max(count - 1, 0)))))
    if len(str(max(count - 1, 0))) > 7:
        raise ValueError(f"too many {prefix} names for fixed-format MPS")
    return [f"{prefix}{i:0{width}d}" for i in range(count)]


def _line(f1="", f2="", f3="", f4="", f5="", f6=""):
    out = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}"
    if f5:
        out += f"   {f5:<8}  {f6:>12}"
    return out.rstrip() + "\n"


def _free_line(f1="", f2="", f3="", f4="", f5="", f6=""):
    return " " + " ".join(f for f in (f1, f2, f3, f4, f5, f6) if f) + "\n"


def export_mps(lp: LinearProgram, path, free: bool = True) -> Path:
    path = Path(path)
    max_len = 255 if free else 8
    rows = _names(lp.row_names, "R", lp.n_rows, max_len)
    cols = _names(lp.col_names, "C", lp.n_vars, max_len)
    num = (lambda v: "0" if v == 0.0 else repr(float(v))) if free else _num
    line = _free_line if free else _line
    A = lp.A.tocsc()
    obj = -lp.objective
    with path.open("w", encoding="ascii") as fh:
        fh.write("* free-format MPS\n" if free else "* fixed-format MPS\n")
        fh.write("* objective negated: source problem maximises c'x; minimise -c'x here\n")
        fh.write(f"* {lp.n_rows} rows, {lp.n_vars} columns, {A.nnz} nonzeros\n")
        fh.write(f"NAME          {lp.name if free else lp.name[:8]}\n")
        fh.write("ROWS\n")
        fh.write(" N  OBJ\n")
        for name, s in zip(rows, lp.senses):
            fh.write(f" {_SENSE_CODE[s]}  {name}\n")
        fh.write("COLUMNS\n")
        for j, cname in enumerate(cols):
            entries = []
            if obj[j] != 0.0:
                entries.append(("OBJ", obj[j]))
            lo, hi = A.indptr[j], A.indptr[j + 1]
            entries.extend((rows[i], v) for i, v in zip(A.indices[lo:hi], A.data[lo:hi]))
            if not entries:
                entries.append(("OBJ", 0.0))
            for k in range(0, len(entries), 2):
                pair = entries[k:k + 2]
                f5, f6 = (pair[1][0], num(pair[1][1])) if len(pair) == 2 else ("", "")
                fh.write(line("", cname, pair[0][0], num(pair[0][1]), f5, f6))
        fh.write("RHS\n")
        nz = [(rows[i], v) for i, v in enumerate(lp.rhs) if v != 0.0]
        for k in range(0, len(nz), 2):
            pair = nz[k:k + 2]
            f5, f6 = (pair[1][0], num(pair[1][1])) if len(pair) == 2 else ("", "")
            fh.write(line("", "RHS", pair[0][0], num(pair[0][1]), f5, f6))
        bounds = []
        for j, cname in enumerate(cols):
            lo, hi = lp.lo[j], lp.hi[j]
            if lo == hi:
                bounds.append(("FX", cname, lo))
                continue
            if lo != 0.0:
                bounds.append(("LO", cname, lo))
            if np.isfinite(hi):
                bounds.append(("UP", cname, hi))
        if bounds:
            fh.write("BOUNDS\n")
            for kind, cname, v in bounds:
                fh.write(line(kind, "BND", cname, num(v)))
        fh.write("ENDATA\n")
    return path
