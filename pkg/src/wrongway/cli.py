"""Command-line front end: ``wrongway {report,wcc,compare,simulate,mps-export}``.

Settings come from an optional JSON config file (``--config``) with flags
taking precedence. Exit codes: 0 success, 2 validation error, 3 solver
failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, reports
from .copula import SIGN_CONVENTION, ratio_curve, sort_scenarios
from .credit import build_credit_grid, conditional_pd_matrix, systematic_loss_surface
from .errors import SolverError, ValidationError
from .mps import export_mps
from .portfolio import (align, concentration, exposure_band_report, load_counterparties, load_exposures,
                        total_exposure_histogram)
from .risk import EC_MODES, DiscreteDistribution, alpha_multiplier, cvar, economic_capital
from .sim import LOSS_KINDS, SimConfig, discretization_gap, simulate_losses, summarize
from .wcc import FORMULATIONS, build_full_lp, build_reduced_lp, solve_wcc

log = logging.getLogger("wrongway")

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


@dataclass
class RunConfig:
    exposures: Optional[str] = None
    counterparties: Optional[str] = None
    out_dir: str = "out"
    probs_mode: str = "uniform"
    alpha: list = field(default_factory=lambda: [0.95, 0.99])
    grid_n: int = 1000
    z_lo: float = -5.0
    z_hi: float = 5.0
    formulation: str = "reduced"
    r_grid: str = "-1:1:21"
    seed: int = 0
    loss_kind: str = "systematic"
    n_draws: int = 100_000
    stream_id: int = 0
    top_n: Optional[int] = None
    bins: int = 50
    ec_mode: str = "cvar_minus_el"
    coupling: Optional[str] = None
    raw_losses: bool = False

    def validate(self):
        if not self.alpha or not all(0 < a < 1 for a in self.alpha):
            raise ValidationError(f"alpha levels must lie in (0, 1): {self.alpha}")
        if self.grid_n < 1:
            raise ValidationError("grid_n must be >= 1")
        if not self.z_lo < self.z_hi:
            raise ValidationError("z_lo must be below z_hi")
        if self.formulation not in FORMULATIONS:
            raise ValidationError(f"formulation must be one of {FORMULATIONS}")
        if self.loss_kind not in LOSS_KINDS:
            raise ValidationError(f"loss_kind must be one of {LOSS_KINDS}")
        if self.probs_mode not in ("uniform", "explicit"):
            raise ValidationError("probs_mode must be uniform or explicit")
        if self.ec_mode not in EC_MODES:
            raise ValidationError(f"ec_mode must be one of {EC_MODES}")
        if self.n_draws < 1 or self.bins < 1:
            raise ValidationError("n_draws and bins must be >= 1")
        if self.top_n is not None and self.top_n < 1:
            raise ValidationError("top_n must be >= 1")
        parse_r_grid(self.r_grid)
        return self


def parse_r_grid(spec) -> np.ndarray:
    """``"lo:hi:count"`` (inclusive linspace), a comma list, or a list of numbers."""
    if isinstance(spec, (list, tuple)):
        vals = np.array(spec, dtype=float)
    else:
        text = str(spec).strip()
        try:
            if ":" in text:
                lo, hi, n = text.split(":")
                vals = np.linspace(float(lo), float(hi), int(n))
            else:
                vals = np.array([float(t) for t in text.split(",") if t.strip()])
        except ValueError:
            raise ValidationError(f"cannot parse r grid {spec!r}") from None
    if vals.size == 0 or np.any(np.abs(vals) > 1):
        raise ValidationError(f"r grid must be non-empty within [-1, 1]: {spec!r}")
    return vals


def _alphas(values):
    out = []
    for v in values:
        out.extend(float(t) for t in str(v).split(",") if t.strip())
    return out


def load_config(args) -> RunConfig:
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {args.config}: {exc}") from None
        base = {k.replace("-", "_"): v for k, v in base.items()}
        known = {f.name for f in fields(RunConfig)}
        unknown = sorted(set(base) - known)
        if unknown:
            raise ValidationError(f"unknown config keys: {unknown}")
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is None:
            continue
        if f.name == "alpha":
            v = _alphas(v)
        base[f.name] = v
    if "alpha" in base and not isinstance(base["alpha"], list):
        base["alpha"] = _alphas([base["alpha"]])
    try:
        cfg = RunConfig(**base)
    except TypeError as exc:
        raise ValidationError(str(exc)) from None
    return cfg.validate()


def _tag(alpha):
    return f"a{alpha:g}"


class _Run:
    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.config = asdict(cfg)
        self.written = []

    def meta(self, **extra):
        return reports.make_meta(self.config, self.command, **extra)

    def csv(self, name, header, rows, **extra):
        self.written.append(reports.write_csv(self.out / name, self.meta(**extra), header, rows))

    def json(self, name, rows, meta_extra=None, **extra):
        self.written.append(reports.write_json(self.out / name, self.meta(**(meta_extra or {})), rows, **extra))

    def need(self, *names):
        for n in names:
            if not getattr(self.cfg, n):
                raise ValidationError(f"--{n.replace('_', '-')} is required for '{self.command}'")

    def exposures(self):
        return load_exposures(self.cfg.exposures, self.cfg.probs_mode)

    def model(self):
        x = self.exposures()
        cps = align(x, load_counterparties(self.cfg.counterparties))
        grid = build_credit_grid(self.cfg.grid_n, self.cfg.z_lo, self.cfg.z_hi)
        return x, cps, grid, systematic_loss_surface(x, cps, grid)


def cmd_report(cfg: RunConfig):
    run = _Run(cfg, "report")
    run.need("exposures")
    x = run.exposures()
    epe = x.epe()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        conc = concentration(epe, cfg.top_n or x.n_counterparties)
    notes = [str(w.message) for w in caught]
    for n in notes:
        log.warning(n)

    order = np.argsort(-epe, kind="stable")
    header = ["rank", "counterparty_id", "epe", "cumulative_share", "effective_counterparties"]
    rows = [{"rank": i + 1, "counterparty_id": x.counterparty_ids[k], "epe": float(epe[k]),
             "cumulative_share": float(conc.cumulative_exposure_share[i]),
             "effective_counterparties": float(conc.effective_by_rank[i])}
            for i, k in enumerate(order)]
    summary = {"top_n": conc.top_n, "herfindahl": conc.herfindahl,
               "effective_counterparties": conc.effective_counterparties}
    run.csv("concentration.csv", header, rows, warnings=notes)
    run.json("concentration.json", rows, {"warnings": notes}, summary=summary)

    bands, excluded = exposure_band_report(x)
    if excluded:
        log.warning("%d counterparties with zero mean exposure left out of the band report", len(excluded))
    header = ["counterparty_id", "mean", "p5_pct_of_mean", "p95_pct_of_mean"]
    run.csv("bands.csv", header, bands)
    run.json("bands.json", bands, {"excluded_zero_mean": excluded})

    edges, mass = total_exposure_histogram(x, cfg.bins)
    rows = [{"bin_lo": float(edges[i]), "bin_hi": float(edges[i + 1]), "mass": float(mass[i])}
            for i in range(len(mass))]
    run.csv("histogram.csv", ["bin_lo", "bin_hi", "mass"], rows)
    run.json("histogram.json", rows)
    return run.written


def _epe_alpha(surface, x, cps, grid, coupling, alpha, mode):
    """Capital under the worst-case law over capital with exposures fixed at EPE."""
    lgd = np.array([c.lgd for c in cps])
    pd = np.array([c.pd for c in cps])
    rho = np.array([c.rho for c in cps])
    epe_losses = (lgd * x.epe()) @ conditional_pd_matrix(pd, rho, grid.cell_reps)
    ec_epe = economic_capital(DiscreteDistribution(epe_losses, grid.cell_probs), alpha, mode)
    ec_total = economic_capital(DiscreteDistribution.from_coupling(surface.values, coupling.psi), alpha, mode)
    ratio = alpha_multiplier(ec_total, ec_epe) if ec_epe > 0 else None
    return {"ec_mode": mode, "ec_worst_case": ec_total, "ec_epe": ec_epe, "alpha_multiplier": ratio}


def cmd_wcc(cfg: RunConfig):
    run = _Run(cfg, "wcc")
    run.need("exposures", "counterparties")
    x, cps, grid, surface = run.model()
    summary = []
    for a in cfg.alpha:
        wc = solve_wcc(surface, a, cfg.formulation)
        cert = wc.certificate
        nz = np.argwhere(wc.psi > 0)
        rows = [(int(m), int(n), float(wc.psi[m, n]), float(wc.mu[m, n])) for m, n in nz]
        run.csv(f"coupling_{_tag(a)}.csv", ["m", "n", "psi", "mu"], rows)
        marg = DiscreteDistribution(surface.values @ surface.credit_probs, surface.market_probs)
        row = {
            "alpha": a,
            "wcc_cvar": wc.wcc_cvar,
            "formulation": wc.formulation,
            "gap": cert["duality_gap"],
            "support_size": wc.support_size,
            "tail_support_size": int(np.count_nonzero(wc.mu > 0)),
            "primal_residual": cert["primal_residual"],
            "iterations": cert["iterations"],
            "agreement_gap": cert.get("agreement_gap"),
            "independent_cvar": cvar(DiscreteDistribution.from_coupling(
                surface.values, np.outer(surface.market_probs, surface.credit_probs)), a),
            "expected_loss": float(surface.market_probs @ surface.values @ surface.credit_probs),
            "market_marginal_cvar": cvar(marg, a),
        }
        row.update(_epe_alpha(surface, x, cps, grid, wc, a, cfg.ec_mode))
        summary.append(row)
        run.json(f"wcc_{_tag(a)}.json", [row], {"M": x.n_scenarios, "N": grid.n_cells}, certificate=cert)
    header = list(summary[0].keys())
    run.csv("wcc_summary.csv", header, summary)
    run.json("wcc_summary.json", summary, {"M": x.n_scenarios, "N": grid.n_cells})
    return run.written


def _ratio_label(kind):
    short = "sys" if kind == "systematic" else "tot"
    return (f"min (CVaR_{short} / CVaR_wcc)", f"max (CVaR_{short} / CVaR_wcc)")


def cmd_compare(cfg: RunConfig):
    run = _Run(cfg, "compare")
    run.need("exposures", "counterparties")
    x, cps, grid, surface = run.model()
    order = sort_scenarios(x)
    r_grid = parse_r_grid(cfg.r_grid)
    kind = cfg.loss_kind
    table = []
    for a in cfg.alpha:
        wc = solve_wcc(surface, a, cfg.formulation)
        if kind == "systematic":
            curve = ratio_curve(surface, wc.wcc_cvar, a, r_grid, grid, order)
        else:
            sim = SimConfig(n_draws=cfg.n_draws, seed=cfg.seed, loss_kind="total", stream_id=cfg.stream_id)

            def total_cvar(psi):
                return cvar(simulate_losses(psi, x, cps, grid, sim), a)

            curve = ratio_curve(surface, total_cvar(wc.psi), a, r_grid, grid, order,
                                loss_kind="total", evaluate=total_cvar)
        rows = [{"r": float(r), "comparator_cvar": float(c), "wcc_cvar": curve.wcc_cvar, "ratio": float(q)}
                for r, c, q in zip(curve.correlations, curve.comparator_cvar, curve.ratio)]
        extra = {"sign_convention": SIGN_CONVENTION, "loss_kind": kind}
        run.csv(f"ratio_{kind}_{_tag(a)}.csv", ["r", "comparator_cvar", "wcc_cvar", "ratio"], rows, **extra)
        run.json(f"ratio_{kind}_{_tag(a)}.json", rows, extra, alpha=a, loss_kind=kind,
                 min_ratio=curve.min_ratio, max_ratio=curve.max_ratio)
        table.append({"alpha": a, "min_ratio": curve.min_ratio, "max_ratio": curve.max_ratio,
                      "argmin_r": curve.argmin, "argmax_r": curve.argmax})
    lo_label, hi_label = _ratio_label(kind)
    case = {"M": x.n_scenarios, "N": grid.n_cells, "loss_kind": kind}
    run.csv("compare_table.csv", ["alpha", lo_label, hi_label],
            [[f"{t['alpha']:g}", f"{100 * t['min_ratio']:.1f}%", f"{100 * t['max_ratio']:.1f}%"] for t in table],
            case=case)
    run.json("compare_table.json", table, {"sign_convention": SIGN_CONVENTION}, case=case,
             columns=["alpha", lo_label, hi_label])
    (run.out / "compare_table.txt").write_text(render_table(table, case), encoding="utf-8")
    run.written.append(run.out / "compare_table.txt")
    return run.written


def render_table(table, case) -> str:
    """Plain-text min/max ratio table, one block per case."""
    lo_label, hi_label = _ratio_label(case["loss_kind"])
    order = int(round(np.log10(case["M"] * case["N"])))
    lines = [
        f"MN = O(10^{order})    M = {case['M']} market scenarios    N = {case['N']} credit scenarios",
        f"{'alpha':<8}{lo_label:<30}{hi_label:<30}",
    ]
    for t in table:
        lo, hi = f"{100 * t['min_ratio']:.1f}%", f"{100 * t['max_ratio']:.1f}%"
        lines.append(f"{t['alpha']:<8g}{lo:<30}{hi}")
    return "\n".join(lines) + "\n"


def read_coupling(path, shape):
    psi = np.zeros(shape)
    for row in reports.read_csv_rows(path):
        m, n = int(row["m"]), int(row["n"])
        if not (0 <= m < shape[0] and 0 <= n < shape[1]):
            raise ValidationError(f"coupling cell ({m}, {n}) outside the {shape} model")
        psi[m, n] = float(row["psi"])
    return psi


def cmd_simulate(cfg: RunConfig):
    run = _Run(cfg, "simulate")
    run.need("exposures", "counterparties", "coupling")
    if not Path(cfg.coupling).exists():
        raise FileNotFoundError(f"coupling file {cfg.coupling} not found")
    x, cps, grid, surface = run.model()
    psi = read_coupling(cfg.coupling, surface.shape)
    sim = SimConfig(n_draws=cfg.n_draws, seed=cfg.seed, loss_kind=cfg.loss_kind, stream_id=cfg.stream_id)
    dist = simulate_losses(psi, x, cps, grid, sim)
    losses = dist.outcomes
    summ = summarize(losses, cfg.alpha)
    exact = DiscreteDistribution.from_coupling(surface.values, psi)
    for lvl in summ["levels"]:
        lvl["exact_systematic_cvar"] = cvar(exact, lvl["alpha"])
    summ["exact_systematic_mean"] = exact.mean()
    summ["discretization"] = discretization_gap(psi, x, cps, grid)
    summ["loss_kind"] = cfg.loss_kind
    run.json("simulate_summary.json", summ["levels"], summary={k: v for k, v in summ.items() if k != "levels"})
    run.csv("simulate_summary.csv", ["alpha", "var_alpha", "cvar_alpha", "exact_systematic_cvar"], summ["levels"])
    if cfg.raw_losses:
        run.csv("losses.csv", ["loss"], ([float(v)] for v in losses))
    return run.written


def cmd_mps_export(cfg: RunConfig):
    run = _Run(cfg, "mps-export")
    run.need("exposures", "counterparties")
    _, _, _, surface = run.model()
    form = "full" if cfg.formulation == "full" else "reduced"
    build = build_full_lp if form == "full" else build_reduced_lp
    rows = []
    for a in cfg.alpha:
        lp = build(surface, a)
        path = export_mps(lp, run.out / f"wcc_{form}_{_tag(a)}.mps")
        run.written.append(path)
        rows.append({"alpha": a, "file": path.name, "rows": lp.n_rows, "cols": lp.n_vars,
                     "nonzeros": int(lp.A.nnz), "objective_scale": 1.0 / (1.0 - a)})
    run.json("mps_export.json", rows, {"objective_sign": "negated (minimisation form)"})
    return run.written


COMMANDS = {
    "report": cmd_report,
    "wcc": cmd_wcc,
    "compare": cmd_compare,
    "simulate": cmd_simulate,
    "mps-export": cmd_mps_export,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--config", help="JSON config file; flags override its values")
    g.add_argument("--exposures", help="exposure CSV (counterparty_id,s1,...,sM)")
    g.add_argument("--counterparties", help="counterparty CSV (counterparty_id,pd,rho,lgd,ead_override)")
    g.add_argument("--probs-mode", dest="probs_mode", choices=["uniform", "explicit"])
    g.add_argument("--alpha", action="append", help="confidence level(s); repeat or comma-separate")
    g.add_argument("--grid-n", dest="grid_n", type=int, help="number of credit-factor cells")
    g.add_argument("--z-lo", dest="z_lo", type=float)
    g.add_argument("--z-hi", dest="z_hi", type=float)
    g.add_argument("--formulation", choices=FORMULATIONS)
    g.add_argument("--seed", type=int)
    g.add_argument("--out-dir", dest="out_dir")
    g.add_argument("--loss-kind", dest="loss_kind", choices=LOSS_KINDS)
    g.add_argument("--r-grid", dest="r_grid", help="'lo:hi:count' or comma list of copula correlations")
    g.add_argument("--n-draws", dest="n_draws", type=int)
    g.add_argument("--stream-id", dest="stream_id", type=int)
    g.add_argument("--top-n", dest="top_n", type=int)
    g.add_argument("--bins", type=int)
    g.add_argument("--ec-mode", dest="ec_mode", choices=EC_MODES)
    g.add_argument("--coupling", help="coupling CSV written by 'wcc' (for 'simulate')")
    g.add_argument("--raw-losses", dest="raw_losses", action="store_const", const=True)
    g.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="wrongway", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"wrongway {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _attach_values(argv):
    # argparse reads "--r-grid -1:1:5" as two options; glue the value on
    out = list(argv)
    for i in range(len(out) - 1):
        if out[i] == "--r-grid":
            out[i:i + 2] = [f"--r-grid={out[i + 1]}", None]
    return [a for a in out if a is not None]


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    args = build_parser().parse_args(_attach_values(argv))
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        written = COMMANDS[args.command](cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        if exc.solution is not None:
            print(f"  status={exc.solution.status} iterations={exc.solution.iterations}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for p in written:
        log.info("wrote %s", p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
