"""Synthetic portfolios for demos and tests.

Exposures are positive parts of linear positions in a few shared market
factors, with heavy-tailed notionals so that a handful of names dominate.
This mimics the skewed, concentrated exposure profiles typical of OTC books
without using any real data.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ._prob import uniform
from .portfolio import Counterparty, ExposureMatrix


def synthetic_portfolio(n_counterparties: int = 50, n_scenarios: int = 500, n_factors: int = 3,
                        seed: int = 2014):
    rng = np.random.default_rng(seed)
    K, M = n_counterparties, n_scenarios
    factors = rng.standard_normal((n_factors, M))
    # fat common shock so total exposure is skewed
    shock = rng.standard_t(4, M)
    loadings = rng.normal(size=(K, n_factors))
    notionals = (rng.pareto(1.5, K) + 1.0) * 10.0
    drift = rng.uniform(-0.5, 1.0, K)
    mtm = drift[:, None] + loadings @ factors + 0.5 * np.abs(shock)[None, :] + 0.3 * rng.standard_normal((K, M))
    exposures = notionals[:, None] * np.maximum(mtm, 0.0)
    ids = tuple(f"CP{k + 1:03d}" for k in range(K))
    x = ExposureMatrix(ids, exposures, uniform(M))
    pds = np.clip(np.exp(rng.normal(np.log(0.01), 0.8, K)), 1e-4, 0.2)
    rhos = rng.uniform(0.12, 0.24, K)
    lgds = rng.choice([0.45, 0.6, 0.75], K)
    cps = [Counterparty(i, float(p), float(r), float(l)) for i, p, r, l in zip(ids, pds, rhos, lgds)]
    return x, cps


def write_portfolio(x: ExposureMatrix, cps, exposures_path, counterparties_path, explicit_probs=False):
    exposures_path, counterparties_path = Path(exposures_path), Path(counterparties_path)
    with exposures_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["counterparty_id"] + [f"s{m + 1}" for m in range(x.n_scenarios)])
        for cid, row in zip(x.counterparty_ids, x.exposures):
            w.writerow([cid] + [repr(float(v)) for v in row])
        if explicit_probs:
            w.writerow(["__probs__"] + [repr(float(v)) for v in x.probs])
    with counterparties_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["counterparty_id", "pd", "rho", "lgd", "ead_override"])
        for c in cps:
            w.writerow([c.id, repr(c.pd), repr(c.rho), repr(c.lgd),
                        "" if c.ead_override is None else repr(c.ead_override)])
    return exposures_path, counterparties_path
