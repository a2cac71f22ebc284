"""Worst-case CVaR bounds for counterparty credit risk.

Given exposure scenarios (the market marginal) and a discretised systematic
credit factor (the credit marginal), compute the joint law that maximises
portfolio CVaR, compare it with Gaussian-copula stress couplings, and
simulate losses from any coupling.
"""
__version__ = "0.1.0"

from .errors import ParseError, SolverError, ValidationError, WrongWayError  # noqa: E402
from .portfolio import (  # noqa: E402
    ConcentrationReport, Counterparty, ExposureMatrix, concentration, exposure_band_report,
    load_counterparties, load_exposures, total_exposure_histogram)
from .credit import (  # noqa: E402
    BaselInputs, CreditGrid, LossSurface, basel_capital, build_credit_grid, conditional_pd, cwi,
    norm_cdf, norm_inv, systematic_loss_surface, total_loss)
from .risk import (  # noqa: E402
    DiscreteDistribution, alpha_multiplier, cvar, cvar_by_tilting, economic_capital, var)
from .lp import LinearProgram, LpSolution, SolveOptions, check_certificate, solve  # noqa: E402
from .mps import export_mps  # noqa: E402
from .wcc import (  # noqa: E402
    WorstCaseCoupling, build_full_lp, build_reduced_lp, extend_mu_to_psi, greedy_upper_start, solve_wcc)
from .copula import (  # noqa: E402
    RatioCurve, bivariate_normal_cdf, comparator_coupling, copula_coupling, ratio_curve, sort_scenarios)
from .sim import SimConfig, sample_cell, sample_truncated_normal, simulate_losses  # noqa: E402
