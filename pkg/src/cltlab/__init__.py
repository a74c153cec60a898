"""Spectral diagnostics and central-limit rates for additive functionals of
finite Markov chains."""

from .chain import (
    Distribution,
    ErgodicityProfile,
    FiniteChain,
    Observable,
    apply_Q,
    center_observable,
    ergodicity_profile,
    parse_chain_text,
    period,
    stationary_distribution,
    validate_chain,
)
from .poisson import (
    CltDiagnostics,
    clt_diagnostics,
    covariance_series_variance,
    green_sum,
    h2_series,
    h3_audit,
    psi_function,
    sigma_squared,
    solve_poisson,
)
from .spectral import (
    FourierKernel,
    SpectralData,
    build_kernel,
    contour_projector,
    doeblin_fortet_audit,
    lambda_expansion_check,
    perturbation_bounds,
    resolvent_difference_bound,
    spectral_decompose,
)
from .cf import (
    LatticeCdf,
    PairChain,
    cf_gap_profile,
    esseen_bound,
    exact_cdf_lattice,
    exact_cf_sn,
    exact_cf_tn,
    kolmogorov_distance_exact,
    kolmogorov_distance_mc,
    martingale_audit,
    normal_cdf,
)
from .models import (
    DiscretizedModel,
    IterativeModel,
    NoiseLaw,
    check_condition_star,
    discretize_ar1,
    make_two_state,
    make_v_ergodic_example,
    simulate_iterative,
)
from .config import ExperimentConfig, parse_config
from .experiment import RateReport, fit_rate_exponent, run_experiment
from .report import emit_report

__version__ = "0.1.0"
