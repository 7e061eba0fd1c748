"""Second-order limit theory for finite-state branching Markov processes.

Modules:
    model      model description, validation and Jordan-structured designs
    spectral   Jordan decomposition of the mean generator and regime classification
    moments    first and second moments, limit variances, log-Laplace functional
    simulator  exact event-driven simulation and ensembles
    clt        Monte Carlo verification of the limit theorems
    cli        command line front end
"""

from .catalog import CATALOG, named_model
from .clt import (
    Claim,
    VerificationReport,
    null_calibration,
    survival_filter,
    verify_clt_critical,
    verify_clt_large,
    verify_clt_small,
    verify_joint,
    verify_lln,
    verify_martingale_means,
)
from .errors import BranchingError, ConfigError
from .model import FiniteModel, JordanDesign, build_model, from_jordan_design, load_model
from .moments import (
    E_t,
    I_s,
    QuadratureConfig,
    beta_cross,
    beta_sq,
    covariance,
    first_moment,
    laplace_functional,
    limit_variances,
    moments_from_laplace,
    rho_cross,
    rho_sq,
    second_moment,
    sigma_cross,
    sigma_sq,
    var_H_infinity,
    variance,
)
from .simulator import EnsembleStats, martingales, observe, run_ensemble, simulate
from .spectral import SpectralDecomposition, classify_function, mean_semigroup, spectral_decompose
from .stats import ks_distance, normal_cdf

__version__ = "0.1.0"

__all__ = [
    "CATALOG",
    "BranchingError",
    "Claim",
    "ConfigError",
    "E_t",
    "EnsembleStats",
    "FiniteModel",
    "I_s",
    "JordanDesign",
    "QuadratureConfig",
    "SpectralDecomposition",
    "VerificationReport",
    "beta_cross",
    "beta_sq",
    "build_model",
    "classify_function",
    "covariance",
    "first_moment",
    "from_jordan_design",
    "ks_distance",
    "laplace_functional",
    "limit_variances",
    "load_model",
    "martingales",
    "mean_semigroup",
    "moments_from_laplace",
    "named_model",
    "normal_cdf",
    "null_calibration",
    "observe",
    "rho_cross",
    "rho_sq",
    "run_ensemble",
    "second_moment",
    "sigma_cross",
    "sigma_sq",
    "simulate",
    "spectral_decompose",
    "survival_filter",
    "var_H_infinity",
    "variance",
    "verify_clt_critical",
    "verify_clt_large",
    "verify_clt_small",
    "verify_joint",
    "verify_lln",
    "verify_martingale_means",
]
