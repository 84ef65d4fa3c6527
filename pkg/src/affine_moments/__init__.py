"""Affine processes: Riccati-based transforms, moment explosions and pricing.

Everything uses the moment-generating convention
``E^x[exp(<u, X_T>)] = exp(phi(T, u) + <psi(T, u), x>)``.
"""
from .domain import DomainClass, DomainY, HalfSpace
from .errors import (AffineError, ConvergenceError, DomainError, StructuralError,
                     UnsupportedError)
from .jumps import (GaussianJumps, MatrixPointMasses, NumericDensity, OneSidedExponential,
                    PointMassMixture, ZeroMeasure)
from .levy import (FunctionalFamily, LKFunctional, build_family, domain_classify, eval_complex,
                   eval_real, growth_bound, raw_family, verify_complex_inequality)
from .mc_oracle import PathEnsemble, compare, empirical_cf, empirical_mgf, simulate
from .pricing import (PayoffTransform, ShortRateSpec, asset_explosion_time, bond_price,
                      discounted_exponent, european_call, european_put, fourier_price,
                      martingale_check)
from .riccati import (MinimalityCertificate, RiccatiTrajectory, SolveOptions, comparison_check,
                      explosion_time, solve_complex, solve_extended, verify_semiflow)
from .state_space import (AffineParams, Canonical, MatrixAffineParams, MatrixCone,
                          ValidationReport, check_complex_assumption, embed_discounting, validate,
                          validate_canonical, validate_matrix)
from .transform import MomentResult, char_function, conditional_exponent, exp_moment

__version__ = "0.1.0"
