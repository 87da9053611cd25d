"""Numerical laboratory for Ornstein-Uhlenbeck semigroups ``dX = AX dt + dW_H``."""

from .config import DEFAULT, PROFILES, Tolerances, get_profile
from .errors import (ModelError, NotInSpaceError, NotNormalError, NotStableError, NumericalError,
                     OULabError, QuadratureError, UnrepresentableError, UnsupportedFunctionError)
from .model import (OuModel, PowerLaw, build_decoupled, build_diagonal, build_heat_spectral,
                    build_paper_2x2, builtin)
from .linalg import expm, numerical_range, pencil_sup_ratio, pseudo_apply
from .covariance import (check_q_symmetry, gramian, gramian_family, gramian_from_identity,
                         gramian_quadrature, invariant_covariance, solve_lyapunov)
from .rkhs import RkhsSpace, build_H, build_Hinf, build_Ht, equivalent_norms, inclusion, rkhs_norm
from .restriction import (check_invariance, contraction_criterion, kalman_rank, normal_energy_identity,
                          regularization_estimate, restrict, strong_feller)
from .diagnostics import analyticity, analyze, cross_checks, s_infinity_norm, spectral_gap
from .engine import (CylindricalFunction, generator_apply, generator_consistency, ibp_check,
                     sample_path, sample_transition, transition_apply)
from .chaos import (ChaosBasis, gamma_operator, generator_spectrum_chaos, transition_chaos, whiten)

__version__ = "0.1.0"
