"""Minimizing-movement schemes for mobility-weighted transport distances."""

from .errors import (CflError, ConfigError, ConvergenceError, DomainError,
                     InvariantViolation, JkoFlowError, NumericalError, StepError)
from .jko import JkoConfig, JkoTrajectory, interpolant_at, jko_step, run_scheme
from .mobility import (EntropyGenerator, MobilitySpec, big_G, entropy_G, mobility,
                       u_functional, u_potential)
from .spectral import (ScalarField, TorusGrid, VectorField, divergence,
                       fractional_laplacian, gradient, riesz_potential,
                       sobolev_inner, sobolev_norm_sq)
from .transport import (SolverOptions, TransportPath, W2mResult, action,
                        continuity_residual, prox_action, solve_w2m)

__version__ = "0.1.0"
