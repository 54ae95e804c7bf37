"""Monte Carlo periodic homogenization of (possibly degenerate) diffusions
on flat tori: simulation, ergodic averaging, cell-problem correctors,
effective coefficients, CLT verification, and Feynman-Kac solvers."""

__version__ = "0.1.0"

from .torus import Torus, periodic_distance, wrap
from .fields import (Ball, CoefficientSet, EmptyRegion, ValidationReport,
                     WholeCell, builtin, divergence_form_drift, validate)
from .engine import (PathBatch, SimConfig, simulate_original, simulate_scaled,
                     simulate_jacobian, hitting_diagnostic, a4_diagnostic)
from .ergodic import (InvariantMeasureEstimate, MixingDiagnostic,
                      birkhoff_average, estimate_invariant, mixing_rate,
                      pi_average, pi_epsilon_convergence, uniform_measure)
from .corrector import (CorrectorField, differentiate, poisson_residual,
                        solve_corrector, truncation_horizon)
from .effective import (EffectiveModel, cross_check, effective_from_corrector,
                        effective_from_longtime, flux_identity_gap)
from .clt import (CltReport, quadratic_variation_check, semigroup_convergence,
                  verify_clt, weak_error_fit)
from .fk import (DomainSpec, FeynmanKacEstimate, ball_domain,
                 solve_elliptic, solve_elliptic_extrapolated,
                 solve_elliptic_homogenized, solve_parabolic,
                 solve_parabolic_homogenized, step_extrapolate)
