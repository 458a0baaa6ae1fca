"""Transport-process approximation of fractional Brownian motion and Euler
schemes for scalar SDEs driven by it, with pathwise bound checkers."""
from . import analysis, doss_sussmann, fbm_driver, transport
from .analysis import (ConvergenceConfig, RateTable, alpha_n, check_h_bounds,
                       check_h_euler_bound, check_y_bounds, convergence_experiment,
                       covariance_experiment, rate_fit, sup_norm_diff)
from .doss_sussmann import (CoefficientSet, EulerGridH, HFlow, SolutionPath, compose_x,
                            euler_y, h_euler, h_flow, solve_y, validate_coeffs)
from .errors import (ConfigurationError, DomainError, FactorizationError, InsufficientDataError,
                     IntegrationError, InvalidParameterError, NotApplicableError,
                     QuadratureError)
from .fbm_driver import (ApproxParams, DriverPath, build_bn, epsilon_n, exact_fbm,
                         fbm_covariance, kernel_df, kernel_f, kernel_g, lipschitz_audit,
                         normalization_c, sample_bn, third_segment_kernel)
from .reports import BoundReport
from .transport import (Orientation, RngSeed, TransportPath, eval_transport, generate_transport,
                        integrate_against, sup_abs)

__version__ = "0.1.0"
