"""Doss-Sussmann representation ``X_t = h(Y_t, B_t)``: exact flows and Euler schemes."""
from .coefficients import (PRESETS, CoefficientSet, arctan_demo, get_preset, linear,
                           register_preset, sin_cos, validate_coeffs)
from .flow import (EulerGridH, HFlow, f_euler, f_exact, flow_error_bound, h_euler, h_flow,
                   inverse_derivative_slope)
from .solvers import (EULER_Y, REFERENCE_Y, X_EULER, X_EXACT_H, X_TILDE, SolutionPath,
                      compose_x, euler_bound, euler_y, solve_y)

__all__ = [
    "CoefficientSet", "PRESETS", "linear", "sin_cos", "arctan_demo", "get_preset",
    "register_preset", "validate_coeffs",
    "HFlow", "EulerGridH", "h_flow", "h_euler", "f_exact", "f_euler", "flow_error_bound",
    "inverse_derivative_slope",
    "SolutionPath", "solve_y", "euler_y", "compose_x", "euler_bound",
    "REFERENCE_Y", "EULER_Y", "X_EXACT_H", "X_EULER", "X_TILDE",
]
