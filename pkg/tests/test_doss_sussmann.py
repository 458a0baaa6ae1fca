import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fbmtransport.doss_sussmann import (PRESETS, CoefficientSet, EulerGridH, HFlow, arctan_demo,
                                        compose_x, euler_bound, euler_y, f_euler, f_exact,
                                        flow_error_bound, get_preset, h_euler, h_flow, linear,
                                        register_preset, sin_cos, solve_y, validate_coeffs)
from fbmtransport.doss_sussmann.solvers import EULER_Y, REFERENCE_Y, X_EULER, X_EXACT_H, X_TILDE
from fbmtransport.errors import ConfigurationError, InvalidParameterError
from fbmtransport.fbm_driver import ApproxParams, exact_fbm, sample_bn
from fbmtransport.transport import RngSeed


def h_sin(x, y):
    # closed-form flow of h' = sin(h): tan(h/2) = tan(x/2) e^y
    return 2 * np.arctan(np.tan(x / 2) * np.exp(y))


def hx_sin(x, y):
    return np.sin(h_sin(x, y)) / np.sin(x)


def euler_loop(sig, n, x, y):
    h, r = x, 1.0 / n
    k = int(math.floor(abs(y) * n))
    s = math.copysign(1.0, y)
    for _ in range(k):
        h += s * r * sig(h)
    return h + s * (abs(y) - k * r) * sig(h)


def test_flow_matches_closed_form():
    h, hx, integ = h_flow(sin_cos(), 1.0, 0.5)
    assert h == pytest.approx(h_sin(1.0, 0.5), rel=1e-12)
    assert h == pytest.approx(1.4664040060843666, rel=1e-12)
    assert hx == pytest.approx(hx_sin(1.0, 0.5), rel=1e-10)
    assert math.exp(integ) == pytest.approx(hx, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(-2.0, 2.0))
def test_flow_closed_form_property(x, y):
    flow = HFlow(sin_cos())
    assert flow(x, y) == pytest.approx(h_sin(x, y), rel=1e-10, abs=1e-12)
    f = flow.f(x, y)
    assert f == pytest.approx(math.cos(h_sin(x, y)) / hx_sin(x, y), rel=1e-9, abs=1e-12)


def test_flow_state_shape_and_derivative():
    flow = HFlow(arctan_demo())
    st_ = flow.state(np.zeros((2, 3)), np.ones((2, 3)))
    assert st_.shape == (2, 3, 4)
    e = 1e-6
    fd = (flow(0.3 + e, -1.2) - flow(0.3 - e, -1.2)) / (2 * e)
    assert flow.evaluate(0.3, -1.2)[1] == pytest.approx(fd, rel=1e-6)


def test_euler_grid_flow_against_loop():
    c = sin_cos()
    assert h_euler(c, 2, 1.0, 1.0) == pytest.approx(1.915116484968269, rel=1e-14)
    for x, y in [(0.3, -1.7), (-1.1, 0.55), (2.0, 3.9)]:
        assert h_euler(c, 4, x, y) == pytest.approx(euler_loop(math.sin, 4, x, y), rel=1e-14)
    assert h_euler(c, 2, 2.5, 0.1) == 0.0


def test_euler_grid_f_converges_to_exact():
    c = sin_cos()
    exact = f_exact(c, 1.0, 0.5)
    errs = [abs(f_euler(c, n, 1.0, 0.5) - exact) for n in (16, 32, 64)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 2e-3


def test_flow_error_bound_value():
    c = sin_cos()
    assert flow_error_bound(c, 2, 8) == pytest.approx(0.25 * math.exp(2))


def test_linear_flow_is_affine():
    c = linear(0.5, 2.0)
    assert h_flow(c, 0.3, -0.7)[0] == pytest.approx(0.3 - 1.4)
    assert EulerGridH(c, 8)(0.3, -0.7) == pytest.approx(0.3 - 1.4)


def test_presets_and_registry():
    assert set(PRESETS) >= {"linear", "sin-cos", "arctan-demo"}
    assert get_preset("linear", b0=1.0).params[0] == 1.0
    with pytest.raises(InvalidParameterError):
        get_preset("nope")
    with pytest.raises(InvalidParameterError):
        register_preset("sin-cos", sin_cos)
    for name in ("linear", "sin-cos", "arctan-demo"):
        assert validate_coeffs(get_preset(name)).passed
    assert sin_cos().compiled
    assert sin_cos().with_x0(0.4).x0 == 0.4


def test_validate_reports_violation_with_witness():
    bad = CoefficientSet("bad", lambda x, p: math.sin(x), lambda x, p: math.cos(x),
                         lambda x, p: -math.sin(x), lambda x, p: 2 * math.cos(x),
                         lambda x, p: -2 * math.sin(x), 1.0, 1.0, 1.0, 1.0, 1.0)
    rep = validate_coeffs(bad)
    assert not rep.passed
    kinds = {v["quantity"] for v in rep.context["violations"]}
    assert kinds == {"|b|", "|b'|"}
    with pytest.raises(InvalidParameterError):
        solve_y(bad, sample_bn(ApproxParams(0.75, 0.3, 4), [0, 0.5, 1.0], RngSeed(0)))


def test_python_fallback_matches_compiled():
    py = CoefficientSet("py", lambda x, p: math.sin(x), lambda x, p: math.cos(x),
                        lambda x, p: -math.sin(x), lambda x, p: math.cos(x),
                        lambda x, p: -math.sin(x), 1.0, 1.0, 1.0, 1.0, 1.0)
    assert not py.compiled
    assert h_flow(py, 0.7, 0.4)[0] == pytest.approx(h_flow(sin_cos(), 0.7, 0.4)[0], rel=1e-14)
    assert f_euler(py, 4, 0.7, 0.4) == pytest.approx(f_euler(sin_cos(), 4, 0.7, 0.4), rel=1e-14)


def test_invalid_bound_declaration():
    with pytest.raises(InvalidParameterError):
        CoefficientSet("x", *([lambda x, p: 0.0] * 5), -1.0, 0.0, 0.0, 0.0, 0.0)


@pytest.fixture(scope="module")
def driver():
    return sample_bn(ApproxParams(0.75, 0.3, 8), np.linspace(0, 1, 65), RngSeed(0, 1))


def test_reference_solution_linear_case(driver):
    c = linear(0.5, 1.0, 0.2)
    y = solve_y(c, driver)
    # with sigma constant, h(x, y) = x + y so Y_t = x0 + b0 t
    np.testing.assert_allclose(y.y, 0.2 + 0.5 * driver.grid, atol=1e-12)
    x = compose_x(HFlow(c), y, driver)
    assert x.provenance == X_TILDE
    np.testing.assert_allclose(x.x, 0.2 + 0.5 * driver.grid + driver.values, atol=1e-11)


def test_euler_y_and_provenances(driver):
    c = sin_cos()
    ye = euler_y(c, 8, None, driver)
    assert ye.provenance == EULER_Y and ye.label == "euler-Y(8,64)"
    assert np.max(np.abs(ye.y)) <= euler_bound(c, 1.0, driver.sup_abs)
    xe = compose_x(EulerGridH(c, 8), ye, driver)
    assert xe.provenance == X_EULER
    assert compose_x(HFlow(c), ye, driver).provenance == X_EXACT_H
    yr = solve_y(c, driver)
    assert yr.provenance == REFERENCE_Y
    with pytest.raises(ConfigurationError):
        compose_x(EulerGridH(c, 8), yr, driver)
    with pytest.raises(ConfigurationError):
        compose_x(EulerGridH(c, 4), ye, driver)
    with pytest.raises(ConfigurationError):
        compose_x(EulerGridH(c, 8), euler_y(c, 8, 32, driver), driver)
    np.testing.assert_allclose(xe.x, compose_x(HFlow(c), yr, driver).x, atol=0.05)


def test_reference_solution_converges_in_step(driver):
    c = sin_cos()
    coarse = solve_y(c, driver)
    fine = solve_y(c, driver, step=1 / 256)
    finer = solve_y(c, driver, step=1 / 1024)
    assert np.max(np.abs(fine.y - finer.y)) < np.max(np.abs(coarse.y - finer.y)) + 1e-15
    assert np.max(np.abs(coarse.y - finer.y)) < 1e-6


def test_exact_driver_gives_exact_h_provenance():
    c = sin_cos()
    d = exact_fbm(0.7, np.linspace(0, 1, 33), RngSeed(2))
    x = compose_x(HFlow(c), solve_y(c, d), d)
    assert x.provenance == X_EXACT_H
    assert x.meta["y_provenance"] == REFERENCE_Y


def test_solver_grid_checks(driver):
    c = sin_cos()
    shifted = exact_fbm(0.7, [0.5, 1.0], RngSeed(0))
    with pytest.raises(ConfigurationError):
        solve_y(c, shifted)
    with pytest.raises(ConfigurationError):
        euler_y(c, 4)
    other = exact_fbm(0.7, np.linspace(0, 1, 5), RngSeed(0))
    with pytest.raises(ConfigurationError):
        compose_x(HFlow(c), solve_y(c, driver), other)
