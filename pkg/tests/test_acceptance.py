"""Acceptance gate: one test per criterion, each at its stated tolerance.

Each test records PASS/FAIL with a short detail line; conftest prints them in
the terminal summary.
"""
import time
from functools import lru_cache

import mpmath
import numpy as np
import pytest
from scipy import stats

from conftest import record
from fbmtransport import cli
from fbmtransport._validation import uniform_grid
from fbmtransport.analysis import (ConvergenceConfig, HSampleSpec, check_h_bounds,
                                   check_h_euler_bound, check_inverse_derivative_growth,
                                   check_y_bounds, convergence_experiment,
                                   covariance_experiment, h_euler_order, lipschitz_trend,
                                   sample_matrix)
from fbmtransport.doss_sussmann import (EulerGridH, compose_x, euler_y, linear, sin_cos)
from fbmtransport.fbm_driver import ApproxParams, normalization_c, sample_bn
from fbmtransport.transport import RngSeed, eval_transport, generate_transport

# beta closest to 1/2 among round admissible values: it keeps the cutoff
# |eps_n| smallest and so the truncation bias of the approximant smallest
MC_BETA = 0.45
MC_N = 50
MC_REPLICAS = 4000
MC_SEED = 0
COV_GRID = [0.25, 0.5, 0.75, 1.0]

# normalization constants from an independent mpmath evaluation at 40 digits
# of 1 / sqrt(int_0^inf ((1+s)^(H-1/2) - s^(H-1/2))^2 ds + 1/(2H))
FROZEN_C = {0.3: 0.73028293407992295, 0.6: 1.0760051841318072, 0.75: 1.0696446350319903}


@lru_cache(maxsize=None)
def _covariance_run(H):
    t0 = time.perf_counter()
    rep = covariance_experiment(ApproxParams(H, MC_BETA, MC_N), MC_REPLICAS, COV_GRID, MC_SEED,
                                tolerance=0.1)
    return rep, time.perf_counter() - t0


def test_criterion_01_transport_marginal():
    t0 = time.perf_counter()
    reps = 2000
    vals = np.array([eval_transport(generate_transport(100, 1.0, seed=RngSeed(0, r)), 1.0)
                     for r in range(reps)])
    ks = stats.kstest(vals, "norm").statistic
    crit = stats.kstwo.ppf(0.99, reps)
    elapsed = time.perf_counter() - t0
    ok = ks < crit and elapsed < 10
    record(1, ok, f"KS={ks:.4f} < {crit:.4f}, runtime {elapsed:.1f}s < 10s")
    assert ks < crit
    assert elapsed < 10


def _c_oracle(H):
    mpmath.mp.dps = 30
    p = H - 0.5
    tail = mpmath.quad(lambda s: ((1 + s) ** p - s ** p) ** 2, [0, 1, 10, mpmath.inf])
    return float(1 / mpmath.sqrt(tail + 1 / (2 * mpmath.mpf(H)))), float(tail)


@pytest.mark.slow
def test_criterion_02_normalization():
    details, ok = [], True
    for H in (0.3, 0.6, 0.75):
        c = normalization_c(H)
        c_ref, tail = _c_oracle(H)
        identity = c * c * (tail + 1 / (2 * H))
        good = (abs(identity - 1) <= 1e-8 and abs(c - c_ref) <= 1e-8 * c_ref
                and abs(c - FROZEN_C[H]) <= 1e-8 * FROZEN_C[H])
        ok &= good
        details.append(f"H={H}: |C^2 V - 1|={abs(identity - 1):.1e}")
    for H in (0.3, 0.6, 0.75):
        if H in (0.3, 0.75):
            var = _covariance_run(H)[0].context["mc_cov"][-1][-1]
        else:
            S = sample_matrix(ApproxParams(H, MC_BETA, MC_N), [1.0], MC_REPLICAS, MC_SEED)
            var = float(np.var(S[:, 0], ddof=1))
        ok &= abs(var - 1) <= 0.1
        details.append(f"H={H}: Var B_1={var:.4f}")
    record(2, ok, "; ".join(details))
    assert ok


@pytest.mark.slow
def test_criterion_03_covariance():
    ok, details, total = True, [], 0.0
    for H in (0.3, 0.75):
        rep, elapsed = _covariance_run(H)
        total += elapsed
        ok &= rep.measured <= 0.1
        details.append(f"H={H}: max|err|={rep.measured:.4f} (se {rep.context['max_se']:.3f})")
    ok &= total < 300
    record(3, ok, "; ".join(details) + f"; runtime {total:.0f}s < 300s")
    assert ok


def test_criterion_04_lipschitz_trend():
    audits, ratio = lipschitz_trend(0.75, 0.3, [8, 16, 32, 64], 0)
    ks = [a.context["K_hat"] for a in audits]
    ok = ratio < 10 and all(a.passed for a in audits)
    record(4, ok, f"K_hat={[round(k, 3) for k in ks]}, max/min={ratio:.2f} < 10")
    assert ok


def test_criterion_05_flow_inequalities():
    reports = check_h_bounds(sin_cos(), HSampleSpec(points=23))
    reports.append(check_inverse_derivative_growth())
    viol = sum(r.context["violations"] for r in reports)
    smallest = min(r.context["samples"] for r in reports)
    ok = viol == 0 and smallest >= 1000 and all(r.passed for r in reports)
    record(5, ok, f"{len(reports)} inequalities, >= {smallest} points each, {viol} violations")
    assert ok


def test_criterion_06_euler_grid_flow():
    c = sin_cos()
    reps = [check_h_euler_bound(c, n, l) for n, l in ((1, 2), (2, 4), (2, 8))]
    order, _ = h_euler_order(c, 2, (4, 8, 16))
    ok = all(r.passed for r in reps) and order >= 0.9
    record(6, ok, ", ".join(f"(n={r.context['n']},l={r.context['l']}) "
                            f"{r.measured:.3g}<={r.bound:.3g}" for r in reps)
           + f"; order in l={order:.3f} >= 0.9")
    assert ok


def test_criterion_07_y_bounds():
    c = sin_cos()
    reports = []
    for n, m in ((8, 64), (16, 256)):
        p = ApproxParams(0.75, 0.3, n)
        for r in range(10):
            drv = sample_bn(p, uniform_grid(1.0, m), RngSeed(0, r))
            reports += check_y_bounds(c, n, m, drv)
    failed = [r for r in reports if not r.passed]
    ok = not failed
    record(7, ok, f"{len(reports) - len(failed)}/{len(reports)} pathwise reports hold")
    assert ok, [r.summary() for r in failed]


@pytest.mark.slow
def test_criterion_08_same_driver_convergence():
    t0 = time.perf_counter()
    table = convergence_experiment(ConvergenceConfig())
    elapsed = time.perf_counter() - t0
    failed = [r for r in table.reports if not r.passed]
    ok = table.slope <= -0.5 and not failed and elapsed < 600
    record(8, ok, f"slope={table.slope:.3f} <= -0.5, {len(table.reports) - len(failed)}/"
                  f"{len(table.reports)} bound reports hold, runtime {elapsed:.0f}s < 600s")
    assert ok, [r.summary() for r in failed]


def test_criterion_09_linear_exactness():
    b0, sig, x0 = 0.5, 1.0, 0.1
    c = linear(b0, sig, x0)
    worst, ok = 0.0, True
    for n in (8, 16, 32):
        p = ApproxParams(0.75, 0.3, n)
        for r in range(5):
            drv = sample_bn(p, uniform_grid(1.0, n * n), RngSeed(0, r))
            x = compose_x(EulerGridH(c, n), euler_y(c, n, None, drv), drv)
            inside = drv.sup_abs <= n and float(np.max(np.abs(x.y))) <= n
            err = float(np.max(np.abs(x.x - (x0 + b0 * drv.grid + sig * drv.values))))
            worst = max(worst, err)
            ok &= inside and err <= 1e-10
    record(9, ok, f"max |X-euler - (x0 + b0 t + c B)|={worst:.2e} <= 1e-10")
    assert ok


def _bodies(folder):
    return {p.name: p.read_bytes() for p in sorted(folder.glob("*.csv"))}


def test_criterion_10_determinism(tmp_path):
    runs = {
        "gen-fbm": ["--set", "kind=both", "--set", "replicas=2", "--set", "dump_transport=true"],
        "solve": ["--set", "n=8"],
        "converge": ["--set", "ns=4,8,16", "--set", "replicas=2"],
    }
    ok, count = True, 0
    for cmd, extra in runs.items():
        outs = []
        for k in range(2):
            d = tmp_path / f"{cmd}-{k}"
            code = cli.main([cmd, "--out", str(d), "--seed", "7"] + extra)
            ok &= code == 0
            outs.append(_bodies(d))
        ok &= bool(outs[0]) and outs[0] == outs[1]
        count += len(outs[0])
    record(10, ok, f"{count} CSV files byte-identical across repeated runs")
    assert ok
