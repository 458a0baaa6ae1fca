"""Command-line front end.

Configuration is a flat ``key = value`` text file.  Values are layered as
built-in defaults, then the file given by ``--config``, then environment
variables ``FBMT_<KEY>`` (upper case), then ``--set key=value`` and the
dedicated flags ``--seed``, ``--out`` and ``--threads``.  Unknown keys are
rejected wherever they come from.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import analysis, io
from ._validation import uniform_grid
from .doss_sussmann import (EulerGridH, HFlow, compose_x, euler_y, get_preset, solve_y,
                            validate_coeffs)
from .errors import (ConfigurationError, FactorizationError, InsufficientDataError,
                     IntegrationError, InvalidParameterError, QuadratureError)
from .reports import BoundReport
from .fbm_driver import ApproxParams, exact_fbm, sample_bn, transport_components
from .transport import RngSeed

log = logging.getLogger("fbmtransport")

ENV_PREFIX = "FBMT_"

_int_list = ("int-list",)
_float_list = ("float-list",)

# key -> (parser, default)
SCHEMA = {
    "H": (float, 0.75),
    "beta": (float, 0.3),
    "delta": (float, None),
    "a": (float, -1.0),
    "T": (float, 1.0),
    "n": (int, 16),
    "m": (int, None),
    "ns": (_int_list, [8, 16, 32, 64]),
    "replicas": (int, 1),
    "master_seed": (int, 0),
    "grid_steps": (int, None),
    "kind": (str, "transport"),
    "preset": (str, "sin-cos"),
    "b0": (float, 0.5),
    "c": (float, 1.0),
    "x0": (float, 0.1),
    "out": (str, "out"),
    "threads": (int, 1),
    "reference_substeps": (int, 1),
    "paths": (int, 10),
    "validate_nm": (str, "8:64,16:256"),
    "euler_pairs": (str, "1:2,2:4,2:8"),
    "lipschitz_ns": (_int_list, [8, 16, 32, 64]),
    "lipschitz_ratio_max": (float, 10.0),
    "covariance_replicas": (int, 0),
    "covariance_grid": (_float_list, [0.25, 0.5, 0.75, 1.0]),
    "covariance_tolerance": (float, None),
    "bias_allowance": (float, 0.05),
    "svg": (bool, True),
    "dump_transport": (bool, False),
}


def _parse_value(key, raw):
    kind, _ = SCHEMA[key]
    raw = raw.strip()
    try:
        if raw.lower() in ("", "none") and SCHEMA[key][1] is None:
            return None
        if kind is _int_list:
            return [int(v) for v in raw.replace(" ", "").split(",") if v]
        if kind is _float_list:
            return [float(v) for v in raw.replace(" ", "").split(",") if v]
        if kind is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigurationError(f"config key {key!r}: cannot parse {raw!r}") from None


def _check_key(key, origin):
    if key not in SCHEMA:
        raise ConfigurationError(f"unknown config key {key!r} ({origin})")


def parse_config_text(text, origin="config"):
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{origin}:{lineno}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip()
        _check_key(key, f"{origin}:{lineno}")
        out[key] = _parse_value(key, val)
    return out


def load_config(path=None, overrides=(), env=None):
    cfg = {k: v for k, (_, v) in SCHEMA.items()}
    if path:
        cfg.update(parse_config_text(Path(path).read_text(), str(path)))
    env = os.environ if env is None else env
    lower = {k.lower(): k for k in SCHEMA}
    for name, val in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        raw_key = name[len(ENV_PREFIX):]
        key = raw_key if raw_key in SCHEMA else lower.get(raw_key.lower())
        if key is None:
            raise ConfigurationError(f"unknown config key {raw_key!r} (environment {name})")
        cfg[key] = _parse_value(key, val)
    for item in overrides:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        key = key.strip()
        _check_key(key, "--set")
        cfg[key] = _parse_value(key, val)
    return cfg


def _pairs(text, key):
    try:
        return [tuple(int(v) for v in item.split(":")) for item in text.split(",") if item]
    except ValueError:
        raise ConfigurationError(f"config key {key!r}: expected a:b pairs, got {text!r}") from None


def coefficients_from(cfg):
    name = cfg["preset"]
    if name == "linear":
        return get_preset("linear", b0=cfg["b0"], c=cfg["c"], x0=cfg["x0"])
    return get_preset(name, x0=cfg["x0"])


def params_from(cfg, n=None):
    return ApproxParams(cfg["H"], cfg["beta"], cfg["n"] if n is None else n, cfg["a"],
                        cfg["T"], cfg["delta"])


def _grid(cfg, n):
    steps = cfg["grid_steps"] or n * n
    return uniform_grid(cfg["T"], steps)


class _Outputs:
    """Tracks files written by a command so they can be removed on failure."""

    def __init__(self, root):
        self.root = Path(root)
        self.files = []

    def path(self, name):
        self.root.mkdir(parents=True, exist_ok=True)
        p = self.root / name
        self.files.append(p)
        return p

    def discard(self):
        for p in self.files:
            try:
                p.unlink()
            except FileNotFoundError:
                pass


# -- commands ----------------------------------------------------------------------------

def cmd_gen_fbm(cfg, outs):
    kind = cfg["kind"]
    if kind not in ("transport", "exact", "both"):
        raise ConfigurationError("config key 'kind' must be transport, exact or both")
    p = params_from(cfg) if kind != "exact" else None
    grid = _grid(cfg, cfg["n"])
    for r in range(cfg["replicas"]):
        seed = RngSeed(cfg["master_seed"], r)
        if kind in ("transport", "both"):
            d = sample_bn(p, grid, seed)
            io.write_driver_csv(outs.path(f"driver_transport_r{r:04d}.csv"), d)
            if cfg["dump_transport"]:
                for i, z in enumerate(transport_components(p, seed), 1):
                    io.write_transport_csv(outs.path(f"transport_z{i}_r{r:04d}.csv"), z)
        if kind in ("exact", "both"):
            d = exact_fbm(cfg["H"], grid, seed.with_substream(4))
            io.write_driver_csv(outs.path(f"driver_exact_r{r:04d}.csv"), d)
    return []


def cmd_solve(cfg, outs):
    c = coefficients_from(cfg)
    n = cfg["n"]
    m = cfg["m"] or n * n
    p = params_from(cfg)
    drv = sample_bn(p, _grid(cfg, n), RngSeed(cfg["master_seed"], 0))
    io.write_driver_csv(outs.path("driver.csv"), drv)
    step = (drv.grid[1] - drv.grid[0]) / cfg["reference_substeps"]
    y_ref = solve_y(c, drv, step=step)
    io.write_solution_csv(outs.path("solution_reference_y.csv"), y_ref)
    io.write_solution_csv(outs.path("solution_x_tilde.csv"), compose_x(HFlow(c), y_ref, drv))
    y_eu = euler_y(c, n, m, drv)
    io.write_solution_csv(outs.path("solution_euler_y.csv"), y_eu)
    if m == n * n:
        io.write_solution_csv(outs.path("solution_x_euler.csv"),
                              compose_x(EulerGridH(c, n), y_eu, drv))
    else:
        log.info("m != n^2: X-euler is defined only for m = n^2, skipped")
    return []


def cmd_validate(cfg, outs):
    c = coefficients_from(cfg)
    reports = [validate_coeffs(c)]
    reports += analysis.check_h_bounds(c)
    reports.append(analysis.check_inverse_derivative_growth())
    for n, l in _pairs(cfg["euler_pairs"], "euler_pairs"):
        reports.append(analysis.check_h_euler_bound(c, n, l))
    for n, m in _pairs(cfg["validate_nm"], "validate_nm"):
        p = params_from(cfg, n)
        for r in range(cfg["paths"]):
            drv = sample_bn(p, uniform_grid(cfg["T"], m), RngSeed(cfg["master_seed"], r))
            reports += analysis.check_y_bounds(c, n, m, drv)
    audits, ratio = analysis.lipschitz_trend(cfg["H"], cfg["beta"], cfg["lipschitz_ns"],
                                             cfg["master_seed"], cfg["a"], cfg["T"])
    reports += audits
    reports.append(BoundReport("lipschitz trend max/min", ratio,
                                        cfg["lipschitz_ratio_max"], {}))
    io.write_reports_csv(outs.path("reports.csv"), reports)
    return reports


def cmd_converge(cfg, outs):
    conf = analysis.ConvergenceConfig(
        coeffs=coefficients_from(cfg), H=cfg["H"], beta=cfg["beta"], delta=cfg["delta"],
        a=cfg["a"], T=cfg["T"], ns=tuple(cfg["ns"]), replicas=cfg["replicas"],
        master_seed=cfg["master_seed"], reference_substeps=cfg["reference_substeps"],
        threads=cfg["threads"])
    table = analysis.convergence_experiment(conf)
    reports = list(table.reports)
    if cfg["covariance_replicas"]:
        p = params_from(cfg, cfg["ns"][-1])
        reports.append(analysis.covariance_experiment(
            p, cfg["covariance_replicas"], cfg["covariance_grid"], cfg["master_seed"],
            tolerance=cfg["covariance_tolerance"], bias_allowance=cfg["bias_allowance"],
            threads=cfg["threads"]))
    io.write_rate_table_csv(outs.path("rate_table.csv"), table)
    io.write_reports_csv(outs.path("reports.csv"), reports)
    if cfg["svg"]:
        io.write_rate_svg(outs.path("rate_plot.svg"), table)
    return reports


COMMANDS = {
    "gen-fbm": cmd_gen_fbm,
    "solve": cmd_solve,
    "validate": cmd_validate,
    "converge": cmd_converge,
}

EXIT_OK, EXIT_FAILED_REPORT, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def build_parser():
    ap = argparse.ArgumentParser(
        prog="fbmtransport",
        description="Transport approximation of fBm and Euler/Doss-Sussmann SDE schemes.",
        epilog=f"Any config key can also be set through the environment as {ENV_PREFIX}<KEY>.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="flat key = value configuration file")
    ap.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--threads", type=int, help="worker threads for replica fan-out")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config key (repeatable)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    overrides = list(args.set)
    for key, val in (("master_seed", args.seed), ("out", args.out), ("threads", args.threads)):
        if val is not None:
            overrides.append(f"{key}={val}")
    try:
        cfg = load_config(args.config, overrides)
    except (ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outs = _Outputs(cfg["out"])
    try:
        reports = COMMANDS[args.command](cfg, outs)
    except (ConfigurationError, InvalidParameterError, InsufficientDataError) as exc:
        outs.discard()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, QuadratureError, FactorizationError) as exc:
        outs.discard()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except BaseException:
        outs.discard()
        raise
    failed = [r for r in reports if not r.passed]
    for r in reports:
        log.info(r.summary())
    for r in failed:
        print(r.summary(), file=sys.stderr)
    print(f"{args.command}: wrote {len(outs.files)} file(s) to {outs.root}; "
          f"{len(reports) - len(failed)}/{len(reports)} reports passed")
    return EXIT_FAILED_REPORT if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
