"""``ehcap`` command line: single solves, the U curve, figure sweeps and self-checks."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from ehcap import __version__
from ehcap.channel import ExtendedChannel
from ehcap.onoff import OnOffProblem, baselines, on_marginal
from ehcap.solver import DEFAULT_KMAX, DEFAULT_TOL, ba_oracle, smith_capacity
from ehcap.strategy_sim import empirical_mi
from ehcap.sweep import dumps_json, run_sweep, u_curve

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NONCONVERGED = 3

LN2 = math.log(2.0)

DEFAULTS = {
    "tol": DEFAULT_TOL,
    "quad_points": 32,
    "kmax": DEFAULT_KMAX,
    "out": None,
    "format": "csv",
    "bits": False,
    "seed": 0,
    "workers": 1,
}

_CASTS = {"tol": float, "quad_points": int, "kmax": int, "seed": int, "workers": int,
          "out": str, "format": str}


class UsageError(Exception):
    pass


def _truthy(v: str) -> bool:
    if v.lower() in ("1", "true", "yes", "on"):
        return True
    if v.lower() in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {v!r}")


def read_config(path: str) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment, dashes in keys map to underscores."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _truthy(value) if key == "bits" else _CASTS[key](value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return out


def resolve_options(args: argparse.Namespace) -> dict:
    """Defaults, overridden by the config file, overridden by explicit flags."""
    opts = dict(DEFAULTS)
    if args.config:
        opts.update(read_config(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    if opts["tol"] <= 0:
        raise UsageError("--tol must be positive")
    if opts["quad_points"] < 16:
        raise UsageError("--quad-points must be >= 16")
    if opts["kmax"] < 2:
        raise UsageError("--kmax must be >= 2")
    if opts["format"] not in ("csv", "json"):
        raise UsageError("--format must be csv or json")
    if opts["workers"] < 1:
        raise UsageError("--workers must be >= 1")
    return opts


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _fmt(v: float, bits: bool) -> str:
    s = f"{v:.10f} nats"
    return f"{s} ({v / LN2:.10f} bits)" if bits else s


def _print_solution(sol, bits: bool, label: str = "capacity"):
    F = sol.distribution.sorted()
    print(f"{label}: {_fmt(sol.capacity, bits)}")
    print(f"converged: {sol.converged}  support size: {F.size}")
    for t, w in zip(F.points, F.weights):
        coords = ", ".join(f"{c:+.6f}" for c in t)
        print(f"  point ({coords})  weight {w:.8f}")
    print(f"kkt max violation: {sol.kkt.max_violation:.3e}  support slack: {sol.kkt.support_slack:.3e}")


def cmd_smith(args, opts) -> int:
    if args.amplitude < 0:
        raise UsageError("--amplitude must be >= 0")
    sol = smith_capacity(args.amplitude, opts["tol"], K_max=opts["kmax"],
                         points_per_unit=opts["quad_points"])
    _print_solution(sol, opts["bits"])
    if opts["out"]:
        doc = {"meta": _meta(opts, amplitude=args.amplitude), "solution": sol.to_dict()}
        Path(opts["out"]).write_text(dumps_json(doc))
    return EXIT_OK if sol.converged else EXIT_NONCONVERGED


def cmd_onoff(args, opts) -> int:
    if not 0.0 < args.pon <= 1.0:
        raise UsageError("--pon must lie in (0, 1]")
    if args.energy < 0:
        raise UsageError("--energy must be >= 0")
    prob = OnOffProblem(args.pon, args.energy)
    b = baselines(prob, opts["tol"], K_max=opts["kmax"], points_per_unit=opts["quad_points"])
    bits = opts["bits"]
    print(f"c_causal:  {_fmt(b.c_causal, bits)}")
    print(f"c_si_both: {_fmt(b.c_si_both, bits)}")
    print(f"c_no_si:   {_fmt(b.c_no_si, bits)}")
    print(f"c_battery: {_fmt(b.c_battery, bits)}")
    marginal = on_marginal(b.causal_solution).sorted()
    print(f"optimal on-state input ({marginal.size} points, off state sends 0):")
    for t, w in zip(marginal.points[:, 0], marginal.weights):
        print(f"  t2 {t:+.6f}  weight {w:.8f}")
    sol = b.causal_solution
    print(f"kkt max violation: {sol.kkt.max_violation:.3e}  support slack: {sol.kkt.support_slack:.3e}")
    if opts["out"]:
        doc = {"meta": _meta(opts, p_on=args.pon, energy=args.energy),
               "baselines": b.to_dict(), "solution": sol.to_dict()}
        Path(opts["out"]).write_text(dumps_json(doc))
    converged = sol.converged and b.si_both_solution.converged
    return EXIT_OK if converged else EXIT_NONCONVERGED


def _meta(opts, **extra) -> dict:
    meta = {"version": __version__, "options": {k: opts[k] for k in sorted(opts)}}
    meta.update(extra)
    return meta


def _parse_grid(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}") from exc
    if not values or any(not 0.0 < v <= 1.0 for v in values):
        raise UsageError("p_on grid values must lie in (0, 1]")
    return values


def cmd_ucurve(args, opts) -> int:
    grid = _parse_grid(args.grid)
    result = u_curve(grid, tol_x=args.tol_x, points_per_unit=opts["quad_points"],
                     workers=opts["workers"])
    result.meta["options"] = {k: opts[k] for k in sorted(opts)}
    _emit(result.to_json() if opts["format"] == "json" else result.to_csv(), opts["out"])
    return EXIT_OK


def cmd_sweep(args, opts) -> int:
    lo, hi, steps = args.range
    if not lo < hi or int(steps) != steps or steps < 2:
        raise UsageError("--range needs LO < HI and integer STEPS >= 2")
    if args.axis == "pon" and not (0.0 < lo and hi <= 1.0):
        raise UsageError("p_on range must lie in (0, 1]")
    if args.axis == "energy" and (lo < 0 or not 0.0 < args.fixed <= 1.0):
        raise UsageError("energy range must be >= 0 and the fixed p_on in (0, 1]")
    if args.axis == "pon" and args.fixed < 0:
        raise UsageError("fixed energy must be >= 0")
    result = run_sweep(args.axis, args.fixed, lo, hi, int(steps), tol=opts["tol"],
                       K_max=opts["kmax"], points_per_unit=opts["quad_points"],
                       workers=opts["workers"])
    result.meta["options"] = {k: opts[k] for k in sorted(opts)}
    bits = opts["bits"]
    _emit(result.to_json(bits) if opts["format"] == "json" else result.to_csv(bits), opts["out"])
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


# fixed validation suite: (label, amplitudes, probs)
VALIDATION_CHANNELS = (
    ("smith a=1.0", [1.0], [1.0]),
    ("smith a=3.0", [3.0], [1.0]),
    ("onoff p_on=0.5 E=2.25", [0.0, 1.5], [0.5, 0.5]),
)
VALIDATION_MC = (("onoff p_on=0.5 E=2.25", [0.0, 1.5], [0.5, 0.5]),)


def run_validation(oracle_tol: float, mc_samples: int, seed: int, tol: float,
                   quad_points: int) -> tuple[bool, list[str]]:
    """Oracle-agreement and Monte Carlo checks; returns (all passed, report lines)."""
    from ehcap.solver import solve_capacity

    lines = []
    ok_all = True
    for label, amps, probs in VALIDATION_CHANNELS:
        ch = ExtendedChannel.build(amps, probs, quad_points)
        sol = solve_capacity(ch, tol)
        oracle = ba_oracle(ch, 64)
        gap = sol.capacity - oracle
        ok = sol.converged and abs(gap) <= oracle_tol and gap >= -1e-9
        ok_all &= ok
        lines.append(f"{'PASS' if ok else 'FAIL'} oracle    {label}: solver {sol.capacity:.12f} "
                     f"oracle {oracle:.12f} gap {gap:.3e} (tol {oracle_tol:g})")
    for label, amps, probs in VALIDATION_MC:
        ch = ExtendedChannel.build(amps, probs, quad_points)
        sol = solve_capacity(ch, tol)
        mean, se = empirical_mi(ch, sol.distribution, mc_samples, seed)
        z = (mean - sol.capacity) / se
        ok = abs(z) <= 4.0
        ok_all &= ok
        lines.append(f"{'PASS' if ok else 'FAIL'} montecarlo {label}: quadrature {sol.capacity:.8f} "
                     f"empirical {mean:.8f} +/- {se:.2e} (z={z:+.2f}, seed {seed}, n={mc_samples})")
    return ok_all, lines


def cmd_validate(args, opts) -> int:
    ok, lines = run_validation(args.oracle_tol, args.mc_samples, opts["seed"], opts["tol"],
                               opts["quad_points"])
    report = "\n".join(lines) + f"\n{'OK' if ok else 'FAILED'}\n"
    _emit(report, opts["out"])
    return EXIT_OK if ok else 1


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="KKT tolerance in nats (1e-6)")
    common.add_argument("--quad-points", dest="quad_points", type=int, default=None,
                        help="quadrature nodes per unit of output range (32)")
    common.add_argument("--kmax", type=int, default=None, help="largest support size tried (8)")
    common.add_argument("--out", default=None, help="write output to this path")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--bits", action="store_const", const=True, default=None,
                        help="also report values in bits")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--workers", type=_positive_int, default=None,
                        help="processes for sweep rows (1)")
    common.add_argument("--config", default=None, help="key=value file; flags take precedence")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="ehcap",
        description="Capacity of the AWGN channel with time-varying amplitude constraints.",
    )
    parser.add_argument("--version", action="version", version=f"ehcap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("smith", parents=[common], help="static amplitude-constrained capacity")
    p.add_argument("--amplitude", type=float, required=True)
    p.set_defaults(func=cmd_smith)

    p = sub.add_parser("onoff", parents=[common], help="on-off arrivals: capacity and baselines")
    p.add_argument("--pon", type=float, required=True)
    p.add_argument("--energy", type=float, required=True)
    p.set_defaults(func=cmd_onoff)

    p = sub.add_parser("ucurve", parents=[common], help="U(p_on) threshold curve")
    p.add_argument("--grid", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0",
                   help="comma-separated p_on values")
    p.add_argument("--tol-x", dest="tol_x", type=float, default=1e-4)
    p.set_defaults(func=cmd_ucurve)

    p = sub.add_parser("sweep", parents=[common], help="capacity curves over p_on or E")
    p.add_argument("--axis", choices=("pon", "energy"), required=True)
    p.add_argument("--fixed", type=float, required=True,
                   help="E for a p_on sweep, p_on for an energy sweep")
    p.add_argument("--range", nargs=3, type=float, required=True, metavar=("LO", "HI", "STEPS"))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", parents=[common], help="oracle and Monte Carlo self-checks")
    p.add_argument("--oracle-tol", dest="oracle_tol", type=float, default=2e-3)
    p.add_argument("--mc-samples", dest="mc_samples", type=int, default=1_000_000)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = resolve_options(args)
        return args.func(args, opts)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2


if __name__ == "__main__":
    sys.exit(main())
