"""Command-line front end.

    fracvi weights --alpha -0.5 --p 1 --N 8
    fracvi fracderiv --function t --alpha -0.5 --p 2 --N 64
    fracvi run --model damped-osc --p 1 --h 0.125
    fracvi convergence --model torvik-34 --scheme galerkin --p 1,2,3

Every subcommand writes CSV (header row, LF line endings, 17 significant
digits) to --output or stdout.  Settings may also come from a key=value
file given by --config; flags win over the file.

Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from . import bench
from .cq import MAX_BDF_ORDER, GridSeries, conv_left, corrected_conv_left, cq_weights, starting_quadrature
from .errors import DegeneracyError, FracviError, NewtonError, StepFailure
from .fracops import rl_integral_monomial, rl_integral_sine_power
from .integrators import FviProblem, fvi_run
from .models import builtin_models, get_model


class UsageError(Exception):
    pass


def fmt(x) -> str:
    return format(float(x) + 0.0, ".17g")  # no "-0"


def write_csv(stream, header, rows):
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, int, np.floating, np.integer)) else v for v in row])


# ------------------------------------------------------------- options


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _int_list(s):
    return [int(x) for x in str(s).split(",") if x.strip()]


def _float_list(s):
    return [float(x) for x in str(s).split(",") if x.strip()]


@dataclass(frozen=True)
class Opt:
    dest: str
    type: Callable
    default: Any = None
    help: str = ""
    flag: bool = False


COMMON = [Opt("output", str, None, "output CSV path (default stdout)")]

OPTIONS = {
    "weights": [
        Opt("alpha", float, None, "order of J^alpha (negative = derivative)"),
        Opt("p", int, None, f"BDF order 1..{MAX_BDF_ORDER}"),
        Opt("h", float, 1.0, "step size > 0"),
        Opt("N", int, None, "last weight index N >= 0"),
    ],
    "fracderiv": [
        Opt("function", str, "t", "t | monomial:<beta> | sin-power:<beta>"),
        Opt("alpha", float, None, "order of J^alpha (negative = derivative)"),
        Opt("p", int, None, f"BDF order 1..{MAX_BDF_ORDER}"),
        Opt("h", float, None, "step size (give h or N)"),
        Opt("N", int, None, "number of steps (give h or N)"),
        Opt("T", float, 1.0, "final time"),
        Opt("corrected", _bool, False, "add the starting quadrature", flag=True),
        Opt("degree", int, None, "starting-quadrature degree (default p-1)"),
    ],
    "run": [
        Opt("model", str, None, "model id: " + ", ".join(builtin_models())),
        Opt("scheme", str, "midpoint", "midpoint | galerkin[:s=2] | euler-explicit | euler-implicit"),
        Opt("p", int, None, f"BDF order 1..{MAX_BDF_ORDER}"),
        Opt("h", float, None, "step size (give h or N)"),
        Opt("N", int, None, "number of steps (give h or N)"),
        Opt("T", float, None, "final time (default: model horizon)"),
        Opt("mu", float, None, "damping coefficient >= 0 (default: model value)"),
        Opt("corrected", _bool, False, "add the starting quadrature", flag=True),
        Opt("degree", int, None, "starting-quadrature degree (default p-1)"),
    ],
    "convergence": [
        Opt("model", str, None, "model id: " + ", ".join(builtin_models())),
        Opt("scheme", str, "midpoint", "midpoint | galerkin[:s=2]"),
        Opt("p", _int_list, [1, 2, 3], "comma-separated BDF orders"),
        Opt("h", _float_list, None, "comma-separated step sizes (default: benchmark range)"),
        Opt("mu", float, None, "damping coefficient >= 0 (default: model value)"),
        Opt("corrected", _bool, False, "add the starting quadrature", flag=True),
        Opt("degree", int, None, "starting-quadrature degree (default p-1)"),
        Opt("tail", int, None, "fit only the last TAIL step sizes"),
    ],
}


def build_parser():
    parser = argparse.ArgumentParser(prog="fracvi", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in OPTIONS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="key=value settings file")
        for o in opts + COMMON:
            hlp = o.help + (f" [default {o.default}]" if o.default is not None else "")
            if o.flag:
                sp.add_argument(f"--{o.dest}", dest=o.dest, action="store_const", const=True,
                                default=None, help=hlp)
            else:
                sp.add_argument(f"--{o.dest}", dest=o.dest, type=str, default=None, help=hlp)
    return parser


def read_config(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            k, v = (x.strip() for x in line.split("=", 1))
            out[k] = v
    return out


def resolve(command, ns) -> dict:
    """Merge flags over config file over defaults, converting types."""
    opts = OPTIONS[command] + COMMON
    known = {o.dest: o for o in opts}
    cfg = read_config(ns.config) if ns.config else {}
    for k in cfg:
        if k not in known:
            raise UsageError(f"config: unknown key {k!r} for '{command}'")
    out = {}
    for o in opts:
        raw = getattr(ns, o.dest)
        if raw is None:
            raw = cfg.get(o.dest)
        if raw is None:
            out[o.dest] = o.default
            continue
        try:
            out[o.dest] = o.type(raw)
        except (TypeError, ValueError):
            raise UsageError(f"--{o.dest}: cannot parse {raw!r} ({o.help})")
    return out


def _require(cfg, *names):
    for n in names:
        if cfg[n] is None:
            raise UsageError(f"--{n} is required")


def _check_p(p, flag="--p"):
    if not 1 <= p <= MAX_BDF_ORDER:
        raise UsageError(f"{flag}: must be an integer in 1..{MAX_BDF_ORDER}, got {p}")


def _check_positive(cfg, name):
    if cfg[name] is not None and not cfg[name] > 0:
        raise UsageError(f"--{name}: must be > 0, got {cfg[name]}")


def _grid(cfg, T):
    if (cfg["h"] is None) == (cfg["N"] is None):
        raise UsageError("give exactly one of --h or --N")
    _check_positive(cfg, "h")
    if cfg["N"] is not None:
        if cfg["N"] < 1:
            raise UsageError(f"--N: must be >= 1, got {cfg['N']}")
        return cfg["N"], T / cfg["N"]
    N = int(round(T / cfg["h"]))
    if N < 1 or abs(N * cfg["h"] - T) > 1e-12 * max(1.0, T):
        raise UsageError(f"--h: T = {T} must be a multiple of h, got h = {cfg['h']}")
    return N, cfg["h"]


# ---------------------------------------------------------- commands


def cmd_weights(cfg):
    _require(cfg, "alpha", "p", "N")
    _check_p(cfg["p"])
    _check_positive(cfg, "h")
    if cfg["N"] < 0:
        raise UsageError(f"--N: must be >= 0, got {cfg['N']}")
    w = cq_weights(cfg["alpha"], cfg["p"], cfg["h"], cfg["N"]).weights
    return ["n", "omega"], [(n, float(v)) for n, v in enumerate(w)], None


def function_catalog(fid):
    """(f(t), J^alpha f exact) for a function id."""
    if fid == "t":
        fid = "monomial:2"
    kind, _, arg = fid.partition(":")
    try:
        beta = float(arg)
    except ValueError:
        raise UsageError(f"--function: unknown function {fid!r}; use t, monomial:<beta>, sin-power:<beta>")
    if kind == "monomial":
        return (lambda t: t ** (beta - 1.0)), (lambda a, t: rl_integral_monomial(a, beta, t))
    if kind == "sin-power":
        return (lambda t: t ** (beta - 1.0) * np.sin(t)), (lambda a, t: rl_integral_sine_power(a, beta, t))
    raise UsageError(f"--function: unknown function {fid!r}; use t, monomial:<beta>, sin-power:<beta>")


def cmd_fracderiv(cfg):
    _require(cfg, "alpha", "p")
    _check_p(cfg["p"])
    _check_positive(cfg, "T")
    f, exact = function_catalog(cfg["function"])
    N, h = _grid(cfg, cfg["T"])
    t = h * np.arange(N + 1)
    w = cq_weights(cfg["alpha"], cfg["p"], h, N)
    fs = GridSeries(f(t), h)
    if cfg["corrected"]:
        s = cfg["p"] - 1 if cfg["degree"] is None else cfg["degree"]
        approx = corrected_conv_left(w, starting_quadrature(cfg["alpha"], cfg["p"], h, N, s), fs).values
    else:
        approx = conv_left(w, fs).values
    ex = np.asarray(exact(cfg["alpha"], t), float)
    err = np.abs(approx - ex)
    rows = list(zip(t, approx, ex, err))
    return ["t", "approx", "exact", "error"], rows, f"max error {fmt(np.max(err))}"


def _scheme(name):
    try:
        return bench.scheme_from_name(name)
    except (FracviError, ValueError) as exc:
        raise UsageError(f"--scheme: {exc}")


def cmd_run(cfg):
    _require(cfg, "model", "p")
    _check_p(cfg["p"])
    try:
        model = get_model(cfg["model"])
    except FracviError:
        raise UsageError(f"--model: must be one of {', '.join(builtin_models())}, got {cfg['model']!r}")
    if cfg["mu"] is not None and cfg["mu"] < 0:
        raise UsageError(f"--mu: must be >= 0, got {cfg['mu']}")
    T = model.T if cfg["T"] is None else cfg["T"]
    if not T > 0:
        raise UsageError(f"--T: must be > 0, got {T}")
    N, h = _grid(cfg, T)
    problem = FviProblem.from_model(
        model, cfg["p"], N=N, T=T, mu=cfg["mu"],
        use_starting_correction=cfg["corrected"], correction_degree=cfg["degree"],
    )
    name = cfg["scheme"]
    if name == "euler-explicit":
        traj = bench.euler_explicit_run(problem)
    elif name == "euler-implicit":
        traj = bench.euler_implicit_run(problem)
    else:
        traj = fvi_run(problem, _scheme(name))
    e = bench.energy_trace(traj, model).values
    x = traj.main[:, 0]
    header = ["t", "x", "energy"]
    cols = [traj.times, x, e]
    summary = None
    if model.exact_solution is not None:
        ex = np.asarray(model.exact_solution(traj.times), float)
        header += ["exact", "abs_error"]
        cols += [ex, np.abs(x - ex)]
        summary = f"global error {fmt(np.max(np.abs(x - ex)))}"
    return header, list(zip(*cols)), summary


def cmd_convergence(cfg):
    _require(cfg, "model")
    for p in cfg["p"]:
        _check_p(p)
    try:
        get_model(cfg["model"])
    except FracviError:
        raise UsageError(f"--model: must be one of {', '.join(builtin_models())}, got {cfg['model']!r}")
    hs = cfg["h"] or bench.benchmark_step_sizes(cfg["model"])
    if len(hs) < 4:
        raise UsageError(f"--h: need at least 4 step sizes, got {len(hs)}")
    if any(not h > 0 for h in hs):
        raise UsageError("--h: step sizes must be > 0")
    scheme = _scheme(cfg["scheme"])
    rows, lines = [], []
    for p in cfg["p"]:
        study = bench.ConvergenceStudy(
            cfg["model"], p, hs, scheme=scheme, mu=cfg["mu"],
            use_starting_correction=cfg["corrected"], correction_degree=cfg["degree"],
            tail=cfg["tail"],
        )
        rep = bench.run_convergence(study)
        rows += [(p, h, e) for h, e in zip(rep.hs, rep.errors)]
        lines.append(f"p={p}: {rep.summary()}")
    return ["p", "h", "error"], rows, "\n".join(lines)


COMMANDS = {
    "weights": cmd_weights,
    "fracderiv": cmd_fracderiv,
    "run": cmd_run,
    "convergence": cmd_convergence,
}


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(ns.command, ns)
        header, rows, summary = COMMANDS[ns.command](cfg)
    except UsageError as exc:
        print(f"fracvi {ns.command}: error: {exc}", file=stderr)
        return 2
    except (StepFailure, NewtonError, DegeneracyError) as exc:
        step = getattr(exc, "step", None)
        where = f" at step {step}" if step is not None else ""
        print(f"fracvi {ns.command}: numerical failure{where}: {exc}", file=stderr)
        return 1
    except FracviError as exc:
        print(f"fracvi {ns.command}: error: {exc}", file=stderr)
        return 2
    buf = io.StringIO()
    write_csv(buf, header, rows)
    if cfg["output"]:
        with open(cfg["output"], "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        stdout.write(buf.getvalue())
    if summary:
        print(summary, file=stderr)
    return 0


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
