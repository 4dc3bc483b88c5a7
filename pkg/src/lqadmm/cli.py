"""Command-line interface: ``tune``, ``solve`` and ``experiment``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import fileio
from .applications import deblurring, mri, random_instances, registration
from .applications.images import blob_pair, cartesian_mask, phantom
from .errors import LQAdmmError
from .lqp import LQProblem
from .operators import GridDims, fourier_grid_symbol, make_operator
from .solvers import METHODS, SolverParams, solve
from .tuning import OBJECTIVES, TunerConfig, closed_form_deblur, closed_form_mri, mri_constants, tune_theta

SEED_ENV = "ADMM_TUNER_SEED"
BUILTINS = ("identity", "deblur", "mri", "random")
EXPERIMENTS = ("random", "deblur", "mri", "register")

# keys accepted in --config files, by subcommand
CONFIG_KEYS = {
    "tune": {"builtin", "mu", "method", "objective", "seed", "size", "fd_step", "max_iters", "multistart"},
    "solve": {"builtin", "mu", "solver", "theta", "alpha", "step", "max_iters", "tol", "seed", "size", "out"},
    "experiment": {"kind", "mu", "seed", "size", "instances", "image", "mask", "target", "noise", "out", "jobs",
                   "max_iters", "tol", "outer_iters", "steps", "fraction"},
}
PATH_KEYS = ("image", "mask", "target")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lqadmm", description="ADMM parameter selection for linear quadratic problems")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    tune = sub.add_parser("tune", help="compute optimal theta (and alpha)")
    tune.add_argument("--builtin", choices=BUILTINS)
    tune.add_argument("--mu", type=_positive_float)
    tune.add_argument("--method", choices=("closed-form", "gd"))
    tune.add_argument("--objective", choices=OBJECTIVES + ("both",))
    tune.add_argument("--fd-step", dest="fd_step", type=_positive_float)
    tune.add_argument("--max-iters", dest="max_iters", type=_positive_int)
    tune.add_argument("--multistart", type=int)

    solve_p = sub.add_parser("solve", help="run one solver and write its trace")
    solve_p.add_argument("--builtin", choices=BUILTINS)
    solve_p.add_argument("--mu", type=_positive_float)
    solve_p.add_argument("--solver", choices=METHODS)
    solve_p.add_argument("--theta", type=_positive_float)
    solve_p.add_argument("--alpha", type=_positive_float)
    solve_p.add_argument("--step", type=_positive_float)
    solve_p.add_argument("--max-iters", dest="max_iters", type=_positive_int)
    solve_p.add_argument("--tol", type=_positive_float)
    solve_p.add_argument("--out", help="trace CSV path (default trace.csv)")

    exp = sub.add_parser("experiment", help="run a full experiment pipeline")
    exp.add_argument("kind", nargs="?", choices=EXPERIMENTS)
    exp.add_argument("--mu", type=_positive_float)
    exp.add_argument("--instances", type=_positive_int)
    exp.add_argument("--image", help="PGM input image (default: synthetic)")
    exp.add_argument("--mask", help="PGM sampling mask for mri")
    exp.add_argument("--target", help="PGM target image for register (requires --image)")
    exp.add_argument("--noise", type=float)
    exp.add_argument("--fraction", type=float)
    exp.add_argument("--max-iters", dest="max_iters", type=_positive_int)
    exp.add_argument("--tol", type=_positive_float)
    exp.add_argument("--outer-iters", dest="outer_iters", type=_positive_int)
    exp.add_argument("--steps", type=_positive_int, help="Euler integration steps N")
    exp.add_argument("--jobs", type=_positive_int)
    exp.add_argument("--out", help="output directory")

    for p in (tune, solve_p, exp):
        p.add_argument("--seed", type=int)
        p.add_argument("--size", type=GridDims.parse, help="grid as HxW")
        p.add_argument("--config", help="file of 'key = value' lines")
    return parser


def load_config(path) -> dict:
    """``key = value`` per line; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _merge_config(parser, args):
    if not args.config:
        return
    if not Path(args.config).is_file():
        raise UsageError(f"config file not found: {args.config}")
    allowed = CONFIG_KEYS[args.command]
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    for key, value in load_config(args.config).items():
        if key not in allowed:
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        if getattr(args, key, None) is not None:
            continue  # command line wins
        action = actions[key]
        try:
            converted = action.type(value) if action.type else value
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"config key {key}: {exc}") from None
        if action.choices is not None and converted not in action.choices:
            raise UsageError(f"config key {key}: {value!r} not in {list(action.choices)}")
        setattr(args, key, converted)


def _seed(args) -> int:
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return args.seed if args.seed is not None else 0


def _default(value, fallback):
    return fallback if value is None else value


def builtin_problem(name: str, mu: float, seed: int, size=None):
    """Small ready-made problems so every subcommand runs without input files."""
    if name == "identity":
        n = size.size if size else 16
        eye = make_operator("identity", n=n)
        return LQProblem(eye, eye, mu, np.random.default_rng(seed).standard_normal(n), label="identity")
    if name == "deblur":
        dims = size or GridDims(32, 32)
        return deblurring.deblur_problem(phantom(dims), mu, seed=seed)
    if name == "mri":
        dims = size or GridDims(16, 16)
        mask = cartesian_mask(dims, seed=seed)
        return mri.mri_problem(phantom(dims), mask, mu, seed=seed)
    if name == "random":
        rng = np.random.default_rng(seed)
        f = rng.standard_normal(200)
        return random_instances.random_problem(rng, 200, 50, mu, f)
    raise UsageError(f"unknown builtin {name!r}")


def _cmd_tune(args, out) -> int:
    if args.builtin is None:
        raise UsageError("tune needs --builtin")
    seed = _seed(args)
    mu = _default(args.mu, 1.0)
    method = _default(args.method, "gd")
    if method == "closed-form":
        if args.builtin == "deblur":
            theta, _ = closed_form_deblur(mu)
            theta_r, alpha_r = closed_form_deblur(mu, relaxed=True)
            print(f"admm: theta*={theta:.10g}", file=out)
            print(f"oadmm: theta*={theta_r:.10g} alpha*={alpha_r:.10g}", file=out)
            return 0
        if args.builtin == "mri":
            dims = args.size or GridDims(16, 16)
            consts = mri_constants(cartesian_mask(dims, seed=seed), fourier_grid_symbol(dims))
            print(f"admm: theta*={closed_form_mri(mu, consts):.10g}", file=out)
            return 0
        raise UsageError(f"no closed form for builtin {args.builtin!r}; use --method gd")
    problem = builtin_problem(args.builtin, mu, seed, args.size)
    cfg = TunerConfig(fd_step=_default(args.fd_step, 1e-4), max_iters=_default(args.max_iters, 500),
                      multistart_count=_default(args.multistart, 3))
    kinds = OBJECTIVES if _default(args.objective, "both") == "both" else (args.objective,)
    for kind in kinds:
        res = tune_theta(problem, kind, cfg)
        label = "admm" if kind == "lambda-n" else "oadmm"
        alpha = "" if res.alpha_star is None else f" alpha*={res.alpha_star:.10g}"
        print(f"{label}: theta*={res.theta_star:.10g}{alpha} objective={res.objective_at_optimum:.10g} "
              f"converged={res.converged}", file=out)
        if res.note:
            print(f"note: {res.note}", file=out)
    return 0


def _cmd_solve(args, out) -> int:
    if args.builtin is None or args.solver is None:
        raise UsageError("solve needs --builtin and --solver")
    seed = _seed(args)
    target = Path(_default(args.out, "trace.csv"))
    if not target.parent.exists():
        raise UsageError(f"output directory does not exist: {target.parent}")
    problem = builtin_problem(args.builtin, _default(args.mu, 1.0), seed, args.size)
    params = SolverParams(args.solver, theta=args.theta, alpha=args.alpha, step=_default(args.step, "auto"),
                          max_iters=_default(args.max_iters, 5000), tol=_default(args.tol, 1e-10))
    _, trace = solve(problem, params)
    fileio.write_trace_csv(trace, target)
    print(f"{args.solver}: {trace.iterations} iterations, stop={trace.stop_reason}, "
          f"final error={trace.iterates_error[-1]:.6g} -> {target}", file=out)
    return 0


def _run_experiment(args, seed, workdir: Path):
    size = args.size
    max_iters = args.max_iters
    tol = _default(args.tol, 1e-10)
    if args.kind == "random":
        reports = random_instances.run_random_experiment(
            mu=_default(args.mu, 1.0), instance_count=_default(args.instances, 50), seed=seed,
            max_iters=_default(max_iters, 20000), tol=tol, jobs=_default(args.jobs, 1))
        lines = []
        for i, rep in enumerate(reports):
            fileio.write_report(rep, workdir, prefix=f"instance{i:03d}_")
        censor = _default(max_iters, 20000)
        for label in random_instances.LABELS:
            lines.append(f"mean iterations {label}: {random_instances.mean_iterations(reports, label, censor):.6g}")
        outside = sum(bool(r.details["alpha_outside_band"]) for r in reports)
        lines.append(f"alpha* outside [1.5, 1.8]: {outside}/{len(reports)}")
        (workdir / "summary.txt").write_text("\n".join(lines) + "\n")
        return
    if args.kind == "deblur":
        img = fileio.read_pgm(args.image) if args.image else phantom(size or GridDims(64, 64))
        rep = deblurring.deblur(img, mu=_default(args.mu, 1e3), seed=seed, noise_sigma=_default(args.noise, 1e-4),
                                max_iters=_default(max_iters, 5000), tol=tol)
        fileio.write_pgm(workdir / "input.pgm", img)
    elif args.kind == "mri":
        img = fileio.read_pgm(args.image) if args.image else phantom(size or GridDims(32, 32))
        dims = GridDims(*img.shape)
        mask = fileio.read_mask(args.mask) if args.mask else cartesian_mask(dims, fraction=_default(args.fraction, 0.5),
                                                                            seed=seed)
        rep = mri.mri_reconstruct(img, mask, mu=_default(args.mu, 1.0), noise_sigma=_default(args.noise, mri.DEFAULT_NOISE),
                                  seed=seed, max_iters=_default(max_iters, 5000), tol=tol)
        fileio.write_pgm(workdir / "input.pgm", img)
        fileio.write_mask(workdir / "mask.pgm", mask)
    else:
        if args.image:
            src, tgt = fileio.read_pgm(args.image), fileio.read_pgm(args.target)
        else:
            src, tgt = blob_pair(size or GridDims(64, 64))
        result = registration.register(src, tgt, mu=_default(args.mu, 1e3), integration_steps=_default(args.steps, 8),
                                       outer_iters=_default(args.outer_iters, 4),
                                       inner_iters=_default(max_iters, 300), tol=tol)
        rep = result.report
        fileio.write_pgm(workdir / "source.pgm", src)
        fileio.write_pgm(workdir / "target.pgm", tgt)
        dx, dy = result.phi.displacement()
        fileio.write_complex_csv(workdir / "displacement.csv", dx + 1j * dy)
    fileio.write_report(rep, workdir)


def _cmd_experiment(args, out) -> int:
    if args.kind is None:
        raise UsageError("experiment needs a kind: " + "|".join(EXPERIMENTS))
    if args.out is None:
        raise UsageError("experiment needs --out")
    for key in PATH_KEYS:
        value = getattr(args, key)
        if value is not None and not Path(value).is_file():
            raise UsageError(f"--{key} file not found: {value}")
    if args.kind == "register" and (args.image is None) != (args.target is None):
        raise UsageError("register needs both --image and --target, or neither")
    dest = Path(args.out)
    parent = dest.resolve().parent
    if not parent.is_dir():
        raise UsageError(f"parent of --out does not exist: {parent}")
    seed = _seed(args)
    tmp = Path(tempfile.mkdtemp(prefix=".lqadmm-", dir=parent))
    try:
        _run_experiment(args, seed, tmp)
        if dest.exists():
            shutil.rmtree(dest)
        tmp.rename(dest)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    print(f"experiment {args.kind}: results in {dest}", file=out)
    return 0


COMMANDS = {"tune": _cmd_tune, "solve": _cmd_solve, "experiment": _cmd_experiment}


def dispatch(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _merge_config(parser, args)
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(exc, file=err)
        return 1
    except (LQAdmmError, OSError, ValueError, ArithmeticError) as exc:
        print(f"lqadmm: error: {exc}", file=err)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
