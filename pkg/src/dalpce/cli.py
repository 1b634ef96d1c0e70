"""Command-line front end.

Subcommands
-----------
``run``
    Learn a surrogate of a built-in case or an external executable and write
    ``convergence.csv``, ``surrogate.json``, ``ed.csv`` and
    ``config_resolved`` into the output directory.
``predict``
    Evaluate a saved surrogate on the rows of a CSV file.
``benchmark``
    Replicated runs of a built-in case against the global baseline.

Exit codes: 0 success, 2 configuration or input error, 3 model failure.

Configuration files hold ``key = value`` lines (``#`` starts a comment);
keys are the :class:`~dalpce.learner.LearnerConfig` fields plus ``model``.
Command-line flags override the file.
"""

import argparse
import configparser
import csv
import io
import logging
import math
import os
import shlex
import subprocess
import sys
import time

import numpy as np

from . import serialize
from ._backend import configure_threads
from .benchmarks import (CASE_NAMES, baseline_design, epsilon_error, get_case,
                         global_pce_baseline, validation_points)
from .errors import ConfigError, DalPceError, DimensionMismatch, ModelEvaluationFailure
from .learner import LearnerConfig, run as run_learner

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MODEL = 3

EXTERN_PREFIX = "extern:"
_CONFIG_SECTION = "dalpce"
_INT_KEYS = {"dim", "budget", "p_local", "n_cg", "n_cl", "n_iter", "n_r", "seed"}
_FLOAT_KEYS = {"n_sim_factor", "q2_stop", "min_edge"}
_BOOL_KEYS = {"restart", "regenerate_screening"}
_STR_KEYS = {"model", "density_convention", "restart_normalization"}


class CliError(Exception):
    """User-facing input problem, reported with exit code 2."""


# ---------------------------------------------------------------- config

def _convert(key, raw):
    raw = raw.strip()
    if key in _STR_KEYS:
        return raw
    if raw.lower() in ("", "none"):
        return None
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _BOOL_KEYS:
            return configparser.ConfigParser.BOOLEAN_STATES[raw.lower()]
    except (ValueError, KeyError):
        raise CliError(f"config key {key!r}: cannot parse {raw!r}") from None
    raise CliError(f"unknown config key {key!r}")


def read_config_file(path):
    """Parse a ``key = value`` file into a dict of typed values."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_string(f"[{_CONFIG_SECTION}]\n" + fh.read(), source=str(path))
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}") from None
    except configparser.Error as exc:
        raise CliError(f"malformed config file: {exc}") from None
    return {k: _convert(k, v) for k, v in parser[_CONFIG_SECTION].items()}


def format_config(values):
    """Inverse of :func:`read_config_file` (sorted keys, one per line)."""
    lines = []
    for key in sorted(values):
        v = values[key]
        if v is None:
            text = "none"
        elif isinstance(v, bool):
            text = "true" if v else "false"
        elif isinstance(v, float):
            text = repr(v)
        else:
            text = str(v)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- models

class ExternalModel:
    """Executable speaking the batch CSV protocol.

    One process per batch: query points go to standard input as
    ``x1,...,xM`` lines, and standard output must hold exactly one decimal
    value per point, in order.
    """

    def __init__(self, command, dim, timeout=None):
        self.argv = shlex.split(command)
        if not self.argv:
            raise CliError("empty external model command")
        self.dim = int(dim)
        self.timeout = timeout

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.dim:
            raise DimensionMismatch(f"external model expects {self.dim} columns")
        payload = "".join(",".join(repr(float(v)) for v in row) + "\n" for row in x)
        try:
            proc = subprocess.run(self.argv, input=payload, capture_output=True, text=True,
                                  timeout=self.timeout, check=False)
        except (OSError, subprocess.SubprocessError) as exc:
            raise ModelEvaluationFailure(f"cannot run {self.argv[0]!r}: {exc}", x) from exc
        if proc.returncode != 0:
            raise ModelEvaluationFailure(
                f"{self.argv[0]!r} exited with status {proc.returncode}: {proc.stderr.strip()[:500]}", x)
        lines = [ln for ln in proc.stdout.splitlines() if ln.strip()]
        if len(lines) != len(x):
            raise ModelEvaluationFailure(
                f"{self.argv[0]!r} returned {len(lines)} values for {len(x)} points", x)
        out = np.empty(len(x))
        for k, ln in enumerate(lines):
            try:
                out[k] = float(ln)
            except ValueError:
                raise ModelEvaluationFailure(f"malformed output line {k + 1}: {ln!r}", x[k:k + 1]) from None
        return out


def resolve_model(name, dim):
    """Return ``(model, dim, case_or_None)``."""
    if name is None:
        raise CliError("--model is required")
    if name.startswith(EXTERN_PREFIX):
        if dim is None:
            raise CliError("--dim is required for an external model")
        return ExternalModel(name[len(EXTERN_PREFIX):], dim), int(dim), None
    try:
        case = get_case(name, dim)
    except KeyError:
        raise CliError(f"unknown model {name!r}; choose from {', '.join(CASE_NAMES)} "
                       f"or {EXTERN_PREFIX}<command>") from None
    except DimensionMismatch as exc:
        raise CliError(str(exc)) from None
    return case, case.dim, case


# ---------------------------------------------------------------- csv output

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


CONVERGENCE_HEADER = ("iteration", "evaluations", "n_domains", "selected_domain_id", "action",
                      "Q2_local", "Q2_global", "wall_ms")
BENCH_HEADER = ("seed", "budget", "method", "epsilon", "n_domains", "restarts", "wall_ms")


def convergence_rows(events):
    return [(e.iteration, e.evaluations, e.n_domains, e.selected_domain_id, e.action,
             float(e.q2_local), None if e.q2_global is None else float(e.q2_global),
             float(e.wall_ms)) for e in events]


def write_ed(path, points, values):
    dim = points.shape[1]
    header = [f"x{j + 1}" for j in range(dim)] + ["y"]
    write_csv(path, header, ([float(v) for v in p] + [float(y)] for p, y in zip(points, values)))


def read_points(path, dim):
    """Read an (n, dim) array from CSV; an optional non-numeric header is skipped."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CliError(f"cannot read points file: {exc}") from None
    out = []
    for lineno, row in enumerate(rows, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            vals = [float(c) for c in row]
        except ValueError:
            if lineno == 1 and not out:
                continue  # header
            raise CliError(f"row {lineno}: non-numeric value in {row!r}") from None
        if len(vals) != dim:
            raise CliError(f"row {lineno}: expected {dim} columns, got {len(vals)}")
        if not all(math.isfinite(v) for v in vals):
            raise CliError(f"row {lineno}: non-finite value")
        out.append(vals)
    return np.array(out, dtype=np.float64).reshape(-1, dim)


# ---------------------------------------------------------------- commands

def _learner_values(args):
    values = read_config_file(args.config) if args.config else {}
    for key in ("model", "dim", "budget", "seed", "p_local", "n_r", "q2_stop"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    return values


def cmd_run(args):
    values = _learner_values(args)
    model_name = values.pop("model", None)
    model, dim, case = resolve_model(model_name, values.get("dim"))
    values["dim"] = dim
    try:
        config = LearnerConfig.from_dict(values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    out = args.out
    os.makedirs(out, exist_ok=True)
    resolved = dict(config.to_dict(), model=model_name)
    with open(os.path.join(out, "config_resolved"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_config(resolved))

    state = run_learner(model, config)
    write_csv(os.path.join(out, "convergence.csv"), CONVERGENCE_HEADER, convergence_rows(state.events))
    serialize.save_decomposition(state.decomposition, os.path.join(out, "surrogate.json"))
    write_ed(os.path.join(out, "ed.csv"), state.ed_points, state.ed_values)

    decomp = state.decomposition
    print(f"stop_reason = {state.stop_reason}")
    print(f"evaluations = {state.evaluations}")
    print(f"n_domains = {len(decomp)}")
    print(f"restarts = {state.restarts}")
    print(f"Q2 = {decomp.aggregate_q2():.6g}")
    if case is not None:
        eps = epsilon_error(decomp, case, dim, n_val=args.n_val, seed=args.val_seed)
        print(f"epsilon = {eps:.6g}")
    return EXIT_OK


def cmd_predict(args):
    try:
        decomp = serialize.load_decomposition(args.surrogate)
    except OSError as exc:
        raise CliError(f"cannot read surrogate: {exc}") from None
    except (ValueError, DalPceError) as exc:
        raise CliError(f"invalid surrogate file: {exc}") from None
    x = read_points(args.points, decomp.dim)
    try:
        y = decomp.global_predict(x) if len(x) else np.zeros(0)
    except DalPceError as exc:
        raise CliError(str(exc)) from None
    if args.out:
        write_csv(args.out, ("prediction",), ([float(v)] for v in y))
    else:
        buf = io.StringIO()
        for v in y:
            buf.write(repr(float(v)) + "\n")
        sys.stdout.write(buf.getvalue())
    if args.stats:
        stats = sys.stderr if not args.out else sys.stdout
        var = decomp.aggregate_variance()
        print(f"mean = {decomp.aggregate_mean()!r}", file=stats)
        print(f"variance = {var!r}", file=stats)
        print(f"exact_variance = {decomp.exact_variance()!r}", file=stats)
        if var > 0:
            sobol = decomp.aggregate_sobol()
            print("sobol = " + ",".join(repr(float(s)) for s in sobol), file=stats)
        else:
            print("sobol = undefined (zero variance)", file=stats)
    return EXIT_OK


def _budgets(text, default):
    if not text:
        return tuple(default)
    try:
        budgets = tuple(int(b) for b in text.split(","))
    except ValueError:
        raise CliError(f"--budgets must be comma-separated integers, got {text!r}") from None
    return budgets


def benchmark_rows(case, reps, budgets, seed=0, n_val=10**6, timing=False, config_overrides=None):
    """Replicated DAL-PCE and baseline runs; one row per (seed, budget, method).

    ``wall_ms`` is left empty unless ``timing`` is set so the rows are
    reproducible byte for byte.
    """
    pts = validation_points(case.dim, n_val, seed)
    truth = case(pts)
    rows = []
    overrides = dict(config_overrides or {})
    for rep in range(reps):
        s = seed + rep
        for budget in budgets:
            t0 = time.perf_counter()
            state = run_learner(case, LearnerConfig(dim=case.dim, budget=budget, seed=s, **overrides))
            eps = epsilon_error(state.decomposition, case, case.dim, points=pts, truth_values=truth)
            t1 = time.perf_counter()
            rows.append((s, budget, "dalpce", eps, len(state.decomposition), state.restarts,
                         (t1 - t0) * 1e3 if timing else None))
            xb = baseline_design(case.dim, budget, s)
            try:
                g = global_pce_baseline(xb, case(xb))
                eps_g = epsilon_error(g, case, case.dim, points=pts, truth_values=truth)
            except ValueError:
                logger.info("baseline undefined for budget %d in %d dimensions", budget, case.dim)
                eps_g = float("nan")
            rows.append((s, budget, "global", eps_g, 1, 0,
                         (time.perf_counter() - t1) * 1e3 if timing else None))
    return rows


def summarize(rows):
    """Median epsilon and the log10-epsilon percentiles at +-1 sigma.

    Returns a list of ``(method, budget, n, median, p16, p84)`` where the
    percentiles refer to log10 epsilon; NaN epsilons are ignored.
    """
    lo, hi = 100 * 0.5 * (1 - math.erf(1 / math.sqrt(2))), 100 * 0.5 * (1 + math.erf(1 / math.sqrt(2)))
    groups = {}
    for seed, budget, method, eps, *_ in rows:
        groups.setdefault((method, int(budget)), []).append(float(eps))
    out = []
    for (method, budget), eps in sorted(groups.items()):
        e = np.array([v for v in eps if math.isfinite(v)])
        if e.size == 0:
            out.append((method, budget, 0, math.nan, math.nan, math.nan))
            continue
        le = np.log10(np.maximum(e, np.finfo(float).tiny))
        out.append((method, budget, int(e.size), float(np.median(e)),
                    float(np.percentile(le, lo)), float(np.percentile(le, hi))))
    return out


def cmd_benchmark(args):
    try:
        case = get_case(args.case, args.dim)
    except KeyError:
        raise CliError(f"unknown case {args.case!r}; choose from {', '.join(CASE_NAMES)}") from None
    except DimensionMismatch as exc:
        raise CliError(str(exc)) from None
    if args.reps < 1:
        raise CliError("--reps must be >= 1")
    budgets = _budgets(args.budgets, case.budgets)
    rows = benchmark_rows(case, args.reps, budgets, args.seed, args.n_val, args.timing)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"bench_{case.name}.csv")
    write_csv(path, BENCH_HEADER, rows)
    print("method,budget,n,median_epsilon,log10_p16,log10_p84")
    for method, budget, n, med, p16, p84 in summarize(rows):
        print(f"{method},{budget},{n},{med:.6g},{p16:.4f},{p84:.4f}")
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser():
    parser = argparse.ArgumentParser(prog="dalpce", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="learn a surrogate")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--model", help=f"built-in case ({', '.join(CASE_NAMES)}) or {EXTERN_PREFIX}<command>")
    p.add_argument("--dim", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=".")
    p.add_argument("--p-local", dest="p_local", type=int)
    p.add_argument("--n-r", dest="n_r", type=int)
    p.add_argument("--q2-stop", dest="q2_stop", type=float)
    p.add_argument("--n-val", dest="n_val", type=int, default=10**6,
                   help="validation set size for the error of built-in cases")
    p.add_argument("--val-seed", dest="val_seed", type=int, default=0)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("predict", help="evaluate a saved surrogate")
    p.add_argument("surrogate")
    p.add_argument("points", help="CSV file, one point per row")
    p.add_argument("--out", help="predictions CSV (default: stdout)")
    p.add_argument("--stats", action="store_true", help="print mean, variance and Sobol indices")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("benchmark", help="replicated runs against the global baseline")
    p.add_argument("case", help=", ".join(CASE_NAMES))
    p.add_argument("--dim", type=int)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--budgets", help="comma-separated budgets (default: per case)")
    p.add_argument("--seed", type=int, default=0, help="first seed; replicate k uses seed + k")
    p.add_argument("--n-val", dest="n_val", type=int, default=10**6)
    p.add_argument("--out", default=".")
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        configure_threads()
        return args.func(args)
    except (CliError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelEvaluationFailure as exc:
        print(f"model failure: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
