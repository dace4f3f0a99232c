"""Command-line front end.

Every command writes a report that embeds the argument vector and seed, so
re-running the embedded command reproduces it bit for bit.  JSON reports are
one object; CSV reports are a header plus rows, preceded by ``#`` metadata
lines (see :func:`read_csv_report`).

Exit codes: 0 success, 2 validation failure, 3 configuration error,
4 infeasible truncation, 5 numerical divergence.
"""

from __future__ import annotations

import argparse
import csv
import importlib
import io
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .coefficients import PATTERNS, as_pattern, build_table, kernel_norm_sq, save_table
from .error_calc import (
    DEFAULT_BUDGET_C,
    ErrorBudget,
    IndexPattern,
    error_bound,
    exact_error,
    select_truncations,
)
from .exceptions import ConfigurationError, DivergenceError, InfeasibleTruncationError, ItoSeriesError
from .models import MODELS, Model, get_model
from .sampling import (
    PAIR_PATTERNS,
    SINGLE_PATTERNS,
    TABLE_PATTERNS,
    PathStreams,
    TruncationPlan,
    sample_multiple,
    sample_pair,
    sample_single,
)
from .scheme import ORDERS, SchemeConfig, SdeCoefficients, run_path
from .stratonovich import triple_error_terms

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_DIVERGED = 0, 2, 3, 4, 5

#: Truncation levels at which the reference residual constants are quoted.
REFERENCE_PLAN = {"00": 6, "01": 6, "10": 6, "000": 6, "001": 2, "010": 2, "100": 2, "0000": 2, "00000": 1}

Z_GATE = 4.0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


# ------------------------------------------------------------------ reports

class Report:
    def __init__(self, command: str, args: argparse.Namespace, argv: list[str]):
        self.data = {
            "tool": "itoseries",
            "version": __version__,
            "command": command,
            "argv": list(argv),
            "seed": getattr(args, "seed", None),
            "flags": {k: v for k, v in vars(args).items() if k not in ("func",)},
            "plan": None,
            "results": [],
            "timings": {},
        }
        self._t0 = time.perf_counter()

    def add(self, row: dict):
        self.data["results"].append(row)

    def finish(self):
        self.data["timings"]["total_s"] = round(time.perf_counter() - self._t0, 6)

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return json.dumps(self.data, indent=2, default=_json_default) + "\n"
        buf = io.StringIO()
        for key in ("tool", "version", "command", "seed"):
            buf.write(f"# {key}: {self.data[key]}\n")
        buf.write(f"# argv: {json.dumps(self.data['argv'])}\n")
        if self.data["plan"] is not None:
            buf.write(f"# plan: {json.dumps(self.data['plan'])}\n")
        rows = self.data["results"]
        if rows:
            fields = list(dict.fromkeys(k for r in rows for k in r))
            writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
            writer.writeheader()
            for r in rows:
                writer.writerow({k: _csv_value(v) for k, v in r.items()})
        return buf.getvalue()


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    return str(obj)


def _csv_value(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(v, default=_json_default)
    return v


def read_csv_report(text: str) -> tuple[dict, list[dict]]:
    """Split a CSV report into its ``#`` metadata and its rows."""
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value) if key in ("argv", "plan") else value
        elif line:
            body.append(line)
    return meta, list(csv.DictReader(body))


def _emit(report: Report, args) -> None:
    report.finish()
    text = report.render(args.format)
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            raise ConfigurationError(f"cannot write {args.out}: {exc.strerror}") from exc
    else:
        sys.stdout.write(text)


def _f17(x) -> str:
    return f"{float(x):.17g}"


# ---------------------------------------------------------------- commands

def cmd_coeffs(args, argv) -> int:
    pattern = as_pattern(args.pattern)
    table = build_table(pattern, args.q)
    if args.format == "table":
        if not args.out:
            raise ConfigurationError("--format table needs --out PATH")
        try:
            save_table(table, args.out)
        except OSError as exc:
            raise ConfigurationError(f"cannot write {args.out}: {exc.strerror}") from exc
        return EXIT_OK
    report = Report("coeffs", args, argv)
    report.data["plan"] = {pattern: args.q}
    scaled = table.scaled(args.delta)
    for j, value in table.items():
        report.add({"j": ",".join(map(str, j)), "cbar": f"{value.numerator}/{value.denominator}",
                    "cbar_decimal": _f17(value), "scaled": _f17(scaled[j])})
    residual = kernel_norm_sq(pattern, args.delta) - float((scaled * scaled).sum())
    report.data["summary"] = {"entries": len(table), "kernel_norm_sq": kernel_norm_sq(pattern, args.delta),
                              "residual": residual}
    _emit(report, args)
    return EXIT_OK


def _patterns_arg(text):
    if not text:
        return list(PAIR_PATTERNS + TABLE_PATTERNS)
    return [as_pattern(p) for p in text.split(",")]


def cmd_errors(args, argv) -> int:
    budget = ErrorBudget(args.budget_c, args.delta)
    report = Report("errors", args, argv)
    plan, infeasible = {}, []
    for pattern in _patterns_arg(args.patterns):
        row = {"pattern": pattern, "target": budget.target}
        try:
            q = select_truncations(budget, [pattern], args.strategy, args.m)[pattern]
        except InfeasibleTruncationError as exc:
            row.update({"q": None, "status": "infeasible", "q_cap": exc.q_cap})
            infeasible.append(pattern)
            report.add(row)
            continue
        plan[pattern] = q
        k = len(pattern)
        row.update({"q": q, "status": "ok",
                    "exact_error": exact_error(pattern, q, args.delta, IndexPattern.distinct(k)),
                    "bound": error_bound(pattern, q, args.delta) if pattern in TABLE_PATTERNS else None})
        report.add(row)
    report.data["plan"] = plan
    _emit(report, args)
    if infeasible:
        print(f"infeasible truncation for {', '.join(infeasible)}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _plan_from_args(args, patterns) -> TruncationPlan:
    if getattr(args, "q", None) is not None:
        return TruncationPlan({p: args.q for p in patterns if len(p) >= 2})
    return TruncationPlan({p: REFERENCE_PLAN[p] for p in patterns if len(p) >= 2})


def moment_rows(values: dict, delta: float, plan: TruncationPlan) -> list[dict]:
    """Mean and variance z-scores of distinct-index samples against exact targets."""
    rows = []
    for pattern, x in values.items():
        k = len(pattern)
        n = len(x)
        q = plan[pattern] if k >= 2 else 0
        target = float(kernel_norm_sq(pattern, delta)) - exact_error(pattern, q, delta, IndexPattern.distinct(k))
        mean = float(x.mean())
        var = float(x.var(ddof=1))
        m4 = float(((x - mean) ** 4).mean())
        z_mean = mean / math.sqrt(var / n)
        z_var = (var - target) / math.sqrt(max(m4 - var * var, 1e-300) / n)
        rows.append({"pattern": pattern, "q": q, "n": n, "mean": mean, "var": var, "var_target": target,
                     "z_mean": z_mean, "z_var": z_var,
                     "pass": abs(z_mean) <= Z_GATE and abs(z_var) <= Z_GATE})
    return rows


def distinct_samples(plan: TruncationPlan, n: int, delta: float, seed: int, patterns=PATTERNS) -> dict:
    """``n`` samples per family with all-distinct Wiener indices ``(0, 1, ..., k-1)``."""
    m = max(len(p) for p in patterns)
    z = PathStreams(seed).pools(0, n, m, plan.q_max).values
    out = {}
    for pattern in patterns:
        idx = tuple(range(len(pattern)))
        if pattern in SINGLE_PATTERNS:
            out[pattern] = sample_single(pattern, 0, z, delta)
        elif pattern in PAIR_PATTERNS:
            out[pattern] = sample_pair(pattern, 0, 1, plan[pattern], z, delta)
        else:
            out[pattern] = sample_multiple(pattern, idx, plan[pattern], z, delta)
    return out


def cmd_validate(args, argv) -> int:
    if args.samples < 10_000:
        raise ConfigurationError("validate needs --samples >= 10000")
    patterns = _patterns_arg(args.patterns) if args.patterns else list(PATTERNS)
    plan = _plan_from_args(args, patterns)
    report = Report("validate", args, argv)
    report.data["plan"] = plan.q
    values = distinct_samples(plan, args.samples, args.delta, args.seed, patterns)
    rows = moment_rows(values, args.delta, plan)
    for row in rows:
        report.add(row)
    _emit(report, args)
    failed = [r["pattern"] for r in rows if not r["pass"]]
    if failed:
        print(f"moment check failed for {', '.join(failed)}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def _indices_arg(text: str, k: int) -> tuple[int, ...]:
    idx = tuple(int(s) - 1 for s in text.split(","))
    if len(idx) != k or min(idx) < 0:
        raise ConfigurationError(f"--indices needs {k} comma-separated values >= 1")
    return idx


def cmd_sample(args, argv) -> int:
    pattern = as_pattern(args.pattern)
    k = len(pattern)
    idx = _indices_arg(args.indices, k) if args.indices else tuple(range(k))
    m = max(idx) + 1
    q = args.q if args.q is not None else REFERENCE_PLAN.get(pattern, 0)
    pool = PathStreams(args.seed).pools(0, args.paths, m, q).values
    if pattern in SINGLE_PATTERNS:
        values = sample_single(pattern, idx[0], pool, args.delta)
    elif pattern in PAIR_PATTERNS:
        values = sample_pair(pattern, idx[0], idx[1], q, pool, args.delta)
    else:
        values = sample_multiple(pattern, idx, q, pool, args.delta)
    report = Report("sample", args, argv)
    report.data["plan"] = {pattern: q}
    for i, v in enumerate(np.atleast_1d(values)):
        report.add({"sample_id": i, "value": float(v)})
    _emit(report, args)
    return EXIT_OK


def cmd_strat_compare(args, argv) -> int:
    report = Report("strat-compare", args, argv)
    table = build_table("000", args.q_max)
    for q in range(args.q_max + 1):
        f, g, h = triple_error_terms(q, args.delta, table)
        report.add({"q": q, "F": f, "G": g, "H": h,
                    "ito_error_distinct": exact_error("000", q, args.delta, IndexPattern.distinct(3), table)})
    _emit(report, args)
    return EXIT_OK


def load_model(spec: str, params: str | None = None) -> Model:
    """A built-in model name, or ``module:attr`` returning a :class:`Model` or :class:`SdeCoefficients`."""
    kwargs = json.loads(params) if params else {}
    if ":" not in spec:
        return get_model(spec, **kwargs)
    module, _, attr = spec.partition(":")
    try:
        obj = getattr(importlib.import_module(module), attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigurationError(f"cannot load model plugin {spec!r}: {exc}") from exc
    obj = obj(**kwargs) if callable(obj) and not isinstance(obj, (Model, SdeCoefficients)) else obj
    if isinstance(obj, SdeCoefficients):
        raise ConfigurationError("plugin returned bare coefficients; wrap them in a Model with y0")
    if not isinstance(obj, Model):
        raise ConfigurationError(f"plugin {spec!r} did not produce a Model")
    return obj


def _scheme_config(args, order, delta, steps) -> SchemeConfig:
    plan = TruncationPlan.uniform(args.q) if args.q is not None else None
    return SchemeConfig(order=order, delta=delta, steps=steps, budget_c=args.budget_c, plan=plan)


def _steps_for(T: float, delta: float) -> int:
    steps = round(T / delta)
    if steps < 1 or not math.isclose(steps * delta, T, rel_tol=1e-9):
        raise ConfigurationError(f"T={T} is not a whole number of steps of {delta}")
    return steps


def cmd_solve(args, argv) -> int:
    model = load_model(args.model, args.model_params)
    steps = _steps_for(args.T, args.delta)
    cfg = _scheme_config(args, args.order, args.delta, steps)
    res = run_path(model.coeffs, model.y0, cfg, seed=args.seed, paths=args.paths)
    report = Report("solve", args, argv)
    report.data["plan"] = res.plan.q
    n = model.coeffs.n
    for p in range(args.paths):
        row = {"path_id": p}
        row.update({f"x{c + 1}": float(res.terminal[p, c]) for c in range(n)})
        report.add(row)
    y = res.terminal
    summary = {"mean": y.mean(0), "stderr": y.std(0, ddof=1) / math.sqrt(len(y)) if len(y) > 1 else None}
    if model.mean is not None:
        summary["exact_mean"] = model.mean(args.T)
    report.data["summary"] = summary
    _emit(report, args)
    return EXIT_OK


def _grid(args) -> list[float]:
    if args.deltas:
        grid = sorted((float(s) for s in args.deltas.split(",")), reverse=True)
    else:
        grid = [2.0**-e for e in range(2, 7)]
    if len(grid) < 4:
        raise ConfigurationError("the step grid needs at least 4 points")
    ratios = [a / b for a, b in zip(grid, grid[1:])]
    if not all(math.isclose(r, ratios[0], rel_tol=1e-9) for r in ratios):
        raise ConfigurationError("the step grid must be geometric")
    return grid


def strong_errors(model: Model, order: float, grid, T: float, paths: int, seed: int, q=None, budget_c=1.0):
    """Per-path terminal errors ``|y_N - x_T|`` for each step; shape ``(len(grid), paths)``."""
    if model.exact is None:
        raise ConfigurationError(f"model {model.name!r} has no pathwise reference solution")
    out = np.empty((len(grid), paths))
    plans = []
    for g, delta in enumerate(grid):
        steps = _steps_for(T, delta)
        plan = TruncationPlan.uniform(q) if q is not None else None
        cfg = SchemeConfig(order=order, delta=delta, steps=steps, budget_c=budget_c, plan=plan)
        res = run_path(model.coeffs, model.y0, cfg, seed=seed, paths=paths)
        out[g] = np.linalg.norm(res.terminal - model.exact(T, res.w[-1]), axis=1)
        plans.append(res.plan.q)
    return out, plans


def fit_slope(grid, errors: np.ndarray, seed: int = 0, resamples: int = 400) -> dict:
    """Least-squares slope of log mean error against log step, with a path bootstrap error."""
    x = np.log(np.asarray(grid))
    y = np.log(errors.mean(axis=1))
    slope, intercept = np.polyfit(x, y, 1)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0xB007])))
    n = errors.shape[1]
    boot = np.empty(resamples)
    for b in range(resamples):
        pick = rng.integers(0, n, n)
        boot[b] = np.polyfit(x, np.log(errors[:, pick].mean(axis=1)), 1)[0]
    resid = y - (slope * x + intercept)
    fit_se = math.sqrt((resid @ resid) / (len(x) - 2) / ((x - x.mean()) @ (x - x.mean())))
    return {"slope": float(slope), "slope_se": float(boot.std(ddof=1)), "fit_residual_se": fit_se,
            "intercept": float(intercept)}


def cmd_convergence(args, argv) -> int:
    model = load_model(args.model, args.model_params)
    grid = _grid(args)
    orders = [float(o) for o in args.orders.split(",")]
    report = Report("convergence", args, argv)
    report.data["slopes"] = {}
    plans = {}
    for order in orders:
        if order not in ORDERS:
            raise ConfigurationError(f"order must be one of {ORDERS}")
        errs, order_plans = strong_errors(model, order, grid, args.T, args.paths, args.seed, args.q, args.budget_c)
        plans[str(order)] = order_plans
        fit = fit_slope(grid, errs, args.seed)
        report.data["slopes"][str(order)] = fit
        for delta, e in zip(grid, errs):
            report.add({"order": order, "delta": delta, "strong_error": float(e.mean()),
                        "stderr": float(e.std(ddof=1) / math.sqrt(len(e))),
                        "slope": fit["slope"], "slope_se": fit["slope_se"]})
    report.data["plan"] = plans
    _emit(report, args)
    return EXIT_OK


# ------------------------------------------------------------------ parser

def _common(p: argparse.ArgumentParser, formats=("csv", "json"), default_format="json"):
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--format", choices=formats, default=default_format)
    p.add_argument("--out", default=None, help="write the report here instead of stdout")
    p.add_argument("--budget-c", type=float, default=DEFAULT_BUDGET_C, dest="budget_c")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="itoseries", description="Iterated Ito integrals by Legendre expansions.")
    parser.add_argument("--version", action="version", version=f"itoseries {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("coeffs", help="exact coefficient table of one weight pattern")
    _common(p, formats=("table", "csv", "json"))
    p.add_argument("--pattern", required=True)
    p.add_argument("--q", type=int, required=True)
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("errors", help="minimal truncation per pattern for the budget C*delta^6")
    _common(p)
    p.add_argument("--patterns", default=None, help="comma-separated, default all of multiplicity >= 2")
    p.add_argument("--strategy", choices=("bound", "exact"), default="bound")
    p.add_argument("--m", type=int, default=None, help="number of Wiener processes (exact strategy)")
    p.set_defaults(func=cmd_errors)

    p = sub.add_parser("validate", help="Monte Carlo moment check against exact variances")
    _common(p)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--q", type=int, default=None, help="one q for every family (default: reference plan)")
    p.add_argument("--patterns", default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sample", help="draw approximations of one integral")
    _common(p, default_format="csv")
    p.add_argument("--pattern", required=True)
    p.add_argument("--indices", default=None, help="1-based Wiener indices, innermost first, e.g. 1,1,2")
    p.add_argument("--q", type=int, default=None)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("strat-compare", help="F, G, H decay of the Stratonovich triple approximation")
    _common(p)
    p.add_argument("--q-max", type=int, default=12, dest="q_max")
    p.set_defaults(func=cmd_strat_compare)

    for name, func, helptext in (("solve", cmd_solve, "terminal states of simulated paths"),
                                 ("convergence", cmd_convergence, "strong convergence slopes")):
        p = sub.add_parser(name, help=helptext)
        _common(p, default_format="csv" if name == "solve" else "json")
        p.add_argument("--model", default="gbm", help=f"one of {sorted(MODELS)} or module:attr")
        p.add_argument("--model-params", default=None, dest="model_params", help="JSON keyword arguments")
        p.add_argument("--T", type=float, default=1.0)
        p.add_argument("--q", type=int, default=None, help="one q for every family (default: budget plan)")
        if name == "solve":
            p.add_argument("--order", type=float, choices=ORDERS, default=2.5)
        else:
            p.add_argument("--orders", default="1.5,2.0,2.5")
            p.add_argument("--deltas", default=None, help="geometric grid, default 2^-2..2^-6")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, argv)
    except InfeasibleTruncationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigurationError, ItoSeriesError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
