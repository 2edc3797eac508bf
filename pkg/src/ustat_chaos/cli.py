"""Command-line front end: ``ustat-chaos <command> [options]``.

Exit status is 0 when every asserted verdict holds, 1 when a check is
violated (the failing instance is written into the report) and 2 for an
invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field

from . import bounds
from .corpus import generate_random_kernel, random_space
from .diagram_calculus import check_product_identity, expected_product, product_multi
from .diagrams import enumerate_colored_multi, stats
from .gaussian_chaos import (gaussian_tail_lower_bound, product_kernel_moment,
                             verify_gaussian_lower_bound)
from .measure_kernel import kernel_to_dict, l2_norm, load_kernel, sup_norm
from .ustat_engine import (ResourceLimitError, exact_distribution, exact_expectation,
                           mc_moment, mc_statistics, tail_estimates)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2
BOUND_KINDS = ("bernstein", "gaussian-upper", "gaussian-lower", "ustat-tail",
               "gaussian-moment", "ustat-moment")


class ConfigError(Exception):
    pass


@dataclass
class Result:
    status: int
    payload: dict | None = None          # JSON reports
    rows: list | None = None             # tabular reports
    header: dict = field(default_factory=dict)


# -- argument helpers -------------------------------------------------------

def _float_list(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _int_list(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")


def _grid(text: str) -> list:
    """``a,b,c`` or ``start:stop:step`` (inclusive of ``stop``)."""
    if ":" in text:
        try:
            start, stop, step = (float(x) for x in text.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad grid {text!r}; use start:stop:step")
        if step <= 0:
            raise argparse.ArgumentTypeError("grid step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return _float_list(text)


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--mode", choices=("rational", "float"), default="float")
    p.add_argument("--tolerance", type=float, default=1e-10,
                   help="float-mode tolerance for identity checks")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=None,
                   help="report format (default depends on the command)")
    return p


def _kernel_source(p: argparse.ArgumentParser, multi: bool) -> None:
    p.add_argument("--kernel", action="append", default=[], metavar="FILE",
                   help="kernel JSON file (repeat for several factors)")
    if multi:
        p.add_argument("--k1", type=int, help="order of a seeded random first kernel")
        p.add_argument("--k2", type=int, help="order of a seeded random second kernel")
        p.add_argument("--orders", type=_int_list, help="orders of seeded random kernels, e.g. 1,2,1")
    else:
        p.add_argument("--k", type=int, help="order of a seeded random kernel")
    p.add_argument("--atoms", type=int, default=2, help="space size for random kernels")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ustat-chaos",
        description="Diagram identities, moments and tail bounds for degenerate U-statistics.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    p = sub.add_parser("verify-product", parents=[common],
                       help="check the diagram expansion of a product pointwise")
    _kernel_source(p, multi=True)
    p.add_argument("--n", type=int, required=True)

    p = sub.add_parser("verify-expectation", parents=[common],
                       help="compare the closed-diagram expectation with brute force")
    _kernel_source(p, multi=True)
    p.add_argument("--n", type=int, required=True)

    p = sub.add_parser("moments", parents=[common], help="Monte Carlo vs exact moments")
    _kernel_source(p, multi=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--M", type=int, default=3, help="largest M (moments 2, 4, ..., 2M)")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--C", type=float, default=bounds.USTAT_MOMENT_C)

    p = sub.add_parser("tails", parents=[common], help="empirical tails against the bounds")
    _kernel_source(p, multi=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--u-grid", type=_grid, required=True)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--A", type=float, default=None, help="tail constant A (calibrated if absent)")
    p.add_argument("--B", type=float, default=1.0)
    p.add_argument("--c", type=_float_list, default=None, metavar="C1,C2,C3",
                   help="constants of the Bernstein-type bound (k=1 defaults to 2,0.5,1/3)")
    p.add_argument("--exact", action="store_true", help="add the exact law (small |X| only)")

    p = sub.add_parser("gaussian-tails", parents=[common], help="exact Hermite tails and bounds")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--u-grid", type=_grid, required=True)
    p.add_argument("--C", type=float, default=None, help="upper-bound constant (calibrated if absent)")

    p = sub.add_parser("bounds-table", parents=[common], help="tabulate a bound on a grid")
    p.add_argument("--which", choices=BOUND_KINDS, required=True)
    p.add_argument("--params", required=True, help="JSON object, e.g. '{\"k\":2,\"sigma\":1,\"C\":1}'")
    p.add_argument("--grid", type=_grid, required=True, help="u values (or M values for moments)")

    p = sub.add_parser("count-diagrams", parents=[common], help="list coloured diagrams")
    p.add_argument("--rows", type=_int_list, required=True)
    p.add_argument("--closed", action="store_true", help="closed diagrams only")

    p = sub.add_parser("gen-kernel", parents=[common], help="write a seeded random kernel")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--atoms", type=int, default=2)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--sup", type=float, default=1.0)
    p.add_argument("--no-canonical", action="store_true")
    p.add_argument("--symmetric", action="store_true")
    return parser


# -- kernels ----------------------------------------------------------------

def _load(paths: list) -> list:
    out = []
    for path in paths:
        if not os.path.isfile(path):
            raise ConfigError(f"kernel file not found: {path}")
        try:
            out.append(load_kernel(path))
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read kernel file {path}: {exc}")
    if out and any(h.space != out[0].space for h in out):
        raise ConfigError("kernel files live on different spaces")
    return out


def _random_kernels(orders: list, args) -> list:
    exact = args.mode == "rational"
    space = random_space(args.atoms, args.seed, exact=exact)
    return [generate_random_kernel(space, k, args.seed * 1000 + i + 1)
            for i, k in enumerate(orders)]


def _factor_kernels(args) -> list:
    if args.kernel:
        fs = _load(args.kernel)
        if args.mode == "float":
            fs = [h.as_float() for h in fs]
        elif not fs[0].exact:
            raise ConfigError("rational mode needs kernel files with rational weights")
        return fs
    orders = args.orders or [k for k in (args.k1, args.k2) if k is not None]
    if not orders:
        raise ConfigError("give --kernel files, --k1/--k2 or --orders")
    if any(k < 1 for k in orders):
        raise ConfigError("kernel orders must be positive")
    if len(orders) < 2:
        raise ConfigError("a product needs at least two factors")
    return _random_kernels(orders, args)


def _single_kernel(args):
    if args.kernel:
        if len(args.kernel) != 1:
            raise ConfigError("give exactly one --kernel file")
        return _load(args.kernel)[0].as_float()
    if args.k is None or args.k < 1:
        raise ConfigError("give --kernel or a positive --k")
    args.mode = "float"
    return _random_kernels([args.k], args)[0]


# -- commands ---------------------------------------------------------------

def cmd_verify_product(args) -> Result:
    fs = _factor_kernels(args)
    if args.n < max(f.order for f in fs):
        raise ConfigError("--n must be at least the largest kernel order")
    terms = product_multi(fs, args.n)
    report = check_product_identity(fs, args.n, terms)
    tol = 0.0 if fs[0].exact else args.tolerance
    ok = report.max_abs_error <= tol
    payload = {"command": "verify-product", "mode": report.mode, "n": args.n,
               "orders": [f.order for f in fs], "terms": report.terms,
               "max_abs_error": report.max_abs_error,
               "checked_assignments": report.checked_assignments,
               "tolerance": tol, "verdict": bounds.HOLDS if ok else bounds.VIOLATED}
    if not ok:
        payload["instance"] = [kernel_to_dict(f) for f in fs]
    return Result(EXIT_OK if ok else EXIT_VIOLATION, payload)


def cmd_verify_expectation(args) -> Result:
    fs = _factor_kernels(args)
    if args.n < max(f.order for f in fs):
        raise ConfigError("--n must be at least the largest kernel order")
    exact = fs[0].exact
    diag = expected_product(fs, args.n, normalized=not exact)
    oracle = exact_expectation(fs, args.n, normalized=not exact)
    err = float(abs(diag - oracle))
    tol = 0.0 if exact else args.tolerance
    ok = err <= tol
    payload = {"command": "verify-expectation", "mode": "rational" if exact else "float",
               "n": args.n, "orders": [f.order for f in fs],
               "normalized": not exact,
               "diagram_value": str(diag) if exact else diag,
               "oracle_value": str(oracle) if exact else oracle,
               "max_abs_error": err, "tolerance": tol,
               "verdict": bounds.HOLDS if ok else bounds.VIOLATED}
    if not ok:
        payload["instance"] = [kernel_to_dict(f) for f in fs]
    return Result(EXIT_OK if ok else EXIT_VIOLATION, payload)


def cmd_moments(args) -> Result:
    f = _single_kernel(args)
    if args.M < 1 or args.samples < 1:
        raise ConfigError("--M and --samples must be positive")
    sigma = l2_norm(f)
    law = exact_distribution(f, args.n) if _law_feasible(f, args.n) else None
    rows = []
    for M in range(1, args.M + 1):
        est = mc_moment(f, args.n, M, args.samples, args.seed)
        exact = law.moment(2 * M) if law is not None else None
        A, eta = bounds.ustat_moment_constant(exact if exact is not None else est.mean,
                                              f.order, M, sigma, args.n, args.C)
        rows.append({"M": M, "mc": est.mean, "mc_stderr": est.stderr, "exact": exact,
                     "eta": eta, "moment_bound_A": A,
                     "A_source": "exact" if exact is not None else "mc"})
    return Result(EXIT_OK, rows=rows, header={"sigma": sigma, "C": args.C, "samples": args.samples})


def _law_feasible(f, n) -> bool:
    return math.comb(n + f.space.size - 1, f.space.size - 1) <= 20_000_000


def cmd_tails(args) -> Result:
    f = _single_kernel(args)
    if args.samples < 1 or any(u < 0 for u in args.u_grid):
        raise ConfigError("--samples must be positive and thresholds nonnegative")
    if float(sup_norm(f)) > 1 + 1e-12:
        raise ConfigError("the tail bounds need a kernel with sup <= 1")
    k, n = f.order, args.n
    sigma = l2_norm(f)
    stats_ = mc_statistics(f, n, args.samples, args.seed)
    est = tail_estimates(stats_, args.u_grid, args.seed)
    law = exact_distribution(f, n) if args.exact and _law_feasible(f, n) else None
    header = {"sigma": sigma, "B": bounds.Constant(args.B, "user").__dict__}
    A = args.A
    if A is None:
        pts = [(e.u, e.ci_high) for e in est if e.p_hat > 0]
        if not pts:
            raise ConfigError("no grid point has empirical mass; cannot calibrate A")
        const = bounds.calibrate_ustat_tail([p[0] for p in pts], [p[1] for p in pts],
                                            k, sigma, n, args.B)
        A = const.value
        header["A"] = const.__dict__
    else:
        header["A"] = bounds.Constant(A, "user").__dict__
    consts = args.c if args.c else ([2.0, 0.5, 1 / 3] if k == 1 else None)
    if consts is not None:
        prov = "user" if args.c else "published"
        header["c"] = {"values": consts, "provenance": prov}
        bp = bounds.BoundParams(k, sigma, n, {name: bounds.Constant(v, prov)
                                              for name, v in zip(("c1", "c2", "c3"), consts)})
    status = EXIT_OK
    rows = []
    for e in est:
        b = bounds.ustat_tail_bound(e.u, k, sigma, n, A, args.B, extend=True)
        comparator = e.ci_high if e.p_hat > 0 else (law.tail(e.u) if law is not None else None)
        v = bounds.verdict(b.value, comparator) if b.applicable else bounds.NOT_APPLICABLE
        if v == bounds.VIOLATED:
            status = EXIT_VIOLATION
        rows.append({"u": e.u, "p_hat": e.p_hat, "ci_halfwidth": e.ci_halfwidth,
                     "ci_low": e.ci_low, "ci_high": e.ci_high, "ci_method": e.method,
                     "exact": law.tail(e.u) if law is not None else None,
                     "ustat_tail_bound": b.value, "regime": b.regime,
                     "bernstein_bound": bounds.chaos_bernstein_bound(e.u, bp) if consts else None,
                     "verdict": v})
    return Result(status, rows=rows, header=header)


def cmd_gaussian_tails(args) -> Result:
    if args.k < 1 or args.sigma <= 0 or any(u < 0 for u in args.u_grid):
        raise ConfigError("need k >= 1, sigma > 0 and nonnegative thresholds")
    lower = verify_gaussian_lower_bound(args.k, args.sigma, args.u_grid)
    exact = lower.exact
    if args.C is None:
        C = bounds.calibrate_constant(
            lambda u: bounds.gaussian_chaos_tail_bound(u, args.k, args.sigma, 1.0),
            args.u_grid, exact)
    else:
        C = bounds.Constant(args.C, "user")
    status = EXIT_OK if lower.ok else EXIT_VIOLATION
    rows = []
    for u, e, lo in zip(args.u_grid, exact, lower.lower):
        up = bounds.gaussian_chaos_tail_bound(u, args.k, args.sigma, C.value)
        v = bounds.verdict(up, e)
        if v == bounds.VIOLATED or e < lo * (1 - 1e-12):
            status = EXIT_VIOLATION
        rows.append({"u": u, "exact_tail": e, "gaussian_upper": up, "gaussian_lower": lo,
                     "verdict": v})
    header = {"k": args.k, "sigma": args.sigma, "C": C.__dict__,
              "C_bar": bounds.Constant(lower.c_bar, "calibrated").__dict__}
    return Result(status, rows=rows, header=header)


def cmd_bounds_table(args) -> Result:
    try:
        params = json.loads(args.params)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--params is not valid JSON: {exc}")
    if not isinstance(params, dict):
        raise ConfigError("--params must be a JSON object")

    def need(name, cast=float):
        if name not in params:
            raise ConfigError(f"--params lacks {name!r} for --which {args.which}")
        return cast(params[name])

    k, sigma = need("k", int), need("sigma")
    rows = []
    header = {"which": args.which, "params": params,
              "provenance": {name: "user" for name in params if name not in ("k", "sigma", "n")}}
    try:
        for x in args.grid:
            if args.which == "bernstein":
                bp = bounds.BoundParams(k, sigma, need("n", int), {
                    c: bounds.Constant(need(c), "user") for c in ("c1", "c2", "c3")})
                rows.append({"u": x, "bound": bounds.chaos_bernstein_bound(x, bp)})
            elif args.which == "gaussian-upper":
                rows.append({"u": x, "bound": bounds.gaussian_chaos_tail_bound(x, k, sigma, need("C"))})
            elif args.which == "gaussian-lower":
                rows.append({"u": x, "bound": gaussian_tail_lower_bound(x, k, sigma, need("C_bar"))})
            elif args.which == "ustat-tail":
                b = bounds.ustat_tail_bound(x, k, sigma, need("n", int), need("A"), need("B"),
                                            extend=bool(params.get("extend", False)),
                                            reading=params.get("reading", "displayed"))
                rows.append({"u": x, "bound": b.value, "regime": b.regime,
                             "verdict": bounds.NOT_APPLICABLE if not b.applicable else ""})
            elif args.which == "gaussian-moment":
                M = int(x)
                df, st = bounds.gaussian_moment_bound(k, M, sigma, float(params.get("A", 1.5)))
                rows.append({"M": M, "double_factorial": df, "stirling": st,
                             "hermite_moment": product_kernel_moment(k, sigma, 2 * M)})
            else:
                M = int(x)
                b = bounds.ustat_moment_bound(k, M, sigma, need("n", int), need("eta"), need("A"),
                                              float(params.get("C", bounds.USTAT_MOMENT_C)))
                rows.append({"M": M, "bound": b.value,
                             "verdict": "" if b.applicable else bounds.NOT_APPLICABLE})
    except ValueError as exc:
        raise ConfigError(str(exc))
    return Result(EXIT_OK, rows=rows, header=header)


def cmd_count_diagrams(args) -> Result:
    if not args.rows or any(k < 1 for k in args.rows):
        raise ConfigError("--rows needs positive sizes, e.g. 1,1")
    rows = []
    for i, d in enumerate(enumerate_colored_multi(args.rows, closed_only=args.closed)):
        st = stats(d)
        rows.append({"index": i, "order": st.k_gamma, "W": st.W, "Z": st.Z,
                     "edges": json.dumps([e.to_list() for e in d.edges])})
    return Result(EXIT_OK, rows=rows, header={"rows": args.rows, "count": len(rows)})


def cmd_gen_kernel(args) -> Result:
    if args.k < 1 or args.atoms < 1:
        raise ConfigError("need k >= 1 and atoms >= 1")
    if args.sigma is not None and args.sigma <= 0:
        raise ConfigError("--sigma must be positive")
    space = random_space(args.atoms, args.seed, exact=args.mode == "rational")
    h = generate_random_kernel(space, args.k, args.seed, canonical=not args.no_canonical,
                               sup=args.sup, sigma=args.sigma, symmetric=args.symmetric)
    return Result(EXIT_OK, payload={"kernel": kernel_to_dict(h)})


COMMANDS = {
    "verify-product": cmd_verify_product,
    "verify-expectation": cmd_verify_expectation,
    "moments": cmd_moments,
    "tails": cmd_tails,
    "gaussian-tails": cmd_gaussian_tails,
    "bounds-table": cmd_bounds_table,
    "count-diagrams": cmd_count_diagrams,
    "gen-kernel": cmd_gen_kernel,
}


# -- output -----------------------------------------------------------------

def _render(result: Result, command: str, fmt: str | None) -> str:
    if command == "gen-kernel":
        return json.dumps(result.payload["kernel"], sort_keys=True) + "\n"
    if result.payload is not None:
        return json.dumps({"schema_version": SCHEMA_VERSION, **result.payload},
                          indent=2, sort_keys=True, default=str) + "\n"
    if (fmt or "csv") == "json":
        return json.dumps({"schema_version": SCHEMA_VERSION, "command": command,
                           "header": result.header, "rows": result.rows},
                          indent=2, sort_keys=True, default=str) + "\n"
    buf = io.StringIO()
    buf.write(f"# schema_version: {SCHEMA_VERSION}\n")
    buf.write(f"# command: {command}\n")
    for key, value in result.header.items():
        buf.write(f"# {key}: {json.dumps(value, sort_keys=True, default=str)}\n")
    if result.rows:
        writer = csv.DictWriter(buf, fieldnames=list(result.rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        for row in result.rows:
            writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return buf.getvalue()


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"ustat-chaos: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceLimitError as exc:
        print(f"ustat-chaos: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = _render(result, args.command, args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return result.status


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
