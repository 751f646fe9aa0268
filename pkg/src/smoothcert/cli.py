"""Command-line surface.

One subcommand per invocation; every number printed is reproducible bit for
bit from argv plus the seed.  Exit codes: 0 success, 2 usage problems
(unknown flags, malformed specs, unreadable files), 3 oracle or protocol
failures, 4 an infeasible plan under ``--strict``.

Oracle specs:   synthetic:pA=0.9,k=10,rivals=uniform
                recorded:votes.csv
                external:python serve_model.py --flags
Distributions:  piecewise:k1=0,k2=0,beta=0.5
                empirical:histogram.csv
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from datetime import datetime, timezone
from typing import IO

from ._version import __version__
from .bounds import (
    ONE_SIDED_QUANTILE,
    TWO_SIDED_QUANTILE,
    ConfidenceSpec,
    ProbEstimate,
    clt_lower_bound,
    cp_lower_bound,
)
from .certify import (
    CLOPPER_PEARSON,
    CLT,
    BatchError,
    Certified,
    certify_batch,
    outcome_to_dict,
)
from .harness import (
    default_radius_grid,
    grid_from_dict,
    run_accuracy_curves,
    run_bound_comparison,
    run_ratio_experiment,
)
from .oracles import (
    SINGLE_RIVAL,
    UNIFORM_RIVALS,
    ExternalOracle,
    OracleError,
    RecordedOracle,
    SyntheticOracle,
)
from .population import (
    PADistribution,
    accuracy_drop_bound,
    average_radius,
    load_empirical_csv,
    ratio_theoretical,
    theta_numeric,
)
from .radius import (
    EXACT_QUANTILE,
    SHORE_EXPANSION,
    SmoothingConfig,
    expected_radius,
    plan_samples,
)

__all__ = ["main", "dispatch"]

_BOUND_NAMES = {"cp": CLOPPER_PEARSON, "clt": CLT}
_Z_NAMES = {"two-sided": TWO_SIDED_QUANTILE, "one-sided": ONE_SIDED_QUANTILE}
_METHOD_NAMES = {"exact": EXACT_QUANTILE, "shore": SHORE_EXPANSION}


class UsageError(ValueError):
    """Bad argv content that argparse's grammar cannot catch."""


def _conf(args: argparse.Namespace) -> ConfidenceSpec:
    convention = _Z_NAMES[getattr(args, "z_convention", "two-sided")]
    return ConfidenceSpec(alpha=args.alpha, z_convention=convention)


def _parse_kv(text: str, what: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for chunk in text.split(","):
        if not chunk:
            continue
        key, sep, value = chunk.partition("=")
        if not sep or not key or not value:
            raise UsageError(f"malformed {what} parameter {chunk!r} (expected key=value)")
        if key in out:
            raise UsageError(f"duplicate {what} parameter {key!r}")
        out[key] = value
    return out


def _parse_oracle(text: str, jobs: int):
    kind, sep, rest = text.partition(":")
    if kind == "synthetic":
        params = _parse_kv(rest, "oracle")
        unknown = set(params) - {"pA", "pa", "k", "rivals"}
        if unknown:
            raise UsageError(f"unknown synthetic oracle keys: {sorted(unknown)}")
        if "pA" in params and "pa" in params:
            raise UsageError("give pA once")
        p_text = params.get("pA", params.get("pa"))
        if p_text is None:
            raise UsageError("synthetic oracles need pA=<prob>")
        try:
            p_a = float(p_text)
            num_classes = int(params.get("k", "2"))
        except ValueError as exc:
            raise UsageError(f"bad synthetic oracle numbers: {exc}") from None
        rivals = params.get("rivals", "single")
        policy = {"single": SINGLE_RIVAL, "uniform": UNIFORM_RIVALS}.get(rivals)
        if policy is None:
            raise UsageError(f"rivals must be 'single' or 'uniform', got {rivals!r}")
        try:
            return SyntheticOracle(p_a=p_a, num_classes=num_classes, rival_policy=policy)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if kind == "recorded":
        if not rest:
            raise UsageError("recorded oracles need a file path: recorded:votes.csv")
        return RecordedOracle(path=rest)
    if kind == "external":
        if not rest:
            raise UsageError("external oracles need a command: external:python serve.py")
        return ExternalOracle(command=rest, pool_size=max(1, jobs))
    raise UsageError(f"unknown oracle kind {kind!r} (synthetic | recorded | external)")


def _parse_dist(text: str) -> PADistribution:
    kind, sep, rest = text.partition(":")
    if kind == "piecewise":
        params = _parse_kv(rest, "dist")
        unknown = set(params) - {"k1", "k2", "beta"}
        if unknown:
            raise UsageError(f"unknown piecewise keys: {sorted(unknown)}")
        if "beta" not in params:
            raise UsageError("piecewise distributions need beta=<value>")
        try:
            return PADistribution.piecewise(
                float(params.get("k1", "0")), float(params.get("k2", "0")), float(params["beta"])
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if kind == "empirical":
        if not rest:
            raise UsageError("empirical distributions need a file path: empirical:hist.csv")
        try:
            return load_empirical_csv(rest)
        except (OSError, ValueError) as exc:
            raise UsageError(str(exc)) from None
    raise UsageError(f"unknown dist kind {kind!r} (piecewise | empirical)")


def _read_points(path: str) -> list[str]:
    try:
        with open(path, encoding="utf-8") as fp:
            points = [line.strip() for line in fp]
    except OSError as exc:
        raise UsageError(f"cannot read points file {path!r}: {exc}") from None
    points = [p for p in points if p and not p.startswith("#")]
    if not points:
        raise UsageError(f"points file {path!r} lists no points")
    return points


def _emit_scalar(args: argparse.Namespace, fields: dict, value_key: str, out: IO[str]) -> None:
    if args.format == "json":
        out.write(json.dumps(fields) + "\n")
    elif args.format == "csv":
        out.write(",".join(fields) + "\n")
        out.write(",".join(_csv_cell(v) for v in fields.values()) + "\n")
    else:
        out.write(f"{fields[value_key]!r}\n")


def _csv_cell(value: object) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _cmd_bound(args: argparse.Namespace) -> int:
    conf = _conf(args)
    est = ProbEstimate(successes=args.successes, n=args.n)
    method = _BOUND_NAMES[args.method]
    if method == CLOPPER_PEARSON:
        value = cp_lower_bound(est, conf)
    else:
        value = clt_lower_bound(est, conf)
    _emit_scalar(
        args,
        {
            "successes": args.successes,
            "n": args.n,
            "alpha": args.alpha,
            "method": method,
            "lower_bound": value,
        },
        "lower_bound",
        sys.stdout,
    )
    return 0


def _cmd_certify(args: argparse.Namespace) -> int:
    oracle = _parse_oracle(args.oracle, args.jobs)
    if args.points is not None:
        points = _read_points(args.points)
    elif isinstance(oracle, RecordedOracle):
        points = oracle.point_ids
    elif isinstance(oracle, SyntheticOracle):
        points = ["point0"]
    else:
        raise UsageError("external oracles need --points FILE")
    conf = _conf(args)
    cfg = SmoothingConfig(sigma=args.sigma, conf=conf, n=args.n)
    try:
        outcomes = certify_batch(
            oracle,
            points,
            cfg,
            bound_method=_BOUND_NAMES[args.bound],
            seed=args.seed,
            parallelism=args.jobs,
            two_phase=args.two_phase,
            n_selection=args.n0,
        )
    finally:
        if isinstance(oracle, ExternalOracle):
            oracle.close()
    out = sys.stdout
    if args.format == "json":
        for outcome in outcomes:
            out.write(json.dumps(outcome_to_dict(outcome)) + "\n")
    elif args.format == "csv":
        out.write(
            "point_id,decision,class_label,radius,p_hat,p_lower,n,alpha,sigma,"
            "bound_method,tie_broken,saturated\n"
        )
        for o in outcomes:
            if isinstance(o.decision, Certified):
                decision, label, radius = "certified", str(o.decision.class_label), repr(o.decision.radius)
            else:
                decision, label, radius = "abstain", "", ""
            out.write(
                f"{o.point_id},{decision},{label},{radius},{o.p_hat!r},{o.p_lower!r},"
                f"{o.n},{o.alpha!r},{o.sigma!r},{o.bound_method},{o.tie_broken},{o.saturated}\n"
            )
    else:
        for o in outcomes:
            if isinstance(o.decision, Certified):
                out.write(
                    f"{o.point_id} certified class={o.decision.class_label} "
                    f"radius={o.decision.radius!r} p_lower={o.p_lower!r} n={o.n}\n"
                )
            else:
                out.write(f"{o.point_id} abstain p_lower={o.p_lower!r} n={o.n}\n")
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    conf = _conf(args)
    method = _METHOD_NAMES[args.method]
    now = expected_radius(args.pa, SmoothingConfig(sigma=args.sigma, conf=conf, n=args.n), method)
    later = expected_radius(
        args.pa, SmoothingConfig(sigma=args.sigma, conf=conf, n=100 * args.n), method
    )
    fields = {
        "p_a": args.pa,
        "n": args.n,
        "alpha": args.alpha,
        "sigma": args.sigma,
        "method": args.method,
        "expected_radius_now": now.expected_radius,
        "expected_radius_100n": later.expected_radius,
        "limit_radius": now.limit_radius,
        "t_term_now": now.t_term,
    }
    if args.format == "json":
        sys.stdout.write(json.dumps(fields) + "\n")
    elif args.format == "csv":
        sys.stdout.write(",".join(fields) + "\n")
        sys.stdout.write(",".join(_csv_cell(v) for v in fields.values()) + "\n")
    else:
        sys.stdout.write(f"expected_radius_now {now.expected_radius!r}\n")
        sys.stdout.write(f"expected_radius_100n {later.expected_radius!r}\n")
        sys.stdout.write(f"limit_radius {now.limit_radius!r}\n")
    return 0


def _cmd_plan(args: argparse.Namespace) -> int:
    conf = _conf(args)
    plan = plan_samples(
        args.pa, args.sigma, conf, args.target_radius, current_n=args.current_n
    )
    fields = {
        "p_a": args.pa,
        "sigma": args.sigma,
        "alpha": args.alpha,
        "target_radius": args.target_radius,
        "current_n": plan.current_n,
        "achievable_in_limit": plan.achievable_in_limit,
        "required_n": plan.required_n,
    }
    if args.format == "json":
        sys.stdout.write(json.dumps(fields) + "\n")
    elif args.format == "csv":
        sys.stdout.write(",".join(fields) + "\n")
        row = {**fields, "required_n": "" if plan.required_n is None else plan.required_n}
        sys.stdout.write(",".join(_csv_cell(v) for v in row.values()) + "\n")
    else:
        if plan.achievable_in_limit:
            sys.stdout.write(f"required_n {plan.required_n}\n")
            extra = max(0, plan.required_n - plan.current_n)
            sys.stdout.write(f"additional_n {extra}\n")
        else:
            sys.stdout.write("unachievable\n")
    if args.strict and not plan.achievable_in_limit:
        return 4
    return 0


def _cmd_average(args: argparse.Namespace) -> int:
    conf = _conf(args)
    dist = _parse_dist(args.dist)
    cfg = SmoothingConfig(sigma=args.sigma, conf=conf, n=args.n)
    value = average_radius(dist, cfg)
    _emit_scalar(
        args,
        {
            "dist": args.dist,
            "n": args.n,
            "alpha": args.alpha,
            "sigma": args.sigma,
            "average_radius": value,
        },
        "average_radius",
        sys.stdout,
    )
    return 0


def _cmd_ratio(args: argparse.Namespace) -> int:
    conf = _conf(args)
    if args.numeric_theta:
        try:
            theta = theta_numeric(args.beta)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        value = 1.0 - theta * conf.z / math.sqrt(args.n)
    else:
        try:
            value = ratio_theoretical(conf, args.n, args.beta)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    _emit_scalar(
        args,
        {
            "beta": args.beta,
            "n": args.n,
            "alpha": args.alpha,
            "numeric_theta": args.numeric_theta,
            "ratio": value,
        },
        "ratio",
        sys.stdout,
    )
    return 0


def _cmd_acc_bound(args: argparse.Namespace) -> int:
    conf = _conf(args)
    value = accuracy_drop_bound(conf, args.n)
    _emit_scalar(
        args,
        {"n": args.n, "alpha": args.alpha, "accuracy_drop_bound": value},
        "accuracy_drop_bound",
        sys.stdout,
    )
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    try:
        with open(args.grid, encoding="utf-8") as fp:
            payload = json.load(fp)
    except OSError as exc:
        raise UsageError(f"cannot read grid file {args.grid!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"grid file {args.grid!r} is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise UsageError(f"grid file {args.grid!r} must hold a JSON object")
    radius_grid = payload.pop("radius_grid", None)
    try:
        grid = grid_from_dict(payload, base_dir=os.path.dirname(os.path.abspath(args.grid)))
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"bad grid file {args.grid!r}: {exc}") from None
    if args.seed is not None:
        grid = dataclasses.replace(grid, global_seed=args.seed)
    jobs = max(1, args.jobs)
    if args.experiment == "bounds":
        report = run_bound_comparison(grid, jobs=jobs)
    elif args.experiment == "ratio":
        report = run_ratio_experiment(grid, jobs=jobs)
    else:
        if radius_grid is None:
            thresholds = default_radius_grid(max(grid.sigma_list))
        else:
            thresholds = tuple(float(r) for r in radius_grid)
        report = run_accuracy_curves(grid, thresholds, jobs=jobs)
    stamp = os.environ.get("SOURCE_DATE_EPOCH")
    if stamp is not None:
        try:
            moment = datetime.fromtimestamp(int(stamp), tz=timezone.utc)
        except (ValueError, OverflowError) as exc:
            raise UsageError(f"bad SOURCE_DATE_EPOCH {stamp!r}: {exc}") from None
        report.created_at = moment.isoformat()
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, f"{args.experiment}.csv")
    json_path = os.path.join(args.out, f"{args.experiment}.json")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fp:
        report.write_csv(fp)
    with open(json_path, "w", encoding="utf-8", newline="\n") as fp:
        report.write_json(fp)
    written = [csv_path, json_path]
    if args.gnuplot:
        written.extend(report.write_gnuplot(os.path.join(args.out, "gnuplot")))
    sys.stdout.write(f"wrote {len(report.rows)} rows: {', '.join(written)}\n")
    return 0


def _add_format(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--format", choices=("plain", "json", "csv"), default="plain", help="output format"
    )


def _add_alpha(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha", type=float, default=0.001, help="failure probability")
    parser.add_argument(
        "--z-convention",
        choices=tuple(_Z_NAMES),
        default="two-sided",
        help="how alpha maps to a z value for CLT-style formulas",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smoothcert",
        description="Certified-robustness estimation for randomized smoothing.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("bound", help="lower confidence bound from vote counts")
    p.add_argument("--successes", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    _add_alpha(p)
    p.add_argument("--method", choices=tuple(_BOUND_NAMES), default="cp")
    _add_format(p)
    p.set_defaults(handler=_cmd_bound)

    p = sub.add_parser("certify", help="certify points against an oracle")
    p.add_argument("--oracle", required=True, help="synthetic:pA=.. | recorded:PATH | external:CMD")
    p.add_argument("--n", type=int, required=True)
    _add_alpha(p)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--bound", choices=tuple(_BOUND_NAMES), default="cp")
    p.add_argument("--two-phase", action="store_true", help="separate class-selection draws")
    p.add_argument("--n0", type=int, default=100, help="selection draws for --two-phase")
    p.add_argument("--points", help="file listing one point id per line")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help="worker threads / oracle subprocesses")
    _add_format(p)
    p.set_defaults(handler=_cmd_certify)

    p = sub.add_parser("predict", help="radius now, at 100n, and in the limit")
    p.add_argument("--pa", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    _add_alpha(p)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--method", choices=tuple(_METHOD_NAMES), default="exact")
    _add_format(p)
    p.set_defaults(handler=_cmd_predict)

    p = sub.add_parser("plan", help="smallest n reaching a target radius")
    p.add_argument("--pa", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    _add_alpha(p)
    p.add_argument("--target-radius", type=float, required=True)
    p.add_argument("--current-n", type=int, default=0)
    p.add_argument("--strict", action="store_true", help="exit 4 when unachievable")
    _add_format(p)
    p.set_defaults(handler=_cmd_plan)

    p = sub.add_parser("average", help="population-average certified radius")
    p.add_argument("--dist", required=True, help="piecewise:k1=..,k2=..,beta=.. | empirical:PATH")
    p.add_argument("--n", type=int, required=True)
    _add_alpha(p)
    p.add_argument("--sigma", type=float, required=True)
    _add_format(p)
    p.set_defaults(handler=_cmd_average)

    p = sub.add_parser("ratio", help="predicted finite-n / limit average-radius ratio")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    _add_alpha(p)
    p.add_argument("--numeric-theta", action="store_true", help="integrate theta instead of the table")
    _add_format(p)
    p.set_defaults(handler=_cmd_ratio)

    p = sub.add_parser("acc-bound", help="worst-case certified-accuracy drop")
    p.add_argument("--n", type=int, required=True)
    _add_alpha(p)
    _add_format(p)
    p.set_defaults(handler=_cmd_acc_bound)

    p = sub.add_parser("simulate", help="run a Monte Carlo experiment from a grid file")
    p.add_argument("experiment", choices=("bounds", "ratio", "accuracy"))
    p.add_argument("--grid", required=True, help="JSON sweep-grid file")
    p.add_argument("--out", required=True, help="directory for report files")
    p.add_argument("--gnuplot", action="store_true", help="also emit gnuplot .dat series")
    p.add_argument("--seed", type=int, default=None, help="override the grid's global_seed")
    p.add_argument("--jobs", type=int, default=1, help="worker threads; draws are keyed, so output is identical at any count")
    p.set_defaults(handler=_cmd_simulate)

    return parser


def dispatch(argv: list[str]) -> int:
    """Parse argv, run the subcommand, and translate failures to exit codes."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code in (0, None):
            return 0
        return 2
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BatchError as exc:
        if isinstance(exc.cause, OracleError):
            print(f"error: {exc}", file=sys.stderr)
            return 3
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OracleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv: list[str] | None = None) -> int:
    return dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    raise SystemExit(main())
