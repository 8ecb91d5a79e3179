"""Command-line entry point: ``econplex <subcommand>``.

Every subcommand also accepts ``--config FILE`` with ``key = value`` lines
(keys are flag names without the leading dashes); flags given on the
command line win over the file.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import econ, fitness, reflections, stats
from .data import PanelObservation, build_export_matrix, parse_kinds_csv, parse_trade_csv
from .errors import ComplexityError, InputError, NumericalError
from .fixtures import FIXTURES, fixture_incidence
from .pipeline import EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, METRIC_CHOICES, PipelineConfig, run_pipeline
from .rca import binarize, concatenated_rca, incidence_from_table, rca
from .scores import ScoreVector, fmt
from .selftest import FAULTS, selftest

BOOL_FLAGS = {"strict_threshold", "no_fe", "no_cluster"}


def read_config_file(path: str) -> dict[str, object]:
    out: dict[str, object] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            if key in BOOL_FLAGS:
                out[key] = value.lower() in ("1", "true", "yes", "on")
            elif key == "covariate":
                out.setdefault(key, []).append(value)
            else:
                out[key] = value
    return out


def parse_years(text: str) -> tuple[int, ...]:
    years: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-", 1)
            years.extend(range(int(a), int(b) + 1))
        elif part:
            years.append(int(part))
    return tuple(years)


def parse_periods(text: str) -> tuple[tuple[int, int], ...]:
    out = []
    for part in text.split(","):
        if part.strip():
            a, b = part.split(":")
            out.append((int(a), int(b)))
    return tuple(out)


def _add_matrix_inputs(p: argparse.ArgumentParser):
    p.add_argument("--trade", help="trade CSV (year,country,product,value)")
    p.add_argument("--kinds", help="product kind CSV (product,kind)")
    p.add_argument("--fixture", choices=sorted(FIXTURES), help="use a bundled incidence matrix")
    p.add_argument("--input-kind", choices=("trade", "incidence"), default="trade",
                   help="'incidence' reads 0/1 links from the trade CSV value column")
    p.add_argument("--rca-variant", choices=("joint", "concatenated"), default="joint")
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--strict-threshold", action="store_true", help="link when RCA > threshold")


KNOB_DEFAULTS = {
    "eig_tol": reflections.DEFAULT_TOL,
    "tol": fitness.DEFAULT_TOL,
    "max_iter": fitness.DEFAULT_MAX_ITER,
    "zero_floor": fitness.DEFAULT_ZERO_FLOOR,
    "boundary_margin": fitness.DEFAULT_BOUNDARY_MARGIN,
}


def _add_knobs(p: argparse.ArgumentParser):
    # None means: fixture knob if any, else the library default
    p.add_argument("--eig-tol", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--zero-floor", type=float)
    p.add_argument("--boundary-margin", type=float)


def _knob(args, name: str):
    value = getattr(args, name, None)
    if value is not None:
        return value
    if getattr(args, "fixture", None):
        fixture_knobs = FIXTURES[args.fixture][1]
        if name in fixture_knobs:
            return fixture_knobs[name]
    return KNOB_DEFAULTS[name]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="econplex", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pipeline", help="run the full per-year pipeline")
    _add_matrix_inputs(p)
    _add_knobs(p)
    p.add_argument("--gdp", help="GDP per capita CSV (country,year,value)")
    p.add_argument("--covariate", action="append", default=[], metavar="NAME=PATH",
                   help="extra covariate CSV, e.g. coi=coi.csv (repeatable)")
    p.add_argument("--allow-list", help="file with one country code per line")
    p.add_argument("--exclusions", help="regression exclusions: country or country,year per line")
    p.add_argument("--years", type=parse_years, help="e.g. 1995-2010 or 2000,2005")
    p.add_argument("--periods", type=parse_periods, default=(), help="e.g. 1988:1998,1998:2008")
    p.add_argument("--metric", choices=METRIC_CHOICES, default="all")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--out", required=True)

    for name, helptext in (("rca", "RCA and incidence matrix for one year"),
                           ("eci", "ECI and PCI for one year"),
                           ("fitness", "FCM or M-FCM fitness for one year")):
        q = sub.add_parser(name, help=helptext)
        _add_matrix_inputs(q)
        q.add_argument("--year", type=int)
        if name == "eci":
            q.add_argument("--eig-tol", type=float)
        if name == "fitness":
            _add_knobs(q)
            q.add_argument("--method", choices=("fcm", "mfcm"), default="mfcm")
        q.add_argument("--out", help="output directory (stdout when omitted)")

    q = sub.add_parser("compare", help="yearly Spearman correlation of two long score files")
    q.add_argument("a", help="CSV with year,label,value")
    q.add_argument("b", help="CSV with year,label,value")
    q.add_argument("--direction", choices=("descending", "ascending"), default="descending")

    q = sub.add_parser("regress", help="panel OLS or the service-dummy regression")
    q.add_argument("--panel", help="CSV with country,period,<dependent>,<regressors...>")
    q.add_argument("--y", default="growth")
    q.add_argument("--x", help="comma-separated regressors")
    q.add_argument("--no-fe", action="store_true")
    q.add_argument("--no-cluster", action="store_true")
    q.add_argument("--service-dummy", help="CSV with year,product,pci,is_service")

    q = sub.add_parser("selftest", help="run the built-in invariant suite")
    q.add_argument("--inject-fault", choices=FAULTS, help=argparse.SUPPRESS)

    for sp in sub.choices.values():
        sp.add_argument("--config", help="key = value defaults file")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        defaults = read_config_file(args.config)
        sp = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sp._actions}
        unknown = set(defaults) - known
        if unknown:
            raise InputError(f"{args.config}: unknown keys {sorted(unknown)}")
        sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _matrix(args):
    kinds = {}
    if args.kinds:
        with open(args.kinds, encoding="utf-8", newline="") as fh:
            kinds = parse_kinds_csv(fh, args.kinds)
    if args.fixture:
        return fixture_incidence(args.fixture), None
    if not args.trade:
        raise InputError("--trade or --fixture is required")
    if not Path(args.trade).is_file():
        raise InputError(f"input file not found: {args.trade}")
    with open(args.trade, encoding="utf-8", newline="") as fh:
        table = parse_trade_csv(fh, args.trade)
    year = args.year if args.year is not None else table.years()[-1]
    if args.input_kind == "incidence":
        return incidence_from_table(table, year, kinds), None
    ex = build_export_matrix(table, year, kinds)
    r = concatenated_rca(ex) if args.rca_variant == "concatenated" else rca(ex)
    return binarize(r, args.threshold, strict=args.strict_threshold), r


def _emit(files: dict[str, str], out: str | None):
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (Path(out) / name).write_text(text, encoding="utf-8")
    else:
        for name, text in files.items():
            sys.stdout.write(f"# {name}\n{text}")


def _cmd_pipeline(args) -> int:
    covs = {}
    for item in args.covariate:
        if "=" not in item:
            raise InputError(f"--covariate expects NAME=PATH, got {item!r}")
        name, path = item.split("=", 1)
        covs[name.strip()] = Path(path.strip())
    cfg = PipelineConfig(
        out=Path(args.out),
        trade=Path(args.trade) if args.trade else None,
        kinds=Path(args.kinds) if args.kinds else None,
        gdp=Path(args.gdp) if args.gdp else None,
        covariates=covs,
        allow_list=Path(args.allow_list) if args.allow_list else None,
        exclusions=Path(args.exclusions) if args.exclusions else None,
        fixture=args.fixture,
        input_kind=args.input_kind,
        years=args.years,
        metric=args.metric,
        rca_variant=args.rca_variant,
        strict_threshold=args.strict_threshold,
        threshold=args.threshold,
        eig_tol=_knob(args, "eig_tol"),
        tol=_knob(args, "tol"),
        max_iter=_knob(args, "max_iter"),
        zero_floor=_knob(args, "zero_floor"),
        boundary_margin=_knob(args, "boundary_margin"),
        periods=args.periods,
        workers=args.workers,
    )
    return run_pipeline(cfg, log=lambda msg: print(msg, file=sys.stderr))


def _cmd_rca(args) -> int:
    M, r = _matrix(args)
    files = {}
    if r is not None:
        files[f"rca_{M.year}.csv"] = r.to_csv()
    files[f"incidence_{M.year}.csv"] = M.to_csv()
    _emit(files, args.out)
    return EXIT_OK


def _cmd_eci(args) -> int:
    M, _ = _matrix(args)
    e, es = reflections.eci(M, _knob(args, "eig_tol"))
    p, ps = reflections.pci(M, _knob(args, "eig_tol"))
    _emit({f"eci_{M.year}.csv": e.to_csv(), f"pci_{M.year}.csv": p.to_csv()}, args.out)
    print(f"lambda2 country={fmt(es.eigenvalue)} product={fmt(ps.eigenvalue)}", file=sys.stderr)
    return EXIT_OK


def _cmd_fitness(args) -> int:
    M, _ = _matrix(args)
    if args.method == "fcm":
        res = fitness.fcm(M, _knob(args, "tol"), _knob(args, "max_iter"), _knob(args, "zero_floor"))
    else:
        res = fitness.mfcm(M, _knob(args, "tol"), _knob(args, "max_iter"), _knob(args, "boundary_margin"))
    _emit(
        {
            f"fitness_{args.method}_{M.year}.csv": res.country_scores.to_csv(),
            f"complexity_{args.method}_{M.year}.csv": res.product_scores.to_csv(),
        },
        args.out,
    )
    print(f"verdict={res.verdict} iterations={res.iterations} residual={fmt(res.residual)}", file=sys.stderr)
    return EXIT_OK


def _read_long(path: str) -> dict[int, ScoreVector]:
    if not Path(path).is_file():
        raise InputError(f"input file not found: {path}")
    by_year: dict[int, dict[str, float]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            try:
                by_year.setdefault(int(row["year"]), {})[row["label"]] = float(row["value"])
            except (KeyError, TypeError, ValueError):
                raise InputError(f"{path}:{lineno}: expected year,label,value") from None
    return {y: ScoreVector.from_mapping("country", "score", v) for y, v in by_year.items()}


def _cmd_compare(args) -> int:
    rows = stats.yearly_rank_correlation(_read_long(args.a), _read_long(args.b), args.direction)
    sys.stdout.write("year,rho,n\n")
    for y, rho, n in rows:
        sys.stdout.write(f"{y},{fmt(rho)},{n}\n")
    return EXIT_OK


def _cmd_regress(args) -> int:
    if args.service_dummy:
        rows = []
        if not Path(args.service_dummy).is_file():
            raise InputError(f"input file not found: {args.service_dummy}")
        with open(args.service_dummy, encoding="utf-8", newline="") as fh:
            for lineno, r in enumerate(csv.DictReader(fh), start=2):
                try:
                    rows.append((int(r["year"]), r["product"], float(r["pci"]),
                                 r["is_service"].strip().lower() in ("1", "true", "service")))
                except (KeyError, TypeError, ValueError, AttributeError):
                    raise InputError(f"{args.service_dummy}:{lineno}: expected year,product,pci,is_service") from None
        res = econ.pci_service_regression(rows)
        sys.stdout.write(econ.format_table({"(I)": res}))
        return EXIT_OK
    if not args.panel or not args.x:
        raise InputError("--panel and --x are required (or --service-dummy)")
    if not Path(args.panel).is_file():
        raise InputError(f"input file not found: {args.panel}")
    regs = [x.strip() for x in args.x.split(",") if x.strip()]
    obs = []
    with open(args.panel, encoding="utf-8", newline="") as fh:
        for lineno, r in enumerate(csv.DictReader(fh), start=2):
            try:
                covs = {k: float(v) for k, v in r.items() if k not in ("country", "period") and v not in ("", None)}
                period = int(r["period"])
                country = r["country"]
            except (KeyError, TypeError, ValueError):
                raise InputError(f"{args.panel}:{lineno}: expected country,period and numeric columns") from None
            if args.y not in covs:
                continue
            y = covs.pop(args.y) if args.y == "growth" else covs[args.y]
            obs.append(PanelObservation(country, period, y, covs))
    spec = econ.RegressionSpec(args.y, tuple(regs), include_period_fe=not args.no_fe,
                               cluster_by=None if args.no_cluster else "country")
    res = econ.ols_fe(obs, spec)
    sys.stdout.write(econ.format_table({"(I)": res}))
    return EXIT_OK


def _cmd_selftest(args) -> int:
    outcome = selftest(args.inject_fault)
    failed = [k for k, v in outcome.items() if v]
    print(f"{len(outcome) - len(failed)}/{len(outcome)} properties passed")
    return 1 if failed else 0


COMMANDS = {
    "pipeline": _cmd_pipeline,
    "rca": _cmd_rca,
    "eci": _cmd_eci,
    "fitness": _cmd_fitness,
    "compare": _cmd_compare,
    "regress": _cmd_regress,
    "selftest": _cmd_selftest,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except (InputError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as e:
        print(f"numerical failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ComplexityError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
