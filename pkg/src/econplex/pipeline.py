"""Per-year pipeline: exports -> RCA -> incidence -> complexity metrics -> cross-year tables."""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import econ, fitness, reflections, stats
from .data import (
    TradeTable,
    align_panel,
    build_export_matrix,
    nr_export_increase,
    parse_kinds_csv,
    parse_series_csv,
    parse_trade_csv,
    read_code_list,
    read_exclusions,
)
from .errors import ComplexityError, InputError, MissingPeriod, NumericalError
from .fixtures import FIXTURE_YEAR, fixture_incidence
from .rca import CONCATENATED, JOINT, binarize, concatenated_rca, incidence_from_table, rca
from .scores import ScoreVector, fmt

METRIC_CHOICES = ("eci", "fcm", "mfcm", "all")
EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


@dataclass
class PipelineConfig:
    out: Path
    trade: Path | None = None
    kinds: Path | None = None
    gdp: Path | None = None
    covariates: dict[str, Path] = field(default_factory=dict)
    allow_list: Path | None = None
    exclusions: Path | None = None
    fixture: str | None = None
    input_kind: str = "trade"
    years: tuple[int, ...] | None = None
    metric: str = "all"
    rca_variant: str = JOINT
    strict_threshold: bool = False
    threshold: float = 1.0
    eig_tol: float = reflections.DEFAULT_TOL
    tol: float = fitness.DEFAULT_TOL
    max_iter: int = fitness.DEFAULT_MAX_ITER
    zero_floor: float = fitness.DEFAULT_ZERO_FLOOR
    boundary_margin: float = fitness.DEFAULT_BOUNDARY_MARGIN
    periods: tuple[tuple[int, int], ...] = ()
    workers: int = 4

    def validate(self):
        if self.trade is None and self.fixture is None:
            raise InputError("either a trade CSV or a fixture is required")
        for p in [self.trade, self.kinds, self.gdp, self.allow_list, self.exclusions, *self.covariates.values()]:
            if p is not None and not Path(p).is_file():
                raise InputError(f"input file not found: {p}")
        if self.metric not in METRIC_CHOICES:
            raise InputError(f"metric must be one of {METRIC_CHOICES}")
        if self.rca_variant not in (JOINT, CONCATENATED):
            raise InputError("rca_variant must be joint or concatenated")
        if self.input_kind not in ("trade", "incidence"):
            raise InputError("input_kind must be trade or incidence")
        if self.years is not None and not self.years:
            raise InputError("year list is empty")
        if not (self.threshold > 0 and self.eig_tol > 0 and self.tol > 0 and self.zero_floor > 0):
            raise InputError("threshold and tolerances must be positive")
        if self.max_iter < 1 or self.workers < 1:
            raise InputError("max_iter and workers must be >= 1")
        if not 0 < self.boundary_margin < 1:
            raise InputError("boundary_margin must lie in (0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d = {k: (str(v) if isinstance(v, Path) else v) for k, v in d.items()}
        d["covariates"] = {k: str(v) for k, v in sorted(self.covariates.items())}
        d["periods"] = [list(p) for p in self.periods]
        d["years"] = list(self.years) if self.years is not None else None
        d.pop("out")
        d.pop("workers")
        return d

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


@dataclass
class YearResult:
    year: int
    files: dict[str, str] = field(default_factory=dict)
    scores: dict[str, ScoreVector] = field(default_factory=dict)
    verdicts: dict[str, str] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    removed: dict[str, list[str]] = field(default_factory=dict)


def _read(path, parser):
    with open(path, encoding="utf-8", newline="") as fh:
        return parser(fh, str(path))


def _fitness_methods(metric: str) -> list[str]:
    return {"eci": [], "fcm": ["fcm"], "mfcm": ["mfcm"], "all": ["fcm", "mfcm"]}[metric]


def _process_year(cfg: PipelineConfig, year: int, table: TradeTable | None, kinds, allow) -> YearResult:
    out = YearResult(year)
    try:
        if cfg.fixture:
            M = fixture_incidence(cfg.fixture, year)
        elif cfg.input_kind == "incidence":
            M = incidence_from_table(table, year, kinds)
        else:
            ex = build_export_matrix(table, year, kinds, allow)
            out.removed["zero_export_countries"] = list(ex.removed_countries)
            out.removed["zero_export_products"] = list(ex.removed_products)
            r = concatenated_rca(ex) if cfg.rca_variant == CONCATENATED else rca(ex)
            out.files[f"rca_{year}.csv"] = r.to_csv()
            M = binarize(r, cfg.threshold, strict=cfg.strict_threshold)
    except NumericalError as e:
        out.errors["incidence"] = f"{type(e).__name__}: {e}"
        return out
    out.removed["pruned_countries"] = list(M.removed_countries)
    out.removed["pruned_products"] = list(M.removed_products)
    out.files[f"incidence_{year}.csv"] = M.to_csv()

    div, ubi = reflections.diversity(M), reflections.ubiquity(M)
    out.scores["diversity"], out.scores["ubiquity"] = div, ubi
    out.files[f"diversity_{year}.csv"] = div.to_csv()
    out.files[f"ubiquity_{year}.csv"] = ubi.to_csv()
    diagnostics: dict = {"year": year, "shape": list(M.shape)}

    if cfg.metric in ("eci", "all"):
        for name, fn in (("eci", reflections.eci), ("pci", reflections.pci)):
            try:
                sv, spec = fn(M, cfg.eig_tol)
            except NumericalError as e:
                out.errors[name] = f"{type(e).__name__}: {e}"
                continue
            out.scores[name] = sv
            out.files[f"{name}_{year}.csv"] = sv.to_csv()
            diagnostics[name] = spec.to_dict()

    for method in _fitness_methods(cfg.metric):
        try:
            if method == "fcm":
                res = fitness.fcm(M, cfg.tol, cfg.max_iter, cfg.zero_floor)
            else:
                res = fitness.mfcm(M, cfg.tol, cfg.max_iter, cfg.boundary_margin)
        except NumericalError as e:
            out.errors[method] = f"{type(e).__name__}: {e}"
            continue
        out.verdicts[method] = res.verdict
        out.scores[f"{method}_fitness"] = res.country_scores
        out.scores[f"{method}_complexity"] = res.product_scores
        out.files[f"fitness_{method}_{year}.csv"] = res.country_scores.to_csv()
        out.files[f"complexity_{method}_{year}.csv"] = res.product_scores.to_csv()
        out.files[f"fixedpoint_{method}_{year}.json"] = _json(res.to_dict())

    out.files[f"diagnostics_{year}.json"] = _json(diagnostics)
    return out


def _json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _clean(obj):
    if isinstance(obj, float):
        return float(fmt(obj)) if math.isfinite(obj) else str(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def _long_csv(series: dict[int, ScoreVector]) -> str:
    lines = ["year,label,value"]
    for y in sorted(series):
        sv = series[y]
        for lab in sorted(sv.labels):
            lines.append(f"{y},{lab},{fmt(sv.get(lab))}")
    return "\n".join(lines) + "\n"


def _rank_csv(series) -> str:
    rows = stats.rank_trajectories(series)
    return "year,label,rank\n" + "".join(f"{y},{lab},{fmt(r)}\n" for y, lab, r in rows)


def _box_csv(series) -> str:
    lines = ["year,median,q1,q3,iqr,lower_fence,upper_fence,outliers"]
    for y in sorted(series):
        try:
            b = stats.box_stats(series[y])
        except NumericalError:
            continue
        vals = [b.median, b.q1, b.q3, b.iqr, b.lower_fence, b.upper_fence]
        lines.append(f"{y}," + ",".join(fmt(v) for v in vals) + "," + ";".join(sorted(b.outliers)))
    return "\n".join(lines) + "\n"


def _corr_csv(rows) -> str:
    return "year,rho,n\n" + "".join(f"{y},{fmt(r)},{n}\n" for y, r, n in rows)


def _cross_year(results: list[YearResult]) -> dict[str, str]:
    files: dict[str, str] = {}
    metrics = sorted({m for r in results for m in r.scores})
    series = {m: {r.year: r.scores[m] for r in results if m in r.scores} for m in metrics}
    for m, s in series.items():
        files[f"scores_{m}.csv"] = _long_csv(s)
        files[f"rankings_{m}.csv"] = _rank_csv(s)
        if m not in ("diversity", "ubiquity"):
            files[f"boxstats_{m}.csv"] = _box_csv(s)
    pairs = [("eci", "diversity")] + [("eci", f"{m}_fitness") for m in ("fcm", "mfcm")]
    for a, b in pairs:
        if a in series and b in series:
            try:
                rows = stats.yearly_rank_correlation(series[a], series[b])
            except NumericalError:
                continue
            files[f"spearman_{a}_vs_{b}.csv"] = _corr_csv(rows)
    return files


def _regressions(cfg, results, table, kinds, gdp, covs, exclusions) -> dict[str, str]:
    files: dict[str, str] = {}
    by_year = {r.year: r for r in results}
    covariates = {k: dict(v) for k, v in covs.items()}
    complexity = {"eci": "eci", "log_fitness": "mfcm_fitness", "diversity": "diversity"}
    for name, key in complexity.items():
        tab = {}
        for y, r in by_year.items():
            if key in r.scores:
                for lab, v in r.scores[key].as_dict().items():
                    tab[(lab, y)] = math.log(v) if name == "log_fitness" else v
        if tab:
            covariates[name] = tab
    if table is not None and cfg.input_kind == "trade":
        nr = {}
        for t0, t1 in cfg.periods:
            for c in sorted({c for c, y in gdp if y == t0}):
                try:
                    nr[(c, t0)] = nr_export_increase(table, gdp[(c, t0)], c, t0, t1 - t0, kinds)
                except (MissingPeriod, ValueError):
                    continue
        covariates["nr_increase"] = nr

    columns = {}
    for name in ("eci", "log_fitness", "diversity"):
        if name not in covariates:
            continue
        needed = {name} | {c for c in econ.GROWTH_CONTROLS if c in covariates or c == "log_initial_gdp"}
        use = {k: v for k, v in covariates.items() if k in needed}
        panel = align_panel(gdp, use, list(cfg.periods), exclusions)
        controls = [c for c in econ.GROWTH_CONTROLS if c in needed]
        try:
            columns[name] = econ.growth_regression(list(panel.observations), name, controls)
        except ComplexityError as e:
            files[f"regression_growth_{name}.error.txt"] = f"{type(e).__name__}: {e}\n"
    if columns:
        files["regression_growth.csv"] = econ.table_csv(columns)
        files["regression_growth.txt"] = econ.format_table(columns)
        files["regression_growth.json"] = _json({k: v.to_dict() for k, v in columns.items()})
    return files


def _service_regression(results, kinds) -> dict[str, str]:
    files: dict[str, str] = {}
    if not kinds:
        return files
    columns = {}
    for label, key in (("pci", "pci"), ("mfcm", "mfcm_complexity")):
        rows = [
            (r.year, p, v, kinds.get(p) == "service")
            for r in results
            if key in r.scores
            for p, v in r.scores[key].as_dict().items()
        ]
        if not rows:
            continue
        try:
            columns[label] = econ.pci_service_regression(rows)
        except ComplexityError:
            continue
    if columns:
        files["regression_pci_service.csv"] = econ.table_csv(columns)
        files["regression_pci_service.txt"] = econ.format_table(columns)
        files["regression_pci_service.json"] = _json({k: v.to_dict() for k, v in columns.items()})
    return files


def _load(cfg: PipelineConfig):
    table = _read(cfg.trade, parse_trade_csv) if cfg.trade else None
    kinds = _read(cfg.kinds, parse_kinds_csv) if cfg.kinds else {}
    allow = None
    if cfg.allow_list:
        with open(cfg.allow_list, encoding="utf-8") as fh:
            allow = read_code_list(fh)
    exclusions = set()
    if cfg.exclusions:
        with open(cfg.exclusions, encoding="utf-8") as fh:
            exclusions = read_exclusions(fh)
    gdp = _read(cfg.gdp, parse_series_csv) if cfg.gdp else None
    covs = {k: _read(p, parse_series_csv) for k, p in sorted(cfg.covariates.items())}
    return table, kinds, allow, exclusions, gdp, covs


def run_pipeline(cfg: PipelineConfig, log=print) -> int:
    """Run every stage and write outputs plus ``manifest.json``; returns the exit code."""
    try:
        cfg.validate()
        table, kinds, allow, exclusions, gdp, covs = _load(cfg)
    except (InputError, OSError) as e:
        log(f"error: {e}")
        return EXIT_INPUT

    if cfg.fixture:
        years = list(cfg.years or (FIXTURE_YEAR,))
    else:
        years = sorted(cfg.years) if cfg.years else table.years()
    try:
        with ThreadPoolExecutor(max_workers=min(cfg.workers, len(years))) as pool:
            results = list(pool.map(lambda y: _process_year(cfg, y, table, kinds, allow), years))
    except InputError as e:
        log(f"error: {e}")
        return EXIT_INPUT

    files: dict[str, str] = {}
    for r in results:
        files.update(r.files)
    files.update(_cross_year(results))
    if gdp is not None and cfg.periods:
        files.update(_regressions(cfg, results, table, kinds, gdp, covs, exclusions))
    files.update(_service_regression(results, kinds))

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for name in sorted(files):
        data = files[name].encode("utf-8")
        (out / name).write_bytes(data)
        entries.append({"path": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})

    failed = any(r.errors for r in results)
    manifest = {
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "files": entries,
        "years": {
            str(r.year): {"verdicts": r.verdicts, "errors": r.errors, "removed": r.removed}
            for r in results
        },
        "correlation_method": stats.CORRELATION_METHOD,
        "exit_code": EXIT_NUMERIC if failed else EXIT_OK,
    }
    (out / "manifest.json").write_text(_json(manifest), encoding="utf-8")
    for r in results:
        for stage, msg in r.errors.items():
            log(f"{r.year} {stage}: {msg}")
    return manifest["exit_code"]
