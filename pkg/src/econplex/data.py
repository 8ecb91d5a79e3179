"""Trade and macro CSV ingestion, export matrices and panel alignment."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple, Sequence, TextIO

import numpy as np

from .errors import (
    EmptyInput,
    InputError,
    MalformedRow,
    MissingPeriod,
    NegativeValue,
    NoDataForYear,
)

TRADE_HEADER = ("year", "country", "product", "value")
SERIES_HEADER = ("country", "year", "value")
KIND_HEADER = ("product", "kind")
PRODUCT_KINDS = ("good", "service")

# SITC sections 0-4 plus division 68 (non-ferrous metals)
NR_SECTIONS = frozenset("01234")
NR_DIVISIONS = frozenset({"68"})

LOG_INITIAL_GDP = "log_initial_gdp"


class TradeRecord(NamedTuple):
    year: int
    country: str
    product: str
    value: float

    def validate(self) -> "TradeRecord":
        if not 1900 <= self.year <= 2100:
            raise ValueError(f"year out of range: {self.year}")
        if not self.country or not self.product:
            raise ValueError("country and product codes must be nonempty")
        if not self.value >= 0:
            raise ValueError(f"export value must be >= 0, got {self.value}")
        return self


@dataclass(frozen=True)
class TradeTable:
    """Aggregated long-format export records, one per (year, country, product)."""

    records: tuple[TradeRecord, ...]
    metadata: str = ""
    duplicates: int = 0

    def __post_init__(self):
        keys = {(r.year, r.country, r.product) for r in self.records}
        if len(keys) != len(self.records):
            raise ValueError("TradeTable records must have unique (year, country, product) keys")

    @classmethod
    def from_records(cls, records: Iterable[TradeRecord], metadata: str = "") -> "TradeTable":
        """Aggregate arbitrary records, summing duplicate keys."""
        totals: dict[tuple[int, str, str], float] = {}
        dups = 0
        for r in records:
            r = TradeRecord(*r).validate()
            key = (r.year, r.country, r.product)
            if key in totals:
                dups += 1
                totals[key] += r.value
            else:
                totals[key] = r.value
        recs = tuple(TradeRecord(y, c, p, v) for (y, c, p), v in totals.items())
        return cls(recs, metadata, dups)

    @cached_property
    def _by_year(self) -> dict[int, list[TradeRecord]]:
        out: dict[int, list[TradeRecord]] = {}
        for r in self.records:
            out.setdefault(r.year, []).append(r)
        return out

    def years(self) -> list[int]:
        return sorted(self._by_year)

    def for_year(self, year: int) -> list[TradeRecord]:
        return self._by_year.get(year, [])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRADE_HEADER)
        for r in self.records:
            w.writerow((r.year, r.country, r.product, repr(float(r.value))))
        return buf.getvalue()


@dataclass(frozen=True)
class ExportMatrix:
    year: int
    countries: tuple[str, ...]
    products: tuple[str, ...]
    values: np.ndarray
    product_kind: tuple[str, ...]
    removed_countries: tuple[str, ...] = ()
    removed_products: tuple[str, ...] = ()

    def __post_init__(self):
        v = self.values
        if v.shape != (len(self.countries), len(self.products)):
            raise ValueError(f"values shape {v.shape} does not match index sizes")
        if len(set(self.countries)) != len(self.countries) or len(set(self.products)) != len(
            self.products
        ):
            raise ValueError("country and product codes must be unique")
        if len(self.product_kind) != len(self.products):
            raise ValueError("product_kind must tag every product")
        if not np.all(np.isfinite(v)) or (v < 0).any():
            raise ValueError("export values must be finite and nonnegative")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def kind_mask(self, kind: str) -> np.ndarray:
        return np.array([k == kind for k in self.product_kind], dtype=bool)


@dataclass(frozen=True)
class PanelObservation:
    country: str
    period_start: int
    growth: float
    covariates: Mapping[str, float] = field(default_factory=dict)
    cluster_id: str = ""

    def __post_init__(self):
        if not math.isfinite(self.growth):
            raise ValueError(f"non-finite growth for {self.country} {self.period_start}")
        if not self.cluster_id:
            object.__setattr__(self, "cluster_id", self.country)

    def value(self, name: str) -> float:
        if name == "growth":
            return self.growth
        return self.covariates[name]


@dataclass(frozen=True)
class PanelAlignment:
    observations: tuple[PanelObservation, ...]
    excluded: Mapping[str, int]


def _open_rows(stream: TextIO, header: Sequence[str], source: str):
    reader = csv.reader(stream)
    try:
        first = next(reader)
    except StopIteration:
        raise EmptyInput(f"empty input{' in ' + source if source else ''}") from None
    if [h.strip().lower() for h in first] != list(header):
        raise MalformedRow(1, f"expected header {','.join(header)}", source)
    # line numbers: header is line 1
    for lineno, row in enumerate(reader, start=2):
        row = [c.strip() for c in row]
        if not any(row):
            continue
        yield lineno, row


def _parse_year(text: str, lineno: int, source: str) -> int:
    try:
        year = int(text)
    except ValueError:
        raise MalformedRow(lineno, f"non-integer year {text!r}", source) from None
    if not 1900 <= year <= 2100:
        raise MalformedRow(lineno, f"year {year} outside [1900, 2100]", source)
    return year


def _parse_value(text: str, lineno: int, source: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MalformedRow(lineno, f"non-numeric value {text!r}", source) from None
    if not math.isfinite(value):
        raise MalformedRow(lineno, f"non-finite value {text!r}", source)
    return value


def parse_trade_csv(stream: TextIO, source: str = "") -> TradeTable:
    """Parse ``year,country,product,value`` rows into an aggregated table.

    Duplicate keys are summed; ``TradeTable.duplicates`` counts the rows that
    were folded into an earlier one.
    """
    totals: dict[tuple[int, str, str], float] = {}
    dups = 0
    for lineno, row in _open_rows(stream, TRADE_HEADER, source):
        if len(row) != 4:
            raise MalformedRow(lineno, f"expected 4 fields, got {len(row)}", source)
        y, country, product, v = row
        year = _parse_year(y, lineno, source)
        if not country or not product:
            raise MalformedRow(lineno, "empty country or product code", source)
        value = _parse_value(v, lineno, source)
        if value < 0:
            raise NegativeValue(lineno, source)
        key = (year, country, product)
        if key in totals:
            dups += 1
            totals[key] += value
        else:
            totals[key] = value
    if not totals:
        raise EmptyInput(f"no data rows{' in ' + source if source else ''}")
    recs = tuple(TradeRecord(y, c, p, v) for (y, c, p), v in totals.items())
    return TradeTable(recs, source, dups)


def parse_series_csv(stream: TextIO, source: str = "") -> dict[tuple[str, int], float]:
    """Parse a ``country,year,value`` CSV (GDP or any covariate)."""
    out: dict[tuple[str, int], float] = {}
    for lineno, row in _open_rows(stream, SERIES_HEADER, source):
        if len(row) != 3:
            raise MalformedRow(lineno, f"expected 3 fields, got {len(row)}", source)
        if not row[0]:
            raise MalformedRow(lineno, "empty country code", source)
        key = (row[0], _parse_year(row[1], lineno, source))
        if key in out:
            raise MalformedRow(lineno, f"duplicate entry for {key}", source)
        out[key] = _parse_value(row[2], lineno, source)
    return out


def parse_kinds_csv(stream: TextIO, source: str = "") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, row in _open_rows(stream, KIND_HEADER, source):
        if len(row) != 2 or not row[0]:
            raise MalformedRow(lineno, "expected product,kind", source)
        kind = row[1].lower()
        if kind not in PRODUCT_KINDS:
            raise MalformedRow(lineno, f"kind must be good or service, got {row[1]!r}", source)
        out[row[0]] = kind
    return out


def read_code_list(stream: TextIO) -> set[str]:
    """One code per line; blank lines and ``#`` comments are ignored."""
    codes = set()
    for line in stream:
        line = line.split("#", 1)[0].strip()
        if line:
            codes.add(line.split(",")[0].strip())
    return codes


def read_exclusions(stream: TextIO) -> set[tuple[str, int | None]]:
    """Exclusion list lines are ``country`` (all periods) or ``country,year``."""
    out: set[tuple[str, int | None]] = set()
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) == 1:
            out.add((parts[0], None))
        elif len(parts) == 2:
            try:
                out.add((parts[0], int(parts[1])))
            except ValueError:
                raise MalformedRow(lineno, "exclusion year must be an integer") from None
        else:
            raise MalformedRow(lineno, "expected country or country,year")
    return out


def build_export_matrix(
    table: TradeTable,
    year: int,
    kinds: Mapping[str, str] | None = None,
    countries: set[str] | None = None,
) -> ExportMatrix:
    """Dense country x product export matrix for one year.

    Codes are sorted. Countries outside the optional allow-list are dropped
    before the matrix is built; all-zero rows and columns are then removed
    and reported. Products missing from ``kinds`` are tagged ``good``.
    """
    recs = table.for_year(year)
    if countries is not None:
        recs = [r for r in recs if r.country in countries]
    if not recs:
        raise NoDataForYear(year)
    cs = sorted({r.country for r in recs})
    ps = sorted({r.product for r in recs})
    ci = {c: i for i, c in enumerate(cs)}
    pi = {p: j for j, p in enumerate(ps)}
    values = np.zeros((len(cs), len(ps)))
    for r in recs:
        values[ci[r.country], pi[r.product]] += r.value

    keep_r = values.sum(axis=1) > 0
    keep_c = values.sum(axis=0) > 0
    if not keep_r.any():
        raise NoDataForYear(year)
    removed_c = tuple(c for c, k in zip(cs, keep_r) if not k)
    removed_p = tuple(p for p, k in zip(ps, keep_c) if not k)
    values = values[keep_r][:, keep_c]
    cs = [c for c, k in zip(cs, keep_r) if k]
    ps = [p for p, k in zip(ps, keep_c) if k]
    kinds = kinds or {}
    return ExportMatrix(
        year=year,
        countries=tuple(cs),
        products=tuple(ps),
        values=values,
        product_kind=tuple(kinds.get(p, "good") for p in ps),
        removed_countries=removed_c,
        removed_products=removed_p,
    )


def is_natural_resource(product: str) -> bool:
    return product[:1] in NR_SECTIONS or product[:2] in NR_DIVISIONS


def nr_exports(table: TradeTable, country: str, year: int, kinds: Mapping[str, str] | None = None) -> float:
    recs = [r for r in table.for_year(year) if r.country == country]
    if not recs:
        raise MissingPeriod(year, country)
    kinds = kinds or {}
    return math.fsum(
        r.value
        for r in recs
        if is_natural_resource(r.product) and kinds.get(r.product, "good") == "good"
    )


def nr_export_increase(
    table: TradeTable,
    gdp_initial: float,
    country: str,
    t: int,
    horizon: int = 10,
    kinds: Mapping[str, str] | None = None,
) -> float:
    """Change in natural-resource exports over ``horizon`` years as a share of initial GDP.

    Natural resources are goods whose code starts with SITC section 0-4 or
    division 68. Products tagged ``service`` in ``kinds`` never count, since
    service classifications reuse the same leading digits.
    """
    if not gdp_initial > 0:
        raise ValueError(f"gdp_initial must be positive, got {gdp_initial}")
    start = nr_exports(table, country, t, kinds)
    end = nr_exports(table, country, t + horizon, kinds)
    return (end - start) / gdp_initial


def align_panel(
    gdp_series: Mapping[tuple[str, int], float],
    covariate_tables: Mapping[str, Mapping[tuple[str, int], float]],
    periods: Sequence[tuple[int, int]],
    exclusions: set[tuple[str, int | None]] | None = None,
) -> PanelAlignment:
    """Build growth observations for every (country, period) with complete data.

    Growth is ``log(GDP[t1] / GDP[t0])``; the log of initial GDP is added as
    the ``log_initial_gdp`` covariate. Covariates are read at ``t0``.
    Excluded observations are counted by reason instead of raising.
    """
    if not periods:
        raise InputError("at least one period is required")
    exclusions = exclusions or set()
    countries = sorted({c for c, _ in gdp_series})
    excluded: Counter[str] = Counter()
    obs = []
    for t0, t1 in periods:
        for country in countries:
            if (country, None) in exclusions or (country, t0) in exclusions:
                excluded["excluded by list"] += 1
                continue
            g0 = gdp_series.get((country, t0))
            g1 = gdp_series.get((country, t1))
            if g0 is None or g1 is None:
                excluded["missing endpoint"] += 1
                continue
            if not (g0 > 0 and g1 > 0):
                excluded["nonpositive gdp"] += 1
                continue
            covs = {LOG_INITIAL_GDP: math.log(g0)}
            missing = None
            for name in sorted(covariate_tables):
                v = covariate_tables[name].get((country, t0))
                if v is None or not math.isfinite(v):
                    missing = name
                    break
                covs[name] = v
            if missing is not None:
                excluded[f"missing covariate {missing}"] += 1
                continue
            obs.append(
                PanelObservation(
                    country=country,
                    period_start=t0,
                    growth=math.log(g1 / g0),
                    covariates=covs,
                    cluster_id=country,
                )
            )
    return PanelAlignment(tuple(obs), dict(sorted(excluded.items())))
