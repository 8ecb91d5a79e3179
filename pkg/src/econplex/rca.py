"""Balassa revealed comparative advantage and the binary incidence matrix."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import ExportMatrix, TradeTable
from .errors import EmptyAfterPrune, InputError, MissingKind, NoDataForYear, ZeroMarginal

JOINT = "joint"
CONCATENATED = "concatenated"


@dataclass(frozen=True)
class RcaMatrix:
    countries: tuple[str, ...]
    products: tuple[str, ...]
    values: np.ndarray
    variant: str = JOINT
    product_kind: tuple[str, ...] = ()
    year: int | None = None

    def __post_init__(self):
        if self.values.shape != (len(self.countries), len(self.products)):
            raise ValueError("RCA values do not match index sizes")
        if not np.all(np.isfinite(self.values)) or (self.values < 0).any():
            raise ValueError("RCA entries must be finite and nonnegative")
        if self.variant not in (JOINT, CONCATENATED):
            raise ValueError(f"unknown RCA variant {self.variant!r}")

    def to_csv(self) -> str:
        return _matrix_csv(self.countries, self.products, self.values, lambda x: format(x, ".12g"))


@dataclass(frozen=True)
class IncidenceMatrix:
    """Binary country x product matrix with every row and column nonempty."""

    countries: tuple[str, ...]
    products: tuple[str, ...]
    bits: np.ndarray
    threshold: float = 1.0
    product_kind: tuple[str, ...] = ()
    removed_countries: tuple[str, ...] = ()
    removed_products: tuple[str, ...] = ()
    year: int | None = None

    def __post_init__(self):
        b = self.bits
        if b.ndim != 2 or b.shape != (len(self.countries), len(self.products)):
            raise ValueError("incidence bits do not match index sizes")
        if not np.isin(b, (0, 1)).all():
            raise ValueError("incidence entries must be 0 or 1")
        if b.size == 0 or (b.sum(axis=1) < 1).any() or (b.sum(axis=0) < 1).any():
            raise ValueError("every country and product needs at least one link")
        if len(set(self.countries)) != len(self.countries) or len(set(self.products)) != len(
            self.products
        ):
            raise ValueError("labels must be unique")
        if not self.product_kind:
            object.__setattr__(self, "product_kind", ("good",) * len(self.products))
        object.__setattr__(self, "bits", b.astype(np.int8))

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    @property
    def m(self) -> np.ndarray:
        """Bits as float64, ready for arithmetic."""
        return self.bits.astype(float)

    def permuted(self, row_order: Sequence[int], col_order: Sequence[int]) -> "IncidenceMatrix":
        ro, co = list(row_order), list(col_order)
        return IncidenceMatrix(
            countries=tuple(self.countries[i] for i in ro),
            products=tuple(self.products[j] for j in co),
            bits=self.bits[np.ix_(ro, co)],
            threshold=self.threshold,
            product_kind=tuple(self.product_kind[j] for j in co),
            year=self.year,
        )

    def to_csv(self) -> str:
        return _matrix_csv(self.countries, self.products, self.bits, lambda x: str(int(x)))


def _matrix_csv(rows, cols, values, fmt) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["country", *cols])
    for label, row in zip(rows, values):
        w.writerow([label, *(fmt(x) for x in row)])
    return buf.getvalue()


def _balassa(values: np.ndarray, countries, products) -> np.ndarray:
    row = values.sum(axis=1)
    col = values.sum(axis=0)
    for i in np.flatnonzero(row <= 0):
        raise ZeroMarginal("country", int(i), countries[i])
    for j in np.flatnonzero(col <= 0):
        raise ZeroMarginal("product", int(j), products[j])
    total = values.sum()
    return (values / row[:, None]) / (col / total)[None, :]


def rca(ex: ExportMatrix) -> RcaMatrix:
    """Joint RCA over all products: country share of a product over its world share."""
    return RcaMatrix(
        countries=ex.countries,
        products=ex.products,
        values=_balassa(ex.values, ex.countries, ex.products),
        variant=JOINT,
        product_kind=ex.product_kind,
        year=ex.year,
    )


def concatenated_rca(ex: ExportMatrix) -> RcaMatrix:
    """RCA computed separately inside the goods and the services blocks.

    Each block is normalised by its own country and product totals; the two
    blocks are put back side by side in the original column order.
    """
    out = np.empty_like(ex.values, dtype=float)
    for kind in ("good", "service"):
        mask = ex.kind_mask(kind)
        if not mask.any():
            raise MissingKind(f"no {kind} columns in {ex.year} export matrix")
        cols = np.flatnonzero(mask)
        out[:, cols] = _balassa(
            ex.values[:, cols], ex.countries, [ex.products[j] for j in cols]
        )
    return RcaMatrix(
        countries=ex.countries,
        products=ex.products,
        values=out,
        variant=CONCATENATED,
        product_kind=ex.product_kind,
        year=ex.year,
    )


def prune(bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row and column keep-masks after iteratively dropping empty rows/columns."""
    keep_r = np.ones(bits.shape[0], dtype=bool)
    keep_c = np.ones(bits.shape[1], dtype=bool)
    while True:
        sub = bits[np.ix_(keep_r, keep_c)]
        zr = sub.sum(axis=1) == 0
        zc = sub.sum(axis=0) == 0
        if not zr.any() and not zc.any():
            return keep_r, keep_c
        keep_r[np.flatnonzero(keep_r)[zr]] = False
        keep_c[np.flatnonzero(keep_c)[zc]] = False


def _incidence(bits, countries, products, kinds, threshold, year) -> IncidenceMatrix:
    keep_r, keep_c = prune(bits)
    if not keep_r.any() or not keep_c.any():
        raise EmptyAfterPrune(f"no links survive binarization (year {year})")
    return IncidenceMatrix(
        countries=tuple(c for c, k in zip(countries, keep_r) if k),
        products=tuple(p for p, k in zip(products, keep_c) if k),
        bits=bits[np.ix_(keep_r, keep_c)],
        threshold=threshold,
        product_kind=tuple(t for t, k in zip(kinds, keep_c) if k),
        removed_countries=tuple(c for c, k in zip(countries, keep_r) if not k),
        removed_products=tuple(p for p, k in zip(products, keep_c) if not k),
        year=year,
    )


def binarize(r: RcaMatrix, threshold: float = 1.0, strict: bool = False) -> IncidenceMatrix:
    """Link country and product when RCA >= threshold (> with ``strict``), then prune."""
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    bits = (r.values > threshold) if strict else (r.values >= threshold)
    kinds = r.product_kind or ("good",) * len(r.products)
    return _incidence(bits.astype(np.int8), r.countries, r.products, kinds, threshold, r.year)


def incidence_from_bits(
    bits,
    countries: Sequence[str] | None = None,
    products: Sequence[str] | None = None,
    product_kind: Sequence[str] | None = None,
    year: int | None = None,
) -> IncidenceMatrix:
    """Wrap a ready-made 0/1 matrix, pruning empty rows and columns."""
    b = np.asarray(bits)
    if b.ndim != 2:
        raise ValueError("incidence matrix must be 2-D")
    if not np.isin(b, (0, 1)).all():
        raise InputError("incidence entries must be 0 or 1")
    countries = tuple(countries) if countries is not None else tuple(f"c{i}" for i in range(b.shape[0]))
    products = tuple(products) if products is not None else tuple(f"p{j}" for j in range(b.shape[1]))
    kinds = tuple(product_kind) if product_kind is not None else ("good",) * b.shape[1]
    return _incidence(b.astype(np.int8), countries, products, kinds, 1.0, year)


def incidence_from_table(table: TradeTable, year: int, kinds=None) -> IncidenceMatrix:
    """Read a long-format table whose values are already 0/1 links."""
    recs = table.for_year(year)
    if not recs:
        raise NoDataForYear(year)
    cs = sorted({r.country for r in recs})
    ps = sorted({r.product for r in recs})
    ci = {c: i for i, c in enumerate(cs)}
    pi = {p: j for j, p in enumerate(ps)}
    bits = np.zeros((len(cs), len(ps)), dtype=np.int8)
    for r in recs:
        if r.value not in (0.0, 1.0):
            raise InputError(
                f"incidence value for {r.country},{r.product} in {year} is {r.value}, expected 0 or 1"
            )
        bits[ci[r.country], pi[r.product]] = int(r.value)
    kinds = kinds or {}
    return incidence_from_bits(bits, cs, ps, [kinds.get(p, "good") for p in ps], year)
