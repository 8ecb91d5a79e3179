"""Built-in matrices and seeded synthetic data used by tests, selftest and the CLI."""

from __future__ import annotations

import numpy as np

from .data import TradeRecord, TradeTable
from .rca import IncidenceMatrix, incidence_from_bits

TRIANGULAR3 = np.array([[1, 1, 1], [1, 1, 0], [1, 0, 0]])
NESTED2 = np.array([[1, 1], [0, 1]])

# name -> (bits, knob overrides for CLI runs)
FIXTURES = {
    "triangular3": (TRIANGULAR3, {}),
    # decay of the weak country is ~1/n, so the floor must be reachable in 1e4 steps
    "nested2x2": (NESTED2, {"zero_floor": 1e-3, "max_iter": 10_000}),
}
FIXTURE_YEAR = 2000


def fixture_incidence(name: str, year: int = FIXTURE_YEAR) -> IncidenceMatrix:
    bits, _ = FIXTURES[name]
    n_c, n_p = bits.shape
    return incidence_from_bits(
        bits,
        [f"C{i + 1}" for i in range(n_c)],
        [f"P{j + 1}" for j in range(n_p)],
        year=year,
    )


def all_ones(n_c: int, n_p: int | None = None) -> IncidenceMatrix:
    return incidence_from_bits(np.ones((n_c, n_p or n_c), dtype=int))


def random_incidence(seed: int, shape=(20, 15), density: float = 0.4) -> IncidenceMatrix:
    """Bernoulli(density) matrix with empty rows/columns pruned away."""
    rng = np.random.default_rng(seed)
    return incidence_from_bits((rng.random(shape) < density).astype(int))


def synthetic_exports(rng: np.random.Generator, n_c: int, n_p: int) -> np.ndarray:
    """Lognormal country size x product size x idiosyncratic noise."""
    size = rng.lognormal(0.0, 1.0, size=(n_c, 1))
    market = rng.lognormal(0.0, 1.0, size=(1, n_p))
    return size * market * rng.lognormal(0.0, 1.0, size=(n_c, n_p))


def synthetic_trade_table(
    n_c: int = 130, n_p: int = 22, years=range(1995, 2011), seed: int = 0, n_services: int = 12
) -> tuple[TradeTable, dict[str, str]]:
    """Seeded trade panel plus a product-kind map (the last ``n_services`` products are services)."""
    rng = np.random.default_rng(seed)
    countries = [f"K{i:03d}" for i in range(n_c)]
    products = [f"{j:02d}G" for j in range(n_p - n_services)] + [
        f"S{j:02d}" for j in range(n_services)
    ]
    kinds = {p: ("service" if p.startswith("S") else "good") for p in products}
    recs = []
    for y in years:
        E = synthetic_exports(rng, n_c, n_p)
        for i, c in enumerate(countries):
            for j, p in enumerate(products):
                recs.append(TradeRecord(int(y), c, p, float(round(E[i, j], 6))))
    return TradeTable(tuple(recs), "synthetic", 0), kinds
