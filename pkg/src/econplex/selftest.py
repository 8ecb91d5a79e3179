"""Invariant checks on built-in fixtures and seeded random matrices."""

from __future__ import annotations

import tempfile
from pathlib import Path
from typing import Callable

import numpy as np

from . import econ, fitness, reflections, stats
from .data import ExportMatrix
from .errors import InvariantViolation
from .fixtures import NESTED2, TRIANGULAR3, all_ones, random_incidence, synthetic_trade_table
from .rca import incidence_from_bits, rca
from .scores import ScoreVector

FAULTS = ("normalization",)


def _broken_normalize(x):
    return x / x.mean() * (1 + 1e-6)


def _eci_fixture(fault):
    M = incidence_from_bits(TRIANGULAR3)
    sv, spec = reflections.eci(M)
    assert abs(spec.eigenvalue - 0.25) < 1e-12, spec.eigenvalue
    assert np.allclose(sv.values, [1, 0, -1], atol=1e-9), sv.values


def _normalization_sums(fault):
    norm = _broken_normalize if fault == "normalization" else None
    for seed in range(5):
        M = random_incidence(seed)
        try:
            fitness.mfcm(M, _normalize=norm)
            fitness.fcm(M, max_iter=2000, _normalize=norm)
        except InvariantViolation as e:
            raise AssertionError(str(e)) from None


def _mfcm_symmetry(fault):
    for n in range(2, 11):
        res = fitness.mfcm(all_ones(n))
        assert res.verdict == fitness.CONVERGED and res.iterations == 1
        assert np.allclose(res.country_scores.values, 1, atol=1e-12)
        assert np.allclose(res.product_scores.values, 1, atol=1e-12)


def _mfcm_bounds(fault):
    for seed in range(20):
        M = random_incidence(seed)
        res = fitness.mfcm(M)
        c = res.country_scores.values
        assert res.verdict == fitness.CONVERGED, res.verdict
        assert c.min() > 0 and c.max() < M.shape[0]
        assert np.all(res.raw_product >= 1.0 / (M.shape[0] * M.bits.sum(axis=0)))


def _fcm_zero(fault):
    res = fitness.fcm(incidence_from_bits(NESTED2), max_iter=10_000, zero_floor=1e-3)
    assert res.verdict == fitness.ZERO_CONVERGENCE, res.verdict


def _mfcm_drift(fault):
    res = fitness.mfcm(incidence_from_bits(NESTED2))
    assert res.verdict == fitness.BOUNDARY_DRIFT, res.verdict
    x = 4 / 3
    for n, _, hi, _ in res.trajectory[:50]:
        assert abs(hi - x) < 1e-10, (n, hi, x)
        x = (4 - x) / (3 - x)


def _taylor(fault):
    for d in np.linspace(-0.5, 0.5, 201):
        _, _, err = fitness.taylor_consistency((1 + d) * 5, 10)
        assert abs(err - d * d / (1 + d)) < 1e-12
        assert err <= 2 * d * d + 1e-15


def _rca_props(fault):
    rng = np.random.default_rng(0)
    for _ in range(20):
        E = rng.lognormal(size=(6, 1)) * rng.lognormal(size=(1, 4))
        ex = ExportMatrix(0, tuple("abcdef"), tuple("wxyz"), E, ("good",) * 4)
        r = rca(ex).values
        assert np.abs(r - 1).max() < 1e-12
        E2 = rng.lognormal(size=(6, 4))
        a = rca(ExportMatrix(0, tuple("abcdef"), tuple("wxyz"), E2, ("good",) * 4)).values
        b = rca(ExportMatrix(0, tuple("abcdef"), tuple("wxyz"), 7.3 * E2, ("good",) * 4)).values
        assert np.abs(a - b).max() < 1e-12


def _row_stochastic(fault):
    for seed in range(20):
        M = random_incidence(seed)
        for kind in ("country", "product"):
            T = reflections.coupling_matrix(M, kind)
            assert np.abs(T.sum(axis=1) - 1).max() < 1e-12


def _permutation(fault):
    rng = np.random.default_rng(1)
    M = random_incidence(3)
    ro = rng.permutation(M.shape[0])
    co = rng.permutation(M.shape[1])
    P = M.permuted(ro, co)
    for fn in (lambda X: reflections.eci(X)[0], lambda X: reflections.pci(X)[0],
               lambda X: fitness.fcm(X, max_iter=2000).country_scores,
               lambda X: fitness.mfcm(X).country_scores):
        a, b = fn(M).as_dict(), fn(P).as_dict()
        assert max(abs(a[k] - b[k]) for k in a) < 1e-12


def _spearman(fault):
    a = stats.rank(ScoreVector("country", ("a", "b", "c", "d"), np.array([4.0, 3, 2, 1]), "x"))
    b = stats.rank(ScoreVector("country", ("a", "b", "c", "d"), np.array([4.0, 2, 3, 1]), "x"))
    assert stats.spearman(a, b) == 0.8


def _cluster_oracle(fault):
    rng = np.random.default_rng(5)
    n, G = 200, 20
    x = rng.normal(size=n)
    g = np.repeat(np.arange(G), n // G)
    y = 1 + 0.5 * x + rng.normal(size=G)[g] + rng.normal(size=n)
    res = econ.fit(y, x[:, None], ["x"], None, g)
    Z = np.column_stack([np.ones(n), x])
    inv = np.linalg.inv(Z.T @ Z)
    u = y - Z @ (inv @ Z.T @ y)
    meat = sum(np.outer(Z[g == k].T @ u[g == k], Z[g == k].T @ u[g == k]) for k in range(G))
    V = G / (G - 1) * (n - 1) / (n - 2) * inv @ meat @ inv
    assert abs(res.se["x"] - np.sqrt(V[1, 1])) < 1e-10


def _determinism(fault):
    from .pipeline import PipelineConfig, run_pipeline

    table, kinds = synthetic_trade_table(40, 10, range(2000, 2003), seed=3, n_services=4)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        (tmp / "trade.csv").write_text(table.to_csv())
        (tmp / "kinds.csv").write_text("product,kind\n" + "".join(f"{p},{k}\n" for p, k in kinds.items()))
        outs = []
        for run in ("a", "b"):
            cfg = PipelineConfig(out=tmp / run, trade=tmp / "trade.csv", kinds=tmp / "kinds.csv")
            run_pipeline(cfg, log=lambda *_: None)
            outs.append({p.name: p.read_bytes() for p in sorted((tmp / run).iterdir())})
        assert outs[0] == outs[1], "outputs differ between runs"


PROPERTIES: dict[str, Callable] = {
    "eci_fixture": _eci_fixture,
    "normalization_sums": _normalization_sums,
    "mfcm_symmetry": _mfcm_symmetry,
    "mfcm_steady_state_bounds": _mfcm_bounds,
    "fcm_zero_convergence": _fcm_zero,
    "mfcm_boundary_drift": _mfcm_drift,
    "taylor_second_order": _taylor,
    "rca_rank1_and_scale": _rca_props,
    "coupling_row_stochastic": _row_stochastic,
    "permutation_invariance": _permutation,
    "spearman_fixture": _spearman,
    "cluster_se_oracle": _cluster_oracle,
    "pipeline_determinism": _determinism,
}


def selftest(fault: str | None = None, log=print) -> dict[str, str | None]:
    """Run every property; returns name -> failure message (None when it passed)."""
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}")
    outcome = {}
    for name, check in PROPERTIES.items():
        try:
            check(fault)
            outcome[name] = None
            log(f"PASS {name}")
        except Exception as e:  # report every failure, keep going
            outcome[name] = f"{type(e).__name__}: {e}"
            log(f"FAIL {name}: {outcome[name]}")
    return outcome
