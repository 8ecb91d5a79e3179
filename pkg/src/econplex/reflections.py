"""Diversity, ubiquity, the method of reflections and spectral ECI/PCI."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ComplexEigenvalue, DegenerateSpectrum
from .rca import IncidenceMatrix
from .scores import ScoreVector

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class SpectralResult:
    eigenvalue: float
    eigenvector: ScoreVector
    residual: float
    orientation_sign: int
    next_eigenvalue: float | None = None

    def to_dict(self) -> dict:
        return {
            "metric": self.eigenvector.metric,
            "eigenvalue": self.eigenvalue,
            "next_eigenvalue": self.next_eigenvalue,
            "residual": self.residual,
            "orientation_sign": self.orientation_sign,
        }


def diversity(M: IncidenceMatrix) -> ScoreVector:
    return ScoreVector("country", M.countries, M.bits.sum(axis=1).astype(float), "diversity")


def ubiquity(M: IncidenceMatrix) -> ScoreVector:
    return ScoreVector("product", M.products, M.bits.sum(axis=0).astype(float), "ubiquity")


def mr_iterate(M: IncidenceMatrix, n: int) -> tuple[ScoreVector, ScoreVector]:
    """Scores after ``n`` reflections, starting from diversity and ubiquity.

    Both updates read the previous step's vectors. Raw iterates alternate
    between two families and flatten towards a constant; they are a
    diagnostic, the eigenvector route below is what ECI/PCI use.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    m = M.m
    d = m.sum(axis=1)
    u = m.sum(axis=0)
    c, p = d.copy(), u.copy()
    for _ in range(n):
        c, p = (m @ p) / d, (c @ m) / u
    return (
        ScoreVector("country", M.countries, c, "mr_country"),
        ScoreVector("product", M.products, p, "mr_product"),
    )


def coupling_matrix(M: IncidenceMatrix, kind: str) -> np.ndarray:
    """Row-stochastic country-country or product-product matrix.

    country: C[i, i'] = sum_j M[i,j] M[i',j] / (d_i u_j)
    product: P[j, j'] = sum_i M[i,j] M[i,j'] / (d_i u_j)

    The product form divides by the ubiquity of the row product ``j``.
    """
    m = M.m
    d = m.sum(axis=1)
    u = m.sum(axis=0)
    if kind == "country":
        return (m / d[:, None]) @ (m / u[None, :]).T
    if kind == "product":
        return ((m / d[:, None]).T @ m) / u[:, None]
    raise ValueError(f"kind must be country or product, got {kind!r}")


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt((a @ a) * (b @ b))
    return float(a @ b / den) if den > 0 else 0.0


def _second_eigenvector(T: np.ndarray, tol: float) -> tuple[float, np.ndarray, float, float | None]:
    n = T.shape[0]
    if n < 2:
        raise DegenerateSpectrum("a single node has no second eigenvalue")
    w, V = np.linalg.eig(T)
    order = sorted(range(n), key=lambda k: (-abs(w[k]), -w[k].real, k))
    lam = w[order[1]]
    if abs(lam.imag) > tol:
        raise ComplexEigenvalue(f"second eigenvalue {lam} is complex")
    lam2 = float(lam.real)
    if abs(abs(lam2) - 1.0) <= tol:
        raise DegenerateSpectrum(
            f"second eigenvalue {lam2:.12g} equals the leading one (disconnected network?)"
        )
    if abs(lam2) <= tol:
        raise DegenerateSpectrum("coupling matrix has rank one (identical rows), no second eigenvector")
    lam3 = None
    if n > 2:
        lam3 = float(abs(w[order[2]]))
        if abs(abs(lam2) - lam3) <= tol:
            raise DegenerateSpectrum(f"|lambda2|={abs(lam2):.12g} ties |lambda3|={lam3:.12g}")
    v = V[:, order[1]].real
    v = v / np.linalg.norm(v)
    residual = float(np.max(np.abs(T @ v - lam2 * v)))
    if residual >= tol:
        raise DegenerateSpectrum(f"eigenvector residual {residual:.3g} exceeds tolerance {tol:.3g}")
    return lam2, v, residual, lam3


def _standardize(v: np.ndarray) -> np.ndarray:
    sd = v.std(ddof=1)
    if not sd > 0:
        raise DegenerateSpectrum("second eigenvector is constant")
    return (v - v.mean()) / sd


def _spectral_index(M: IncidenceMatrix, kind: str, tol: float):
    if not tol > 0:
        raise ValueError("tol must be positive")
    T = coupling_matrix(M, kind)
    lam2, v, residual, lam3 = _second_eigenvector(T, tol)
    if kind == "country":
        labels, degree, want, metric = M.countries, M.bits.sum(axis=1), 1, "eci"
    else:
        labels, degree, want, metric = M.products, M.bits.sum(axis=0), -1, "pci"
    # ECI aligns with diversity, PCI anti-aligns with ubiquity
    r = _pearson(v, degree.astype(float))
    if abs(r) > 1e-12:
        sign = 1 if r * want > 0 else -1
    else:
        k = int(np.argmax(np.abs(v)))  # no degree signal: largest entry positive
        sign = 1 if v[k] > 0 else -1
    sign = int(np.sign(sign))
    raw = ScoreVector(kind, labels, sign * v, metric)
    spectral = SpectralResult(lam2, raw, residual, sign, lam3)
    return ScoreVector(kind, labels, _standardize(sign * v), metric), spectral


def eci(M: IncidenceMatrix, tol: float = DEFAULT_TOL) -> tuple[ScoreVector, SpectralResult]:
    """Economic Complexity Index: standardised second eigenvector of the country matrix.

    Mean 0, sample standard deviation 1, sign chosen so that the index
    correlates non-negatively with diversity.
    """
    return _spectral_index(M, "country", tol)


def pci(M: IncidenceMatrix, tol: float = DEFAULT_TOL) -> tuple[ScoreVector, SpectralResult]:
    """Product Complexity Index, oriented to correlate non-positively with ubiquity."""
    return _spectral_index(M, "product", tol)
