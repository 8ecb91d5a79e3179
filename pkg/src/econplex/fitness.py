"""Nonlinear fitness-complexity iterations: classic FCM and the modified M-FCM.

Both maps start from unit scores and alternate

    c~ = M p                       c = c~ / mean(c~)
    p~ = 1 / (M^T g(c))            p = p~ / mean(p~)

with ``g(c) = 1/c`` for FCM and ``g(c) = N_c - c`` for M-FCM. The country
update uses the previous product scores and the product update uses the
country scores just computed.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvariantViolation, SingularUpdate
from .rca import IncidenceMatrix
from .scores import ScoreVector

CONVERGED = "converged"
ZERO_CONVERGENCE = "zero_convergence"
BOUNDARY_DRIFT = "boundary_drift"
MAX_ITERATIONS = "max_iterations"
VERDICTS = (CONVERGED, ZERO_CONVERGENCE, BOUNDARY_DRIFT, MAX_ITERATIONS)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000
DEFAULT_ZERO_FLOOR = 1e-9
DEFAULT_BOUNDARY_MARGIN = 1e-3
DECAY_WINDOW = 100
# every iteration up to this one is kept in the trajectory, then every TRAJECTORY_STRIDE-th
TRAJECTORY_HEAD = 1000
TRAJECTORY_STRIDE = 1000


@dataclass(frozen=True)
class FixedPointResult:
    country_scores: ScoreVector
    product_scores: ScoreVector
    iterations: int
    residual: float
    verdict: str
    method: str
    # (iteration, min c, max c, residual)
    trajectory: tuple[tuple[int, float, float, float], ...] = ()
    raw_product: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def converged(self) -> bool:
        return self.verdict == CONVERGED

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "verdict": self.verdict,
            "iterations": self.iterations,
            "residual": self.residual,
            "countries": self.country_scores.as_dict(),
            "products": self.product_scores.as_dict(),
            "trajectory": [
                {"iteration": n, "min_c": lo, "max_c": hi, "residual": r}
                for n, lo, hi, r in self.trajectory
            ],
        }


def _mean_normalize(x: np.ndarray) -> np.ndarray:
    return x / x.mean()


def _check_sum(x: np.ndarray, target: int, what: str, n: int):
    s = math.fsum(x)
    if abs(s - target) > 1e-12 * max(1, target):
        raise InvariantViolation(
            "normalization_sum", f"sum of {what} scores is {s!r}, expected {target} (iteration {n})"
        )


def _iterate(
    M: IncidenceMatrix,
    method: str,
    tol: float,
    max_iter: int,
    zero_floor: float,
    boundary_margin: float,
    normalize: Callable[[np.ndarray], np.ndarray] | None,
) -> FixedPointResult:
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    norm = normalize or _mean_normalize
    m = M.m
    nc, np_ = m.shape
    u = m.sum(axis=0)
    c = np.ones(nc)
    p = np.ones(np_)
    p_raw = np.ones(np_)
    residual = math.inf
    prev_residual = math.inf
    verdict = MAX_ITERATIONS
    recent_min: deque[float] = deque(maxlen=DECAY_WINDOW + 1)
    traj: list[tuple[int, float, float, float]] = []
    n = 0

    for n in range(1, max_iter + 1):
        c_new = norm(m @ p)
        if method == "fcm":
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                denom = (1.0 / c_new) @ m
        else:
            # terms are formed before summing so no large cancellation occurs
            denom = (nc - c_new) @ m
            bad = np.flatnonzero(~(denom > 0))
            if bad.size:
                raise SingularUpdate(
                    n,
                    [M.products[j] for j in bad],
                    {"max_c": float(c_new.max()), "n_countries": nc},
                )
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            p_raw_new = 1.0 / denom
            p_new = norm(p_raw_new)

        if method == "fcm" and not (
            np.all(np.isfinite(p_new)) and np.all(c_new > 0) and np.all(p_new > 0)
        ):
            # floating-point underflow of a decaying score
            verdict = ZERO_CONVERGENCE
            traj.append((n, float(np.min(c_new)), float(np.max(c_new)), residual))
            break
        if not (np.all(c_new > 0) and np.all(p_new > 0)):
            raise InvariantViolation("positivity", f"non-positive score at iteration {n}")
        _check_sum(c_new, nc, "country", n)
        _check_sum(p_new, np_, "product", n)
        if method == "mfcm" and np.any(p_raw_new < 1.0 / (nc * u) * (1 - 1e-12)):
            raise InvariantViolation("product_lower_bound", f"p~ below 1/(N_c u_j) at iteration {n}")

        prev_residual = residual
        residual = float(max(np.max(np.abs(c_new - c)), np.max(np.abs(p_new - p))))
        prev_max = float(c.max())
        c, p, p_raw = c_new, p_new, p_raw_new
        cmin, cmax = float(c.min()), float(c.max())
        if n <= TRAJECTORY_HEAD or n % TRAJECTORY_STRIDE == 0:
            traj.append((n, cmin, cmax, residual))
        recent_min.append(cmin)

        if method == "fcm":
            if (
                cmin < zero_floor
                and len(recent_min) == recent_min.maxlen
                and all(a > b for a, b in zip(recent_min, list(recent_min)[1:]))
            ):
                verdict = ZERO_CONVERGENCE
                break
            if residual < tol:
                verdict = CONVERGED
                break
        else:
            if residual < tol and cmin > 0 and cmax < nc:
                verdict = CONVERGED
                break
            if cmax > (1 - boundary_margin) * nc and cmax > prev_max and residual <= prev_residual:
                verdict = BOUNDARY_DRIFT
                break

    if not traj or traj[-1][0] != n:
        traj.append((n, float(c.min()), float(c.max()), residual))
    metric_c = "fitness"
    return FixedPointResult(
        country_scores=ScoreVector("country", M.countries, c, metric_c),
        product_scores=ScoreVector("product", M.products, p, "product_complexity"),
        iterations=n,
        residual=residual,
        verdict=verdict,
        method=method,
        trajectory=tuple(traj),
        raw_product=p_raw,
    )


def fcm(
    M: IncidenceMatrix,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    zero_floor: float = DEFAULT_ZERO_FLOOR,
    *,
    _normalize: Callable[[np.ndarray], np.ndarray] | None = None,
) -> FixedPointResult:
    """Classic fitness-complexity map.

    Verdict ``zero_convergence`` when the smallest fitness is below
    ``zero_floor`` and has decreased for the last 100 iterations, or when
    it underflows; ``converged`` when successive scores differ by less than
    ``tol``; ``max_iterations`` otherwise.
    """
    if not zero_floor > 0:
        raise ValueError("zero_floor must be positive")
    return _iterate(M, "fcm", tol, max_iter, zero_floor, 0.0, _normalize)


def mfcm(
    M: IncidenceMatrix,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    boundary_margin: float = DEFAULT_BOUNDARY_MARGIN,
    *,
    _normalize: Callable[[np.ndarray], np.ndarray] | None = None,
) -> FixedPointResult:
    """Modified fitness-complexity map with ``N_c - c`` in the product update.

    ``converged`` additionally needs every fitness strictly inside
    ``(0, N_c)``. A trajectory whose largest fitness climbs past
    ``(1 - boundary_margin) * N_c`` with a shrinking step is stopped as
    ``boundary_drift``: it is heading for the singular point where a
    product denominator vanishes, and no interior fixed point is reached.
    """
    if not 0 < boundary_margin < 1:
        raise ValueError("boundary_margin must lie in (0, 1)")
    return _iterate(M, "mfcm", tol, max_iter, DEFAULT_ZERO_FLOOR, boundary_margin, _normalize)


def taylor_consistency(c: float, n_c: int) -> tuple[float, float, float]:
    """Compare 1/c with its linearisation (4/n_c^2)(n_c - c) around c = n_c/2.

    Returns ``(exact, approx, rel_err)`` where ``rel_err`` is the gap
    measured in units of the expansion value 2/n_c, i.e.
    ``|1/(1+d) - (1-d)|`` with ``d = 2c/n_c - 1``. It equals ``d^2/(1+d)``.
    """
    if not 0 < c < 2 * n_c:
        raise ValueError("c must lie in (0, 2 n_c)")
    exact = 1.0 / c
    approx = 4.0 / n_c**2 * (n_c - c)
    delta = 2.0 * c / n_c - 1.0
    rel_err = abs(1.0 / (1.0 + delta) - (1.0 - delta))
    return exact, approx, rel_err
