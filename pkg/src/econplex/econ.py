"""Panel OLS with period fixed effects and cluster-robust standard errors.

Also holds the drivers that lay out growth-regression columns and the
product-complexity service-dummy regression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as sps
from scipy.linalg import solve_triangular

from .data import LOG_INITIAL_GDP, PanelObservation
from .errors import MissingKind, RankDeficient, TooFewClusters, UnknownRegressor
from .scores import fmt

SIGNIFICANCE_LEVELS = (0.01, 0.05, 0.1)
CONST = "const"
SMALL_SAMPLE_NOTE = "cluster: G/(G-1)*(N-1)/(N-K); p-values t(G-1)"
R2_NOTE = "overall R2 of the dummy-variable regression"

GROWTH_CONTROLS = (LOG_INITIAL_GDP, "nr_increase", "coi")
GROWTH_VARIANTS = ("baseline", "no_fe", "extra_control")


@dataclass(frozen=True)
class RegressionSpec:
    dependent: str
    regressors: tuple[str, ...]
    include_period_fe: bool = True
    cluster_by: str | None = "country"
    significance_levels: tuple[float, ...] = SIGNIFICANCE_LEVELS
    p_dist: str = "t"

    def __post_init__(self):
        object.__setattr__(self, "regressors", tuple(self.regressors))
        if not self.regressors:
            raise ValueError("at least one regressor is required")
        if len(set(self.regressors)) != len(self.regressors):
            raise ValueError("regressors must be distinct")
        if self.dependent in self.regressors:
            raise ValueError("dependent variable cannot be a regressor")
        if self.p_dist not in ("t", "normal"):
            raise ValueError("p_dist must be 't' or 'normal'")


@dataclass(frozen=True)
class RegressionResult:
    coefficients: dict[str, float]
    se: dict[str, float]
    t_stats: dict[str, float]
    p_values: dict[str, float]
    r_squared: float
    n_obs: int
    fe_estimates: dict[int, float]
    info_criteria: dict[str, float]
    star_codes: dict[str, str]
    n_clusters: int | None = None
    clustered: bool = False
    n_dropped: int = 0
    metadata: dict[str, str] = field(default_factory=dict)
    # covariance of the reported coefficients, in ``coefficients`` order
    vcov: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "coefficients": self.coefficients,
            "se": self.se,
            "t_stats": self.t_stats,
            "p_values": self.p_values,
            "stars": self.star_codes,
            "r_squared": self.r_squared,
            "n_obs": self.n_obs,
            "n_clusters": self.n_clusters,
            "clustered": self.clustered,
            "n_dropped": self.n_dropped,
            "fe_estimates": {str(k): v for k, v in self.fe_estimates.items()},
            "info_criteria": self.info_criteria,
            "metadata": self.metadata,
        }


def stars(p: float, levels: Sequence[float] = SIGNIFICANCE_LEVELS) -> str:
    if not math.isfinite(p):
        return ""
    for k, lvl in enumerate(sorted(levels)):
        if p < lvl:
            return "*" * (len(levels) - k)
    return ""


def _collinear_columns(X: np.ndarray, names: Sequence[str]) -> list[str]:
    bad, kept = [], []
    for k in range(X.shape[1]):
        trial = X[:, kept + [k]]
        if np.linalg.matrix_rank(trial) < len(kept) + 1:
            bad.append(names[k])
        else:
            kept.append(k)
    return bad


def information_criteria(ssr: float, n: int, k: int) -> dict[str, float]:
    """Gaussian log-likelihood based AIC, BIC and Hannan-Quinn; ``k`` counts coefficients."""
    if ssr <= 0:
        return {"loglik": math.inf, "aic": -math.inf, "bic": -math.inf, "hq": -math.inf}
    ll = -0.5 * n * (math.log(2 * math.pi) + math.log(ssr / n) + 1)
    return {
        "loglik": ll,
        "aic": -2 * ll + 2 * k,
        "bic": -2 * ll + k * math.log(n),
        "hq": -2 * ll + 2 * k * math.log(math.log(n)),
    }


def fit(
    y: np.ndarray,
    X: np.ndarray,
    names: Sequence[str],
    periods: Sequence | None,
    clusters: Sequence | None,
    significance_levels: Sequence[float] = SIGNIFICANCE_LEVELS,
    p_dist: str = "t",
) -> RegressionResult:
    """OLS of ``y`` on ``X`` plus an intercept and optional period dummies.

    ``X`` holds only the named regressors. The earliest period is the
    baseline; its fixed effect is reported as 0.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float).reshape(len(y), -1)
    n = len(y)
    cols = [np.ones(n), *X.T]
    all_names = [CONST, *names]
    fe_levels: list = []
    if periods is not None:
        fe_levels = sorted(set(periods))
        per = np.asarray(periods)
        for lvl in fe_levels[1:]:
            cols.append((per == lvl).astype(float))
            all_names.append(f"period[{lvl}]")
    Z = np.column_stack(cols)
    k = Z.shape[1]
    if n < k + 1:
        raise RankDeficient(all_names, f"{n} observations for {k} parameters")
    if np.linalg.matrix_rank(Z) < k:
        raise RankDeficient(_collinear_columns(Z, all_names))

    # QR keeps the conditioning of Z rather than squaring it as Z'Z would
    Q, R = np.linalg.qr(Z)
    R_inv = solve_triangular(R, np.eye(k))
    ZtZ_inv = R_inv @ R_inv.T
    beta = R_inv @ (Q.T @ y)
    resid = y - Z @ beta
    ssr = float(resid @ resid)
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)

    if clusters is not None:
        cl = np.asarray(clusters)
        groups = sorted(set(cl.tolist()))
        G = len(groups)
        if G < 2:
            raise TooFewClusters(f"{G} cluster(s); need at least 2")
        idx = {g: i for i, g in enumerate(groups)}
        gid = np.array([idx[g] for g in cl.tolist()])
        scores = np.zeros((G, k))
        # scores on Q: Z'u_g = R' Q_g'u_g, so V = R^-1 (S'S) R^-T
        np.add.at(scores, gid, Q * resid[:, None])
        meat = scores.T @ scores
        factor = G / (G - 1) * (n - 1) / (n - k)
        V = factor * R_inv @ meat @ R_inv.T
        df = G - 1
    else:
        G = None
        V = ssr / (n - k) * ZtZ_inv
        df = n - k

    se = np.sqrt(np.clip(np.diag(V), 0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / se
        t = np.where(se == 0, np.where(beta == 0, np.nan, np.sign(beta) * np.inf), t)
    if p_dist == "normal":
        p = 2 * sps.norm.sf(np.abs(t))
    else:
        p = 2 * sps.t.sf(np.abs(t), df)

    report = [i for i, nm in enumerate(all_names) if not nm.startswith("period[")]
    fe = {}
    if fe_levels:
        fe[fe_levels[0]] = 0.0
        for lvl in fe_levels[1:]:
            fe[lvl] = float(beta[all_names.index(f"period[{lvl}]")])
    names_r = [all_names[i] for i in report]
    meta = {"r_squared": R2_NOTE}
    if clusters is not None:
        meta["se"] = SMALL_SAMPLE_NOTE if p_dist == "t" else SMALL_SAMPLE_NOTE.replace("t(G-1)", "normal")
    else:
        meta["se"] = "ordinary OLS standard errors; p-values t(N-K)"
    return RegressionResult(
        coefficients={nm: float(beta[i]) for nm, i in zip(names_r, report)},
        se={nm: float(se[i]) for nm, i in zip(names_r, report)},
        t_stats={nm: float(t[i]) for nm, i in zip(names_r, report)},
        p_values={nm: float(p[i]) for nm, i in zip(names_r, report)},
        r_squared=r2,
        n_obs=n,
        fe_estimates=fe,
        info_criteria=information_criteria(ssr, n, k),
        star_codes={nm: stars(float(p[i]), significance_levels) for nm, i in zip(names_r, report)},
        n_clusters=G,
        clustered=clusters is not None,
        metadata=meta,
        vcov=V[np.ix_(report, report)],
    )


def ols_fe(panel: Iterable[PanelObservation], spec: RegressionSpec) -> RegressionResult:
    """Pooled OLS with optional period fixed effects.

    Observations lacking any needed variable are dropped and counted in
    ``n_dropped``. Standard errors are cluster-robust when
    ``spec.cluster_by`` is set (``country`` or ``cluster_id`` both use the
    observation's cluster id), ordinary otherwise.
    """
    rows, dropped = [], 0
    for ob in panel:
        try:
            rows.append((ob, ob.value(spec.dependent), [ob.value(x) for x in spec.regressors]))
        except KeyError:
            dropped += 1
    if not rows:
        raise RankDeficient(list(spec.regressors), "no complete observations")
    y = np.array([r[1] for r in rows])
    X = np.array([r[2] for r in rows])
    periods = [r[0].period_start for r in rows] if spec.include_period_fe else None
    clusters = None
    if spec.cluster_by:
        clusters = [r[0].cluster_id for r in rows]
    res = fit(y, X, spec.regressors, periods, clusters, spec.significance_levels, spec.p_dist)
    if dropped:
        object.__setattr__(res, "n_dropped", dropped)
    return res


def standardized_coefficient(result: RegressionResult, x: str, sd_x: float, sd_y: float) -> float:
    """Coefficient of ``x`` expressed in standard deviations of the dependent variable."""
    if x not in result.coefficients:
        raise UnknownRegressor(f"{x!r} is not in the regression")
    if not sd_y > 0:
        raise ValueError("sd_y must be positive")
    return result.coefficients[x] * sd_x / sd_y


def partial_correlation(x, y, controls=None) -> float:
    """Pearson correlation of ``x`` and ``y`` after partialling out ``controls`` (plus a constant)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    Z = np.ones((len(x), 1))
    if controls is not None:
        Z = np.column_stack([Z, np.asarray(controls, dtype=float).reshape(len(x), -1)])
    rx = x - Z @ np.linalg.lstsq(Z, x, rcond=None)[0]
    ry = y - Z @ np.linalg.lstsq(Z, y, rcond=None)[0]
    return float(rx @ ry / math.sqrt((rx @ rx) * (ry @ ry)))


def growth_regression(
    panel: Sequence[PanelObservation],
    complexity_var: str | Sequence[str] | None,
    controls: Sequence[str] = GROWTH_CONTROLS,
    variant: str = "baseline",
    extra_control: str | None = None,
) -> RegressionResult:
    """One column of a growth table: growth on controls and complexity metric(s).

    ``baseline`` uses period fixed effects with country-clustered errors;
    ``no_fe`` drops the fixed effects and reports ordinary errors;
    ``extra_control`` is the baseline with one more control added.
    """
    if variant not in GROWTH_VARIANTS:
        raise ValueError(f"variant must be one of {GROWTH_VARIANTS}")
    if complexity_var is None:
        cvars: list[str] = []
    elif isinstance(complexity_var, str):
        cvars = [complexity_var]
    else:
        cvars = list(complexity_var)
    regs = list(controls)
    regs += [v for v in cvars if v not in regs]
    if variant == "extra_control":
        if not extra_control:
            raise ValueError("extra_control variant needs a control name")
        regs.append(extra_control)
    fe = variant != "no_fe"
    spec = RegressionSpec("growth", tuple(regs), include_period_fe=fe, cluster_by="country" if fe else None)
    return ols_fe(panel, spec)


def pci_service_regression(rows: Iterable[tuple[int, str, float, bool]]) -> RegressionResult:
    """Product complexity on a service dummy with year fixed effects, clustered by product.

    ``const`` is the goods mean in the baseline year and ``service`` the
    service premium.
    """
    rows = list(rows)
    by_year: dict[int, set[bool]] = {}
    for year, _, _, is_service in rows:
        by_year.setdefault(year, set()).add(bool(is_service))
    for year, kinds in sorted(by_year.items()):
        if kinds != {True, False}:
            raise MissingKind(f"year {year} lacks goods or services")
    if not rows:
        raise MissingKind("no product complexity rows")
    y = np.array([r[2] for r in rows], dtype=float)
    X = np.array([[1.0 if r[3] else 0.0] for r in rows])
    return fit(y, X, ["service"], [r[0] for r in rows], [r[1] for r in rows])


def format_table(columns: Mapping[str, RegressionResult], order: Sequence[str] | None = None) -> str:
    """Plain-text table: coefficient with stars, standard error in parentheses below."""
    labels = list(columns)
    names: list[str] = []
    for res in columns.values():
        for nm in res.coefficients:
            if nm != CONST and nm not in names:
                names.append(nm)
    if order:
        names = [n for n in order if n in names] + [n for n in names if n not in order]
    names.append(CONST)
    width = max(12, *(len(n) for n in names)) + 2
    cw = 14
    lines = ["Variable".ljust(width) + "".join(l.rjust(cw) for l in labels)]
    lines.append("-" * len(lines[0]))
    for nm in names:
        coef = "".join(
            (f"{columns[l].coefficients[nm]:.3f}{columns[l].star_codes[nm]}" if nm in columns[l].coefficients else "").rjust(cw)
            for l in labels
        )
        se = "".join(
            (f"({columns[l].se[nm]:.3f})" if nm in columns[l].se else "").rjust(cw) for l in labels
        )
        lines.append(nm.ljust(width) + coef)
        lines.append("".ljust(width) + se)
    lines.append("-" * len(lines[0]))
    lines.append("Observations".ljust(width) + "".join(str(columns[l].n_obs).rjust(cw) for l in labels))
    lines.append("R2".ljust(width) + "".join(f"{columns[l].r_squared:.3f}".rjust(cw) for l in labels))
    lines.append(
        "Period FE".ljust(width)
        + "".join(("Yes" if columns[l].fe_estimates else "No").rjust(cw) for l in labels)
    )
    lines.append("*** p<0.01, ** p<0.05, * p<0.1")
    return "\n".join(lines) + "\n"


def table_csv(columns: Mapping[str, RegressionResult]) -> str:
    out = ["column,variable,coefficient,se,t,p,stars"]
    for label, res in columns.items():
        for nm in res.coefficients:
            out.append(
                ",".join(
                    [
                        label,
                        nm,
                        fmt(res.coefficients[nm]),
                        fmt(res.se[nm]),
                        fmt(res.t_stats[nm]),
                        fmt(res.p_values[nm]),
                        res.star_codes[nm],
                    ]
                )
            )
        out.append(f"{label},n_obs,{res.n_obs},,,,")
        out.append(f"{label},r_squared,{fmt(res.r_squared)},,,,")
        for key in ("aic", "bic", "hq"):
            out.append(f"{label},{key},{fmt(res.info_criteria[key])},,,,")
    return "\n".join(out) + "\n"
