"""Slow, loop-based reference implementations used to cross-check the package."""

from __future__ import annotations

import math

import numpy as np


def rca_loops(E):
    E = [list(map(float, row)) for row in E]
    n_c, n_p = len(E), len(E[0])
    total = sum(sum(row) for row in E)
    row = [sum(E[i]) for i in range(n_c)]
    col = [sum(E[i][j] for i in range(n_c)) for j in range(n_p)]
    return np.array(
        [[(E[i][j] / row[i]) / (col[j] / total) for j in range(n_p)] for i in range(n_c)]
    )


def coupling_loops(M, kind):
    M = np.asarray(M, dtype=float)
    n_c, n_p = M.shape
    d = [sum(M[i]) for i in range(n_c)]
    u = [sum(M[:, j]) for j in range(n_p)]
    if kind == "country":
        out = np.zeros((n_c, n_c))
        for a in range(n_c):
            for b in range(n_c):
                out[a, b] = sum(M[a, j] * M[b, j] / (d[a] * u[j]) for j in range(n_p))
        return out
    out = np.zeros((n_p, n_p))
    for a in range(n_p):
        for b in range(n_p):
            out[a, b] = sum(M[i, a] * M[i, b] / (d[i] * u[a]) for i in range(n_c))
    return out


def fitness_steps(M, steps, modified=False):
    """Plain-python iterates ``[(c, p), ...]`` with c updated first, then p from the new c."""
    M = [[int(x) for x in row] for row in M]
    n_c, n_p = len(M), len(M[0])
    c = [1.0] * n_c
    p = [1.0] * n_p
    out = []
    for _ in range(steps):
        ct = [sum(M[i][j] * p[j] for j in range(n_p)) for i in range(n_c)]
        c = [x * n_c / sum(ct) for x in ct]
        if modified:
            pt = [1.0 / sum(M[i][j] * (n_c - c[i]) for i in range(n_c)) for j in range(n_p)]
        else:
            pt = [1.0 / sum(M[i][j] / c[i] for i in range(n_c)) for j in range(n_p)]
        p = [x * n_p / sum(pt) for x in pt]
        out.append((c, p))
    return out


def sandwich_se(y, Z, groups):
    """Cluster-robust standard errors by explicit per-group outer products."""
    n, k = Z.shape
    inv = np.linalg.inv(Z.T @ Z)
    beta = inv @ Z.T @ y
    u = y - Z @ beta
    labels = sorted(set(groups))
    G = len(labels)
    meat = np.zeros((k, k))
    for g in labels:
        idx = [i for i in range(n) if groups[i] == g]
        s = Z[idx].T @ u[idx]
        meat += np.outer(s, s)
    V = G / (G - 1) * (n - 1) / (n - k) * inv @ meat @ inv
    return beta, np.sqrt(np.diag(V))


def gaussian_loglik(resid):
    n = len(resid)
    s2 = sum(r * r for r in resid) / n
    return sum(-0.5 * math.log(2 * math.pi * s2) - r * r / (2 * s2) for r in resid)


def classical_spearman(a, b):
    n = len(a)
    d2 = sum((x - y) ** 2 for x, y in zip(a, b))
    return 1 - 6 * d2 / (n * (n * n - 1))
