"""Independent cross-check oracles used by the tests.

These deliberately avoid the library's solution paths: LP optima come from
explicit vertex enumeration, expectations from generic quadrature.
"""

import itertools
import math

import numpy as np
from scipy import integrate


def survival_quadrature_mean(dist) -> float:
    """Mean via the survival-function integral, independent of closed forms."""
    body, _ = integrate.quad(lambda x: 1.0 - dist.cdf(x), min(dist.lo, 0.0), dist.hi, limit=400)
    return body + min(dist.lo, 0.0)


def expected_min_quadrature(dist, p: float) -> float:
    if p <= 0:
        return max(p, 0.0) if dist.lo >= 0 else p
    hi = min(p, dist.hi)
    body, _ = integrate.quad(lambda x: 1.0 - dist.cdf(x), 0.0, hi, limit=400)
    return body + max(0.0, p - dist.hi) * 0.0


def enumerate_lp_max(c, a_ub, b_ub, a_eq, b_eq, tol=1e-9):
    """Exhaustive vertex enumeration for max c'x, A_ub x <= b_ub,
    A_eq x = b_eq, x >= 0.  Exponential; for tiny LPs only."""
    c = np.asarray(c, float)
    a_ub = np.asarray(a_ub, float).reshape(-1, len(c))
    b_ub = np.asarray(b_ub, float)
    a_eq = np.asarray(a_eq, float).reshape(-1, len(c))
    b_eq = np.asarray(b_eq, float)
    n = len(c)
    rows = [("ub", i) for i in range(len(b_ub))] + [("eq", i) for i in range(len(b_eq))] + [
        ("nn", j) for j in range(n)
    ]
    best = None
    n_eq = len(b_eq)
    for combo in itertools.combinations(rows, n):
        # equalities must always be active; only combos containing them count
        if sum(1 for kind, _ in combo if kind == "eq") != n_eq:
            continue
        A = np.zeros((n, n))
        b = np.zeros(n)
        for r, (kind, i) in enumerate(combo):
            if kind == "ub":
                A[r] = a_ub[i]
                b[r] = b_ub[i]
            elif kind == "eq":
                A[r] = a_eq[i]
                b[r] = b_eq[i]
            else:
                A[r, i] = 1.0
                b[r] = 0.0
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        x = np.linalg.solve(A, b)
        if np.any(x < -tol):
            continue
        if np.any(a_ub @ x > b_ub + tol):
            continue
        if np.any(np.abs(a_eq @ x - b_eq) > tol):
            continue
        val = float(c @ x)
        if best is None or val > best:
            best = val
    return best


def ex_ante_lp_matrices(values, f, budgets, g, q):
    """The slab-menu LP for the discrete ex-ante problem, rebuilt from
    scratch so vertex enumeration is a genuinely independent route.

    Variable layout (mirroring the math, not the library's code): for each
    budget level j, m slabs priced at the bracket bottom (v_{k-1}, with
    v_0 = 0) followed by m slabs priced at the bracket top v_k.
    """
    values = np.asarray(values, float)
    f = np.asarray(f, float)
    budgets = np.asarray(budgets, float)
    g = np.asarray(g, float)
    m, n = len(values), len(budgets)
    s = np.cumsum(f[::-1])[::-1]
    v_lo = np.concatenate([[0.0], values[:-1]])
    nvar = 2 * m * n
    c = np.zeros(nvar)
    mass = np.zeros(nvar)
    a_ub, b_ub = [], []
    for j in range(n):
        base = j * 2 * m
        c[base : base + m] = g[j] * s * v_lo
        c[base + m : base + 2 * m] = g[j] * s * values
        mass[base : base + m] = g[j] * s
        mass[base + m : base + 2 * m] = g[j] * s
        unit = np.zeros(nvar)
        unit[base : base + 2 * m] = 1.0
        a_ub.append(unit)
        b_ub.append(1.0)
        if not math.isinf(budgets[j]):
            pay = np.zeros(nvar)
            pay[base : base + m] = v_lo
            pay[base + m : base + 2 * m] = values
            a_ub.append(pay)
            b_ub.append(budgets[j])
    return c, a_ub, b_ub, [mass], [q]
