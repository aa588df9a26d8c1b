"""Independent optimization oracles: a dense simplex solver, the discretized
single-agent ex-ante revenue LP, and grid-search ex-ante relaxation.

These exist to cross-check the analytic machinery, so they avoid sharing
code paths with it: the simplex is self-contained (two-phase, Bland's
anti-cycling rule) and the grid EAR is plain enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .curves import RevenueCurve
from .distributions import Distribution, PROB_ATOL

_TOL = 1e-10


@dataclass(frozen=True)
class SimplexSolution:
    status: str               # optimal | infeasible | unbounded
    x: np.ndarray | None
    objective: float | None


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    T -= np.outer(colvals, T[row])
    basis[row] = col


def _run_simplex(T, basis, allowed):
    """Iterate a tableau whose last row holds reduced costs.

    Entering column: most negative reduced cost (Dantzig) while the
    objective is moving; after a stretch of degenerate pivots the rule
    drops to Bland's smallest-index choice, whose termination guarantee
    rules out cycling.  Leaving row: min ratio, ties to the smallest basis
    index.  Returns 'optimal' or 'unbounded'.
    """
    m = T.shape[0] - 1
    basis_arr = basis
    stall = 0
    last_obj = T[-1, -1]
    while True:
        red = T[-1, :-1]
        cand = allowed & (red < -_TOL)
        if not cand.any():
            return "optimal"
        if stall <= 64:
            masked = np.where(cand, red, np.inf)
            col = int(np.argmin(masked))
        else:
            col = int(np.argmax(cand))
        colvec = T[:m, col]
        pos = colvec > _TOL
        if not pos.any():
            return "unbounded"
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / colvec[pos]
        rmin = ratios.min()
        near = np.nonzero(ratios <= rmin + 1e-12 * (1.0 + abs(rmin)))[0]
        row = int(min(near, key=lambda r: basis_arr[r]))
        _pivot(T, basis_arr, row, col)
        obj = T[-1, -1]
        if obj > last_obj + 1e-12 * (1.0 + abs(last_obj)):
            stall = 0
        else:
            stall += 1
        last_obj = obj


def simplex_solve(
    objective: Sequence[float],
    constraints: Sequence[Sequence[float]],
    senses: Sequence[str],
    rhs: Sequence[float],
    upper: Sequence[float] | None = None,
    maximize: bool = True,
) -> SimplexSolution:
    """Dense two-phase simplex for max/min c'x s.t. A x (<=|=|>=) b, 0 <= x <= upper.

    Finite upper bounds become extra rows.  Bland's rule guarantees
    termination; intended for desk-scale problems (~1e4 nonzeros).
    """
    c = np.asarray(objective, dtype=float)
    A = np.asarray(constraints, dtype=float).reshape(len(senses), -1) if len(senses) else np.zeros((0, len(c)))
    b = np.asarray(rhs, dtype=float)
    if A.shape[1] != len(c):
        raise ValueError("objective/constraint dimension mismatch")
    if not maximize:
        c = -c
    senses = list(senses)
    rows = [A[i].copy() for i in range(A.shape[0])]
    bs = list(b)
    if upper is not None:
        for j, ub in enumerate(upper):
            if ub is not None and np.isfinite(ub):
                row = np.zeros(len(c))
                row[j] = 1.0
                rows.append(row)
                senses.append("<=")
                bs.append(float(ub))
    m, n = len(rows), len(c)
    # orient every row so the rhs is nonnegative
    for i in range(m):
        if bs[i] < 0:
            rows[i] = -rows[i]
            bs[i] = -bs[i]
            senses[i] = {"<=": ">=", ">=": "<=", "=": "="}[senses[i]]
    n_slack = sum(1 for s in senses if s in ("<=", ">="))
    n_art = sum(1 for s in senses if s in ("=", ">="))
    ncols = n + n_slack + n_art
    T = np.zeros((m + 1, ncols + 1))
    basis = [-1] * m
    art_cols = []
    si = n
    ai = n + n_slack
    for i, (row, sense, bi) in enumerate(zip(rows, senses, bs)):
        T[i, :n] = row
        T[i, -1] = bi
        if sense == "<=":
            T[i, si] = 1.0
            basis[i] = si
            si += 1
        elif sense == ">=":
            T[i, si] = -1.0
            si += 1
            T[i, ai] = 1.0
            basis[i] = ai
            art_cols.append(ai)
            ai += 1
        else:
            T[i, ai] = 1.0
            basis[i] = ai
            art_cols.append(ai)
            ai += 1
    art_set = set(art_cols)
    allowed = np.ones(ncols, dtype=bool)
    if art_cols:
        # phase 1: minimize artificial mass
        for i in range(m):
            if basis[i] in art_set:
                T[-1, :-1] -= T[i, :-1]
                T[-1, -1] -= T[i, -1]
        for j in art_cols:
            T[-1, j] = 0.0
        _run_simplex(T, basis, allowed)
        if T[-1, -1] < -1e-7:
            return SimplexSolution("infeasible", None, None)
        # force leftover artificial basics out (or drop redundant rows)
        drop = []
        for r in range(m):
            if basis[r] in art_set:
                piv = next((j for j in range(n + n_slack) if abs(T[r, j]) > _TOL), None)
                if piv is None:
                    drop.append(r)
                else:
                    _pivot(T, basis, r, piv)
        if drop:
            keep = [r for r in range(m) if r not in drop] + [m]
            T = T[keep]
            basis = [basis[r] for r in range(m) if r not in drop]
            m = len(basis)
        allowed[list(art_set)] = False
    # phase 2 objective row: reduced costs for the real objective
    full_c = np.zeros(ncols)
    full_c[:n] = c
    T[-1, :-1] = -full_c
    T[-1, -1] = 0.0
    for r in range(m):
        if full_c[basis[r]] != 0.0:
            T[-1, :-1] += full_c[basis[r]] * T[r, :-1]
            T[-1, -1] += full_c[basis[r]] * T[r, -1]
    status = _run_simplex(T, basis, allowed)
    if status == "unbounded":
        return SimplexSolution("unbounded", None, None)
    x = np.zeros(ncols)
    for r in range(m):
        x[basis[r]] = T[r, -1]
    obj = float(full_c @ x)
    if not maximize:
        obj = -obj
    return SimplexSolution("optimal", x[:n].copy(), obj)


# -- discretized ex-ante revenue maximization ---------------------------------


@dataclass(frozen=True)
class DiscreteTypeSpace:
    """Product law of discrete values and budgets for one agent.

    The linear model carries a single infinite sentinel budget so the same
    LP covers all three models.
    """

    values: np.ndarray
    value_probs: np.ndarray
    budgets: np.ndarray
    budget_probs: np.ndarray
    model: str

    def __post_init__(self):
        for name, vals, probs in (
            ("value", self.values, self.value_probs),
            ("budget", self.budgets, self.budget_probs),
        ):
            if len(vals) != len(probs) or len(vals) == 0:
                raise ValueError(f"{name} axis needs matching nonempty arrays")
            if np.any(np.diff(vals) <= 0):
                raise ValueError(f"{name}s must be strictly increasing")
            if np.any(probs <= 0) or abs(probs.sum() - 1.0) > PROB_ATOL:
                raise ValueError(f"{name} masses must be positive and sum to 1")
        if self.model not in ("linear", "public-budget", "private-budget"):
            raise ValueError(f"unsupported model {self.model!r}")
        if self.model == "linear" and not (len(self.budgets) == 1 and math.isinf(self.budgets[0])):
            raise ValueError("linear spaces use the single +inf budget sentinel")

    @classmethod
    def linear(cls, F: Distribution, n_values: int) -> "DiscreteTypeSpace":
        from .distributions import discretize

        d = F if F.kind == "discrete" else discretize(F, n_values)
        return cls(d.params["values"], d.params["probs"], np.array([math.inf]), np.array([1.0]), "linear")

    @classmethod
    def public_budget(cls, F: Distribution, n_values: int, w: float) -> "DiscreteTypeSpace":
        from .distributions import discretize

        d = F if F.kind == "discrete" else discretize(F, n_values)
        return cls(d.params["values"], d.params["probs"], np.array([float(w)]), np.array([1.0]), "public-budget")

    @classmethod
    def private_budget(cls, F: Distribution, n_values: int, G: Distribution, n_budgets: int) -> "DiscreteTypeSpace":
        from .distributions import discretize

        dv = F if F.kind == "discrete" else discretize(F, n_values)
        dw = G if G.kind == "discrete" else discretize(G, n_budgets)
        return cls(dv.params["values"], dv.params["probs"], dw.params["values"], dw.params["probs"], "private-budget")


@dataclass(frozen=True)
class LpSolution:
    """Optimal mechanism of the value-IC relaxation at one ex-ante mass.

    Per budget level the mechanism is a convex nondecreasing menu: each
    allocation slab between adjacent support values carries a marginal
    price inside the local incentive bracket [v_{k-1}, v_k], so payment
    increments obey v_{k-1} dx <= dp <= v_k dx and the level's top payment
    respects the budget.  A zero-rate bottom slab covers giveaways, which
    keeps the exact-mass constraint feasible for every q <= 1.  For
    private budgets the objective upper-bounds the true ex-ante revenue
    because incentive constraints across budget levels are dropped.
    """

    allocations: np.ndarray    # x[i, j] in [0, 1], nondecreasing in i
    payments: np.ndarray       # p[i, j] <= w_j, monotone in i
    objective: float
    status: str
    ex_ante_mass: float

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("i,j,x,p\n")
            m, n = self.allocations.shape
            for i in range(m):
                for j in range(n):
                    fh.write(f"{i},{j},{self.allocations[i, j]:.17g},{self.payments[i, j]:.17g}\n")


def ex_ante_revenue_lp(space: DiscreteTypeSpace, q: float) -> LpSolution:
    """Max expected revenue with ex-ante sale probability exactly q.

    Variables are per-level slab allocations split at the incentive
    bracket's ends: d_lo[k, j] sells to values >= v_k at marginal price
    v_{k-1} (v_0 = 0), d_hi[k, j] at marginal price v_k.  Mixing the two
    spans every menu rate in the bracket, and in particular every posted
    price, so the LP dominates price posting exactly.  Payments are
    monotone in value, hence one budget cap per level suffices.
    """
    if q < 0:
        raise ValueError("ex-ante mass must be nonnegative")
    m, n = len(space.values), len(space.budgets)
    if q > 1:
        return LpSolution(np.zeros((m, n)), np.zeros((m, n)), math.nan, "infeasible", q)
    v = space.values
    f = space.value_probs
    g = space.budget_probs
    s = np.cumsum(f[::-1])[::-1]   # s_k = mass of values >= v_k
    v_lo = np.concatenate([[0.0], v[:-1]])
    # columns: for each level j, lo-rate slabs then hi-rate slabs
    nvar = 2 * m * n

    def lo(k, j):
        return j * 2 * m + k

    def hi(k, j):
        return j * 2 * m + m + k

    c = np.zeros(nvar)
    for j in range(n):
        c[j * 2 * m : j * 2 * m + m] = g[j] * s * v_lo
        c[j * 2 * m + m : (j + 1) * 2 * m] = g[j] * s * v
    rows, senses, rhs = [], [], []
    for j in range(n):  # unit demand per level
        row = np.zeros(nvar)
        row[j * 2 * m : (j + 1) * 2 * m] = 1.0
        rows.append(row)
        senses.append("<=")
        rhs.append(1.0)
    for j in range(n):  # budget cap on the level's top payment
        if math.isinf(space.budgets[j]):
            continue
        row = np.zeros(nvar)
        row[j * 2 * m : j * 2 * m + m] = v_lo
        row[j * 2 * m + m : (j + 1) * 2 * m] = v
        rows.append(row)
        senses.append("<=")
        rhs.append(float(space.budgets[j]))
    row = np.zeros(nvar)  # exact ex-ante mass
    for j in range(n):
        row[j * 2 * m : j * 2 * m + m] = g[j] * s
        row[j * 2 * m + m : (j + 1) * 2 * m] = g[j] * s
    rows.append(row)
    senses.append("=")
    rhs.append(float(q))
    sol = simplex_solve(c, rows, senses, rhs)
    if sol.status != "optimal":
        return LpSolution(np.zeros((m, n)), np.zeros((m, n)), math.nan, sol.status, q)
    d_lo = np.empty((m, n))
    d_hi = np.empty((m, n))
    for j in range(n):
        d_lo[:, j] = sol.x[j * 2 * m : j * 2 * m + m]
        d_hi[:, j] = sol.x[j * 2 * m + m : (j + 1) * 2 * m]
    d_lo = np.clip(d_lo, 0.0, None)
    d_hi = np.clip(d_hi, 0.0, None)
    x = np.minimum(np.cumsum(d_lo + d_hi, axis=0), 1.0)
    p = np.cumsum(d_lo * v_lo[:, None] + d_hi * v[:, None], axis=0)
    return LpSolution(x, p, float(sol.objective), "optimal", q)


def ex_ante_curve_oracle(space: DiscreteTypeSpace, grid: int = 33) -> RevenueCurve:
    """Upper-bound ex-ante revenue curve sampled on a uniform quantile grid."""
    if grid < 8:
        raise ValueError("grid must be at least 8")
    qs = np.linspace(0.0, 1.0, grid)
    vals = []
    for q in qs:
        sol = ex_ante_revenue_lp(space, float(q))
        if sol.status != "optimal":
            raise RuntimeError(f"ex-ante LP at q={q} returned {sol.status}")
        vals.append(sol.objective)
    return RevenueCurve(qs, vals, name="Rbar")


def brute_force_ear(curves: Sequence[RevenueCurve], step: float = 0.01) -> float:
    """Grid enumeration of max sum_i curve_i(q_i) with sum q_i <= 1.

    Within Lipschitz * step of the optimum; restricted to at most three
    curves on purpose, to stay a dumb cross-check.
    """
    if len(curves) == 0 or len(curves) > 3:
        raise ValueError("brute force handles 1 to 3 curves")
    if step > 0.01 + 1e-12:
        raise ValueError("step must be at most 0.01")
    grid = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)
    G = len(grid)
    vals = [np.asarray(c.eval(grid)) for c in curves]
    if len(curves) == 1:
        return float(np.max(vals[0]))
    # best_k(r) = max over grid points <= r, exact on the grid
    best_last = np.maximum.accumulate(vals[-1])
    if len(curves) == 2:
        totals = vals[0] + best_last[::-1]
        return float(np.max(totals))
    best = -np.inf
    for i in range(G):
        rem = G - 1 - i
        inner = vals[1][: rem + 1] + best_last[rem::-1]
        best = max(best, vals[0][i] + float(np.max(inner)))
    return float(best)
