"""Offer curves and piecewise-linear revenue curves in quantile space.

The offer curve q(p) is the ex-ante sale probability induced by posting a
per-unit price p; posting revenue is always p*q(p).  Sweeping the price
axis and reading (q(p), p*q(p)) generates the price-posting revenue curve
P.  Ex-ante revenue curves R and concave hulls H live in the same
piecewise-linear representation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .distributions import Distribution

CONCAVITY_SLOPE_TOL = 1e-10
AGENT_MODELS = ("linear", "public-budget", "private-budget", "capacitated", "synthetic")


def _upper_hull_indices(qs: np.ndarray, vals: np.ndarray) -> list[int]:
    """Knot indices of the least concave majorant (upper convex hull)."""
    idx = [0]
    for i in range(1, len(qs)):
        while len(idx) >= 2:
            i0, i1 = idx[-2], idx[-1]
            cross = (qs[i1] - qs[i0]) * (vals[i] - vals[i0]) - (qs[i] - qs[i0]) * (vals[i1] - vals[i0])
            if cross >= 0.0:
                idx.pop()
            else:
                break
        idx.append(i)
    return idx


@dataclass(frozen=True)
class Agent:
    """A buyer: a utility-model tag plus the distributions that define it.

    synthetic agents carry their price-posting and ex-ante curves directly
    (knot lists) instead of a value distribution.
    """

    model: str
    values: Distribution | None = None
    budget: float | None = None            # public-budget w
    budgets: Distribution | None = None    # private-budget G, independent of F
    capacity: float | None = None          # capacitated C
    p_knots: tuple = ()
    r_knots: tuple = ()
    id: str = "agent"

    def __post_init__(self):
        if self.model not in AGENT_MODELS:
            raise ValueError(f"unknown agent model {self.model!r}")
        if self.model == "synthetic":
            p = synthetic_curve(self.p_knots)
            r = synthetic_curve(self.r_knots)
            qs = np.unique(np.concatenate([p.qs, r.qs]))
            if np.any(r.eval(qs) < p.eval(qs) - 1e-9):
                raise ValueError("synthetic agent needs R >= P pointwise")
            return
        if self.values is None:
            raise ValueError(f"{self.model} agent needs a value distribution")
        if self.model == "public-budget" and (self.budget is None or self.budget < 0):
            raise ValueError("public-budget agent needs a nonnegative budget")
        if self.model == "private-budget" and self.budgets is None:
            raise ValueError("private-budget agent needs a budget distribution")
        if self.model == "capacitated":
            if self.capacity is None or self.capacity <= 0:
                raise ValueError("capacitated agent needs a positive capacity")
            if self.capacity > self.values.hi:
                raise ValueError("capacity must not exceed the top of the value support")

    @property
    def hval(self) -> float:
        """Top of the value support."""
        if self.model == "synthetic":
            raise ValueError("synthetic agents carry curves, not value supports")
        return self.values.hi

    def price_curve(self) -> "RevenueCurve":
        if self.model == "synthetic":
            return synthetic_curve(self.p_knots)
        return price_posting_curve(offer_curve(self))

    def ex_ante_curve_knots(self) -> "RevenueCurve":
        if self.model != "synthetic":
            raise ValueError("only synthetic agents carry an explicit ex-ante curve")
        return synthetic_curve(self.r_knots)


@dataclass(frozen=True)
class OfferCurve:
    """price -> ex-ante sale probability, left-continuous and nonincreasing."""

    fn: Callable[[np.ndarray], np.ndarray]
    knot_prices: tuple
    agent_id: str = "agent"
    price_cap: float = np.inf   # q(p) = 0 beyond this price

    def eval(self, p):
        pv = np.asarray(p, dtype=float)
        out = self.fn(pv)
        return float(out) if np.ndim(p) == 0 else out

    def revenue(self, p):
        pv = np.asarray(p, dtype=float)
        out = pv * self.fn(pv)
        return float(out) if np.ndim(p) == 0 else out


class RevenueCurve:
    """Piecewise-linear function on [0, 1] given by strictly increasing knots.

    Houses the price-posting curve P, ex-ante curves R, concave hulls, and
    the Lagrangian curve (which may carry a negative intercept at q = 0).
    """

    __slots__ = ("qs", "values", "concave", "offer", "name")

    def __init__(self, qs, values, offer: OfferCurve | None = None, name: str = "curve"):
        qs = np.asarray(qs, dtype=float)
        values = np.asarray(values, dtype=float)
        if qs.ndim != 1 or qs.shape != values.shape or len(qs) < 2:
            raise ValueError("need matching 1-d knot arrays with at least two knots")
        if abs(qs[0]) > 1e-12 or abs(qs[-1] - 1.0) > 1e-12:
            raise ValueError("knots must span quantiles 0 to 1")
        if np.any(np.diff(qs) <= 0):
            raise ValueError("knot quantiles must be strictly increasing")
        qs = qs.copy()
        qs[0], qs[-1] = 0.0, 1.0
        values = values.copy()
        qs.setflags(write=False)   # curves are immutable and shared freely
        values.setflags(write=False)
        self.qs = qs
        self.values = values
        self.offer = offer
        self.name = name
        # concave iff the curve coincides with its own concave majorant
        # (immune to the slope noise of near-duplicate knots)
        hull_idx = _upper_hull_indices(qs, values)
        hull_vals = np.interp(qs, qs[hull_idx], values[hull_idx])
        gap = float(np.max(hull_vals - values))
        self.concave = gap <= CONCAVITY_SLOPE_TOL * max(1.0, float(np.max(np.abs(values))))

    def eval(self, q):
        qv = np.asarray(q, dtype=float)
        out = np.interp(np.clip(qv, 0.0, 1.0), self.qs, self.values)
        return float(out) if np.ndim(q) == 0 else out

    def slope(self, q):
        """Right derivative (left derivative at q = 1)."""
        qv = np.atleast_1d(np.asarray(q, dtype=float))
        slopes = np.diff(self.values) / np.diff(self.qs)
        idx = np.searchsorted(self.qs, qv, side="right") - 1
        idx = np.clip(idx, 0, len(slopes) - 1)
        out = slopes[idx]
        return float(out[0]) if np.ndim(q) == 0 else out

    def max_value(self) -> float:
        return float(np.max(self.values))

    def argmax_quantile(self) -> float:
        """Quantile of the maximum value; ties broken toward the largest q."""
        vmax = self.max_value()
        ties = np.nonzero(self.values >= vmax - 1e-12 * max(1.0, abs(vmax)))[0]
        return float(self.qs[ties[-1]])

    def to_csv(self, path, name: str | None = None):
        label = name or self.name
        with open(path, "w") as fh:
            fh.write(f"q,{label}\n")
            for q, v in zip(self.qs, self.values):
                fh.write(f"{q:.17g},{v:.17g}\n")

    def __repr__(self):
        return f"RevenueCurve({self.name}, {len(self.qs)} knots, concave={self.concave})"


class LagrangianCurve(NamedTuple):
    curve: RevenueCurve      # the penalized posting curve sampled in quantile space
    q_dagger: float          # smallest root of curve(q) = q * curve'(q)
    hull: RevenueCurve       # linear on [0, q_dagger], equal to the curve beyond


def synthetic_curve(knots: Sequence[tuple[float, float]]) -> RevenueCurve:
    """Curve from explicit (quantile, value) knots; validates monotone q."""
    if len(knots) < 2:
        raise ValueError("need at least two knots")
    qs = [k[0] for k in knots]
    vals = [k[1] for k in knots]
    if any(q < 0 or q > 1 for q in qs):
        raise ValueError("knot quantiles must lie in [0, 1]")
    if any(b <= a for a, b in zip(qs, qs[1:])):
        raise ValueError("knot quantiles must be strictly increasing")
    return RevenueCurve(qs, vals, name="synthetic")


# -- offer curves -------------------------------------------------------------


def offer_curve(agent: Agent) -> OfferCurve:
    """The sale-probability map induced by the agent's utility model.

    linear and capacitated buyers take the item iff value >= price; a
    public-budget buyer caps her lottery at w/p; a private-budget buyer
    contributes E[min(w, p)]/p of a unit, which is exact for how much the
    budget lets each type buy.  Price 0 always sells surely.
    """
    if agent.model == "synthetic":
        raise ValueError("synthetic agents have no offer curve; they carry P directly")
    F = agent.values
    if agent.model in ("linear", "capacitated"):
        fn = lambda p: np.asarray(F.survival_left(p))
    elif agent.model == "public-budget":
        w = float(agent.budget)

        def fn(p, w=w):
            p = np.asarray(p, dtype=float)
            take = np.where(p <= w, 1.0, np.divide(w, p, out=np.ones_like(p), where=p > 0))
            return np.asarray(F.survival_left(p)) * take

    else:  # private-budget
        G = agent.budgets

        def fn(p, G=G):
            p = np.asarray(p, dtype=float)
            delta = np.asarray(G.expected_min(p))
            take = np.divide(delta, p, out=np.ones_like(p), where=p > 0)
            return np.asarray(F.survival_left(p)) * np.where(p > 0, take, 1.0)

    knots = {0.0, F.lo, F.hi}
    knots.update(a for a, _ in F.atoms)
    if agent.model == "public-budget":
        knots.add(float(agent.budget))
    if agent.model == "private-budget":
        G = agent.budgets
        knots.update((G.lo, G.hi))
        knots.update(a for a, _ in G.atoms)
    knots = tuple(sorted(k for k in knots if np.isfinite(k) and k >= 0))
    return OfferCurve(fn=fn, knot_prices=knots, agent_id=agent.id, price_cap=F.hi)


def _price_grid(offer: OfferCurve, grid: int) -> np.ndarray:
    """Candidate prices: log-spaced sweep, quantile-spread prices, knots.

    The log grid concentrates near the support ends where revenue curves
    bend fastest; the quantile-spread prices keep the knot spacing of the
    resulting curve uniform in q, which the sweep alone does not guarantee.
    """
    cap = offer.price_cap
    prices = {0.0, cap, cap * (1.0 + 1e-9)}
    for k in offer.knot_prices:
        prices.update((k, k * (1.0 - 1e-9), k * (1.0 + 1e-9)))
    # quantile-spread: invert the offer on a uniform q grid by bisection
    qs = np.linspace(1e-6, 1.0 - 1e-6, grid // 2)
    lo_b = np.zeros_like(qs)
    hi_b = np.full_like(qs, cap * (1.0 + 1e-9) if cap > 0 else 1.0)
    for _ in range(40):
        mid = 0.5 * (lo_b + hi_b)
        accept = offer.eval(mid) >= qs
        lo_b = np.where(accept, mid, lo_b)
        hi_b = np.where(accept, hi_b, mid)
    prices.update(lo_b.tolist())
    # log-spaced sweep between the extreme swept prices
    positive = [p for p in prices if p > 0]
    lo = max(min(positive, default=cap * 1e-9), cap * 1e-12)
    if cap > 0 and 0 < lo < cap:
        prices.update(np.geomspace(lo, cap, grid // 2).tolist())
    arr = np.array(sorted(p for p in prices if np.isfinite(p) and p >= 0.0))
    return arr


def price_posting_curve(offer: OfferCurve, grid: int = 4096) -> RevenueCurve:
    """Sweep prices, collect (q(p), p*q(p)), and keep the best revenue per q.

    Duplicated quantiles keep the max revenue: P(q) is a supremum over
    prices that reach q.  Gaps between achieved quantiles are bridged by
    linear interpolation, which is what randomizing over the two
    neighbouring prices earns.
    """
    if grid < 64:
        raise ValueError("grid must be at least 64")
    prices = _price_grid(offer, grid)
    q = np.asarray(offer.eval(prices))
    rev = prices * q
    q = np.concatenate([q, [0.0, 1.0]])
    rev = np.concatenate([rev, [0.0, float(offer.eval(0.0)) * 0.0]])
    order = np.argsort(q, kind="stable")
    q, rev = q[order], rev[order]
    # collapse duplicate quantiles onto the max revenue
    keep_q, keep_v = [q[0]], [rev[0]]
    for qi, vi in zip(q[1:], rev[1:]):
        if qi - keep_q[-1] <= 1e-15:
            keep_v[-1] = max(keep_v[-1], vi)
        else:
            keep_q.append(qi)
            keep_v.append(vi)
    keep_q[0], keep_v[0] = 0.0, 0.0
    if keep_q[-1] < 1.0:
        keep_q.append(1.0)
        keep_v.append(keep_v[-1])
    return RevenueCurve(keep_q, keep_v, offer=offer, name="P")


# -- hulls and price/quantile maps --------------------------------------------


def concave_hull(curve: RevenueCurve) -> RevenueCurve:
    """Least concave majorant; knots are a subset of the input knots."""
    hull_idx = _upper_hull_indices(curve.qs, curve.values)
    # the hull is an ex-ante object: price lookups use its chords, never the
    # generating offer, so no offer backpointer is carried over
    return RevenueCurve(curve.qs[hull_idx], curve.values[hull_idx], name=f"hull({curve.name})")


def quantile_at_price(p: float, curve: RevenueCurve) -> float:
    """Largest q whose chord from the origin has slope p.

    Offer-derived curves delegate to the generating offer so non-concave
    shapes resolve the way the mechanism actually sells.  Flat-revenue
    stretches return the largest quantile.
    """
    if curve.offer is not None:
        return float(curve.offer.eval(p))
    p = float(p)
    qs, vals = curve.qs, curve.values
    g = vals - p * qs
    tol = 1e-12 * max(1.0, float(np.max(np.abs(vals))))
    nonneg = np.nonzero(g >= -tol)[0]
    # chords are taken from the origin; the q = 0 knot itself does not count
    nonneg = nonneg[qs[nonneg] > 0.0]
    if len(nonneg) == 0:
        return 0.0
    k = int(nonneg[-1])
    if k == len(qs) - 1:
        return 1.0
    g0, g1 = g[k], g[k + 1]
    if g1 >= -tol:  # numerically flat; stay at the knot
        return float(qs[k])
    t = g0 / (g0 - g1)
    return float(qs[k] + t * (qs[k + 1] - qs[k]))


def quantiles_at_prices(prices, curve: RevenueCurve) -> np.ndarray:
    """Vectorized quantile_at_price over an array of prices."""
    prices = np.atleast_1d(np.asarray(prices, dtype=float))
    if curve.offer is not None:
        return np.asarray(curve.offer.eval(prices))
    qs, vals = curve.qs, curve.values
    K = len(qs)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(vals))))
    out = np.zeros(len(prices))
    chunk = max(1, int(2_000_000 // K))
    for start in range(0, len(prices), chunk):
        p = prices[start : start + chunk]
        g = vals[None, :] - p[:, None] * qs[None, :]
        ok = g >= -tol
        ok[:, qs <= 0.0] = False
        has = ok.any(axis=1)
        last = K - 1 - np.argmax(ok[:, ::-1], axis=1)
        res = np.zeros(len(p))
        at_end = has & (last == K - 1)
        res[at_end] = 1.0
        inner = has & (last < K - 1)
        if np.any(inner):
            k = last[inner]
            g0 = g[inner, k]
            g1 = g[inner, k + 1]
            flat = g1 >= -tol
            t = np.where(flat, 0.0, g0 / np.where(flat, 1.0, g0 - g1))
            res[inner] = qs[k] + t * (qs[k + 1] - qs[k])
        out[start : start + chunk] = res
    return out


def curve_eval(curve: RevenueCurve, q):
    return curve.eval(q)


def curve_slope(curve: RevenueCurve, q):
    return curve.slope(q)


# -- Lagrangian price-posting curve -------------------------------------------


def lagrangian_curve(F: Distribution, lam: float, grid: int = 4096) -> LagrangianCurve:
    """Price-posting curve under a multiplier penalty on the top type's price.

    The penalized curve is q*V(q) - lam*V(q).  Its concave hull is linear
    out to the smallest q with curve(q) = q * curve'(q) and coincides with
    the curve beyond, which is the ironing used for budgeted ex-ante
    optima.  Derivatives are one-sided differences with step 1e-6.
    """
    if lam < 0:
        raise ValueError("multiplier must be nonnegative")
    h = 1e-6
    qs = np.linspace(0.0, 1.0, grid)

    def plam(q):
        q = np.asarray(q, dtype=float)
        return (q - lam) * np.asarray(F.inverse_demand(np.clip(q, 0.0, 1.0)))

    vals = plam(qs)
    curve = RevenueCurve(qs, vals, name="P_lambda")
    if lam == 0.0:
        return LagrangianCurve(curve, 0.0, concave_hull(curve))

    def phi(q):
        return plam(q) - q * (plam(np.minimum(q + h, 1.0)) - plam(q)) / h

    interior = qs[(qs > h) & (qs < 1.0 - h)]
    signs = phi(interior)
    idx = np.nonzero(signs >= 0.0)[0]
    if len(idx) == 0:
        warnings.warn("penalized posting curve is nonpositive on (0,1); ironing spans everything")
        q_dag = 1.0
    elif idx[0] == 0:
        q_dag = float(interior[0])
    else:
        lo_q, hi_q = float(interior[idx[0] - 1]), float(interior[idx[0]])
        for _ in range(80):
            mid = 0.5 * (lo_q + hi_q)
            if phi(np.asarray(mid)) >= 0.0:
                hi_q = mid
            else:
                lo_q = mid
        q_dag = hi_q
    slope_dag = float((plam(np.asarray(min(q_dag + h, 1.0))) - plam(np.asarray(q_dag))) / h)
    tail = qs[qs > q_dag]
    hull_q = np.concatenate([[0.0, q_dag], tail])
    hull_v = np.concatenate([[0.0, q_dag * slope_dag], plam(tail)])
    if len(tail) == 0 or hull_q[-1] < 1.0:
        hull_q = np.append(hull_q, 1.0)
        hull_v = np.append(hull_v, plam(np.asarray(1.0)))
    keep = np.concatenate([[True], np.diff(hull_q) > 1e-15])
    hull = RevenueCurve(hull_q[keep], hull_v[keep], name="hull(P_lambda)")
    return LagrangianCurve(curve, q_dag, hull)
