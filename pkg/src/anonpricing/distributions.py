"""Evaluable value and budget distributions.

One class covers the whole palette (uniform, equal-revenue, truncated
exponential, point mass, finite discrete, piecewise-linear CDF).  Instances
are immutable after construction; every evaluator is pure and accepts
scalars or numpy arrays.

Conventions baked in here and relied on everywhere else:
  - quantile q of a value v is the mass of stronger types, q = 1 - F(v);
  - a buyer with value exactly p accepts price p, so the sale probability
    at price p is 1 - F(p-) (left limit), making q(p) left-continuous;
  - the inverse demand V(q) = sup{v : 1 - F(v-) >= q}, so atoms map whole
    quantile intervals to the atom's value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

PROB_ATOL = 1e-12


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


class Distribution:
    """A probability law on a bounded interval, possibly with atoms."""

    def __init__(self, kind: str, **params):
        self.kind = kind
        self.params = dict(params)
        self._validate()

    # -- constructors ---------------------------------------------------

    @classmethod
    def uniform(cls, a: float, b: float) -> "Distribution":
        return cls("uniform", a=float(a), b=float(b))

    @classmethod
    def equal_revenue(cls, h: float) -> "Distribution":
        """F(v) = 1 - 1/v on [1, h) with an atom of mass 1/h at h."""
        return cls("equal-revenue", h=float(h))

    @classmethod
    def exponential(cls, rate: float, hi: float | None = None) -> "Distribution":
        """Exponential(rate) truncated by an atom at hi (default 20/rate).

        Below hi the hazard is the constant rate; the leftover tail mass
        exp(-rate*hi) sits at hi so the support stays bounded.
        """
        rate = float(rate)
        if hi is None:
            hi = 20.0 / rate
        return cls("exponential", rate=rate, hi=float(hi))

    @classmethod
    def point_mass(cls, v: float) -> "Distribution":
        return cls("point-mass", v=float(v))

    @classmethod
    def discrete(cls, values: Sequence[float], probs: Sequence[float]) -> "Distribution":
        values = np.asarray(values, dtype=float)
        probs = np.asarray(probs, dtype=float)
        order = np.argsort(values)
        return cls("discrete", values=values[order], probs=probs[order])

    @classmethod
    def piecewise_linear_cdf(cls, knots: Sequence[tuple[float, float]]) -> "Distribution":
        """Continuous CDF interpolating (x_k, F_k) knots; F_0=0, F_K=1."""
        xs = np.asarray([k[0] for k in knots], dtype=float)
        fs = np.asarray([k[1] for k in knots], dtype=float)
        return cls("piecewise-linear-cdf", xs=xs, fs=fs)

    # -- validation ------------------------------------------------------

    def _validate(self):
        k, p = self.kind, self.params
        if k == "uniform":
            if not p["a"] < p["b"]:
                raise ValueError("uniform needs a < b (use point_mass for degenerate support)")
        elif k == "equal-revenue":
            if p["h"] <= 1.0:
                raise ValueError("equal-revenue needs h > 1")
        elif k == "exponential":
            if p["rate"] <= 0 or p["hi"] <= 0:
                raise ValueError("exponential needs positive rate and truncation point")
        elif k == "point-mass":
            if not math.isfinite(p["v"]):
                raise ValueError("point mass must be finite")
        elif k == "discrete":
            v, f = p["values"], p["probs"]
            if len(v) != len(f) or len(v) == 0:
                raise ValueError("discrete needs matching nonempty values/probs")
            if np.any(f <= 0):
                raise ValueError("discrete probabilities must be positive")
            if abs(f.sum() - 1.0) > PROB_ATOL:
                raise ValueError(f"discrete probabilities sum to {f.sum()}, not 1")
            if len(np.unique(v)) != len(v):
                raise ValueError("discrete values must be distinct")
        elif k == "piecewise-linear-cdf":
            xs, fs = p["xs"], p["fs"]
            if len(xs) < 2 or np.any(np.diff(xs) <= 0):
                raise ValueError("piecewise CDF needs strictly increasing x knots")
            if abs(fs[0]) > PROB_ATOL or abs(fs[-1] - 1.0) > PROB_ATOL:
                raise ValueError("piecewise CDF must run from 0 to 1")
            if np.any(np.diff(fs) < -PROB_ATOL):
                raise ValueError("piecewise CDF must be nondecreasing")
        else:
            raise ValueError(f"unknown distribution kind {k!r}")

    # -- support and atoms -------------------------------------------------

    @property
    def lo(self) -> float:
        k, p = self.kind, self.params
        if k == "uniform":
            return p["a"]
        if k == "equal-revenue":
            return 1.0
        if k == "exponential":
            return 0.0
        if k == "point-mass":
            return p["v"]
        if k == "discrete":
            return float(p["values"][0])
        return float(p["xs"][0])

    @property
    def hi(self) -> float:
        k, p = self.kind, self.params
        if k == "uniform":
            return p["b"]
        if k == "equal-revenue":
            return p["h"]
        if k == "exponential":
            return p["hi"]
        if k == "point-mass":
            return p["v"]
        if k == "discrete":
            return float(p["values"][-1])
        return float(p["xs"][-1])

    @property
    def atoms(self) -> list[tuple[float, float]]:
        """(value, mass) pairs of the atomic part, ascending in value."""
        k, p = self.kind, self.params
        if k == "equal-revenue":
            return [(p["h"], 1.0 / p["h"])]
        if k == "exponential":
            return [(p["hi"], math.exp(-p["rate"] * p["hi"]))]
        if k == "point-mass":
            return [(p["v"], 1.0)]
        if k == "discrete":
            return list(zip(p["values"].tolist(), p["probs"].tolist()))
        return []

    # -- evaluators --------------------------------------------------------

    def cdf(self, x):
        """Right-continuous CDF."""
        xv, scalar = _as_array(x)
        k, p = self.kind, self.params
        if k == "uniform":
            out = np.clip((xv - p["a"]) / (p["b"] - p["a"]), 0.0, 1.0)
        elif k == "equal-revenue":
            out = np.where(xv < 1.0, 0.0, np.where(xv >= p["h"], 1.0, 1.0 - 1.0 / np.maximum(xv, 1.0)))
        elif k == "exponential":
            out = np.where(xv < 0.0, 0.0, np.where(xv >= p["hi"], 1.0, 1.0 - np.exp(-p["rate"] * np.maximum(xv, 0.0))))
        elif k == "point-mass":
            out = np.where(xv >= p["v"], 1.0, 0.0)
        elif k == "discrete":
            idx = np.searchsorted(p["values"], xv, side="right")
            cum = np.concatenate([[0.0], np.cumsum(p["probs"])])
            out = cum[idx]
        else:
            out = np.interp(xv, p["xs"], p["fs"], left=0.0, right=1.0)
        return float(out) if scalar else out

    def cdf_left(self, x):
        """Left limit F(x-); equals cdf everywhere but at atoms."""
        xv, scalar = _as_array(x)
        k, p = self.kind, self.params
        if k == "equal-revenue":
            out = np.where(xv <= 1.0, 0.0, np.where(xv > p["h"], 1.0, 1.0 - 1.0 / np.maximum(xv, 1.0)))
        elif k == "exponential":
            out = np.where(xv <= 0.0, 0.0, np.where(xv > p["hi"], 1.0, 1.0 - np.exp(-p["rate"] * np.maximum(xv, 0.0))))
        elif k == "point-mass":
            out = np.where(xv > p["v"], 1.0, 0.0)
        elif k == "discrete":
            idx = np.searchsorted(p["values"], xv, side="left")
            cum = np.concatenate([[0.0], np.cumsum(p["probs"])])
            out = cum[idx]
        else:
            return self.cdf(x)
        return float(out) if scalar else out

    def survival_left(self, x):
        """Pr[X >= x] = 1 - F(x-): the mass that accepts price x."""
        xv, scalar = _as_array(x)
        out = 1.0 - np.asarray(self.cdf_left(xv))
        return float(out) if scalar else out

    def survival(self, x):
        """Pr[X > x] = 1 - F(x), in forms stable deep in the tail."""
        xv, scalar = _as_array(x)
        k, p = self.kind, self.params
        if k == "uniform":
            out = np.clip((p["b"] - xv) / (p["b"] - p["a"]), 0.0, 1.0)
        elif k == "equal-revenue":
            out = np.where(xv < 1.0, 1.0, np.where(xv >= p["h"], 0.0, 1.0 / np.maximum(xv, 1.0)))
        elif k == "exponential":
            out = np.where(xv < 0.0, 1.0, np.where(xv >= p["hi"], 0.0, np.exp(-p["rate"] * np.maximum(xv, 0.0))))
        else:
            out = 1.0 - np.asarray(self.cdf(xv))
        return float(out) if scalar else out

    def pdf(self, x):
        """Density of the continuous part (0 on atoms and off support)."""
        xv, scalar = _as_array(x)
        k, p = self.kind, self.params
        if k == "uniform":
            out = np.where((xv >= p["a"]) & (xv <= p["b"]), 1.0 / (p["b"] - p["a"]), 0.0)
        elif k == "equal-revenue":
            out = np.where((xv >= 1.0) & (xv < p["h"]), 1.0 / np.maximum(xv, 1.0) ** 2, 0.0)
        elif k == "exponential":
            out = np.where((xv >= 0.0) & (xv < p["hi"]), p["rate"] * np.exp(-p["rate"] * np.maximum(xv, 0.0)), 0.0)
        elif k in ("point-mass", "discrete"):
            out = np.zeros_like(xv)
        else:
            xs, fs = p["xs"], p["fs"]
            slopes = np.diff(fs) / np.diff(xs)
            idx = np.clip(np.searchsorted(xs, xv, side="right") - 1, 0, len(slopes) - 1)
            out = np.where((xv >= xs[0]) & (xv <= xs[-1]), slopes[idx], 0.0)
        return float(out) if scalar else out

    def inverse_demand(self, q):
        """V(q) = sup{v : 1 - F(v-) >= q}, nonincreasing, clamped to support."""
        qv, scalar = _as_array(q)
        qv = np.clip(qv, 0.0, 1.0)
        k, p = self.kind, self.params
        if k == "uniform":
            out = p["b"] - qv * (p["b"] - p["a"])
        elif k == "equal-revenue":
            out = np.where(qv <= 1.0 / p["h"], p["h"], 1.0 / np.maximum(qv, 1.0 / p["h"]))
        elif k == "exponential":
            atom = math.exp(-p["rate"] * p["hi"])
            with np.errstate(divide="ignore"):
                body = -np.log(np.maximum(qv, atom)) / p["rate"]
            out = np.where(qv <= atom, p["hi"], body)
        elif k == "point-mass":
            out = np.full_like(qv, p["v"])
        elif k == "discrete":
            # survival-left at v_i: s_i = sum_{j >= i} f_j, decreasing in i;
            # V(q) is the largest v_i with s_i >= q
            m = len(p["values"])
            s = np.concatenate([np.cumsum(p["probs"][::-1])[::-1], [0.0]])
            pos = np.searchsorted(s[::-1], qv, side="left")
            idx = np.clip(m - pos, 0, m - 1)
            out = p["values"][idx]
        else:
            xs, fs = p["xs"], p["fs"]
            target = 1.0 - qv
            # rightmost x with F(x) <= target (sup over flat CDF stretches)
            idx = np.searchsorted(fs, target, side="right")
            idx = np.clip(idx, 1, len(xs) - 1)
            f0, f1 = fs[idx - 1], fs[idx]
            x0, x1 = xs[idx - 1], xs[idx]
            with np.errstate(invalid="ignore", divide="ignore"):
                t = np.where(f1 > f0, (target - f0) / np.where(f1 > f0, f1 - f0, 1.0), 1.0)
            out = np.clip(x0 + np.clip(t, 0.0, 1.0) * (x1 - x0), xs[0], xs[-1])
            out = np.where(target >= 1.0, xs[-1], np.where(target <= 0.0, xs[0], out))
        return float(out) if scalar else out

    # -- moments -----------------------------------------------------------

    def expected_min(self, p):
        """E[min(X, p)]; closed forms per kind (X is nonnegative here)."""
        pv, scalar = _as_array(p)
        k, par = self.kind, self.params
        if k == "uniform":
            a, b = par["a"], par["b"]
            pc = np.clip(pv, a, b)
            # factored form avoids cancellation for p near a
            body = a + (pc - a) * (2.0 * b - a - pc) / (2.0 * (b - a))
            out = np.where(pv <= a, pv, body)
        elif k == "equal-revenue":
            h = par["h"]
            pc = np.clip(pv, 1.0, h)
            out = np.where(pv <= 1.0, pv, 1.0 + np.log(pc))
        elif k == "exponential":
            lam, hi = par["rate"], par["hi"]
            pc = np.clip(pv, 0.0, hi)
            out = -np.expm1(-lam * pc) / lam
            out = np.where(pv <= 0.0, np.maximum(pv, 0.0) * 0.0, out)
        elif k == "point-mass":
            out = np.minimum(pv, par["v"])
        elif k == "discrete":
            out = np.minimum(pv[..., None], par["values"]).dot(par["probs"])
        else:
            xs, fs = par["xs"], par["fs"]
            # integral of the survival function, exact on linear pieces
            surv = 1.0 - fs
            seg = np.concatenate([[0.0], np.cumsum(0.5 * (surv[1:] + surv[:-1]) * np.diff(xs))])

            def one(pt):
                if pt <= xs[0]:
                    return max(pt, 0.0)
                if pt >= xs[-1]:
                    return xs[0] + seg[-1]
                i = np.searchsorted(xs, pt, side="right") - 1
                s_at = 1.0 - np.interp(pt, xs, fs)
                partial = 0.5 * (surv[i] + s_at) * (pt - xs[i])
                return xs[0] + seg[i] + partial

            out = np.vectorize(one)(pv)
        return float(out) if scalar else np.asarray(out)

    def mean(self) -> float:
        return float(self.expected_min(self.hi))

    def exceed_mean_probability(self) -> float:
        """Pr[X >= E[X]]; at least 1/e for the MHR built-ins."""
        return float(self.survival_left(self.mean()))

    def __repr__(self):
        inner = ", ".join(f"{k}={v}" for k, v in self.params.items() if not isinstance(v, np.ndarray))
        return f"Distribution.{self.kind.replace('-', '_')}({inner})"


# The two roles share the evaluator palette; the aliases keep signatures
# readable at call sites.
ValueDistribution = Distribution
BudgetDistribution = Distribution


# -- free-function forms of the evaluators ---------------------------------


def cdf(d: Distribution, x):
    return d.cdf(x)


def inverse_demand(d: Distribution, q):
    return d.inverse_demand(q)


def exceed_mean_probability(d: Distribution) -> float:
    return d.exceed_mean_probability()


# -- diagnostics ------------------------------------------------------------


@dataclass(frozen=True)
class RegularityReport:
    regular: bool
    max_violation: float  # max positive second difference of q*V(q), relative
    grid_size: int


@dataclass(frozen=True)
class MhrReport:
    mhr: bool
    max_violation: float  # worst hazard decrease, relative to the max hazard
    indeterminate: int    # grid points with zero density inside the support
    grid_size: int


REGULARITY_RTOL = 1e-8
MHR_RTOL = 1e-8


def regularity_report(d: Distribution, grid_size: int = 1024) -> RegularityReport:
    """Concavity check of q*V(q) sampled on a uniform quantile grid.

    Regular iff the largest positive second difference is at most 1e-8 of
    the curve's maximum.  Support gaps (discrete laws) surface as downward
    jumps in q*V(q) and fail the test; atoms are fine because V plateaus.
    """
    if grid_size < 16:
        raise ValueError("grid_size must be at least 16")
    if d.hi <= d.lo:
        return RegularityReport(True, 0.0, grid_size)
    q = np.linspace(0.0, 1.0, grid_size)
    y = q * np.asarray(d.inverse_demand(q))
    scale = float(np.max(np.abs(y)))
    if scale == 0.0:
        return RegularityReport(True, 0.0, grid_size)
    second = y[2:] - 2.0 * y[1:-1] + y[:-2]
    viol = float(max(0.0, np.max(second))) / scale
    return RegularityReport(viol <= REGULARITY_RTOL, viol, grid_size)


def mhr_report(d: Distribution, grid_size: int = 1024) -> MhrReport:
    """Hazard-rate monotonicity on a value grid over the continuous support."""
    if grid_size < 16:
        raise ValueError("grid_size must be at least 16")
    lo, hi = d.lo, d.hi
    if hi <= lo:
        return MhrReport(True, 0.0, 0, grid_size)
    # stop short of the top so a terminal atom does not enter the hazard
    x = np.linspace(lo, hi - 1e-9 * (hi - lo), grid_size)
    dens = np.asarray(d.pdf(x))
    surv = np.asarray(d.survival(x))
    ok = (dens > 0.0) & (surv > 1e-15)
    indeterminate = int(np.sum(~ok & (surv > 1e-15)))
    if not np.any(ok):
        # no density anywhere (atomic law): monotone hazard cannot be
        # established, so the guarantee is reported as absent
        return MhrReport(False, 0.0, indeterminate, grid_size)
    hazard = dens[ok] / surv[ok]
    scale = float(np.max(hazard))
    drops = np.maximum(0.0, -np.diff(hazard))
    viol = float(np.max(drops, initial=0.0)) / scale if scale > 0 else 0.0
    return MhrReport(viol <= MHR_RTOL, viol, indeterminate, grid_size)


# -- discretization ----------------------------------------------------------


def discretize(d: Distribution, n: int) -> Distribution:
    """Quantile-midpoint discretization keeping every atom exactly.

    Atoms are carried over unchanged; the continuous mass is split into
    n - (#atoms) equal quantile chunks, each represented by the inverse
    demand at its midpoint.  Working in quantile space keeps the induced
    revenue-curve error uniform across quantiles and the mean error O(1/n).
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    atoms = d.atoms
    atom_mass = sum(m for _, m in atoms)
    cont_mass = max(0.0, 1.0 - atom_mass)
    values = [a for a, _ in atoms]
    probs = [m for _, m in atoms]
    if cont_mass > PROB_ATOL:
        k = max(1, n - len(atoms))
        # continuous region of quantile space = [0,1] minus atom bands
        bands = sorted((float(1.0 - d.cdf(a)), float(1.0 - d.cdf_left(a))) for a, _ in atoms)
        segments = []
        cursor = 0.0
        for left, right in bands:
            if left > cursor + 1e-15:
                segments.append((cursor, left))
            cursor = max(cursor, right)
        if cursor < 1.0 - 1e-15:
            segments.append((cursor, 1.0))
        lengths = np.array([b - a for a, b in segments])
        starts = np.concatenate([[0.0], np.cumsum(lengths)])
        total = starts[-1]
        for j in range(k):
            target = (j + 0.5) / k * total
            seg = min(np.searchsorted(starts, target, side="right") - 1, len(segments) - 1)
            q_mid = segments[seg][0] + (target - starts[seg])
            values.append(float(d.inverse_demand(q_mid)))
            probs.append(cont_mass / k)
    # merge duplicates produced by flat stretches
    values = np.asarray(values)
    probs = np.asarray(probs)
    order = np.argsort(values)
    values, probs = values[order], probs[order]
    merged_v, merged_p = [values[0]], [probs[0]]
    for v, m in zip(values[1:], probs[1:]):
        if v <= merged_v[-1]:
            merged_p[-1] += m
        else:
            merged_v.append(v)
            merged_p.append(m)
    merged_p = np.asarray(merged_p)
    merged_p = merged_p / merged_p.sum()
    return Distribution.discrete(merged_v, merged_p)
