"""Closeness parameters between price-posting and ex-ante revenue curves,
and the approximation bounds they transfer.

alpha/beta: P(q) >= R(q)/alpha on [0, 1/beta] (price-posting closeness).
zeta: every q has some q' <= q with P(q') >= R(q)/zeta (ex-ante closeness).
eta: ratio of the two curves' global maxima.
rho: the concave-curve anonymous-pricing constant, numerically e.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .curves import Agent, RevenueCurve, concave_hull, offer_curve, price_posting_curve, synthetic_curve
from .distributions import mhr_report, regularity_report
from .mechanisms import ApResult, EarResult, ap_optimize, ear_optimize, risk_two_priced_bound
from .oracle import DiscreteTypeSpace, ex_ante_curve_oracle

RHO = math.e
_ORIGIN_CUTOFF = 1e-6  # both curves vanish linearly at q=0; skip the 0/0 zone
_KAPPA_CEILING = 50.0


@dataclass(frozen=True)
class OracleConfig:
    values: int = 60
    budgets: int = 20
    quantile_grid: int = 33
    price_grid: int = 4096
    betas: tuple = ()
    lp_slack: float = 0.05      # relative slack on LP-backed comparisons
    exact_slack: float = 1e-6   # relative slack on closed-form comparisons

    def __post_init__(self):
        if any(b < 1.0 for b in self.betas):
            raise ValueError("betas must be at least 1")


def _ratio_grid(P: RevenueCurve, R: RevenueCurve, hi: float, n: int = 4096) -> np.ndarray:
    qs = np.concatenate([P.qs, R.qs, np.linspace(_ORIGIN_CUTOFF, hi, n), [hi]])
    qs = qs[(qs >= _ORIGIN_CUTOFF) & (qs <= hi)]
    return np.unique(qs)


def alpha_for_beta(P: RevenueCurve, R: RevenueCurve, beta: float) -> float:
    """Smallest alpha with P >= R/alpha on [0, 1/beta]; inf if P vanishes
    where R does not.  Exact for piecewise-linear curves because the grid
    contains every knot of both."""
    if beta < 1.0:
        raise ValueError("beta must be at least 1")
    qs = _ratio_grid(P, R, 1.0 / beta)
    rp = np.asarray(R.eval(qs))
    pp = np.asarray(P.eval(qs))
    scale = max(float(np.max(rp, initial=0.0)), 1e-300)
    live = rp > 1e-14 * scale
    if not np.any(live):
        return 1.0
    dead = live & (pp <= 1e-14 * scale)
    if np.any(dead):
        return math.inf
    return float(np.max(rp[live] / pp[live]))


def zeta(P: RevenueCurve, R: RevenueCurve) -> float:
    """Smallest z such that the running max of P covers R/z everywhere."""
    qs = _ratio_grid(P, R, 1.0)
    rp = np.asarray(R.eval(qs))
    pp = np.maximum.accumulate(np.asarray(P.eval(qs)))
    scale = max(float(np.max(rp, initial=0.0)), 1e-300)
    live = rp > 1e-14 * scale
    if not np.any(live):
        return 1.0
    dead = live & (pp <= 1e-14 * scale)
    if np.any(dead):
        return math.inf
    return float(np.max(rp[live] / pp[live]))


def eta(P: RevenueCurve, R: RevenueCurve) -> float:
    """Ratio of the curves' global maxima (single-agent optimal vs posting)."""
    pmax = P.max_value()
    rmax = R.max_value()
    if pmax <= 0.0:
        return math.inf if rmax > 0.0 else 1.0
    return float(rmax / pmax)


@dataclass(frozen=True)
class TransferBounds:
    basic: float      # alpha * beta
    improved: float   # sqrt(alpha*beta*eta) when alpha <= beta*eta, else alpha


def transfer_bounds(alpha: float, beta: float, eta_val: float) -> TransferBounds:
    """Anonymous-pricing transfer factors from the closeness parameters."""
    if min(alpha, beta, eta_val) < 1.0 - 1e-12:
        raise ValueError("closeness parameters must be at least 1")
    basic = alpha * beta
    if not math.isfinite(alpha) or not math.isfinite(beta):
        return TransferBounds(math.inf, math.inf)
    improved = math.sqrt(alpha * beta * eta_val) if alpha <= beta * eta_val else alpha
    return TransferBounds(basic, improved)


def table1_bound(model: str, **params) -> float:
    """Headline anonymous-pricing factors per utility model."""
    if model == "public":
        return RHO
    if model == "private-mhr":
        return 3.0 * RHO
    if model == "private-kappa":
        kappa = float(params["kappa"])
        return math.sqrt(2.0 * (2.0 + kappa) * (1.0 + kappa)) * RHO
    if model == "risk-averse":
        eta_cap = float(params["eta_cap"])
        return (2.0 + math.log(eta_cap)) * RHO
    raise ValueError(f"unknown model {model!r}")


@dataclass(frozen=True)
class AgentCloseness:
    agent_id: str
    model: str
    alphas: dict
    zeta: float
    eta: float
    kappa: float | None
    r_label: str            # "exact" | "upper bound"
    value_regular: bool | None
    budget_mhr: bool | None


@dataclass(frozen=True)
class ClosenessReport:
    agents: tuple
    betas: tuple
    alpha: dict             # aggregate alpha per beta (max over agents)
    zeta: float
    eta: float
    rho: float
    kappa: float | None
    ap_posting: ApResult
    ap_ex_ante: ApResult
    ear: EarResult
    ratio: float            # EAR(Rbar) / AP*(P)
    transfer: dict          # per beta: TransferBounds scaled by rho
    zeta_bound: float       # zeta * rho (needs concave P)
    table1: float | None
    table1_model: str | None
    bound: float
    slack: float
    passed: bool
    flags: tuple

    def to_csv(self, path):
        with open(path, "w") as fh:
            alpha_cols = ",".join(f"alpha@{b:g}" for b in self.betas)
            fh.write(f"agent,model,{alpha_cols},zeta,eta,kappa\n")
            for a in self.agents:
                alphas = ",".join(f"{a.alphas[b]:.12g}" for b in self.betas)
                kap = "" if a.kappa is None else f"{a.kappa:.12g}"
                fh.write(f"{a.agent_id},{a.model},{alphas},{a.zeta:.12g},{a.eta:.12g},{kap}\n")
            fh.write("summary,ap_posting,ap_ex_ante,ear,ratio,bound,pass\n")
            fh.write(
                f"summary,{self.ap_posting.revenue:.12g},{self.ap_ex_ante.revenue:.12g},"
                f"{self.ear.revenue:.12g},{self.ratio:.12g},{self.bound:.12g},{self.passed}\n"
            )


def build_curves(agent: Agent, config: OracleConfig) -> tuple[RevenueCurve, RevenueCurve, str]:
    """Per-agent (P, Rbar, label); Rbar is exact only when the model admits it.

    For LP-backed models the posting curve is built on the same discrete
    type space as the oracle, so the closeness ratios compare like with
    like (otherwise the endpoint q -> 1, where the continuous posting
    revenue vanishes but the discrete one does not, reads as infinite).
    """
    if agent.model == "synthetic":
        return synthetic_curve(agent.p_knots), synthetic_curve(agent.r_knots), "exact"
    if agent.model == "linear":
        P = price_posting_curve(offer_curve(agent), grid=config.price_grid)
        return P, concave_hull(P), "exact"
    if agent.model == "capacitated":
        # the only characterized handle on R is the two-priced upper bound
        P = price_posting_curve(offer_curve(agent), grid=config.price_grid)
        hull = P if P.concave else concave_hull(P)
        qs = np.unique(np.concatenate([hull.qs, np.linspace(0.0, 1.0, 257)]))
        vals = [risk_two_priced_bound(hull, agent.capacity, agent.hval, q).bound for q in qs]
        return P, RevenueCurve(qs, vals, name="Rbar"), "upper bound"
    from .distributions import discretize

    Fd = agent.values if agent.values.kind == "discrete" else discretize(agent.values, config.values)
    if agent.model == "public-budget":
        space = DiscreteTypeSpace.public_budget(Fd, config.values, agent.budget)
        disc_agent = Agent(model="public-budget", values=Fd, budget=agent.budget, id=agent.id)
    else:
        Gd = agent.budgets if agent.budgets.kind == "discrete" else discretize(agent.budgets, config.budgets)
        space = DiscreteTypeSpace.private_budget(Fd, config.values, Gd, config.budgets)
        disc_agent = Agent(model="private-budget", values=Fd, budgets=Gd, id=agent.id)
    P = price_posting_curve(offer_curve(disc_agent), grid=config.price_grid)
    rbar = ex_ante_curve_oracle(space, grid=config.quantile_grid)
    return P, rbar, "upper bound"


def verify_instance(agents: Sequence[Agent], config: OracleConfig | None = None) -> ClosenessReport:
    """End-to-end closeness verification for one instance.

    Builds P_i and Rbar_i, computes the per-agent parameters, the achieved
    anonymous-pricing and ex-ante revenues, and checks the achieved ratio
    against the transferred bound (max of the per-agent parameters handles
    mixed utility models).
    """
    config = config or OracleConfig()
    if len(agents) == 0:
        raise ValueError("need at least one agent")
    per_agent = []
    kappas = []
    betas = set(config.betas)
    infos = []
    for agent in agents:
        P, R, label = build_curves(agent, config)
        kappa = None
        if agent.model == "private-budget":
            kappa = 1.0 / max(agent.budgets.exceed_mean_probability(), 1e-12)
            kappas.append(kappa)
            betas.add(kappa + 1.0)
        infos.append((agent, P, R, label, kappa))
    if not betas:
        betas = {1.0}
    betas = tuple(sorted(betas))
    lp_backed = False
    for agent, P, R, label, kappa in infos:
        val_reg = None if agent.model == "synthetic" else regularity_report(agent.values).regular
        bud_mhr = mhr_report(agent.budgets).mhr if agent.model == "private-budget" else None
        per_agent.append(
            AgentCloseness(
                agent_id=agent.id,
                model=agent.model,
                alphas={b: alpha_for_beta(P, R, b) for b in betas},
                zeta=zeta(P, R),
                eta=eta(P, R),
                kappa=kappa,
                r_label=label,
                value_regular=val_reg,
                budget_mhr=bud_mhr,
            )
        )
        lp_backed = lp_backed or label == "upper bound"
    alpha_agg = {b: max(max(a.alphas[b] for a in per_agent), 1.0) for b in betas}
    zeta_agg = max(max(a.zeta for a in per_agent), 1.0)
    eta_agg = max(max(a.eta for a in per_agent), 1.0)
    sellables = [offer_curve(a) if a.model != "synthetic" else synthetic_curve(a.p_knots) for a in agents]
    ap_post = ap_optimize(sellables, grid=config.price_grid)
    r_curves = [concave_hull(info[2]) if not info[2].concave else info[2] for info in infos]
    ap_ex = ap_optimize(r_curves, grid=config.price_grid)
    ear = ear_optimize(r_curves)
    ratio = ear.revenue / ap_post.revenue if ap_post.revenue > 0 else math.inf
    transfer = {
        b: TransferBounds(
            transfer_bounds(alpha_agg[b], b, eta_agg).basic * RHO if math.isfinite(alpha_agg[b]) else math.inf,
            transfer_bounds(alpha_agg[b], b, eta_agg).improved * RHO if math.isfinite(alpha_agg[b]) else math.inf,
        )
        for b in betas
    }
    all_p_concave = all(info[1].concave for info in infos)
    zeta_bound = zeta_agg * RHO if all_p_concave and math.isfinite(zeta_agg) else math.inf
    candidates = [tb.basic for tb in transfer.values()] + [tb.improved for tb in transfer.values()] + [zeta_bound]
    bound = min(candidates)
    # headline model bound when the instance is homogeneous enough
    models = {a.model for a in agents}
    table1 = None
    t1_model = None
    flags = []
    if models <= {"linear", "public-budget"}:
        table1, t1_model = table1_bound("public"), "public"
    elif models == {"private-budget"}:
        if all(a.budget_mhr for a in per_agent):
            table1, t1_model = table1_bound("private-mhr"), "private-mhr"
        else:
            kmax = max(kappas)
            table1, t1_model = table1_bound("private-kappa", kappa=kmax), "private-kappa"
            if kmax > _KAPPA_CEILING:
                flags.append("assumption violated: no constant quantile window for the expected budget")
    elif models == {"capacitated"}:
        eta_cap = max(a.hval / a.capacity for a in agents)
        table1, t1_model = table1_bound("risk-averse", eta_cap=eta_cap), "risk-averse"
    for a in per_agent:
        if a.value_regular is False:
            flags.append(f"assumption violated: {a.agent_id} value distribution is not regular")
    if table1 is not None:
        bound = min(bound, table1)
    slack = config.lp_slack if lp_backed else config.exact_slack
    passed = ratio <= bound * (1.0 + slack) + slack
    kappa_agg = max(kappas) if kappas else None
    return ClosenessReport(
        agents=tuple(per_agent),
        betas=betas,
        alpha=alpha_agg,
        zeta=zeta_agg,
        eta=eta_agg,
        rho=RHO,
        kappa=kappa_agg,
        ap_posting=ap_post,
        ap_ex_ante=ap_ex,
        ear=ear,
        ratio=float(ratio),
        transfer=transfer,
        zeta_bound=zeta_bound,
        table1=table1,
        table1_model=t1_model,
        bound=float(bound),
        slack=slack,
        passed=bool(passed),
        flags=tuple(flags),
    )
