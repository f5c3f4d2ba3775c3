"""Simulation-parameter planning: cutoffs, system size, error budgets, step counts.

``make_plan`` chains every choice needed by either algorithm and then checks
the result against the defining inequalities again (``Plan.check``), so a
plan that exists is a plan that satisfies them.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Literal

from .dyson import LN2, DysonConfig, certify_segment, discretization_candidates, segment_count, truncation_tail_bound
from .errors import DomainError, InfeasiblePlanError
from .model import ModelParams, norm_bounds
from .trotter import TrotterPlan, commutator_bound_rho, trotter_steps_from_rho

Method = Literal["pf2", "ip"]
T0_UNSORTED = 0.5
SQRT_2PI_E = math.sqrt(2 * math.pi * math.e)


# ---------------------------------------------------------------------------
# individual rows


def lambda0_sweep(mu: float) -> list[int]:
    """Integer ``Lambda0`` with ``0.01 mu <= Lambda0^2 <= 100 mu``; ``[1]`` if none qualify."""
    if mu <= 0:
        raise DomainError("lambda0_sweep needs mu > 0")
    hi = math.isqrt(math.floor(100 * mu))
    while (hi + 1) ** 2 <= 100 * mu:
        hi += 1
    lo = max(1, math.ceil(math.sqrt(0.01 * mu)))
    while lo > 1 and (lo - 1) ** 2 >= 0.01 * mu:
        lo -= 1
    values = list(range(lo, hi + 1))
    return values or [1]


def leakage_bound(x: float, t: float, delta: int) -> float:
    """``ceil(4xt) / (2^(Delta-1) Delta!)``."""
    return math.ceil(4 * x * t) / (2 ** (delta - 1) * math.factorial(delta))


def delta_for_leakage(x: float, t: float, eps_cutoff: float) -> int:
    """Window growth ``Delta = max(3, ceil(log2(2 ceil(4xt) / (eps sqrt(2 pi e)))))``."""
    if x < 0 or t < 0 or eps_cutoff <= 0:
        raise DomainError("delta_for_leakage needs x, t >= 0 and eps_cutoff > 0")
    c = math.ceil(4 * x * t)
    if c == 0:
        return 3
    return max(3, math.ceil(math.log2(2 * c / (eps_cutoff * SQRT_2PI_E))))


@dataclass(frozen=True)
class Cutoff:
    lambda_t: int
    delta: int
    eta: int


def cutoff_at_time(lambda0: int, x: float, t: float, eps_cutoff: float) -> Cutoff:
    """``Lambda(t) = Lambda0 + ceil(4xt) (Delta - 1)`` and its register width."""
    if int(lambda0) != lambda0 or lambda0 < 1:
        raise DomainError(f"lambda0 must be an integer >= 1, got {lambda0}")
    delta = delta_for_leakage(x, t, eps_cutoff)
    lam = int(lambda0) + math.ceil(4 * x * t) * (delta - 1)
    return Cutoff(lam, delta, max(1, math.ceil(math.log2(2 * lam))))


def lieb_robinson_tail(n0: int, x: float, t: float, l: int) -> float:
    """``n0 (8xt)^l / l!`` in log space."""
    a = 8 * x * t
    if a == 0:
        return 0.0 if l > 0 else float(n0)
    return math.exp(math.log(n0) + l * math.log(a) - math.lgamma(l + 1))


def lieb_robinson_margin(n0: int, x: float, t: float, eps: float) -> int:
    """Padding ``l`` on each side of the region of interest.

    Starts at ``ceil(max(ln(n0/eps), 8 e x t))`` and grows until the tail
    ``n0 (8xt)^l / l!`` is at most ``eps``.
    """
    l = max(0, math.ceil(max(math.log(n0 / eps), 8 * math.e * x * t)))
    while lieb_robinson_tail(n0, x, t, l) > eps:
        l += 1
    return l


def min_system_size(n0: int, x: float, t: float, eps: float) -> int:
    if int(n0) != n0 or n0 < 2:
        raise DomainError(f"n0 must be an integer >= 2, got {n0}")
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    return int(n0) + 2 * lieb_robinson_margin(n0, x, t, eps)


def t_min(rho_density: float, x: float) -> float:
    if not 0 < rho_density <= 1:
        raise DomainError("rho_density must lie in (0, 1]")
    if x <= 0:
        raise DomainError("x must be positive")
    return rho_density / x


@dataclass(frozen=True)
class GammaRange:
    low: float
    high: float

    @property
    def empty(self) -> bool:
        return self.low >= self.high


def gamma_bounds(rho_density: float, mu: float, lambda0: int) -> GammaRange:
    """Background field range ``sqrt(rho mu) <= gamma < Lambda0``."""
    return GammaRange(math.sqrt(rho_density * mu), float(lambda0))


@dataclass(frozen=True)
class MomentumFloor:
    value: float
    warning: bool


def p0_min(rho_density: float, mu: float, n_sites: int) -> MomentumFloor:
    """``0.1 rho mu N``; ``warning`` when it reaches ``0.1 pi N`` (lattice momentum scale)."""
    value = 0.1 * rho_density * mu * n_sites
    return MomentumFloor(value, value >= 0.1 * math.pi * n_sites)


# ---------------------------------------------------------------------------
# plan


@dataclass(frozen=True)
class ErrorBudget:
    """Split of the total error.

    For ``pf2`` the product-formula share sits in ``eps1_total`` and
    ``eps2_total`` is zero (there is no discretization error).
    """

    method: str
    eps_total: float
    eps_cutoff: float
    eps1_total: float
    eps2_total: float
    eps3_total: float

    @property
    def eps_prime(self) -> float:
        return self.eps_total - self.eps_cutoff

    def components(self) -> float:
        return self.eps_cutoff + self.eps1_total + self.eps2_total + self.eps3_total


def make_budget(eps: float, method: Method, cutoff_fraction: float = 0.25,
                pf2_split=(0.9, 0.1), ip_split=(10, 10, 1)) -> ErrorBudget:
    eps_cut = cutoff_fraction * eps
    rest = eps - eps_cut
    if method == "pf2":
        a, b = pf2_split
        return ErrorBudget(method, eps, eps_cut, rest * a / (a + b), 0.0, rest * b / (a + b))
    if method == "ip":
        w1, w2, w3 = ip_split
        tot = w1 + w2 + w3
        return ErrorBudget(method, eps, eps_cut, rest * w1 / tot, rest * w2 / tot, rest * w3 / tot)
    raise DomainError(f"unknown method {method!r}")


@dataclass(frozen=True)
class PlanInputs:
    x: float
    mu: float
    rho_density: float
    t: float
    eps: float
    n0: int
    method: str
    lambda0: int
    alpha_mode: str
    collisions: bool
    sorted: bool


@dataclass(frozen=True)
class Plan:
    inputs: PlanInputs
    params: ModelParams
    lambda0: int
    delta: int
    n_sites: int
    lr_margin: int
    t_min: float
    gamma_range: GammaRange
    p0_min: MomentumFloor
    budget: ErrorBudget
    trotter: TrotterPlan | None = None
    dyson: DysonConfig | None = None
    segments: int | None = None
    warnings: tuple = field(default_factory=tuple)

    @property
    def method(self) -> str:
        return self.inputs.method

    @property
    def eta(self) -> int:
        return self.params.eta

    def check(self) -> list[str]:
        """Re-derive every defining inequality; return descriptions of failures."""
        return check_plan(self)

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["params"]["eta"] = self.params.eta
        rec["params"]["link_count"] = self.params.link_count
        rec["gamma_range"]["empty"] = self.gamma_range.empty
        rec["budget"]["eps_prime"] = self.budget.eps_prime
        rec["warnings"] = list(self.warnings)
        return rec

    def to_json(self) -> str:
        """Canonical serialization: sorted keys, no insignificant whitespace."""
        return json.dumps(self.to_record(), sort_keys=True, separators=(",", ":"), allow_nan=False)


def alpha_v_for(params: ModelParams, mode: str) -> float:
    """Rescaling factor for the interaction: ``2 N x`` ("sites") or ``2 x L`` ("exact")."""
    if mode == "sites":
        return 2.0 * params.n_sites * params.x
    if mode == "exact":
        return 2.0 * params.x * params.link_count
    raise DomainError(f"unknown alpha mode {mode!r}")


def ip_segment_config(params: ModelParams, t: float, budget: ErrorBudget, t0: float,
                      alpha_v: float, collisions: bool) -> tuple[int, DysonConfig]:
    """Segment count and certified ``(K, M)`` for one interaction-picture segment.

    ``V`` is bounded by ``alpha_v`` (it is the block-encoding normalization),
    so the segment ``t0/alpha_v`` has ``||V|| t_seg <= t0``.
    """
    r = segment_count(alpha_v, t, t0)
    h0 = norm_bounds(params).h0_norm
    cfg = certify_segment(alpha_v, h0, t0 / alpha_v, budget.eps1_total / r, budget.eps2_total / r,
                          collisions, t0=t0, alpha_v=alpha_v)
    return r, cfg


def make_plan(x: float, mu: float, rho_density: float, t: float, eps: float, n0: int,
              method: Method = "ip", lambda0: int | None = None, *, alpha_mode: str = "sites",
              collisions: bool = True, sorted: bool = True, cutoff_fraction: float = 0.25,
              pf2_split=(0.9, 0.1), ip_split=(10, 10, 1), boundary: str = "open") -> Plan:
    """Build and verify a complete plan.

    ``lambda0=None`` picks the smallest value of :func:`lambda0_sweep` with a
    non-empty background-field range.
    """
    for name, val in (("x", x), ("mu", mu), ("rho_density", rho_density), ("t", t), ("eps", eps)):
        if not (val > 0 and math.isfinite(val)):
            raise DomainError(f"{name} must be positive and finite, got {val}")
    if eps >= 1:
        raise DomainError("eps must be below 1")
    if method not in ("pf2", "ip"):
        raise DomainError(f"unknown method {method!r}")
    x, mu, rho_density, t, eps = (float(v) for v in (x, mu, rho_density, t, eps))
    tm = t_min(rho_density, x)
    if lambda0 is None:
        feasible = [lam for lam in lambda0_sweep(mu) if not gamma_bounds(rho_density, mu, lam).empty]
        if not feasible:
            raise InfeasiblePlanError([f"no Lambda0 in the sweep for mu={mu} exceeds sqrt(rho mu)"])
        lambda0 = feasible[0]
    budget = make_budget(eps, method, cutoff_fraction, pf2_split, ip_split)
    cut = cutoff_at_time(lambda0, x, t, budget.eps_cutoff)
    margin = lieb_robinson_margin(n0, x, t, eps)
    n_sites = min_system_size(n0, x, t, eps)
    params = ModelParams(x=x, mu=mu, n_sites=n_sites, lambda_cutoff=cut.lambda_t, boundary=boundary)
    gam = gamma_bounds(rho_density, mu, lambda0)
    p0 = p0_min(rho_density, mu, n_sites)
    warnings = []
    if p0.warning:
        warnings.append("p0_min reaches 0.1*pi*N")
    if t < tm:
        warnings.append("t is below t_min")
    inputs = PlanInputs(x, mu, rho_density, t, eps, int(n0), method, int(lambda0), alpha_mode,
                        bool(collisions), bool(sorted))
    trotter = dyson = segments = None
    if method == "pf2":
        trotter = trotter_steps_from_rho(commutator_bound_rho(params), t, budget.eps1_total)
    else:
        t0 = LN2 if sorted else T0_UNSORTED
        segments, dyson = ip_segment_config(params, t, budget, t0, alpha_v_for(params, alpha_mode), collisions)
    plan = Plan(inputs, params, int(lambda0), cut.delta, n_sites, margin, tm, gam, p0, budget,
                trotter, dyson, segments, tuple(warnings))
    problems = plan.check()
    if problems:
        raise InfeasiblePlanError(problems)
    return plan


def check_plan(plan: Plan) -> list[str]:
    bad = []
    inp, b = plan.inputs, plan.budget
    x, t, eps = inp.x, inp.t, inp.eps
    if plan.n_sites < 2:
        bad.append("N >= 2")
    lb = leakage_bound(x, t, plan.delta)
    if lb > b.eps_cutoff:
        bad.append(f"leakage bound {lb:.3e} <= eps_cutoff {b.eps_cutoff:.3e}")
    if plan.delta < 3:
        bad.append("Delta >= 3")
    if plan.params.lambda_cutoff != plan.lambda0 + math.ceil(4 * x * t) * (plan.delta - 1):
        bad.append("Lambda(t) = Lambda0 + ceil(4xt)(Delta-1)")
    tail = lieb_robinson_tail(inp.n0, x, t, plan.lr_margin)
    if tail > eps:
        bad.append(f"N0 (8xt)^l / l! = {tail:.3e} <= eps")
    if plan.lr_margin < math.ceil(max(math.log(inp.n0 / eps), 8 * math.e * x * t)):
        bad.append("l >= max(ln(N0/eps), 8 e x t)")
    if plan.n_sites != inp.n0 + 2 * plan.lr_margin or plan.params.n_sites != plan.n_sites:
        bad.append("N = N0 + 2 l")
    if plan.gamma_range.empty:
        bad.append(f"sqrt(rho mu) = {plan.gamma_range.low:.4g} < Lambda0 = {plan.lambda0}")
    if not math.isclose(plan.t_min, inp.rho_density / x, rel_tol=1e-15):
        bad.append("t_min = rho / x")
    if not math.isclose(plan.p0_min.value, 0.1 * inp.rho_density * inp.mu * plan.n_sites, rel_tol=1e-15):
        bad.append("p0 = 0.1 rho mu N")
    pos = [b.eps_cutoff, b.eps1_total, b.eps3_total] + ([b.eps2_total] if b.method == "ip" else [])
    if min(pos) <= 0:
        bad.append("budget components positive")
    if b.components() > eps * (1 + 1e-12):
        bad.append(f"budget sum {b.components():.6e} <= eps {eps:.6e}")
    if plan.method == "pf2":
        tp = plan.trotter
        if tp is None:
            bad.append("pf2 plan carries a Trotter step count")
        else:
            need = math.sqrt(tp.rho_bound * t**3 / b.eps1_total)
            if tp.steps < need or tp.steps < 1:
                bad.append(f"r = {tp.steps} >= sqrt(rho t^3 / eps_t) = {need:.4g}")
            if not math.isclose(tp.rho_bound, commutator_bound_rho(plan.params), rel_tol=1e-15):
                bad.append("rho evaluated at Lambda(t)")
    else:
        cfg, r = plan.dyson, plan.segments
        if cfg is None or r is None:
            bad.append("ip plan carries a Dyson configuration")
            return bad
        if r != segment_count(cfg.alpha_v, t, cfg.t0):
            bad.append("r = ceil(alpha t / t0)")
        if (r - 1) * cfg.t0 / cfg.alpha_v >= t * (1 + 1e-12) or r * cfg.t0 / cfg.alpha_v < t * (1 - 1e-12):
            bad.append("segments cover [0, t]")
        if cfg.alpha_v < norm_bounds(plan.params).v_norm:
            bad.append("alpha_V >= ||V||")
        if cfg.eps1 * r > b.eps1_total * (1 + 1e-12) or cfg.eps2 * r > b.eps2_total * (1 + 1e-12):
            bad.append("per-segment budgets times r within totals")
        tail = truncation_tail_bound(cfg.alpha_v, cfg.t_seg, cfg.K)
        if tail > cfg.eps1 * (1 + 1e-12):
            bad.append(f"truncation tail {tail:.3e} <= eps1 {cfg.eps1:.3e}")
        if cfg.K < 2 * cfg.alpha_v * cfg.t_seg:
            bad.append("K >= 2 ||V|| t")
        cands = discretization_candidates(cfg.alpha_v, norm_bounds(plan.params).h0_norm, cfg.t_seg,
                                          cfg.eps2, cfg.K, cfg.collisions)
        for name, val in cands.items():
            if cfg.M < val:
                bad.append(f"M = {cfg.M} >= {name} bound {val:.4g}")
        if cfg.M & (cfg.M - 1):
            bad.append("M is a power of two")
    return bad
