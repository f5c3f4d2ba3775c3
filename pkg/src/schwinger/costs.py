"""Closed-form fault-tolerant resource counts for both simulation algorithms.

All gate counts are Python integers; only rotation-synthesis uses floating
point, and its result is rounded up per rotation before multiplying.
Toffolis are counted as four T gates.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from itertools import groupby

import numpy as np

from .errors import DomainError
from .planner import (
    LN2,
    T0_UNSORTED,
    Plan,
    gamma_bounds,
    ip_segment_config,
    lambda0_sweep,
    make_plan,
    t_min,
)
from .trotter import trotter_steps_from_rho

CSV_COLUMNS = (
    "schema", "x", "mu", "t", "eps", "lambda0", "lambda_t", "N", "method", "variant", "sorted",
    "K", "M", "r", "total_t", "rotations", "qubits", "winner",
)
CSV_SCHEMA = "schwinger-costs/1"


def _log2_floor(n: int) -> int:
    return int(n).bit_length() - 1


def _log2_ceil(n: int) -> int:
    return (int(n) - 1).bit_length() if n > 1 else 0


@dataclass(frozen=True)
class SubroutineCost:
    name: str
    t_gates: int
    rotations: int
    ancilla: int
    calls: int

    def __post_init__(self):
        for f in ("t_gates", "rotations", "ancilla", "calls"):
            v = getattr(self, f)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise DomainError(f"{self.name}.{f} must be a non-negative integer, got {v!r}")

    @property
    def total_t(self) -> int:
        return self.calls * self.t_gates

    @property
    def total_rotations(self) -> int:
        return self.calls * self.rotations


@dataclass(frozen=True)
class SynthesisModel:
    """T gates per single-qubit rotation: ``ceil(a log2(1/eps_rot) + b)``."""

    coeff_a: float = 3.067
    coeff_b: float = 9.2

    def __post_init__(self):
        if self.coeff_a <= 0 or self.coeff_b < 0:
            raise DomainError("synthesis model needs a > 0 and b >= 0")


DEFAULT_SYNTHESIS = SynthesisModel()


def rotation_t_cost(n_rot: int, eps3_total: float, model: SynthesisModel = DEFAULT_SYNTHESIS) -> int:
    """T count to synthesize ``n_rot`` rotations sharing the error ``eps3_total`` evenly."""
    if n_rot < 0:
        raise DomainError("n_rot must be non-negative")
    if n_rot == 0:
        return 0
    if eps3_total <= 0:
        raise DomainError("eps3_total must be positive")
    per = math.ceil(model.coeff_a * math.log2(n_rot / eps3_total) + model.coeff_b)
    return int(n_rot) * max(0, per)


# ---------------------------------------------------------------------------
# subroutine tables


def trotter_subroutine_costs(N: int, eta: int, r: int, catalysts: bool = False) -> list[SubroutineCost]:
    """Rows of the product-formula cost table with their call counts.

    Diagonal terms merge across step boundaries, giving two half-steps and
    ``r - 1`` full steps.  ``H1e``, ``H2e`` and ``H1o`` appear as half-steps
    twice per step; ``H2o`` is the middle full step.  With ``catalysts`` the
    one-time catalyst-state rotations are appended as separate rows.
    """
    if N < 2 or eta < 1 or r < 1:
        raise DomainError("need N >= 2, eta >= 1, r >= 1")
    lg = _log2_floor(N)
    mass = (4 * N - 4 + 4 * lg, 1, N + lg + 1)
    elec = (2 * (N - 1) * (eta**2 + eta - 2), (N - 1) * eta, eta)
    h1 = (6 * N - 4 + 4 * lg, 1, math.ceil(3 * N / 2) + lg)
    h2 = (6 * N - 4 + 4 * lg + 8 * N * eta - 8 * N, 1, max(math.ceil(3 * N / 2) + lg, eta))
    rows = [
        SubroutineCost("exp_HM_half", *mass, 2),
        SubroutineCost("exp_HM_full", *mass, r - 1),
        SubroutineCost("exp_HE_half", *elec, 2),
        SubroutineCost("exp_HE_full", *elec, r - 1),
        SubroutineCost("exp_H1e_half", *h1, 2 * r),
        SubroutineCost("exp_H1o_half", *h1, 2 * r),
        SubroutineCost("exp_H2e_half", *h2, 2 * r),
        SubroutineCost("exp_H2o_full", *h2, r),
    ]
    if catalysts:
        rows += [
            SubroutineCost("catalyst_electric", 0, max(0, 2 * eta - 3), 0, 1),
            SubroutineCost("catalyst_mass", 0, lg + 1, 0, 1),
            SubroutineCost("catalyst_hopping", 0, lg + 2, 0, 1),
        ]
    return rows


def ip_subroutine_costs(N: int, eta: int, K: int, M: int, variant: str = "pga",
                        sorted: bool = True) -> list[SubroutineCost]:
    """Rows of the interaction-picture cost table for one segment ``W_(K,M)``."""
    if N < 2 or eta < 1 or K < 1:
        raise DomainError("need N >= 2, eta >= 1, K >= 1")
    if M < 1 or M & (M - 1):
        raise DomainError(f"M must be a power of two, got {M}")
    if variant not in ("pga", "mult"):
        raise DomainError(f"unknown variant {variant!r}")
    lm = _log2_ceil(M)
    lk = _log2_ceil(K)
    lgN = _log2_floor(N)
    lcN = _log2_ceil(N)
    rows = [
        SubroutineCost("prep", 0, 2 * K - 1, 0, 6),
        SubroutineCost("additional_prep", 2 * K * lm, 0, 0, 6),
    ]
    if sorted:
        rows.append(SubroutineCost("sort", 4 * (K // 2) * (lk + 1) * lm, 0, lm + (K // 2) * (lk + 1), 6))
    rows.append(SubroutineCost("block_encoding", 8 * N + 4 * (N - 1) * (eta - 1) - 1, 0, eta - 1, 3 * K))
    if variant == "pga":
        rows.append(SubroutineCost("exp_HM_pga", 4 * N - 4 + 4 * lm * (lgN + 1), lm, N + lgN + 1, 3 * (K + 1)))
        rows.append(SubroutineCost("exp_HE_pga", 2 * (N - 1) * lm * (eta**2 + eta - 2), (N - 1) * lm * eta,
                                   eta, 3 * (K + 1)))
    else:
        rows.append(SubroutineCost("exp_HM_mult", 4 * (N + 2 * lm * lgN + 7 * lm + 5 * lgN + 4), 1,
                                   N + 2 * lm + 2 * lgN + 1, 3 * (K + 1)))
        rows.append(SubroutineCost(
            "exp_HE_mult",
            4 * N * (4 * eta**2 + 4 * eta) + 4 * lm * (4 * eta + 5 + 2 * lcN) + 20 * lcN - 8 * eta**2 + 48 * eta,
            1, 8 * eta + 3 * lcN + 2 * lm, 3 * (K + 1)))
    rows.append(SubroutineCost("additional_sel", 8 * (lm - 1) * (K - 1) + 4 * K * (N + 1), 0,
                               max(N + 1, lm - 1), 3))
    rows.append(SubroutineCost("reflection", 8 * K + 4 * K * lm - 4, 0, 2 * K + K * lm - 1, 2))
    return rows


# ---------------------------------------------------------------------------
# totals


@dataclass(frozen=True)
class CostReport:
    method: str  # "pf2", "ip_pga" or "ip_mult"
    sorted: bool | None
    subroutines: tuple
    repetitions: int  # segments for ip (per-segment rows repeated), 1 for pf2
    gate_t: int
    synthesis_t: int
    total_rotations: int
    logical_qubits: int
    segments_or_steps: int
    K: int | None = None
    M: int | None = None
    context: dict = field(default_factory=dict)

    @property
    def total_t(self) -> int:
        return self.gate_t + self.synthesis_t

    @property
    def variant(self) -> str:
        return self.method.split("_", 1)[1] if self.method.startswith("ip_") else ""

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["total_t"] = self.total_t
        rec["subroutines"] = [asdict(s) for s in self.subroutines]
        return rec

    def csv_row(self, winner: str = "") -> dict:
        c = self.context
        return {
            "schema": CSV_SCHEMA, "x": c.get("x"), "mu": c.get("mu"), "t": c.get("t"), "eps": c.get("eps"),
            "lambda0": c.get("lambda0"), "lambda_t": c.get("lambda_t"), "N": c.get("N"),
            "method": "pf2" if self.method == "pf2" else "ip", "variant": self.variant,
            "sorted": "" if self.sorted is None else str(self.sorted).lower(),
            "K": "" if self.K is None else self.K, "M": "" if self.M is None else self.M,
            "r": self.segments_or_steps, "total_t": self.total_t, "rotations": self.total_rotations,
            "qubits": self.logical_qubits, "winner": winner,
        }


def _context(plan: Plan) -> dict:
    inp = plan.inputs
    return {"x": inp.x, "mu": inp.mu, "t": inp.t, "eps": inp.eps, "lambda0": plan.lambda0,
            "lambda_t": plan.params.lambda_cutoff, "N": plan.n_sites}


def pf2_cost(N: int, eta: int, links: int, r: int, eps_rot: float,
             model: SynthesisModel = DEFAULT_SYNTHESIS, context: dict | None = None) -> CostReport:
    rows = trotter_subroutine_costs(N, eta, r, catalysts=True)
    gate_t = sum(s.total_t for s in rows)
    n_rot = sum(s.total_rotations for s in rows)
    qubits = N + links * eta + max(s.ancilla for s in rows)
    return CostReport("pf2", None, tuple(rows), 1, gate_t, rotation_t_cost(n_rot, eps_rot, model), n_rot,
                      qubits, r, context=context or {})


def pf2_total(plan: Plan, model: SynthesisModel = DEFAULT_SYNTHESIS) -> CostReport:
    """Whole-evolution product-formula cost for a ``pf2`` plan."""
    if plan.method != "pf2" or plan.trotter is None:
        raise DomainError("pf2_total needs a plan built with method='pf2'")
    p = plan.params
    return pf2_cost(p.n_sites, p.eta, p.link_count, plan.trotter.steps, plan.budget.eps3_total, model,
                    _context(plan))


def ip_cost(N: int, eta: int, links: int, K: int, M: int, segments: int, eps3_total: float,
            variant: str, sorted: bool, model: SynthesisModel = DEFAULT_SYNTHESIS,
            context: dict | None = None) -> CostReport:
    rows = ip_subroutine_costs(N, eta, K, M, variant, sorted)
    gate_t = segments * sum(s.total_t for s in rows)
    n_rot = segments * sum(s.total_rotations for s in rows)
    lm = _log2_ceil(M)
    qubits = N + links * eta + K + K * lm + K + max(s.ancilla for s in rows)
    return CostReport(f"ip_{variant}", sorted, tuple(rows), segments, gate_t,
                      rotation_t_cost(n_rot, eps3_total, model), n_rot, qubits, segments, K, M,
                      context=context or {})


def ip_total(plan: Plan, variant: str = "pga", sorted: bool | None = None,
             model: SynthesisModel = DEFAULT_SYNTHESIS) -> CostReport:
    """Whole-evolution interaction-picture cost.

    ``sorted`` chooses ``t0 = ln 2`` (with SORT) or ``t0 = 1/2`` (without).
    When it differs from the plan's own choice the segment count and
    ``(K, M)`` are re-certified through the same routine the plan used.
    """
    if plan.method != "ip" or plan.dyson is None:
        raise DomainError("ip_total needs a plan built with method='ip'")
    if sorted is None:
        sorted = plan.inputs.sorted
    p = plan.params
    if sorted == plan.inputs.sorted:
        r, cfg = plan.segments, plan.dyson
    else:
        t0 = LN2 if sorted else T0_UNSORTED
        r, cfg = ip_segment_config(p, plan.inputs.t, plan.budget, t0, plan.dyson.alpha_v, plan.dyson.collisions)
    if cfg.K < 1:
        raise DomainError("interaction-picture costing needs K >= 1")
    return ip_cost(p.n_sites, p.eta, p.link_count, cfg.K, cfg.M, r, plan.budget.eps3_total, variant, sorted,
                   model, _context(plan))


def best_ip(plan: Plan, variants=("pga", "mult"), sorts=(True, False),
            model: SynthesisModel = DEFAULT_SYNTHESIS) -> CostReport:
    """Cheapest interaction-picture option by total T (ties: first in iteration order)."""
    reports = [ip_total(plan, v, s, model) for v in variants for s in sorts]
    return min(reports, key=lambda rep: rep.total_t)


# ---------------------------------------------------------------------------
# comparison


def fit_exponent(xs, ys) -> float | None:
    """Least-squares slope of ``log y`` against ``log x``; ``None`` with fewer than two distinct x."""
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    if len(np.unique(xs)) < 2:
        return None
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


@dataclass(frozen=True)
class ComparisonRow:
    x: float
    mu: float
    t: float
    eps: float
    lambda0: int
    pf2: CostReport
    ip: CostReport

    @property
    def winner(self) -> str:
        return "ip" if self.ip.total_t < self.pf2.total_t else "pf2"

    def csv_rows(self) -> list[dict]:
        return [self.pf2.csv_row(self.winner), self.ip.csv_row(self.winner)]


@dataclass(frozen=True)
class Comparison:
    rows: list
    diagnostics: list  # one dict per (x, eps, lambda0) group

    def csv_rows(self) -> list[dict]:
        return [r for row in self.rows for r in row.csv_rows()]


def _fixed_size_exponents(pf2_plans: list, ip_plans: list, model: SynthesisModel) -> dict:
    """Cost-versus-t slopes with ``N`` and ``Lambda`` frozen at the largest-t plan.

    This isolates the explicit time dependence (steps or segments and the
    per-segment ``K, M``) from the growth of the lattice and field cutoff.
    """
    ref_pf2, ref_ip = pf2_plans[-1], ip_plans[-1]
    p = ref_pf2.params
    ts = [pl.inputs.t for pl in pf2_plans]
    pf2_t = []
    for pl in pf2_plans:
        tp = trotter_steps_from_rho(ref_pf2.trotter.rho_bound, pl.inputs.t, pl.budget.eps1_total)
        pf2_t.append(pf2_cost(p.n_sites, p.eta, p.link_count, tp.steps, pl.budget.eps3_total, model).total_t)
    ip_t = []
    q = ref_ip.params
    alpha = ref_ip.dyson.alpha_v
    for pl in ip_plans:
        r, cfg = ip_segment_config(q, pl.inputs.t, pl.budget, ref_ip.dyson.t0, alpha, ref_ip.dyson.collisions)
        ip_t.append(ip_cost(q.n_sites, q.eta, q.link_count, cfg.K, cfg.M, r, pl.budget.eps3_total,
                            "pga", ref_ip.inputs.sorted, model).total_t)
    return {"pf2_t_exponent_fixed": fit_exponent(ts, pf2_t), "ip_t_exponent_fixed": fit_exponent(ts, ip_t)}


def compare(x_grid, mu, t_grid, eps_grid, n0: int = 8, rho_density: float = 0.5, *,
            t_in_units_of_tmin: bool = True, lambda0_grid=None,
            model: SynthesisModel = DEFAULT_SYNTHESIS, plan_kwargs: dict | None = None) -> Comparison:
    """Product formula versus best interaction-picture cost over a parameter grid.

    ``t_grid`` holds multiples of ``t_min`` unless ``t_in_units_of_tmin`` is
    false.  ``lambda0_grid=None`` sweeps every feasible ``Lambda0``.  Rows are
    ordered by ``(x, eps, lambda0, t)``.
    """
    x_grid, t_grid, eps_grid = list(x_grid), list(t_grid), list(eps_grid)
    if not (x_grid and t_grid and eps_grid):
        raise DomainError("comparison grids must be non-empty")
    kw = dict(plan_kwargs or {})
    rows, diags = [], []
    for x in sorted(x_grid):
        tm = t_min(rho_density, x)
        for eps in sorted(eps_grid):
            lams = lambda0_grid if lambda0_grid is not None else lambda0_sweep(mu)
            lams = [lam for lam in sorted(lams) if not gamma_bounds(rho_density, mu, lam).empty]
            for lam in lams:
                group_pf2, group_ip, group_rows = [], [], []
                for tv in sorted(t_grid):
                    t = tv * tm if t_in_units_of_tmin else tv
                    pp = make_plan(x, mu, rho_density, t, eps, n0, "pf2", lam, **kw)
                    ip = make_plan(x, mu, rho_density, t, eps, n0, "ip", lam, **kw)
                    row = ComparisonRow(x, mu, t, eps, lam, pf2_total(pp, model), best_ip(ip, model=model))
                    group_pf2.append(pp)
                    group_ip.append(ip)
                    group_rows.append(row)
                rows.extend(group_rows)
                ts = [r.t for r in group_rows]
                diag = {
                    "x": x, "eps": eps, "lambda0": lam,
                    "pf2_t_exponent": fit_exponent(ts, [r.pf2.total_t for r in group_rows]),
                    "ip_t_exponent": fit_exponent(ts, [r.ip.total_t for r in group_rows]),
                }
                if len(set(ts)) > 1:
                    diag.update(_fixed_size_exponents(group_pf2, group_ip, model))
                else:
                    diag.update({"pf2_t_exponent_fixed": None, "ip_t_exponent_fixed": None})
                diags.append(diag)
    # exponents in 1/eps at fixed (x, lambda0, t)
    key = lambda r: (r.x, r.lambda0, r.t)  # noqa: E731
    for (xv, lam, tv), grp in groupby(sorted(rows, key=key), key=key):
        grp = list(grp)
        inv = [1.0 / r.eps for r in grp]
        for d in diags:
            if d["x"] == xv and d["lambda0"] == lam:
                d.setdefault("eps_exponents", []).append({
                    "t": tv,
                    "pf2": fit_exponent(inv, [r.pf2.total_t for r in grp]),
                    "ip": fit_exponent(inv, [r.ip.total_t for r in grp]),
                })
    return Comparison(rows, diags)


def segment_ratio(plan: Plan) -> float:
    """Unsorted over sorted segment count for one interaction-picture plan."""
    a = ip_total(plan, "pga", True).segments_or_steps
    b = ip_total(plan, "pga", False).segments_or_steps
    return b / a


__all__ = [
    "CSV_COLUMNS",
    "CSV_SCHEMA",
    "Comparison",
    "ComparisonRow",
    "CostReport",
    "DEFAULT_SYNTHESIS",
    "SubroutineCost",
    "SynthesisModel",
    "best_ip",
    "compare",
    "fit_exponent",
    "ip_cost",
    "ip_subroutine_costs",
    "ip_total",
    "pf2_cost",
    "pf2_total",
    "rotation_t_cost",
    "segment_ratio",
    "trotter_subroutine_costs",
]
