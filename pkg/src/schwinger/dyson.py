"""Truncated, discretized Dyson series in the interaction picture.

The series is evaluated on the grid ``s_m = m * Delta`` (``m = 0..M-1``,
``Delta = t / M``) with a prefix recurrence, so order ``K`` costs ``O(K M)``
matrix products instead of a sum over ``O(M^K)`` index tuples.  Two tuple sets
are supported: strictly increasing indices (no collisions) and non-decreasing
indices in which a run of ``n`` repeated indices carries weight ``1/n!``
(collisions).  The weighted form is what ``(1/k!) sum_{all tuples} T[...]``
reduces to, and it is the operator whose error the collision bound controls.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import bisect

from . import _kernels
from .errors import CapacityError, DomainError, NumericalError
from .model import ModelParams, build_electric_term, build_interaction_term, build_mass_term, norm_bounds
from .oracle import ORACLE_MAX_DIM, interaction_picture_unitary, spectral_norm

DEFAULT_MAX_PRODUCTS = 10**5
LN2 = math.log(2.0)

# ---------------------------------------------------------------------------
# Lambert W


def lambert_w0(z: float, tol: float = 1e-15, max_iter: int = 100) -> float:
    """Principal branch ``W0(z)`` for real ``z >= -1/e`` by Halley iteration."""
    z = float(z)
    branch = -math.exp(-1.0)
    if math.isnan(z) or z < branch:
        raise DomainError(f"lambert_w0 needs z >= -1/e, got {z}")
    if z == 0.0:
        return 0.0
    if z == branch:
        return -1.0
    if math.isinf(z):
        return math.inf
    if z < -0.25:
        # series about the branch point
        q = math.sqrt(max(0.0, 2.0 * (1.0 + math.e * z)))
        w = -1.0 + q - q * q / 3.0
    elif z < 3.0:
        w = math.log1p(z) * (1.0 - math.log1p(math.log1p(z)) / (2.0 + math.log1p(z)))
    else:
        lz = math.log(z)
        w = lz - math.log(lz)
    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= step
        if abs(step) <= tol * (1.0 + abs(w)):
            return w
    if abs(w * math.exp(w) - z) <= 1e-12 * max(1.0, abs(z)):
        return w
    raise NumericalError(f"Halley iteration for W0({z}) did not converge")


# ---------------------------------------------------------------------------
# truncation order and grid size


@dataclass(frozen=True)
class TruncationOrder:
    K: int
    branch: str  # "lambert", "explicit" or "trivial"
    lambert_K: int | None
    explicit_K: int | None


def truncation_tail_bound(v_norm: float, t: float, K: int) -> float:
    """``2 (t ||V||)^(K+1) / (K+1)!`` evaluated in log space."""
    vt = v_norm * t
    if vt == 0.0:
        return 0.0
    return 2.0 * math.exp((K + 1) * math.log(vt) - math.lgamma(K + 2))


def truncation_order(v_norm: float, t: float, eps1: float) -> TruncationOrder:
    """Smallest certified truncation order from the Lambert-W and explicit formulas.

    Both candidates also satisfy ``K >= 2 ||V|| t``.  The explicit candidate
    ``max(2vt, e vt + ln(1/eps1))`` is always certified because
    ``(a / (a + L))^(a + L) <= exp(-L)``; the smaller of the two is returned.
    """
    if not 0.0 < eps1 < 1.0:
        raise DomainError(f"eps1 must lie in (0, 1), got {eps1}")
    if v_norm < 0 or t < 0:
        raise DomainError("v_norm and t must be non-negative")
    vt = v_norm * t
    if vt == 0.0:
        return TruncationOrder(0, "trivial", None, None)
    log_inv = math.log(1.0 / eps1)
    floor = math.ceil(2.0 * vt)
    k_lam = max(floor, math.ceil(log_inv / lambert_w0(log_inv / (math.e * vt)) - 1.0))
    k_exp = math.ceil(max(2.0 * vt, math.e * vt + log_inv))
    K, branch = (k_lam, "lambert") if k_lam <= k_exp else (k_exp, "explicit")
    if truncation_tail_bound(v_norm, t, K) > eps1 * (1.0 + 1e-12):
        raise NumericalError(f"K={K} from {branch} branch fails the tail check")
    return TruncationOrder(K, branch, k_lam, k_exp)


def next_pow2(value: float) -> int:
    """Smallest power of two that is at least ``value`` (and at least 1)."""
    n = max(1, math.ceil(value))
    return 1 << (n - 1).bit_length()


@dataclass(frozen=True)
class DiscretizationCount:
    M: int
    branch: str  # "h0", "order" or "error"
    candidates: dict

    @property
    def raw(self) -> float:
        return max(self.candidates.values())


def discretization_candidates(v_norm: float, h0_norm: float, t: float, eps2: float, K: int,
                              collisions: bool) -> dict:
    e_vt = math.exp(t * v_norm)
    if collisions:
        err = 6.0 * t * t * h0_norm * v_norm * e_vt / eps2
    else:
        err = 2.0 * t * t * v_norm * e_vt * (h0_norm + 2.0 * v_norm) / eps2
    return {"h0": 2.0 * t * h0_norm, "order": (K - 1) ** 2 / LN2, "error": err}


def discretization_count(v_norm: float, h0_norm: float, t: float, eps2: float, K: int,
                         collisions: bool) -> DiscretizationCount:
    """Grid size ``M`` (a power of two) meeting every lower bound for the chosen variant."""
    if not 0.0 < eps2 < 1.0:
        raise DomainError(f"eps2 must lie in (0, 1), got {eps2}")
    if K < 0:
        raise DomainError("K must be non-negative")
    cands = discretization_candidates(v_norm, h0_norm, t, eps2, K, collisions)
    branch = max(cands, key=cands.get)
    return DiscretizationCount(next_pow2(cands[branch]), branch, cands)


# ---------------------------------------------------------------------------
# configuration and evaluation


@dataclass(frozen=True)
class DysonConfig:
    """Everything needed to evaluate one truncated, discretized Dyson segment."""

    K: int
    M: int
    collisions: bool
    t_seg: float
    t0: float = LN2
    alpha_v: float = 0.0
    eps1: float | None = None
    eps2: float | None = None
    k_branch: str = ""
    m_branch: str = ""

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 0:
            raise DomainError(f"K must be a non-negative integer, got {self.K}")
        if int(self.M) != self.M or self.M < 1 or (self.M & (self.M - 1)):
            raise DomainError(f"M must be a positive power of two, got {self.M}")
        if not (self.t_seg >= 0 and math.isfinite(self.t_seg)):
            raise DomainError("t_seg must be finite and non-negative")

    @property
    def delta(self) -> float:
        return self.t_seg / self.M

    def to_record(self) -> dict:
        return asdict(self)


def certify_segment(v_norm: float, h0_norm: float, t_seg: float, eps1: float, eps2: float,
                    collisions: bool, t0: float = LN2, alpha_v: float = 0.0) -> DysonConfig:
    """Certified ``(K, M)`` for one segment of length ``t_seg``."""
    trunc = truncation_order(v_norm, t_seg, eps1)
    disc = discretization_count(v_norm, h0_norm, t_seg, eps2, trunc.K, collisions)
    return DysonConfig(
        K=trunc.K, M=disc.M, collisions=collisions, t_seg=t_seg, t0=t0, alpha_v=alpha_v,
        eps1=eps1, eps2=eps2, k_branch=trunc.branch, m_branch=disc.branch,
    )


def _mode(collisions: bool, weighting: str) -> int:
    if not collisions:
        return _kernels.MODE_STRICT
    if weighting == "factorial":
        return _kernels.MODE_WEIGHTED
    if weighting == "none":
        return _kernels.MODE_UNWEIGHTED
    raise DomainError(f"unknown collision weighting {weighting!r}")


def _frame_inputs(p: ModelParams, max_dim: int):
    if p.hilbert_dim > max_dim:
        raise CapacityError(f"Hilbert dimension {p.hilbert_dim} exceeds max_dim={max_dim}")
    d = (build_electric_term(p) + build_mass_term(p)).values
    v = build_interaction_term(p).to_dense()
    return v, d


def dyson_orders(p: ModelParams, t: float, K: int, M: int, collisions: bool, *,
                 weighting: str = "factorial", max_products: int = DEFAULT_MAX_PRODUCTS,
                 max_dim: int = ORACLE_MAX_DIM, backend: str | None = None) -> np.ndarray:
    """Stack of scaled orders ``(-i Delta)^k B_k`` for ``k = 0..K``; shape ``(K+1, dim, dim)``.

    Partial sums over the first axis give the series at every lower order.
    ``weighting="none"`` selects unit weights on repeated indices, kept only
    to compare against the weighted collision series.
    """
    if K * M > max_products:
        raise CapacityError(f"K*M={K * M} exceeds max_products={max_products}")
    v, d = _frame_inputs(p, max_dim)
    fn = _kernels.dyson_terms if backend is None else _kernels.get_backend(backend)
    return fn(v, d, t / M, int(M), int(K), _mode(collisions, weighting))


def dyson_series_matrix(p: ModelParams, cfg: DysonConfig, **kw) -> np.ndarray:
    """``D_{K,M}(t_seg)`` for the variant selected by ``cfg.collisions``."""
    return dyson_orders(p, cfg.t_seg, cfg.K, cfg.M, cfg.collisions, **kw).sum(axis=0)


@dataclass(frozen=True)
class DysonErrorReport:
    trunc_plus_disc: float
    bound: float | None
    against_bound: bool | None


def measured_dyson_error(p: ModelParams, cfg: DysonConfig, **kw) -> DysonErrorReport:
    """``||U_I(t_seg) - D_{K,M}(t_seg)||`` compared with ``eps1 + eps2`` when recorded."""
    max_dim = kw.get("max_dim", ORACLE_MAX_DIM)
    exact = interaction_picture_unitary(p, cfg.t_seg, max_dim)
    err = spectral_norm(exact - dyson_series_matrix(p, cfg, **kw))
    if cfg.eps1 is None or cfg.eps2 is None:
        return DysonErrorReport(err, None, None)
    bound = cfg.eps1 + cfg.eps2
    return DysonErrorReport(err, bound, err <= bound)


# ---------------------------------------------------------------------------
# segmentation


def t0_for_beta(K: int, beta_target: float = 2.0) -> float:
    """Solve ``sum_{k<=K} t0^k / k! = beta_target`` for ``t0`` in ``(0, 2]``."""
    if int(K) != K or K < 1:
        raise DomainError(f"K must be an integer >= 1, got {K}")

    def f(x):
        return math.fsum(x**k / math.factorial(k) for k in range(K + 1)) - beta_target

    if f(0.0) >= 0.0 or f(2.0) < 0.0:
        raise NumericalError(f"no root of the truncated exponential in (0, 2] for beta={beta_target}")
    return bisect(f, 0.0, 2.0, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)


def segment_count(alpha_v: float, t: float, t0: float) -> int:
    """``ceil(alpha_v t / t0)``, at least 1.

    A relative slack of 1e-12 absorbs rounding when ``alpha_v t`` is an
    integer multiple of ``t0`` up to floating-point error.
    """
    if alpha_v <= 0 or t <= 0 or t0 <= 0:
        raise DomainError("segment_count needs positive alpha_v, t and t0")
    ratio = alpha_v * t / t0
    return max(1, math.ceil(ratio * (1.0 - 1e-12)))


@dataclass(frozen=True)
class SegmentSchedule:
    r: int
    t_full: float
    t_last: float
    eps_segment: float
    config: DysonConfig


def segment_schedule(p: ModelParams, t: float, eps_prime: float, *, collisions: bool = True,
                     t0: float = LN2, alpha_v: float | None = None) -> SegmentSchedule:
    """Segment count, lengths and the certified per-segment ``(K, M)``.

    ``alpha_v`` defaults to the exact interaction 1-norm ``2 x L``.  Each
    segment gets ``eps'/r``, split evenly between truncation and discretization.
    """
    if p.x <= 0:
        raise DomainError("segmentation needs x > 0")
    if not 0 < eps_prime < 1:
        raise DomainError("eps_prime must lie in (0, 1)")
    nb = norm_bounds(p)
    alpha = nb.v_norm if alpha_v is None else float(alpha_v)
    if alpha < nb.v_norm:
        raise DomainError(f"alpha_v={alpha} is below the interaction norm bound {nb.v_norm}")
    r = segment_count(alpha, t, t0)
    t_full = min(t0 / alpha, t)
    t_last = t - (r - 1) * t0 / alpha
    eps_seg = eps_prime / r
    cfg = certify_segment(nb.v_norm, nb.h0_norm, t_full, eps_seg / 2, eps_seg / 2, collisions, t0, alpha)
    return SegmentSchedule(r, t_full, t_last, eps_seg, cfg)


def segmented_evolution(p: ModelParams, t: float, eps_prime: float, *, collisions: bool = True,
                        t0: float = LN2, alpha_v: float | None = None,
                        max_products: int = 10**7, max_dim: int = ORACLE_MAX_DIM,
                        return_schedule: bool = False):
    """Approximate ``exp(-iHt)`` by ``r`` interaction-picture segments.

    ``W = exp(-i H0 t') D(t') [exp(-i H0 t_s) D(t_s)]^(r-1)`` with
    ``t_s = t0/alpha_v`` and ``t' = t - (r-1) t_s``.  The final partial
    segment reuses the ``(K, M)`` certified for the full length.
    """
    sched = segment_schedule(p, t, eps_prime, collisions=collisions, t0=t0, alpha_v=alpha_v)
    cfg = sched.config
    d = (build_electric_term(p) + build_mass_term(p)).values

    def segment(length):
        seg_cfg = DysonConfig(cfg.K, cfg.M, collisions, length, t0, cfg.alpha_v)
        dmat = dyson_series_matrix(p, seg_cfg, max_products=max_products, max_dim=max_dim)
        return np.exp(-1j * length * d)[:, None] * dmat

    w = segment(sched.t_last)
    if sched.r > 1:
        w = w @ np.linalg.matrix_power(segment(sched.t_full), sched.r - 1)
    return (w, sched) if return_schedule else w
