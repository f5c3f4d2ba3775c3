"""Second-order product formula over the six-term Hamiltonian split."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import CapacityError, DomainError
from .model import DEFAULT_MAX_DIM, HamiltonianTerms, ModelParams, split_interaction
from .oracle import ORACLE_MAX_DIM, exact_evolution, spectral_norm


def commutator_bound_rho(p: ModelParams) -> float:
    """Dimensionless nested-commutator prefactor ``rho(x, mu)`` of the PF2 error ``rho t^3 / r^2``."""
    n, x, mu, lam = p.n_sites, p.x, p.mu, p.lambda_cutoff
    first = 8 * n * x * mu**2 + 2 * n * x * (4 * lam**2 - 1) + 80 * (n - 1) * x**3
    second = (2 * x * mu * n * (2 * lam - 1) + 32 * n * x**2 * mu
              + 16 * n * x**2 * (2 * lam + 1) + 72 * (n - 1) * x**3)
    return first / 12.0 + second / 24.0


@dataclass(frozen=True)
class TrotterPlan:
    steps: int
    tau: float
    eps_trotter: float
    rho_bound: float

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise DomainError(f"steps must be a positive integer, got {self.steps}")

    def to_record(self) -> dict:
        return asdict(self)


def trotter_steps_from_rho(rho: float, t: float, eps_t: float) -> TrotterPlan:
    if t <= 0 or eps_t <= 0:
        raise DomainError("trotter_steps needs t > 0 and eps_t > 0")
    r = max(1, math.ceil(math.sqrt(rho * t**3 / eps_t)))
    return TrotterPlan(steps=r, tau=t / r, eps_trotter=eps_t, rho_bound=rho)


def trotter_steps(p: ModelParams, t: float, eps_t: float) -> TrotterPlan:
    """``r = ceil(sqrt(rho t^3 / eps_t))``, at least one step."""
    return trotter_steps_from_rho(commutator_bound_rho(p), t, eps_t)


def _term_exponentials(terms: HamiltonianTerms, dt: float):
    """Exact ``exp(-i H_l dt)`` for the six terms; diagonals stay as phase vectors."""
    seq = terms.trotter_sequence()
    return [np.exp(-1j * dt * h.values) if i < 2 else exact_evolution(h, dt, max_dim=terms.dim)
            for i, h in enumerate(seq)]


def _apply(factor, mat):
    # left-multiply mat by a factor that is either a phase vector or a matrix
    return factor[:, None] * mat if factor.ndim == 1 else factor @ mat


def pf2_step(terms: HamiltonianTerms, tau: float) -> np.ndarray:
    """One symmetric step ``prod_{l=1..5} e^{-iH_l tau/2} e^{-iH_6 tau} prod_{l=5..1} e^{-iH_l tau/2}``."""
    half = _term_exponentials(terms, tau / 2)
    full_last = exact_evolution(terms.trotter_sequence()[5], tau, max_dim=terms.dim)
    step = np.eye(terms.dim, dtype=complex)
    # the rightmost factor acts first, so build from the right
    for factor in half[:5]:
        step = _apply(factor, step)
    step = full_last @ step
    for factor in reversed(half[:5]):
        step = _apply(factor, step)
    return step


def pf2_operator(terms: HamiltonianTerms, t: float, r: int, merge: bool = True,
                 max_dim: int = ORACLE_MAX_DIM) -> np.ndarray:
    """``S(t)`` with ``r`` symmetric steps.

    With ``merge`` the adjacent ``e^{-iH_E tau/2}`` factors of consecutive
    steps are fused into one ``e^{-iH_E tau}``; the product is unchanged.
    """
    if int(r) != r or r < 1:
        raise DomainError(f"r must be a positive integer, got {r}")
    if terms.dim > max_dim:
        raise CapacityError(f"dimension {terms.dim} exceeds max_dim={max_dim}")
    tau = t / r
    if not merge or r == 1:
        return np.linalg.matrix_power(pf2_step(terms, tau), r)
    # step = A X A with A = e^{-iH_E tau/2}, so step^r = A^{-1} (A^2 X)^r A
    phase_half = np.exp(-1j * (tau / 2) * terms.h_e.values)
    core = phase_half[:, None] * pf2_step(terms, tau) * phase_half.conj()[None, :]
    power = np.linalg.matrix_power(core, r)
    return phase_half.conj()[:, None] * power * phase_half[None, :]


def measured_trotter_error(p: ModelParams, t: float, r: int, max_dim: int = ORACLE_MAX_DIM,
                           terms: HamiltonianTerms | None = None) -> float:
    """``||exp(-iHt) - S(t)||`` in spectral norm."""
    if terms is None:
        terms = split_interaction(p, min(max_dim, DEFAULT_MAX_DIM))
    exact = exact_evolution(terms.full(), t, max_dim)
    return spectral_norm(exact - pf2_operator(terms, t, r, max_dim=max_dim))


def trotter_bound(p: ModelParams, t: float, r: int) -> float:
    return commutator_bound_rho(p) * t**3 / r**2


__all__ = [
    "TrotterPlan",
    "commutator_bound_rho",
    "measured_trotter_error",
    "pf2_operator",
    "pf2_step",
    "trotter_bound",
    "trotter_steps",
    "trotter_steps_from_rho",
]
