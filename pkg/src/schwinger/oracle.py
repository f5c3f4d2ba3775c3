"""Exact dense reference evolutions and norms.

Everything here is brute force on purpose: dense Hermitian eigendecomposition
for ``exp(-iHt)`` and explicit frame rotations for the interaction picture.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, DomainError, NumericalError
from .model import (
    DEFAULT_MAX_DIM,
    DiagonalOperator,
    ModelParams,
    SparseOperator,
    StateVector,
    basis,
    build_electric_term,
    build_hamiltonian,
    build_mass_term,
)

ORACLE_MAX_DIM = 4096
_DENSE_NORM_DIM = 512


def as_dense(op) -> np.ndarray:
    """Dense complex matrix for any supported operator representation."""
    if isinstance(op, (SparseOperator, DiagonalOperator)):
        return op.to_dense()
    if sp.issparse(op):
        return op.toarray().astype(complex)
    return np.asarray(op, dtype=complex)


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    return unitarity_residual(u) <= tol


def unitarity_residual(u: np.ndarray) -> float:
    """``||U^dagger U - 1||`` in spectral norm."""
    u = np.asarray(u)
    return spectral_norm(u.conj().T @ u - np.eye(u.shape[0]))


def _check_dim(dim: int, max_dim: int) -> None:
    if dim > max_dim:
        raise CapacityError(f"dense dimension {dim} exceeds max_dim={max_dim}")


def exact_evolution(h, t: float, max_dim: int = ORACLE_MAX_DIM, herm_tol: float = 1e-12) -> np.ndarray:
    """``exp(-i H t)`` from a dense Hermitian eigendecomposition.

    ``h`` may be a :class:`SparseOperator`, a :class:`DiagonalOperator`, a
    dense array, or a sequence of any of those (summed).
    """
    if isinstance(h, DiagonalOperator):
        _check_dim(h.dim, max_dim)
        return np.diag(np.exp(-1j * t * h.values))
    if isinstance(h, (list, tuple)):
        mats = [as_dense(term) for term in h]
        if not mats:
            raise DomainError("empty Hamiltonian term list")
        _check_dim(mats[0].shape[0], max_dim)
        dense = sum(mats[1:], mats[0])
    else:
        if isinstance(h, SparseOperator):
            _check_dim(h.dim, max_dim)
        dense = as_dense(h)
        _check_dim(dense.shape[0], max_dim)
    asym = np.max(np.abs(dense - dense.conj().T)) if dense.size else 0.0
    if asym > herm_tol * max(1.0, np.max(np.abs(dense))):
        raise DomainError(f"Hamiltonian is not Hermitian (residual {asym:.3e})")
    evals, evecs = np.linalg.eigh(dense)
    return (evecs * np.exp(-1j * t * evals)) @ evecs.conj().T


def interaction_frame(v, h0_diag: DiagonalOperator, s: float):
    """``V(s) = exp(i H0 s) V exp(-i H0 s)`` for diagonal ``H0``.

    Returns the same representation as the input (sparse in, sparse out).
    """
    d = h0_diag.values
    if isinstance(v, SparseOperator):
        if v.dim != h0_diag.dim:
            raise DomainError("dimension mismatch between V and H0")
        coo = v.matrix.tocoo()
        phase = np.exp(1j * s * (d[coo.row] - d[coo.col]))
        m = sp.csr_matrix((coo.data * phase, (coo.row, coo.col)), shape=coo.shape)
        return SparseOperator(m, hermitian=v.hermitian)
    dense = as_dense(v)
    if dense.shape[0] != h0_diag.dim:
        raise DomainError("dimension mismatch between V and H0")
    ph = np.exp(1j * s * d)
    return ph[:, None] * dense * ph.conj()[None, :]


def interaction_picture_unitary(p: ModelParams, t: float, max_dim: int = ORACLE_MAX_DIM) -> np.ndarray:
    """``U_I(t) = exp(i H0 t) exp(-i H t)`` with ``H0 = H_E + H_M``."""
    _check_dim(p.hilbert_dim, max_dim)
    h0 = build_electric_term(p) + build_mass_term(p)
    u = exact_evolution(build_hamiltonian(p), t, max_dim)
    return np.exp(1j * t * h0.values)[:, None] * u


def spectral_norm(a, seed: int = 0x5EED, rtol: float = 1e-9, max_iter: int = 20000,
                  dense_dim: int = _DENSE_NORM_DIM) -> float:
    """Largest singular value.

    Small matrices use LAPACK directly.  Larger ones run power iteration on
    ``A^dagger A`` from a fixed random start, so repeated calls agree bit for bit.
    """
    a = as_dense(a) if not sp.issparse(a) else a
    if a.shape[0] == 0:
        return 0.0
    if not sp.issparse(a) and max(a.shape) <= dense_dim:
        return float(np.linalg.norm(a, 2))
    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(a.shape[1]) + 1j * rng.standard_normal(a.shape[1])
    vec /= np.linalg.norm(vec)
    prev = 0.0
    ah = a.conj().T
    for _ in range(max_iter):
        w = ah @ (a @ vec)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        vec = w / lam
        if abs(lam - prev) <= rtol * lam * 1e-3:
            return float(np.sqrt(lam))
        prev = lam
    raise NumericalError(f"power iteration did not converge in {max_iter} steps")


def field_window_projector(p: ModelParams, lo: int, hi: int, max_dim: int = DEFAULT_MAX_DIM) -> np.ndarray:
    """Boolean mask of basis states whose every link field lies in ``[lo, hi]``."""
    bas = basis(p, max_dim)
    return np.all((bas.fields >= lo) & (bas.fields <= hi), axis=1)


def leakage_norm(p_small: ModelParams, p_big: ModelParams, t: float, lambda_t: int,
                 max_dim: int = ORACLE_MAX_DIM) -> float:
    """``|| (1 - Pi_{[-lambda_t, lambda_t]}) exp(-iHt) Pi_{[-Lambda0, Lambda0]} ||`` at cutoff ``p_big``.

    The Hamiltonian is built with ``p_big.lambda_cutoff``; the windows are
    per-link and symmetric, clipped to the fields representable at ``p_big``.
    """
    for field_name in ("x", "mu", "n_sites", "alpha_bg", "boundary"):
        if getattr(p_small, field_name) != getattr(p_big, field_name):
            raise DomainError(f"p_small and p_big differ in {field_name}")
    lam0 = p_small.lambda_cutoff
    if p_big.lambda_cutoff <= lambda_t:
        raise DomainError(f"Lambda_big={p_big.lambda_cutoff} must exceed Lambda(t)={lambda_t}")
    if lambda_t < lam0:
        raise DomainError("Lambda(t) must be at least Lambda0")
    _check_dim(p_big.hilbert_dim, max_dim)
    inner = field_window_projector(p_big, -lam0, lam0)
    outer = field_window_projector(p_big, -lambda_t, lambda_t)
    u = exact_evolution(build_hamiltonian(p_big), t, max_dim)
    block = u[np.ix_(~outer, inner)]
    return spectral_norm(block) if block.size else 0.0


def evolve_state(h, state: StateVector, t: float, max_dim: int = ORACLE_MAX_DIM) -> StateVector:
    u = exact_evolution(h, t, max_dim)
    amps = u @ state.amplitudes
    return StateVector(amps / np.linalg.norm(amps))


def expectation_trajectory(h, observable, state: StateVector, times, max_dim: int = ORACLE_MAX_DIM) -> np.ndarray:
    """``<psi(t)|O|psi(t)>`` over ``times`` using a single eigendecomposition of ``H``."""
    dense = as_dense(h)
    _check_dim(dense.shape[0], max_dim)
    evals, evecs = np.linalg.eigh(dense)
    coeffs = evecs.conj().T @ state.amplitudes
    obs = as_dense(observable)
    out = []
    for t in times:
        psi = evecs @ (np.exp(-1j * t * evals) * coeffs)
        out.append(np.real(np.vdot(psi, obs @ psi)))
    return np.asarray(out)


__all__ = [
    "ORACLE_MAX_DIM",
    "as_dense",
    "evolve_state",
    "exact_evolution",
    "expectation_trajectory",
    "field_window_projector",
    "interaction_frame",
    "interaction_picture_unitary",
    "is_unitary",
    "leakage_norm",
    "spectral_norm",
    "unitarity_residual",
]
