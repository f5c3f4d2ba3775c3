"""Qubit-mapped, field-truncated Schwinger Hamiltonian as explicit matrices.

Conventions
-----------
* Sites ``r = 0 .. N-1``; even sites host electrons, odd sites positrons.
  Qubit value ``1`` means "occupied" in the Jordan-Wigner sense, so the
  staggered vacuum has ``|0>`` on even and ``|1>`` on odd sites.
* Link ``r`` sits to the right of site ``r`` and carries an integer field
  ``eps`` in ``[-Lambda, Lambda-1]``, stored as the unsigned offset
  ``u = eps + Lambda``.
* Basis ordering: fermion qubits are the most significant digits (site 0
  first), followed by the link registers (link 0 first), each a base-``2*Lambda``
  digit.  Basis index ``i = f * (2*Lambda)**L + sum_l u_l * (2*Lambda)**(L-1-l)``
  with ``f = sum_r n_r 2**(N-1-r)``.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterator, Literal

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, DomainError

DEFAULT_MAX_DIM = 2**20

Boundary = Literal["open", "periodic"]


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless lattice parameters of the Schwinger model.

    Parameters
    ----------
    x : float
        Hopping strength ``1/(g a)^2``.
    mu : float
        Dimensionless mass ``2 sqrt(x) m / g``.
    n_sites : int
        Number of staggered sites ``N``.
    lambda_cutoff : int
        Electric cutoff; link fields take values in ``[-Lambda, Lambda-1]``.
    alpha_bg : float
        Constant background field added inside ``(E_r + alpha)^2``.
    boundary : {"open", "periodic"}
    """

    x: float
    mu: float
    n_sites: int
    lambda_cutoff: int
    alpha_bg: float = 0.0
    boundary: Boundary = "open"

    def __post_init__(self):
        if not (self.x >= 0 and math.isfinite(self.x)):
            raise DomainError(f"x must be finite and non-negative, got {self.x}")
        if not (self.mu >= 0 and math.isfinite(self.mu)):
            raise DomainError(f"mu must be finite and non-negative, got {self.mu}")
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise DomainError(f"n_sites must be a positive integer, got {self.n_sites}")
        if int(self.lambda_cutoff) != self.lambda_cutoff or self.lambda_cutoff < 1:
            raise DomainError(f"lambda_cutoff must be an integer >= 1, got {self.lambda_cutoff}")
        if self.boundary not in ("open", "periodic"):
            raise DomainError(f"unknown boundary {self.boundary!r}")
        if self.boundary == "periodic" and self.n_sites < 2:
            raise DomainError("periodic boundary needs at least two sites")
        if not math.isfinite(self.alpha_bg):
            raise DomainError("alpha_bg must be finite")

    @property
    def eta(self) -> int:
        """Qubits per link register, ``ceil(log2(2 Lambda))`` (at least 1)."""
        return max(1, math.ceil(math.log2(2 * self.lambda_cutoff)))

    @property
    def link_count(self) -> int:
        return self.n_sites - 1 if self.boundary == "open" else self.n_sites

    @property
    def field_dim(self) -> int:
        return 2 * self.lambda_cutoff

    @property
    def hilbert_dim(self) -> int:
        return 2**self.n_sites * self.field_dim**self.link_count

    def replace(self, **changes) -> "ModelParams":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return ModelParams(**kw)


def _check_capacity(p: ModelParams, max_dim: int) -> int:
    dim = p.hilbert_dim
    if dim > max_dim:
        raise CapacityError(f"Hilbert dimension {dim} exceeds max_dim={max_dim}")
    return dim


# ---------------------------------------------------------------------------
# operator containers


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DiagonalOperator:
    """Real diagonal operator stored by its diagonal."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1:
            raise DomainError("diagonal values must be one-dimensional")
        if not np.all(np.isfinite(vals)):
            raise DomainError("diagonal values must be finite")
        object.__setattr__(self, "values", _frozen(vals))

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def to_dense(self) -> np.ndarray:
        return np.diag(self.values.astype(complex))

    def to_sparse(self) -> "SparseOperator":
        return SparseOperator(sp.diags(self.values.astype(complex), format="csr"), hermitian=True)

    def expectation(self, state) -> float:
        amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state)
        return float(np.real(np.vdot(amps, self.values * amps)))

    def __add__(self, other):
        if isinstance(other, DiagonalOperator):
            return DiagonalOperator(self.values + other.values)
        if isinstance(other, SparseOperator):
            return self.to_sparse() + other
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other: "DiagonalOperator") -> "DiagonalOperator":
        return DiagonalOperator(self.values - other.values)

    def scale(self, c: float) -> "DiagonalOperator":
        return DiagonalOperator(c * self.values)

    def write_triplets(self, dest) -> None:
        self.to_sparse().write_triplets(dest)


@dataclass(frozen=True)
class SparseOperator:
    """Complex sparse operator backed by a CSR matrix.

    The ``hermitian`` flag records that the builder guarantees conjugate
    symmetry; :meth:`is_hermitian` checks it numerically.
    """

    matrix: sp.csr_matrix
    hermitian: bool = False

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=complex)
        if m.shape[0] != m.shape[1]:
            raise DomainError(f"operator must be square, got shape {m.shape}")
        m.sum_duplicates()
        m.sort_indices()
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def entries(self) -> Iterator[tuple[int, int, complex]]:
        coo = self.matrix.tocoo()
        for i, j, v in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()):
            yield i, j, v

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def hermiticity_residual(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0

    def is_hermitian(self, tol: float = 1e-14) -> bool:
        return self.hermiticity_residual() <= tol

    def __add__(self, other):
        if isinstance(other, DiagonalOperator):
            other = other.to_sparse()
        if not isinstance(other, SparseOperator):
            return NotImplemented
        return SparseOperator(self.matrix + other.matrix, hermitian=self.hermitian and other.hermitian)

    __radd__ = __add__

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        return SparseOperator(self.matrix - other.matrix)

    def write_triplets(self, dest) -> None:
        """Write ``dim nnz`` followed by one ``i j re im`` row per stored entry.

        ``dest`` is a path or a writable text stream.  Values use ``repr``
        precision so a round trip is exact.
        """
        lines = [f"{self.dim} {self.nnz}"]
        lines += [f"{i} {j} {v.real!r} {v.imag!r}" for i, j, v in self.entries()]
        text = "\n".join(lines) + "\n"
        if isinstance(dest, (str, os.PathLike)):
            with open(dest, "w") as fh:
                fh.write(text)
        else:
            dest.write(text)

    @classmethod
    def read_triplets(cls, src, hermitian: bool = False) -> "SparseOperator":
        if isinstance(src, (str, os.PathLike)):
            with open(src) as fh:
                text = fh.read()
        else:
            text = src.read()
        rows = text.split("\n")
        dim, nnz = (int(v) for v in rows[0].split())
        data = np.loadtxt(io.StringIO("\n".join(rows[1 : nnz + 1])), ndmin=2) if nnz else np.zeros((0, 4))
        if data.shape[0] != nnz:
            raise DomainError(f"expected {nnz} entries, found {data.shape[0]}")
        m = sp.csr_matrix(
            (data[:, 2] + 1j * data[:, 3], (data[:, 0].astype(int), data[:, 1].astype(int))),
            shape=(dim, dim),
        )
        return cls(m, hermitian=hermitian)


@dataclass(frozen=True)
class StateVector:
    """Normalized complex amplitudes in the model basis."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-12:
            raise DomainError(f"state norm {norm} differs from 1 by more than 1e-12")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]


@dataclass(frozen=True)
class HamiltonianTerms:
    """All partitions of the Hamiltonian used by the simulation algorithms.

    ``h_i == h1e + h1o + h2e + h2o``; the ``1`` parts move even unsigned field
    values up by one, the ``2`` parts odd ones (wraparound included); ``e``/``o``
    is the parity of the link index.
    """

    h_e: DiagonalOperator
    h_m: DiagonalOperator
    h_i: SparseOperator
    h1e: SparseOperator
    h1o: SparseOperator
    h2e: SparseOperator
    h2o: SparseOperator

    @property
    def dim(self) -> int:
        return self.h_e.dim

    @property
    def h0(self) -> DiagonalOperator:
        return self.h_e + self.h_m

    def full(self) -> SparseOperator:
        return self.h0 + self.h_i

    def trotter_sequence(self) -> list:
        """The six-term ordered decomposition ``H_E, H_M, H1e, H2e, H1o, H2o``."""
        return [self.h_e, self.h_m, self.h1e, self.h2e, self.h1o, self.h2o]


# ---------------------------------------------------------------------------
# basis bookkeeping


@dataclass(frozen=True)
class Basis:
    """Decoded occupations and field values for every basis index."""

    params: ModelParams
    occupations: np.ndarray = field(repr=False)  # (dim, N) of 0/1
    fields: np.ndarray = field(repr=False)  # (dim, L) integer field values

    @property
    def dim(self) -> int:
        return self.occupations.shape[0]


def basis(p: ModelParams, max_dim: int = DEFAULT_MAX_DIM) -> Basis:
    dim = _check_capacity(p, max_dim)
    n, links, d = p.n_sites, p.link_count, p.field_dim
    idx = np.arange(dim, dtype=np.int64)
    nb = d**links
    f = idx // nb
    b = idx % nb
    occ = (f[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    place = d ** (links - 1 - np.arange(links)) if links else np.zeros(0, dtype=np.int64)
    fields = (b[:, None] // place[None, :]) % d - p.lambda_cutoff
    return Basis(p, _frozen(occ.astype(np.int8)), _frozen(fields.astype(np.int64)))


def basis_index(p: ModelParams, occupations, fields) -> int:
    """Basis index of the product state with the given site bits and link fields."""
    n, links, d, lam = p.n_sites, p.link_count, p.field_dim, p.lambda_cutoff
    occupations, fields = list(occupations), list(fields)
    if len(occupations) != n or len(fields) != links:
        raise DomainError("wrong number of occupations or fields")
    f = 0
    for bit in occupations:
        if bit not in (0, 1):
            raise DomainError("occupations must be 0 or 1")
        f = 2 * f + bit
    b = 0
    for eps in fields:
        if not -lam <= eps <= lam - 1:
            raise DomainError(f"field value {eps} outside [-{lam}, {lam - 1}]")
        b = d * b + (eps + lam)
    return f * d**links + b


# ---------------------------------------------------------------------------
# Hamiltonian terms


def build_electric_term(p: ModelParams, max_dim: int = DEFAULT_MAX_DIM) -> DiagonalOperator:
    """``H_E = sum_links (eps_r + alpha)^2`` as a diagonal."""
    bas = basis(p, max_dim)
    vals = np.sum((bas.fields + p.alpha_bg) ** 2, axis=1, dtype=float)
    return DiagonalOperator(vals)


def build_mass_term(p: ModelParams, max_dim: int = DEFAULT_MAX_DIM) -> DiagonalOperator:
    """``H_M = (mu/2) sum_r (-1)^r (1 - Z_r)``, i.e. ``mu sum_r (-1)^r n_r``."""
    bas = basis(p, max_dim)
    signs = np.where(np.arange(p.n_sites) % 2 == 0, 1.0, -1.0)
    return DiagonalOperator(p.mu * (bas.occupations @ signs))


def _hopping_transitions(p: ModelParams, bas: Basis):
    """Yield ``(link, old, new, old_u)`` for every ``U_l sigma+_l sigma-_{l+1}`` transition."""
    n, d, links = p.n_sites, p.field_dim, p.link_count
    nb = d**links
    idx = np.arange(bas.dim, dtype=np.int64)
    for link in range(links):
        a, b = link, (link + 1) % n
        mask = (bas.occupations[:, a] == 0) & (bas.occupations[:, b] == 1)
        old = idx[mask]
        u = bas.fields[mask, link] + p.lambda_cutoff
        du = (u + 1) % d - u
        shift = (2 ** (n - 1 - a) - 2 ** (n - 1 - b)) * nb + du * d ** (links - 1 - link)
        yield link, old, old + shift, u


def _hermitian_from(dim: int, rows, cols, vals) -> SparseOperator:
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    vals = np.concatenate(vals) if vals else np.zeros(0)
    m = sp.coo_matrix(
        (np.concatenate([vals, vals]).astype(complex), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(dim, dim),
    )
    csr = m.tocsr()
    csr.eliminate_zeros()
    return SparseOperator(csr, hermitian=True)


def build_interaction_term(p: ModelParams, max_dim: int = DEFAULT_MAX_DIM) -> SparseOperator:
    """``H_I = x sum_links (U_l sigma+_l sigma-_{l+1} + h.c.)`` with cyclic ``U``.

    Nearest-neighbour Jordan-Wigner strings cancel, so no Z factors appear.
    The periodic closing link is taken in the same string-free form.
    """
    bas = basis(p, max_dim)
    rows, cols, vals = [], [], []
    for _, old, new, _ in _hopping_transitions(p, bas):
        rows.append(new)
        cols.append(old)
        vals.append(np.full(old.shape, p.x))
    return _hermitian_from(bas.dim, rows, cols, vals)


def split_interaction(p: ModelParams, max_dim: int = DEFAULT_MAX_DIM) -> HamiltonianTerms:
    bas = basis(p, max_dim)
    parts = {key: ([], [], []) for key in ("1e", "1o", "2e", "2o")}
    for link, old, new, u in _hopping_transitions(p, bas):
        parity = "e" if link % 2 == 0 else "o"
        for kind, sel in (("1", u % 2 == 0), ("2", u % 2 == 1)):
            rows, cols, vals = parts[kind + parity]
            rows.append(new[sel])
            cols.append(old[sel])
            vals.append(np.full(int(sel.sum()), p.x))
    ops = {key: _hermitian_from(bas.dim, *parts[key]) for key in parts}
    return HamiltonianTerms(
        h_e=build_electric_term(p, max_dim),
        h_m=build_mass_term(p, max_dim),
        h_i=build_interaction_term(p, max_dim),
        h1e=ops["1e"],
        h1o=ops["1o"],
        h2e=ops["2e"],
        h2o=ops["2o"],
    )


def build_hamiltonian(p: ModelParams, max_dim: int = DEFAULT_MAX_DIM) -> SparseOperator:
    return build_electric_term(p, max_dim) + build_mass_term(p, max_dim) + build_interaction_term(p, max_dim)


# ---------------------------------------------------------------------------
# observables and states


def build_observable(p: ModelParams, kind: str, k0: int | None = None, k: int | None = None,
                     max_dim: int = DEFAULT_MAX_DIM) -> DiagonalOperator:
    """Diagonal observables of the quench experiment.

    ``kind`` is ``"density"``, ``"half_polarization"`` or
    ``"local_polarization"`` (the latter needs ``k0`` and an even ``k``).
    """
    bas = basis(p, max_dim)
    if kind == "density":
        # (1 - (-1)^r Z_r)/2 is n_r on even sites and 1 - n_r on odd sites
        occ = bas.occupations.astype(float)
        odd = np.arange(p.n_sites) % 2 == 1
        occ[:, odd] = 1.0 - occ[:, odd]
        return DiagonalOperator(occ.sum(axis=1) / p.n_sites)
    if kind == "half_polarization":
        mid = p.n_sites // 2
        if mid >= p.link_count:
            raise DomainError(f"link {mid} does not exist for {p.link_count} links")
        return DiagonalOperator((bas.fields[:, mid] - bas.fields[:, 0]).astype(float))
    if kind == "local_polarization":
        if k0 is None or k is None:
            raise DomainError("local_polarization needs k0 and k")
        if k % 2:
            raise DomainError("window size k must be even")
        lo, hi = k0 - k // 2, k0 + k // 2
        if not (k0 > k / 2 and hi <= p.link_count - 1):
            raise DomainError(f"window [{lo}, {hi}] not inside links 1..{p.link_count - 1}")
        return DiagonalOperator((bas.fields[:, hi] - bas.fields[:, lo]).astype(float))
    raise DomainError(f"unknown observable {kind!r}")


def build_gauss_operator(p: ModelParams, r: int, max_dim: int = DEFAULT_MAX_DIM) -> DiagonalOperator:
    """``G_r = E_r - E_{r-1} - rho_r`` on an interior site.

    The charge is ``rho_r = n_r - (1 - (-1)^r)/2``: an occupied even site
    carries ``+1``, an empty odd site ``-1``.  With this sign ``G_r``
    commutes with every hopping transition except the cyclic wraparound
    of a truncated link.
    """
    if not 1 <= r <= p.n_sites - 2:
        raise DomainError(f"site {r} is not interior for N={p.n_sites}")
    bas = basis(p, max_dim)
    rho = bas.occupations[:, r] - (r % 2)
    return DiagonalOperator((bas.fields[:, r] - bas.fields[:, r - 1] - rho).astype(float))


def build_quench_state(p: ModelParams, gamma: int, max_dim: int = DEFAULT_MAX_DIM) -> StateVector:
    """Staggered vacuum ``|0>|g>|1>|g>|0>...`` with every link at field ``gamma``."""
    lam = p.lambda_cutoff
    if int(gamma) != gamma or not -lam <= gamma <= lam - 1:
        raise DomainError(f"gamma={gamma} outside [-{lam}, {lam - 1}]")
    dim = _check_capacity(p, max_dim)
    occ = [r % 2 for r in range(p.n_sites)]
    amps = np.zeros(dim, dtype=complex)
    amps[basis_index(p, occ, [int(gamma)] * p.link_count)] = 1.0
    return StateVector(amps)


# ---------------------------------------------------------------------------
# norms


def lcu_one_norm(p: ModelParams) -> float:
    """Coefficient 1-norm of the Pauli LCU of ``H_I``: 8 terms of weight x/4 per link."""
    return 2.0 * p.x * p.link_count


def site_lcu_one_norm(p: ModelParams) -> float:
    """The rescaling factor ``2 N x`` used for block-encoding cost accounting."""
    return 2.0 * p.n_sites * p.x


@dataclass(frozen=True)
class NormBounds:
    h0_norm: float
    v_norm: float


def norm_bounds(p: ModelParams) -> NormBounds:
    """Upper bounds on ``||H_E + H_M||`` and ``||H_I||`` from the parameters alone."""
    lam, a = p.lambda_cutoff, p.alpha_bg
    e_max = p.link_count * max((a - lam) ** 2, (a + lam - 1) ** 2)
    h0 = e_max + p.mu * math.ceil(p.n_sites / 2)
    return NormBounds(h0_norm=float(h0), v_norm=lcu_one_norm(p))
