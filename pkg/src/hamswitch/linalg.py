"""Dense complex linear-algebra kernels for small multi-spin Hilbert spaces.

Everything here operates on :class:`DenseOperator`, a thin immutable wrapper
around a square complex matrix that remembers the tensor-product structure
(``site_dims``) of the space it acts on.  Dimensions are desk-scale by design:
a hard cap of 2**8 per axis catches accidental exponential blowup early.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

MAX_DIM = 256

HERMITICITY_TOL = 1e-9
UNITARITY_TOL = 1e-10
RANK_TOL = 1e-12


class NonHermitianError(ValueError):
    """Raised when an operation requires a Hermitian matrix and gets one that is not."""


class SingularMatrixError(ValueError):
    """Raised when a (near-)singular matrix makes a polar factor ill-defined."""


def _as_complex_matrix(entries) -> np.ndarray:
    a = np.asarray(entries, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"operator entries must be a square matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class DenseOperator:
    """Square complex matrix with the tensor-product structure of its space.

    Parameters
    ----------
    entries : array_like
        ``dim x dim`` complex matrix.
    site_dims : tuple of int
        Ordered local dimensions whose product equals ``dim``.  An empty
        tuple denotes the trivial one-dimensional space (scalars that fall
        out of a full partial trace).
    """

    entries: np.ndarray
    site_dims: tuple[int, ...] = field(default=())

    def __post_init__(self):
        a = _as_complex_matrix(self.entries)
        dims = tuple(int(d) for d in self.site_dims)
        if not dims:
            dims = () if a.shape[0] == 1 else (a.shape[0],)
        prod = int(np.prod(dims)) if dims else 1
        if prod != a.shape[0]:
            raise ValueError(f"product of site_dims {dims} is {prod}, but dim is {a.shape[0]}")
        if a.shape[0] > MAX_DIM:
            raise ValueError(f"dimension {a.shape[0]} exceeds the cap of {MAX_DIM}")
        a = a.copy()
        a.flags.writeable = False
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "site_dims", dims)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def n_sites(self) -> int:
        return len(self.site_dims)

    def dagger(self) -> "DenseOperator":
        return DenseOperator(self.entries.conj().T, self.site_dims)

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        return bool(np.max(np.abs(self.entries - self.entries.conj().T)) <= tol)

    def is_unitary(self, tol: float = UNITARITY_TOL) -> bool:
        d = self.entries.conj().T @ self.entries - np.eye(self.dim)
        return bool(np.linalg.norm(d) <= tol)

    @staticmethod
    def identity(site_dims: Sequence[int]) -> "DenseOperator":
        dims = tuple(int(d) for d in site_dims)
        n = int(np.prod(dims)) if dims else 1
        return DenseOperator(np.eye(n, dtype=np.complex128), dims)

    @staticmethod
    def from_matrix(entries, site_dims: Sequence[int] | None = None) -> "DenseOperator":
        a = _as_complex_matrix(entries)
        if site_dims is None:
            site_dims = () if a.shape[0] == 1 else (a.shape[0],)
        return DenseOperator(a, tuple(site_dims))


@dataclass(frozen=True)
class DensityMatrix:
    """A :class:`DenseOperator` validated to be a physical density matrix.

    Construction enforces unit trace and hermiticity to 1e-9 and eigenvalues
    above -1e-9.  Propagation code is expected to stay well inside those
    tolerances; a violation here means an upstream numerical bug.
    """

    operator: DenseOperator

    def __post_init__(self):
        a = self.operator.entries
        tr = np.trace(a)
        if abs(tr - 1.0) > 1e-9:
            raise ValueError(f"density matrix trace {tr} deviates from 1 by more than 1e-9")
        if np.max(np.abs(a - a.conj().T)) > 1e-9:
            raise ValueError("density matrix is not Hermitian to 1e-9")
        w = np.linalg.eigvalsh((a + a.conj().T) / 2)
        if w.min() < -1e-9:
            raise ValueError(f"density matrix has eigenvalue {w.min()} below -1e-9")

    @property
    def entries(self) -> np.ndarray:
        return self.operator.entries

    @property
    def site_dims(self) -> tuple[int, ...]:
        return self.operator.site_dims

    @property
    def dim(self) -> int:
        return self.operator.dim


def kron(a: DenseOperator, b: DenseOperator) -> DenseOperator:
    """Kronecker product; ``site_dims`` concatenate."""
    return DenseOperator(np.kron(a.entries, b.entries), a.site_dims + b.site_dims)


def partial_trace(op: DenseOperator, keep: Iterable[int]) -> DenseOperator:
    """Trace out all sites not in ``keep``, preserving the order of kept sites.

    The total trace is preserved: ``tr(result) == tr(op)``.
    """
    dims = op.site_dims
    n = len(dims)
    keep_set = sorted(set(int(k) for k in keep))
    if keep_set and (keep_set[0] < 0 or keep_set[-1] >= n):
        raise IndexError(f"keep sites {keep_set} out of range for {n} sites")
    traced = [i for i in range(n) if i not in keep_set]
    a = op.entries.reshape(dims + dims)
    # einsum with matched row/column indices on traced sites
    row = list(range(n))
    col = [n + i if i in keep_set else i for i in range(n)]
    out = keep_set + [n + i for i in keep_set]
    a = np.einsum(a, row + col, out)
    kept_dims = tuple(dims[i] for i in keep_set)
    m = int(np.prod(kept_dims)) if kept_dims else 1
    return DenseOperator(a.reshape(m, m), kept_dims)


def expm_hermitian_propagator(h: DenseOperator, t: float) -> DenseOperator:
    """exp(-i h t) for Hermitian h, via eigendecomposition (exactly unitary up to roundoff)."""
    a = h.entries
    if np.max(np.abs(a - a.conj().T)) > HERMITICITY_TOL:
        raise NonHermitianError("propagator generator deviates from Hermitian by more than 1e-9")
    lam, v = np.linalg.eigh(a)
    u = (v * np.exp(-1j * lam * t)[None, :]) @ v.conj().T
    return DenseOperator(u, h.site_dims)


def expm_general(m: DenseOperator) -> DenseOperator:
    """Matrix exponential by scaling-and-squaring (Pade), for non-Hermitian generators."""
    return DenseOperator(scipy.linalg.expm(m.entries), m.site_dims)


def trace_norm(m: DenseOperator) -> float:
    """Sum of singular values (the trace norm tr sqrt(m^dag m))."""
    return float(np.linalg.svd(m.entries, compute_uv=False).sum())


def polar_unitary_factor(m: DenseOperator) -> DenseOperator:
    """Unitary factor P = U V^dag of the polar decomposition m = P |m|.

    Raises :class:`SingularMatrixError` when the smallest singular value is
    below 1e-12; callers that differentiate the trace norm fall back to
    finite differences in that case.
    """
    u, s, vh = np.linalg.svd(m.entries)
    if s.min() <= RANK_TOL:
        raise SingularMatrixError(
            f"smallest singular value {s.min():.3e} <= {RANK_TOL:.0e}; polar factor ill-conditioned"
        )
    return DenseOperator(u @ vh, m.site_dims)


def eigh_propagator_pieces(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs (lam, v) of a Hermitian array, for reuse across many exponentials."""
    lam, v = np.linalg.eigh(h)
    return lam, v


def expm_hermitian_with_derivative(
    h: np.ndarray, g: np.ndarray, t: float
) -> tuple[np.ndarray, np.ndarray]:
    """exp(-i h t) and its Frechet derivative along g.

    Returns ``(A, dA)`` with ``A = exp(-i h t)`` and
    ``dA = d/dc exp(-i (h + c g) t) |_{c=0}``, computed with the divided
    difference (Daleckii-Krein) formula in the eigenbasis of h.
    """
    lam, v = np.linalg.eigh(h)
    ph = np.exp(-1j * lam * t)
    a = (v * ph[None, :]) @ v.conj().T
    gm = v.conj().T @ g @ v
    gap = lam[:, None] - lam[None, :]
    num = ph[:, None] - ph[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        dd = np.where(
            np.abs(gap) > 1e-12,
            num / np.where(np.abs(gap) > 1e-12, gap, 1.0),
            -1j * t * ph[:, None] * np.ones_like(num),
        )
    da = v @ (dd * gm) @ v.conj().T
    return a, da
