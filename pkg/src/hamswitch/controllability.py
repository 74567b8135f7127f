"""Dynamical Lie-algebra closure and subsystem-controllability analysis.

The closure is numeric: skew-Hermitian generators are orthonormalized under
the real Hilbert-Schmidt inner product and commuted pairwise until no new
direction survives a rank tolerance of 1e-8.  Controllability of a single
spin asks whether all three of its Pauli directions lie in the closed span.

The coefficient-recursion tables mirror the nested-commutator bookkeeping
of the appendix-style analysis: a seed coefficient row and a linear
recursion generate rows whose stacked determinant decides whether the
single-spin terms can be isolated by linear combination.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .linalg import DenseOperator
from .models import SpinSystemSpec, SwitchingAnsatz, build_switching_ansatz, pauli_at

CLOSURE_RANK_TOL = 1e-8
MEMBERSHIP_TOL = 1e-7
DETERMINANT_TOL = 1e-10


@dataclass(frozen=True)
class LieAlgebraBasis:
    """Result of a numeric Lie closure."""

    generators: tuple[DenseOperator, ...]
    orthonormal_basis: tuple[np.ndarray, ...]
    dimension: int
    closed: bool

    @property
    def matrix_dim(self) -> int:
        return self.generators[0].dim


def _check_skew(a: np.ndarray, tol: float = 1e-9):
    if np.max(np.abs(a + a.conj().T)) > tol:
        raise ValueError("Lie closure generators must be skew-Hermitian (use i * H)")


def _traceless(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    return a - (np.trace(a) / n) * np.eye(n, dtype=a.dtype)


def _hs_inner(a: np.ndarray, b: np.ndarray) -> float:
    # real Hilbert-Schmidt inner product; the algebra is a real vector space
    return float(np.real(np.sum(a.conj() * b)))


def _project_out(a: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    for b in basis:
        a = a - _hs_inner(b, a) * b
    return a


def lie_closure(
    generators: Sequence[DenseOperator],
    max_dim: int | None = None,
    tol: float = CLOSURE_RANK_TOL,
) -> LieAlgebraBasis:
    """Close the real Lie algebra generated by skew-Hermitian matrices.

    Repeatedly commutes basis pairs, Gram-Schmidt-projects each commutator
    against the current span, and keeps directions whose residual norm
    exceeds ``tol``.  Raises when ``max_dim`` is exceeded before closure.
    """
    if not generators:
        raise ValueError("need at least one generator")
    n = generators[0].dim
    cap = max_dim if max_dim is not None else n * n
    basis: list[np.ndarray] = []
    for g in generators:
        a = _traceless(np.asarray(g.entries, dtype=np.complex128))
        _check_skew(a)
        r = _project_out(a, basis)
        norm = np.sqrt(_hs_inner(r, r))
        if norm > tol:
            basis.append(r / norm)
    # queue of elements whose commutators with the basis are still unexplored
    frontier = list(range(len(basis)))
    while frontier:
        new_frontier: list[int] = []
        for i in frontier:
            for j in range(len(basis)):
                c = basis[i] @ basis[j] - basis[j] @ basis[i]
                r = _project_out(c, basis)
                # second pass tightens orthogonality lost to cancellation
                r = _project_out(r, basis)
                norm = np.sqrt(_hs_inner(r, r))
                if norm > tol:
                    basis.append(r / norm)
                    new_frontier.append(len(basis) - 1)
                    if len(basis) > cap:
                        raise RuntimeError(
                            f"Lie closure exceeded max_dim={cap} without closing"
                        )
        frontier = new_frontier
    return LieAlgebraBasis(
        generators=tuple(generators),
        orthonormal_basis=tuple(basis),
        dimension=len(basis),
        closed=True,
    )


def in_span(basis: LieAlgebraBasis, op: np.ndarray, tol: float = MEMBERSHIP_TOL) -> bool:
    a = _traceless(np.asarray(op, dtype=np.complex128))
    norm = np.sqrt(_hs_inner(a, a))
    if norm == 0:
        return True
    a = a / norm
    r = _project_out(a, list(basis.orthonormal_basis))
    return bool(np.sqrt(_hs_inner(r, r)) <= tol)


def subsystem_controllable(basis: LieAlgebraBasis, site: int) -> bool:
    """True iff all three single-spin Pauli directions of ``site`` are in the algebra."""
    if not basis.closed:
        raise ValueError("basis must be closed before membership queries")
    n_sites = int(np.log2(basis.matrix_dim))
    for axis in ("x", "y", "z"):
        op = 1j * pauli_at(site, axis, n_sites).entries
        if not in_span(basis, op):
            return False
    return True


RECURSION_SCHEMES = ("iso_lab", "dipole_rotating", "dipole_lab")


@dataclass(frozen=True)
class RecursionTable:
    """Coefficient rows of the nested-commutator recursion for one scheme."""

    scheme: str
    g: float
    h: float
    eps: float
    rows: tuple[tuple[float, ...], ...]

    @property
    def row_length(self) -> int:
        return len(self.rows[0])

    @staticmethod
    def build(
        scheme: str, g: float, h: float, eps: float = 0.0, s_max: int = 8
    ) -> "RecursionTable":
        if scheme not in RECURSION_SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}")
        if scheme == "iso_lab":
            row = np.array(
                [
                    2 * g**2,
                    h**2 * (1 + eps),
                    g * h * (h - g),
                    g * h * (g - h),
                    g * h,
                    g * h * eps,
                ]
            )
            step = _iso_lab_step
        elif scheme == "dipole_rotating":
            row = np.array([g**2, h**2, g * (h**2 + 1), h * (g**2 + 1)])
            step = _dipole_step
        else:  # dipole_lab
            row = np.array(
                [2 * g**2, h**2 * (1 + eps), g * (h**2 + 2), h * (g**2 + 1 + eps)]
            )
            step = _dipole_step
        rows = [tuple(float(x) for x in row)]
        for _ in range(1, s_max):
            row = step(row, g, h, eps)
            rows.append(tuple(float(x) for x in row))
        return RecursionTable(scheme, g, h, eps, tuple(rows))


def _iso_lab_step(k: np.ndarray, g: float, h: float, eps: float) -> np.ndarray:
    k1, k2, k3, k4, k5, k6 = k
    return np.array(
        [
            -k1 * (g**2 + 1),
            -k2 * (h**2 + eps**2),
            -(h**2 + g**2 + eps**2) * k3 - 2 * g * h * k4 + g * k5 + 2 * g * eps * k6,
            -2 * g * h * k3 - (h**2 + g**2 + 1) * k4 + 2 * h * k5 + h * eps * k6,
            g * k3 + 2 * h * k4 - (1 + eps**2 + h**2) * k5 - 2 * eps * k6,
            2 * g * eps * k3 + h * eps * k4 - 2 * eps * k5 - (1 + eps**2 + g**2) * k6,
        ]
    )


def _dipole_step(l: np.ndarray, g: float, h: float, _eps: float) -> np.ndarray:
    l1, l2, l3, l4 = l
    return np.array(
        [
            l1 * g**2 + l3 * g,
            l2 * h**2 + l4 * h,
            l1 * g + l3 * (h**2 + 1),
            l2 * h + l4 * (g**2 + 1),
        ]
    )


def recursion_determinant(table: RecursionTable, s_indices: Sequence[int]) -> float:
    """Determinant of the stacked coefficient rows (1-based s), rows l2-normalized.

    A value below 1e-10 in magnitude means the single-spin terms cannot be
    isolated from these rows.
    """
    size = table.row_length
    if len(s_indices) != size:
        raise ValueError(f"scheme {table.scheme} needs exactly {size} row indices")
    rows = []
    for s in s_indices:
        if not 1 <= s <= len(table.rows):
            raise ValueError(f"row index {s} outside the built range 1..{len(table.rows)}")
        r = np.asarray(table.rows[s - 1], dtype=float)
        norm = np.linalg.norm(r)
        rows.append(r / norm if norm > 0 else r)
    return float(np.linalg.det(np.stack(rows)))


@dataclass(frozen=True)
class ControllabilityVerdict:
    coupling_kind: str
    frame: str
    equal_couplings: bool
    qubit_controllable: bool
    bath_controllable: bool
    algebra_dimension: int


def ansatz_generators(ansatz: SwitchingAnsatz) -> list[DenseOperator]:
    """The skew-Hermitian generators i H_A, i H_B, ... of a switching ansatz."""
    return [
        DenseOperator(1j * h.entries, h.site_dims) for h in ansatz.hamiltonians
    ]


def controllability_table(specs: Iterable[SpinSystemSpec]) -> list[ControllabilityVerdict]:
    """Closure-based (qubit, bath) controllability verdicts for n_bath = 2 models.

    The bath verdict demands every bath spin be individually controllable;
    for equal isotropic couplings this reports the raw algebra (see README:
    symmetric-sector controllability is outside what the raw span shows).
    """
    out = []
    for spec in specs:
        if spec.total_bath != 2 or spec.n_qubits != 1:
            raise ValueError("controllability table is defined for 1 qubit + 2 bath spins")
        ansatz = build_switching_ansatz(spec, "two_ham_x")
        basis = lie_closure(ansatz_generators(ansatz))
        qubit_ok = subsystem_controllable(basis, 0)
        bath_ok = all(
            subsystem_controllable(basis, spec.n_qubits + b) for b in range(spec.total_bath)
        )
        equal = len(set(spec.couplings)) == 1
        out.append(
            ControllabilityVerdict(
                coupling_kind=spec.coupling_kind,
                frame=spec.frame,
                equal_couplings=equal,
                qubit_controllable=qubit_ok,
                bath_controllable=bath_ok,
                algebra_dimension=basis.dimension,
            )
        )
    return out


def standard_controllability_specs() -> list[SpinSystemSpec]:
    """The eight (coupling x frame x equal/variable) models behind the verdict table.

    Strong couplings (order of the qubit splitting); lab-frame bath
    splittings 1.0 and 1.1 so the two bath spins are detuned from each other.
    """
    specs = []
    for kind in ("isotropic", "dipole"):
        for frame in ("rotating", "lab"):
            for equal in (False, True):
                couplings = (1.0, 1.0) if equal else (1.0, 1.5)
                splittings = (0.0, 0.0) if frame == "rotating" else (1.0, 1.1)
                specs.append(
                    SpinSystemSpec(
                        n_qubits=1,
                        n_bath=2,
                        coupling_kind=kind,
                        frame=frame,
                        qubit_splittings=(1.0,),
                        bath_splittings=splittings,
                        couplings=couplings,
                    )
                )
    return specs
