"""Fidelity functionals: bath-optimal unitary fidelity, Haar-averaged state
fidelity, reference-state fidelity for Lindblad channels, and the no-control
comparison baseline.

All fidelities are clamped to [0, 1] before the minus-log-infidelity (MLI)
transform; MLI is capped at 16, the double-precision floor of 1 - F.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .linalg import (
    DenseOperator,
    DensityMatrix,
    expm_hermitian_propagator,
    partial_trace,
    trace_norm,
)
from .models import (
    SpinSystemSpec,
    TargetGate,
    build_static_hamiltonians,
    pauli_at,
    SIGMA_X,
    SIGMA_Z,
)
from .propagate import lindblad_propagate

MLI_CAP = 16.0


def mli(fidelity: float) -> float:
    """Minus log10 infidelity; the integer part counts the nines."""
    infid = 1.0 - fidelity
    if infid <= 10.0**-MLI_CAP:
        return MLI_CAP
    return float(-np.log10(infid))


def clamp_fidelity(value: float) -> float:
    return float(min(1.0, max(0.0, value)))


@dataclass(frozen=True)
class FidelityReport:
    fidelity: float
    mli: float
    measure_kind: str  # "unitary" | "avg_state" | "ref_state"
    state_fid_mean: float | None = None
    state_fid_std: float | None = None

    def __post_init__(self):
        if not -1e-12 <= self.fidelity <= 1 + 1e-12:
            raise ValueError(f"fidelity {self.fidelity} outside [0, 1]")
        if abs(self.mli - mli(clamp_fidelity(self.fidelity))) > 1e-9:
            raise ValueError("mli field inconsistent with fidelity")
        if self.measure_kind not in ("unitary", "avg_state", "ref_state"):
            raise ValueError(f"unknown measure kind {self.measure_kind!r}")

    @staticmethod
    def from_fidelity(value: float, kind: str, **kw) -> "FidelityReport":
        f = clamp_fidelity(value)
        return FidelityReport(f, mli(f), kind, **kw)


def unitary_fidelity(
    u: DenseOperator, w: TargetGate, n_system_sites: int | None = None
) -> FidelityReport:
    """Gate fidelity maximized over an arbitrary bath unitary.

    F = (tr sqrt(Q^dag Q) / N)^2 with Q the system-traced overlap
    tr_S[(W (x) I_bath)^dag U]; Q is a bath-dimension matrix.
    """
    if n_system_sites is None:
        n_system_sites = w.matrix.n_sites
    if not u.is_unitary(1e-8):
        raise ValueError("unitary_fidelity needs a unitary operator")
    n_sites = u.n_sites
    if n_system_sites > n_sites:
        raise ValueError("more system sites than the operator has")
    sys_dim = int(np.prod(u.site_dims[:n_system_sites])) if n_system_sites else 1
    if w.matrix.dim != sys_dim:
        raise ValueError(
            f"target dimension {w.matrix.dim} does not match system dimension {sys_dim}"
        )
    n = u.dim
    n_bath = n // sys_dim
    w_embedded = np.kron(w.matrix.entries.conj().T, np.eye(n_bath, dtype=np.complex128))
    overlap = DenseOperator(w_embedded @ u.entries, u.site_dims)
    q = partial_trace(overlap, keep=range(n_system_sites, n_sites))
    assert q.dim == n_bath, "partial trace must leave the bath-dimension matrix"
    f = clamp_fidelity((trace_norm(q) / n) ** 2)
    return FidelityReport.from_fidelity(f, "unitary")


def haar_random_state(dim: int, seed) -> np.ndarray:
    """Unit vector drawn from the Haar measure (normalized complex Gaussian)."""
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def average_state_fidelity(
    u: DenseOperator,
    w: TargetGate,
    m_samples: int = 100,
    seed: int = 0,
    n_system_sites: int | None = None,
) -> FidelityReport:
    """Mean overlap <psi_T| rho_S |psi_T> over Haar-random product initial states.

    Initial states are |m_S> (x) |m_B> with both factors Haar random; the
    target state is W |m_S>.  Deterministic given the seed.
    """
    if m_samples < 1:
        raise ValueError("need at least one sample")
    if n_system_sites is None:
        n_system_sites = w.matrix.n_sites
    sys_dim = int(np.prod(u.site_dims[:n_system_sites]))
    bath_dim = u.dim // sys_dim
    rng = np.random.default_rng(seed)
    fids = np.empty(m_samples)
    for m in range(m_samples):
        psi_s = haar_random_state(sys_dim, rng)
        psi_b = haar_random_state(bath_dim, rng)
        psi = np.kron(psi_s, psi_b)
        evolved = (u.entries @ psi).reshape(sys_dim, bath_dim)
        target = w.matrix.entries @ psi_s
        amps = target.conj() @ evolved  # overlap per bath basis state
        fids[m] = float(np.sum(np.abs(amps) ** 2))
    mean = clamp_fidelity(float(fids.mean()))
    return FidelityReport.from_fidelity(
        mean, "avg_state", state_fid_mean=mean, state_fid_std=float(fids.std())
    )


def reference_states(d: int) -> list[np.ndarray]:
    """The d+1 reference densities: computational basis states plus the flat state."""
    if d not in (2, 4):
        raise ValueError("reference set is defined for system dimension 2 or 4")
    refs = [np.zeros((d, d), dtype=np.complex128) for _ in range(d)]
    for i in range(d):
        refs[i][i, i] = 1.0
    refs.append(np.full((d, d), 1.0 / d, dtype=np.complex128))
    return refs


def reference_state_fidelity(
    channel: Callable[[np.ndarray], np.ndarray], w: TargetGate, d: int
) -> FidelityReport:
    """Weighted Hilbert-Schmidt overlap of channel outputs with rotated references.

    F = sum_i w_i / tr(rho_i^2) * Re tr(W rho_i W^dag  D[rho_i]) with equal
    weights w_i = 1/(d+1); ``channel`` maps a system density to its evolved,
    bath-traced image.
    """
    refs = reference_states(d)
    wmat = w.matrix.entries
    if wmat.shape[0] != d:
        raise ValueError("target gate dimension does not match d")
    weight = 1.0 / (d + 1)
    total = 0.0
    for rho in refs:
        purity = float(np.real(np.trace(rho @ rho)))
        rotated = wmat @ rho @ wmat.conj().T
        image = channel(rho)
        total += weight / purity * float(np.real(np.trace(rotated @ image)))
    return FidelityReport.from_fidelity(total, "ref_state")


def make_lindblad_reference_channel(
    h_schedule,
    lindblads,
    n_system_sites: int,
    method: str = "auto",
) -> Callable[[np.ndarray], np.ndarray]:
    """Channel rho_S -> tr_B(Lindblad evolution of rho_S (x) |0...0><0...0|).

    The primary-bath initial state is the zero-temperature ground state.
    """
    if not h_schedule:
        raise ValueError("need a nonempty Hamiltonian schedule")
    dims = h_schedule[0][0].site_dims
    n_sites = len(dims)
    sys_dim = int(np.prod(dims[:n_system_sites]))
    bath_dim = int(np.prod(dims[n_system_sites:]))

    def channel(rho_sys: np.ndarray) -> np.ndarray:
        bath0 = np.zeros((bath_dim, bath_dim), dtype=np.complex128)
        bath0[0, 0] = 1.0
        rho_full = np.kron(np.asarray(rho_sys, dtype=np.complex128), bath0)
        state = DensityMatrix(DenseOperator(rho_full, dims))
        out = lindblad_propagate(h_schedule, lindblads, state, method=method)
        reduced = partial_trace(out.operator, keep=range(n_system_sites))
        return reduced.entries

    return channel


# Hermitian generators K with exp(-i K) proportional to the gate; H_s' = K / T
_BASELINE_GENERATORS: dict[str, np.ndarray] = {
    "Z": -(np.pi / 2) * SIGMA_Z,
    "Hadamard": (np.pi / 2) * (SIGMA_X + SIGMA_Z) / np.sqrt(2),
    "T": (np.pi / 8) * SIGMA_Z,
    "CNOT": (np.pi / 2)
    * np.kron(np.diag([0.0, 1.0]), np.eye(2) - SIGMA_X).astype(np.complex128),
}


def no_control_baseline(
    spec: SpinSystemSpec, w: TargetGate, total_time: float
) -> FidelityReport:
    """Fidelity of the drift-only evolution that would produce W if the bath decoupled.

    The system Hamiltonian is replaced by the gate generator divided by the
    total time, so exp(-i H_s' T) equals W up to phase; the bath and coupling
    terms evolve alongside and degrade the fidelity.
    """
    if w.name not in _BASELINE_GENERATORS:
        raise ValueError(f"no registered generator for gate {w.name!r}")
    k = _BASELINE_GENERATORS[w.name]
    if total_time <= 0:
        raise ValueError("total_time must be positive")
    ns = spec.n_sites
    dims = (2,) * ns
    n_sys = w.matrix.n_sites
    bath_dim = 2 ** (ns - n_sys)
    h_prime = np.kron(k / total_time, np.eye(bath_dim, dtype=np.complex128))
    _h_s, h_env, h_i = build_static_hamiltonians(spec)
    h_total = DenseOperator(h_prime + h_env.entries + h_i.entries, dims)
    u_n = expm_hermitian_propagator(h_total, total_time)
    return unitary_fidelity(u_n, w, n_system_sites=n_sys)
