"""Model factory: spin-system specs, Hamiltonians, switching ansatze, targets.

Site layout convention: system qubits come first (index 0, and 1 for the
two-qubit system), bath spins/TLS follow.  For the two-qubit system the
first ``n_bath[0]`` bath sites couple to qubit 0 and the remaining
``n_bath[1]`` to qubit 1.

Units: energies are normalized so the (first) qubit splitting is E = 1.
For the dipole presets, which model an 8 GHz transmon, one unit of time is
1/(16 pi) ns; :func:`ns_to_sim_time` converts at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import DenseOperator, kron

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=np.complex128)  # |1><0|
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=np.complex128)  # |0><1|
IDENTITY_2 = np.eye(2, dtype=np.complex128)

_PAULI = {
    "x": SIGMA_X,
    "y": SIGMA_Y,
    "z": SIGMA_Z,
    "+": SIGMA_PLUS,
    "-": SIGMA_MINUS,
}

# one unit of simulation time is 1/(16 pi) ns for the 8 GHz dipole presets
NS_PER_TIME_UNIT = 1.0 / (16.0 * np.pi)


def ns_to_sim_time(t_ns: float) -> float:
    return t_ns / NS_PER_TIME_UNIT


def sim_time_to_ns(t: float) -> float:
    return t * NS_PER_TIME_UNIT


def pauli_at(site: int, axis: str, total_sites: int) -> DenseOperator:
    """Single-site Pauli (or raising/lowering) operator embedded in the full space."""
    if not 0 <= site < total_sites:
        raise IndexError(f"site {site} out of range for {total_sites} sites")
    try:
        local = _PAULI[axis]
    except KeyError:
        raise ValueError(f"unknown Pauli axis {axis!r}; expected one of x, y, z, +, -") from None
    mats = [local if i == site else IDENTITY_2 for i in range(total_sites)]
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return DenseOperator(out, (2,) * total_sites)


@dataclass(frozen=True)
class SpinSystemSpec:
    """Declarative description of one physical model instance.

    ``n_bath`` is an int for the single-qubit system and a pair
    ``(n_0, n_1)`` of per-qubit TLS counts for the two-qubit system.
    ``bath_splittings`` and ``couplings`` are flat tuples over all bath
    sites in site order.  T_1 times are in simulation units.
    """

    n_qubits: int
    n_bath: int | tuple[int, int]
    coupling_kind: str  # "isotropic" | "dipole"
    frame: str  # "lab" | "rotating"
    qubit_splittings: tuple[float, ...]
    bath_splittings: tuple[float, ...] = ()
    couplings: tuple[float, ...] = ()
    qubit_qubit_coupling: float = 0.0
    control_strength_x: float | None = None
    control_strength_y: float | None = None
    t1_system: float | None = None
    t1_tls: float | None = None

    def __post_init__(self):
        if self.n_qubits not in (1, 2):
            raise ValueError("n_qubits must be 1 or 2")
        if self.n_qubits == 1:
            if not isinstance(self.n_bath, int) or self.n_bath < 0:
                raise ValueError("single-qubit spec needs a nonnegative integer n_bath")
            bath = (self.n_bath,)
        else:
            if isinstance(self.n_bath, int):
                raise ValueError("two-qubit spec needs per-qubit bath counts (n_0, n_1)")
            bath = tuple(int(n) for n in self.n_bath)
            if len(bath) != 2 or any(n < 0 for n in bath):
                raise ValueError("two-qubit bath counts must be a pair of nonnegative ints")
            object.__setattr__(self, "n_bath", bath)
        if self.coupling_kind not in ("isotropic", "dipole"):
            raise ValueError(f"unknown coupling_kind {self.coupling_kind!r}")
        if self.frame not in ("lab", "rotating"):
            raise ValueError(f"unknown frame {self.frame!r}")
        qs = tuple(float(e) for e in self.qubit_splittings)
        if len(qs) != self.n_qubits:
            raise ValueError("need one qubit splitting per qubit")
        object.__setattr__(self, "qubit_splittings", qs)
        total = sum(bath)
        bs = tuple(float(d) for d in self.bath_splittings)
        if not bs:
            bs = (0.0,) * total
        if len(bs) != total:
            raise ValueError(f"need {total} bath splittings, got {len(bs)}")
        if self.frame == "rotating" and any(d != 0.0 for d in bs):
            raise ValueError("rotating frame requires all bath splittings to be zero")
        if any(d < 0 for d in bs) or any(e < 0 for e in qs):
            raise ValueError("splittings must be nonnegative")
        object.__setattr__(self, "bath_splittings", bs)
        cp = tuple(float(a) for a in self.couplings)
        if len(cp) != total:
            raise ValueError(f"need {total} couplings, got {len(cp)}")
        # zero is allowed so decoupled sanity cases stay constructible
        if any(a < 0 for a in cp):
            raise ValueError("couplings must be nonnegative")
        object.__setattr__(self, "couplings", cp)
        for t1 in (self.t1_system, self.t1_tls):
            if t1 is not None and t1 <= 0:
                raise ValueError("T_1 times must be positive")

    @property
    def total_bath(self) -> int:
        return self.n_bath if isinstance(self.n_bath, int) else sum(self.n_bath)

    @property
    def n_sites(self) -> int:
        return self.n_qubits + self.total_bath

    @property
    def dim(self) -> int:
        return 2**self.n_sites

    @property
    def drive_strength_x(self) -> float:
        if self.control_strength_x is not None:
            return self.control_strength_x
        return 2.0 * self.qubit_splittings[0]

    @property
    def drive_strength_y(self) -> float:
        if self.control_strength_y is not None:
            return self.control_strength_y
        return 1.5 * self.qubit_splittings[0]

    def bath_owner(self, bath_index: int) -> int:
        """Which qubit the bath spin with flat index ``bath_index`` couples to."""
        if self.n_qubits == 1:
            return 0
        return 0 if bath_index < self.n_bath[0] else 1


@dataclass(frozen=True)
class TargetGate:
    """A named target unitary acting on the system qubits only."""

    name: str
    matrix: DenseOperator

    def __post_init__(self):
        if not self.matrix.is_unitary(1e-12):
            raise ValueError(f"target gate {self.name!r} is not unitary to 1e-12")

    @property
    def n_qubits(self) -> int:
        return self.matrix.n_sites


@dataclass(frozen=True)
class SwitchingAnsatz:
    """The constant Hamiltonians the protocol switches among.

    Each listed Hamiltonian must equal ``drift`` plus a +-1 signed
    combination of the control generators, with the canonical sign pattern
    (+), (-) for two Hamiltonians and (++), (+-), (-+), (--) for four.
    """

    hamiltonians: tuple[DenseOperator, ...]
    drift: DenseOperator
    controls: tuple[DenseOperator, ...]
    universal_flag: bool = True

    def __post_init__(self):
        hams = tuple(self.hamiltonians)
        if len(hams) not in (2, 4):
            raise ValueError("ansatz must list 2 or 4 Hamiltonians")
        if len(self.controls) != len(hams).bit_length() - 1:
            raise ValueError("need log2(len(hamiltonians)) control generators")
        for h in hams + (self.drift,) + tuple(self.controls):
            if not h.is_hermitian(1e-12):
                raise ValueError("ansatz Hamiltonians must be Hermitian to 1e-12")
        for k, h in enumerate(hams):
            rebuilt = self.drift.entries.copy()
            for j, c in enumerate(self.controls):
                sign = 1.0 if not (k >> (len(self.controls) - 1 - j)) & 1 else -1.0
                rebuilt = rebuilt + sign * c.entries
            if np.max(np.abs(rebuilt - h.entries)) > 1e-12:
                raise ValueError(f"Hamiltonian {k} does not match drift +- controls")
        object.__setattr__(self, "hamiltonians", hams)
        object.__setattr__(self, "controls", tuple(self.controls))

    @property
    def dim(self) -> int:
        return self.drift.dim

    @property
    def n_hamiltonians(self) -> int:
        return len(self.hamiltonians)


def _zeros(n_sites: int) -> np.ndarray:
    d = 2**n_sites
    return np.zeros((d, d), dtype=np.complex128)


def build_static_hamiltonians(
    spec: SpinSystemSpec,
) -> tuple[DenseOperator, DenseOperator, DenseOperator]:
    """The control-free pieces (H_S, H_env, H_I) on the full Hilbert space."""
    if spec.n_qubits == 2 and spec.coupling_kind == "isotropic":
        raise ValueError("two qubits with isotropic coupling is out of scope")
    ns = spec.n_sites
    dims = (2,) * ns

    h_s = _zeros(ns)
    for i, e in enumerate(spec.qubit_splittings):
        h_s -= 0.5 * e * pauli_at(i, "z", ns).entries
    if spec.n_qubits == 2:
        h_s += (
            spec.qubit_qubit_coupling
            * (pauli_at(0, "z", ns).entries @ pauli_at(1, "z", ns).entries)
        )

    h_env = _zeros(ns)
    for b, delta in enumerate(spec.bath_splittings):
        h_env -= 0.5 * delta * pauli_at(spec.n_qubits + b, "z", ns).entries

    h_i = _zeros(ns)
    for b, a_q in enumerate(spec.couplings):
        site = spec.n_qubits + b
        owner = spec.bath_owner(b)
        if spec.coupling_kind == "isotropic":
            for axis in ("x", "y", "z"):
                h_i += a_q * (
                    pauli_at(owner, axis, ns).entries @ pauli_at(site, axis, ns).entries
                )
        else:
            h_i += (a_q / 4.0) * (
                pauli_at(owner, "x", ns).entries @ pauli_at(site, "x", ns).entries
                + pauli_at(owner, "y", ns).entries @ pauli_at(site, "y", ns).entries
            )

    return (
        DenseOperator(h_s, dims),
        DenseOperator(h_env, dims),
        DenseOperator(h_i, dims),
    )


ANSATZ_VARIANTS = ("two_ham_x", "two_ham_z_nonuniversal", "four_ham_xy", "two_qubit")


def build_switching_ansatz(spec: SpinSystemSpec, variant: str) -> SwitchingAnsatz:
    """Assemble the switching Hamiltonians for one of the four control variants."""
    if variant not in ANSATZ_VARIANTS:
        raise ValueError(f"unknown ansatz variant {variant!r}")
    if variant == "two_qubit" and spec.n_qubits != 2:
        raise ValueError("two_qubit ansatz requires a two-qubit spec")
    if variant != "two_qubit" and spec.n_qubits != 1:
        raise ValueError(f"{variant} ansatz requires a single-qubit spec")

    ns = spec.n_sites
    dims = (2,) * ns
    h_s, h_env, h_i = build_static_hamiltonians(spec)
    drift = DenseOperator(h_s.entries + h_env.entries + h_i.entries, dims)

    if variant == "two_qubit":
        e0 = spec.qubit_splittings[0]
        ctrl = DenseOperator(
            e0 * (pauli_at(0, "x", ns).entries + pauli_at(1, "x", ns).entries), dims
        )
        controls = (ctrl,)
        universal = True
    elif variant == "two_ham_x":
        controls = (
            DenseOperator(spec.drive_strength_x * pauli_at(0, "x", ns).entries, dims),
        )
        universal = True
    elif variant == "two_ham_z_nonuniversal":
        controls = (
            DenseOperator(spec.drive_strength_x * pauli_at(0, "z", ns).entries, dims),
        )
        universal = False
    else:  # four_ham_xy
        controls = (
            DenseOperator(spec.drive_strength_x * pauli_at(0, "x", ns).entries, dims),
            DenseOperator(spec.drive_strength_y * pauli_at(0, "y", ns).entries, dims),
        )
        universal = True

    hams = []
    n_ctrl = len(controls)
    for k in range(2**n_ctrl):
        h = drift.entries.copy()
        for j, c in enumerate(controls):
            sign = 1.0 if not (k >> (n_ctrl - 1 - j)) & 1 else -1.0
            h = h + sign * c.entries
        hams.append(DenseOperator(h, dims))

    return SwitchingAnsatz(tuple(hams), drift, controls, universal_flag=universal)


def build_lindblad_operators(spec: SpinSystemSpec) -> list[DenseOperator]:
    """Spontaneous-emission lowering operators, one per qubit and per TLS.

    Rates are 1/sqrt(T_1) with T_1 in simulation units; an empty list means
    purely unitary dynamics.
    """
    ns = spec.n_sites
    ops: list[DenseOperator] = []
    if spec.t1_system is not None:
        pref = 1.0 / np.sqrt(spec.t1_system)
        for i in range(spec.n_qubits):
            ops.append(DenseOperator(pref * pauli_at(i, "-", ns).entries, (2,) * ns))
    if spec.t1_tls is not None:
        pref = 1.0 / np.sqrt(spec.t1_tls)
        for b in range(spec.total_bath):
            ops.append(
                DenseOperator(pref * pauli_at(spec.n_qubits + b, "-", ns).entries, (2,) * ns)
            )
    return ops


PRESET_NAMES = ("iso_equal", "iso_variable", "dipole_device", "dipole_2qubit")

DIPOLE_COUPLING_RANGE = (5e-4, 5e-3)  # 4-40 MHz at E = 8 GHz
ISO_COUPLING_RANGE = (1.0, 2.0)
DEFAULT_QUBIT_QUBIT_COUPLING = 0.025  # ~200 MHz; see README and ledger


def standard_parameter_presets(
    name: str,
    n_bath: int | tuple[int, int] = 2,
    seed: int = 0,
    t1_system_ns: float | None = None,
    t1_tls_ns: float | None = None,
    qubit_qubit_coupling: float = DEFAULT_QUBIT_QUBIT_COUPLING,
) -> SpinSystemSpec:
    """The paper-normalized model presets.

    Variable couplings are drawn once from the stated uniform range using
    ``seed`` and then frozen in the returned spec; persist the seed alongside
    results to reproduce the instance.  T_1 times are given in nanoseconds
    and converted to simulation units here.
    """
    t1_s = ns_to_sim_time(t1_system_ns) if t1_system_ns is not None else None
    t1_t = ns_to_sim_time(t1_tls_ns) if t1_tls_ns is not None else None
    rng = np.random.default_rng(seed)

    if name == "iso_equal":
        n = int(n_bath)
        return SpinSystemSpec(
            n_qubits=1,
            n_bath=n,
            coupling_kind="isotropic",
            frame="rotating",
            qubit_splittings=(1.0,),
            couplings=(1.0,) * n,
            t1_system=t1_s,
            t1_tls=t1_t,
        )
    if name == "iso_variable":
        n = int(n_bath)
        a = rng.uniform(*ISO_COUPLING_RANGE, size=n)
        return SpinSystemSpec(
            n_qubits=1,
            n_bath=n,
            coupling_kind="isotropic",
            frame="rotating",
            qubit_splittings=(1.0,),
            couplings=tuple(a),
            t1_system=t1_s,
            t1_tls=t1_t,
        )
    if name == "dipole_device":
        n = int(n_bath)
        a = rng.uniform(*DIPOLE_COUPLING_RANGE, size=n)
        return SpinSystemSpec(
            n_qubits=1,
            n_bath=n,
            coupling_kind="dipole",
            frame="lab",
            qubit_splittings=(1.0,),
            bath_splittings=tuple(1.0 + 0.1 * (q + 1) for q in range(n)),
            couplings=tuple(a),
            t1_system=t1_s,
            t1_tls=t1_t,
        )
    if name == "dipole_2qubit":
        if isinstance(n_bath, int):
            raise ValueError("dipole_2qubit preset needs per-qubit bath counts (n_0, n_1)")
        n0, n1 = n_bath
        total = n0 + n1
        a = rng.uniform(*DIPOLE_COUPLING_RANGE, size=total)
        return SpinSystemSpec(
            n_qubits=2,
            n_bath=(n0, n1),
            coupling_kind="dipole",
            frame="lab",
            qubit_splittings=(1.0, 1.05),  # E_0 = 8.0 GHz, E_1 = 8.4 GHz
            bath_splittings=tuple(1.0 + 0.1 * (q + 1) for q in range(total)),
            couplings=tuple(a),
            qubit_qubit_coupling=qubit_qubit_coupling,
            t1_system=t1_s,
            t1_tls=t1_t,
        )
    raise ValueError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")


_GATES = {
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
    "Hadamard": np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2),
    "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=np.complex128),
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
    ),
}


def build_target(name: str, n_qubits: int = 1, matrix=None) -> TargetGate:
    """Named target gate; ``custom`` takes an explicit unitary matrix."""
    if name == "custom":
        if matrix is None:
            raise ValueError("custom target needs an explicit matrix")
        m = np.asarray(matrix, dtype=np.complex128)
        if m.shape != (2**n_qubits,) * 2:
            raise ValueError("custom matrix does not match the stated qubit count")
        return TargetGate("custom", DenseOperator(m, (2,) * n_qubits))
    if name not in _GATES:
        raise ValueError(f"unknown gate {name!r}; expected Z, Hadamard, T, CNOT or custom")
    m = _GATES[name]
    arity = 2 if name == "CNOT" else 1
    if arity != n_qubits:
        raise ValueError(f"gate {name} acts on {arity} qubit(s), got n_qubits={n_qubits}")
    return TargetGate(name, DenseOperator(m, (2,) * arity))
