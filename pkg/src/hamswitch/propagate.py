"""Time evolution: switching protocols, amplitude protocols, Lindblad dynamics.

The switching propagator multiplies eigendecomposition-exact segment
unitaries in time order (the first segment acts first, i.e. appears
rightmost in the operator product).  Lindblad evolution offers a
superoperator route (column-stacking vectorization, scaling-and-squaring
exponential) for up to three total spins and an adaptive RK45 route beyond
that, restarted at every Hamiltonian switch so the integrator never sees a
discontinuity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.integrate

from .linalg import (
    DenseOperator,
    DensityMatrix,
    expm_general,
    expm_hermitian_propagator,
)
from .models import SpinSystemSpec, SwitchingAnsatz, build_static_hamiltonians

AMPLITUDE_BOUNDS = (-1.2, 1.2)
ODE_RTOL = 1e-10
ODE_ATOL = 1e-10
SUPEROP_MAX_SITES = 3


@dataclass(frozen=True)
class SwitchingProtocol:
    """Hold times of one switching protocol.

    ``durations`` lists the nonnegative segment times in temporal order
    (alpha_1, beta_1, ..., alpha_p, beta_p for a two-Hamiltonian ansatz);
    their sum equals ``total_time`` to 1e-9.
    """

    durations: tuple[float, ...]
    depth: int
    total_time: float

    def __post_init__(self):
        d = tuple(float(x) for x in self.durations)
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if len(d) % self.depth != 0 or len(d) // self.depth not in (2, 4):
            raise ValueError(
                f"{len(d)} durations do not form {self.depth} rounds of 2 or 4 segments"
            )
        if any(x < 0 for x in d):
            raise ValueError("durations must be nonnegative (apply the absolute-value fix first)")
        if abs(sum(d) - self.total_time) > 1e-9:
            raise ValueError(
                f"durations sum to {sum(d)!r}, not total_time {self.total_time!r}"
            )
        object.__setattr__(self, "durations", d)

    @property
    def segments_per_round(self) -> int:
        return len(self.durations) // self.depth

    @staticmethod
    def from_raw(raw: Sequence[float], depth: int, total_time: float) -> "SwitchingProtocol":
        """Apply the absolute-value fix and exact renormalization to raw samples."""
        d = np.abs(np.asarray(raw, dtype=float))
        s = d.sum()
        if s == 0:
            d = np.full(len(d), total_time / len(d))
        else:
            d = d * (total_time / s)
        d[-1] += total_time - d.sum()  # absorb roundoff so the sum is exact
        return SwitchingProtocol(tuple(d), depth, total_time)


@dataclass(frozen=True)
class AmplitudeProtocol:
    """Per-segment control amplitudes refined by GRAPE, over a fixed-time base protocol."""

    amplitudes: tuple[float, ...]
    base: SwitchingProtocol
    bounds: tuple[float, float] = AMPLITUDE_BOUNDS

    def __post_init__(self):
        a = tuple(float(x) for x in self.amplitudes)
        if len(a) != len(self.base.durations):
            raise ValueError("need one amplitude per protocol segment")
        lo, hi = self.bounds
        if any(not (lo - 1e-12 <= x <= hi + 1e-12) for x in a):
            raise ValueError(f"amplitudes must lie within [{lo}, {hi}]")
        object.__setattr__(self, "amplitudes", a)


@dataclass(frozen=True)
class PropagationResult:
    """Final operator of an evolution, plus optional per-segment unitaries for gradient reuse."""

    final_operator: DenseOperator
    per_step_unitaries: tuple[DenseOperator, ...] | None = None


def _check_compatible(ansatz: SwitchingAnsatz, n_segments: int, depth: int):
    if n_segments != ansatz.n_hamiltonians * depth:
        raise ValueError(
            f"protocol has {n_segments} segments but ansatz with "
            f"{ansatz.n_hamiltonians} Hamiltonians at depth {depth} needs "
            f"{ansatz.n_hamiltonians * depth}"
        )


def propagate_switching(
    ansatz: SwitchingAnsatz,
    protocol: SwitchingProtocol,
    cache_steps: bool = False,
) -> PropagationResult:
    """U = exp(-i H_B beta_p) ... exp(-i H_B beta_1) exp(-i H_A alpha_1)."""
    durations = np.abs(np.asarray(protocol.durations, dtype=float))
    _check_compatible(ansatz, len(durations), protocol.depth)
    nh = ansatz.n_hamiltonians
    u = DenseOperator.identity(ansatz.drift.site_dims)
    steps = [] if cache_steps else None
    for j, tau in enumerate(durations):
        seg = expm_hermitian_propagator(ansatz.hamiltonians[j % nh], tau)
        u = DenseOperator(seg.entries @ u.entries, u.site_dims)
        if steps is not None:
            steps.append(seg)
    return PropagationResult(u, tuple(steps) if steps is not None else None)


def propagate_amplitudes(
    ansatz: SwitchingAnsatz,
    amp: AmplitudeProtocol,
    cache_steps: bool = False,
) -> PropagationResult:
    """U = prod_j exp(-i (H_d + c_j H_c) tau_j) for the two-Hamiltonian ansatz."""
    if ansatz.n_hamiltonians != 2:
        raise ValueError("amplitude protocols are defined for two-Hamiltonian ansatze")
    durations = np.abs(np.asarray(amp.base.durations, dtype=float))
    _check_compatible(ansatz, len(durations), amp.base.depth)
    h_d = ansatz.drift.entries
    h_c = ansatz.controls[0].entries
    dims = ansatz.drift.site_dims
    u = DenseOperator.identity(dims)
    steps = [] if cache_steps else None
    for c, tau in zip(amp.amplitudes, durations):
        seg = expm_hermitian_propagator(DenseOperator(h_d + c * h_c, dims), tau)
        u = DenseOperator(seg.entries @ u.entries, dims)
        if steps is not None:
            steps.append(seg)
    return PropagationResult(u, tuple(steps) if steps is not None else None)


def vectorize_density(rho: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization (vec of column j sits at block j)."""
    return rho.reshape(-1, order="F")


def unvectorize_density(v: np.ndarray, dim: int) -> np.ndarray:
    return v.reshape((dim, dim), order="F")


def build_liouvillian(h: np.ndarray, lindblads: Sequence[np.ndarray]) -> np.ndarray:
    """Lindblad generator as a superoperator on column-stacked densities."""
    n = h.shape[0]
    eye = np.eye(n, dtype=np.complex128)
    liou = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for l_op in lindblads:
        ldl = l_op.conj().T @ l_op
        liou += (
            np.kron(l_op.conj(), l_op)
            - 0.5 * np.kron(eye, ldl)
            - 0.5 * np.kron(ldl.T, eye)
        )
    return liou


def _lindblad_rhs(h: np.ndarray, lindblads: Sequence[np.ndarray]):
    l_ops = [np.asarray(l) for l in lindblads]
    l_dags = [l.conj().T for l in l_ops]
    l_sq = [ld @ l for ld, l in zip(l_dags, l_ops)]
    n = h.shape[0]

    def rhs(_t, y):
        rho = y.reshape(n, n)
        drho = -1j * (h @ rho - rho @ h)
        for l, ld, sq in zip(l_ops, l_dags, l_sq):
            drho += l @ rho @ ld - 0.5 * (sq @ rho + rho @ sq)
        return drho.reshape(-1)

    return rhs


def lindblad_propagate(
    h_schedule: Sequence[tuple[DenseOperator, float]],
    lindblads: Sequence[DenseOperator],
    rho0: DensityMatrix,
    method: str = "auto",
) -> DensityMatrix:
    """Evolve ``rho0`` through a piecewise-constant Hamiltonian schedule.

    ``method`` is ``superop`` (exact segment exponentials of the vectorized
    generator), ``ode`` (RK45 at 1e-10 tolerances, restarted per segment),
    or ``auto`` which picks superop for up to three total spins.
    """
    if method not in ("superop", "ode", "auto"):
        raise ValueError(f"unknown method {method!r}")
    dims = rho0.site_dims
    n = rho0.dim
    for h, tau in h_schedule:
        if tau < 0:
            raise ValueError("schedule durations must be nonnegative")
        if h.dim != n:
            raise ValueError("schedule Hamiltonian dimension does not match the state")
    if method == "auto":
        method = "superop" if len(dims) <= SUPEROP_MAX_SITES else "ode"

    l_arrays = [l.entries for l in lindblads]
    rho = rho0.entries.copy()
    if method == "superop":
        v = vectorize_density(rho)
        for h, tau in h_schedule:
            if tau == 0:
                continue
            liou = build_liouvillian(h.entries, l_arrays)
            prop = expm_general(DenseOperator(liou * tau, (n * n,))).entries
            v = prop @ v
        rho = unvectorize_density(v, n)
    else:
        for h, tau in h_schedule:
            if tau == 0:
                continue
            sol = scipy.integrate.solve_ivp(
                _lindblad_rhs(h.entries, l_arrays),
                (0.0, tau),
                rho.reshape(-1),
                method="RK45",
                rtol=ODE_RTOL,
                atol=ODE_ATOL,
            )
            if not sol.success:
                raise RuntimeError(f"Lindblad ODE integration failed: {sol.message}")
            rho = sol.y[:, -1].reshape(n, n)

    rho = (rho + rho.conj().T) / 2  # scrub integrator-scale Hermiticity error
    return DensityMatrix(DenseOperator(rho, dims))


def switching_schedule(
    ansatz: SwitchingAnsatz, protocol: SwitchingProtocol
) -> list[tuple[DenseOperator, float]]:
    """The (Hamiltonian, duration) segment list a protocol induces."""
    durations = np.abs(np.asarray(protocol.durations, dtype=float))
    _check_compatible(ansatz, len(durations), protocol.depth)
    nh = ansatz.n_hamiltonians
    return [(ansatz.hamiltonians[j % nh], float(t)) for j, t in enumerate(durations)]


def reduced_dynamics_no_control(
    spec: SpinSystemSpec, t_grid: Sequence[float]
) -> np.ndarray:
    """Qubit |0> population under H_S + H_env + H_I with an infinite-temperature bath.

    The maximally mixed bath state is expanded exactly as the uniform
    mixture over all 2^n bath basis states; each branch is propagated as a
    pure state in the eigenbasis of the static Hamiltonian.
    """
    if spec.total_bath < 1:
        raise ValueError("reduced dynamics needs at least one bath spin")
    if spec.n_qubits != 1:
        raise ValueError("control-free reduced dynamics is defined for the single-qubit model")
    h_s, h_env, h_i = build_static_hamiltonians(spec)
    h = h_s.entries + h_env.entries + h_i.entries
    lam, v = np.linalg.eigh(h)
    nb = 2**spec.total_bath
    # initial states |0>_qubit (x) |b>_bath live in the first nb computational rows
    basis = v.conj().T[:, :nb]  # eigenbasis amplitudes of each initial state, (dim, nb)
    t_grid = np.asarray(t_grid, dtype=float)
    pops = np.empty(len(t_grid))
    for i, t in enumerate(t_grid):
        evolved = v @ (np.exp(-1j * lam * t)[:, None] * basis)  # (dim, nb)
        pops[i] = float(np.mean(np.sum(np.abs(evolved[:nb, :]) ** 2, axis=0)))
    return pops
