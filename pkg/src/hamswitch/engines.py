"""Batched objective evaluators backing the optimizers.

:class:`UnitaryFidelityEngine` pre-diagonalizes the switching Hamiltonians
once and then evaluates whole batches of duration vectors through the
selected kernel backend (numba or numpy).  :class:`RefStateFidelityEngine`
does the same for the Lindblad reference-state objective, propagating all
reference densities together through diagonalized segment Liouvillians
(with an exact `expm` fallback when the generator is too ill-conditioned
to diagonalize safely).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .backend import active_backend, batch_fidelity_kernel
from .fidelity import reference_states
from .models import SwitchingAnsatz, TargetGate
from .propagate import build_liouvillian


class UnitaryFidelityEngine:
    """Trace-norm gate fidelity of switching protocols, batched over durations."""

    def __init__(
        self,
        ansatz: SwitchingAnsatz,
        target: TargetGate,
        n_system_sites: int | None = None,
        backend: str | None = None,
    ):
        self.backend = backend or active_backend()
        self._kernel = batch_fidelity_kernel(self.backend)
        nh = ansatz.n_hamiltonians
        n = ansatz.dim
        self.n_hamiltonians = nh
        self.dim = n
        n_sys_sites = target.matrix.n_sites if n_system_sites is None else n_system_sites
        self.sys_dim = int(np.prod(ansatz.drift.site_dims[:n_sys_sites]))
        self._evals = np.empty((nh, n))
        self._evecs = np.empty((nh, n, n), dtype=np.complex128)
        for i, h in enumerate(ansatz.hamiltonians):
            lam, v = np.linalg.eigh(h.entries)
            self._evals[i] = lam
            self._evecs[i] = v
        self._evecs_ct = np.ascontiguousarray(self._evecs.conj().transpose(0, 2, 1))
        self._wdag = np.ascontiguousarray(target.matrix.entries.conj().T)

    def fidelities(self, durations: np.ndarray) -> np.ndarray:
        """Fidelity of each row of ``durations`` (shape (B, K), K = nh * depth)."""
        d = np.ascontiguousarray(np.abs(durations), dtype=np.float64)
        if d.ndim != 2:
            raise ValueError("expected a (batch, segments) duration array")
        out = np.empty(d.shape[0])
        self._kernel(
            self._evecs, self._evecs_ct, self._evals, d, self._wdag, self.sys_dim, out
        )
        return out

    def fidelity(self, durations: np.ndarray) -> float:
        return float(self.fidelities(np.asarray(durations)[None, :])[0])


class _SegmentPropagator:
    """exp(L * tau) applied to stacked vectors, via eigendecomposition when safe."""

    def __init__(self, liou: np.ndarray):
        self.liou = liou
        self.diagonalized = False
        try:
            w, v = scipy.linalg.eig(liou)
            vinv = np.linalg.inv(v)
            recon = (v * w[None, :]) @ vinv
            scale = max(1.0, np.abs(liou).max())
            if np.max(np.abs(recon - liou)) < 1e-10 * scale:
                self.w, self.v, self.vinv = w, v, vinv
                self.diagonalized = True
        except np.linalg.LinAlgError:
            pass

    def apply(self, tau: float, x: np.ndarray) -> np.ndarray:
        if self.diagonalized:
            return self.v @ (np.exp(self.w * tau)[:, None] * (self.vinv @ x))
        return scipy.linalg.expm(self.liou * tau) @ x


class RefStateFidelityEngine:
    """Reference-state fidelity of switching protocols under Lindblad dynamics."""

    def __init__(
        self,
        ansatz: SwitchingAnsatz,
        target: TargetGate,
        lindblads,
        n_system_sites: int | None = None,
    ):
        dims = ansatz.drift.site_dims
        n_sys_sites = target.matrix.n_sites if n_system_sites is None else n_system_sites
        self.sys_dim = int(np.prod(dims[:n_sys_sites]))
        self.bath_dim = int(np.prod(dims[n_sys_sites:]))
        self.dim = ansatz.dim
        self.n_hamiltonians = ansatz.n_hamiltonians
        l_arrays = [l.entries for l in lindblads]
        self._props = [
            _SegmentPropagator(build_liouvillian(h.entries, l_arrays))
            for h in ansatz.hamiltonians
        ]
        d = self.sys_dim
        self._d = d
        wmat = target.matrix.entries
        refs = reference_states(d)
        self._rotated = [wmat @ rho @ wmat.conj().T for rho in refs]
        bath0 = np.zeros((self.bath_dim, self.bath_dim), dtype=np.complex128)
        bath0[0, 0] = 1.0
        cols = []
        for rho in refs:
            full = np.kron(rho, bath0)
            cols.append(full.reshape(-1, order="F"))
        self._x0 = np.stack(cols, axis=1)  # (N^2, d+1)

    def fidelity(self, durations: np.ndarray) -> float:
        d = np.abs(np.asarray(durations, dtype=float))
        x = self._x0
        nh = self.n_hamiltonians
        for j, tau in enumerate(d):
            if tau == 0.0:
                continue
            x = self._props[j % nh].apply(float(tau), x)
        n = self.dim
        total = 0.0
        weight = 1.0 / (self._d + 1)
        for i, rotated in enumerate(self._rotated):
            rho_full = x[:, i].reshape(n, n, order="F")
            reduced = (
                rho_full.reshape(self.sys_dim, self.bath_dim, self.sys_dim, self.bath_dim)
                .trace(axis1=1, axis2=3)
            )
            total += weight * float(np.real(np.trace(rotated @ reduced)))
        return min(1.0, max(0.0, total))

    def fidelities(self, durations: np.ndarray) -> np.ndarray:
        d = np.asarray(durations, dtype=float)
        if d.ndim != 2:
            raise ValueError("expected a (batch, segments) duration array")
        return np.array([self.fidelity(row) for row in d])
