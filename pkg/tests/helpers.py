"""Independent oracles shared across test modules.

These deliberately avoid the implementation paths they check: Taylor-series
exponentials, explicit index-loop partial traces, and an adaptive ODE
integration of the piecewise-constant Schrodinger equation.
"""

from __future__ import annotations

import numpy as np
import scipy.integrate


def taylor_expm(m: np.ndarray, term_cutoff: float = 1e-14) -> np.ndarray:
    """Plain Taylor series with scaling by powers of two for convergence."""
    norm = np.linalg.norm(m, ord=np.inf)
    squarings = max(0, int(np.ceil(np.log2(max(norm, 1e-300))))) if norm > 1 else 0
    a = m / (2**squarings)
    out = np.eye(m.shape[0], dtype=np.complex128)
    term = np.eye(m.shape[0], dtype=np.complex128)
    k = 0
    while True:
        k += 1
        term = term @ a / k
        out = out + term
        if np.max(np.abs(term)) < term_cutoff or k > 200:
            break
    for _ in range(squarings):
        out = out @ out
    return out


def loop_partial_trace(m: np.ndarray, dims: tuple[int, ...], keep) -> np.ndarray:
    """Explicit sum over traced indices, one matrix element at a time."""
    keep = sorted(keep)
    traced = [i for i in range(len(dims)) if i not in keep]
    kept_dims = [dims[i] for i in keep]
    out_dim = int(np.prod(kept_dims)) if kept_dims else 1
    out = np.zeros((out_dim, out_dim), dtype=np.complex128)

    def flat(idx):
        f = 0
        for i, d in enumerate(dims):
            f = f * d + idx[i]
        return f

    kept_ranges = [range(dims[i]) for i in keep]
    traced_ranges = [range(dims[i]) for i in traced]
    import itertools

    for r_out, row_kept in enumerate(itertools.product(*kept_ranges)):
        for c_out, col_kept in enumerate(itertools.product(*kept_ranges)):
            acc = 0.0 + 0.0j
            for tr in itertools.product(*traced_ranges):
                row = [0] * len(dims)
                col = [0] * len(dims)
                for i, site in enumerate(keep):
                    row[site] = row_kept[i]
                    col[site] = col_kept[i]
                for i, site in enumerate(traced):
                    row[site] = tr[i]
                    col[site] = tr[i]
                acc += m[flat(row), flat(col)]
            out[r_out, c_out] = acc
    return out


def schrodinger_ode_unitary(
    hams: list[np.ndarray], durations: np.ndarray, rtol=1e-12, atol=1e-12
) -> np.ndarray:
    """Adaptive RK integration of dU/dt = -i H(t) U, restarted at switches."""
    n = hams[0].shape[0]
    u = np.eye(n, dtype=np.complex128)
    nh = len(hams)
    for j, tau in enumerate(durations):
        if tau == 0:
            continue
        h = hams[j % nh]

        def rhs(_t, y):
            return (-1j * h @ y.reshape(n, n)).reshape(-1)

        sol = scipy.integrate.solve_ivp(
            rhs, (0.0, float(tau)), u.reshape(-1), method="DOP853", rtol=rtol, atol=atol
        )
        assert sol.success
        u = sol.y[:, -1].reshape(n, n)
    return u


def min_distance_over_bath_unitaries(u, wmat, n_bath, rng, n_starts=4):
    """Numerical minimization of ||U - W (x) Phi||_F^2 over bath unitaries Phi.

    Independent of the trace-norm identity it is used to check: Phi is
    parameterized as expm(iX) with Hermitian X and descended with L-BFGS-B,
    gradients via scipy's expm Frechet derivative.
    """
    import scipy.linalg
    import scipy.optimize

    nb = n_bath
    n_params = nb * nb

    def unpack(x):
        X = np.zeros((nb, nb), dtype=complex)
        X[np.diag_indices(nb)] = x[:nb]
        off_re = x[nb : nb + nb * (nb - 1) // 2]
        off_im = x[nb + nb * (nb - 1) // 2 :]
        k = 0
        for i in range(nb):
            for j in range(i + 1, nb):
                X[i, j] = off_re[k] + 1j * off_im[k]
                X[j, i] = off_re[k] - 1j * off_im[k]
                k += 1
        return X

    n_sys = wmat.shape[0]
    q = np.einsum("ts,sitj->ij", wmat.conj().T, u.reshape(n_sys, nb, n_sys, nb))

    def value_and_grad(x):
        X = unpack(x)
        phi = scipy.linalg.expm(1j * X)
        val = float(np.linalg.norm(u - np.kron(wmat, phi)) ** 2)
        g = np.zeros_like(x)
        for k in range(n_params):
            e = np.zeros(n_params)
            e[k] = 1.0
            _, dphi = scipy.linalg.expm_frechet(1j * X, 1j * unpack(e))
            g[k] = -2.0 * float(np.real(np.sum(q.conj() * dphi)))
        return val, g

    best = np.inf
    for s in range(n_starts):
        x0 = np.zeros(n_params) if s == 0 else rng.standard_normal(n_params)
        res = scipy.optimize.minimize(
            value_and_grad, x0, jac=True, method="L-BFGS-B",
            options=dict(maxiter=500, ftol=1e-16, gtol=1e-12),
        )
        best = min(best, float(res.fun))
    return best


def random_unitary(dim: int, rng) -> np.ndarray:
    x = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(x)
    return q * (np.diag(r) / np.abs(np.diag(r)))[None, :]


def random_hermitian(dim: int, rng) -> np.ndarray:
    x = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (x + x.conj().T) / 2
