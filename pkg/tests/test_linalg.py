import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from hamswitch.linalg import (
    DenseOperator,
    DensityMatrix,
    NonHermitianError,
    SingularMatrixError,
    expm_general,
    expm_hermitian_propagator,
    expm_hermitian_with_derivative,
    kron,
    partial_trace,
    polar_unitary_factor,
    trace_norm,
)

from helpers import loop_partial_trace, random_hermitian, random_unitary, taylor_expm

I2 = np.eye(2)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def op(m, dims=None):
    return DenseOperator.from_matrix(np.asarray(m, dtype=complex), dims)


def rand_op(sites, rng):
    d = 2**sites
    m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return DenseOperator(m, (2,) * sites)


class TestDenseOperator:
    def test_site_dims_product_must_match(self):
        with pytest.raises(ValueError, match="site_dims"):
            DenseOperator(np.eye(4), (2,))

    def test_dimension_cap(self):
        with pytest.raises(ValueError, match="cap"):
            DenseOperator(np.eye(512), (512,))

    def test_entries_are_immutable(self):
        a = op(np.eye(2))
        with pytest.raises(ValueError):
            a.entries[0, 0] = 5.0


class TestDensityMatrix:
    def test_accepts_valid_state(self):
        rho = DensityMatrix(op(np.diag([0.25, 0.75])))
        assert rho.dim == 2

    def test_rejects_bad_trace(self):
        with pytest.raises(ValueError, match="trace"):
            DensityMatrix(op(np.diag([0.5, 0.75])))

    def test_rejects_non_hermitian(self):
        m = np.array([[0.5, 0.1], [0.0, 0.5]])
        with pytest.raises(ValueError, match="Hermitian"):
            DensityMatrix(op(m))

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(ValueError, match="eigenvalue"):
            DensityMatrix(op(np.diag([1.1, -0.1])))


class TestKron:
    def test_identity(self):
        assert np.allclose(kron(op(I2), op(I2)).entries, np.eye(4))

    def test_sigma_z_sigma_x_blocks(self):
        out = kron(op(SZ), op(SX)).entries
        expected = np.block([[SX, np.zeros((2, 2))], [np.zeros((2, 2)), -SX]])
        assert np.array_equal(out, expected)

    def test_action_factorizes(self, rng):
        a, b = rand_op(1, rng), rand_op(1, rng)
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        w = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        lhs = kron(a, b).entries @ np.kron(v, w)
        rhs = np.kron(a.entries @ v, b.entries @ w)
        assert np.allclose(lhs, rhs, atol=1e-13)

    def test_site_dims_concatenate(self, rng):
        assert kron(rand_op(1, rng), rand_op(2, rng)).site_dims == (2, 2, 2)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_associativity(self, seed):
        r = np.random.default_rng(seed)
        a, b, c = (rand_op(1, r) for _ in range(3))
        left = kron(kron(a, b), c).entries
        right = kron(a, kron(b, c)).entries
        assert np.max(np.abs(left - right)) <= 1e-14


class TestPartialTrace:
    def test_product_state_factorization(self, rng):
        a, b = rand_op(1, rng), rand_op(1, rng)
        out = partial_trace(kron(a, b), keep={0})
        assert np.allclose(out.entries, np.trace(b.entries) * a.entries, atol=1e-13)

    def test_identity(self):
        out = partial_trace(op(np.eye(8), (2, 2, 2)), keep={1, 2})
        assert np.allclose(out.entries, 2 * np.eye(4))

    def test_against_loop_oracle(self, rng):
        m = rand_op(3, rng)
        for keep in ({0}, {1}, {0, 2}, {1, 2}, {0, 1, 2}):
            got = partial_trace(m, keep).entries
            want = loop_partial_trace(m.entries, (2, 2, 2), keep)
            assert np.max(np.abs(got - want)) <= 1e-12

    def test_trace_preserved(self, rng):
        m = rand_op(3, rng)
        out = partial_trace(m, keep={1})
        assert np.isclose(np.trace(out.entries), np.trace(m.entries))

    def test_out_of_range(self, rng):
        with pytest.raises(IndexError):
            partial_trace(rand_op(2, rng), keep={5})

    def test_full_trace_gives_scalar_operator(self, rng):
        m = rand_op(2, rng)
        out = partial_trace(m, keep=())
        assert out.dim == 1 and np.isclose(out.entries[0, 0], np.trace(m.entries))


class TestExpmHermitian:
    def test_sigma_z_pi(self):
        u = expm_hermitian_propagator(op(SZ), np.pi)
        assert np.allclose(u.entries, -np.eye(2), atol=1e-14)

    def test_zero_time(self, rng):
        h = DenseOperator(random_hermitian(8, rng), (2, 2, 2))
        assert np.allclose(expm_hermitian_propagator(h, 0.0).entries, np.eye(8))

    def test_against_scaling_squaring_oracle(self, rng):
        h = random_hermitian(8, rng)
        got = expm_hermitian_propagator(DenseOperator(h, (2, 2, 2)), 0.37).entries
        want = scipy.linalg.expm(-1j * h * 0.37)
        assert np.max(np.abs(got - want)) <= 1e-11

    def test_group_property(self, rng):
        h = DenseOperator(random_hermitian(4, rng), (2, 2))
        u1 = expm_hermitian_propagator(h, 0.3).entries
        u2 = expm_hermitian_propagator(h, 0.9).entries
        u12 = expm_hermitian_propagator(h, 1.2).entries
        assert np.max(np.abs(u2 @ u1 - u12)) <= 1e-10

    def test_unitarity(self, rng):
        h = DenseOperator(random_hermitian(16, rng) * 10, (2, 2, 2, 2))
        u = expm_hermitian_propagator(h, 2.5)
        defect = u.entries.conj().T @ u.entries - np.eye(16)
        assert np.linalg.norm(defect) <= 1e-9

    def test_rejects_non_hermitian(self, rng):
        m = rand_op(1, rng)
        with pytest.raises(NonHermitianError):
            expm_hermitian_propagator(m, 1.0)

    def test_frechet_derivative_matches_fd(self, rng):
        h = random_hermitian(6, rng)
        g = random_hermitian(6, rng)
        _, da = expm_hermitian_with_derivative(h, g, 0.7)
        eps = 1e-7
        ap = scipy.linalg.expm(-1j * (h + eps * g) * 0.7)
        am = scipy.linalg.expm(-1j * (h - eps * g) * 0.7)
        fd = (ap - am) / (2 * eps)
        assert np.max(np.abs(da - fd)) <= 1e-7


class TestExpmGeneral:
    def test_zero(self):
        assert np.allclose(expm_general(op(np.zeros((3, 3)), (3,))).entries, np.eye(3))

    def test_diagonal(self):
        m = np.diag([0.3 + 1j, -2.0])
        out = expm_general(op(m)).entries
        assert np.allclose(np.diag(out), np.exp(np.diag(m)), atol=1e-14)

    def test_against_taylor_oracle(self, rng):
        m = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        m *= 2.0 / np.linalg.norm(m, 2)
        got = expm_general(op(m, (16,))).entries
        want = taylor_expm(m)
        assert np.max(np.abs(got - want)) / np.max(np.abs(want)) <= 1e-12


class TestTraceNorm:
    def test_identity(self):
        assert np.isclose(trace_norm(op(np.eye(6), (6,))), 6.0)

    def test_diagonal_singular_values(self):
        assert np.isclose(trace_norm(op(np.diag([3.0, -4.0j]))), 7.0)

    def test_against_eigendecomposition_oracle(self, rng):
        m = rand_op(2, rng)
        w = np.linalg.eigvalsh(m.entries.conj().T @ m.entries)
        want = np.sum(np.sqrt(np.clip(w, 0, None)))
        assert abs(trace_norm(m) - want) <= 1e-10

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_unitary_invariance(self, seed):
        r = np.random.default_rng(seed)
        m = r.standard_normal((4, 4)) + 1j * r.standard_normal((4, 4))
        u, v = random_unitary(4, r), random_unitary(4, r)
        a = trace_norm(DenseOperator(m, (4,)))
        b = trace_norm(DenseOperator(u @ m @ v, (4,)))
        assert abs(a - b) <= 1e-10


class TestPolarUnitaryFactor:
    def test_unitary_input_is_fixed_point(self, rng):
        u = random_unitary(4, rng)
        p = polar_unitary_factor(DenseOperator(u, (4,))).entries
        assert np.max(np.abs(p - u)) <= 1e-12

    def test_scaled_identity(self):
        p = polar_unitary_factor(op(2 * np.eye(3), (3,))).entries
        assert np.allclose(p, np.eye(3))

    def test_defining_property(self, rng):
        m = rand_op(2, rng)
        p = polar_unitary_factor(m).entries
        h = p.conj().T @ m.entries
        assert np.max(np.abs(h - h.conj().T)) <= 1e-9
        assert np.linalg.eigvalsh((h + h.conj().T) / 2).min() > -1e-9

    def test_rank_deficient_raises(self):
        m = np.diag([1.0, 1e-14])
        with pytest.raises(SingularMatrixError):
            polar_unitary_factor(op(m))
