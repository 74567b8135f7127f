import numpy as np
import pytest

from hamswitch.models import (
    SpinSystemSpec,
    build_lindblad_operators,
    build_static_hamiltonians,
    build_switching_ansatz,
    build_target,
    ns_to_sim_time,
    pauli_at,
    standard_parameter_presets,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def iso_spec(n_bath=2, couplings=None, E=1.0):
    return SpinSystemSpec(
        n_qubits=1,
        n_bath=n_bath,
        coupling_kind="isotropic",
        frame="rotating",
        qubit_splittings=(E,),
        couplings=couplings or (1.0,) * n_bath,
    )


class TestPauliAt:
    def test_z_on_single_site(self):
        assert np.array_equal(pauli_at(0, "z", 1).entries, SZ)

    def test_embedding_order(self):
        assert np.array_equal(pauli_at(1, "x", 2).entries, np.kron(np.eye(2), SX))

    def test_same_site_anticommutation(self):
        for site in (0, 1, 2):
            x = pauli_at(site, "x", 3).entries
            y = pauli_at(site, "y", 3).entries
            assert np.allclose(x @ y + y @ x, 0)

    def test_cross_site_commutation(self):
        a = pauli_at(0, "x", 2).entries
        b = pauli_at(1, "x", 2).entries
        assert np.allclose(a @ b - b @ a, 0)

    def test_lowering_operator(self):
        minus = pauli_at(0, "-", 1).entries
        assert np.array_equal(minus, np.array([[0, 1], [0, 0]], dtype=complex))

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            pauli_at(2, "z", 2)


class TestSpecValidation:
    def test_rotating_frame_rejects_splittings(self):
        with pytest.raises(ValueError, match="rotating"):
            SpinSystemSpec(
                n_qubits=1,
                n_bath=1,
                coupling_kind="dipole",
                frame="rotating",
                qubit_splittings=(1.0,),
                bath_splittings=(1.1,),
                couplings=(0.005,),
            )

    def test_coupling_count_must_match(self):
        with pytest.raises(ValueError, match="couplings"):
            iso_spec(n_bath=2, couplings=(1.0,))

    def test_two_qubit_needs_pair_counts(self):
        with pytest.raises(ValueError, match="per-qubit"):
            SpinSystemSpec(
                n_qubits=2,
                n_bath=2,
                coupling_kind="dipole",
                frame="lab",
                qubit_splittings=(1.0, 1.05),
            )


class TestStaticHamiltonians:
    def test_no_bath_terms_vanish(self):
        h_s, h_env, h_i = build_static_hamiltonians(iso_spec(n_bath=0, couplings=()))
        assert np.allclose(h_i.entries, 0) and np.allclose(h_env.entries, 0)
        assert np.allclose(h_s.entries, -0.5 * SZ)

    def test_iso_coupling_form(self):
        _, _, h_i = build_static_hamiltonians(iso_spec(n_bath=2))
        want = np.zeros((8, 8), dtype=complex)
        for q in (1, 2):
            for s in ("x", "y", "z"):
                want += pauli_at(0, s, 3).entries @ pauli_at(q, s, 3).entries
        assert np.max(np.abs(h_i.entries - want)) <= 1e-15

    def test_dipole_hand_built_4x4(self):
        # one qubit + one TLS: E=1, Delta=1.1, A=0.005, expanded by hand
        spec = SpinSystemSpec(
            n_qubits=1,
            n_bath=1,
            coupling_kind="dipole",
            frame="lab",
            qubit_splittings=(1.0,),
            bath_splittings=(1.1,),
            couplings=(0.005,),
        )
        h_s, h_env, h_i = build_static_hamiltonians(spec)
        total = h_s.entries + h_env.entries + h_i.entries
        a = 0.005
        want = np.array(
            [
                [-0.5 - 0.55, 0, 0, 0],
                [0, -0.5 + 0.55, a / 2, 0],
                [0, a / 2, 0.5 - 0.55, 0],
                [0, 0, 0, 0.5 + 0.55],
            ],
            dtype=complex,
        )
        assert np.max(np.abs(total - want)) <= 1e-15

    def test_two_qubit_isotropic_rejected(self):
        spec = SpinSystemSpec(
            n_qubits=2,
            n_bath=(1, 0),
            coupling_kind="isotropic",
            frame="rotating",
            qubit_splittings=(1.0, 1.05),
            couplings=(1.0,),
        )
        with pytest.raises(ValueError, match="out of scope"):
            build_static_hamiltonians(spec)

    def test_hermiticity(self):
        spec = standard_parameter_presets("dipole_device", n_bath=3, seed=5)
        for h in build_static_hamiltonians(spec):
            assert h.is_hermitian(1e-12)

    def test_iso_conserves_total_z(self):
        _, _, h_i = build_static_hamiltonians(iso_spec(n_bath=2))
        total_z = sum(pauli_at(i, "z", 3).entries for i in range(3))
        assert np.max(np.abs(h_i.entries @ total_z - total_z @ h_i.entries)) <= 1e-13

    def test_dipole_conserves_excitation_number(self):
        spec = standard_parameter_presets("dipole_device", n_bath=2, seed=3)
        _, _, h_i = build_static_hamiltonians(spec)
        total_z = sum(pauli_at(i, "z", 3).entries for i in range(3))
        assert np.max(np.abs(h_i.entries @ total_z - total_z @ h_i.entries)) <= 1e-13


class TestSwitchingAnsatz:
    def test_two_ham_x_no_bath(self):
        ans = build_switching_ansatz(iso_spec(n_bath=0, couplings=()), "two_ham_x")
        assert np.allclose(ans.hamiltonians[0].entries, -0.5 * SZ + 2 * SX)
        assert np.allclose(ans.hamiltonians[1].entries, -0.5 * SZ - 2 * SX)
        assert ans.universal_flag

    @pytest.mark.parametrize("variant", ["two_ham_x", "two_ham_z_nonuniversal", "four_ham_xy"])
    def test_mean_of_hamiltonians_is_drift(self, variant):
        ans = build_switching_ansatz(iso_spec(), variant)
        mean = sum(h.entries for h in ans.hamiltonians) / len(ans.hamiltonians)
        assert np.max(np.abs(mean - ans.drift.entries)) <= 1e-13

    def test_two_ham_difference_is_twice_control(self):
        ans = build_switching_ansatz(iso_spec(), "two_ham_x")
        diff = ans.hamiltonians[0].entries - ans.hamiltonians[1].entries
        assert np.array_equal(diff, 2 * ans.controls[0].entries)

    def test_four_ham_sign_pattern(self):
        spec = standard_parameter_presets("dipole_device", n_bath=1, seed=0)
        ans = build_switching_ansatz(spec, "four_ham_xy")
        d = ans.drift.entries
        cx, cy = ans.controls[0].entries, ans.controls[1].entries
        # sigma_y drive carries coefficient 3E/2
        assert np.allclose(cy, 1.5 * pauli_at(0, "y", 2).entries)
        signs = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
        for h, (sx, sy) in zip(ans.hamiltonians, signs):
            assert np.max(np.abs(h.entries - (d + sx * cx + sy * cy))) <= 1e-13

    def test_nonuniversal_flag(self):
        ans = build_switching_ansatz(iso_spec(), "two_ham_z_nonuniversal")
        assert not ans.universal_flag

    def test_two_qubit_control_generator(self):
        spec = standard_parameter_presets("dipole_2qubit", n_bath=(1, 1), seed=2)
        ans = build_switching_ansatz(spec, "two_qubit")
        ns = spec.n_sites
        want = 1.0 * (pauli_at(0, "x", ns).entries + pauli_at(1, "x", ns).entries)
        assert np.allclose(ans.controls[0].entries, want)

    def test_variant_qubit_count_mismatch(self):
        with pytest.raises(ValueError, match="two_qubit"):
            build_switching_ansatz(iso_spec(), "two_qubit")


class TestLindbladOperators:
    def test_absent_t1_gives_empty(self):
        assert build_lindblad_operators(iso_spec()) == []

    def test_paper_prefactors(self):
        spec = SpinSystemSpec(
            n_qubits=1,
            n_bath=1,
            coupling_kind="dipole",
            frame="lab",
            qubit_splittings=(1.0,),
            bath_splittings=(1.1,),
            couplings=(0.005,),
            t1_system=ns_to_sim_time(500.0),
            t1_tls=ns_to_sim_time(200.0),
        )
        ops = build_lindblad_operators(spec)
        assert len(ops) == 2
        got_sys = np.max(np.abs(ops[0].entries))
        got_tls = np.max(np.abs(ops[1].entries))
        assert np.isclose(got_sys, 1.0 / np.sqrt(500 * 16 * np.pi))
        assert np.isclose(got_tls, 1.0 / np.sqrt(200 * 16 * np.pi))

    def test_ldagl_is_scaled_projector(self):
        spec = SpinSystemSpec(
            n_qubits=1,
            n_bath=1,
            coupling_kind="dipole",
            frame="lab",
            qubit_splittings=(1.0,),
            bath_splittings=(1.1,),
            couplings=(0.005,),
            t1_tls=50.0,
        )
        (l_op,) = build_lindblad_operators(spec)
        ldl = l_op.entries.conj().T @ l_op.entries
        proj_excited = np.kron(np.eye(2), np.diag([0.0, 1.0]))
        assert np.max(np.abs(ldl - proj_excited / 50.0)) <= 1e-15

    def test_nonpositive_t1_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            SpinSystemSpec(
                n_qubits=1,
                n_bath=0,
                coupling_kind="dipole",
                frame="lab",
                qubit_splittings=(1.0,),
                t1_system=-3.0,
            )


class TestPresets:
    def test_iso_equal(self):
        spec = standard_parameter_presets("iso_equal", n_bath=2)
        assert spec.qubit_splittings == (1.0,)
        assert spec.couplings == (1.0, 1.0)
        assert spec.frame == "rotating"

    def test_dipole_device_splittings(self):
        spec = standard_parameter_presets("dipole_device", n_bath=3, seed=1)
        assert spec.bath_splittings == (1.1, 1.2, 1.3)

    def test_dipole_coupling_bounds(self):
        for seed in range(5):
            spec = standard_parameter_presets("dipole_device", n_bath=4, seed=seed)
            assert all(5e-4 <= a <= 5e-3 for a in spec.couplings)

    def test_coupling_sampling_is_seeded(self):
        a = standard_parameter_presets("iso_variable", n_bath=3, seed=9)
        b = standard_parameter_presets("iso_variable", n_bath=3, seed=9)
        c = standard_parameter_presets("iso_variable", n_bath=3, seed=10)
        assert a.couplings == b.couplings
        assert a.couplings != c.couplings
        assert all(1.0 <= x <= 2.0 for x in a.couplings)

    def test_dipole_2qubit(self):
        spec = standard_parameter_presets("dipole_2qubit", n_bath=(1, 1), seed=0)
        assert spec.qubit_splittings == (1.0, 1.05)
        assert spec.qubit_qubit_coupling == 0.025

    def test_unknown_preset(self):
        with pytest.raises(ValueError, match="preset"):
            standard_parameter_presets("bogus")


class TestTargets:
    def test_t_gate_matrix(self):
        t = build_target("T")
        assert np.allclose(t.matrix.entries, np.diag([1.0, np.exp(1j * np.pi / 4)]))

    def test_hadamard_squares_to_identity(self):
        h = build_target("Hadamard").matrix.entries
        assert np.allclose(h @ h, np.eye(2), atol=1e-15)

    def test_cnot_permutation(self):
        c = build_target("CNOT", n_qubits=2).matrix.entries
        want = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
        assert np.array_equal(c, want)

    def test_arity_mismatch(self):
        with pytest.raises(ValueError, match="acts on"):
            build_target("CNOT", n_qubits=1)

    def test_custom_requires_matrix(self):
        with pytest.raises(ValueError, match="custom"):
            build_target("custom")
