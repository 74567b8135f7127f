"""Hamiltonian-switching bipartite control of noisy qubit systems.

Builds central-spin and TLS-coupled models, optimizes switching protocols
with policy gradient, refines amplitudes with GRAPE, evaluates unitary /
state / reference-state fidelities, and analyzes controllability through
numeric Lie closure.
"""

from .linalg import (
    DenseOperator,
    DensityMatrix,
    NonHermitianError,
    SingularMatrixError,
    expm_general,
    expm_hermitian_propagator,
    kron,
    partial_trace,
    polar_unitary_factor,
    trace_norm,
)
from .models import (
    SpinSystemSpec,
    SwitchingAnsatz,
    TargetGate,
    build_lindblad_operators,
    build_static_hamiltonians,
    build_switching_ansatz,
    build_target,
    ns_to_sim_time,
    pauli_at,
    sim_time_to_ns,
    standard_parameter_presets,
)
from .propagate import (
    AmplitudeProtocol,
    PropagationResult,
    SwitchingProtocol,
    lindblad_propagate,
    propagate_amplitudes,
    propagate_switching,
    reduced_dynamics_no_control,
)
from .fidelity import (
    FidelityReport,
    average_state_fidelity,
    haar_random_state,
    mli,
    no_control_baseline,
    reference_state_fidelity,
    unitary_fidelity,
)
from .optimize import (
    GradientCheckError,
    GrapeConfig,
    LandscapeDiagnostics,
    PGConfig,
    grape_refine,
    landscape_diagnostics,
    pg_optimize,
)
from .controllability import (
    LieAlgebraBasis,
    RecursionTable,
    controllability_table,
    lie_closure,
    recursion_determinant,
    subsystem_controllable,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
