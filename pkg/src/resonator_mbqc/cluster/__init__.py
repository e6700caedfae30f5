"""Cluster-state construction, fusion scheduling and measurement patterns."""

from .dense import (
    MAX_DENSE_QUBITS,
    CapacityError,
    DenseRegister,
    apply_pauli_string,
    b_gamma_bra,
    b_gamma_probabilities,
    build_cluster_dense,
    measure_b_gamma,
    plus_register,
    verify_stabilizers,
)
from .pattern import (
    BackendCapabilityError,
    Byproduct,
    MeasurementPattern,
    PatternError,
    PatternResult,
    Step,
    clifford_basis,
    euler_unitary,
    load_pattern,
    pattern_from_document,
    pattern_to_document,
    rotation_chain_pattern,
    run_pattern,
)
from .schedule import FusionSchedule, fusion_schedule
from .stabilizer import GraphState, Tableau, build_cluster_graph, measure_pauli_graph

__all__ = [name for name in dir() if not name.startswith("_")]
