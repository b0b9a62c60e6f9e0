"""Code construction, evaluation, capacity search and the converse ledger."""

from .construction import CodeArtifacts, build_code, default_dims, evaluate_code, input_state, output_state
from .converse import ConverseLedger, StepRecord, converse_chain_check, random_code
from .optimize import CapacityResult, embed_isometry, input_from_isometry, optimize_capacity
from .rates import (
    EntanglementAccounting,
    check_side_marginal,
    d_eps,
    dilated_output,
    entanglement_accounting,
    gp_rate,
    pauli_precorrection_state,
)

__all__ = [
    "CapacityResult",
    "CodeArtifacts",
    "ConverseLedger",
    "EntanglementAccounting",
    "StepRecord",
    "build_code",
    "check_side_marginal",
    "converse_chain_check",
    "d_eps",
    "default_dims",
    "dilated_output",
    "embed_isometry",
    "entanglement_accounting",
    "evaluate_code",
    "gp_rate",
    "input_from_isometry",
    "input_state",
    "optimize_capacity",
    "output_state",
    "pauli_precorrection_state",
    "random_code",
]
