"""Layout synthesis for dynamically field-programmable neutral-atom qubit arrays."""

from .benchmarks import circuit_from_dict, circuit_to_dict, generate_qaoa_benchmark, load_circuit, save_circuit
from .checker import FidelityReport, Violation, breakdown_csv, fidelity, verify
from .codegen import InstructionProgram, assign_round_robin, lower_move_set, lower_program
from .core import (
    ArchConfig,
    CommutationGroup,
    DependencySubcircuit,
    Gate,
    Site,
    SlicedCircuit,
    movement_time,
)
from .pipeline import CompileOptions, CompileResult, compile_circuit, write_artifacts
from .placer import AnnealParams, Placement, place_dynamic, place_static, place_trivial
from .router import Move, MovePair, RoutingPlan, conflicts, route
from .scheduler import Schedule, color_edges_misra_gries, schedule_circuit

__all__ = [
    "AnnealParams",
    "ArchConfig",
    "CommutationGroup",
    "CompileOptions",
    "CompileResult",
    "DependencySubcircuit",
    "FidelityReport",
    "Gate",
    "InstructionProgram",
    "Move",
    "MovePair",
    "Placement",
    "RoutingPlan",
    "Schedule",
    "Site",
    "SlicedCircuit",
    "Violation",
    "assign_round_robin",
    "breakdown_csv",
    "circuit_from_dict",
    "circuit_to_dict",
    "color_edges_misra_gries",
    "compile_circuit",
    "conflicts",
    "fidelity",
    "generate_qaoa_benchmark",
    "load_circuit",
    "lower_move_set",
    "lower_program",
    "movement_time",
    "place_dynamic",
    "place_static",
    "place_trivial",
    "route",
    "save_circuit",
    "schedule_circuit",
    "verify",
    "write_artifacts",
]
