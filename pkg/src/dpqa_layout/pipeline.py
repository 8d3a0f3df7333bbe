"""End-to-end compilation: schedule, place, route, lower, verify, score."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

from .checker import FidelityReport, Violation, breakdown_csv, fidelity, verify
from .codegen import InstructionProgram, lower_move_set, lower_program
from .core import ArchConfig, SlicedCircuit
from .placer import AnnealParams, Placement, place_dynamic, place_static, place_trivial
from .router import DEFAULT_WINDOW, ROUTING_METHODS, RoutingPlan, RoutingResult, plan_moves_out, plan_routing, plan_stage_moves
from .scheduler import Schedule, schedule_circuit

PLACEMENT_MODES = ("trivial", "static", "dynamic")


class CompileError(RuntimeError):
    """A pipeline phase failed; ``phase`` names the module that raised."""

    def __init__(self, phase: str, cause: Exception):
        super().__init__(f"{phase}: {cause}")
        self.phase = phase
        self.cause = cause


@dataclass(frozen=True)
class CompileOptions:
    placement: str = "dynamic"
    routing: str = "windowis"
    window_size: int = DEFAULT_WINDOW
    aods: Optional[int] = None  # None: take n_aods from the architecture
    seed: int = 0
    anneal: AnnealParams = AnnealParams()
    charge_shifts: bool = False
    relocation_weight: float = 1.0

    def __post_init__(self) -> None:
        if self.placement not in PLACEMENT_MODES:
            raise ValueError(f"placement must be one of {PLACEMENT_MODES}, got {self.placement!r}")
        if self.routing not in ROUTING_METHODS:
            raise ValueError(f"routing must be one of {ROUTING_METHODS}, got {self.routing!r}")
        if self.window_size < 1:
            raise ValueError("window size must be at least 1")
        if self.aods is not None and self.aods < 1:
            raise ValueError("aods must be at least 1")


@dataclass
class CompileResult:
    circuit: SlicedCircuit
    arch: ArchConfig
    options: CompileOptions
    schedule: Schedule
    placement: Placement
    plan: RoutingPlan
    program: InstructionProgram
    violations: List[Violation]
    report: Optional[FidelityReport]
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def report_dict(self, include_timings: bool = False) -> dict:
        out = {
            "circuit": self.circuit.name,
            "n_qubits": self.circuit.n_qubits,
            "n_gates": self.circuit.n_gates,
            "options": {
                "placement": self.options.placement,
                "routing": self.options.routing,
                "window_size": self.options.window_size,
                "aods": self.program.n_aods,
                "seed": self.options.seed,
            },
            "n_stages": self.schedule.n_stages,
            "routing": self.plan.stats(),
            "program_us": self.program.total_us,
            "violations": [str(v) for v in self.violations],
            "fidelity": None if self.report is None else self.report.to_dict(),
        }
        if include_timings:
            out["timings_s"] = dict(self.timings)
        return out


def _phase(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except CompileError:
        raise
    except Exception as exc:
        raise CompileError(name, exc) from exc


def compile_circuit(
    circuit: SlicedCircuit,
    arch: ArchConfig = ArchConfig(),
    options: CompileOptions = CompileOptions(),
) -> CompileResult:
    """Run every phase and verify the emitted program.

    The fidelity report is only computed when verification passes.
    """
    timings: Dict[str, float] = {}
    clock = time.perf_counter

    t0 = clock()
    schedule = _phase("scheduler", schedule_circuit, circuit)
    timings["scheduling"] = clock() - t0

    gate_cache: Dict[int, RoutingResult] = {}
    routing_in_placer = [0.0]

    def movers(stage, sites):
        t = clock()
        gates = [(g.q0, g.q1) for _, g in schedule.stage_gates(stage)]
        res = plan_stage_moves(gates, sites, options.routing, options.window_size)
        gate_cache[stage] = res
        routing_in_placer[0] += clock() - t
        return [m.qubit for m in res.chosen]

    n_aods = options.aods or arch.n_aods

    def legs_time(sets) -> float:
        # scored as if on one AOD so the plan does not depend on the AOD count
        return sum(sum(i.duration for i in lower_move_set(s, arch, options.charge_shifts)) for s in sets)

    def transition_cost(stage, cur, nxt):
        t = clock()
        total = legs_time(plan_moves_out(gate_cache[stage].chosen, nxt, options.routing, options.window_size).sets)
        for later in range(stage + 1, schedule.n_stages):
            gates = [(g.q0, g.q1) for _, g in schedule.stage_gates(later)]
            res = plan_stage_moves(gates, nxt, options.routing, options.window_size)
            back = plan_moves_out(res.chosen, nxt, options.routing, options.window_size)
            total += legs_time(res.sets) + legs_time(back.sets) + arch.t_rydberg_us
        routing_in_placer[0] += clock() - t
        return total

    t0 = clock()
    if options.placement == "trivial":
        placement = _phase("placer", place_trivial, circuit, schedule, arch)
    elif options.placement == "static":
        placement = _phase("placer", place_static, circuit, schedule, options.seed, arch, options.anneal)
    else:
        placement = _phase(
            "placer", place_dynamic, circuit, schedule, options.seed, arch, options.anneal,
            select_movers=movers, relocation_weight=options.relocation_weight,
            transition_cost=transition_cost,
        )
    timings["placement"] = clock() - t0 - routing_in_placer[0]

    t0 = clock()
    stage_sites = [placement.sites(t) for t in range(schedule.n_stages)]
    plan = _phase(
        "router", plan_routing, schedule, stage_sites, options.placement == "dynamic",
        options.routing, options.window_size, gate_cache,
    )
    timings["routing"] = clock() - t0 + routing_in_placer[0]

    t0 = clock()
    program = _phase(
        "codegen", lower_program, schedule, placement.initial, plan, arch, n_aods, options.charge_shifts,
    )
    timings["codegen"] = clock() - t0

    t0 = clock()
    program_dict = program.to_dict()
    violations = _phase("checker", verify, program_dict, circuit, arch)
    report = _phase("checker", fidelity, program_dict, arch) if not violations else None
    timings["verification"] = clock() - t0
    return CompileResult(circuit, arch, options, schedule, placement, plan, program, violations, report, timings)


def write_artifacts(result: CompileResult, out_dir: Union[str, Path], include_timings: bool = False) -> Dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "program": out / "program.json",
        "report": out / "report.json",
        "breakdown": out / "breakdown.csv",
    }
    paths["program"].write_text(result.program.to_json() + "\n", encoding="utf-8")
    paths["report"].write_text(
        json.dumps(result.report_dict(include_timings), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if result.report is not None:
        paths["breakdown"].write_text(breakdown_csv([result.report]), encoding="utf-8")
    else:
        del paths["breakdown"]
    return paths

