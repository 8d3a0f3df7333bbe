"""Lower routed move sets into timed AOD / transfer / Rydberg instructions.

Each compatible move set is executed as: pick up one source row at a time
(ascending y), one transport motion of the whole AOD, then drop off one
destination row at a time. Between row pickups, loaded rows are parked a
fraction of a site below their row and idle columns are nudged sideways, so
the next row's ramp-up only aligns traps over the atoms it should take.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .core import ArchConfig, Site, movement_time
from .router import Move, RoutingPlan
from .scheduler import Schedule

PARK_FRACTION = 0.2
PROGRAM_FORMAT = "dpqa-program/1"


class CodegenError(RuntimeError):
    pass


@dataclass
class Transfer:
    direction: str  # "pickup" or "dropoff"
    qubits: List[int]
    duration: float
    rows: List[Tuple[int, float]] = field(default_factory=list)  # newly activated (id, y_um)
    cols: List[Tuple[int, float]] = field(default_factory=list)  # newly activated (id, x_um)
    traps: List[Tuple[int, int]] = field(default_factory=list)  # (row, col) per qubit, pickups only
    aod: int = 0
    start: float = 0.0
    tag: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "type": "transfer",
            "direction": self.direction,
            "aod": self.aod,
            "start_us": self.start,
            "duration_us": self.duration,
            "qubits": list(self.qubits),
        }
        if self.direction == "pickup":
            d["rows"] = [{"id": i, "y_um": y} for i, y in self.rows]
            d["cols"] = [{"id": i, "x_um": x} for i, x in self.cols]
            d["traps"] = [{"q": q, "row": r, "col": c} for q, (r, c) in zip(self.qubits, self.traps)]
        d.update(self.tag)
        return d


@dataclass
class AODMove:
    kind: str  # "shift" (alignment/parking) or "transport"
    rows: List[Tuple[int, float, float]]
    cols: List[Tuple[int, float, float]]
    qubits: List[Tuple[int, Tuple[float, float], Tuple[float, float]]]
    duration: float
    aod: int = 0
    start: float = 0.0
    tag: Dict[str, object] = field(default_factory=dict)

    @property
    def max_displacement(self) -> float:
        return max(
            (((b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2) ** 0.5 for _, a, b in self.qubits),
            default=0.0,
        )

    def to_dict(self) -> dict:
        d = {
            "type": "aod_move",
            "kind": self.kind,
            "aod": self.aod,
            "start_us": self.start,
            "duration_us": self.duration,
            "rows": [{"id": i, "begin_um": a, "end_um": b} for i, a, b in self.rows],
            "cols": [{"id": i, "begin_um": a, "end_um": b} for i, a, b in self.cols],
            "qubits": [{"q": q, "src_um": list(a), "dst_um": list(b)} for q, a, b in self.qubits],
        }
        d.update(self.tag)
        return d


@dataclass
class Rydberg:
    stage: int
    gates: List[Tuple[Tuple[int, int], Tuple[int, int]]]  # (gate key, qubits)
    duration: float
    start: float = 0.0

    def to_dict(self) -> dict:
        return {
            "type": "rydberg",
            "stage": self.stage,
            "start_us": self.start,
            "duration_us": self.duration,
            "gates": [{"slice": k[0], "index": k[1], "qubits": [a, b]} for k, (a, b) in self.gates],
        }


Instruction = Union[Transfer, AODMove, Rydberg]


def _duration(inst: Instruction) -> float:
    return inst.duration


def lower_move_set(
    moves: Sequence[Move],
    arch: ArchConfig = ArchConfig(),
    charge_shifts: bool = False,
) -> List[Instruction]:
    """Instructions for one compatible move set; start times are relative to the set."""
    if not moves:
        return []
    pitch = arch.site_pitch_um
    park = PARK_FRACTION * pitch
    t_trans = arch.t_transfer_us

    row_dst: Dict[int, int] = {}
    col_dst: Dict[int, int] = {}
    for m in moves:
        if row_dst.setdefault(m.src_y, m.dst_y) != m.dst_y or col_dst.setdefault(m.src_x, m.dst_x) != m.dst_x:
            raise CodegenError(f"move set is not compatible at qubit {m.qubit}")
    src_rows = sorted(row_dst)
    src_cols = sorted(col_dst)
    row_id = {y: i for i, y in enumerate(src_rows)}
    col_id = {x: i for i, x in enumerate(src_cols)}
    for ids, dst in ((row_id, row_dst), (col_id, col_dst)):
        ends = [dst[s] for s in sorted(ids)]
        if any(a >= b for a, b in zip(ends, ends[1:])):
            raise CodegenError("move set reorders AOD rows or columns")

    row_home = {row_id[y]: y * pitch for y in src_rows}
    col_home = {col_id[x]: x * pitch for x in src_cols}
    row_pos: Dict[int, float] = {}
    col_pos: Dict[int, float] = {}
    held: Dict[int, Tuple[int, int]] = {}
    out: List[Instruction] = []

    def shift(row_to: Mapping[int, float], col_to: Mapping[int, float], kind: str = "shift", duration=None):
        rows = [(r, row_pos[r], y) for r, y in sorted(row_to.items()) if y != row_pos[r]]
        cols = [(c, col_pos[c], x) for c, x in sorted(col_to.items()) if x != col_pos[c]]
        if not rows and not cols:
            return
        new_row = {r: y for r, _, y in rows}
        new_col = {c: x for c, _, x in cols}
        qs = []
        for q in sorted(held):
            r, c = held[q]
            a = (col_pos[c], row_pos[r])
            b = (new_col.get(c, a[0]), new_row.get(r, a[1]))
            qs.append((q, a, b))
        mv = AODMove(kind, rows, cols, qs, 0.0)
        if duration is not None:
            mv.duration = duration
        elif charge_shifts:
            mv.duration = movement_time(mv.max_displacement, arch.accel_m_per_s2)
        row_pos.update(new_row)
        col_pos.update(new_col)
        out.append(mv)

    by_src_row: Dict[int, List[Move]] = {}
    for m in moves:
        by_src_row.setdefault(m.src_y, []).append(m)

    for y in src_rows:
        batch = sorted(by_src_row[y], key=lambda m: m.src_x)
        need = {col_id[m.src_x] for m in batch}
        if held:
            shift(
                {r: row_home[r] - park for r in row_pos},
                {c: col_home[c] + (0.0 if c in need else park) for c in col_pos},
            )
        r = row_id[y]
        new_cols = sorted(c for c in need if c not in col_pos)
        row_pos[r] = row_home[r]
        for c in new_cols:
            col_pos[c] = col_home[c]
        traps = [(r, col_id[m.src_x]) for m in batch]
        for m, tr in zip(batch, traps):
            held[m.qubit] = tr
        out.append(
            Transfer(
                "pickup",
                [m.qubit for m in batch],
                t_trans,
                rows=[(r, row_home[r])],
                cols=[(c, col_home[c]) for c in new_cols],
                traps=traps,
            )
        )

    shift(dict(row_home), dict(col_home))
    longest = max(m.length for m in moves) * pitch
    shift(
        {row_id[y]: row_dst[y] * pitch for y in src_rows},
        {col_id[x]: col_dst[x] * pitch for x in src_cols},
        kind="transport",
        duration=movement_time(longest, arch.accel_m_per_s2),
    )

    by_dst_row: Dict[int, List[Move]] = {}
    for m in moves:
        by_dst_row.setdefault(m.dst_y, []).append(m)
    for y in sorted(by_dst_row):
        qs = [m.qubit for m in sorted(by_dst_row[y], key=lambda m: m.dst_x)]
        for q in qs:
            del held[q]
        out.append(Transfer("dropoff", qs, t_trans))

    t = 0.0
    for inst in out:
        inst.start = t
        t += inst.duration
    return out


def assign_round_robin(durations: Sequence[float], n_aods: int = 1) -> List[List[int]]:
    """Group set indices into trunks of ``n_aods`` sets that run side by side.

    With several AODs the sets are first ordered longest first, which makes
    the summed trunk duration non-increasing in ``n_aods``.
    """
    if n_aods < 1:
        raise ValueError("n_aods must be at least 1")
    order = list(range(len(durations)))
    if n_aods > 1:
        order.sort(key=lambda i: -durations[i])
    return [order[i : i + n_aods] for i in range(0, len(order), n_aods)]


def trunk_time(durations: Sequence[float], n_aods: int = 1) -> float:
    return sum(max(durations[i] for i in trunk) for trunk in assign_round_robin(durations, n_aods))


@dataclass
class InstructionProgram:
    n_qubits: int
    site_pitch_um: float
    initial_sites: Dict[int, Site]
    schedule: List[dict]
    n_stages: int
    instructions: List[Instruction]
    busy_us: List[float]
    idle_us: List[float]
    total_us: float
    n_transfers: int
    n_aods: int = 1

    def to_dict(self) -> dict:
        return {
            "format": PROGRAM_FORMAT,
            "n_qubits": self.n_qubits,
            "n_aods": self.n_aods,
            "site_pitch_um": self.site_pitch_um,
            "initial_sites": [list(self.initial_sites[q]) for q in range(self.n_qubits)],
            "schedule": self.schedule,
            "n_stages": self.n_stages,
            "n_transfers": self.n_transfers,
            "total_us": self.total_us,
            "ledger": {"busy_us": self.busy_us, "idle_us": self.idle_us},
            "instructions": [inst.to_dict() for inst in self.instructions],
        }

    def to_json(self, indent: Optional[int] = None) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def lower_program(
    schedule: Schedule,
    initial_sites: Mapping[int, Sequence[int]],
    plan: RoutingPlan,
    arch: ArchConfig = ArchConfig(),
    n_aods: Optional[int] = None,
    charge_shifts: bool = False,
) -> InstructionProgram:
    """Assemble the full timed program.

    A Rydberg instruction follows every ``gate`` transition. Every qubit is
    busy during its own transfers and during each Rydberg pulse and idle for
    the rest of the program.
    """
    n_aods = n_aods or arch.n_aods
    n = len(initial_sites)
    sites = {q: Site(*s) for q, s in initial_sites.items()}
    insts: List[Instruction] = []
    clock = 0.0
    busy = [0.0] * n
    n_trans = 0
    stage_seen = []

    for ti, tr in enumerate(plan.transitions):
        lowered = []
        for si, mset in enumerate(tr.sets):
            for m in mset:
                if sites.get(m.qubit) != (m.src_x, m.src_y):
                    raise CodegenError(
                        f"stage {tr.stage} {tr.kind} set {si}: qubit {m.qubit} expected at "
                        f"{(m.src_x, m.src_y)} but sits at {sites.get(m.qubit)}"
                    )
            seq = lower_move_set(mset, arch, charge_shifts)
            for inst in seq:
                inst.tag = {"stage": tr.stage, "leg": tr.kind, "set": si}
            lowered.append(seq)
        durations = [sum(map(_duration, seq)) for seq in lowered]
        for trunk in assign_round_robin(durations, n_aods):
            for lane, si in enumerate(trunk):
                for inst in lowered[si]:
                    inst.start += clock
                    inst.aod = lane
                    insts.append(inst)
                    if isinstance(inst, Transfer):
                        n_trans += len(inst.qubits)
                        for q in inst.qubits:
                            busy[q] += inst.duration
            clock += max(durations[si] for si in trunk)
        for m in tr.moves:
            sites[m.qubit] = m.dst

        if tr.kind == "gate":
            gates = schedule.stage_gates(tr.stage)
            for key, g in gates:
                if sites[g.q0] != sites[g.q1]:
                    raise CodegenError(f"stage {tr.stage}: gate {key} qubits are not co-sited after routing")
            insts.append(Rydberg(tr.stage, [(k, (g.q0, g.q1)) for k, g in gates], arch.t_rydberg_us, clock))
            clock += arch.t_rydberg_us
            for q in range(n):
                busy[q] += arch.t_rydberg_us
            stage_seen.append(tr.stage)

    if stage_seen != list(range(schedule.n_stages)):
        raise CodegenError(f"routing plan covers stages {stage_seen}, schedule has {schedule.n_stages}")
    idle = [clock - b for b in busy]
    return InstructionProgram(
        n_qubits=n,
        site_pitch_um=arch.site_pitch_um,
        initial_sites={q: Site(*s) for q, s in initial_sites.items()},
        schedule=schedule.to_records(),
        n_stages=schedule.n_stages,
        instructions=insts,
        busy_us=busy,
        idle_us=idle,
        total_us=clock,
        n_transfers=n_trans,
        n_aods=n_aods,
    )
