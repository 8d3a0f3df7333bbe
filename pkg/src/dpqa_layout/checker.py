"""Replay an emitted instruction program and score it.

The verifier reads the JSON form of a program only, so it shares nothing with
the router or code generator beyond core types. It tracks where every atom
is, which AOD row and column hold it, and where every active row and column
sits, and reports each hardware rule that the program breaks.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .core import ArchConfig, CommutationGroup, SlicedCircuit, movement_time

EPS = 1e-6

# Violation kinds
ORDER = "aod_order"  # rows/columns merge or cross during a move
UNSCHEDULED = "unscheduled_interaction"
NOT_COLOCATED = "gate_not_colocated"
CROWDED = "site_overcrowded"
MISALIGNED = "transfer_misaligned"
WRONG_STAGE = "stage_mismatch"
GHOST = "ghost_pickup"
TIMING = "timing"
STATE = "inconsistent_state"
SCHEDULE = "illegal_schedule"


class FidelityError(ValueError):
    pass


@dataclass(frozen=True)
class Violation:
    kind: str
    instruction: Optional[int]
    qubits: Tuple[int, ...]
    message: str

    def __str__(self) -> str:
        where = "program" if self.instruction is None else f"instruction {self.instruction}"
        return f"[{self.kind}] {where} qubits {list(self.qubits)}: {self.message}"


def _as_dict(program: Any) -> Mapping[str, Any]:
    if isinstance(program, Mapping):
        return program
    if hasattr(program, "to_dict"):
        return program.to_dict()
    raise TypeError(f"cannot read a program from {type(program).__name__}")


def _on_grid(v: float, pitch: float) -> bool:
    return abs(v / pitch - round(v / pitch)) * pitch < EPS


def _key(p: Tuple[float, float]) -> Tuple[int, int]:
    return (round(p[0] / EPS), round(p[1] / EPS))


class _Replay:
    def __init__(self, prog: Mapping[str, Any], circuit: Optional[SlicedCircuit], arch: ArchConfig):
        self.prog = prog
        self.circuit = circuit
        self.arch = arch
        self.pitch = float(prog.get("site_pitch_um", arch.site_pitch_um))
        self.n = int(prog["n_qubits"])
        self.out: List[Violation] = []
        self.pos: Dict[int, Tuple[float, float]] = {}
        self.slm: Dict[Tuple[int, int], set] = defaultdict(set)  # atoms resting in static traps
        self.holder: Dict[int, Tuple[int, int, int]] = {}  # qubit -> (aod, row, col)
        self.rows: Dict[int, Dict[int, float]] = defaultdict(dict)
        self.cols: Dict[int, Dict[int, float]] = defaultdict(dict)
        self.busy_until: Dict[int, float] = defaultdict(float)
        self.rydberg_windows: List[Tuple[float, float, int]] = []
        self.windows: List[Tuple[float, float, int]] = []
        self.schedule: Dict[Tuple[int, int], dict] = {}
        self.executed: Dict[Tuple[int, int], int] = {}
        self.stages_seen: List[int] = []

    def flag(self, kind, idx, qubits, msg):
        self.out.append(Violation(kind, idx, tuple(sorted(set(qubits))), msg))

    # ------------------------------------------------------------------ setup

    def load_header(self) -> None:
        sites = self.prog.get("initial_sites", [])
        if len(sites) != self.n:
            self.flag(STATE, None, [], f"{len(sites)} initial sites for {self.n} qubits")
        seen: Dict[Tuple[int, int], int] = {}
        for q, s in enumerate(sites):
            x, y = s
            if int(x) != x or int(y) != y or x < 0 or y < 0:
                self.flag(STATE, None, [q], f"initial site {s} is not a grid point")
            if self.arch.cols_max is not None and x >= self.arch.cols_max:
                self.flag(STATE, None, [q], f"initial column {x} outside cols_max={self.arch.cols_max}")
            if self.arch.rows_max is not None and y >= self.arch.rows_max:
                self.flag(STATE, None, [q], f"initial row {y} outside rows_max={self.arch.rows_max}")
            if (x, y) in seen:
                self.flag(STATE, None, [seen[(x, y)], q], f"qubits share initial site {(x, y)}")
            seen[(x, y)] = q
            self.pos[q] = (x * self.pitch, y * self.pitch)
            self.slm[_key(self.pos[q])].add(q)
        for rec in self.prog.get("schedule", []):
            k = (int(rec["slice"]), int(rec["index"]))
            if k in self.schedule:
                self.flag(SCHEDULE, None, rec["qubits"], f"gate {k} scheduled twice")
            self.schedule[k] = rec

    def check_schedule(self) -> None:
        n_stages = int(self.prog.get("n_stages", 0))
        by_stage: Dict[int, List[Tuple[int, int]]] = defaultdict(list)
        for k, rec in self.schedule.items():
            s = int(rec["stage"])
            if not 0 <= s < n_stages:
                self.flag(SCHEDULE, None, rec["qubits"], f"gate {k} at stage {s} outside 0..{n_stages - 1}")
            by_stage[s].append(k)
        for s, keys in by_stage.items():
            used: Dict[int, Tuple[int, int]] = {}
            for k in keys:
                for q in self.schedule[k]["qubits"]:
                    if q in used:
                        self.flag(SCHEDULE, None, [q], f"qubit in gates {used[q]} and {k} at stage {s}")
                    used[q] = k
        if self.circuit is None:
            return
        c = self.circuit
        if c.n_qubits != self.n:
            self.flag(SCHEDULE, None, [], f"program has {self.n} qubits, circuit {c.n_qubits}")
        expected = {(k, i): g for k, sl in enumerate(c.slices) for i, g in enumerate(sl.gates)}
        for key, g in expected.items():
            rec = self.schedule.get(key)
            if rec is None:
                self.flag(SCHEDULE, None, list(g), f"circuit gate {key} is not scheduled")
            elif sorted(rec["qubits"]) != sorted(g):
                self.flag(SCHEDULE, None, list(g), f"gate {key} scheduled on qubits {rec['qubits']}")
        for key in self.schedule:
            if key not in expected:
                self.flag(SCHEDULE, None, self.schedule[key]["qubits"], f"gate {key} is not in the circuit")
        last_end = -1
        for k, sl in enumerate(c.slices):
            stages = [int(self.schedule[(k, i)]["stage"]) for i in range(len(sl.gates)) if (k, i) in self.schedule]
            if not stages:
                continue
            if min(stages) <= last_end:
                self.flag(SCHEDULE, None, [], f"slice {k} starts at stage {min(stages)} before slice end {last_end}")
            last_end = max(last_end, max(stages))
            if isinstance(sl, CommutationGroup):
                continue
            ready: Dict[int, Tuple[int, int]] = {}
            for i, g in enumerate(sl.gates):
                if (k, i) not in self.schedule:
                    continue
                s = int(self.schedule[(k, i)]["stage"])
                for q in g:
                    if q in ready and ready[q][0] >= s:
                        self.flag(
                            SCHEDULE, None, [q],
                            f"slice {k}: gate {i} at stage {s} does not follow gate {ready[q][1]} at stage {ready[q][0]}",
                        )
                for q in g:
                    ready[q] = (s, i)

    # ------------------------------------------------------------ instructions

    def aod_pos(self, q: int) -> Tuple[float, float]:
        a, r, c = self.holder[q]
        return (self.cols[a][c], self.rows[a][r])

    def check_lines(self, idx: int, lines: Dict[int, float], what: str, holders: Iterable[int]) -> None:
        ordered = sorted(lines.items())
        for (i1, v1), (i2, v2) in zip(ordered, ordered[1:]):
            if not v1 < v2 - EPS:
                self.flag(ORDER, idx, holders, f"{what} {i1} at {v1} and {i2} at {v2} are merged or out of order")

    def timing(self, idx: int, inst: Mapping[str, Any]) -> Tuple[float, float]:
        start = float(inst.get("start_us", 0.0))
        dur = float(inst.get("duration_us", 0.0))
        if dur < 0:
            self.flag(TIMING, idx, [], "negative duration")
        end = start + dur
        if inst["type"] == "rydberg":
            self.rydberg_windows.append((start, end, idx))
        else:
            a = int(inst.get("aod", 0))
            if start < self.busy_until[a] - EPS:
                self.flag(TIMING, idx, [], f"AOD {a} starts at {start} before it is free at {self.busy_until[a]}")
            self.busy_until[a] = max(self.busy_until[a], end)
            self.windows.append((start, end, idx))
        return start, end

    def pickup(self, idx: int, inst: Mapping[str, Any]) -> None:
        a = int(inst.get("aod", 0))
        rows, cols = self.rows[a], self.cols[a]
        new_rows = {int(r["id"]): float(r["y_um"]) for r in inst.get("rows", [])}
        new_cols = {int(c["id"]): float(c["x_um"]) for c in inst.get("cols", [])}
        for rid, y in new_rows.items():
            if rid in rows and abs(rows[rid] - y) > EPS:
                self.flag(STATE, idx, [], f"row {rid} re-activated at {y} while at {rows[rid]}")
        for cid, x in new_cols.items():
            if cid in cols and abs(cols[cid] - x) > EPS:
                self.flag(STATE, idx, [], f"column {cid} re-activated at {x} while at {cols[cid]}")
        rows.update(new_rows)
        cols.update(new_cols)
        held_here = [q for q, h in self.holder.items() if h[0] == a]
        self.check_lines(idx, rows, "row", held_here)
        self.check_lines(idx, cols, "column", held_here)

        listed = []
        picked_sites = set()
        for t in inst.get("traps", []):
            q, r, c = int(t["q"]), int(t["row"]), int(t["col"])
            listed.append(q)
            if q in self.holder:
                self.flag(STATE, idx, [q], "qubit picked up while already in an AOD")
                continue
            if r not in rows or c not in cols:
                self.flag(MISALIGNED, idx, [q], f"trap row {r} / column {c} not active")
                continue
            trap = (cols[c], rows[r])
            p = self.pos[q]
            if math.dist(trap, p) > EPS or not (_on_grid(p[0], self.pitch) and _on_grid(p[1], self.pitch)):
                self.flag(MISALIGNED, idx, [q], f"qubit at {p} but trap at {trap}")
                continue
            self.holder[q] = (a, r, c)
            self.slm[_key(p)].discard(q)
            picked_sites.add(_key(p))
        if sorted(listed) != sorted(int(q) for q in inst.get("qubits", listed)):
            self.flag(STATE, idx, listed, "pickup qubit list does not match its trap list")

        # traps created now: new rows x all columns, all rows x new columns
        created = set()
        for rid in new_rows:
            created.update(_key((x, rows[rid])) for x in cols.values())
        for cid in new_cols:
            created.update(_key((cols[cid], y)) for y in rows.values())
        for site in sorted(created - picked_sites):
            for q in sorted(self.slm.get(site, ())):
                self.flag(GHOST, idx, [q], f"new AOD trap at {self.pos[q]} would capture an unlisted atom")

    def dropoff(self, idx: int, inst: Mapping[str, Any]) -> None:
        for q in map(int, inst.get("qubits", [])):
            if q not in self.holder:
                self.flag(STATE, idx, [q], "dropoff of a qubit not held by an AOD")
                continue
            a = self.holder[q][0]
            if a != int(inst.get("aod", 0)):
                self.flag(STATE, idx, [q], f"qubit is held by AOD {a}")
            p = self.aod_pos(q)
            if not (_on_grid(p[0], self.pitch) and _on_grid(p[1], self.pitch)):
                self.flag(MISALIGNED, idx, [q], f"dropoff at {p} is not an SLM site")
            self.pos[q] = p
            self.slm[_key(p)].add(q)
            del self.holder[q]
        a = int(inst.get("aod", 0))
        live_rows = {h[1] for h in self.holder.values() if h[0] == a}
        live_cols = {h[2] for h in self.holder.values() if h[0] == a}
        self.rows[a] = {r: y for r, y in self.rows[a].items() if r in live_rows}
        self.cols[a] = {c: x for c, x in self.cols[a].items() if c in live_cols}

    def aod_move(self, idx: int, inst: Mapping[str, Any]) -> None:
        a = int(inst.get("aod", 0))
        rows, cols = self.rows[a], self.cols[a]
        held = [q for q, h in self.holder.items() if h[0] == a]
        for lines, key, what in ((rows, "rows", "row"), (cols, "cols", "column")):
            begin = dict(lines)
            for rec in inst.get(key, []):
                i = int(rec["id"])
                b, e = float(rec["begin_um"]), float(rec["end_um"])
                if i not in lines:
                    self.flag(STATE, idx, [], f"{what} {i} moved while inactive")
                    continue
                if abs(lines[i] - b) > EPS:
                    self.flag(STATE, idx, [], f"{what} {i} starts at {b} but sits at {lines[i]}")
                lines[i] = e
            # relative order has to hold at both ends, which covers crossings in between
            self.check_lines(idx, lines, what, held)
            order_b = sorted(begin, key=begin.get)
            order_e = sorted(lines, key=lines.get)
            if order_b != order_e:
                self.flag(ORDER, idx, held, f"{what}s reorder from {order_b} to {order_e}")

        longest = 0.0
        for rec in inst.get("qubits", []):
            q = int(rec["q"])
            if q not in self.holder or self.holder[q][0] != a:
                self.flag(STATE, idx, [q], "moved qubit is not held by this AOD")
                continue
            if math.dist(rec["src_um"], self.pos[q]) > EPS or math.dist(rec["dst_um"], self.aod_pos(q)) > EPS:
                self.flag(STATE, idx, [q], "listed displacement disagrees with its row and column")
        for q in held:
            p = self.aod_pos(q)
            longest = max(longest, math.dist(self.pos[q], p))
            self.pos[q] = p

        need = movement_time(longest, self.arch.accel_m_per_s2)
        dur = float(inst.get("duration_us", 0.0))
        if inst.get("kind") == "shift" and dur < need - EPS and longest > 0.5 * self.pitch:
            self.flag(TIMING, idx, held, f"uncharged shift of {longest:.3f} um exceeds half a site")
        if inst.get("kind") != "shift" and dur < need - EPS:
            self.flag(TIMING, idx, held, f"move of {longest:.3f} um needs {need:.3f} us, got {dur}")

    def rydberg(self, idx: int, inst: Mapping[str, Any]) -> None:
        stage = int(inst["stage"])
        if stage in self.stages_seen:
            self.flag(WRONG_STAGE, idx, [], f"stage {stage} executed twice")
        elif self.stages_seen and stage < self.stages_seen[-1]:
            self.flag(WRONG_STAGE, idx, [], f"stage {stage} runs after stage {self.stages_seen[-1]}")
        self.stages_seen.append(stage)

        listed = set()
        for g in inst.get("gates", []):
            k = (int(g["slice"]), int(g["index"]))
            qs = [int(q) for q in g["qubits"]]
            listed.add(tuple(sorted(qs)))
            rec = self.schedule.get(k)
            if rec is None:
                self.flag(WRONG_STAGE, idx, qs, f"gate {k} is not in the schedule")
                continue
            if int(rec["stage"]) != stage:
                self.flag(WRONG_STAGE, idx, qs, f"gate {k} scheduled at stage {rec['stage']} ran at {stage}")
            if sorted(rec["qubits"]) != sorted(qs):
                self.flag(WRONG_STAGE, idx, qs, f"gate {k} acts on {sorted(rec['qubits'])}")
            if k in self.executed:
                self.flag(WRONG_STAGE, idx, qs, f"gate {k} already ran at instruction {self.executed[k]}")
            self.executed[k] = idx

        expected = {k: rec for k, rec in self.schedule.items() if int(rec["stage"]) == stage}
        for k, rec in expected.items():
            if tuple(sorted(rec["qubits"])) not in listed:
                self.flag(WRONG_STAGE, idx, rec["qubits"], f"scheduled gate {k} missing from stage {stage}")

        rb = self.arch.rydberg_range_um
        pos = {q: (self.aod_pos(q) if q in self.holder else self.pos[q]) for q in range(self.n)}
        cells: Dict[Tuple[int, int], List[int]] = defaultdict(list)
        for q, (x, y) in pos.items():
            cells[(math.floor(x / rb), math.floor(y / rb))].append(q)
        close = set()
        for (cx, cy), qs in cells.items():
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    for q2 in cells.get((cx + dx, cy + dy), ()):
                        for q1 in qs:
                            if q1 < q2 and math.dist(pos[q1], pos[q2]) < rb:
                                close.add((q1, q2))
        for pair in sorted(close - listed):
            self.flag(UNSCHEDULED, idx, pair, f"within {rb} um at stage {stage} without a gate")
        for k, rec in expected.items():
            a, b = rec["qubits"]
            if math.dist(pos[a], pos[b]) >= rb:
                self.flag(NOT_COLOCATED, idx, [a, b], f"gate {k} qubits are {math.dist(pos[a], pos[b]):.3f} um apart")
        sites: Dict[Tuple[int, int], List[int]] = defaultdict(list)
        for q, p in pos.items():
            sites[_key(p)].append(q)
        for qs in sites.values():
            if len(qs) > 2:
                self.flag(CROWDED, idx, qs, f"{len(qs)} qubits share one site")

    def run(self) -> List[Violation]:
        self.load_header()
        self.check_schedule()
        for idx, inst in enumerate(self.prog.get("instructions", [])):
            kind = inst.get("type")
            self.timing(idx, inst)
            if kind == "transfer":
                if inst.get("direction") == "pickup":
                    self.pickup(idx, inst)
                elif inst.get("direction") == "dropoff":
                    self.dropoff(idx, inst)
                else:
                    self.flag(STATE, idx, [], f"unknown transfer direction {inst.get('direction')!r}")
            elif kind == "aod_move":
                self.aod_move(idx, inst)
            elif kind == "rydberg":
                self.rydberg(idx, inst)
            else:
                self.flag(STATE, idx, [], f"unknown instruction type {kind!r}")

        n_stages = int(self.prog.get("n_stages", 0))
        missing = sorted(set(range(n_stages)) - set(self.stages_seen))
        if missing:
            self.flag(WRONG_STAGE, None, [], f"stages {missing} never executed")
        never = sorted(set(self.schedule) - set(self.executed))
        for k in never:
            self.flag(WRONG_STAGE, None, self.schedule[k]["qubits"], f"gate {k} never executed")
        for rs, re_, ri in self.rydberg_windows:
            for ws, we, wi in self.windows:
                if ws < re_ - EPS and rs < we - EPS and we - ws > EPS:
                    self.flag(TIMING, ri, [], f"Rydberg pulse overlaps instruction {wi}")
        return self.out


def verify(program: Any, circuit: Optional[SlicedCircuit] = None, arch: ArchConfig = ArchConfig()) -> List[Violation]:
    """All rule violations of ``program``; an empty list means it is valid.

    Passing ``circuit`` also checks that the embedded schedule covers exactly
    the circuit's gates and respects slice and dependency order.
    """
    return _Replay(_as_dict(program), circuit, arch).run()


@dataclass
class FidelityReport:
    two_qubit_term: float
    transfer_term: float
    decoherence_term: float
    total: float
    n_qubits: int
    g2: int
    n_stages: int
    n_transfers: int
    total_us: float
    idle_us: List[float] = field(default_factory=list)

    def log_terms(self) -> Dict[str, float]:
        return {
            "two_qubit": math.log(self.two_qubit_term),
            "transfer": math.log(self.transfer_term),
            "decoherence": math.log(self.decoherence_term),
            "total": math.log(self.total),
        }

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


BREAKDOWN_COLUMNS = ("n_qubits", "two_qubit", "transfer", "decoherence", "total")


def breakdown_csv(reports: Sequence[FidelityReport]) -> str:
    """Natural-log fidelity terms, one row per report."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BREAKDOWN_COLUMNS)
    for r in reports:
        logs = r.log_terms()
        w.writerow([r.n_qubits] + [repr(logs[c]) for c in BREAKDOWN_COLUMNS[1:]])
    return buf.getvalue()


def fidelity(program: Any, arch: ArchConfig = ArchConfig()) -> FidelityReport:
    """Score a program from its instruction records alone.

    Idle time of a qubit is the program length minus its own transfers and
    every Rydberg pulse.
    """
    prog = _as_dict(program)
    n = int(prog["n_qubits"])
    g2 = 0
    stages = 0
    n_trans = 0
    total = 0.0
    busy = [0.0] * n
    for inst in prog.get("instructions", []):
        dur = float(inst.get("duration_us", 0.0))
        total = max(total, float(inst.get("start_us", 0.0)) + dur)
        if inst["type"] == "rydberg":
            stages += 1
            g2 += len(inst.get("gates", []))
            for q in range(n):
                busy[q] += dur
        elif inst["type"] == "transfer":
            qs = inst.get("qubits", [])
            n_trans += len(qs)
            for q in qs:
                busy[q] += dur
    idle = [total - b for b in busy]
    decoherence = 1.0
    for q, t in enumerate(idle):
        if t >= arch.t2_coherence_us:
            raise FidelityError(f"qubit {q} idles {t} us, not below T2 = {arch.t2_coherence_us} us")
        decoherence *= 1.0 - t / arch.t2_coherence_us
    two = arch.f_two_qubit**g2 * arch.f_excitement ** (n * stages - 2 * g2)
    trans = arch.f_transfer**n_trans
    return FidelityReport(
        two_qubit_term=two,
        transfer_term=trans,
        decoherence_term=decoherence,
        total=two * trans * decoherence,
        n_qubits=n,
        g2=g2,
        n_stages=stages,
        n_transfers=n_trans,
        total_us=total,
        idle_us=idle,
    )
