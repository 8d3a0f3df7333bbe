"""Assign two-qubit gates to Rydberg stages.

Commutation groups are edge-colored with the Misra-Gries algorithm, which
uses at most ``max_degree + 1`` colors; dependency subcircuits are levelized
as soon as possible. Slices are scheduled independently and concatenated.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .core import CommutationGroup, DependencySubcircuit, Gate, SlicedCircuit

Edge = Tuple[int, int]
GateKey = Tuple[int, int]  # (slice index, position in slice)


class SchedulingError(ValueError):
    pass


def _normalize_simple(edges: Iterable[Sequence[int]]) -> List[Edge]:
    out = []
    seen = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if u == v:
            raise SchedulingError(f"self-loop on vertex {u}")
        e = (u, v) if u < v else (v, u)
        if e in seen:
            raise SchedulingError(f"parallel edge {e}; graph must be simple")
        seen.add(e)
        out.append(e)
    return sorted(out)


def max_degree(edges: Iterable[Sequence[int]]) -> int:
    deg: Dict[int, int] = defaultdict(int)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    return max(deg.values(), default=0)


def color_edges_misra_gries(edges: Iterable[Sequence[int]]) -> Dict[Edge, int]:
    """Properly edge-color a simple graph with colors ``0..max_degree``.

    Edges are processed in lexicographic order of ``(min, max)`` endpoint and
    every choice inside fan construction and free-color lookup takes the
    lowest index, so the result is fully deterministic.

    Returns:
        Mapping from normalized edge ``(u, v)`` with ``u < v`` to its color.

    Raises:
        SchedulingError: if the graph has a self-loop or a parallel edge.
    """
    order = _normalize_simple(edges)
    if not order:
        return {}
    adj: Dict[int, List[int]] = defaultdict(list)
    for u, v in order:
        adj[u].append(v)
        adj[v].append(u)
    for nbrs in adj.values():
        nbrs.sort()
    n_colors = max(len(nbrs) for nbrs in adj.values()) + 1

    # at[v][c] = neighbour joined to v by the edge colored c
    at: Dict[int, Dict[int, int]] = defaultdict(dict)
    color: Dict[Edge, int] = {}

    def key(a: int, b: int) -> Edge:
        return (a, b) if a < b else (b, a)

    def paint(a: int, b: int, c: int) -> None:
        color[key(a, b)] = c
        at[a][c] = b
        at[b][c] = a

    def erase(a: int, b: int) -> int:
        c = color.pop(key(a, b))
        del at[a][c]
        del at[b][c]
        return c

    def lowest_free(v: int) -> int:
        used = at[v]
        for c in range(n_colors):
            if c not in used:
                return c
        raise AssertionError(f"no free color at vertex {v}")  # degree < n_colors

    for u, v in order:
        fan = [v]
        in_fan = {v}
        while True:
            last_used = at[fan[-1]]
            for w in adj[u]:
                if w in in_fan:
                    continue
                c = color.get(key(u, w))
                if c is not None and c not in last_used:
                    fan.append(w)
                    in_fan.add(w)
                    break
            else:
                break

        c = lowest_free(u)
        d = lowest_free(fan[-1])

        if d in at[u]:
            # invert the maximal path from u alternating colors d and c
            path = []
            cur, want = u, d
            while want in at[cur]:
                nxt = at[cur][want]
                path.append((cur, nxt, want))
                cur, want = nxt, (c if want == d else d)
            for a, b, _ in path:
                erase(a, b)
            for a, b, old in path:
                paint(a, b, c if old == d else d)

        pivot = None
        for k, w in enumerate(fan):
            if k > 0:
                ck = color.get(key(u, w))
                if ck is None or ck in at[fan[k - 1]]:
                    break
            if d not in at[w]:
                pivot = k
                break
        if pivot is None:
            raise AssertionError(f"Misra-Gries found no rotation pivot for edge {(u, v)}")

        for i in range(pivot):
            shifted = erase(u, fan[i + 1])
            paint(u, fan[i], shifted)
        paint(u, fan[pivot], d)

    return color


@dataclass(frozen=True)
class Schedule:
    """Stage assignment for every gate occurrence of a circuit.

    ``stage_of`` is keyed by ``(slice index, position in slice)`` so repeated
    qubit pairs in different slices stay distinct.
    """

    stage_of: Dict[GateKey, int]
    gates: Dict[GateKey, Gate]
    n_stages: int
    slice_boundaries: Tuple[Tuple[int, int, int], ...] = ()

    def stage_gates(self, stage: int) -> List[Tuple[GateKey, Gate]]:
        return [(k, self.gates[k]) for k in sorted(self.stage_of) if self.stage_of[k] == stage]

    def stages(self) -> List[List[Tuple[GateKey, Gate]]]:
        out: List[List[Tuple[GateKey, Gate]]] = [[] for _ in range(self.n_stages)]
        for k in sorted(self.stage_of):
            out[self.stage_of[k]].append((k, self.gates[k]))
        return out

    def to_records(self) -> List[dict]:
        return [
            {"slice": k[0], "index": k[1], "qubits": list(self.gates[k]), "stage": s}
            for k, s in sorted(self.stage_of.items())
        ]


def schedule_commutation_group(
    gates: Sequence[Sequence[int]], order: Optional[Sequence[int]] = None
) -> List[int]:
    """Stage index (local to the group) for each gate, in input order.

    Colors are compacted to ``0..k-1`` in ascending color order. ``order`` is an
    optional permutation of those ``k`` stages: local stage ``i`` is executed at
    position ``order[i]``.
    """
    if not gates:
        raise SchedulingError("commutation group is empty")
    coloring = color_edges_misra_gries(gates)
    used = sorted(set(coloring.values()))
    rank = {c: i for i, c in enumerate(used)}
    if order is not None:
        if sorted(order) != list(range(len(used))):
            raise SchedulingError(f"stage order must be a permutation of range({len(used)})")
        rank = {c: order[i] for c, i in rank.items()}
    return [rank[coloring[(min(a, b), max(a, b))]] for a, b in gates]


def schedule_dependency(gates: Sequence[Sequence[int]]) -> List[int]:
    """ASAP levels: each gate goes one stage after the latest earlier gate on either qubit."""
    ready: Dict[int, int] = {}
    stages = []
    for a, b in gates:
        s = max(ready.get(a, 0), ready.get(b, 0))
        stages.append(s)
        ready[a] = ready[b] = s + 1
    return stages


def schedule_circuit(
    circuit: SlicedCircuit, stage_orders: Optional[Dict[int, Sequence[int]]] = None
) -> Schedule:
    stage_of: Dict[GateKey, int] = {}
    gates: Dict[GateKey, Gate] = {}
    bounds = []
    offset = 0
    for k, sl in enumerate(circuit.slices):
        if not sl.gates:
            continue
        if isinstance(sl, CommutationGroup):
            local = schedule_commutation_group(sl.gates, (stage_orders or {}).get(k))
        elif isinstance(sl, DependencySubcircuit):
            local = schedule_dependency(sl.gates)
        else:
            raise SchedulingError(f"slice {k}: unsupported slice type {type(sl).__name__}")
        for i, (g, s) in enumerate(zip(sl.gates, local)):
            stage_of[(k, i)] = offset + s
            gates[(k, i)] = g
        n_local = max(local) + 1
        bounds.append((k, offset, offset + n_local - 1))
        offset += n_local
    return Schedule(stage_of, gates, offset, tuple(bounds))


def chromatic_index_exact(edges: Iterable[Sequence[int]], max_edges: Optional[int] = None) -> int:
    """Minimum number of colors in a proper edge coloring, by backtracking.

    By Vizing's theorem the answer is ``max_degree`` or ``max_degree + 1``, so
    only ``max_degree``-colorability is searched.
    """
    es = _normalize_simple(edges)
    if not es:
        return 0
    if max_edges is not None and len(es) > max_edges:
        raise SchedulingError(f"exact chromatic index limited to {max_edges} edges, got {len(es)}")
    delta = max_degree(es)
    return delta if _edge_colorable(es, delta) else delta + 1


def _edge_colorable(edges: List[Edge], k: int) -> bool:
    incident: Dict[int, List[int]] = defaultdict(list)
    for i, (u, v) in enumerate(edges):
        incident[u].append(i)
        incident[v].append(i)
    colors = [-1] * len(edges)
    used = defaultdict(set)  # vertex -> colors on incident edges

    def pick() -> int:
        best, best_avail = -1, k + 1
        for i, (u, v) in enumerate(edges):
            if colors[i] >= 0:
                continue
            avail = k - len(used[u] | used[v])
            if avail < best_avail:
                best, best_avail = i, avail
                if avail <= 1:
                    break
        return best

    def solve(n_used: int) -> bool:
        i = pick()
        if i < 0:
            return True
        u, v = edges[i]
        blocked = used[u] | used[v]
        # colors are interchangeable: trying one fresh color is enough
        for c in range(min(k, n_used + 1)):
            if c in blocked:
                continue
            colors[i] = c
            used[u].add(c)
            used[v].add(c)
            if solve(max(n_used, c + 1)):
                return True
            used[u].discard(c)
            used[v].discard(c)
            colors[i] = -1
        return False

    return solve(0)


def diagnostics(circuit: SlicedCircuit, schedule: Schedule, exact: bool = False) -> List[dict]:
    """Per-slice bound audit: max degree, stages used and optionally the exact chromatic index."""
    out = []
    for k, first, last in schedule.slice_boundaries:
        sl = circuit.slices[k]
        rec = {
            "slice": k,
            "type": sl.kind,
            "n_gates": len(sl.gates),
            "stages_used": last - first + 1,
        }
        if isinstance(sl, CommutationGroup):
            rec["max_degree"] = max_degree(sl.gates)
            if exact and len(sl.gates) <= 12:
                rec["chromatic_index"] = chromatic_index_exact(sl.gates)
        out.append(rec)
    return out
