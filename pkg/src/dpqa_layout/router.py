"""Split qubit relocations into AOD-compatible move sets.

Two moves conflict when executing them in one AOD motion would merge, split
or reorder AOD rows or columns. Compatible sets are independent sets of the
pairwise conflict graph; the router peels them off one at a time, longest
moves first.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .core import Site

ROUTING_METHODS = ("sortis", "windowis", "mis")
DEFAULT_WINDOW = 1000
MIS_VERTEX_LIMIT = 64


class RoutingError(ValueError):
    pass


class Move(NamedTuple):
    qubit: int
    src_x: int
    src_y: int
    dst_x: int
    dst_y: int

    @property
    def src(self) -> Site:
        return Site(self.src_x, self.src_y)

    @property
    def dst(self) -> Site:
        return Site(self.dst_x, self.dst_y)

    @property
    def length(self) -> float:
        return math.hypot(self.dst_x - self.src_x, self.dst_y - self.src_y)

    def reversed(self) -> "Move":
        return Move(self.qubit, self.dst_x, self.dst_y, self.src_x, self.src_y)


@dataclass(frozen=True)
class MovePair:
    """Alternative moves of one gate; ``dual`` is ``None`` when the mover is fixed."""

    primary: Move
    dual: Optional[Move] = None

    @classmethod
    def for_gate(cls, q0: int, s0: Sequence[int], q1: int, s1: Sequence[int]) -> "MovePair":
        return cls(Move(q0, s0[0], s0[1], s1[0], s1[1]), Move(q1, s1[0], s1[1], s0[0], s0[1]))

    def options(self) -> Tuple[Move, ...]:
        return (self.primary,) if self.dual is None else (self.primary, self.dual)


def _axis_conflict(s1: int, d1: int, s2: int, d2: int) -> bool:
    if (s1 == s2) != (d1 == d2):
        return True
    return s1 != s2 and (s1 < s2) != (d1 < d2)


def conflicts(m: Move, other: Move) -> bool:
    """True if ``m`` and ``other`` cannot share one AOD motion."""
    return _axis_conflict(m.src_y, m.dst_y, other.src_y, other.dst_y) or _axis_conflict(
        m.src_x, m.dst_x, other.src_x, other.dst_x
    )


def build_conflict_graph(moves: Sequence[Move], groups: Optional[Sequence[int]] = None) -> List[set]:
    """Adjacency sets over ``moves``; moves sharing a ``groups`` label (duals of a gate) always conflict."""
    n = len(moves)
    if n == 0:
        return []
    arr = np.asarray(moves, dtype=np.int64).reshape(n, 5)

    def axis(src, dst):
        ss = src[:, None] == src[None, :]
        dd = dst[:, None] == dst[None, :]
        order = np.sign(src[:, None] - src[None, :]) != np.sign(dst[:, None] - dst[None, :])
        return (ss != dd) | (~ss & order)

    bad = axis(arr[:, 2], arr[:, 4]) | axis(arr[:, 1], arr[:, 3])
    if groups is not None:
        g = np.asarray(groups)
        bad |= g[:, None] == g[None, :]
    np.fill_diagonal(bad, False)
    return [set(np.flatnonzero(row).tolist()) for row in bad]


class _MonotoneAxis:
    """Source->destination coordinate map of a compatible set along one axis.

    A set is compatible on an axis exactly when this map is a strictly
    increasing function, so a candidate only has to be checked against its
    neighbouring keys.
    """

    __slots__ = ("keys", "vals", "inv")

    def __init__(self):
        self.keys: List[int] = []
        self.vals: List[int] = []
        self.inv: Dict[int, int] = {}

    def admits(self, s: int, d: int) -> bool:
        i = bisect_left(self.keys, s)
        if i < len(self.keys) and self.keys[i] == s:
            return self.vals[i] == d
        if d in self.inv:
            return False
        if i > 0 and self.vals[i - 1] >= d:
            return False
        return not (i < len(self.keys) and self.vals[i] <= d)

    def add(self, s: int, d: int) -> None:
        i = bisect_left(self.keys, s)
        if i < len(self.keys) and self.keys[i] == s:
            return
        self.keys.insert(i, s)
        self.vals.insert(i, d)
        self.inv[d] = s


def _sort_key(m: Move):
    return (-m.length, m.qubit, m.src_x, m.src_y)


def _candidates(pairs: Sequence[MovePair], alive: Iterable[int]) -> List[Tuple[Move, int]]:
    cands = [(m, i) for i in alive for m in pairs[i].options()]
    cands.sort(key=lambda c: _sort_key(c[0]))
    return cands


def _validate(pairs: Sequence[MovePair]) -> None:
    for i, p in enumerate(pairs):
        for m in p.options():
            if m.src == m.dst:
                raise RoutingError(f"pair {i}: move of qubit {m.qubit} does not go anywhere")


@dataclass(frozen=True)
class RoutingResult:
    """Ordered compatible sets plus the move executed for each input pair."""

    sets: Tuple[Tuple[Move, ...], ...]
    chosen: Tuple[Move, ...]


def _peel(pairs: Sequence[MovePair], pick) -> RoutingResult:
    _validate(pairs)
    alive = list(range(len(pairs)))
    chosen: List[Optional[Move]] = [None] * len(pairs)
    sets = []
    while alive:
        taken = pick(_candidates(pairs, alive))
        if not taken:
            raise AssertionError("routing round selected no move")
        done = set()
        for m, i in taken:
            chosen[i] = m
            done.add(i)
        sets.append(tuple(m for m, _ in taken))
        alive = [i for i in alive if i not in done]
    return RoutingResult(tuple(sets), tuple(chosen))


def _greedy_scan(cands: Sequence[Tuple[Move, int]]) -> List[Tuple[Move, int]]:
    xs, ys = _MonotoneAxis(), _MonotoneAxis()
    used = set()
    taken = []
    for m, i in cands:
        if i in used:
            continue
        if ys.admits(m.src_y, m.dst_y) and xs.admits(m.src_x, m.dst_x):
            ys.add(m.src_y, m.dst_y)
            xs.add(m.src_x, m.dst_x)
            used.add(i)
            taken.append((m, i))
    return taken


def route_sort_is(pairs: Sequence[MovePair]) -> RoutingResult:
    """Repeatedly take a maximal independent set, scanning moves longest first."""
    return _peel(pairs, _greedy_scan)


def route_window_is(pairs: Sequence[MovePair], window: int = DEFAULT_WINDOW) -> RoutingResult:
    """Like :func:`route_sort_is` but each round only sees the ``window`` longest remaining moves."""
    if window < 1:
        raise RoutingError("window size must be at least 1")
    return _peel(pairs, lambda cands: _greedy_scan(cands[:window]))


def maximum_independent_set(adj: Sequence[set], limit: int = MIS_VERTEX_LIMIT) -> List[int]:
    """Exact maximum independent set by branch and bound over bitmasks.

    Ties go to the set found first when branching on vertices in index order
    with inclusion tried before exclusion.
    """
    n = len(adj)
    if n > limit:
        raise RoutingError(
            f"exact MIS is limited to {limit} vertices per round, got {n}; use sortis or windowis"
        )
    nbr = [sum(1 << j for j in adj[i]) for i in range(n)]
    best = [0, 0]  # size, mask

    def popcount(x: int) -> int:
        return bin(x).count("1")

    def color_bound(cand: int) -> int:
        # greedy clique cover of the candidates bounds the independent set size
        bound = 0
        rest = cand
        while rest:
            low = rest & -rest
            v = low.bit_length() - 1
            clique = low
            pool = rest & nbr[v]
            while pool:
                lw = pool & -pool
                w = lw.bit_length() - 1
                clique |= lw
                pool &= nbr[w]
            rest &= ~clique
            bound += 1
        return bound

    def search(cand: int, size: int, mask: int) -> None:
        if not cand:
            if size > best[0]:
                best[0], best[1] = size, mask
            return
        if size + color_bound(cand) <= best[0]:
            return
        low = cand & -cand
        v = low.bit_length() - 1
        search(cand & ~nbr[v] & ~low, size + 1, mask | low)
        search(cand & ~low, size, mask)

    search((1 << n) - 1, 0, 0)
    return [i for i in range(n) if best[1] >> i & 1]


def route_exact_mis(pairs: Sequence[MovePair], limit: int = MIS_VERTEX_LIMIT) -> RoutingResult:
    """Each round takes a maximum independent set of the remaining conflict graph."""

    def pick(cands):
        adj = build_conflict_graph([m for m, _ in cands], [i for _, i in cands])
        return [cands[j] for j in maximum_independent_set(adj, limit)]

    return _peel(pairs, pick)


def route(pairs: Sequence[MovePair], method: str = "windowis", window: int = DEFAULT_WINDOW) -> RoutingResult:
    if method == "sortis":
        return route_sort_is(pairs)
    if method == "windowis":
        return route_window_is(pairs, window)
    if method == "mis":
        return route_exact_mis(pairs)
    raise RoutingError(f"unknown routing method {method!r}; expected one of {ROUTING_METHODS}")


@dataclass(frozen=True)
class Transition:
    """Compatible move sets executed back to back before or after a Rydberg stage.

    ``kind`` is ``gate`` (bring partners together for ``stage``), ``return``
    (send movers home after ``stage``) or ``relocate`` (send movers to the
    next stage's placement).
    """

    stage: int
    kind: str
    sets: Tuple[Tuple[Move, ...], ...]

    @property
    def moves(self) -> List[Move]:
        return [m for s in self.sets for m in s]


@dataclass(frozen=True)
class RoutingPlan:
    transitions: Tuple[Transition, ...]

    def stats(self) -> dict:
        sets = [s for t in self.transitions for s in t.sets]
        moves = [m for s in sets for m in s]
        return {
            "n_transitions": len(self.transitions),
            "n_sets": len(sets),
            "n_moves": len(moves),
            "mean_move_length": (sum(m.length for m in moves) / len(moves)) if moves else 0.0,
        }


def gate_pairs(gates: Sequence[Tuple[int, int]], sites: Mapping[int, Sequence[int]]) -> List[MovePair]:
    return [MovePair.for_gate(a, sites[a], b, sites[b]) for a, b in gates]


def plan_stage_moves(
    gates: Sequence[Tuple[int, int]],
    sites: Mapping[int, Sequence[int]],
    method: str = "windowis",
    window: int = DEFAULT_WINDOW,
) -> RoutingResult:
    """Bring each gate's qubits together: one endpoint travels to the other's site."""
    return route(gate_pairs(gates, sites), method, window)


def plan_moves_out(
    chosen: Sequence[Move],
    targets: Mapping[int, Sequence[int]],
    method: str = "windowis",
    window: int = DEFAULT_WINDOW,
) -> RoutingResult:
    """Move each executed mover from its partner's site to ``targets[qubit]``."""
    pairs = [MovePair(Move(m.qubit, m.dst_x, m.dst_y, *targets[m.qubit])) for m in chosen]
    return route(pairs, method, window)


def plan_routing(
    schedule,
    stage_sites: Sequence[Mapping[int, Sequence[int]]],
    dynamic: bool = False,
    method: str = "windowis",
    window: int = DEFAULT_WINDOW,
    gate_results: Optional[Mapping[int, RoutingResult]] = None,
) -> RoutingPlan:
    """Gate leg for every stage, each followed by a leg that clears the movers.

    Without ``dynamic`` movers go back to their home site after each stage.
    With it they travel to their site in the next stage's placement, and go
    home after the last stage. ``gate_results`` supplies precomputed gate legs
    (the dynamic placer routes each stage before annealing the next).
    """
    transitions = []
    n = schedule.n_stages
    for t in range(n):
        sites = stage_sites[t]
        if gate_results is not None and t in gate_results:
            res = gate_results[t]
        else:
            gates = [(g.q0, g.q1) for _, g in schedule.stage_gates(t)]
            res = plan_stage_moves(gates, sites, method, window)
        transitions.append(Transition(t, "gate", res.sets))
        if dynamic and t + 1 < n:
            out = plan_moves_out(res.chosen, stage_sites[t + 1], method, window)
            transitions.append(Transition(t, "relocate", out.sets))
        else:
            back = route([MovePair(m.reversed()) for m in res.chosen], method, window)
            transitions.append(Transition(t, "return", back.sets))
    return RoutingPlan(tuple(transitions))
