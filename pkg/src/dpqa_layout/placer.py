"""Qubit placement on the interaction-site grid.

The cost of a placement is the weighted Euclidean length of its gates; it is
minimized with a three-stage (Fast-SA style) annealing schedule.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .core import ArchConfig, Site, SlicedCircuit
from .scheduler import Schedule

WeightedGate = Tuple[int, int, float]
Region = Tuple[int, int]  # inclusive upper bounds (x_bound, y_bound)

PLACEMENT_MODES = ("trivial", "static", "dynamic")


class PlacementError(ValueError):
    pass


@dataclass(frozen=True)
class AnnealParams:
    """Fast-SA knobs. The defaults are tuning choices, not measured optima.

    Stage 1 is the single step at ``T1``, chosen so an average uphill move is
    accepted with probability ``initial_accept``. Steps ``2..greedy_steps`` run
    the pseudo-greedy stage at ``T1 * r / (k * greedy_factor)``; later steps
    run the hill-climbing stage at ``T1 * r / k``, where ``r`` is the recent
    average uphill delta relative to the initial one.
    """

    max_iterations: int = 50_000
    initial_accept: float = 0.85
    greedy_steps: int = 7
    greedy_factor: float = 100.0
    stop_ratio: float = 1e-4
    moves_per_temp: Optional[int] = None
    relocate_prob: float = 0.5
    n_probe: int = 256

    def __post_init__(self) -> None:
        if not 0.0 < self.initial_accept < 1.0:
            raise PlacementError("initial_accept must lie in (0, 1)")
        if not 0.0 <= self.relocate_prob <= 1.0:
            raise PlacementError("relocate_prob must lie in [0, 1]")
        if self.max_iterations < 0:
            raise PlacementError("max_iterations must be non-negative")


def exploration_region(n_qubits: int, arch: Optional[ArchConfig] = None) -> Region:
    base = math.isqrt(n_qubits) + 4
    x_max = (arch.cols_max - 1) if arch and arch.cols_max else 0
    y_max = (arch.rows_max - 1) if arch and arch.rows_max else 0
    return max(base, x_max), max(base, y_max)


def gate_weight(stages_before: int) -> float:
    """Dynamic-mode weight of a gate preceded by ``stages_before`` stages."""
    return max(0.1, (10 - stages_before) / 10)


def placement_cost(sites: Mapping[int, Sequence[int]], gates: Iterable[Sequence], pitch: float = 1.0) -> float:
    """Sum of ``w * dist`` over gates ``(q, q2)`` or ``(q, q2, w)``; missing weights count as 1."""
    total = 0.0
    for g in gates:
        q, q2 = g[0], g[1]
        w = g[2] if len(g) > 2 else 1.0
        try:
            a, b = sites[q], sites[q2]
        except KeyError as exc:
            raise PlacementError(f"qubit {exc.args[0]} has no site") from None
        total += w * math.hypot(a[0] - b[0], a[1] - b[1])
    return pitch * total


def trivial_placement(n_qubits: int, region: Region) -> Dict[int, Site]:
    """Row-major fill: left to right along row 0, then row 1, and so on."""
    width, height = region[0] + 1, region[1] + 1
    if n_qubits > width * height:
        raise PlacementError(f"{n_qubits} qubits do not fit in a {width}x{height} region")
    return {q: Site(q % width, q // width) for q in range(n_qubits)}


def _check_region(sites: Mapping[int, Sequence[int]], region: Region) -> None:
    seen = set()
    for q, (x, y) in sites.items():
        if not (0 <= x <= region[0] and 0 <= y <= region[1]):
            raise PlacementError(f"qubit {q} at {(x, y)} lies outside region {region}")
        if (x, y) in seen:
            raise PlacementError(f"site {(x, y)} assigned twice")
        seen.add((x, y))


def anneal_placement(
    initial: Mapping[int, Sequence[int]],
    movable: Iterable[int],
    gates: Sequence[WeightedGate],
    region: Region,
    params: AnnealParams = AnnealParams(),
    rng_seed: int = 0,
    anchors: Optional[Mapping[int, Tuple[Sequence[int], float]]] = None,
) -> Dict[int, Site]:
    """Anneal the sites of ``movable`` qubits; all other qubits keep their site.

    Transitions move a qubit to a vacant in-region site or swap two movable
    qubits. ``anchors`` adds ``w * dist(site(q), anchor)`` terms to the cost.
    The lowest-cost state visited is returned, so the result never costs more
    than ``initial``.
    """
    _check_region(initial, region)
    result = {q: Site(*s) for q, s in initial.items()}
    mov = sorted(set(movable))
    for q in mov:
        if q not in result:
            raise PlacementError(f"movable qubit {q} has no initial site")
    width = region[0] + 1
    n_sites = width * (region[1] + 1)
    occupied = {s.y * width + s.x for s in result.values()}
    vacant = [i for i in range(n_sites) if i not in occupied]
    if not mov or (not vacant and len(mov) < 2):
        return result

    mov_set = set(mov)
    nbr_acc: Dict[int, Dict[int, float]] = {q: {} for q in mov}
    for a, b, w in gates:
        if a == b or w == 0:
            continue
        if a in mov_set:
            nbr_acc[a][b] = nbr_acc[a].get(b, 0.0) + w
        if b in mov_set:
            nbr_acc[b][a] = nbr_acc[b].get(a, 0.0) + w
    nbrs = {q: list(d.items()) for q, d in nbr_acc.items()}
    anchor_of = {}
    for q, (s, w) in (anchors or {}).items():
        if q in mov_set and w:
            anchor_of[q] = (s[0], s[1], w)

    px: Dict[int, int] = {q: s.x for q, s in result.items()}
    py: Dict[int, int] = {q: s.y for q, s in result.items()}
    hypot = math.hypot

    def local(q: int, x: int, y: int, skip: int = -1) -> float:
        c = 0.0
        for o, w in nbrs[q]:
            if o != skip:
                c += w * hypot(x - px[o], y - py[o])
        an = anchor_of.get(q)
        if an is not None:
            c += an[2] * hypot(x - an[0], y - an[1])
        return c

    def delta_relocate(q: int, site: int) -> float:
        x, y = site % width, site // width
        return local(q, x, y) - local(q, px[q], py[q])

    def delta_swap(a: int, b: int) -> float:
        ax, ay, bx, by = px[a], py[a], px[b], py[b]
        return (local(a, bx, by, b) - local(a, ax, ay, b)) + (local(b, ax, ay, a) - local(b, bx, by, a))

    rng = random.Random(rng_seed)
    can_swap = len(mov) >= 2
    relocate_prob = params.relocate_prob if can_swap else 1.0
    if not vacant:
        relocate_prob = 0.0

    def propose():
        if rng.random() < relocate_prob:
            q = mov[rng.randrange(len(mov))]
            vi = rng.randrange(len(vacant))
            return 0, q, vi, delta_relocate(q, vacant[vi])
        a = mov[rng.randrange(len(mov))]
        b = mov[rng.randrange(len(mov) - 1)]
        if b == a:
            b = mov[-1]
        return 1, a, b, delta_swap(a, b)

    def apply(kind: int, a: int, b: int) -> None:
        if kind == 0:
            site = vacant[b]
            vacant[b] = py[a] * width + px[a]
            px[a], py[a] = site % width, site // width
        else:
            px[a], px[b] = px[b], px[a]
            py[a], py[b] = py[b], py[a]

    probes = [propose()[3] for _ in range(params.n_probe)]
    uphill = [d for d in probes if d > 1e-12] or [abs(d) for d in probes if abs(d) > 1e-12]
    if not uphill:
        return result
    base_uphill = sum(uphill) / len(uphill)
    t1 = -base_uphill / math.log(params.initial_accept)
    per_temp = params.moves_per_temp or max(32, 2 * len(mov))

    cost = 0.0  # relative to the initial state
    best = 0.0
    best_x = {q: px[q] for q in mov}
    best_y = {q: py[q] for q in mov}
    temp = t1
    recent = base_uphill
    it = 0
    k = 1
    while it < params.max_iterations:
        up_sum, up_n = 0.0, 0
        for _ in range(min(per_temp, params.max_iterations - it)):
            it += 1
            kind, a, b, d = propose()
            if d > 0:
                up_sum += d
                up_n += 1
                if rng.random() >= math.exp(-d / temp):
                    continue
            apply(kind, a, b)
            cost += d
            if cost < best - 1e-12:
                best = cost
                for q in mov:
                    best_x[q] = px[q]
                    best_y[q] = py[q]
        if up_n:
            recent = up_sum / up_n
        k += 1
        scale = recent / base_uphill
        if k <= params.greedy_steps:
            temp = t1 * scale / (k * params.greedy_factor)
        else:
            temp = t1 * scale / k
        if temp < params.stop_ratio * t1:
            break

    for q in mov:
        result[q] = Site(best_x[q], best_y[q])
    return result


@dataclass(frozen=True)
class Placement:
    """Site map per Rydberg stage.

    ``movers[s]`` holds the qubits that the dynamic placer treated as
    relocatable when deriving ``stages[s + 1]``.
    """

    stages: Tuple[Dict[int, Site], ...]
    mode: str
    region: Region
    movers: Tuple[FrozenSet[int], ...] = ()
    diagnostics: Dict[str, object] = field(default_factory=dict)

    @property
    def initial(self) -> Dict[int, Site]:
        return self.stages[0]

    def sites(self, stage: int) -> Dict[int, Site]:
        return self.stages[stage] if stage < len(self.stages) else self.stages[-1]


def _weighted_gates(schedule: Schedule, first_stage: int = 0, dynamic: bool = False) -> List[WeightedGate]:
    out = []
    for key in sorted(schedule.stage_of):
        s = schedule.stage_of[key]
        if s < first_stage:
            continue
        g = schedule.gates[key]
        out.append((g.q0, g.q1, gate_weight(s - first_stage) if dynamic else 1.0))
    return out


def _random_initial(n: int, region: Region, rng: random.Random) -> Dict[int, Site]:
    width = region[0] + 1
    picks = rng.sample(range(width * (region[1] + 1)), n)
    return {q: Site(i % width, i // width) for q, i in enumerate(picks)}


def place_trivial(circuit: SlicedCircuit, schedule: Schedule, arch: Optional[ArchConfig] = None) -> Placement:
    region = exploration_region(circuit.n_qubits, arch)
    sites = trivial_placement(circuit.n_qubits, region)
    return Placement((sites,) * max(1, schedule.n_stages), "trivial", region)


def _global_anneal(circuit, schedule, seed, arch, params, dynamic):
    region = exploration_region(circuit.n_qubits, arch)
    rng = random.Random(seed)
    init = _random_initial(circuit.n_qubits, region, rng)
    gates = _weighted_gates(schedule, dynamic=dynamic)
    sites = anneal_placement(init, range(circuit.n_qubits), gates, region, params, rng.randrange(2**32))
    return region, sites, rng


def place_static(
    circuit: SlicedCircuit,
    schedule: Schedule,
    seed: int = 0,
    arch: Optional[ArchConfig] = None,
    params: AnnealParams = AnnealParams(),
) -> Placement:
    """One annealed home placement shared by every stage (all weights 1)."""
    region, sites, _ = _global_anneal(circuit, schedule, seed, arch, params, dynamic=False)
    return Placement((sites,) * max(1, schedule.n_stages), "static", region)


MoverSelector = Callable[[int, Mapping[int, Site]], Iterable[int]]
TransitionCost = Callable[[int, Mapping[int, Site], Mapping[int, Site]], float]


def lower_id_movers(schedule: Schedule) -> MoverSelector:
    def select(stage: int, sites: Mapping[int, Site]) -> List[int]:
        return [min(g) for _, g in schedule.stage_gates(stage)]

    return select


def place_dynamic(
    circuit: SlicedCircuit,
    schedule: Schedule,
    seed: int = 0,
    arch: Optional[ArchConfig] = None,
    params: AnnealParams = AnnealParams(),
    select_movers: Optional[MoverSelector] = None,
    relocation_weight: float = 0.0,
    transition_cost: Optional[TransitionCost] = None,
    decayed_initial: bool = False,
) -> Placement:
    """Per-stage placements: after each stage only the qubits that moved are re-annealed.

    ``select_movers(stage, sites)`` names the qubits carried by the AOD for
    ``stage``; by default the lower-id endpoint of each gate. With a non-zero
    ``relocation_weight`` the distance a mover travels back out of its
    partner's site is charged to the cost as well.

    ``transition_cost(stage, cur, nxt)`` estimates the time from the end of
    ``stage`` to the end of the program if ``nxt`` were kept for every later
    stage. When given, a re-annealed placement is kept only if it beats
    sending the movers back home (``nxt == cur``); since the home option is
    exactly the previous estimate, the program never gets longer than with
    the static first placement.

    The first placement is the uniform-weight one that static mode uses, so
    the per-stage steps refine it; ``decayed_initial`` weights it by stage
    instead.
    """
    region, sites, rng = _global_anneal(circuit, schedule, seed, arch, params, dynamic=decayed_initial)
    stages = [sites]
    movers_log = []
    reanneal = []
    select = select_movers or lower_id_movers(schedule)
    for t in range(schedule.n_stages - 1):
        cur = stages[-1]
        movers = frozenset(select(t, cur))
        movers_log.append(movers)
        partner_site = {}
        for _, g in schedule.stage_gates(t):
            if g.q0 in movers:
                partner_site[g.q0] = cur[g.q1]
            elif g.q1 in movers:
                partner_site[g.q1] = cur[g.q0]
        gates = _weighted_gates(schedule, first_stage=t + 1, dynamic=True)
        anchors = (
            {q: (partner_site[q], relocation_weight) for q in movers if q in partner_site}
            if relocation_weight
            else None
        )
        nxt = anneal_placement(cur, movers, gates, region, params, rng.randrange(2**32), anchors)
        record = {
            "stage": t + 1,
            "n_movable": len(movers),
            "cost_before": placement_cost(cur, gates),
            "cost_after": placement_cost(nxt, gates),
        }
        if transition_cost is not None and nxt != cur:
            t_new, t_home = transition_cost(t, cur, nxt), transition_cost(t, cur, cur)
            record.update(time_us=t_new, home_time_us=t_home, kept=t_new < t_home)
            if t_new >= t_home:
                nxt = cur
        reanneal.append(record)
        stages.append(nxt)
    return Placement(tuple(stages), "dynamic", region, tuple(movers_log), {"reanneal": reanneal})
