import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpqa_layout.benchmarks import random_regular_edges
from dpqa_layout.core import SlicedCircuit
from dpqa_layout.scheduler import (
    SchedulingError,
    chromatic_index_exact,
    color_edges_misra_gries,
    diagnostics,
    max_degree,
    schedule_circuit,
    schedule_commutation_group,
    schedule_dependency,
)
from oracles import (
    chromatic_index_bruteforce,
    is_proper_edge_coloring,
    longest_dependent_chain,
    min_levelization_bruteforce,
)

PETERSEN = [(i, (i + 1) % 5) for i in range(5)] + [(i, i + 5) for i in range(5)] + [
    (5 + i, 5 + (i + 2) % 5) for i in range(5)
]


def n_colors(coloring):
    return len(set(coloring.values()))


def test_path_uses_two_colors():
    assert n_colors(color_edges_misra_gries([(0, 1), (1, 2)])) == 2


def test_odd_cycle_uses_three_colors():
    c5 = [(i, (i + 1) % 5) for i in range(5)]
    col = color_edges_misra_gries(c5)
    assert is_proper_edge_coloring(col)
    assert n_colors(col) == 3 == chromatic_index_bruteforce(c5)


def test_triangle_and_matching_schedules():
    assert sorted(schedule_commutation_group([(0, 1), (1, 2), (0, 2)])) == [0, 1, 2]
    assert schedule_commutation_group([(0, 1), (2, 3), (4, 5)]) == [0, 0, 0]


def test_petersen_graph_needs_four_stages():
    stages = schedule_commutation_group(PETERSEN)
    assert max(stages) + 1 == 4
    assert chromatic_index_bruteforce(PETERSEN) == 4


def test_random_cubic_graph_on_90_vertices_uses_at_most_four_colors():
    edges = random_regular_edges(90, 3, seed=7)
    col = color_edges_misra_gries(edges)
    assert is_proper_edge_coloring(col) and n_colors(col) <= 4


def test_non_simple_graphs_are_rejected():
    with pytest.raises(SchedulingError):
        color_edges_misra_gries([(0, 0)])
    with pytest.raises(SchedulingError):
        color_edges_misra_gries([(0, 1), (1, 0)])
    with pytest.raises(SchedulingError):
        schedule_commutation_group([])


@st.composite
def simple_graphs(draw, max_n=12, max_edges=40):
    n = draw(st.integers(2, max_n))
    all_edges = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = draw(st.lists(st.sampled_from(all_edges), unique=True, max_size=max_edges, min_size=1))
    return edges


@settings(max_examples=200, deadline=None)
@given(simple_graphs())
def test_misra_gries_is_proper_and_within_vizing_bound(edges):
    col = color_edges_misra_gries(edges)
    assert set(col) == {tuple(sorted(e)) for e in edges}
    assert is_proper_edge_coloring(col)
    assert max(col.values()) <= max_degree(edges)


@settings(max_examples=100, deadline=None)
@given(simple_graphs(max_n=8, max_edges=12))
def test_small_graphs_within_one_of_chromatic_index(edges):
    chi = chromatic_index_bruteforce(edges)
    assert chromatic_index_exact(edges) == chi
    assert n_colors(color_edges_misra_gries(edges)) <= chi + 1


@settings(max_examples=50, deadline=None)
@given(simple_graphs())
def test_coloring_is_deterministic_under_edge_order(edges):
    shuffled = list(reversed([(v, u) for u, v in edges]))
    assert color_edges_misra_gries(edges) == color_edges_misra_gries(shuffled)


def test_dependency_examples():
    assert schedule_dependency([(0, 1), (1, 2), (2, 3)]) == [0, 1, 2]
    assert schedule_dependency([(0, 1), (2, 3)]) == [0, 0]
    fig = [(0, 1), (2, 3), (1, 2), (0, 3), (1, 3)]
    assert schedule_dependency(fig) == [0, 0, 1, 1, 2]
    assert min_levelization_bruteforce(fig) == 3


@st.composite
def gate_lists(draw, max_q=6, max_gates=7):
    n = draw(st.integers(2, max_q))
    pair = st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda p: p[0] != p[1])
    return draw(st.lists(pair, min_size=1, max_size=max_gates))


@settings(max_examples=100, deadline=None)
@given(gate_lists())
def test_asap_is_optimal_against_brute_force(gates):
    stages = schedule_dependency(gates)
    assert max(stages) + 1 == longest_dependent_chain(gates) == min_levelization_bruteforce(gates)
    for i, j in [(i, j) for j in range(len(gates)) for i in range(j)]:
        if set(gates[i]) & set(gates[j]):
            assert stages[i] < stages[j]


def test_schedule_circuit_concatenates_slices():
    c = SlicedCircuit.build(4, [("commute", [(0, 1), (2, 3)]), ("dependency", [(0, 2), (2, 1)])])
    s = schedule_circuit(c)
    assert s.n_stages == 3
    assert s.slice_boundaries == ((0, 0, 0), (1, 1, 2))
    assert s.stage_of == {(0, 0): 0, (0, 1): 0, (1, 0): 1, (1, 1): 2}
    assert schedule_circuit(SlicedCircuit(0, ())).n_stages == 0


def test_repeated_pairs_across_slices_stay_distinct():
    c = SlicedCircuit.build(2, [("commute", [(0, 1)]), ("commute", [(1, 0)])])
    s = schedule_circuit(c)
    assert s.n_stages == 2 and len(s.stage_of) == 2


def test_stage_order_hook_permutes_stages():
    gates = [(0, 1), (1, 2), (0, 2)]
    base = schedule_commutation_group(gates)
    flipped = schedule_commutation_group(gates, order=[2, 1, 0])
    assert [2 - s for s in base] == flipped
    with pytest.raises(SchedulingError):
        schedule_commutation_group(gates, order=[0, 0, 1])


@pytest.mark.parametrize("seed", range(3))
def test_qaoa_30_stage_count_against_exact_chromatic_index(seed):
    edges = random_regular_edges(30, 3, seed=seed)
    c = SlicedCircuit.build(30, [("commute", edges)])
    s = schedule_circuit(c)
    chi = chromatic_index_exact(edges)
    assert chi in (3, 4)
    assert s.n_stages in (3, 4) and s.n_stages <= chi + 1


def test_every_stage_is_a_matching_on_mixed_circuits():
    rng = random.Random(3)
    for _ in range(30):
        n = rng.randint(3, 15)
        slices = []
        for _ in range(rng.randint(1, 4)):
            pairs = {tuple(sorted(rng.sample(range(n), 2))) for _ in range(rng.randint(1, 20))}
            slices.append((rng.choice(["commute", "dependency"]), sorted(pairs)))
        s = schedule_circuit(SlicedCircuit.build(n, slices))
        for stage in s.stages():
            qs = [q for _, g in stage for q in g]
            assert len(qs) == len(set(qs))
        for (k1, a, b), (k2, c, d) in zip(s.slice_boundaries, s.slice_boundaries[1:]):
            assert b < c


def test_diagnostics_report_bounds():
    c = SlicedCircuit.build(10, [("commute", PETERSEN)])
    d = diagnostics(c, schedule_circuit(c), exact=False)
    assert d[0]["max_degree"] == 3 and d[0]["stages_used"] == 4
    small = SlicedCircuit.build(3, [("commute", [(0, 1), (1, 2), (0, 2)])])
    assert diagnostics(small, schedule_circuit(small), exact=True)[0]["chromatic_index"] == 3
