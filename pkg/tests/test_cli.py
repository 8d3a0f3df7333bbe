import json
import subprocess
import sys
from collections import Counter

import pytest

from dpqa_layout.benchmarks import (
    circuit_from_dict,
    circuit_to_dict,
    generate_qaoa_benchmark,
    load_circuit,
    random_regular_edges,
    save_circuit,
)
from dpqa_layout.cli import main
from dpqa_layout.core import CircuitError


def test_k4_is_the_only_cubic_graph_on_four_vertices():
    assert random_regular_edges(4, 3, seed=0) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def test_generator_is_deterministic_and_regular():
    assert random_regular_edges(90, 3, seed=5) == random_regular_edges(90, 3, seed=5)
    for seed in range(10):
        edges = random_regular_edges(30, 3, seed=seed)
        assert len(edges) == 45 and len(set(edges)) == 45
        deg = Counter(q for e in edges for q in e)
        assert set(deg.values()) == {3} and len(deg) == 30
        assert all(u < v for u, v in edges)


def test_generator_rejects_infeasible_sizes():
    with pytest.raises(CircuitError):
        random_regular_edges(5, 3)
    with pytest.raises(CircuitError):
        random_regular_edges(3, 3)


def test_circuit_file_round_trip(tmp_path):
    c = generate_qaoa_benchmark(10, seed=2)
    path = tmp_path / "c.json"
    save_circuit(c, path, seed=2)
    data = json.loads(path.read_text())
    assert data["seed"] == 2 and data["slices"][0]["type"] == "commute"
    assert load_circuit(path) == c
    assert circuit_from_dict(circuit_to_dict(c)) == c


def test_malformed_slice_type_names_the_slice():
    with pytest.raises(CircuitError, match="slice 1"):
        circuit_from_dict({"n_qubits": 3, "slices": [{"type": "commute", "gates": [[0, 1]]}, {"type": "loop", "gates": []}]})
    with pytest.raises(CircuitError, match="slice 0 gate 1"):
        circuit_from_dict({"n_qubits": 3, "slices": [{"type": "commute", "gates": [[0, 1], [2]]}]})


def test_cli_compile_defaults(tmp_path, capsys):
    circ = tmp_path / "q10.json"
    assert main(["gen-qaoa", "--n", "10", "--seed", "1", "--out", str(circ)]) == 0
    out = tmp_path / "out"
    assert main(["compile", "--circuit", str(circ), "--out-dir", str(out), "--timings"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["n_stages"] <= 4 and report["violations"] == []
    assert report["options"]["placement"] == "dynamic" and report["options"]["routing"] == "windowis"
    assert set(report["timings_s"]) >= {"scheduling", "placement", "routing", "codegen"}
    header = (out / "breakdown.csv").read_text().splitlines()[0]
    assert header == "n_qubits,two_qubit,transfer,decoherence,total"
    prog = json.loads((out / "program.json").read_text())
    assert prog["format"] == "dpqa-program/1"
    assert "timings" in capsys.readouterr().out


def test_cli_output_is_byte_identical_across_runs(tmp_path):
    circ = tmp_path / "q.json"
    main(["gen-qaoa", "--n", "14", "--seed", "3", "--out", str(circ)])
    for d in ("a", "b"):
        main(["compile", "--circuit", str(circ), "--out-dir", str(tmp_path / d), "--seed", "9"])
    assert (tmp_path / "a" / "program.json").read_bytes() == (tmp_path / "b" / "program.json").read_bytes()


def test_trivial_sortis_is_not_better_than_defaults(tmp_path):
    worse_or_equal = 0
    for seed in range(10):
        circ = tmp_path / f"q{seed}.json"
        main(["gen-qaoa", "--n", "10", "--seed", str(seed), "--out", str(circ)])
        main(["compile", "--circuit", str(circ), "--out-dir", str(tmp_path / f"d{seed}"), "--seed", str(seed)])
        main(["compile", "--circuit", str(circ), "--out-dir", str(tmp_path / f"t{seed}"), "--seed", str(seed),
              "--placement", "trivial", "--routing", "sortis"])
        d = json.loads((tmp_path / f"d{seed}" / "report.json").read_text())["fidelity"]["total"]
        t = json.loads((tmp_path / f"t{seed}" / "report.json").read_text())["fidelity"]["total"]
        worse_or_equal += t <= d
    assert worse_or_equal >= 9


def test_cli_batch_with_jobs(tmp_path):
    paths = []
    for seed in range(3):
        p = tmp_path / f"c{seed}.json"
        main(["gen-qaoa", "--n", "8", "--seed", str(seed), "--out", str(p)])
        paths += ["--circuit", str(p)]
    assert main(["compile", *paths, "--out-dir", str(tmp_path / "o"), "--jobs", "2", "--aods", "2"]) == 0
    for seed in range(3):
        rep = json.loads((tmp_path / "o" / f"c{seed}" / "report.json").read_text())
        assert rep["options"]["aods"] == 2


def test_cli_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n_qubits": 2, "slices": [{"type": "weird", "gates": []}]}))
    assert main(["compile", "--circuit", str(bad), "--out-dir", str(tmp_path / "o")]) == 2
    assert "slice 0" in capsys.readouterr().err
    assert main(["gen-qaoa", "--n", "5"]) == 2
    arch = tmp_path / "arch.json"
    arch.write_text(json.dumps({"site_pitch_um": 1.0}))
    good = tmp_path / "g.json"
    main(["gen-qaoa", "--n", "6", "--out", str(good)])
    assert main(["compile", "--circuit", str(good), "--arch", str(arch), "--out-dir", str(tmp_path / "o2")]) == 2


def test_cli_flags_arch_grid_violations(tmp_path, capsys):
    good = tmp_path / "g.json"
    main(["gen-qaoa", "--n", "20", "--out", str(good)])
    arch = tmp_path / "arch.json"
    arch.write_text(json.dumps({"cols_max": 3, "rows_max": 3}))
    # a 3x3 grid cannot host 20 atoms; the verifier must reject the program
    assert main(["compile", "--circuit", str(good), "--arch", str(arch), "--out-dir", str(tmp_path / "o")]) == 1
    assert "violations" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "dpqa_layout", "gen-qaoa", "--n", "6", "--seed", "0"],
        capture_output=True, text=True, check=True,
    )
    assert json.loads(res.stdout)["n_qubits"] == 6
