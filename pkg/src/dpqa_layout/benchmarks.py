"""QAOA benchmark generation and the JSON circuit file format."""

from __future__ import annotations

import json
import random
from pathlib import Path
from typing import Any, List, Mapping, Optional, Tuple, Union

from .core import CircuitError, SlicedCircuit


def random_regular_edges(n: int, degree: int = 3, seed: int = 0, max_tries: int = 10_000) -> List[Tuple[int, int]]:
    """Uniformly random simple ``degree``-regular graph on ``n`` vertices.

    Configuration model: stubs are shuffled and paired, and the whole pairing
    is rejected if it contains a self-loop or a repeated edge.
    """
    if degree < 1:
        raise CircuitError(f"degree must be positive, got {degree}")
    if n <= degree:
        raise CircuitError(f"a {degree}-regular graph needs more than {degree} vertices, got {n}")
    if n * degree % 2:
        raise CircuitError(f"n * degree must be even, got {n} * {degree}")
    rng = random.Random(seed)
    stubs = [v for v in range(n) for _ in range(degree)]
    for _ in range(max_tries):
        rng.shuffle(stubs)
        edges = set()
        for i in range(0, len(stubs), 2):
            u, v = stubs[i], stubs[i + 1]
            if u == v:
                break
            e = (u, v) if u < v else (v, u)
            if e in edges:
                break
            edges.add(e)
        else:
            return sorted(edges)
    raise CircuitError(f"no simple {degree}-regular graph on {n} vertices found in {max_tries} tries")


def generate_qaoa_benchmark(n: int, degree: int = 3, seed: int = 0) -> SlicedCircuit:
    """One QAOA MaxCut layer: a single commutation group with a ZZ gate per edge."""
    edges = random_regular_edges(n, degree, seed)
    return SlicedCircuit.build(n, [("commute", edges)], name=f"qaoa-n{n}-d{degree}-s{seed}")


def circuit_to_dict(circuit: SlicedCircuit, seed: Optional[int] = None) -> dict:
    out: dict = {
        "n_qubits": circuit.n_qubits,
        "slices": [{"type": sl.kind, "gates": [list(g) for g in sl.gates]} for sl in circuit.slices],
    }
    if circuit.name is not None:
        out["name"] = circuit.name
    if seed is not None:
        out["seed"] = seed
    return out


def circuit_from_dict(data: Mapping[str, Any]) -> SlicedCircuit:
    if not isinstance(data, Mapping):
        raise CircuitError("circuit document must be a JSON object")
    if "n_qubits" not in data or "slices" not in data:
        raise CircuitError("circuit document needs 'n_qubits' and 'slices'")
    slices = []
    for k, sl in enumerate(data["slices"]):
        if not isinstance(sl, Mapping):
            raise CircuitError(f"slice {k}: expected an object")
        kind = sl.get("type")
        if kind not in ("commute", "dependency"):
            raise CircuitError(f"slice {k}: unknown slice type {kind!r}; expected 'commute' or 'dependency'")
        gates = sl.get("gates", [])
        for i, g in enumerate(gates):
            if not isinstance(g, (list, tuple)) or len(g) != 2 or not all(isinstance(q, int) for q in g):
                raise CircuitError(f"slice {k} gate {i}: expected a pair of qubit ids, got {g!r}")
        slices.append((kind, gates))
    return SlicedCircuit.build(data["n_qubits"], slices, name=data.get("name"))


def load_circuit(path: Union[str, Path]) -> SlicedCircuit:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CircuitError(f"{path}: invalid JSON ({exc})") from exc
    return circuit_from_dict(data)


def save_circuit(circuit: SlicedCircuit, path: Union[str, Path], seed: Optional[int] = None) -> None:
    Path(path).write_text(json.dumps(circuit_to_dict(circuit, seed), indent=1) + "\n", encoding="utf-8")
