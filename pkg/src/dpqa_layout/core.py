"""Shared domain types, architecture constants and geometry.

Units: lengths in micrometres, durations in microseconds.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Iterable, Mapping, NamedTuple, Sequence, Union


class ArchConfigError(ValueError):
    pass


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class ArchConfig:
    """Hardware description of a field-programmable atom array.

    ``cols_max``/``rows_max`` are site counts; ``None`` means the grid is as
    large as the placement exploration region needs.
    """

    cols_max: int | None = None
    rows_max: int | None = None
    site_pitch_um: float = 15.0
    rydberg_range_um: float = 6.0
    f_single_qubit: float = 0.9997
    f_two_qubit: float = 0.995
    f_excitement: float = 0.9975
    f_transfer: float = 0.999
    t_raman_us: float = 0.625
    t_rydberg_us: float = 0.36
    t_transfer_us: float = 15.0
    t2_coherence_us: float = 1.5e6
    accel_m_per_s2: float = 2750.0
    n_aods: int = 1

    def __post_init__(self) -> None:
        for name in ("cols_max", "rows_max"):
            value = getattr(self, name)
            if value is not None and (not isinstance(value, int) or value < 1):
                raise ArchConfigError(f"{name} must be a positive integer or null, got {value!r}")
        if self.rydberg_range_um <= 0:
            raise ArchConfigError("rydberg_range_um must be positive")
        if self.site_pitch_um < 2.5 * self.rydberg_range_um:
            raise ArchConfigError(
                f"site_pitch_um={self.site_pitch_um} must be at least 2.5 x "
                f"rydberg_range_um={self.rydberg_range_um}"
            )
        for name in ("f_single_qubit", "f_two_qubit", "f_excitement", "f_transfer"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ArchConfigError(f"{name} must lie in (0, 1], got {value}")
        for name in ("t_raman_us", "t_rydberg_us", "t_transfer_us", "t2_coherence_us", "accel_m_per_s2"):
            if getattr(self, name) <= 0:
                raise ArchConfigError(f"{name} must be positive")
        if not isinstance(self.n_aods, int) or self.n_aods < 1:
            raise ArchConfigError(f"n_aods must be an integer >= 1, got {self.n_aods!r}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ArchConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ArchConfigError(f"unknown architecture fields: {sorted(unknown)}")
        return cls(**dict(data))

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "ArchConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ArchConfigError("architecture document must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


class Site(NamedTuple):
    """Interaction site at integer grid coordinates (column ``x``, row ``y``)."""

    x: int
    y: int


class Gate(NamedTuple):
    q0: int
    q1: int

    def pair(self) -> tuple[int, int]:
        return (self.q0, self.q1) if self.q0 < self.q1 else (self.q1, self.q0)


@dataclass(frozen=True)
class CommutationGroup:
    """Gates that may run in any order."""

    gates: tuple[Gate, ...]
    kind = "commute"


@dataclass(frozen=True)
class DependencySubcircuit:
    """Gates that must keep their relative order on shared qubits."""

    gates: tuple[Gate, ...]
    kind = "dependency"


Slice = Union[CommutationGroup, DependencySubcircuit]


@dataclass(frozen=True)
class SlicedCircuit:
    n_qubits: int
    slices: tuple[Slice, ...]
    name: str | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.n_qubits, int) or self.n_qubits < 0:
            raise CircuitError(f"n_qubits must be a non-negative integer, got {self.n_qubits!r}")
        for k, sl in enumerate(self.slices):
            for i, g in enumerate(sl.gates):
                if g.q0 == g.q1:
                    raise CircuitError(f"slice {k} gate {i}: both operands are qubit {g.q0}")
                for q in g:
                    if not 0 <= q < self.n_qubits:
                        raise CircuitError(
                            f"slice {k} gate {i}: qubit {q} out of range for n_qubits={self.n_qubits}"
                        )
            if isinstance(sl, CommutationGroup):
                seen: dict[tuple[int, int], int] = {}
                for i, g in enumerate(sl.gates):
                    p = g.pair()
                    if p in seen:
                        raise CircuitError(
                            f"slice {k}: gates {seen[p]} and {i} both act on pair {p}; "
                            "a commutation group must not repeat a pair, split it into consecutive slices"
                        )
                    seen[p] = i

    @property
    def n_gates(self) -> int:
        return sum(len(sl.gates) for sl in self.slices)

    @classmethod
    def build(
        cls,
        n_qubits: int,
        slices: Iterable[tuple[str, Sequence[Sequence[int]]]],
        name: str | None = None,
    ) -> "SlicedCircuit":
        """Construct from ``(kind, gate list)`` pairs, kind being ``commute`` or ``dependency``."""
        built: list[Slice] = []
        for k, (kind, gates) in enumerate(slices):
            gate_tuple = tuple(Gate(int(a), int(b)) for a, b in gates)
            if kind == "commute":
                built.append(CommutationGroup(gate_tuple))
            elif kind == "dependency":
                built.append(DependencySubcircuit(gate_tuple))
            else:
                raise CircuitError(f"slice {k}: unknown slice type {kind!r}")
        return cls(n_qubits, tuple(built), name)


def movement_time(distance_um: float, accel: float = 2750.0) -> float:
    """AOD travel time in us for a move of ``distance_um`` under constant ``d / t**2 = accel``.

    ``accel`` is in m/s^2.
    """
    if distance_um < 0:
        raise ValueError(f"distance must be non-negative, got {distance_um}")
    return math.sqrt(distance_um * 1e-6 / accel) * 1e6


def site_distance(s1: Sequence[int], s2: Sequence[int], pitch: float = 1.0) -> float:
    return pitch * math.hypot(s1[0] - s2[0], s1[1] - s2[1])
