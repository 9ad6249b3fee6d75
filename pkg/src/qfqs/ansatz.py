"""Circuit model, alternating layered ansatz builders and initialization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import gates as g
from .simulator import apply_gate, zero_state

FQS_BLOCK = "fqs"
CFQS_BLOCK = "cfqs"
SCF_BLOCK = "scf"
NP_BLOCK = "np"
BLOCK_TYPES = (FQS_BLOCK, CFQS_BLOCK, SCF_BLOCK, NP_BLOCK)

NEAREST_NEIGHBOR = "nearest-neighbor"
ALL_TO_ALL = "all-to-all"
SPIN_PRESERVING = "spin-preserving"
CONNECTIVITIES = (NEAREST_NEIGHBOR, ALL_TO_ALL, SPIN_PRESERVING)

# unit kinds
UNIT_SINGLE = "single"
UNIT_CONTROLLED = "controlled"
UNIT_PAIR = "pair"

# 1-based qubit pairs per layer, as tabulated for the molecular ansaetze
PAIR_TABLE = {
    (ALL_TO_ALL, 4): [(1, 2), (3, 4), (1, 4), (2, 3), (1, 3), (2, 4)],
    (SPIN_PRESERVING, 4): [(1, 2), (3, 4)],
    (ALL_TO_ALL, 6): [
        (1, 2), (3, 5), (4, 6),
        (1, 3), (2, 6), (4, 5),
        (1, 4), (2, 3), (5, 6),
        (1, 5), (2, 4), (3, 6),
        (1, 6), (2, 5), (3, 4),
    ],
    (SPIN_PRESERVING, 6): [(1, 2), (4, 5), (2, 3), (5, 6), (1, 3), (4, 6)],
}
# negative-controlled Z inserted between spin-preserving layers
SPIN_BRIDGE = {4: (2, 3), 6: (3, 4)}


@dataclass
class Circuit:
    """Ordered gate list plus the update schedule.

    Each schedule entry is a tuple of gate indices forming one update unit: a
    single trainable gate, or two adjacent gates forming a
    negative-controlled/controlled pair on the same qubits.
    """

    n_qubits: int
    gates: List[g.GateInstance] = field(default_factory=list)
    schedule: List[Tuple[int, ...]] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def copy(self) -> "Circuit":
        return Circuit(self.n_qubits, [gt.copy() for gt in self.gates], list(self.schedule), dict(self.meta))

    def add(self, gate: g.GateInstance) -> int:
        for q in gate.qubits:
            if not 0 <= q < self.n_qubits:
                raise IndexError(f"qubit {q} out of range")
        self.gates.append(gate)
        return len(self.gates) - 1

    def unit_kind(self, unit: Sequence[int]) -> str:
        if len(unit) == 2:
            return UNIT_PAIR
        kind = self.gates[unit[0]].kind
        return UNIT_SINGLE if kind == g.SINGLE else UNIT_CONTROLLED

    def trainable_indices(self) -> List[int]:
        return [i for i, gt in enumerate(self.gates) if gt.trainable]

    def validate_schedule(self):
        seen = []
        for unit in self.schedule:
            if len(unit) == 2:
                a, b = unit
                ga, gb = self.gates[a], self.gates[b]
                if b != a + 1 or {ga.kind, gb.kind} != {g.CONTROLLED, g.NEG_CONTROLLED} or ga.qubits != gb.qubits:
                    raise ValueError(f"unit {unit} is not an adjacent controlled/negative-controlled pair")
            elif len(unit) != 1:
                raise ValueError(f"bad unit {unit}")
            seen.extend(unit)
        if sorted(seen) != self.trainable_indices():
            raise ValueError("schedule must cover every trainable gate exactly once")

    def matrix(self) -> np.ndarray:
        """Dense unitary of the whole circuit (small n only)."""
        dim = 1 << self.n_qubits
        cols = np.eye(dim, dtype=complex)
        return run_circuit(self, cols).T

    def counts(self) -> dict:
        out: dict = {}
        for gt in self.gates:
            out[gt.kind] = out.get(gt.kind, 0) + 1
        return out


def run_circuit(circuit: Circuit, state: Optional[np.ndarray] = None, conjugate: bool = False, offset: int = 0):
    """Apply every gate of ``circuit`` to ``state`` (default |0...0>).

    With ``conjugate`` the element-wise conjugate of each gate is applied, and
    ``offset`` shifts gate qubits, which is how a circuit is placed on the B half
    of a doubled register.
    """
    if state is None:
        state = zero_state(circuit.n_qubits + offset)
    for gate in circuit.gates:
        m = gate.matrix()
        if conjugate:
            m = m.conj()
        state = apply_gate(state, m, [q + offset for q in gate.qubits])
    return state


def conjugate_circuit(circuit: Circuit) -> Circuit:
    out = circuit.copy()
    out.gates = [g.conjugate_gate(gt) for gt in circuit.gates]
    return out


# --------------------------------------------------------------------------
# builders


def layer_pairs(n: int, connectivity: str) -> Tuple[List[Tuple[int, int]], List[Tuple[int, int]]]:
    """0-based qubit pairs of one layer in circuit order, and in zipping order."""
    if connectivity == NEAREST_NEIGHBOR:
        if n < 2 or n % 2:
            raise ValueError(f"nearest-neighbor brick pattern needs even n >= 2, got {n}")
        first = [(i, i + 1) for i in range(0, n, 2)]
        second = [(i, i + 1) for i in range(1, n - 1, 2)]
        if n > 2:
            second.append((n - 1, 0))
        zipped = []
        for k in range(len(first)):
            zipped.append(first[k])
            if k < len(second):
                zipped.append(second[k])
        return first + second, zipped
    key = (connectivity, n)
    if key not in PAIR_TABLE:
        raise ValueError(f"no {connectivity} pair table for n={n}")
    pairs = [(a - 1, b - 1) for a, b in PAIR_TABLE[key]]
    return pairs, list(pairs)


def _block_gates(block: str, c: int, t: int) -> List[Tuple[g.GateInstance, ...]]:
    """Gates of one block, grouped by update unit in subscript order."""
    if block == FQS_BLOCK:
        return [(g.GateInstance(g.SINGLE, (c,)),), (g.GateInstance(g.SINGLE, (t,)),), (g.GateInstance(g.FIXED_CZ, (c, t)),)]
    if block == CFQS_BLOCK:
        return [
            (g.GateInstance(g.SINGLE, (c,)),),
            (g.GateInstance(g.SINGLE, (t,)),),
            (g.GateInstance(g.CONTROLLED, (c, t)),),
        ]
    if block == SCF_BLOCK:
        return [
            (g.GateInstance(g.SINGLE, (c,)),),
            (g.GateInstance(g.NEG_CONTROLLED, (c, t)), g.GateInstance(g.CONTROLLED, (c, t))),
        ]
    if block == NP_BLOCK:
        return [(g.GateInstance(g.NUMBER_PRESERVING, (c, t)),)]
    raise ValueError(f"unknown block type {block!r}")


def build_alt_ansatz(
    n: int,
    layers: int,
    block: str = CFQS_BLOCK,
    connectivity: str = NEAREST_NEIGHBOR,
    final_rotations: Optional[bool] = None,
    order: str = "zipping",
) -> Circuit:
    """Alternating layered ansatz.

    ``final_rotations`` appends one trainable single-qubit gate per qubit at the
    end; it defaults to on for FQS blocks only. ``order`` selects the update
    schedule: ``"zipping"`` or ``"ascending"`` (circuit order).
    """
    if layers < 1:
        raise ValueError("layers must be >= 1")
    if block not in BLOCK_TYPES:
        raise ValueError(f"unknown block type {block!r}")
    pairs, zipped = layer_pairs(n, connectivity)
    if final_rotations is None:
        final_rotations = block == FQS_BLOCK
    circuit = Circuit(n, meta={"block": block, "connectivity": connectivity, "layers": layers})
    units_circuit_order: List[Tuple[int, ...]] = []
    units_zip: List[Tuple[int, ...]] = []
    for layer in range(layers):
        by_pair = {}
        for c, t in pairs:
            block_units = []
            for unit in _block_gates(block, c, t):
                idx = tuple(circuit.add(gt) for gt in unit)
                if any(circuit.gates[i].trainable for i in idx):
                    block_units.append(idx)
            by_pair[(c, t)] = block_units
            units_circuit_order.extend(block_units)
        for pair in zipped:
            units_zip.extend(by_pair[pair])
        if connectivity == SPIN_PRESERVING and layer < layers - 1:
            a, b = SPIN_BRIDGE[n]
            circuit.add(g.GateInstance(g.FIXED_NCZ, (a - 1, b - 1)))
    if final_rotations:
        for q in range(n):
            idx = (circuit.add(g.GateInstance(g.SINGLE, (q,))),)
            units_circuit_order.append(idx)
            units_zip.append(idx)
    circuit.meta["zipping"] = units_zip
    circuit.meta["ascending"] = units_circuit_order
    circuit.schedule = zipping_schedule(circuit) if order == "zipping" else list(units_circuit_order)
    circuit.validate_schedule()
    return circuit


def zipping_schedule(circuit: Circuit) -> List[Tuple[int, ...]]:
    """Zipping update order of a circuit built by :func:`build_alt_ansatz`."""
    if "zipping" not in circuit.meta:
        raise ValueError("circuit was not built by build_alt_ansatz")
    return list(circuit.meta["zipping"])


def single_gate_circuit(n: int, gate: g.GateInstance) -> Circuit:
    c = Circuit(n)
    c.add(gate)
    c.schedule = [(0,)] if gate.trainable else []
    return c


def default_schedule(circuit: Circuit) -> List[Tuple[int, ...]]:
    """Ascending schedule that pairs adjacent neg-controlled/controlled gates."""
    units = []
    i = 0
    gates = circuit.gates
    while i < len(gates):
        gt = gates[i]
        if not gt.trainable:
            i += 1
            continue
        nxt = gates[i + 1] if i + 1 < len(gates) else None
        if (
            nxt is not None
            and nxt.trainable
            and {gt.kind, nxt.kind} == {g.CONTROLLED, g.NEG_CONTROLLED}
            and gt.qubits == nxt.qubits
        ):
            units.append((i, i + 1))
            i += 2
        else:
            units.append((i,))
            i += 1
    return units


# --------------------------------------------------------------------------
# initialization

RANDOM = "random"
CZ_INIT = "cz-init"
WARM_START = "warm-start"


def random_quaternion(rng: np.random.Generator) -> np.ndarray:
    return g.normalize(rng.standard_normal(4))


def _small_rotation(rng: np.random.Generator, angle_max: float) -> np.ndarray:
    axis = rng.standard_normal(3)
    angle = rng.uniform(0.0, angle_max)
    return g.quaternion_from_axis_angle(axis, angle)


def initialize(circuit: Circuit, policy: str = RANDOM, rng_seed=None, angle_max: float = math.pi / 18) -> Circuit:
    """Return a copy of ``circuit`` with freshly initialized parameters.

    ``random``: every trainable quaternion uniform on the 3-sphere.
    ``cz-init``: controlled gates become CZ (quaternion of -iZ plus a frozen
    pi/2 phase gate on the control); everything else random.
    ``warm-start``: every trainable gate is a rotation by an angle uniform in
    ``[0, angle_max]`` about a uniform axis, except controlled gates, which
    start as CZ.
    """
    rng = np.random.default_rng(rng_seed)
    out = circuit.copy()
    for gate in out.gates:
        if not gate.trainable:
            continue
        gate.phase = 0.0
        if policy == RANDOM:
            gate.params = random_quaternion(rng)
        elif policy in (CZ_INIT, WARM_START):
            if gate.kind == g.CONTROLLED:
                gate.params = g.CZ_Q.copy()
                gate.phase = g.CZ_PHASE
            elif policy == CZ_INIT:
                gate.params = random_quaternion(rng) if gate.kind != g.NEG_CONTROLLED else g.IDENTITY_Q.copy()
            else:
                gate.params = _small_rotation(rng, angle_max)
        else:
            raise ValueError(f"unknown initialization policy {policy!r}")
    return out
