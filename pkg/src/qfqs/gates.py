"""Quaternion gate algebra and gate-matrix construction.

A unit quaternion ``q = (q_i, q_x, q_y, q_z)`` maps to the SU(2) element

    R(q) = q_i I - i q_x X - i q_y Y - i q_z Z.

Two-qubit matrices use the ``control (x) target`` ordering: the first qubit
listed for a gate is the most significant bit of the 4x4 matrix index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)

#: Extended Pauli basis (I, -iX, -iY, -iZ).
SIGMA_EXT = np.stack([I2, -1j * X, -1j * Y, -1j * Z])

P0 = np.array([[1, 0], [0, 0]], dtype=complex)
P1 = np.array([[0, 0], [0, 1]], dtype=complex)

CNOT = np.kron(P0, I2) + np.kron(P1, X)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
NCZ = np.diag([1, -1, 1, 1]).astype(complex)

IDENTITY_Q = np.array([1.0, 0.0, 0.0, 0.0])
#: Quaternion of -iZ; with a pi/2 phase gate on the control this is CZ.
CZ_Q = np.array([0.0, 0.0, 0.0, 1.0])
CZ_PHASE = math.pi / 2


def normalize(q: Sequence[float]) -> np.ndarray:
    """Return ``q`` scaled to unit length."""
    q = np.asarray(q, dtype=float)
    norm = np.linalg.norm(q)
    if norm == 0.0:
        raise ValueError("zero quaternion cannot be normalized")
    return q / norm


def canonical(q: Sequence[float]) -> np.ndarray:
    """Normalize and flip sign so the first nonzero component is positive.

    Only meaningful for uncontrolled gates: ``R(q)`` and ``R(-q)`` differ by a
    global phase there, but not once the gate is controlled.
    """
    q = normalize(q)
    for v in q:
        if abs(v) > 1e-15:
            return q if v > 0 else -q
    return q


def quaternion_product(p: Sequence[float], q: Sequence[float]) -> np.ndarray:
    """Hamilton product matching ``R(p) @ R(q) == R(p * q)``."""
    pi, px, py, pz = p
    qi, qx, qy, qz = q
    return np.array(
        [
            pi * qi - px * qx - py * qy - pz * qz,
            pi * qx + px * qi + py * qz - pz * qy,
            pi * qy - px * qz + py * qi + pz * qx,
            pi * qz + px * qy - py * qx + pz * qi,
        ]
    )


def su2_from_quaternion(q: Sequence[float]) -> np.ndarray:
    qi, qx, qy, qz = q
    return np.array(
        [[qi - 1j * qz, -qy - 1j * qx], [qy - 1j * qx, qi + 1j * qz]],
        dtype=complex,
    )


def quaternion_from_axis_angle(axis: Sequence[float], angle: float) -> np.ndarray:
    """Quaternion of ``exp(-i angle/2 n.sigma)``."""
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0.0:
        raise ValueError("rotation axis must be nonzero")
    axis = axis / norm
    return np.concatenate([[math.cos(angle / 2)], math.sin(angle / 2) * axis])


def conjugate_quaternion(q: Sequence[float]) -> np.ndarray:
    """Quaternion whose gate is the element-wise complex conjugate of ``R(q)``."""
    qi, qx, qy, qz = q
    return np.array([qi, -qx, qy, -qz], dtype=float)


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def controlled_matrix(q: Sequence[float], negative: bool = False) -> np.ndarray:
    """4x4 controlled-R(q); ``negative`` fires the gate on control state 0."""
    on, off = (P0, P1) if negative else (P1, P0)
    return np.kron(off, I2) + np.kron(on, su2_from_quaternion(q))


def number_preserving_matrix(q: Sequence[float]) -> np.ndarray:
    """U_NP(q): identity on |00>, |11> and R(q) on span{|01>, |10>}."""
    u = np.eye(4, dtype=complex)
    u[1:3, 1:3] = su2_from_quaternion(q)
    return u


def decompose_controlled(q: Sequence[float], phase: float = 0.0):
    """Angles ``(beta, gamma, delta, theta)`` of the two-CNOT circuit for C-R(q).

    Forward relations:
        q_i = cos((b+d)/2) cos(g/2),  q_x = sin((b-d)/2) sin(g/2),
        q_y = cos((b-d)/2) sin(g/2),  q_z = sin((b+d)/2) cos(g/2).
    ``theta`` is the frozen phase gate on the control, passed through unchanged.
    """
    qi, qx, qy, qz = normalize(q)
    gamma = 2.0 * math.atan2(math.hypot(qx, qy), math.hypot(qi, qz))
    s = math.atan2(qz, qi) if math.hypot(qi, qz) > 1e-15 else 0.0
    d = math.atan2(qx, qy) if math.hypot(qx, qy) > 1e-15 else 0.0
    return s + d, gamma, s - d, float(phase)


def quaternion_from_angles(beta: float, gamma: float, delta: float) -> np.ndarray:
    s, d = (beta + delta) / 2, (beta - delta) / 2
    cg, sg = math.cos(gamma / 2), math.sin(gamma / 2)
    return np.array([math.cos(s) * cg, math.sin(d) * sg, math.cos(d) * sg, math.sin(s) * cg])


def decomposition_ops(beta: float, gamma: float, delta: float, theta: float):
    """Native gate list realizing the controlled gate, in time order.

    Each entry is ``(name, role, angle)`` with role ``"c"`` (control) or
    ``"t"`` (target); CNOT entries carry ``None`` as angle.
    """
    return [
        ("RZ", "t", beta),
        ("RY", "t", gamma / 2),
        ("CNOT", None, None),
        ("RY", "t", -gamma / 2),
        ("RZ", "t", -(delta + beta) / 2),
        ("CNOT", None, None),
        ("RZ", "t", (delta - beta) / 2),
        ("RZ", "c", theta),
    ]


def recompose_controlled(beta: float, gamma: float, delta: float, theta: float) -> np.ndarray:
    """Multiply out :func:`decomposition_ops` into a 4x4 matrix."""
    u = np.eye(4, dtype=complex)
    for name, role, angle in decomposition_ops(beta, gamma, delta, theta):
        if name == "CNOT":
            g = CNOT
        else:
            m = rz(angle) if name == "RZ" else ry(angle)
            g = np.kron(m, I2) if role == "c" else np.kron(I2, m)
        u = g @ u
    return u


def phase_on_control(theta: float) -> np.ndarray:
    return np.kron(rz(theta), I2)


# --------------------------------------------------------------------------
# Gate instances

SINGLE = "single"
CONTROLLED = "controlled"
NEG_CONTROLLED = "neg_controlled"
NUMBER_PRESERVING = "number_preserving"
FIXED_CZ = "cz"
FIXED_NCZ = "ncz"
FIXED_CNOT = "cnot"
FIXED_H = "h"
FIXED_RZ = "rz"

PARAMETRIC_KINDS = (SINGLE, CONTROLLED, NEG_CONTROLLED, NUMBER_PRESERVING)
TWO_QUBIT_KINDS = (CONTROLLED, NEG_CONTROLLED, NUMBER_PRESERVING, FIXED_CZ, FIXED_NCZ, FIXED_CNOT)


@dataclass
class GateInstance:
    """One gate of a circuit.

    ``phase`` is the frozen control-qubit Rz angle carried by (negatively)
    controlled gates, and the rotation angle of ``FIXED_RZ`` gates.
    """

    kind: str
    qubits: tuple
    params: Optional[np.ndarray] = None
    trainable: bool = True
    phase: float = 0.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.qubits = tuple(int(k) for k in self.qubits)
        arity = 2 if self.kind in TWO_QUBIT_KINDS else 1
        if len(self.qubits) != arity:
            raise ValueError(f"{self.kind} gate needs {arity} qubit(s), got {self.qubits}")
        if self.kind in PARAMETRIC_KINDS:
            self.params = normalize(IDENTITY_Q if self.params is None else self.params)
        else:
            self.params = None
            self.trainable = False

    def copy(self) -> "GateInstance":
        return GateInstance(
            self.kind,
            self.qubits,
            None if self.params is None else self.params.copy(),
            self.trainable,
            self.phase,
            dict(self.extra),
        )

    def matrix(self) -> np.ndarray:
        key = (None if self.params is None else self.params.tobytes(), self.phase, self.kind)
        cached = self.extra.get("_matrix")
        if cached is not None and cached[0] == key:
            return cached[1]
        u = self._build_matrix()
        self.extra["_matrix"] = (key, u)
        return u

    def _build_matrix(self) -> np.ndarray:
        const, basis = gate_basis(self)
        if basis is None:
            return const
        u = np.tensordot(self.params, basis, axes=1)
        return u if const is None else u + const


def gate_basis(gate: GateInstance):
    """Affine expansion ``matrix = const + sum_mu q_mu basis[mu]``.

    Returns ``(const, basis)``; ``const`` may be ``None`` (purely linear) and
    ``basis`` is ``None`` for fixed gates, where ``const`` is the full matrix.
    """
    kind = gate.kind
    if kind == SINGLE:
        return None, SIGMA_EXT
    if kind in (CONTROLLED, NEG_CONTROLLED):
        on, off = (P0, P1) if kind == NEG_CONTROLLED else (P1, P0)
        ph = phase_on_control(gate.phase) if gate.phase else None
        const = np.kron(off, I2)
        basis = np.stack([np.kron(on, s) for s in SIGMA_EXT])
        if ph is not None:
            const = ph @ const
            basis = np.einsum("ij,mjk->mik", ph, basis)
        return const, basis
    if kind == NUMBER_PRESERVING:
        const = np.zeros((4, 4), dtype=complex)
        const[0, 0] = const[3, 3] = 1.0
        basis = np.zeros((4, 4, 4), dtype=complex)
        basis[:, 1:3, 1:3] = SIGMA_EXT
        return const, basis
    if kind == FIXED_CZ:
        return CZ, None
    if kind == FIXED_NCZ:
        return NCZ, None
    if kind == FIXED_CNOT:
        return CNOT, None
    if kind == FIXED_H:
        return H, None
    if kind == FIXED_RZ:
        return rz(gate.phase), None
    raise ValueError(f"unknown gate kind {kind!r}")


def conjugate_gate(gate: GateInstance) -> GateInstance:
    """Gate whose matrix is the element-wise conjugate of ``gate.matrix()``."""
    g = gate.copy()
    if g.params is not None:
        g.params = conjugate_quaternion(g.params)
    if g.kind in (CONTROLLED, NEG_CONTROLLED, FIXED_RZ):
        g.phase = -g.phase
    return g


def is_unitary(u: np.ndarray, atol: float = 1e-10) -> bool:
    u = np.asarray(u)
    return np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])) < atol
