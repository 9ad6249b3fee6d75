"""Cost backends and per-gate cost evaluators.

Every cost here has the form ``constant + sign * <psi|O|psi>`` for some
Hermitian ``O`` on the register the circuit runs in, where ``psi`` is the
final register state. VQE uses a Pauli sum; fidelity and the Hilbert-Schmidt
tests use projectors. The compilation costs run the circuit, conjugated, on
the B half of a doubled ``2n``-qubit register (A = qubits ``0..n-1``, B =
``n..2n-1``; Bell pairs are ``(j, n+j)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import List, Optional, Sequence

import numpy as np

from . import gates as g
from .ansatz import Circuit, run_circuit
from .hamiltonian import PauliSum
from .simulator import apply_dense, apply_gate, n_qubits_of, sampled_expectation, zero_state

BELL_PROJECTOR = 0.5 * np.array(
    [[1, 0, 0, 1], [0, 0, 0, 0], [0, 0, 0, 0], [1, 0, 0, 1]], dtype=complex
)


class Cost:
    """Base class. Subclasses set ``constant``/``sign`` and the observable."""

    constant = 0.0
    sign = 1.0
    conjugate = False
    offset = 0

    def __init__(self, n_qubits: int, register_qubits: Optional[int] = None):
        self.n_qubits = n_qubits
        self.register_qubits = register_qubits or n_qubits

    def input_state(self) -> np.ndarray:
        return zero_state(self.register_qubits)

    def apply_observable(self, states: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def expectation(self, state: np.ndarray) -> float:
        return float(np.vdot(state, self.apply_observable(state)).real)

    def value(self, state: np.ndarray) -> float:
        return self.constant + self.sign * self.expectation(state)

    def sample(self, state: np.ndarray, shots: int, rng) -> float:
        raise NotImplementedError(f"{type(self).__name__} has no shot mode")

    def cost_at(self, sweep: int) -> "Cost":
        return self

    def embed(self, matrix: np.ndarray, qubits: Sequence[int]):
        """Map a circuit gate onto the register the cost runs in."""
        if self.conjugate:
            matrix = np.conj(matrix)
        return matrix, [q + self.offset for q in qubits]

    def run(self, circuit: Circuit) -> np.ndarray:
        if circuit.n_qubits != self.n_qubits:
            raise ValueError(f"circuit on {circuit.n_qubits} qubits, cost expects {self.n_qubits}")
        return run_circuit(circuit, self.input_state(), conjugate=self.conjugate, offset=self.offset)

    def __call__(self, circuit: Circuit) -> float:
        return self.value(self.run(circuit))


def _bernoulli_mean(p: float, shots: int, rng) -> float:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = min(1.0, max(0.0, p))
    return rng.binomial(shots, p) / shots


class VqeCost(Cost):
    """Expectation of a Pauli sum on the circuit output from |0...0>."""

    def __init__(self, hamiltonian: PauliSum):
        super().__init__(hamiltonian.n_qubits)
        self.hamiltonian = hamiltonian

    def apply_observable(self, states):
        return self.hamiltonian.apply(states)

    def sample(self, state, shots, rng):
        return sampled_expectation(state, self.hamiltonian, shots, rng)


class FidelityCost(Cost):
    """``1 - |<ref|psi>|^2``."""

    constant = 1.0
    sign = -1.0

    def __init__(self, reference: np.ndarray):
        reference = np.asarray(reference, dtype=complex)
        super().__init__(n_qubits_of(reference))
        self.reference = reference / np.linalg.norm(reference)

    def apply_observable(self, states):
        overlap = states @ self.reference.conj()
        return np.multiply.outer(overlap, self.reference)

    def sample(self, state, shots, rng):
        return 1.0 - _bernoulli_mean(abs(np.vdot(self.reference, state)) ** 2, shots, rng)


# --------------------------------------------------------------------------
# subspaces and Dicke states


def bits_to_index(bits: str) -> int:
    """Character ``k`` of the bitstring is qubit ``k``."""
    return sum(1 << k for k, b in enumerate(bits) if b == "1")


def index_to_bits(index: int, n: int) -> str:
    return "".join("1" if (index >> k) & 1 else "0" for k in range(n))


@dataclass(frozen=True)
class SubspaceBasis:
    n: int
    bitstrings: tuple

    def __post_init__(self):
        bits = tuple(self.bitstrings)
        object.__setattr__(self, "bitstrings", bits)
        if not bits:
            raise ValueError("subspace basis must be nonempty")
        if len(set(bits)) != len(bits):
            raise ValueError("subspace basis has repeated bitstrings")
        for b in bits:
            if len(b) != self.n or set(b) - {"0", "1"}:
                raise ValueError(f"bad bitstring {b!r} for n={self.n}")

    def __len__(self):
        return len(self.bitstrings)

    def indices(self) -> List[int]:
        return [bits_to_index(b) for b in self.bitstrings]

    def state(self) -> np.ndarray:
        psi = np.zeros(1 << self.n, dtype=complex)
        psi[self.indices()] = 1.0 / math.sqrt(len(self))
        return psi


def full_basis(n: int) -> SubspaceBasis:
    return SubspaceBasis(n, tuple(index_to_bits(i, n) for i in range(1 << n)))


def hamming_strings(n: int, k: int) -> List[str]:
    if not 0 <= k <= n:
        raise ValueError(f"Hamming weight {k} out of range for n={n}")
    out = []
    for ones in combinations(range(n), k):
        out.append("".join("1" if i in ones else "0" for i in range(n)))
    return out


def number_basis(n: int, k: int) -> SubspaceBasis:
    return SubspaceBasis(n, tuple(hamming_strings(n, k)))


def dicke_basis(n_orbitals_per_spin: int, n_alpha: int, n_beta: int) -> SubspaceBasis:
    """Support of ``|D^m_{N_alpha}> (x) |D^m_{N_beta}>``; alpha qubits come first."""
    m = n_orbitals_per_spin
    strings = [a + b for a in hamming_strings(m, n_alpha) for b in hamming_strings(m, n_beta)]
    return SubspaceBasis(2 * m, tuple(strings))


def dicke_state(n: int, k: int) -> np.ndarray:
    if not 0 <= k <= n:
        raise ValueError(f"Dicke weight {k} out of range for n={n}")
    return number_basis(n, k).state()


def load_basis(path, n: Optional[int] = None) -> SubspaceBasis:
    from pathlib import Path

    lines = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    bits = [ln for ln in lines if ln]
    if not bits:
        raise ValueError(f"{path}: no bitstrings")
    return SubspaceBasis(n or len(bits[0]), tuple(bits))


def load_reference_state(path) -> np.ndarray:
    """Read ``index re im`` lines into a normalized statevector."""
    from pathlib import Path

    entries = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'index re im'")
        entries.append((int(parts[0]), float(parts[1]) + 1j * float(parts[2])))
    if not entries:
        raise ValueError(f"{path}: no amplitudes")
    dim = 1
    while dim <= max(i for i, _ in entries):
        dim <<= 1
    psi = np.zeros(max(dim, 2), dtype=complex)
    for i, a in entries:
        psi[i] += a
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError(f"{path}: zero state")
    return psi / norm


# --------------------------------------------------------------------------
# compilation costs


class _DoubledRegisterCost(Cost):
    conjugate = True

    def __init__(self, target: np.ndarray, basis: Optional[SubspaceBasis] = None):
        target = np.asarray(target, dtype=complex)
        dim = target.shape[0]
        n = dim.bit_length() - 1
        if target.shape != (dim, dim) or dim != 1 << n:
            raise ValueError("target must be a square matrix of power-of-two size")
        super().__init__(n, 2 * n)
        self.offset = n
        self.target = target
        self.basis = basis if basis is not None else full_basis(n)
        if self.basis.n != n:
            raise ValueError(f"basis on {self.basis.n} qubits, target on {n}")
        idx = np.array(self.basis.indices())
        self.reference = np.zeros(1 << (2 * n), dtype=complex)
        self.reference[idx + (idx << n)] = 1.0 / math.sqrt(len(idx))
        self._input = apply_dense(self.reference, target, list(range(n - 1, -1, -1)))

    def input_state(self):
        return self._input.copy()


class HstCost(_DoubledRegisterCost):
    """Global cost ``1 - |<Phi~|(U (x) V*)|Phi~>|^2``."""

    constant = 1.0
    sign = -1.0

    def apply_observable(self, states):
        overlap = states @ self.reference.conj()
        return np.multiply.outer(overlap, self.reference)

    def sample(self, state, shots, rng):
        return 1.0 - _bernoulli_mean(abs(np.vdot(self.reference, state)) ** 2, shots, rng)


class LhstCost(_DoubledRegisterCost):
    """Local cost ``1 - mean_j F_e^(j)`` with Bell projectors on ``(j, n+j)``."""

    constant = 1.0
    sign = -1.0

    def apply_observable(self, states):
        n = self.n_qubits
        out = np.zeros_like(states)
        for j in range(n):
            out += apply_gate(states, BELL_PROJECTOR, [j, n + j])
        return out / n

    def entanglement_fidelities(self, state) -> np.ndarray:
        n = self.n_qubits
        return np.array(
            [np.vdot(state, apply_gate(state, BELL_PROJECTOR, [j, n + j])).real for j in range(n)]
        )

    def sample(self, state, shots, rng):
        fids = self.entanglement_fidelities(state)
        return 1.0 - float(np.mean([_bernoulli_mean(f, shots, rng) for f in fids]))


class CompileCost:
    """Local cost for the first ``switch`` sweeps, global cost afterwards."""

    def __init__(self, target: np.ndarray, basis: Optional[SubspaceBasis] = None, switch: float = 5):
        self.local = LhstCost(target, basis)
        self.global_ = HstCost(target, basis)
        self.switch = switch
        self.n_qubits = self.local.n_qubits

    def cost_at(self, sweep: int) -> Cost:
        return self.local if sweep < self.switch else self.global_

    def __call__(self, circuit: Circuit, sweep: int = 0) -> float:
        return self.cost_at(sweep)(circuit)


def vqe_cost(circuit: Circuit, hamiltonian: PauliSum) -> float:
    return VqeCost(hamiltonian)(circuit)


def fidelity_cost(circuit: Circuit, reference: np.ndarray) -> float:
    return FidelityCost(reference)(circuit)


def hst_global_cost(circuit: Circuit, target: np.ndarray, basis: Optional[SubspaceBasis] = None) -> float:
    return HstCost(target, basis)(circuit)


def lhst_local_cost(circuit: Circuit, target: np.ndarray, basis: Optional[SubspaceBasis] = None) -> float:
    return LhstCost(target, basis)(circuit)


def compile_cost(circuit: Circuit, spec: CompileCost, sweep: int) -> float:
    return spec(circuit, sweep)


def trace_formula_cost(v: np.ndarray, u: np.ndarray, basis: Optional[SubspaceBasis] = None) -> float:
    """``1 - |tr(P V^dag P U P)|^2 / |W|^2`` from dense matrices, ``P`` the projector on ``W``."""
    if basis is None:
        tr = np.trace(v.conj().T @ u)
        size = u.shape[0]
    else:
        idx = basis.indices()
        tr = np.sum(v[np.ix_(idx, idx)].conj() * u[np.ix_(idx, idx)])
        size = len(idx)
    return float(1.0 - abs(tr) ** 2 / size**2)


def dynamics_infidelity(compiled, hamiltonian: PauliSum, t_max: float, dt: float, psi_ini: np.ndarray):
    """Series of ``(t, 1 - F(t))`` for repeated application of the compiled step.

    ``compiled`` is a :class:`Circuit` or a dense unitary approximating
    ``exp(-i H dt)``.
    """
    from .hamiltonian import time_evolution

    steps_f = t_max / dt
    steps = int(round(steps_f))
    if abs(steps - steps_f) > 1e-9 * max(1.0, steps_f) or steps < 0:
        raise ValueError(f"t_max={t_max} is not an integer multiple of dt={dt}")
    exact_step = time_evolution(hamiltonian, dt)
    if isinstance(compiled, Circuit):
        step_approx = lambda psi: run_circuit(compiled, psi)  # noqa: E731
    else:
        v = np.asarray(compiled)
        step_approx = lambda psi: v @ psi  # noqa: E731
    psi_ini = np.asarray(psi_ini, dtype=complex)
    exact = psi_ini.copy()
    approx = psi_ini.copy()
    out = [(0.0, 0.0)]
    for k in range(1, steps + 1):
        exact = exact_step @ exact
        approx = step_approx(approx)
        fid = abs(np.vdot(approx, exact)) ** 2
        out.append((k * dt, max(0.0, 1.0 - fid)))
    return out


# --------------------------------------------------------------------------
# per-gate evaluators


class GateEnvironment:
    """Exact cost of a circuit as a function of one update unit's parameters.

    The register state after the unit is linear in the unit's coefficient
    vector (``q``; ``(1, q)`` with a constant part; ``(p, q)`` for a pair), so
    the state is pushed through the rest of the circuit once per basis
    direction. Calling the environment with new parameters then costs a small
    quadratic form instead of a full simulation. ``evaluations`` counts calls.
    """

    def __init__(self, circuit: Circuit, unit: Sequence[int], cost: Cost):
        if circuit.n_qubits != cost.n_qubits:
            raise ValueError(f"circuit on {circuit.n_qubits} qubits, cost expects {cost.n_qubits}")
        gates = circuit.gates
        first, last = unit[0], unit[-1]
        state = cost.input_state()
        for gate in gates[:first]:
            m, qs = cost.embed(gate.matrix(), gate.qubits)
            state = apply_gate(state, m, qs)
        if len(unit) == 1:
            gate = gates[first]
            const, basis = g.gate_basis(gate)
            if basis is None:
                raise ValueError(f"gate {first} has no parameters")
            mats = list(basis) if const is None else [const] + list(basis)
            self.has_constant = const is not None
            self.neg_first = False
        else:
            a, b = gates[first], gates[last]
            if {a.kind, b.kind} != {g.CONTROLLED, g.NEG_CONTROLLED} or a.qubits != b.qubits or last != first + 1:
                raise ValueError("pair unit must be adjacent controlled/negative-controlled gates on one qubit pair")
            ph = g.phase_on_control(a.phase + b.phase)
            mats = [ph @ np.kron(g.P0, s) for s in g.SIGMA_EXT] + [ph @ np.kron(g.P1, s) for s in g.SIGMA_EXT]
            self.has_constant = False
            gate = a
        cols = []
        for m in mats:
            mm, qs = cost.embed(m, gate.qubits)
            cols.append(apply_gate(state, mm, qs))
        cols = np.array(cols)
        for gt in gates[last + 1:]:
            m, qs = cost.embed(gt.matrix(), gt.qubits)
            cols = apply_gate(cols, m, qs)
        self.cols = cols
        self.cost = cost
        gram = cols.conj() @ cost.apply_observable(cols).T
        self.gram = 0.5 * (gram + gram.conj().T).real
        self.evaluations = 0
        self.shots = None
        self.rng = None

    def coefficients(self, *params) -> np.ndarray:
        v = np.concatenate([np.asarray(p, dtype=float) for p in params])
        if self.has_constant:
            v = np.concatenate([[1.0], v])
        if v.shape[0] != self.cols.shape[0]:
            raise ValueError(f"expected {self.cols.shape[0] - self.has_constant} parameters, got {v.shape[0] - self.has_constant}")
        return v

    def state(self, *params) -> np.ndarray:
        return self.coefficients(*params) @ self.cols

    def exact(self, *params) -> float:
        v = self.coefficients(*params)
        return float(self.cost.constant + self.cost.sign * (v @ self.gram @ v))

    def __call__(self, *params) -> float:
        self.evaluations += 1
        if self.shots is None:
            return self.exact(*params)
        return self.cost.sample(self.state(*params), self.shots, self.rng)


def full_evaluator(circuit: Circuit, unit: Sequence[int], cost: Cost):
    """Reference evaluator that re-simulates the whole circuit for every query."""
    base = circuit.copy()

    def evaluate(*params):
        c = base.copy()
        for idx, p in zip(unit, params):
            c.gates[idx].params = g.normalize(p)
        return cost(c)

    return evaluate
