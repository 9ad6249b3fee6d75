"""Pauli-sum observables and dense reference operators.

A Pauli string is written with one letter per qubit, character ``k`` acting
on qubit ``k``: ``"ZIX"`` is Z on qubit 0 and X on qubit 2.
"""

from __future__ import annotations

import math
import re
from pathlib import Path
from typing import Iterable, List, Tuple

import numpy as np

DENSE_LIMIT = 12
EVOLUTION_LIMIT = 6

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_LINE = re.compile(r"^\s*(\S+)\s+([IXYZ]+)\s*$")


class PauliSum:
    """Real-weighted sum of Pauli strings; duplicates merge, zeros drop."""

    def __init__(self, n_qubits: int, terms: Iterable[Tuple[float, str]] = ()):
        if n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        self.n_qubits = int(n_qubits)
        merged: dict = {}
        for coeff, string in terms:
            string = string.upper()
            if len(string) != self.n_qubits:
                raise ValueError(f"Pauli string {string!r} has length {len(string)}, expected {self.n_qubits}")
            if set(string) - set("IXYZ"):
                raise ValueError(f"bad Pauli string {string!r}")
            merged[string] = merged.get(string, 0.0) + float(coeff)
        self.terms: List[Tuple[float, str]] = [(c, s) for s, c in merged.items() if c != 0.0]
        self._groups = None

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        body = " + ".join(f"{c:g}*{s}" for c, s in self.terms[:6])
        more = " + ..." if len(self.terms) > 6 else ""
        return f"PauliSum({self.n_qubits}, {body}{more})"

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit-count mismatch")
        return PauliSum(self.n_qubits, self.terms + other.terms)

    def scaled(self, factor: float) -> "PauliSum":
        return PauliSum(self.n_qubits, [(factor * c, s) for c, s in self.terms])

    def norm_bound(self) -> float:
        return sum(abs(c) for c, _ in self.terms)

    # -- fast action on statevectors -------------------------------------

    @staticmethod
    def _flip_and_phase(string: str, n: int):
        idx = np.arange(1 << n)
        mask = 0
        phase = np.ones(1 << n, dtype=complex)
        for k, letter in enumerate(string):
            bit = (idx >> k) & 1
            if letter in "XY":
                mask |= 1 << k
            if letter in "YZ":
                phase *= 1 - 2 * bit
            if letter == "Y":
                phase *= 1j
        return mask, phase

    def _build_groups(self):
        # terms sharing a bit-flip mask collapse into one diagonal
        n = self.n_qubits
        groups: dict = {}
        for coeff, string in self.terms:
            mask, phase = self._flip_and_phase(string, n)
            if mask in groups:
                groups[mask] += coeff * phase
            else:
                groups[mask] = coeff * phase
        idx = np.arange(1 << n)
        self._groups = [(idx ^ mask, diag) for mask, diag in groups.items()]

    def apply(self, states: np.ndarray) -> np.ndarray:
        """``H @ psi`` for a state or a stack of states (last axis = amplitudes)."""
        if self._groups is None:
            self._build_groups()
        out = np.zeros_like(states, dtype=complex)
        for perm, diag in self._groups:
            out += (diag * states)[..., perm]
        return out

    def term_expectation(self, state: np.ndarray, string: str) -> float:
        mask, phase = self._flip_and_phase(string, self.n_qubits)
        idx = np.arange(len(state)) ^ mask
        return float(np.vdot(state[idx], phase * state).real)


def ising_hamiltonian(n: int, J: float = 1.0, h: float = 1 / math.sqrt(2), periodic: bool = True) -> PauliSum:
    """Mixed-field Ising chain ``J sum Z_i Z_{i+1} + h sum (X_i + Z_i)``.

    Fields act on all ``n`` sites. For ``n == 2`` with periodic wrapping the two
    bonds coincide and merge into a single ``2J`` term.
    """
    if n < 2:
        raise ValueError("Ising chain needs at least two sites")
    terms = []
    bonds = [(i, i + 1) for i in range(n - 1)]
    if periodic:
        bonds.append((n - 1, 0))
    for i, j in bonds:
        s = ["I"] * n
        s[i] = s[j] = "Z"
        terms.append((J, "".join(s)))
    for letter in "XZ":
        for i in range(n):
            s = ["I"] * n
            s[i] = letter
            terms.append((h, "".join(s)))
    return PauliSum(n, terms)


def parse_pauli_sum(text: str) -> PauliSum:
    """Parse ``<coeff> <string>`` lines; ``#`` starts a comment."""
    terms = []
    n = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line.upper())
        if m is None:
            raise ValueError(f"line {lineno}: expected '<coeff> <pauli string>', got {raw.strip()!r}")
        try:
            coeff = float(m.group(1))
        except ValueError:
            raise ValueError(f"line {lineno}: bad coefficient {m.group(1)!r}") from None
        string = m.group(2)
        if n is None:
            n = len(string)
        elif len(string) != n:
            raise ValueError(f"line {lineno}: string length {len(string)} differs from {n}")
        terms.append((coeff, string))
    if n is None:
        raise ValueError("no Pauli terms found")
    return PauliSum(n, terms)


def load_pauli_sum(path) -> PauliSum:
    return parse_pauli_sum(Path(path).read_text(encoding="utf-8"))


def format_pauli_sum(h: PauliSum) -> str:
    return "".join(f"{c!r} {s}\n" for c, s in h.terms)


def pauli_matrix(string: str) -> np.ndarray:
    """Dense matrix of one Pauli string (qubit 0 is the rightmost Kronecker factor)."""
    out = np.array([[1.0 + 0j]])
    for letter in reversed(string):
        out = np.kron(out, _PAULI[letter])
    return out


def dense_matrix(h: PauliSum) -> np.ndarray:
    if h.n_qubits > DENSE_LIMIT:
        raise ValueError(f"dense matrix limited to {DENSE_LIMIT} qubits")
    dim = 1 << h.n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    eye = np.eye(dim, dtype=complex)
    # column j of H is H|j>, built from the fast action to avoid kron blowup
    out[:, :] = h.apply(eye).T
    return out


def ground_energy(h: PauliSum) -> float:
    return float(np.linalg.eigvalsh(dense_matrix(h))[0])


def time_evolution(h: PauliSum, t: float) -> np.ndarray:
    """exp(-i H t) with hbar = 1."""
    if h.n_qubits > EVOLUTION_LIMIT:
        raise ValueError(f"time evolution limited to {EVOLUTION_LIMIT} qubits")
    w, v = np.linalg.eigh(dense_matrix(h))
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def trotter_product(h: PauliSum, t: float, steps: int) -> np.ndarray:
    """First-order product ``[prod_k exp(-i c_k P_k t/steps)]**steps``.

    The per-step product is written left to right in stored term order, so the
    last term acts first on a state.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    dim = 1 << h.n_qubits
    step = np.eye(dim, dtype=complex)
    dt = t / steps
    for coeff, string in h.terms:
        p = pauli_matrix(string)
        term = math.cos(coeff * dt) * np.eye(dim) - 1j * math.sin(coeff * dt) * p
        step = step @ term
    return np.linalg.matrix_power(step, steps)
