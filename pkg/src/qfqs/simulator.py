"""Dense statevector engine.

States are plain complex numpy arrays of length ``2**n``. Qubit ``k`` is bit
``k`` of the amplitude index (qubit 0 least significant). Every routine also
accepts a batch of states stacked along leading axes, which the tomography
code uses to push several basis vectors through a circuit at once.

For a k-qubit matrix applied to ``qubits``, ``qubits[0]`` is the most
significant bit of the matrix index.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

MAX_QUBITS = 24


def n_qubits_of(state: np.ndarray) -> int:
    dim = state.shape[-1]
    n = dim.bit_length() - 1
    if dim != 1 << n:
        raise ValueError(f"state length {dim} is not a power of two")
    return n


def zero_state(n: int) -> np.ndarray:
    if not 0 < n <= MAX_QUBITS:
        raise ValueError(f"unsupported qubit count {n}")
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = 1.0
    return psi


def basis_state(n: int, index: int) -> np.ndarray:
    psi = np.zeros(1 << n, dtype=complex)
    psi[index] = 1.0
    return psi


def norm_error(state: np.ndarray) -> float:
    return abs(1.0 - float(np.vdot(state, state).real))


def _check_qubits(qubits: Sequence[int], n: int):
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"repeated qubit in {tuple(qubits)}")
    for q in qubits:
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} out of range for {n}-qubit state")


def _apply_matrix(state: np.ndarray, matrix: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    n = n_qubits_of(state)
    k = len(qubits)
    batch = state.shape[:-1]
    nb = len(batch)
    psi = state.reshape(batch + (2,) * n)
    # numpy axis nb + j holds qubit n-1-j
    axes = [nb + n - 1 - q for q in qubits]
    m = np.asarray(matrix).reshape((2,) * (2 * k))
    out = np.tensordot(m, psi, axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return out.reshape(state.shape)


def apply_gate(
    state: np.ndarray,
    gate_matrix: np.ndarray,
    qubits: Sequence[int],
    validate: bool = False,
) -> np.ndarray:
    """Apply a 2x2 or 4x4 matrix to ``qubits`` and return the new state."""
    n = n_qubits_of(state)
    qubits = list(qubits)
    _check_qubits(qubits, n)
    gate_matrix = np.asarray(gate_matrix)
    if gate_matrix.shape != (1 << len(qubits),) * 2:
        raise ValueError(f"matrix shape {gate_matrix.shape} does not match {len(qubits)} qubit(s)")
    if validate:
        d = gate_matrix.shape[0]
        if np.linalg.norm(gate_matrix.conj().T @ gate_matrix - np.eye(d)) > 1e-10:
            raise ValueError("gate matrix is not unitary")
    return _apply_matrix(state, gate_matrix, qubits)


def apply_dense(
    state: np.ndarray, u: np.ndarray, qubits: Optional[Sequence[int]] = None
) -> np.ndarray:
    """Apply a dense ``2**k x 2**k`` matrix; ``qubits=None`` means the whole register
    in natural index order."""
    n = n_qubits_of(state)
    u = np.asarray(u)
    if qubits is None:
        if u.shape != (1 << n,) * 2:
            raise ValueError(f"dense matrix {u.shape} does not match {n}-qubit state")
        return state @ u.T
    qubits = list(qubits)
    _check_qubits(qubits, n)
    if u.shape != (1 << len(qubits),) * 2:
        raise ValueError(f"dense matrix {u.shape} does not match {len(qubits)} qubit(s)")
    return _apply_matrix(state, u, qubits)


def expectation(state: np.ndarray, observable) -> float:
    """``<state|observable|state>`` for a :class:`~qfqs.hamiltonian.PauliSum`."""
    n = n_qubits_of(state)
    if observable.n_qubits != n:
        raise ValueError(f"observable on {observable.n_qubits} qubits, state on {n}")
    val = np.vdot(state, observable.apply(state))
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ValueError(f"observable expectation has imaginary part {val.imag}")
    return float(val.real)


def sampled_expectation(state: np.ndarray, observable, shots: int, rng_seed=None) -> float:
    """Shot-noise estimate: each Pauli term is measured ``shots`` times.

    ``rng_seed`` may be an int or a ``numpy.random.Generator``.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    n = n_qubits_of(state)
    if observable.n_qubits != n:
        raise ValueError(f"observable on {observable.n_qubits} qubits, state on {n}")
    rng = np.random.default_rng(rng_seed)
    total = 0.0
    for coeff, string in observable.terms:
        if set(string) == {"I"}:
            total += coeff
            continue
        mean = observable.term_expectation(state, string)
        p_plus = min(1.0, max(0.0, 0.5 * (1.0 + mean)))
        k = rng.binomial(shots, p_plus)
        total += coeff * (2.0 * k - shots) / shots
    return total
