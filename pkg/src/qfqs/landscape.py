"""Cost-landscape tomography.

The cost of a circuit is quadratic in the quaternion of any one gate. For a
controlled gate it reads ``q^T J q + 2 a^T q + b``; for a negative-controlled /
controlled pair sharing a control it reads ``p^T J p + q^T L q + 2 p^T K q``;
for an uncontrolled gate just ``q^T J q``. The coefficients are recovered
exactly from a fixed set of cost evaluations by a linear solve.

Coefficient vectors follow the embedding order: diagonal entries
``(ii, xx, yy, zz)``, then off-diagonals ``(ix, iy, iz, xy, xz, yz)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

# unit-length is imposed on each row (or each half of a pair row) on load
DEFAULT_Q = np.array(
    [
        [1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1],
        [1, 1, 0, 0], [1, 0, 1, 0], [1, 0, 0, 1], [0, 1, 1, 0], [0, 1, 0, 1], [0, 0, 1, 1],
        [1, 1, 1, 0], [1, 1, 0, 1], [1, 0, 1, 1], [0, 1, 1, 1],
    ],
    dtype=float,
)

_P_HALF = (
    [[1, 0, 0, 0]] * 4 + [[0, 1, 0, 0]] * 4 + [[0, 0, 1, 0]] * 4 + [[0, 0, 0, 1]] * 4
    + [[1, 0, 0, 0]] * 9
    + [[1, 1, 0, 0], [1, -1, 0, 0], [1, 0, 1, 0], [1, 0, -1, 0], [1, 0, 0, 1], [1, 0, 0, -1],
       [0, 1, 1, 0], [0, 1, 0, 1], [0, 0, 1, 1], [1, 1, 1, 1]]
)
_Q_HALF = (
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]] * 4
    + [[1, 1, 0, 0], [1, -1, 0, 0], [1, 0, 1, 0], [1, 0, -1, 0], [0, 1, 1, 0], [0, 1, -1, 0],
       [0, 1, 0, 1], [0, 0, 1, 1], [0, 0, 1, -1]]
    + [[1, 0, 0, 0]] * 9 + [[1, 1, 1, 1]]
)
DEFAULT_Q_PAIR = np.hstack([np.array(_P_HALF, dtype=float), np.array(_Q_HALF, dtype=float)])

KERNEL_CONTROLLED = np.array([-1.0] * 4 + [0.0] * 10 + [1.0])
KERNEL_PAIR = np.zeros(36)
KERNEL_PAIR[0:4] = -0.25
KERNEL_PAIR[10:14] = 0.25

N_SINGLE = 10
N_CONTROLLED = 14
N_PAIR = 35

_IU = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
RESIDUAL_TOL = 1e-8


class TomographyError(RuntimeError):
    """Fitted model does not reproduce the measured costs."""


def _quadratics(q: np.ndarray) -> np.ndarray:
    qi, qx, qy, qz = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    return np.stack(
        [qi * qi, qx * qx, qy * qy, qz * qz,
         2 * qi * qx, 2 * qi * qy, 2 * qi * qz, 2 * qx * qy, 2 * qx * qz, 2 * qy * qz],
        axis=-1,
    )


def embed_single(q) -> np.ndarray:
    """10 quadratic monomials of ``q`` (works on stacks of quaternions)."""
    return _quadratics(q)


def embed_controlled(q) -> np.ndarray:
    """15-vector ``(quadratics, 2q, 1)``."""
    q = np.asarray(q, dtype=float)
    ones = np.ones(q.shape[:-1] + (1,))
    return np.concatenate([_quadratics(q), 2 * q, ones], axis=-1)


def embed_pair(p, q) -> np.ndarray:
    """36-vector: p quadratics, q quadratics, then ``2 p_mu q_nu`` row-major."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    cross = 2 * (p[..., :, None] * q[..., None, :]).reshape(p.shape[:-1] + (16,))
    return np.concatenate([_quadratics(p), _quadratics(q), cross], axis=-1)


def _sym_from(coeffs: np.ndarray) -> np.ndarray:
    j = np.diag(coeffs[:4]).astype(float)
    for (r, c), v in zip(_IU, coeffs[4:10]):
        j[r, c] = j[c, r] = v
    return j


def _normalize_rows(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("configuration row has a zero quaternion")
    return rows / norms


@dataclass
class ParameterConfiguration:
    """Evaluation points for tomography; rows are normalized on construction."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] not in (4, 8):
            raise ValueError("configuration rows must have 4 or 8 columns")
        if rows.shape[1] == 4:
            if rows.shape[0] < N_CONTROLLED:
                raise ValueError(f"controlled configuration needs {N_CONTROLLED} rows, got {rows.shape[0]}")
            rows = _normalize_rows(rows)
        else:
            if rows.shape[0] != N_PAIR:
                raise ValueError(f"pair configuration needs {N_PAIR} rows, got {rows.shape[0]}")
            rows = np.hstack([_normalize_rows(rows[:, :4]), _normalize_rows(rows[:, 4:])])
        self.rows = rows
        self.design = self._design()
        cond = np.linalg.cond(self.design)
        if not np.isfinite(cond) or cond > 1e12:
            raise ValueError(f"configuration design matrix is singular (condition number {cond:.3g})")
        self.condition = float(cond)

    @property
    def is_pair(self) -> bool:
        return self.rows.shape[1] == 8

    def _design(self) -> np.ndarray:
        if self.is_pair:
            return np.vstack([embed_pair(self.rows[:, :4], self.rows[:, 4:]), KERNEL_PAIR])
        return np.vstack([embed_controlled(self.rows[:N_CONTROLLED]), KERNEL_CONTROLLED])

    @classmethod
    def load(cls, path) -> "ParameterConfiguration":
        rows = []
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                rows.append([float(x) for x in line.replace(",", " ").split()])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric entry") from None
        if len({len(r) for r in rows}) != 1:
            raise ValueError(f"{path}: rows have differing lengths")
        return cls(np.array(rows))


_DEFAULTS: dict = {}


def default_configuration(pair: bool = False) -> ParameterConfiguration:
    key = "pair" if pair else "controlled"
    if key not in _DEFAULTS:
        _DEFAULTS[key] = ParameterConfiguration(DEFAULT_Q_PAIR if pair else DEFAULT_Q)
    return _DEFAULTS[key]


# --------------------------------------------------------------------------
# models


@dataclass
class SingleModel:
    J: np.ndarray

    def predict(self, q) -> float:
        q = np.asarray(q, dtype=float)
        return float(q @ self.J @ q)


@dataclass
class ControlledModel:
    J: np.ndarray
    a: np.ndarray
    b: float

    def predict(self, q) -> float:
        q = np.asarray(q, dtype=float)
        return float(q @ self.J @ q + 2 * self.a @ q + self.b)


@dataclass
class PairModel:
    J: np.ndarray
    K: np.ndarray
    L: np.ndarray

    def predict(self, p, q) -> float:
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        return float(p @ self.J @ p + q @ self.L @ q + 2 * p @ self.K @ q)

    def p_slice(self, q) -> ControlledModel:
        """Model in ``p`` with ``q`` held fixed."""
        q = np.asarray(q, dtype=float)
        return ControlledModel(self.J, self.K @ q, float(q @ self.L @ q))

    def q_slice(self, p) -> ControlledModel:
        p = np.asarray(p, dtype=float)
        return ControlledModel(self.L, self.K.T @ p, float(p @ self.J @ p))


def _check_residual(design, coeffs, measured, check):
    if not check:
        return
    fitted = design @ coeffs
    scale = 1.0 + float(np.max(np.abs(measured)))
    err = float(np.max(np.abs(fitted - measured)))
    if not err <= RESIDUAL_TOL * scale:
        raise TomographyError(f"tomography residual {err:.3g} exceeds tolerance")


def estimate_single(evaluator: Callable, config: Optional[ParameterConfiguration] = None, check: bool = True) -> SingleModel:
    """Fit ``q^T J q`` from 10 evaluations (axes and pairwise sums)."""
    rows = (config or default_configuration()).rows[:N_SINGLE]
    design = embed_single(rows)
    measured = np.array([evaluator(r) for r in rows], dtype=float)
    coeffs = np.linalg.solve(design, measured)
    _check_residual(design, coeffs, measured, check)
    return SingleModel(_sym_from(coeffs))


def estimate_controlled(
    evaluator: Callable, config: Optional[ParameterConfiguration] = None, check: bool = True
) -> ControlledModel:
    """Fit ``(J, a, b)`` from 14 evaluations plus the kernel row."""
    config = config or default_configuration()
    if config.is_pair:
        raise ValueError("controlled tomography needs a 4-column configuration")
    rows = config.rows[:N_CONTROLLED]
    measured = np.array([evaluator(r) for r in rows] + [0.0], dtype=float)
    coeffs = np.linalg.solve(config.design, measured)
    _check_residual(config.design, coeffs, measured, check)
    return ControlledModel(_sym_from(coeffs), coeffs[10:14].copy(), float(coeffs[14]))


def estimate_pair(evaluator: Callable, config: Optional[ParameterConfiguration] = None, check: bool = True) -> PairModel:
    """Fit ``(J, K, L)`` from 35 evaluations plus the kernel row."""
    config = config or default_configuration(pair=True)
    if not config.is_pair:
        raise ValueError("pair tomography needs an 8-column configuration")
    rows = config.rows
    measured = np.array([evaluator(r[:4], r[4:]) for r in rows] + [0.0], dtype=float)
    coeffs = np.linalg.solve(config.design, measured)
    _check_residual(config.design, coeffs, measured, check)
    j = _sym_from(coeffs[0:10])
    l_ = _sym_from(coeffs[10:20])
    k = coeffs[20:36].reshape(4, 4).copy()
    return PairModel(j, k, l_)
