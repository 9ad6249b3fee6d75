"""Analytic sequential optimization of quaternion-parameterized quantum circuits."""

from .ansatz import Circuit, build_alt_ansatz, initialize, run_circuit
from .costs import CompileCost, FidelityCost, HstCost, LhstCost, VqeCost
from .gates import GateInstance
from .hamiltonian import PauliSum, ising_hamiltonian
from .optimizer import Trajectory, minimize_quadratic_sphere, run_sweeps

__version__ = "0.1.0"

__all__ = [
    "Circuit",
    "CompileCost",
    "FidelityCost",
    "GateInstance",
    "HstCost",
    "LhstCost",
    "PauliSum",
    "Trajectory",
    "VqeCost",
    "build_alt_ansatz",
    "initialize",
    "ising_hamiltonian",
    "minimize_quadratic_sphere",
    "run_circuit",
    "run_sweeps",
]
