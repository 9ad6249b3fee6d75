"""Command-line experiment driver.

Subcommands: ``vqe-ising``, ``vqe-file``, ``fidelity``, ``compile``,
``dynamics`` and ``selftest``. Every optimization subcommand writes one
trajectory CSV and one circuit file per seed plus ``summary.json`` into
``--out``. Settings may also come from a flat ``key = value`` file given with
``--config``; command-line flags take precedence.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import gates as g
from .ansatz import (
    BLOCK_TYPES,
    CFQS_BLOCK,
    CONNECTIVITIES,
    CZ_INIT,
    FQS_BLOCK,
    NEAREST_NEIGHBOR,
    NP_BLOCK,
    RANDOM,
    SCF_BLOCK,
    WARM_START,
    Circuit,
    build_alt_ansatz,
    default_schedule,
    initialize,
)
from .costs import (
    CompileCost,
    FidelityCost,
    VqeCost,
    dicke_basis,
    dicke_state,
    dynamics_infidelity,
    full_basis,
    load_basis,
    load_reference_state,
    number_basis,
    bits_to_index,
)
from .hamiltonian import (
    DENSE_LIMIT,
    dense_matrix,
    ground_energy,
    ising_hamiltonian,
    load_pauli_sum,
    time_evolution,
)
from .optimizer import CFQS, DEFAULT_THRESHOLD, FQS, METHODS, SCF_CFQS, Trajectory, run_sweeps

CSV_HEADER = "sweep,unit,cost,evaluations"
INIT_ALIASES = {"random": RANDOM, "cz": CZ_INIT, "cz-init": CZ_INIT, "warm": WARM_START, "warm-start": WARM_START}
METHOD_BLOCK = {FQS: FQS_BLOCK, CFQS: CFQS_BLOCK, SCF_CFQS: SCF_BLOCK}
COMPATIBLE = {FQS: {FQS_BLOCK}, CFQS: {CFQS_BLOCK, NP_BLOCK}, SCF_CFQS: {SCF_BLOCK}}


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# file formats


def export_trajectory(trajectory: Trajectory, path) -> None:
    lines = [CSV_HEADER]
    for sweep, unit, cost, evals in trajectory.records:
        lines.append(f"{sweep},{unit},{cost!r},{evals}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_trajectory(path) -> Trajectory:
    rows = Path(path).read_text(encoding="utf-8").splitlines()
    if not rows or rows[0].strip() != CSV_HEADER:
        raise ValueError(f"{path}: missing trajectory header")
    recs = []
    for row in rows[1:]:
        if row.strip():
            s, u, c, e = row.split(",")
            recs.append((int(s), int(u), float(c), int(e)))
    return Trajectory(recs)


def _num(x: float) -> str:
    return f"{x:.17g}"


def format_circuit(circuit: Circuit) -> str:
    """Line-oriented circuit text.

    ``QUBITS n`` header, then one gate per line:
    ``SU k qi qx qy qz`` (single), ``CU c t beta gamma delta theta``
    (controlled, two-CNOT decomposition angles), ``NCU c t ...`` (fires on
    control 0), ``NP a b qi qx qy qz``, ``CZ a b``, ``NCZ a b``,
    ``CNOT c t``, ``H k``, ``RZ k theta``. A trailing ``frozen`` marks a
    parametric gate that is not trained.
    """
    out = [f"QUBITS {circuit.n_qubits}"]
    for gate in circuit.gates:
        qs = " ".join(str(q) for q in gate.qubits)
        k = gate.kind
        if k == g.SINGLE:
            line = f"SU {qs} " + " ".join(_num(v) for v in gate.params)
        elif k in (g.CONTROLLED, g.NEG_CONTROLLED):
            name = "CU" if k == g.CONTROLLED else "NCU"
            line = f"{name} {qs} " + " ".join(_num(v) for v in g.decompose_controlled(gate.params, gate.phase))
        elif k == g.NUMBER_PRESERVING:
            line = f"NP {qs} " + " ".join(_num(v) for v in gate.params)
        elif k == g.FIXED_RZ:
            line = f"RZ {qs} {_num(gate.phase)}"
        else:
            line = {g.FIXED_CZ: "CZ", g.FIXED_NCZ: "NCZ", g.FIXED_CNOT: "CNOT", g.FIXED_H: "H"}[k] + f" {qs}"
        if gate.params is not None and not gate.trainable:
            line += " frozen"
        out.append(line)
    return "\n".join(out) + "\n"


def parse_circuit(text: str) -> Circuit:
    circuit = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        frozen = line[-1] == "frozen"
        if frozen:
            line = line[:-1]
        name, args = line[0].upper(), line[1:]
        try:
            if name == "QUBITS":
                circuit = Circuit(int(args[0]))
                continue
            if circuit is None:
                raise ValueError("missing QUBITS header")
            if name in ("SU", "NP"):
                nq = 1 if name == "SU" else 2
                qs = [int(a) for a in args[:nq]]
                q = [float(a) for a in args[nq:]]
                if len(q) != 4:
                    raise ValueError("expected four quaternion components")
                kind = g.SINGLE if name == "SU" else g.NUMBER_PRESERVING
                gate = g.GateInstance(kind, qs, np.array(q), trainable=not frozen)
            elif name in ("CU", "NCU"):
                c, t = int(args[0]), int(args[1])
                beta, gamma, delta, theta = (float(a) for a in args[2:6])
                kind = g.CONTROLLED if name == "CU" else g.NEG_CONTROLLED
                gate = g.GateInstance(kind, (c, t), g.quaternion_from_angles(beta, gamma, delta), not frozen, theta)
            elif name == "RZ":
                gate = g.GateInstance(g.FIXED_RZ, (int(args[0]),), phase=float(args[1]))
            elif name in ("CZ", "NCZ", "CNOT", "H"):
                kind = {"CZ": g.FIXED_CZ, "NCZ": g.FIXED_NCZ, "CNOT": g.FIXED_CNOT, "H": g.FIXED_H}[name]
                gate = g.GateInstance(kind, [int(a) for a in args])
            else:
                raise ValueError(f"unknown gate {name!r}")
            circuit.add(gate)
        except (ValueError, IndexError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if circuit is None:
        raise ValueError("empty circuit file")
    circuit.schedule = default_schedule(circuit)
    return circuit


def export_circuit(circuit: Circuit, path) -> None:
    Path(path).write_text(format_circuit(circuit), encoding="utf-8")


def import_circuit(path) -> Circuit:
    return parse_circuit(Path(path).read_text(encoding="utf-8"))


# --------------------------------------------------------------------------
# configuration


def parse_seeds(text) -> List[int]:
    """``"3"``, ``"0..4"`` (inclusive) or ``"1,5,7"``."""
    if isinstance(text, (list, tuple)):
        return [int(s) for s in text]
    text = str(text).strip()
    seeds: List[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise ConfigError(f"no seeds in {text!r}")
    return seeds


def read_config_file(path) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _common(p: argparse.ArgumentParser, optimize: bool = True):
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--out", default="qfqs_out", help="output directory")
    if not optimize:
        return
    p.add_argument("--n", type=int, help="number of qubits")
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--block", choices=BLOCK_TYPES)
    p.add_argument("--connectivity", choices=CONNECTIVITIES, default=NEAREST_NEIGHBOR)
    p.add_argument("--order", choices=("zipping", "ascending"), default="zipping")
    p.add_argument("--method", choices=METHODS, default=CFQS)
    p.add_argument("--sweeps", type=int, default=10)
    p.add_argument("--seeds", default="0")
    p.add_argument("--init", choices=sorted(INIT_ALIASES))
    p.add_argument("--angle-max", type=float, default=math.pi / 18)
    p.add_argument("--shots", type=int)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--jobs", type=int, default=int(os.environ.get("QFQS_JOBS", "1")))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qfqs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vqe-ising", help="VQE for the mixed-field Ising chain")
    _common(p)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--h", type=float, default=1 / math.sqrt(2))
    p.add_argument("--periodic", dest="periodic", action="store_true", default=True)
    p.add_argument("--open", dest="periodic", action="store_false")

    p = sub.add_parser("vqe-file", help="VQE for a Pauli-sum Hamiltonian file")
    _common(p)
    p.add_argument("--hamiltonian", required=False)

    p = sub.add_parser("fidelity", help="maximize overlap with a reference state")
    _common(p)
    p.add_argument("--reference", help="state file with 'index re im' lines")
    p.add_argument("--hamiltonian", help="use the ground state of this Hamiltonian as reference")

    p = sub.add_parser("compile", help="compile exp(-iHt) with the Hilbert-Schmidt test costs")
    _common(p)
    p.add_argument("--hamiltonian")
    p.add_argument("--t", type=float, default=1 / 16)
    p.add_argument("--switch", type=float, default=5, help="sweeps with the local cost before switching")
    p.add_argument("--subspace", default="full", help="full | number:K | dicke:M,NA,NB | file:PATH")

    p = sub.add_parser("dynamics", help="infidelity of repeated application of a compiled step")
    _common(p, optimize=False)
    p.add_argument("--compiled")
    p.add_argument("--hamiltonian")
    p.add_argument("--t-max", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--psi-ini", default="zero", help="zero | basis:BITS | dicke:K | file:PATH")

    p = sub.add_parser("selftest", help="run the built-in invariant checks")
    p.add_argument("--seed", type=int, default=0)
    return parser


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        values = read_config_file(cfg_path)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in subparser._actions}
        defaults = {}
        for key, value in values.items():
            if key not in known or key in ("config", "help"):
                raise ConfigError(f"{cfg_path}: unknown key {key!r}")
            action = known[key]
            if action.type is not None:
                value = action.type(value)
            elif isinstance(action.default, bool):
                value = value.lower() in ("1", "true", "yes", "on")
            if action.choices is not None and value not in action.choices:
                raise ConfigError(f"{cfg_path}: {key} must be one of {sorted(action.choices)}")
            defaults[key] = value
        subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _resolve(args) -> dict:
    """Validate an optimization configuration and fill derived defaults."""
    cfg = vars(args).copy()
    method = cfg["method"]
    block = cfg.get("block") or METHOD_BLOCK[method]
    if block not in COMPATIBLE[method]:
        raise ConfigError(f"method {method} cannot train {block} blocks")
    cfg["block"] = block
    init = cfg.get("init")
    if init is None:
        init = WARM_START if args.command == "compile" else (CZ_INIT if method == FQS else RANDOM)
    cfg["init"] = INIT_ALIASES[init]
    cfg["seeds"] = parse_seeds(cfg["seeds"])
    for key in ("layers", "sweeps"):
        if cfg[key] is None or cfg[key] < (1 if key == "layers" else 0):
            raise ConfigError(f"--{key} must be {'>= 1' if key == 'layers' else '>= 0'}")
    if cfg.get("shots") is not None and cfg["shots"] < 1:
        raise ConfigError("--shots must be >= 1")
    return cfg


def _parse_subspace(spec: str, n: int):
    kind, _, rest = spec.partition(":")
    if kind == "full":
        return full_basis(n)
    if kind == "number":
        return number_basis(n, int(rest))
    if kind == "dicke":
        m, na, nb = (int(x) for x in rest.split(","))
        if 2 * m != n:
            raise ConfigError(f"dicke:{rest} describes {2 * m} qubits, target has {n}")
        return dicke_basis(m, na, nb)
    if kind == "file":
        return load_basis(rest, n)
    raise ConfigError(f"unknown subspace {spec!r}")


def _parse_state(spec: str, n: int) -> np.ndarray:
    kind, _, rest = spec.partition(":")
    if kind == "zero":
        psi = np.zeros(1 << n, dtype=complex)
        psi[0] = 1
        return psi
    if kind == "basis":
        if len(rest) != n:
            raise ConfigError(f"bitstring {rest!r} must have {n} characters")
        psi = np.zeros(1 << n, dtype=complex)
        psi[bits_to_index(rest)] = 1
        return psi
    if kind == "dicke":
        return dicke_state(n, int(rest))
    if kind == "file":
        psi = load_reference_state(rest)
        if len(psi) != 1 << n:
            raise ConfigError(f"state in {rest} has the wrong dimension")
        return psi
    raise ConfigError(f"unknown state {spec!r}")


def _make_cost(cfg: dict):
    """Cost object plus extra summary fields for one experiment."""
    cmd = cfg["command"]
    extra = {}
    if cmd == "vqe-ising":
        if cfg["n"] is None:
            raise ConfigError("--n is required")
        h = ising_hamiltonian(cfg["n"], cfg["J"], cfg["h"], cfg["periodic"])
        if h.n_qubits <= DENSE_LIMIT:
            extra["exact_ground_energy"] = ground_energy(h)
        return VqeCost(h), h.n_qubits, extra
    if cmd == "vqe-file":
        if not cfg.get("hamiltonian"):
            raise ConfigError("--hamiltonian is required")
        h = load_pauli_sum(cfg["hamiltonian"])
        if h.n_qubits <= DENSE_LIMIT:
            extra["exact_ground_energy"] = ground_energy(h)
        return VqeCost(h), h.n_qubits, extra
    if cmd == "fidelity":
        if cfg.get("reference"):
            ref = load_reference_state(cfg["reference"])
        elif cfg.get("hamiltonian"):
            h = load_pauli_sum(cfg["hamiltonian"])
            ref = np.linalg.eigh(dense_matrix(h))[1][:, 0]
        else:
            raise ConfigError("--reference or --hamiltonian is required")
        return FidelityCost(ref), int(len(ref)).bit_length() - 1, extra
    if cmd == "compile":
        if not cfg.get("hamiltonian"):
            raise ConfigError("--hamiltonian is required")
        h = load_pauli_sum(cfg["hamiltonian"])
        target = time_evolution(h, cfg["t"])
        basis = _parse_subspace(cfg["subspace"], h.n_qubits)
        extra["subspace_size"] = len(basis)
        return CompileCost(target, basis, cfg["switch"]), h.n_qubits, extra
    raise ConfigError(f"{cmd} is not an optimization experiment")


def run_seed(cfg: dict, seed: int):
    """One seed's full pipeline; returns (seed, trajectory, circuit text)."""
    cost, n, _ = _make_cost(cfg)
    if cfg.get("n") is not None and cfg["n"] != n:
        raise ConfigError(f"--n {cfg['n']} does not match the {n}-qubit cost")
    circuit = build_alt_ansatz(n, cfg["layers"], cfg["block"], cfg["connectivity"], order=cfg["order"])
    circuit = initialize(circuit, cfg["init"], seed, cfg["angle_max"])
    traj = run_sweeps(
        circuit, cost, cfg["sweeps"], cfg["method"], cfg["threshold"], cfg.get("shots"), rng_seed=seed
    )
    return seed, traj, format_circuit(circuit)


def run_experiment(cfg: dict) -> dict:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    _, n, extra = _make_cost(cfg)
    seeds = cfg["seeds"]
    jobs = max(1, int(cfg.get("jobs") or 1))
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(seeds))) as pool:
            results = list(pool.map(run_seed, [cfg] * len(seeds), seeds))
    else:
        results = [run_seed(cfg, s) for s in seeds]
    per_seed = []
    for seed, traj, circ_text in results:
        csv = out / f"trajectory_seed{seed}.csv"
        circ = out / f"circuit_seed{seed}.circ"
        export_trajectory(traj, csv)
        circ.write_text(circ_text, encoding="utf-8")
        per_seed.append(
            {"seed": seed, "final_cost": traj.final_cost, "evaluations": traj.evaluations,
             "trajectory": csv.name, "circuit": circ.name}
        )
    finals = np.array([r["final_cost"] for r in per_seed])
    best = per_seed[int(np.argmin(finals))]
    summary = {
        "experiment": cfg["command"],
        "n_qubits": n,
        "layers": cfg["layers"],
        "block": cfg["block"],
        "connectivity": cfg["connectivity"],
        "method": cfg["method"],
        "init": cfg["init"],
        "sweeps": cfg["sweeps"],
        "shots": cfg.get("shots"),
        "threshold": cfg["threshold"],
        "seeds": per_seed,
        "mean_final_cost": float(finals.mean()),
        "min_final_cost": float(finals.min()),
        "std_final_cost": float(finals.std(ddof=1)) if len(finals) > 1 else 0.0,
        "best_seed": best["seed"],
        "switch_sweep": results[0][1].switch_sweep,
    }
    summary.update(extra)
    if cfg["command"] == "compile":
        (out / "compiled.circ").write_text((out / best["circuit"]).read_text(encoding="utf-8"), encoding="utf-8")
        summary.update({"t": cfg["t"], "subspace": cfg["subspace"], "switch": cfg["switch"]})
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return summary


def run_dynamics(cfg: dict) -> list:
    if not cfg.get("compiled") or not cfg.get("hamiltonian"):
        raise ConfigError("--compiled and --hamiltonian are required")
    circuit = import_circuit(cfg["compiled"])
    h = load_pauli_sum(cfg["hamiltonian"])
    if h.n_qubits != circuit.n_qubits:
        raise ConfigError("compiled circuit and Hamiltonian differ in qubit count")
    psi = _parse_state(cfg["psi_ini"], h.n_qubits)
    series = dynamics_infidelity(circuit, h, cfg["t_max"], cfg["dt"], psi)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    lines = ["t,infidelity"] + [f"{t!r},{v!r}" for t, v in series]
    (out / "dynamics.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return series


def selftest(seed: int = 0) -> bool:
    """Quick invariant checks; prints one line per check."""
    from . import ansatz, costs, landscape, optimizer

    rng = np.random.default_rng(seed)
    results = []

    def record(name, ok, detail):
        results.append(ok)
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")

    # tomography exactness on a random 3-qubit circuit
    c = ansatz.initialize(ansatz.build_alt_ansatz(4, 1, SCF_BLOCK), RANDOM, seed)
    cost = VqeCost(ising_hamiltonian(4))
    worst = 0.0
    for unit in c.schedule:
        env = costs.GateEnvironment(c, unit, cost)
        full = costs.full_evaluator(c, unit, cost)
        if len(unit) == 2:
            m = landscape.estimate_pair(env)
            for _ in range(10):
                p, q = g.normalize(rng.standard_normal(4)), g.normalize(rng.standard_normal(4))
                worst = max(worst, abs(m.predict(p, q) - full(p, q)))
        else:
            m = landscape.estimate_single(env)
            for _ in range(10):
                q = g.normalize(rng.standard_normal(4))
                worst = max(worst, abs(m.predict(q) - full(q)))
    record("tomography", worst < 1e-9, f"max error {worst:.2e}")

    # secular solver against sampling
    samples = rng.standard_normal((20000, 4))
    samples /= np.linalg.norm(samples, axis=1, keepdims=True)
    gap = -np.inf
    for _ in range(50):
        a_ = rng.standard_normal((4, 4))
        J = a_ + a_.T
        a = rng.standard_normal(4)
        sol = optimizer.minimize_quadratic_sphere(J, a, 0.0)
        brute = np.min(np.einsum("ij,jk,ik->i", samples, J, samples) + 2 * samples @ a)
        gap = max(gap, sol.value - brute)
    record("secular solver", gap <= 1e-9, f"max(analytic - sampled) {gap:.2e}")

    # gate algebra
    q = g.normalize(rng.standard_normal(4))
    # U_NP(q) = CNOT(a->b) . C-R(q)(control b, target a) . CNOT(a->b)
    cr_ba = np.kron(g.I2, g.P0) + np.kron(g.su2_from_quaternion(q), g.P1)
    np_ok = np.allclose(g.CNOT @ cr_ba @ g.CNOT, g.number_preserving_matrix(q), atol=1e-12)
    err = 0.0
    for _ in range(100):
        q = g.normalize(rng.standard_normal(4))
        u = g.recompose_controlled(*g.decompose_controlled(q))
        v = g.controlled_matrix(q)
        err = max(err, 1 - abs(np.trace(u.conj().T @ v)) / 4)
    record("decomposition", err < 1e-10 and np_ok, f"max infidelity {err:.2e}")

    # HST sandwich
    ok = True
    for _ in range(10):
        cc = ansatz.initialize(ansatz.build_alt_ansatz(2, 1, CFQS_BLOCK), RANDOM, int(rng.integers(1 << 30)))
        u = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))[0]
        hst = costs.hst_global_cost(cc, u)
        lhst = costs.lhst_local_cost(cc, u)
        ok &= lhst <= hst + 1e-10 and hst <= 2 * lhst + 1e-10
    record("HST sandwich", ok, "C_LHST <= C_HST <= n C_LHST")
    return all(results)


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = parse_args(argv)
        if args.command == "selftest":
            return 0 if selftest(args.seed) else 1
        if args.command == "dynamics":
            series = run_dynamics(vars(args))
            print(f"wrote {len(series)} points to {Path(args.out) / 'dynamics.csv'}")
            return 0
        cfg = _resolve(args)
        summary = run_experiment(cfg)
        print(
            f"{cfg['command']}: {len(cfg['seeds'])} seed(s), mean final cost {summary['mean_final_cost']:.12g}, "
            f"min {summary['min_final_cost']:.12g} -> {cfg['out']}"
        )
        return 0
    except (ConfigError, ValueError, OSError) as exc:
        print(f"qfqs: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
