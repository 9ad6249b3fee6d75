import json
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from qfqs import ansatz as an
from qfqs import cli
from qfqs import gates as g
from qfqs.optimizer import Trajectory

from conftest import phase_distance, random_circuit


H2Q = "1.0 XX\n0.5 ZI\n-0.3 IZ\n0.2 YY\n"
H4Q = "0.5 XXII\n0.5 YYII\n0.3 IIXX\n0.3 IIYY\n0.2 IXXI\n0.2 IYYI\n0.4 ZZII\n0.1 IIZZ\n-0.2 ZIII\n"


class TestParsing:
    @pytest.mark.parametrize(
        "text,expected", [("3", [3]), ("0..4", [0, 1, 2, 3, 4]), ("1,5,7", [1, 5, 7]), ("0..1,9", [0, 1, 9])]
    )
    def test_seeds(self, text, expected):
        assert cli.parse_seeds(text) == expected

    def test_empty_seeds(self):
        with pytest.raises(cli.ConfigError):
            cli.parse_seeds(" ")

    def test_config_file_and_flag_precedence(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# ising\nn = 4\nlayers = 3\nmethod = scf-cfqs\nsweeps = 7\n")
        args = cli.parse_args(["vqe-ising", "--config", str(cfg), "--sweeps", "2"])
        assert (args.n, args.layers, args.method, args.sweeps) == (4, 3, "scf-cfqs", 2)

    def test_config_boolean(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n = 2\nperiodic = false\n")
        assert cli.parse_args(["vqe-ising", "--config", str(cfg)]).periodic is False

    @pytest.mark.parametrize("body", ["bogus = 1\n", "method = newton\n", "layers\n"])
    def test_bad_config(self, tmp_path, body):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(body)
        with pytest.raises(cli.ConfigError):
            cli.parse_args(["vqe-ising", "--config", str(cfg)])

    def test_resolve_defaults(self):
        cfg = cli._resolve(cli.parse_args(["vqe-ising", "--n", "2", "--method", "fqs"]))
        assert (cfg["block"], cfg["init"]) == (an.FQS_BLOCK, an.CZ_INIT)
        cfg = cli._resolve(cli.parse_args(["compile", "--hamiltonian", "x"]))
        assert (cfg["block"], cfg["init"]) == (an.CFQS_BLOCK, an.WARM_START)

    def test_incompatible_method(self):
        with pytest.raises(cli.ConfigError):
            cli._resolve(cli.parse_args(["vqe-ising", "--n", "2", "--method", "scf-cfqs", "--block", "cfqs"]))

    def test_jobs_from_environment(self, monkeypatch):
        monkeypatch.setenv("QFQS_JOBS", "3")
        assert cli.parse_args(["vqe-ising", "--n", "2"]).jobs == 3


class TestFormats:
    def test_trajectory_roundtrip(self, tmp_path):
        t = Trajectory([(0, -1, 0.1 + 0.2, 0), (1, 0, -1.0 / 3.0, 14)])
        path = tmp_path / "t.csv"
        cli.export_trajectory(t, path)
        assert path.read_text().splitlines()[0] == "sweep,unit,cost,evaluations"
        assert cli.load_trajectory(path).records == t.records

    def test_empty_trajectory_is_header_only(self, tmp_path):
        path = tmp_path / "t.csv"
        cli.export_trajectory(Trajectory([]), path)
        assert path.read_text() == "sweep,unit,cost,evaluations\n"

    def test_circuit_roundtrip(self, rng, tmp_path):
        for n in (2, 3):
            c = random_circuit(rng, n)
            c.add(g.GateInstance(g.FIXED_NCZ, (0, 1)))
            c.add(g.GateInstance(g.FIXED_CNOT, (1, 0)))
            c.add(g.GateInstance(g.FIXED_H, (0,)))
            c.add(g.GateInstance(g.FIXED_RZ, (1,), phase=0.3))
            c.add(g.GateInstance(g.SINGLE, (0,), g.normalize(rng.standard_normal(4)), trainable=False))
            path = tmp_path / "c.circ"
            cli.export_circuit(c, path)
            back = cli.import_circuit(path)
            assert [gt.kind for gt in back.gates] == [gt.kind for gt in c.gates]
            assert [gt.trainable for gt in back.gates] == [gt.trainable for gt in c.gates]
            # controlled gates carry a global-phase convention on the control, so compare exactly
            assert np.max(np.abs(back.matrix() - c.matrix())) < 1e-12

    def test_ansatz_roundtrip_keeps_pair_units(self, tmp_path):
        c = an.initialize(an.build_alt_ansatz(4, 1, an.SCF_BLOCK), an.RANDOM, 0)
        back = cli.parse_circuit(cli.format_circuit(c))
        assert sorted(back.schedule) == sorted(c.schedule)
        assert phase_distance(back.matrix(), c.matrix()) < 1e-12

    @pytest.mark.parametrize("text", ["", "SU 0 1 0 0 0\n", "QUBITS 2\nFOO 0\n", "QUBITS 2\nSU 0 1 0\n"])
    def test_bad_circuit_text(self, text):
        with pytest.raises(ValueError):
            cli.parse_circuit(text)


class TestExperiments:
    def run(self, argv):
        return cli.main(argv)

    def test_vqe_ising_outputs(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert self.run(["vqe-ising", "--n", "4", "--sweeps", "2", "--seeds", "0..1", "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        units = 4 * 3
        for seed in (0, 1):
            rows = (out / f"trajectory_seed{seed}.csv").read_text().splitlines()
            assert len(rows) == 1 + 2 * units + 1
            assert int(rows[-1].split(",")[3]) == 2 * 4 * (10 + 10 + 14)
        assert summary["mean_final_cost"] >= summary["exact_ground_energy"] - 1e-12
        assert summary["min_final_cost"] == min(s["final_cost"] for s in summary["seeds"])
        assert "mean final cost" in capsys.readouterr().out

    def test_byte_identical_reruns(self, tmp_path):
        texts = []
        for k in range(2):
            out = tmp_path / f"r{k}"
            argv = ["vqe-ising", "--n", "4", "--method", "scf-cfqs", "--sweeps", "2", "--seeds", "3", "--out", str(out)]
            assert self.run(argv) == 0
            texts.append(((out / "trajectory_seed3.csv").read_bytes(), (out / "circuit_seed3.circ").read_bytes()))
        assert texts[0] == texts[1]

    def test_parallel_matches_serial(self, tmp_path):
        base = ["vqe-ising", "--n", "2", "--sweeps", "2", "--seeds", "0,1"]
        assert self.run(base + ["--out", str(tmp_path / "s")]) == 0
        assert self.run(base + ["--jobs", "2", "--out", str(tmp_path / "p")]) == 0
        for seed in (0, 1):
            name = f"trajectory_seed{seed}.csv"
            assert (tmp_path / "s" / name).read_bytes() == (tmp_path / "p" / name).read_bytes()

    def test_vqe_file_and_fidelity(self, tmp_path):
        h = tmp_path / "h.txt"
        h.write_text(H2Q)
        assert self.run(["vqe-file", "--hamiltonian", str(h), "--sweeps", "20", "--out", str(tmp_path / "v")]) == 0
        s = json.loads((tmp_path / "v" / "summary.json").read_text())
        assert s["min_final_cost"] - s["exact_ground_energy"] < 1e-6
        assert self.run(["fidelity", "--hamiltonian", str(h), "--sweeps", "20", "--out", str(tmp_path / "f")]) == 0
        s = json.loads((tmp_path / "f" / "summary.json").read_text())
        # coordinate descent converges linearly; 20 sweeps land around 1e-6
        assert s["min_final_cost"] < 1e-4

    def test_compile_then_dynamics(self, tmp_path):
        h = tmp_path / "h.txt"
        h.write_text(H4Q)
        out = tmp_path / "c"
        argv = ["compile", "--hamiltonian", str(h), "--sweeps", "8", "--switch", "3", "--subspace", "number:2",
                "--seeds", "0", "--out", str(out)]
        assert self.run(argv) == 0
        s = json.loads((out / "summary.json").read_text())
        assert (s["switch_sweep"], s["subspace_size"]) == (3, 6)
        assert s["min_final_cost"] < 1e-2
        dyn = tmp_path / "d"
        argv = ["dynamics", "--compiled", str(out / "compiled.circ"), "--hamiltonian", str(h), "--t-max", "1.0",
                "--dt", "0.0625", "--psi-ini", "dicke:2", "--out", str(dyn)]
        assert self.run(argv) == 0
        rows = (dyn / "dynamics.csv").read_text().splitlines()
        assert rows[0] == "t,infidelity" and rows[1] == "0.0,0.0"
        assert len(rows) == 1 + 17

    @pytest.mark.parametrize(
        "argv",
        [
            ["vqe-ising", "--sweeps", "1"],
            ["vqe-ising", "--n", "3"],
            ["vqe-ising", "--n", "2", "--layers", "0"],
            ["vqe-file", "--hamiltonian", "/nonexistent/h.txt"],
            ["compile", "--hamiltonian", "HFILE", "--subspace", "dicke:3,1,1"],
            ["dynamics", "--compiled", "/nonexistent.circ", "--hamiltonian", "HFILE"],
        ],
    )
    def test_errors_exit_2(self, tmp_path, argv, capsys):
        h = tmp_path / "h.txt"
        h.write_text(H4Q)
        argv = [str(h) if a == "HFILE" else a for a in argv] + ["--out", str(tmp_path / "o")]
        assert self.run(argv) == 2
        assert "qfqs: error:" in capsys.readouterr().err

    def test_selftest(self, capsys):
        assert self.run(["selftest"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 4 and all(ln.startswith("PASS") for ln in lines)

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "qfqs", "--help"], capture_output=True, text=True)
        assert res.returncode == 0
        assert "selftest" in res.stdout
