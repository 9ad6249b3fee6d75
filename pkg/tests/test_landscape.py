import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from qfqs import ansatz as an
from qfqs import gates as g
from qfqs import landscape as ls
from qfqs.costs import GateEnvironment, VqeCost, full_evaluator
from qfqs.hamiltonian import PauliSum, ising_hamiltonian

from conftest import random_quaternion


def random_sym(rng):
    a = rng.standard_normal((4, 4))
    return a + a.T


def unit_rows(rng, k):
    x = rng.standard_normal((k, 4))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


class TestEmbeddings:
    def test_identity_quaternion(self):
        h = ls.embed_controlled([1, 0, 0, 0])
        expected = np.zeros(15)
        expected[[0, 10, 14]] = [1, 2, 1]
        assert_allclose(h, expected)

    def test_hand_example(self):
        h = ls.embed_controlled(np.array([1, 1, 0, 0]) / math.sqrt(2))
        assert_allclose(h[:4], [0.5, 0.5, 0, 0])
        assert h[4] == pytest.approx(1.0)
        assert_allclose(h[10:12], [math.sqrt(2)] * 2)

    def test_pair_identity(self):
        h = ls.embed_pair([1, 0, 0, 0], [1, 0, 0, 0])
        expected = np.zeros(36)
        expected[[0, 10, 20]] = [1, 1, 2]
        assert_allclose(h, expected)

    def test_pair_cross_terms_cover_all_index_pairs(self, rng):
        p, q = random_quaternion(rng), random_quaternion(rng)
        cross = ls.embed_pair(p, q)[20:]
        assert_allclose(cross, [2 * p[m] * q[n] for m in range(4) for n in range(4)])
        # the x-row must contain both 2 p_x q_y and 2 p_x q_z
        assert cross[6] == pytest.approx(2 * p[1] * q[2])
        assert cross[7] == pytest.approx(2 * p[1] * q[3])

    def test_kernel_orthogonality(self, rng):
        q = unit_rows(rng, 10000)
        p = unit_rows(rng, 10000)
        assert np.max(np.abs(ls.embed_controlled(q) @ ls.KERNEL_CONTROLLED)) < 1e-12
        assert np.max(np.abs(ls.embed_pair(p, q) @ ls.KERNEL_PAIR)) < 1e-12

    def test_pair_bilinear_oracle(self, rng):
        J, L = random_sym(rng), random_sym(rng)
        K = rng.standard_normal((4, 4))
        iu = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        e = np.concatenate(
            [np.diag(J), [J[r, c] for r, c in iu], np.diag(L), [L[r, c] for r, c in iu], K.ravel()]
        )
        for _ in range(20):
            p, q = random_quaternion(rng), random_quaternion(rng)
            v = np.concatenate([p, q])
            block = np.block([[J, K], [K.T, L]])
            assert ls.embed_pair(p, q) @ e == pytest.approx(v @ block @ v, abs=1e-12)


class TestConfiguration:
    def test_default_configurations_invertible(self):
        for pair in (False, True):
            cfg = ls.default_configuration(pair)
            assert np.isfinite(cfg.condition) and cfg.condition < 1e4
            assert_allclose(np.linalg.norm(cfg.rows[:, :4], axis=1), 1.0)

    def test_stencil_shapes(self):
        assert ls.DEFAULT_Q.shape == (14, 4)
        assert ls.DEFAULT_Q_PAIR.shape == (35, 8)

    def test_singular_rejected(self):
        rows = np.tile([1.0, 0, 0, 0], (14, 1))
        with pytest.raises(ValueError, match="singular"):
            ls.ParameterConfiguration(rows)

    def test_wrong_shapes(self):
        with pytest.raises(ValueError):
            ls.ParameterConfiguration(np.ones((5, 3)))
        with pytest.raises(ValueError):
            ls.ParameterConfiguration(np.ones((10, 8)))

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "q.txt"
        path.write_text("# rows\n" + "\n".join(" ".join(str(int(v)) for v in r) for r in ls.DEFAULT_Q))
        cfg = ls.ParameterConfiguration.load(path)
        assert_allclose(cfg.rows, ls.default_configuration().rows)

    def test_custom_configuration_gives_same_model(self, rng):
        J, a, b = random_sym(rng), rng.standard_normal(4), 0.3
        f = lambda q: q @ J @ q + 2 * a @ q + b  # noqa: E731
        cfg = ls.ParameterConfiguration(rng.standard_normal((14, 4)))
        m1 = ls.estimate_controlled(f, cfg)
        m2 = ls.estimate_controlled(f)
        for q in unit_rows(rng, 10):
            assert m1.predict(q) == pytest.approx(m2.predict(q), abs=1e-9)


def circuit_and_cost(seed, n=3):
    rng = np.random.default_rng(seed)
    c = an.Circuit(n)
    for _ in range(3):
        for k in range(n):
            c.add(g.GateInstance(g.SINGLE, (k,), random_quaternion(rng)))
        a, b = rng.choice(n, size=2, replace=False)
        c.add(g.GateInstance(g.CONTROLLED, (int(a), int(b)), random_quaternion(rng), phase=0.4))
        c.add(g.GateInstance(g.NEG_CONTROLLED, (int(a), int(b)), random_quaternion(rng)))
        c.add(g.GateInstance(g.CONTROLLED, (int(a), int(b)), random_quaternion(rng)))
        c.add(g.GateInstance(g.NUMBER_PRESERVING, (int(b), int(a)), random_quaternion(rng)))
    c.schedule = an.default_schedule(c)
    terms = [(rng.normal(), "".join(rng.choice(list("IXYZ"), n))) for _ in range(8)]
    return c, VqeCost(PauliSum(n, terms))


class TestEstimation:
    def test_constant_evaluator(self, rng):
        m = ls.estimate_controlled(lambda q: 2.5)
        for q in unit_rows(rng, 20):
            assert m.predict(q) == pytest.approx(2.5, abs=1e-9)

    def test_reproduces_configuration_rows(self, rng):
        c, cost = circuit_and_cost(1)
        unit = next(u for u in c.schedule if c.gates[u[0]].kind == g.CONTROLLED and len(u) == 1)
        f = full_evaluator(c, unit, cost)
        m = ls.estimate_controlled(f)
        for row in ls.default_configuration().rows:
            assert m.predict(row) == pytest.approx(f(row), abs=1e-10)

    @pytest.mark.parametrize("seed", range(4))
    def test_simulator_oracle_all_units(self, seed):
        rng = np.random.default_rng(seed)
        c, cost = circuit_and_cost(seed)
        for unit in c.schedule:
            full = full_evaluator(c, unit, cost)
            env = GateEnvironment(c, unit, cost)
            if len(unit) == 2:
                m = ls.estimate_pair(env)
                pts = [(random_quaternion(rng), random_quaternion(rng)) for _ in range(25)]
                err = max(abs(m.predict(p, q) - full(*_order(c, unit, p, q))) for p, q in pts)
            elif c.gates[unit[0]].kind == g.SINGLE:
                m = ls.estimate_single(env)
                err = max(abs(m.predict(q) - full(q)) for q in unit_rows(rng, 25))
            else:
                m = ls.estimate_controlled(env)
                err = max(abs(m.predict(q) - full(q)) for q in unit_rows(rng, 25))
            assert err < 1e-9

    def test_control_in_zero_gives_flat_model(self, rng):
        c = an.Circuit(2)
        c.add(g.GateInstance(g.SINGLE, (1,), random_quaternion(rng)))
        c.add(g.GateInstance(g.CONTROLLED, (0, 1), random_quaternion(rng)))
        c.schedule = [(0,), (1,)]
        cost = VqeCost(ising_hamiltonian(2))
        m = ls.estimate_controlled(GateEnvironment(c, (1,), cost))
        vals = [m.predict(q) for q in unit_rows(rng, 50)]
        assert np.var(vals) < 1e-9

    def test_fqs_reduction_control_in_one(self, rng):
        # control prepared in |1>: the controlled gate acts like a bare single gate
        h = PauliSum(2, [(0.7, "XZ"), (-0.4, "IY"), (0.2, "ZX"), (0.5, "IZ")])
        s = random_quaternion(rng)
        c = an.Circuit(2)
        c.add(g.GateInstance(g.SINGLE, (0,), [0, 1, 0, 0]))
        c.add(g.GateInstance(g.SINGLE, (1,), s))
        c.add(g.GateInstance(g.CONTROLLED, (0, 1), random_quaternion(rng)))
        c.schedule = an.default_schedule(c)
        cost = VqeCost(h)
        mc = ls.estimate_controlled(GateEnvironment(c, (2,), cost))
        single = an.Circuit(2)
        single.add(g.GateInstance(g.SINGLE, (0,), [0, 1, 0, 0]))
        single.add(g.GateInstance(g.SINGLE, (1,), s))
        single.add(g.GateInstance(g.SINGLE, (1,), random_quaternion(rng)))
        single.schedule = an.default_schedule(single)
        ms = ls.estimate_single(GateEnvironment(single, (2,), cost))
        assert_allclose(mc.a, 0, atol=1e-9)
        # the kernel-row representation moves the constant into tr(J): J + b I is the bare form
        assert_allclose(mc.J + mc.b * np.eye(4), ms.J, atol=1e-9)

    def test_separable_pair_has_no_coupling(self, rng):
        J, L = random_sym(rng), random_sym(rng)
        m = ls.estimate_pair(lambda p, q: p @ J @ p + q @ L @ q)
        assert_allclose(m.K, 0, atol=1e-9)

    def test_pair_slices(self, rng):
        c, cost = circuit_and_cost(7)
        unit = next(u for u in c.schedule if len(u) == 2)
        m = ls.estimate_pair(GateEnvironment(c, unit, cost))
        q = random_quaternion(rng)
        p = random_quaternion(rng)
        assert m.p_slice(q).predict(p) == pytest.approx(m.predict(p, q), abs=1e-12)
        assert m.q_slice(p).predict(q) == pytest.approx(m.predict(p, q), abs=1e-12)
        assert_allclose(m.J, m.J.T)
        assert_allclose(m.L, m.L.T)

    def test_single_recovers_synthetic_j(self, rng):
        J = random_sym(rng)
        m = ls.estimate_single(lambda q: q @ J @ q)
        assert_allclose(m.J, J, atol=1e-10)

    def test_single_identity_entry(self, rng):
        c, cost = circuit_and_cost(3)
        f = full_evaluator(c, (0,), cost)
        m = ls.estimate_single(f)
        assert m.J[0, 0] == pytest.approx(f([1, 0, 0, 0]), abs=1e-12)

    def test_evaluation_counts(self):
        calls = []
        ls.estimate_single(lambda q: calls.append(1) or 0.0)
        assert len(calls) == 10
        calls.clear()
        ls.estimate_controlled(lambda q: calls.append(1) or 0.0)
        assert len(calls) == 14
        calls.clear()
        ls.estimate_pair(lambda p, q: calls.append(1) or 0.0)
        assert len(calls) == 35

    def test_broken_evaluator_raises(self):
        with pytest.raises(ls.TomographyError):
            ls.estimate_controlled(lambda q: float("nan"))

    def test_shot_noise_shrinks(self):
        c, cost = circuit_and_cost(11)
        unit = next(u for u in c.schedule if len(u) == 1 and c.gates[u[0]].kind == g.CONTROLLED)
        exact = ls.estimate_controlled(GateEnvironment(c, unit, cost))
        rng = np.random.default_rng(0)
        probe = unit_rows(rng, 30)
        errs = {}
        for shots in (1000, 100000):
            env = GateEnvironment(c, unit, cost)
            env.shots, env.rng = shots, np.random.default_rng(1)
            devs = []
            for _ in range(20):
                m = ls.estimate_controlled(env, check=False)
                devs.extend(m.predict(q) - exact.predict(q) for q in probe)
            errs[shots] = np.sqrt(np.mean(np.square(devs)))
        ratio = errs[1000] / errs[100000]
        assert 5 < ratio < 20  # 1/sqrt(shots) predicts 10


def _order(c, unit, p, q):
    """Arguments for full_evaluator, which takes parameters in unit order."""
    a, _ = unit
    return (p, q) if c.gates[a].kind == g.NEG_CONTROLLED else (q, p)
