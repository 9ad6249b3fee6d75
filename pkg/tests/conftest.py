import numpy as np
import pytest

from qfqs import gates as g


ACCEPTANCE = {}


def report(number, ok, detail, expected_failure=False):
    """Record one acceptance criterion and print its pass/fail line."""
    tag = "PASS" if ok else "FAIL"
    if expected_failure and not ok:
        tag += " (expected, see decisions ledger)"
    line = f"criterion {number:2d} {tag}: {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_quaternion(rng):
    return g.normalize(rng.standard_normal(4))


def random_unitary(rng, dim):
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(rng, n):
    psi = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return psi / np.linalg.norm(psi)


def phase_distance(u, v):
    """Frobenius distance after removing the best global phase."""
    overlap = np.trace(u.conj().T @ v)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return np.linalg.norm(u * phase - v)


def random_sphere_problem(rng, degenerate=False, hard=False):
    """Random ``(J, a, b)``; optionally with a repeated eigenvalue and ``a`` blind to it."""
    v, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    r = rng.standard_normal(4)
    if degenerate:
        k = rng.integers(0, 3)
        r[k + 1] = r[k]
    a = rng.standard_normal(4) * rng.choice([1e-3, 0.1, 1.0, 10.0])
    if hard:
        low = np.argmin(r)
        mask = np.isclose(r, r[low])
        c = v.T @ a
        c[mask] = 0.0
        a = v @ c * 0.1
    J = v @ np.diag(r) @ v.T
    return 0.5 * (J + J.T), a, rng.normal()


def sphere_samples(rng, k):
    x = rng.standard_normal((k, 4))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def brute_min(J, a, b, samples):
    vals = np.einsum("ki,ij,kj->k", samples, J, samples) + 2 * samples @ a + b
    return float(vals.min())


def random_circuit(rng, n, depth=2, kinds=None):
    """Random circuit mixing every trainable gate kind plus fixed gates."""
    from qfqs import ansatz as an

    kinds = kinds or (g.CONTROLLED, g.NEG_CONTROLLED, g.NUMBER_PRESERVING)
    c = an.Circuit(n)
    for _ in range(depth):
        for k in range(n):
            c.add(g.GateInstance(g.SINGLE, (k,), random_quaternion(rng)))
        if n < 2:
            continue
        a, b = (int(x) for x in rng.choice(n, size=2, replace=False))
        c.add(g.GateInstance(g.NEG_CONTROLLED, (a, b), random_quaternion(rng)))
        c.add(g.GateInstance(g.CONTROLLED, (a, b), random_quaternion(rng), phase=rng.uniform(-1, 1)))
        for kind in kinds:
            a, b = (int(x) for x in rng.choice(n, size=2, replace=False))
            c.add(g.GateInstance(kind, (a, b), random_quaternion(rng)))
        a, b = (int(x) for x in rng.choice(n, size=2, replace=False))
        c.add(g.GateInstance(g.FIXED_CZ, (a, b)))
    c.schedule = an.default_schedule(c)
    return c


def number_preserving_circuit(rng, n, depth=3):
    from qfqs import ansatz as an

    c = an.Circuit(n)
    for _ in range(depth):
        for a in range(n):
            for b in range(a + 1, n):
                c.add(g.GateInstance(g.NUMBER_PRESERVING, (a, b), random_quaternion(rng)))
    c.schedule = an.default_schedule(c)
    return c
