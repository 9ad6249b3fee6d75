"""Analytic per-gate minimization and the sweep engine.

``minimize_quadratic_sphere`` solves ``min q^T J q + 2 a^T q + b`` over unit
``q`` by the Lagrange condition ``(J - L) q = -a``. In the eigenbasis
``(r_i, n_i)`` of ``J`` the stationary points are ``q = sum c_i n_i`` with
``c_i = g_i / (L - r_i)``, ``g = N^T a``, where ``L`` is a root of the secular
function ``f(L) = sum g_i^2 / (L - r_i)^2 - 1``. Roots are bracketed around the
poles and refined; each is evaluated in coordinates anchored at the nearest
pole so that roots close to a pole keep full relative precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import gates as g
from .ansatz import UNIT_CONTROLLED, UNIT_PAIR, UNIT_SINGLE, Circuit
from .costs import GateEnvironment
from .landscape import (
    N_CONTROLLED,
    N_PAIR,
    N_SINGLE,
    ControlledModel,
    ParameterConfiguration,
    estimate_controlled,
    estimate_pair,
    estimate_single,
)

FQS = "fqs"
CFQS = "cfqs"
SCF_CFQS = "scf-cfqs"
METHODS = (FQS, CFQS, SCF_CFQS)

EVALUATIONS = {UNIT_SINGLE: N_SINGLE, UNIT_CONTROLLED: N_CONTROLLED, UNIT_PAIR: N_PAIR}

ROOT_TOL = 1e-12
MAX_ROOT_ITER = 200
SCF_MAX_ITER = 1000
DEFAULT_THRESHOLD = 1e-8


@dataclass
class SecularSolution:
    lam: float
    q_star: np.ndarray
    value: float
    hard_case: bool = False
    residual: float = 0.0
    n_roots: int = 0
    # lam == anchor + offset; the pair keeps full precision for roots close to a pole
    anchor: float = 0.0
    offset: float = 0.0


def secular_function(lam: float, r: Sequence[float], g_: Sequence[float], anchor: Optional[float] = None) -> float:
    """``sum g_i^2 / (lam - r_i)^2 - 1``.

    With ``anchor`` the multiplier is ``anchor + lam`` and the differences are
    formed as ``(anchor - r_i) + lam``, which avoids rounding ``lam`` onto the
    float grid when it sits very close to an eigenvalue.
    """
    if anchor is None:
        return sum(gi * gi / (lam - ri) ** 2 for ri, gi in zip(r, g_)) - 1.0
    return sum(gi * gi / ((anchor - ri) + lam) ** 2 for ri, gi in zip(r, g_)) - 1.0


def _f(x, d, w):
    # secular function at anchor + x; d[k] = anchor - rho_k
    return sum(wk / (dk + x) ** 2 for dk, wk in zip(d, w)) - 1.0


def _df(x, d, w):
    return -2.0 * sum(wk / (dk + x) ** 3 for dk, wk in zip(d, w))


def _d2f(x, d, w):
    return 6.0 * sum(wk / (dk + x) ** 4 for dk, wk in zip(d, w))


def _root(fun, dfun, lo, hi, increasing):
    """Safeguarded Newton/bisection for a monotone function on ``[lo, hi]``."""
    x = 0.5 * (lo + hi)
    fx = fun(x)
    for _ in range(MAX_ROOT_ITER):
        if abs(fx) < ROOT_TOL:
            break
        if (fx < 0) == increasing:
            lo = x
        else:
            hi = x
        if hi - lo <= 4e-16 * max(abs(lo), abs(hi)):
            break
        d = dfun(x)
        step = x - fx / d if d != 0 else None
        x = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
        fx = fun(x)
    return x, fx


def _interior_min(d, w, gap, w_left, w_right):
    """Locate the minimum of the convex secular function between two poles.

    Returns ``x`` with ``f(x) < 0`` as soon as one is found (enough to bracket
    both roots), ``None`` once tangent lines prove ``f > 0`` on the whole
    interval, or else the converged minimizer. The search starts where the two
    adjacent pole terms balance.
    """
    lo, hi = 0.0, gap
    cl, cr = w_left ** (1 / 3), w_right ** (1 / 3)
    x = gap * cl / (cl + cr)
    left = right = None  # (x, f, f') with f' < 0 and f' > 0
    for _ in range(MAX_ROOT_ITER):
        fx = _f(x, d, w)
        if fx < 0:
            return x
        dx = _df(x, d, w)
        if dx == 0.0:
            break
        if dx < 0:
            lo, left = x, (x, fx, dx)
        else:
            hi, right = x, (x, fx, dx)
        if left and right:
            (x1, f1, d1), (x2, f2, d2) = left, right
            y = (f2 - f1 + d1 * x1 - d2 * x2) / (d1 - d2)
            if f1 + d1 * (y - x1) > 1e-10:
                return None
        if hi - lo <= 1e-13 * gap:
            break
        step = x - dx / _d2f(x, d, w)
        if lo < step < hi:
            done = abs(step - x) <= 1e-15 * gap
            x = step
            if done:
                break
        else:
            x = 0.5 * (lo + hi)
    return x


def _clusters(r: np.ndarray, tol: float) -> List[List[int]]:
    groups = [[0]]
    for i in range(1, len(r)):
        if r[i] - r[groups[-1][0]] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def minimize_quadratic_sphere(J, a, b: float = 0.0) -> SecularSolution:
    """Global minimizer of ``q^T J q + 2 a^T q + b`` subject to ``|q| = 1``.

    Ties between candidates are broken by the smaller multiplier.
    """
    J = np.asarray(J, dtype=float)
    J = 0.5 * (J + J.T)
    a = np.asarray(a, dtype=float)
    r, vecs = np.linalg.eigh(J)
    gv = vecs.T @ a
    radius = float(np.max(np.abs(r)))
    eps_deg = 1e-12 * (1.0 + float(np.linalg.norm(a)))
    groups = _clusters(r, 1e-10 * radius)
    rho = [float(np.mean(r[k])) for k in groups]
    wts = [float(np.sum(gv[k] ** 2)) for k in groups]
    active = [i for i, w in enumerate(wts) if math.sqrt(w) >= eps_deg]
    gnorm = math.sqrt(sum(wts[i] for i in active))

    def value(q):
        return float(q @ J @ q + 2 * a @ q + b)

    # candidates: (value, lam, q, hard, residual)
    cands = []

    def add_root(anchor_idx, x, fx):
        lam = rho[anchor_idx] + x
        c = np.zeros(4)
        for i in active:
            diff = (rho[anchor_idx] - rho[i]) + x
            for k in groups[i]:
                c[k] = gv[k] / diff
        q = vecs @ c
        q = q / np.linalg.norm(q)
        cands.append((value(q), lam, q, False, abs(fx), rho[anchor_idx], x))

    if active:
        act_rho = [rho[i] for i in active]
        act_w = [wts[i] for i in active]

        def local(idx):
            d = [rho[idx] - rh for rh in act_rho]
            return (lambda x: _f(x, d, act_w)), (lambda x: _df(x, d, act_w)), d

        first, last = active[0], active[-1]
        fun, dfun, _ = local(first)
        x, fx = _root(fun, dfun, -gnorm, -math.sqrt(wts[first]), increasing=True)
        add_root(first, x, fx)
        fun, dfun, _ = local(last)
        x, fx = _root(fun, dfun, math.sqrt(wts[last]), gnorm, increasing=False)
        add_root(last, x, fx)
        for left, right in zip(active[:-1], active[1:]):
            gap = rho[right] - rho[left]
            fl, dfl, dl = local(left)
            s = _interior_min(dl, act_w, gap, wts[left], wts[right])
            if s is None:
                continue
            fs = fl(s)
            if fs > 1e-10:
                continue
            if fs >= 0:
                add_root(left, s, fs)
                continue
            x, fx = _root(fl, dfl, math.sqrt(wts[left]), s, increasing=False)
            add_root(left, x, fx)
            fr, dfr, _ = local(right)
            x, fx = _root(fr, dfr, s - gap, -math.sqrt(wts[right]), increasing=True)
            add_root(right, x, fx)

    n_roots = len(cands)
    # hard case: Lambda sits on an eigenvalue whose direction a does not see
    for k, grp in enumerate(groups):
        if k in active:
            continue
        c = np.zeros(4)
        for i in active:
            for idx in groups[i]:
                c[idx] = gv[idx] / (rho[k] - rho[i])
        rad = 1.0 - float(c @ c)
        if rad < 0:
            continue
        for sgn in (1.0, -1.0):
            cc = c.copy()
            cc[grp[0]] = sgn * math.sqrt(rad)
            q = vecs @ cc
            q = q / np.linalg.norm(q)
            cands.append((value(q), rho[k], q, True, 0.0, rho[k], 0.0))

    if not cands:
        # cannot happen for a compact sphere; fall back to the smallest eigenvector
        q = vecs[:, 0]
        return SecularSolution(float(r[0]), q, value(q), True, 0.0, 0, float(r[0]), 0.0)
    best_val = min(c[0] for c in cands)
    tie = 1e-12 * (1.0 + abs(best_val))
    best = min((c for c in cands if c[0] <= best_val + tie), key=lambda c: c[1])
    return SecularSolution(best[1], best[2], best[0], best[3], best[4], n_roots, best[5], best[6])


def maximize_quadratic_sphere(J, a, b: float = 0.0) -> SecularSolution:
    sol = minimize_quadratic_sphere(-np.asarray(J), -np.asarray(a), -b)
    sol.value = -sol.value
    return sol


def minimize_eigen(J) -> Tuple[np.ndarray, float]:
    """Unit minimizer of ``q^T J q``: the lowest eigenvector."""
    w, v = np.linalg.eigh(0.5 * (np.asarray(J) + np.asarray(J).T))
    return v[:, 0], float(w[0])


# --------------------------------------------------------------------------
# per-unit updates


def _environment(circuit, unit, cost, shots, rng):
    env = GateEnvironment(circuit, unit, cost)
    if shots is not None:
        env.shots = shots
        env.rng = rng
    return env


def update_single_gate(
    circuit: Circuit,
    unit: Sequence[int],
    cost,
    shots: Optional[int] = None,
    rng=None,
    config: Optional[ParameterConfiguration] = None,
    env: Optional[GateEnvironment] = None,
):
    """Fit the landscape of one gate, solve for its optimum and write it back.

    Uncontrolled gates use the 10-point fit and an eigen solve; controlled,
    negative-controlled and number-preserving gates use the 14-point fit and
    the secular solve. Returns ``(circuit, predicted_cost, evaluations)``.
    """
    (idx,) = unit
    gate = circuit.gates[idx]
    env = env or _environment(circuit, unit, cost, shots, rng)
    before = env.evaluations
    exact = shots is None
    old = gate.params.copy()
    if gate.kind == g.SINGLE:
        model = estimate_single(env, config, check=exact)
        q, predicted = minimize_eigen(model.J)
    elif gate.kind in (g.CONTROLLED, g.NEG_CONTROLLED, g.NUMBER_PRESERVING):
        model = estimate_controlled(env, config, check=exact)
        sol = minimize_quadratic_sphere(model.J, model.a, model.b)
        q, predicted = sol.q_star, sol.value
    else:
        raise ValueError(f"gate {idx} ({gate.kind}) has no trainable parameters")
    old_pred = model.predict(old)
    if old_pred < predicted:
        q, predicted = old, old_pred
    gate.params = g.normalize(q)
    return circuit, predicted, env.evaluations - before


@dataclass
class ScfResult:
    p: np.ndarray
    q: np.ndarray
    value: float
    solves: int
    history: List[float] = field(default_factory=list)


def scf_minimize(model, p0, q0, threshold: float = DEFAULT_THRESHOLD, max_iter: int = SCF_MAX_ITER) -> ScfResult:
    """Alternate exact solves on ``p`` and ``q`` of a fitted pair model.

    A side is skipped (and the loop ends) when its linear term is unchanged
    since it was last solved, because the solve would return the same point.
    """
    p = np.asarray(p0, dtype=float)
    q = np.asarray(q0, dtype=float)
    y0 = model.predict(p, q)
    history = [y0]
    last_a = {"p": None, "q": None}
    solves = 0
    for _ in range(max_iter):
        moved = False
        for side in ("p", "q"):
            sl: ControlledModel = model.p_slice(q) if side == "p" else model.q_slice(p)
            if last_a[side] is not None and np.array_equal(sl.a, last_a[side]):
                continue
            last_a[side] = sl.a.copy()
            sol = minimize_quadratic_sphere(sl.J, sl.a, sl.b)
            solves += 1
            cur = sl.predict(p if side == "p" else q)
            if sol.value <= cur:
                if side == "p":
                    p = sol.q_star
                else:
                    q = sol.q_star
            moved = True
        y1 = model.predict(p, q)
        history.append(y1)
        if not moved or y0 - y1 <= threshold:
            break
        y0 = y1
    return ScfResult(p, q, model.predict(p, q), solves, history)


def scf_update_pair(
    circuit: Circuit,
    unit: Sequence[int],
    cost,
    threshold: float = DEFAULT_THRESHOLD,
    shots: Optional[int] = None,
    rng=None,
    config: Optional[ParameterConfiguration] = None,
    env: Optional[GateEnvironment] = None,
):
    """35-point pair fit followed by self-consistent alternation.

    Returns ``(circuit, predicted_cost, evaluations)``.
    """
    a, b = unit
    neg, pos = (a, b) if circuit.gates[a].kind == g.NEG_CONTROLLED else (b, a)
    env = env or _environment(circuit, unit, cost, shots, rng)
    before = env.evaluations
    model = estimate_pair(env, config, check=shots is None)
    res = scf_minimize(model, circuit.gates[neg].params, circuit.gates[pos].params, threshold)
    circuit.gates[neg].params = g.normalize(res.p)
    circuit.gates[pos].params = g.normalize(res.q)
    return circuit, res.value, env.evaluations - before


# --------------------------------------------------------------------------
# sweeps


@dataclass
class Trajectory:
    """Records ``(sweep, unit, cost, cumulative_evaluations)``.

    The first record is the initial cost with sweep 0 and unit -1.
    ``switch_sweep`` marks a change of cost function (compilation), after
    which costs are not comparable with earlier records.
    """

    records: List[Tuple[int, int, float, int]] = field(default_factory=list)
    switch_sweep: Optional[int] = None
    method: str = ""

    @property
    def final_cost(self) -> float:
        return self.records[-1][2]

    @property
    def evaluations(self) -> int:
        return self.records[-1][3] if self.records else 0

    def costs(self) -> np.ndarray:
        return np.array([r[2] for r in self.records])

    def max_increase(self) -> float:
        """Largest step-to-step cost increase, ignoring a cost-function switch."""
        worst = 0.0
        for prev, cur in zip(self.records[:-1], self.records[1:]):
            if self.switch_sweep is not None and prev[0] <= self.switch_sweep < cur[0]:
                continue
            worst = max(worst, cur[2] - prev[2])
        return worst

    def is_monotone(self, tol: float = 1e-10) -> bool:
        return self.max_increase() <= tol


def _check_method(circuit: Circuit, method: Optional[str]):
    if method is None:
        return
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    allowed = {FQS: {UNIT_SINGLE}, CFQS: {UNIT_SINGLE, UNIT_CONTROLLED}, SCF_CFQS: {UNIT_SINGLE, UNIT_PAIR}}[method]
    for unit in circuit.schedule:
        kind = circuit.unit_kind(unit)
        if kind not in allowed:
            raise ValueError(f"method {method} cannot update a {kind} unit")


def run_sweeps(
    circuit: Circuit,
    cost,
    sweeps: int,
    method: Optional[str] = None,
    threshold: float = DEFAULT_THRESHOLD,
    shots: Optional[int] = None,
    rng_seed=None,
    config: Optional[ParameterConfiguration] = None,
) -> Trajectory:
    """Update every unit of ``circuit.schedule`` once per sweep, in place.

    ``cost`` is a cost object; if it has a ``cost_at(sweep)`` method the cost
    may change between sweeps (0-based sweep index). Each record holds the
    exact cost after the update (no extra evaluations are charged for it).
    """
    if sweeps < 0:
        raise ValueError("sweeps must be >= 0")
    if not circuit.schedule:
        raise ValueError("circuit has an empty update schedule")
    _check_method(circuit, method)
    rng = np.random.default_rng(rng_seed)
    traj = Trajectory(method=method or "")
    switch = getattr(cost, "switch", None)
    if switch is not None and 0 < switch < sweeps:
        traj.switch_sweep = int(switch)
    cost0 = cost.cost_at(0)
    traj.records.append((0, -1, float(cost0(circuit)), 0))
    total = 0
    for s in range(sweeps):
        c = cost.cost_at(s)
        for u, unit in enumerate(circuit.schedule):
            env = _environment(circuit, unit, c, shots, rng)
            kind = circuit.unit_kind(unit)
            if kind == UNIT_PAIR:
                _, _, used = scf_update_pair(circuit, unit, c, threshold, shots, rng, config, env)
                params = _pair_params(circuit, unit)
            else:
                _, _, used = update_single_gate(circuit, unit, c, shots, rng, config, env)
                params = (circuit.gates[unit[0]].params,)
            total += used
            traj.records.append((s + 1, u, env.exact(*params), total))
    return traj


def _pair_params(circuit, unit):
    a, b = unit
    if circuit.gates[a].kind == g.NEG_CONTROLLED:
        return circuit.gates[a].params, circuit.gates[b].params
    return circuit.gates[b].params, circuit.gates[a].params
