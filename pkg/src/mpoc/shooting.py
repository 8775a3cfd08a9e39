"""Two-point boundary value solver for a fixed arc structure.

Unknowns are the initial costate and the switching times.  The residual
stacks the terminal transversality mismatch lam(T) - P x(T) with one scalar
junction condition per switching event, and is driven to zero by damped
Newton with a finite-difference Jacobian.  State and costate continuity
across switches hold by construction because the trajectory is propagated
forward through the arcs as a single (x, lambda, 1) vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate

from .errors import Degenerate, NoConvergence, TimeEscaped, TimesCollapsed
from .model import (ActiveSet, ArcDynamics, LtiOcProblem, PointState,
                    assemble_arc_system, point_state)

ENTRY = "entry"
EXIT = "exit"

RESIDUAL_TOL = 1e-10
MAX_NEWTON_ITER = 50
TIME_COLLAPSE_TOL = 1e-9


@dataclass(frozen=True)
class SwitchEvent:
    kind: str  # ENTRY or EXIT
    row: int

    def __post_init__(self):
        if self.kind not in (ENTRY, EXIT):
            raise ValueError(f"bad event kind {self.kind!r}")


@dataclass(frozen=True)
class ArcStructure:
    """Ordered active sets with the switch events separating them."""

    arcs: tuple
    events: tuple = ()

    def __post_init__(self):
        arcs = tuple(a if isinstance(a, ActiveSet) else ActiveSet(tuple(a))
                     for a in self.arcs)
        events = tuple(self.events)
        object.__setattr__(self, "arcs", arcs)
        object.__setattr__(self, "events", events)
        if len(arcs) != len(events) + 1:
            raise ValueError("need exactly one more arc than events")
        for j, ev in enumerate(events):
            before, after = arcs[j], arcs[j + 1]
            if ev.kind == ENTRY:
                ok = after.indices == before.add(ev.row).indices and ev.row not in before
            else:
                ok = before.indices == after.add(ev.row).indices and ev.row not in after
            if not ok:
                raise ValueError(f"event {j} ({ev.kind} {ev.row}) inconsistent "
                                 f"with arcs {before.indices} -> {after.indices}")

    @property
    def n_switches(self) -> int:
        return len(self.events)

    @property
    def signature(self) -> tuple:
        return (tuple(a.indices for a in self.arcs),
                tuple((e.kind, e.row) for e in self.events))

    def label(self) -> str:
        return " -> ".join(a.label() for a in self.arcs)


def unconstrained_structure() -> ArcStructure:
    return ArcStructure(arcs=(ActiveSet(),))


def _inactive_side_arc(structure: ArcStructure, j: int) -> int:
    """Arc index whose law keeps the event's constraint inactive."""
    return j if structure.events[j].kind == ENTRY else j + 1


def shoot_residuals(problem: LtiOcProblem, structure: ArcStructure,
                    unknowns: np.ndarray, x0: np.ndarray,
                    dynamics=None) -> np.ndarray:
    """Transversality plus one junction scalar per event.

    For an entry event the residual is g_i at t_s under the pre-switch
    (inactive-side) control law; for an exit event it is g_i under the
    post-switch law.  Both amount to mu_i(t_s) = 0 by control continuity.
    """
    n = problem.n
    unknowns = np.asarray(unknowns, dtype=float)
    lam0 = unknowns[:n]
    times = unknowns[n:]
    ns = structure.n_switches
    if times.size != ns:
        raise ValueError("unknowns length mismatch")
    if ns:
        if np.any(np.diff(times) <= 0) or times[0] <= 0 or times[-1] >= problem.T:
            raise Degenerate(f"switching times {times} unsorted or out of (0, T)")
    if dynamics is None:
        dynamics = [assemble_arc_system(problem, a) for a in structure.arcs]

    z = np.concatenate([np.asarray(x0, float).reshape(n), lam0, [1.0]])
    bounds = np.concatenate([[0.0], times, [problem.T]])
    res_events = np.empty(ns)
    for j in range(ns):
        z = dynamics[j].propagate(z, bounds[j + 1] - bounds[j])
        x, lam = z[:n], z[n:2 * n]
        side = dynamics[_inactive_side_arc(structure, j)]
        u = side.u_map(x, lam)
        row = structure.events[j].row
        res_events[j] = problem.Gx[row] @ x + problem.Gu[row] @ u - problem.b[row]
    z = dynamics[-1].propagate(z, bounds[-1] - bounds[-2])
    xT, lamT = z[:n], z[n:2 * n]
    return np.concatenate([lamT - problem.P @ xT, res_events])


@dataclass(frozen=True)
class SolvedTrajectory:
    """Exact multi-arc solution: per-arc exponentials plus switching times."""

    problem: LtiOcProblem
    structure: ArcStructure
    t_switch: tuple
    x0: np.ndarray
    lam0: np.ndarray
    dynamics: tuple
    arc_starts: tuple  # z = (x, lam, 1) at the start of each arc
    cost: float

    @property
    def arc_bounds(self):
        ts = (0.0, *self.t_switch, self.problem.T)
        return [(ts[k], ts[k + 1]) for k in range(len(self.dynamics))]

    def arc_index(self, t: float) -> int:
        for k, ts in enumerate(self.t_switch):
            if t < ts:
                return k
        return len(self.dynamics) - 1

    def point(self, t: float, arc: int | None = None) -> PointState:
        if arc is None:
            arc = self.arc_index(t)
        n = self.problem.n
        ta, _ = self.arc_bounds[arc]
        z = self.dynamics[arc].propagate(self.arc_starts[arc], t - ta)
        return point_state(self.problem, self.dynamics[arc], t, z[:n], z[n:2 * n])

    def sample_arc(self, arc: int, ts: np.ndarray) -> dict:
        """Vectorised samples on one arc: x, lam, u, mu (active rows), g, H columns per time."""
        n = self.problem.n
        ta, _ = self.arc_bounds[arc]
        dyn = self.dynamics[arc]
        Z = dyn.flow(self.arc_starts[arc], np.asarray(ts, float) - ta)
        x, lam = Z[:n], Z[n:2 * n]
        u = dyn.u_map(x, lam)
        mu_a = dyn.mu_map(x, lam)
        g = self.problem.constraint_values(x, u)
        H = (0.5 * (np.einsum("it,ij,jt->t", x, self.problem.Q, x)
                    + np.einsum("it,ij,jt->t", u, self.problem.R, u))
             + np.einsum("it,it->t", lam, self.problem.A @ x + self.problem.B @ u))
        if len(dyn.active):
            H = H + np.einsum("it,it->t", mu_a, g[list(dyn.active.indices)])
        return {"t": np.asarray(ts, float), "x": x, "lam": lam, "u": u,
                "mu_active": mu_a, "g": g, "H": H}


def _running_cost_integral(problem, dyn, z_start, t_a, t_b):
    n = problem.n

    def integrand(t):
        z = dyn.propagate(z_start, t - t_a)
        x, lam = z[:n], z[n:2 * n]
        u = dyn.u_map(x, lam)
        return 0.5 * (x @ problem.Q @ x + u @ problem.R @ u)

    val, _ = scipy.integrate.quad(integrand, t_a, t_b, epsabs=1e-10, limit=200)
    return val


def solve_fixed_structure(problem: LtiOcProblem, x0, structure: ArcStructure,
                          guess=None, tol: float = RESIDUAL_TOL,
                          max_iter: int = MAX_NEWTON_ITER) -> SolvedTrajectory:
    """Newton shooting over (lam0, t_1..t_Ns) for the given arc structure."""
    n = problem.n
    x0 = np.asarray(x0, dtype=float).reshape(n)
    ns = structure.n_switches
    dynamics = [assemble_arc_system(problem, a) for a in structure.arcs]

    if guess is None:
        lam0 = problem.P @ x0
        times = problem.T * (np.arange(1, ns + 1) / (ns + 1))
    else:
        lam0, times = guess
        lam0 = np.asarray(lam0, dtype=float).reshape(n)
        times = np.asarray(times, dtype=float).reshape(ns)
    xi = np.concatenate([lam0, times])

    def residual(v):
        return shoot_residuals(problem, structure, v, x0, dynamics)

    F = residual(xi)
    for _ in range(max_iter):
        if np.max(np.abs(F)) <= tol:
            break
        J = _fd_jacobian(residual, xi, F)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(J, -F, rcond=None)

        # keep switching times strictly inside (0, T)
        alpha_max = 1.0
        blocking, direction = None, None
        for i in range(ns):
            ti, di = xi[n + i], step[n + i]
            if di < 0 and ti + di <= 0:
                frac = 0.999 * ti / (-di)
                if frac < alpha_max:
                    alpha_max, blocking, direction = frac, i, "low"
            elif di > 0 and ti + di >= problem.T:
                frac = 0.999 * (problem.T - ti) / di
                if frac < alpha_max:
                    alpha_max, blocking, direction = frac, i, "high"
        if alpha_max < 1e-6:
            raise TimeEscaped(blocking, direction)

        alpha = alpha_max
        f_norm = np.max(np.abs(F))
        accepted = False
        for _halving in range(20):
            xi_new = xi + alpha * step
            try:
                F_new = residual(xi_new)
            except Degenerate:
                alpha *= 0.5
                continue
            if np.max(np.abs(F_new)) < f_norm:
                xi, F = xi_new, F_new
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            raise NoConvergence(
                f"line search stalled at residual {f_norm:.3e} for {structure.label()}")
        times_now = xi[n:]
        if ns > 1 and np.min(np.diff(times_now)) < TIME_COLLAPSE_TOL:
            raise TimesCollapsed(f"switching times collapsed: {times_now}")
    else:
        raise NoConvergence(
            f"no convergence after {max_iter} iterations for {structure.label()} "
            f"(residual {np.max(np.abs(F)):.3e})")

    lam0 = xi[:n]
    t_switch = tuple(float(t) for t in xi[n:])

    # forward pass for per-arc start states
    z = np.concatenate([x0, lam0, [1.0]])
    bounds = (0.0, *t_switch, problem.T)
    arc_starts = [z]
    for k in range(len(dynamics) - 1):
        z = dynamics[k].propagate(z, bounds[k + 1] - bounds[k])
        arc_starts.append(z)

    zT = dynamics[-1].propagate(arc_starts[-1], bounds[-1] - bounds[-2])
    xT = zT[:n]
    transversality = np.max(np.abs(zT[n:2 * n] - problem.P @ xT))
    if transversality > 1e-8:
        raise NoConvergence(f"transversality residual {transversality:.3e} above 1e-8")

    cost = 0.5 * xT @ problem.P @ xT
    for k, dyn in enumerate(dynamics):
        cost += _running_cost_integral(problem, dyn, arc_starts[k],
                                       bounds[k], bounds[k + 1])

    return SolvedTrajectory(problem=problem, structure=structure,
                            t_switch=t_switch, x0=x0, lam0=lam0,
                            dynamics=tuple(dynamics), arc_starts=tuple(arc_starts),
                            cost=float(cost))


def _fd_jacobian(fun, xi, F0):
    m, k = F0.size, xi.size
    J = np.empty((m, k))
    for i in range(k):
        h = 1e-6 * max(1.0, abs(xi[i]))
        xp, xm = xi.copy(), xi.copy()
        xp[i] += h
        xm[i] -= h
        try:
            Fp = fun(xp)
            Fm = fun(xm)
            J[:, i] = (Fp - Fm) / (2 * h)
        except Degenerate:
            # one-sided fallback when the perturbation unsorts the times
            try:
                J[:, i] = (fun(xp) - F0) / h
            except Degenerate:
                J[:, i] = (F0 - fun(xm)) / h
    return J


CHEBYSHEV_SAMPLES = 200


def _arc_sample_times(t_a, t_b, n_cheb=CHEBYSHEV_SAMPLES):
    k = np.arange(n_cheb)
    nodes = 0.5 * (t_a + t_b) + 0.5 * (t_b - t_a) * np.cos(np.pi * (2 * k + 1) / (2 * n_cheb))
    return np.unique(np.concatenate([[t_a], np.sort(nodes), [t_b]]))


@dataclass(frozen=True)
class ValidationReport:
    """Constraint/multiplier extrema and Hamiltonian jumps along a solved trajectory."""

    mu_min: float
    g_max: float
    max_hamiltonian_jump: float
    passed: bool
    worst_g: tuple | None  # (row, time, value) over inactive stretches
    worst_mu: tuple | None  # (row, time, value) over active windows


MU_TOL = 1e-7
G_TOL = 1e-7


def validate_solution(problem: LtiOcProblem, traj: SolvedTrajectory,
                      mu_tol: float = MU_TOL, g_tol: float = G_TOL) -> ValidationReport:
    """Sample every arc densely and report multiplier/constraint extrema."""
    mu_min, g_max = np.inf, -np.inf
    worst_g = worst_mu = None

    for k, (t_a, t_b) in enumerate(traj.arc_bounds):
        ts = _arc_sample_times(t_a, t_b)
        smp = traj.sample_arc(k, ts)
        active = traj.dynamics[k].active
        for pos, row in enumerate(active.indices):
            i_min = int(np.argmin(smp["mu_active"][pos]))
            val = smp["mu_active"][pos, i_min]
            if val < mu_min:
                mu_min = val
                worst_mu = (row, float(ts[i_min]), float(val))
        for row in range(problem.n_con):
            if row in active:
                continue
            i_max = int(np.argmax(smp["g"][row]))
            val = smp["g"][row, i_max]
            if val > g_max:
                g_max = val
                worst_g = (row, float(ts[i_max]), float(val))

    ham_jump = 0.0
    for j, ts in enumerate(traj.t_switch):
        before = traj.point(ts, arc=j)
        after = traj.point(ts, arc=j + 1)
        ham_jump = max(ham_jump, abs(before.H - after.H))

    if not np.isfinite(mu_min):
        mu_min = 0.0  # no active arcs anywhere
    if not np.isfinite(g_max):
        g_max = 0.0  # every constraint active everywhere

    passed = (mu_min >= -mu_tol) and (g_max <= g_tol)
    return ValidationReport(mu_min=float(mu_min), g_max=float(g_max),
                            max_hamiltonian_jump=float(ham_jump), passed=passed,
                            worst_g=worst_g, worst_mu=worst_mu)
