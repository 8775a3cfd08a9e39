"""Arc-structure discovery at a single initial state.

Starts from the unconstrained hypothesis and alternates between activating
the most-violated constraint over its violated time window and releasing
activations whose multiplier goes negative, re-solving the shooting problem
after each edit.  Switching times that escape (0, T) during a solve prune
the structure toward the corresponding horizon end.
"""

from __future__ import annotations

import numpy as np
import scipy.optimize

from .errors import (Infeasible, NoConvergence, NoStructure, SingularKkt,
                     TimeEscaped, TimesCollapsed)
from .model import ActiveSet, LtiOcProblem, assemble_arc_system
from .shooting import (ENTRY, EXIT, ArcStructure, SolvedTrajectory, SwitchEvent,
                       solve_fixed_structure, unconstrained_structure,
                       validate_solution, G_TOL, MU_TOL)

MAX_ROUNDS = 20
SCAN_POINTS = 400
MAX_EVENTS = 8


def _arc_row_values(traj, arc, row, ts):
    smp = traj.sample_arc(arc, ts)
    return smp["g"][row]


def _violation_windows(problem, traj, g_tol):
    """Per inactive (arc,row): integral of positive part and worst window.

    Returns (row, arc, integral, window (a, b), peak) for the most violated
    constraint, or None.  Windows are refined to the sign crossings by
    bisection; the peak by bounded golden-section/Brent refinement.
    """
    best = None
    for k, (t_a, t_b) in enumerate(traj.arc_bounds):
        ts = np.linspace(t_a, t_b, SCAN_POINTS)
        smp = traj.sample_arc(k, ts)
        active = traj.dynamics[k].active
        for row in range(problem.n_con):
            if row in active:
                continue
            g = smp["g"][row]
            pos = np.maximum(g, 0.0)
            integral = float(np.trapezoid(pos, ts))
            peak_idx = int(np.argmax(g))
            if g[peak_idx] <= g_tol:
                continue

            def g_of_t(t, _k=k, _row=row):
                p = traj.point(t, arc=_k)
                return p.g[_row]

            # refine the peak (the violated window around the worst point)
            lo = ts[max(peak_idx - 1, 0)]
            hi = ts[min(peak_idx + 1, len(ts) - 1)]
            if hi > lo:
                res = scipy.optimize.minimize_scalar(
                    lambda t: -g_of_t(t), bounds=(lo, hi), method="bounded")
                peak = float(-res.fun)
            else:
                peak = float(g[peak_idx])

            # walk outwards from the peak to the window's sign crossings
            i0 = peak_idx
            while i0 > 0 and g[i0 - 1] > 0:
                i0 -= 1
            i1 = peak_idx
            while i1 < len(ts) - 1 and g[i1 + 1] > 0:
                i1 += 1
            a = t_a if i0 == 0 and g[0] > 0 else float(
                scipy.optimize.brentq(g_of_t, ts[i0 - 1], ts[i0]))
            b = t_b if i1 == len(ts) - 1 and g[-1] > 0 else float(
                scipy.optimize.brentq(g_of_t, ts[i1], ts[i1 + 1]))
            if best is None or integral > best[2]:
                best = (row, k, integral, (a, b), peak)
    return best


def _normalize(arcs, events, times):
    """Merge consecutive equal active sets, dropping the events between them."""
    out_arcs = [arcs[0]]
    out_events, out_times = [], []
    for j, ev in enumerate(events):
        if arcs[j + 1].indices == out_arcs[-1].indices:
            continue
        out_arcs.append(arcs[j + 1])
        out_events.append(ev)
        out_times.append(times[j])
    return out_arcs, out_events, out_times


def _activate(structure, times, row, arc, window, touches_start, touches_end):
    """Splice an activation of `row` over `window` into arc `arc`."""
    a, b = window
    arcs = list(structure.arcs)
    events = list(structure.events)
    times = list(times)
    base = arcs[arc]
    lifted = base.add(row)

    new_arcs, new_events, new_times = [], [], []
    if not touches_start:
        new_arcs.append(base)
        new_events.append(SwitchEvent(ENTRY, row))
        new_times.append(a)
    new_arcs.append(lifted)
    if not touches_end:
        new_events.append(SwitchEvent(EXIT, row))
        new_times.append(b)
        new_arcs.append(base)

    arcs2 = arcs[:arc] + new_arcs + arcs[arc + 1:]
    events2 = events[:arc] + new_events + events[arc:]
    times2 = times[:arc] + new_times + times[arc:]
    arcs2, events2, times2 = _normalize(arcs2, events2, times2)
    return ArcStructure(arcs=tuple(arcs2), events=tuple(events2)), times2


def _deactivate(structure, times, row, time):
    """Release `row` on the activation window containing `time`."""
    arcs = list(structure.arcs)
    events = list(structure.events)
    times = list(times)
    bounds = [0.0, *times, np.inf]
    k = next(i for i in range(len(arcs))
             if bounds[i] <= time <= bounds[i + 1] and row in arcs[i])
    # expand to the maximal run of arcs where the row is active
    j0 = k
    while j0 > 0 and row in arcs[j0 - 1]:
        j0 -= 1
    j1 = k
    while j1 < len(arcs) - 1 and row in arcs[j1 + 1]:
        j1 += 1
    for j in range(j0, j1 + 1):
        arcs[j] = arcs[j].remove(row)
    arcs, events, times = _normalize(arcs, events, times)
    return ArcStructure(arcs=tuple(arcs), events=tuple(events)), times


def _prune(structure, times, event_index, direction):
    """Drop the escaping event and everything beyond it toward the horizon end."""
    if direction == "high":
        arcs = structure.arcs[:event_index + 1]
        events = structure.events[:event_index]
        times2 = list(times[:event_index])
    else:
        arcs = structure.arcs[event_index + 1:]
        events = structure.events[event_index + 1:]
        times2 = list(times[event_index + 1:])
    return ArcStructure(arcs=arcs, events=events), times2


def detect_structure(problem: LtiOcProblem, x0,
                     max_rounds: int = MAX_ROUNDS,
                     g_tol: float = G_TOL, mu_tol: float = MU_TOL):
    """Find an arc structure at x0 whose solution validates.

    Returns (structure, trajectory).  Raises Infeasible when a required
    activation has no admissible control, NoStructure when the refinement
    cap is reached.
    """
    x0 = np.asarray(x0, dtype=float).reshape(problem.n)
    if not problem.contains(x0, slack=1e-9):
        raise ValueError(f"x0={x0} outside the parameter box")

    structure = unconstrained_structure()
    times: list = []
    visited = {structure.signature}
    retried_default = False

    for _ in range(max_rounds):
        guess = (problem.P @ x0, np.asarray(times, dtype=float))
        try:
            traj = solve_fixed_structure(problem, x0, structure, guess=guess)
        except TimeEscaped as exc:
            pruned, pruned_times = _prune(structure, times, exc.event_index,
                                          exc.direction)
            if pruned.signature in visited:
                alt = "low" if exc.direction == "high" else "high"
                pruned, pruned_times = _prune(structure, times, exc.event_index, alt)
                if pruned.signature in visited:
                    raise NoStructure(
                        f"structure repair cycled at x0={x0}") from exc
            structure, times = pruned, pruned_times
            visited.add(structure.signature)
            continue
        except (NoConvergence, TimesCollapsed) as exc:
            if not retried_default and times:
                retried_default = True
                times = list(problem.T * (np.arange(1, structure.n_switches + 1)
                                          / (structure.n_switches + 1)))
                continue
            raise NoStructure(f"shooting failed at x0={x0}: {exc}") from exc

        times = list(traj.t_switch)
        worst = _violation_windows(problem, traj, g_tol)
        if worst is not None:
            row, arc, _integral, window, _peak = worst
            if structure.n_switches >= MAX_EVENTS:
                raise NoStructure(f"event cap {MAX_EVENTS} reached at x0={x0}")
            try:
                assemble_arc_system(problem, structure.arcs[arc].add(row))
            except SingularKkt as exc:
                raise Infeasible(
                    f"constraint {row} cannot be enforced together with "
                    f"{structure.arcs[arc].indices} at x0={x0}", row=row) from exc
            t_a, t_b = traj.arc_bounds[arc]
            g_at_start = traj.point(t_a, arc=arc).g[row]
            g_at_end = traj.point(t_b, arc=arc).g[row]
            structure, times = _activate(
                structure, times, row, arc, window,
                touches_start=(window[0] <= t_a + 1e-12) or g_at_start > 0,
                touches_end=(window[1] >= t_b - 1e-12) or g_at_end > 0)
            visited.add(structure.signature)
            continue

        report = validate_solution(problem, traj, mu_tol=mu_tol, g_tol=g_tol)
        if report.mu_min < -mu_tol:
            row, t_bad, _val = report.worst_mu
            structure, times = _deactivate(structure, times, row, t_bad)
            if structure.signature in visited:
                raise NoStructure(f"activation oscillated at x0={x0}")
            visited.add(structure.signature)
            continue
        if not report.passed:
            # residual violation below the scan threshold; refuse to loop
            raise NoStructure(f"validation failed at x0={x0}: {report}")
        return structure, traj

    raise NoStructure(f"round cap {max_rounds} reached at x0={x0}")
