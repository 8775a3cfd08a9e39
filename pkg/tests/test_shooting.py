"""Fixed-structure boundary-value solves and solution validation."""

import numpy as np
import pytest

from mpoc import (ActiveSet, ArcStructure, SwitchEvent, solve_fixed_structure,
                  unconstrained_structure, validate_solution)
from mpoc.errors import TimeEscaped
from mpoc.shooting import ENTRY, EXIT

from oracles import integrate_lti


def two_arc_exit(row):
    return ArcStructure(arcs=(ActiveSet((row,)), ActiveSet(())),
                        events=(SwitchEvent(EXIT, row),))


def test_unconstrained_zero_initial_state(ex1):
    traj = solve_fixed_structure(ex1, [0.0], unconstrained_structure())
    assert traj.cost == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.abs(traj.point(1.0).x) < 1e-12)


def test_unconstrained_cost_closed_form(ex1):
    """For the scalar problem the free optimum has J = x0^2 / 2 inside the
    inactive region (costate and state symmetric under tanh weighting)."""
    traj = solve_fixed_structure(ex1, [0.3], unconstrained_structure())
    assert traj.cost == pytest.approx(0.5 * 0.3 ** 2, rel=1e-9)


def test_switching_time_closed_form(ex1):
    """Entry structure on the lower output bound: t_s = ln(1/(2 (x0 + 1)))."""
    for x0 in (-0.8, -0.7, -0.6):
        traj = solve_fixed_structure(ex1, [x0], two_arc_exit(1))
        assert traj.t_switch[0] == pytest.approx(np.log(1 / (2 * (x0 + 1))),
                                                 abs=1e-10)


def test_transversality_satisfied(ex2):
    traj = solve_fixed_structure(ex2, [-0.3, 0.4], unconstrained_structure())
    end = traj.point(ex2.T)
    np.testing.assert_allclose(end.lam, ex2.P @ end.x, atol=1e-9)


def test_two_state_switch_time(ex2):
    traj = solve_fixed_structure(ex2, [-0.95, -1.65], two_arc_exit(1))
    assert traj.t_switch[0] == pytest.approx(0.1396, abs=2e-3)


def test_state_matches_ode_oracle(ex2):
    """The shooting trajectory solves the closed-loop ODE to high accuracy."""
    traj = solve_fixed_structure(ex2, [-0.95, -1.65], two_arc_exit(1))

    def u_of_t(t):
        return traj.point(min(t, ex2.T)).u

    sol = integrate_lti(ex2.A, ex2.B, [-0.95, -1.65], u_of_t, (0.0, ex2.T),
                        rtol=1e-10, atol=1e-10)
    for t in np.linspace(0.0, ex2.T, 9):
        np.testing.assert_allclose(traj.point(t).x, sol.sol(t), atol=1e-6)


def test_cost_matches_quadrature_oracle(ex1):
    """Arc-wise quadrature cost equals a brute-force trapezoid integral."""
    traj = solve_fixed_structure(ex1, [-0.8], two_arc_exit(1))
    ts = np.linspace(0.0, ex1.T, 20001)
    integrand = np.array([
        0.5 * (p.x @ ex1.Q @ p.x + p.u @ ex1.R @ p.u)
        for p in (traj.point(t) for t in ts)])
    xT = traj.point(ex1.T).x
    brute = np.trapezoid(integrand, ts) + 0.5 * xT @ ex1.P @ xT
    assert traj.cost == pytest.approx(brute, rel=1e-7)


def test_time_escape_raises_with_direction(ex1):
    # deep in the fully-active region the exit time wants to pass T
    with pytest.raises(TimeEscaped) as exc_info:
        solve_fixed_structure(ex1, [-1.1], two_arc_exit(1))
    assert exc_info.value.direction == "high"
    assert exc_info.value.event_index == 0


def test_validation_report_clean_solution(ex1):
    traj = solve_fixed_structure(ex1, [-0.8], two_arc_exit(1))
    report = validate_solution(ex1, traj)
    assert report.passed
    assert report.mu_min >= -1e-7
    assert report.g_max <= 1e-7
    assert report.max_hamiltonian_jump <= 1e-8


def test_validation_flags_wrong_structure(ex1):
    """Forcing the free structure at a constrained point must violate g."""
    traj = solve_fixed_structure(ex1, [1.5], unconstrained_structure())
    report = validate_solution(ex1, traj)
    assert not report.passed
    assert report.g_max > 1e-3


def test_structure_label_roundtrip():
    s = two_arc_exit(1)
    assert s.label() == "g1 -> free"
    assert s.n_switches == 1
