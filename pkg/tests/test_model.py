"""Problem container, arc assembly, and matrix-exponential flow."""

import numpy as np
import pytest
import scipy.linalg

from mpoc import ActiveSet, LtiOcProblem, assemble_arc_system, matrix_exponential
from mpoc.errors import NonFinite, SingularKkt

from oracles import integrate_lti


def test_problem_validation_rejects_bad_shapes():
    with pytest.raises(ValueError):
        LtiOcProblem(A=[[0.0, 1.0]], B=[[1.0]], Q=[[1.0]], R=[[1.0]],
                     P=[[1.0]], Gx=[[1.0]], Gu=[[1.0]], b=[1.0], T=1.0,
                     theta_box=[[-1.0, 1.0]])


def test_problem_validation_rejects_indefinite_r(ex1):
    with pytest.raises(ValueError):
        LtiOcProblem(A=ex1.A, B=ex1.B, Q=ex1.Q, R=[[-1.0]], P=ex1.P,
                     Gx=ex1.Gx, Gu=ex1.Gu, b=ex1.b, T=ex1.T,
                     theta_box=ex1.theta_box)


def test_problem_arrays_are_frozen(ex1):
    with pytest.raises(ValueError):
        ex1.A[0, 0] = 5.0


def test_constraint_values_vectorized(ex1):
    xs = np.array([[0.0], [0.5]])
    us = np.array([[0.3], [0.8]])
    g = ex1.constraint_values(xs.T, us.T)
    assert g.shape == (3, 2)
    np.testing.assert_allclose(g[:, 0], [0.3 - 1, -0.3 - 1, 0.3 - 2])
    np.testing.assert_allclose(g[:, 1], [1.3 - 1, -1.3 - 1, 0.8 - 2])


def test_free_arc_generator_integrator(ex1):
    dyn = assemble_arc_system(ex1, ActiveSet(()))
    expected = np.array([[0.0, -1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    np.testing.assert_allclose(dyn.M, expected, atol=1e-14)


def test_active_lower_bound_generator_integrator(ex1):
    dyn = assemble_arc_system(ex1, ActiveSet((1,)))
    expected = np.array([[1.0, 0.0, 1.0], [-2.0, -1.0, -1.0], [0.0, 0.0, 0.0]])
    np.testing.assert_allclose(dyn.M, expected, atol=1e-14)


def test_free_arc_eigenvalues_two_state(ex2):
    dyn = assemble_arc_system(ex2, ActiveSet(()))
    eig = np.sort(np.linalg.eigvals(dyn.M[:4, :4]).real)
    np.testing.assert_allclose(eig, [-np.sqrt(2), -1.0, 1.0, np.sqrt(2)],
                               atol=1e-10)


def test_active_arc_eigenvalues_two_state(ex2):
    dyn = assemble_arc_system(ex2, ActiveSet((0,)))
    eig = np.sort(np.linalg.eigvals(dyn.M[:4, :4]).real)
    np.testing.assert_allclose(eig, [-2.0, -1.0, 1.0, 2.0], atol=1e-10)


def test_singular_kkt_raises(ex1):
    # rows 1 (lower output bound) and 2 (input bound) have dependent input
    # directions together with the scalar input
    with pytest.raises(SingularKkt):
        assemble_arc_system(ex1, ActiveSet((0, 1)))


def test_arc_cache_reuses_instances(ex1):
    d1 = assemble_arc_system(ex1, ActiveSet((1,)))
    d2 = assemble_arc_system(ex1, ActiveSet((1,)))
    assert d1 is d2


def test_matrix_exponential_matches_scipy():
    rng = np.random.default_rng(3)
    M = rng.normal(size=(5, 5))
    np.testing.assert_allclose(matrix_exponential(M, 0.7),
                               scipy.linalg.expm(0.7 * M), rtol=1e-12)


def test_matrix_exponential_rejects_nonfinite():
    M = np.array([[np.nan, 0.0], [0.0, 0.0]])
    with pytest.raises(NonFinite):
        matrix_exponential(M, 1.0)


def test_arc_flow_matches_ode_oracle(ex2):
    """Homogenized-coordinates flow equals high-accuracy ODE integration."""
    dyn = assemble_arc_system(ex2, ActiveSet((0,)))
    z0 = np.array([-0.9, -1.6, 0.3, -0.2, 1.0])
    taus = np.linspace(0.0, 1.5, 7)
    flow = dyn.flow(z0, taus)

    sol = integrate_lti(dyn.M, np.zeros((5, 1)), z0, lambda t: [0.0],
                        (0.0, 1.5))
    for j, tau in enumerate(taus):
        np.testing.assert_allclose(flow[:, j], sol.sol(tau), atol=1e-9)


def test_arc_control_recovery_on_active_constraint(ex2):
    """On an active arc the recovered input keeps the constraint at zero."""
    dyn = assemble_arc_system(ex2, ActiveSet((0,)))
    rng = np.random.default_rng(11)
    for _ in range(5):
        x = rng.normal(size=2)
        lam = rng.normal(size=2)
        u = dyn.u_map(x, lam)
        g = ex2.constraint_values(x, u)
        assert abs(g[0]) < 1e-12
