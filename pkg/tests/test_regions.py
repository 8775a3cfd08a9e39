"""Critical-region exploration over the initial-state box."""

import numpy as np
import pytest

from mpoc import (boundary_values, detect_structure, explore_regions,
                  fit_switching_times, refine_boundary_1d, regions_from_dict,
                  regions_to_dict)
from mpoc.errors import SameStructure, TooFewSamples
from mpoc.regions import StructureClassifier


EX1_BREAKPOINTS = [-1.0 - 2 * np.exp(-2.0), -1.0 + 0.5 * np.exp(-2.0),
                   -0.5, 0.5, 1.0 - 0.5 * np.exp(-2.0)]


def test_ex1_region_count_and_breakpoints(ex1_regions):
    assert len(ex1_regions) == 5
    edges = [ex1_regions[0].inequalities[0].lo]
    for r in ex1_regions:
        edges.append(r.inequalities[0].hi)
    np.testing.assert_allclose(edges[:-1], EX1_BREAKPOINTS, atol=1e-3)
    assert edges[-1] == pytest.approx(2.0)


def test_ex1_region_labels_and_structures(ex1_regions):
    labels = [(r.label, r.structure.label()) for r in ex1_regions]
    assert labels == [("CR01", "g1"), ("CR02", "g1 -> free"), ("CR03", "free"),
                      ("CR04", "g0 -> free"), ("CR05", "g0")]


def test_ex1_switching_time_fit_quality(ex1_regions):
    cr02 = ex1_regions[1]
    assert len(cr02.t_s_fit) == 1
    assert cr02.t_s_fit[0].r2 >= 0.999


def test_ex1_cubic_fit_sup_error_bound(ex1_regions):
    """Max deviation of the cubic fit from the closed form over the region."""
    cr02 = ex1_regions[1]
    fit = cr02.t_s_fit[0]
    xs = np.linspace(cr02.inequalities[0].lo, cr02.inequalities[0].hi, 2001)
    exact = np.log(1.0 / (2.0 * (xs + 1.0)))
    sup_err = float(np.max(np.abs(fit(xs[:, None]) - exact)))
    assert sup_err <= 0.02


def test_region_membership_is_exclusive(ex1, ex1_regions):
    rng = np.random.default_rng(2)
    feasible_lo = ex1_regions[0].inequalities[0].lo
    for x0 in rng.uniform(feasible_lo + 1e-3, 2.0 - 1e-3, size=50):
        hits = [r for r in ex1_regions if r.contains([x0], tol=0.0)]
        assert len(hits) >= 1
        # interiors overlap only within boundary tolerance
        strict = [r for r in hits
                  if r.inequalities[0].lo + 1e-9 < x0 < r.inequalities[0].hi - 1e-9]
        assert len(strict) <= 1


def test_refine_boundary_1d(ex1):
    classify = StructureClassifier(ex1)
    sA, _ = detect_structure(ex1, [-0.6])
    sB, _ = detect_structure(ex1, [-0.4])
    edge = refine_boundary_1d(ex1, sA, sB, (-0.6, -0.4), classifier=classify)
    assert edge == pytest.approx(-0.5, abs=1e-5)


def test_refine_boundary_same_structure_raises(ex1):
    sA, _ = detect_structure(ex1, [0.1])
    with pytest.raises(SameStructure):
        refine_boundary_1d(ex1, sA, sA, (0.0, 0.2))


def test_boundary_values_active_region(ex1):
    _, traj = detect_structure(ex1, [-0.8])
    G_bar, mu_bar = boundary_values(ex1, traj, [-0.8])
    assert G_bar.max() <= 1e-7  # no inactive row violated
    assert 1 in mu_bar
    assert mu_bar[1] >= -1e-7  # active multiplier stays nonnegative


def test_fit_switching_times_discards_foreign_samples(ex1):
    structure, _ = detect_structure(ex1, [-0.8])
    xs = np.linspace(-0.9, -0.55, 12)[:, None]  # spans CR02 plus neighbours
    fits = fit_switching_times(ex1, structure, xs, degree=2)
    assert len(fits) == 1
    # fitted over retained samples only; domain must sit inside CR02
    lo, hi = fits[0].domain[0]
    assert lo > -0.94 and hi < -0.49


def test_fit_switching_times_no_samples_raises(ex1):
    structure, _ = detect_structure(ex1, [-0.8])
    with pytest.raises(TooFewSamples):
        fit_switching_times(ex1, structure, np.array([[0.0], [0.1]]), degree=1)


def test_shrunk_box_single_region(ex1):
    from mpoc import LtiOcProblem
    small = LtiOcProblem(A=ex1.A, B=ex1.B, Q=ex1.Q, R=ex1.R, P=ex1.P,
                         Gx=ex1.Gx, Gu=ex1.Gu, b=ex1.b, T=ex1.T,
                         theta_box=[[-0.2, 0.2]])
    regions = explore_regions(small, grid=41)
    assert len(regions) == 1
    assert regions[0].structure.label() == "free"


def test_ex2_region_count(ex2_regions):
    assert len(ex2_regions) == 5


def test_ex2_borders_match_reference(ex2_regions):
    """Fitted borders agree with the known half-plane descriptions."""
    reference = {
        ("free", "g0 -> free"): (np.array([-1.0, 1.0]), 1.2 / 3.36),
        ("g0 -> free", "g0"): (np.array([-1.0, 1.0]), 0.61),
        ("free", "g1 -> free"): (np.array([1.0, -1.0]), 2.0 / 3.36),
        ("g1 -> free", "g1"): (np.array([1.0, -1.0]), 1.01),
    }
    by_label = {r.structure.label(): r for r in ex2_regions}
    for (inner, outer), (a_ref, b_ref) in reference.items():
        shared = _shared_border(by_label[inner], by_label[outer])
        assert shared is not None, (inner, outer)
        a, b = shared
        # orient like the reference (the inner region on the <= side)
        if a @ a_ref < 0:
            a, b = -a, -b
        np.testing.assert_allclose(a, a_ref, atol=0.05)
        assert b == pytest.approx(b_ref, abs=0.05)


def _shared_border(r1, r2, tol=1e-6):
    for c1 in r1.inequalities:
        for c2 in r2.inequalities:
            if (np.allclose(c1.a, -c2.a, atol=tol)
                    and abs(c1.b + c2.b) < tol):
                return c1.a, c1.b
    return None


def test_ex2_switch_surface_fit(ex2_regions):
    by_label = {r.structure.label(): r for r in ex2_regions}
    fit = by_label["g1 -> free"].t_s_fit[0]
    assert fit.r2 >= 0.99
    # region-wide fit, so only coarse pointwise agreement is guaranteed
    assert fit([[-0.95, -1.65]])[0] == pytest.approx(0.1396, abs=0.05)


def test_regions_json_roundtrip(ex1_regions):
    import json
    data = json.loads(json.dumps(regions_to_dict(ex1_regions)))
    reloaded = regions_from_dict(data)
    rng = np.random.default_rng(9)
    thetas = rng.uniform(-2.0, 2.0, size=1000)
    for th in thetas:
        before = [r.contains([th]) for r in ex1_regions]
        after = [r.contains([th]) for r in reloaded]
        assert before == after
    for r0, r1 in zip(ex1_regions, reloaded):
        for f0, f1 in zip(r0.t_s_fit, r1.t_s_fit):
            xs = rng.uniform(*f0.domain[0], size=50)[:, None]
            np.testing.assert_array_equal(f0(xs), f1(xs))
