"""Critical-region construction over the initial-state box.

Classifies a grid of initial states by detected arc structure, refines the
boundaries between structures (bisection in 1D, bisection plus total least
squares half-plane fitting in 2D), and fits per-event polynomial
switching-time functions on the samples retained inside each region.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .errors import (Infeasible, NonAffineBoundary, NoStructure, SameStructure,
                     TooFewSamples)
from .fitting import FittedPolynomial, fit_polynomial
from .model import LtiOcProblem
from .shooting import ArcStructure, SolvedTrajectory
from .structure import detect_structure

INFEASIBLE = "infeasible"
BOUNDARY_BISECT_TOL = 1e-6
GOLDEN_SCAN_POINTS = 400


# ---------------------------------------------------------------------------
# region boundary values along one trajectory


def boundary_values(problem: LtiOcProblem, traj: SolvedTrajectory, x0):
    """Most-restrictive constraint and multiplier values for one solution.

    Returns (G_bar, mu_bar): G_bar[i] is the maximum of g_i over the times
    where row i is inactive (-inf if it is active everywhere), mu_bar maps
    each row with an active window to the minimum multiplier value on it.
    Extrema are located on a dense per-arc grid and refined by bounded
    golden-section/Brent search.
    """
    c = problem.n_con
    G_bar = np.full(c, -np.inf)
    mu_bar: dict = {}

    def refine(fun, t_lo, t_hi, t_seed, maximize):
        if t_hi <= t_lo:
            return fun(t_seed)
        sign = -1.0 if maximize else 1.0
        res = scipy.optimize.minimize_scalar(lambda t: sign * fun(t),
                                             bounds=(t_lo, t_hi), method="bounded")
        return sign * res.fun

    for k, (t_a, t_b) in enumerate(traj.arc_bounds):
        ts = np.linspace(t_a, t_b, GOLDEN_SCAN_POINTS)
        smp = traj.sample_arc(k, ts)
        active = traj.dynamics[k].active
        for row in range(c):
            if row in active:
                pos = active.indices.index(row)
                i_min = int(np.argmin(smp["mu_active"][pos]))
                lo = ts[max(i_min - 1, 0)]
                hi = ts[min(i_min + 1, len(ts) - 1)]
                val = refine(lambda t: traj.point(t, arc=k).mu[row],
                             lo, hi, ts[i_min], maximize=False)
                val = min(val, float(smp["mu_active"][pos, i_min]))
                mu_bar[row] = min(mu_bar.get(row, np.inf), float(val))
            else:
                i_max = int(np.argmax(smp["g"][row]))
                lo = ts[max(i_max - 1, 0)]
                hi = ts[min(i_max + 1, len(ts) - 1)]
                val = refine(lambda t: traj.point(t, arc=k).g[row],
                             lo, hi, ts[i_max], maximize=True)
                val = max(val, float(smp["g"][row, i_max]))
                G_bar[row] = max(G_bar[row], float(val))
    return G_bar, mu_bar


# ---------------------------------------------------------------------------
# region containers


@dataclass(frozen=True)
class Interval:
    """1-D region condition lo <= x0 <= hi."""

    lo: float
    hi: float

    def contains(self, theta, tol=0.0) -> bool:
        t = float(np.asarray(theta).ravel()[0])
        return self.lo - tol <= t <= self.hi + tol


@dataclass(frozen=True)
class HalfPlane:
    """Affine condition a . theta <= b."""

    a: np.ndarray
    b: float
    residual: float = 0.0  # max perpendicular misfit of the boundary points

    def value(self, theta):
        return np.asarray(theta, dtype=float) @ self.a - self.b

    def contains(self, theta, tol=0.0) -> bool:
        return bool(self.value(theta) <= tol * max(1.0, np.linalg.norm(self.a)))


@dataclass(frozen=True)
class CriticalRegionCT:
    """One continuous-time critical region: fixed arc structure plus its domain."""

    structure: ArcStructure
    inequalities: tuple
    t_s_fit: tuple  # one FittedPolynomial per switching event (may be empty)
    label: str
    samples: np.ndarray  # validated grid samples inside the region
    t_s_exact: str | None = None

    def contains(self, theta, box=None, tol=BOUNDARY_BISECT_TOL) -> bool:
        if box is not None:
            theta = np.asarray(theta, dtype=float).ravel()
            if np.any(theta < box[:, 0] - tol) or np.any(theta > box[:, 1] + tol):
                return False
        return all(c.contains(theta, tol=tol) for c in self.inequalities)


# ---------------------------------------------------------------------------
# classification with caching


class StructureClassifier:
    """detect_structure with memoisation; infeasible points get a sentinel label."""

    def __init__(self, problem: LtiOcProblem):
        self.problem = problem
        self._cache: dict = {}
        self.trajectories: dict = {}

    def __call__(self, x0):
        key = tuple(np.round(np.asarray(x0, dtype=float).ravel(), 12))
        if key in self._cache:
            return self._cache[key]
        try:
            structure, traj = detect_structure(self.problem, x0)
            sig = structure.signature
            self.trajectories[key] = (structure, traj)
        except (Infeasible, NoStructure):
            sig = INFEASIBLE
        self._cache[key] = sig
        return sig


# ---------------------------------------------------------------------------
# boundary refinement


def refine_boundary_1d(problem: LtiOcProblem, structA, structB, bracket,
                       classifier: StructureClassifier | None = None,
                       tol: float = BOUNDARY_BISECT_TOL) -> float:
    """Bisect on structure identity between two 1-D parameter points."""
    classify = classifier or StructureClassifier(problem)
    lo, hi = float(bracket[0]), float(bracket[1])
    sig_lo = classify([lo])
    sig_hi = classify([hi])
    if sig_lo == sig_hi:
        raise SameStructure(f"both endpoints of {bracket} classify as {sig_lo}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if classify([mid]) == sig_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _bisect_segment(classify, p, q, sig_p, tol):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    while np.linalg.norm(q - p) > tol:
        mid = 0.5 * (p + q)
        if classify(mid) == sig_p:
            p = mid
        else:
            q = mid
    return 0.5 * (p + q)


def fit_region_boundaries_2d(classify, grid_points, labels, pair,
                             theta_diam: float,
                             tol: float = BOUNDARY_BISECT_TOL) -> HalfPlane:
    """Total-least-squares half-plane through the bisected boundary points.

    `grid_points` is an (N, 2) array with `labels` per point; `pair` names the
    two classes whose common border is wanted.  Adjacent grid pairs straddling
    the border are bisected, then a line is fitted through the crossing points.
    The result is normalised so its largest coefficient has magnitude 1 and
    positive sign; orientation toward either region is the caller's business.
    """
    a_lbl, b_lbl = pair
    pts = np.asarray(grid_points, dtype=float)
    labels = list(labels)
    # adjacency from the grid layout: nearest-neighbour distance
    dists = np.unique(np.round(np.linalg.norm(
        pts[1:] - pts[:-1], axis=1), 12))
    step = float(dists[dists > 0][0])
    bracketing = []
    from scipy.spatial import cKDTree
    tree = cKDTree(pts)
    for i, lbl in enumerate(labels):
        if lbl != a_lbl:
            continue
        for j in tree.query_ball_point(pts[i], step * 1.01):
            if labels[j] == b_lbl:
                bracketing.append((i, j))
    if len(bracketing) < 2:
        raise NonAffineBoundary(
            f"only {len(bracketing)} bracketing pairs between {pair}")

    crossings = np.array([
        _bisect_segment(classify, pts[i], pts[j], a_lbl, tol)
        for i, j in bracketing])

    center = crossings.mean(axis=0)
    _, _, vt = np.linalg.svd(crossings - center)
    normal = vt[-1]
    a = normal
    b = float(normal @ center)
    residual = float(np.max(np.abs(crossings @ a - b)))
    if residual > 1e-3 * theta_diam:
        raise NonAffineBoundary(
            f"boundary {pair} residual {residual:.2e} exceeds affine tolerance",
            points=crossings)

    scale = np.max(np.abs(a))
    sign = np.sign(a[np.argmax(np.abs(a))])
    a = a / (scale * sign)
    b = b / (scale * sign)
    return HalfPlane(a=a, b=float(b), residual=residual / abs(scale))


# ---------------------------------------------------------------------------
# switching-time fitting (per structure, over retained samples)


def fit_switching_times(problem: LtiOcProblem, structure: ArcStructure,
                        samples, degree: int,
                        classifier: StructureClassifier | None = None):
    """Polynomial fit of each switching time over initial states.

    Samples whose detected structure differs from `structure` are discarded.
    Returns one FittedPolynomial per switching event (empty for no events).
    """
    if structure.n_switches == 0:
        return []
    classify = classifier or StructureClassifier(problem)
    retained_x, retained_t = [], []
    for x0 in samples:
        key = tuple(np.round(np.asarray(x0, dtype=float).ravel(), 12))
        if classify(x0) != structure.signature:
            continue
        _, traj = classify.trajectories[key]
        retained_x.append(np.asarray(x0, dtype=float).ravel())
        retained_t.append(traj.t_switch)
    if not retained_x:
        raise TooFewSamples("no samples retained for this structure")
    X = np.vstack(retained_x)
    Ts = np.array(retained_t)
    return [fit_polynomial(X, Ts[:, s], degree)
            for s in range(structure.n_switches)]


# ---------------------------------------------------------------------------
# exploration


def _region_sort_key(signature):
    arcs, _events = signature
    rows = tuple(sorted({r for a in arcs for r in a}))
    return (rows, -len(arcs))


DEFAULT_GRID_1D = 401
DEFAULT_GRID_2D = 41


def _grid_points(problem, grid):
    box = problem.theta_box
    if problem.n == 1:
        g = grid or DEFAULT_GRID_1D
        return np.linspace(box[0, 0], box[0, 1], g)[:, None]
    if problem.n == 2:
        g = grid or DEFAULT_GRID_2D
        xs = np.linspace(box[0, 0], box[0, 1], g)
        ys = np.linspace(box[1, 0], box[1, 1], g)
        XX, YY = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([XX.ravel(), YY.ravel()])
    raise NotImplementedError("exploration supports 1 or 2 parameters")


def explore_regions(problem: LtiOcProblem, seeds=None, grid: int | None = None,
                    fit_degree: int = 3, classifier: StructureClassifier | None = None):
    """Partition the parameter box into critical regions (Algorithm-2 style).

    Scans a deterministic grid (plus any caller seeds), groups samples by
    detected structure, refines the boundaries between neighbouring
    structures, and fits switching-time polynomials per region.  Returns the
    regions ordered deterministically and labelled CR01, CR02, ...
    """
    classify = classifier or StructureClassifier(problem)
    pts = _grid_points(problem, grid)
    if seeds is not None:
        pts = np.vstack([np.atleast_2d(np.asarray(s, float).reshape(1, -1))
                         for s in seeds] + [pts])
    labels = [classify(p) for p in pts]

    classes: dict = {}
    for p, lbl in zip(pts, labels):
        classes.setdefault(lbl, []).append(p)
    feasible_sigs = [s for s in classes if s != INFEASIBLE]
    feasible_sigs.sort(key=_region_sort_key)

    regions = []
    if problem.n == 1:
        regions = _regions_1d(problem, classify, pts[:, 0], labels,
                              feasible_sigs, classes, fit_degree)
    else:
        regions = _regions_2d(problem, classify, pts, labels,
                              feasible_sigs, classes, fit_degree)
    return regions


def _regions_1d(problem, classify, xs, labels, feasible_sigs, classes, fit_degree):
    order = np.argsort(xs)
    xs = xs[order]
    labels = [labels[i] for i in order]

    # maximal runs of one class, then bisected breakpoints between runs
    runs = []
    start = 0
    for i in range(1, len(xs) + 1):
        if i == len(xs) or labels[i] != labels[start]:
            runs.append((labels[start], xs[start], xs[i - 1]))
            start = i
    edges = []
    for k in range(len(runs) - 1):
        lo = runs[k][2]
        hi = runs[k + 1][1]
        sig_lo = runs[k][0]
        edges.append(_bisect_scalar(classify, lo, hi, sig_lo))

    regions = []
    for k, (lbl, r_lo, r_hi) in enumerate(runs):
        if lbl == INFEASIBLE:
            continue
        lo = edges[k - 1] if k > 0 else problem.theta_box[0, 0]
        hi = edges[k] if k < len(edges) else problem.theta_box[0, 1]
        sample_xs = xs[(xs >= r_lo) & (xs <= r_hi)]
        key = tuple(np.round([sample_xs[len(sample_xs) // 2]], 12))
        structure, _ = classify.trajectories[key]
        fits = fit_switching_times(problem, structure, sample_xs[:, None],
                                   fit_degree, classifier=classify)
        regions.append(CriticalRegionCT(
            structure=structure,
            inequalities=(Interval(float(lo), float(hi)),),
            t_s_fit=tuple(fits), label="",
            samples=sample_xs[:, None]))
    regions.sort(key=lambda r: r.inequalities[0].lo)
    return _relabel(regions)


def _bisect_scalar(classify, lo, hi, sig_lo, tol=BOUNDARY_BISECT_TOL):
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if classify([mid]) == sig_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _regions_2d(problem, classify, pts, labels, feasible_sigs, classes, fit_degree):
    box = problem.theta_box
    theta_diam = float(np.linalg.norm(box[:, 1] - box[:, 0]))
    # neighbouring class pairs present on the grid
    from scipy.spatial import cKDTree
    tree = cKDTree(pts)
    dists = np.unique(np.round(np.linalg.norm(pts[1:] - pts[:-1], axis=1), 12))
    step = float(dists[dists > 0][0])
    pair_sigs = set()
    for i, lbl_i in enumerate(labels):
        for j in tree.query_ball_point(pts[i], step * 1.01):
            if j <= i:
                continue
            if labels[j] != lbl_i:
                pair_sigs.add(frozenset((lbl_i, labels[j])))

    borders: dict = {}
    for pair in pair_sigs:
        a_lbl, b_lbl = sorted(pair, key=lambda s: (s == INFEASIBLE, str(s)))
        try:
            hp = fit_region_boundaries_2d(classify, pts, labels,
                                          (a_lbl, b_lbl), theta_diam)
            borders[frozenset(pair)] = hp
        except NonAffineBoundary as exc:
            borders[frozenset(pair)] = exc  # keep the point cloud

    regions = []
    for sig in feasible_sigs:
        own_pts = np.vstack(classes[sig])
        ineqs = []
        for pair, hp in borders.items():
            if sig not in pair or not isinstance(hp, HalfPlane):
                continue
            side = np.median(own_pts @ hp.a - hp.b)
            if side > 0:
                hp = HalfPlane(a=-hp.a, b=-hp.b, residual=hp.residual)
            ineqs.append(hp)
        key = tuple(np.round(own_pts[len(own_pts) // 2], 12))
        structure, _ = classify.trajectories[key]
        try:
            fits = fit_switching_times(problem, structure, own_pts, fit_degree,
                                       classifier=classify)
        except TooFewSamples:
            fits = []
        regions.append(CriticalRegionCT(
            structure=structure, inequalities=tuple(ineqs),
            t_s_fit=tuple(fits), label="", samples=own_pts))
    return _relabel(regions)


def regions_to_dict(regions) -> list:
    """JSON-ready description of the regions (lossless for evaluation)."""
    out = []
    for r in regions:
        ineqs = []
        for c in r.inequalities:
            if isinstance(c, Interval):
                ineqs.append({"kind": "interval", "lo": c.lo, "hi": c.hi})
            else:
                ineqs.append({"kind": "halfplane", "a": list(map(float, c.a)),
                              "b": float(c.b), "residual": float(c.residual)})
        fits = [{"vars": f.vars, "degree": f.degree,
                 "coeffs": list(map(float, f.coeffs)),
                 "r2": float(f.r2),
                 "domain": [[float(v) for v in row] for row in f.domain]}
                for f in r.t_s_fit]
        out.append({
            "label": r.label,
            "arcs": [list(a.indices) for a in r.structure.arcs],
            "events": [[e.kind, e.row] for e in r.structure.events],
            "inequalities": ineqs,
            "t_s_fit": fits,
            "samples": [[float(v) for v in s] for s in np.atleast_2d(r.samples)],
        })
    return out


def regions_from_dict(data) -> list:
    """Inverse of regions_to_dict."""
    from .model import ActiveSet
    from .shooting import SwitchEvent
    regions = []
    for d in data:
        structure = ArcStructure(
            arcs=tuple(ActiveSet(tuple(a)) for a in d["arcs"]),
            events=tuple(SwitchEvent(k, r) for k, r in d["events"]))
        ineqs = []
        for c in d["inequalities"]:
            if c["kind"] == "interval":
                ineqs.append(Interval(c["lo"], c["hi"]))
            else:
                ineqs.append(HalfPlane(a=np.asarray(c["a"], dtype=float),
                                       b=c["b"], residual=c["residual"]))
        fits = tuple(FittedPolynomial(
            vars=f["vars"], degree=f["degree"],
            coeffs=np.asarray(f["coeffs"], dtype=float), r2=f["r2"],
            domain=np.asarray(f["domain"], dtype=float)) for f in d["t_s_fit"])
        regions.append(CriticalRegionCT(
            structure=structure, inequalities=tuple(ineqs), t_s_fit=fits,
            label=d["label"], samples=np.asarray(d["samples"], dtype=float)))
    return regions


def _relabel(regions):
    out = []
    for i, r in enumerate(regions):
        out.append(CriticalRegionCT(
            structure=r.structure, inequalities=r.inequalities,
            t_s_fit=r.t_s_fit, label=f"CR{i + 1:02d}",
            samples=r.samples, t_s_exact=r.t_s_exact))
    return out
