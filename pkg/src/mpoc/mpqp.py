"""Discrete-time multiparametric QP counterpart.

Discretizes the continuous problem by zero-order hold, condenses the
finite-horizon QP onto the input sequence, solves single instances with a
primal active-set method, and enumerates the polyhedral critical-region
partition over the initial-state box for complexity comparison with the
continuous-time solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import Budget, Infeasible, NoConvergence, SingularKkt
from .model import LtiOcProblem

KKT_RESIDUAL_TOL = 1e-9
WEAK_ACTIVE_TOL = 1e-8
RADIUS_DROP_TOL = 1e-8


# ---------------------------------------------------------------------------
# discretization


@dataclass(frozen=True)
class DtProblem:
    """Condensed finite-horizon QP, parametric in the initial state.

    Cost:  J(U; th) = 1/2 U' H U + th' F U + 1/2 th' Y th
    Constraints:  G U <= w + S th, stacked over nodes k = 0..N-1.
    """

    source: LtiOcProblem
    N: int
    h: float
    Ad: np.ndarray
    Bd: np.ndarray
    H: np.ndarray
    F: np.ndarray
    Y: np.ndarray
    G: np.ndarray
    w: np.ndarray
    S: np.ndarray

    @property
    def n(self):
        return self.Ad.shape[0]

    @property
    def m(self):
        return self.Bd.shape[1]

    def cost(self, U, theta):
        U = np.asarray(U, dtype=float).ravel()
        theta = np.asarray(theta, dtype=float).ravel()
        return float(0.5 * U @ self.H @ U + theta @ self.F @ U
                     + 0.5 * theta @ self.Y @ theta)

    def rollout(self, U, theta):
        """State sequence x_0..x_N under the zero-order-hold model."""
        U = np.asarray(U, dtype=float).reshape(self.N, self.m)
        xs = [np.asarray(theta, dtype=float).ravel()]
        for k in range(self.N):
            xs.append(self.Ad @ xs[-1] + self.Bd @ U[k])
        return np.array(xs)


def discretize_zoh(problem: LtiOcProblem, N: int) -> DtProblem:
    """Zero-order-hold discretization plus condensing onto the input sequence.

    The hold matrices come from one augmented matrix exponential.  The stage
    cost is the rectangle rule h/2 (x_k' Q x_k + u_k' R u_k) for k = 0..N-1
    plus the terminal cost 1/2 x_N' P x_N; constraints are imposed at the
    hold nodes k = 0..N-1.
    """
    n, m = problem.n, problem.m
    h = problem.T / N
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = problem.A * h
    aug[:n, n:] = problem.B * h
    E = scipy.linalg.expm(aug)
    Ad, Bd = E[:n, :n], E[:n, n:]

    # prediction x_k = Phi_k theta + Gam_k U, stacked over k = 0..N
    Phi = np.zeros(((N + 1) * n, n))
    Gam = np.zeros(((N + 1) * n, N * m))
    Phi[:n] = np.eye(n)
    for k in range(1, N + 1):
        Phi[k * n:(k + 1) * n] = Ad @ Phi[(k - 1) * n:k * n]
        Gam[k * n:(k + 1) * n] = Ad @ Gam[(k - 1) * n:k * n]
        Gam[k * n:(k + 1) * n, (k - 1) * m:k * m] = Bd

    Qbar = np.zeros(((N + 1) * n, (N + 1) * n))
    for k in range(N):
        Qbar[k * n:(k + 1) * n, k * n:(k + 1) * n] = h * problem.Q
    Qbar[N * n:, N * n:] = problem.P
    Rbar = np.kron(np.eye(N), h * problem.R)

    H = Gam.T @ Qbar @ Gam + Rbar
    F = Phi.T @ Qbar @ Gam
    Y = Phi.T @ Qbar @ Phi
    H = 0.5 * (H + H.T)
    Y = 0.5 * (Y + Y.T)

    # constraints Gx x_k + Gu u_k <= b for k = 0..N-1
    c = problem.n_con
    G = np.zeros((N * c, N * m))
    S = np.zeros((N * c, n))
    w = np.tile(problem.b, N)
    for k in range(N):
        rows = slice(k * c, (k + 1) * c)
        G[rows] = problem.Gx @ Gam[k * n:(k + 1) * n]
        G[rows, k * m:(k + 1) * m] += problem.Gu
        S[rows] = -problem.Gx @ Phi[k * n:(k + 1) * n]
    return DtProblem(source=problem, N=N, h=h, Ad=Ad, Bd=Bd,
                     H=H, F=F, Y=Y, G=G, w=w, S=S)


# ---------------------------------------------------------------------------
# single-point QP (primal active set)


@dataclass(frozen=True)
class QpSolution:
    U: np.ndarray
    lam: np.ndarray  # multipliers for the full constraint stack (>= 0)
    active: tuple  # strictly active rows (positive multiplier)
    weakly_active: tuple  # rows at the bound with zero multiplier
    cost: float


def _kkt_solve(H, f, G_A, b_A):
    """Equality-constrained minimiser of 1/2 U'HU + f'U s.t. G_A U = b_A."""
    na = G_A.shape[0]
    if na == 0:
        return np.linalg.solve(H, -f), np.empty(0)
    K = np.block([[H, G_A.T], [G_A, np.zeros((na, na))]])
    if np.linalg.cond(K) > 1e12:
        raise SingularKkt("degenerate active set in QP step")
    sol = np.linalg.solve(K, np.concatenate([-f, b_A]))
    return sol[:H.shape[0]], sol[H.shape[0]:]


def solve_qp(dt: DtProblem, theta, max_iter: int | None = None) -> QpSolution:
    """Solve the condensed QP at one parameter with a primal active-set method.

    A feasible start comes from a phase-1 LP.  Raises Infeasible when no
    input sequence satisfies the constraints, NoConvergence on iteration cap.
    """
    theta = np.asarray(theta, dtype=float).ravel()
    H, f = dt.H, dt.F.T @ theta
    G, b = dt.G, dt.w + dt.S @ theta
    nu, nc = H.shape[0], G.shape[0]
    if max_iter is None:
        max_iter = 200 + 20 * nc

    # phase 1: minimise s subject to G U - s <= b, s >= 0
    c = np.zeros(nu + 1)
    c[-1] = 1.0
    A_ub = np.hstack([G, -np.ones((nc, 1))])
    lp = scipy.optimize.linprog(c, A_ub=A_ub, b_ub=b,
                                bounds=[(None, None)] * nu + [(0, None)],
                                method="highs")
    if not lp.success or lp.x[-1] > 1e-8:
        raise Infeasible(f"no feasible input sequence at theta={theta}")
    U = lp.x[:nu]

    work = [i for i in range(nc) if abs(G[i] @ U - b[i]) < 1e-9]
    # keep the working set independent
    work = _independent_subset(G, work)
    for _ in range(max_iter):
        G_A = G[work]
        try:
            U_star, lam_A = _kkt_solve(H, f, G_A, b[work])
        except SingularKkt:
            work = _independent_subset(G, work)
            G_A = G[work]
            U_star, lam_A = _kkt_solve(H, f, G_A, b[work])
        p = U_star - U
        if np.linalg.norm(p) <= 1e-11 * max(1.0, np.linalg.norm(U)):
            lam_A = np.atleast_1d(lam_A)
            if lam_A.size == 0 or lam_A.min() >= -1e-10:
                return _package(dt, U_star, work, lam_A, f, theta)
            work.pop(int(np.argmin(lam_A)))
            continue
        # step toward U_star, blocking on the first violated constraint
        mask = np.array([i not in work for i in range(nc)])
        gp = G[mask] @ p
        slack = b[mask] - G[mask] @ U
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(gp > 1e-12, slack / gp, np.inf)
        alpha = min(1.0, float(ratios.min(initial=np.inf)))
        U = U + alpha * p
        if alpha < 1.0:
            blocking = np.flatnonzero(mask)[int(np.argmin(ratios))]
            work.append(int(blocking))
    raise NoConvergence(f"active-set QP did not converge at theta={theta}")


def _independent_subset(G, rows):
    kept = []
    for i in rows:
        trial = kept + [i]
        if np.linalg.matrix_rank(G[trial]) == len(trial):
            kept.append(i)
    return kept


def _package(dt, U, work, lam_A, f, theta):
    lam_signed = np.zeros(dt.G.shape[0])
    if len(work):
        lam_signed[work] = np.atleast_1d(lam_A)
    resid = dt.H @ U + f + dt.G.T @ lam_signed
    if np.linalg.norm(resid, np.inf) > KKT_RESIDUAL_TOL * max(
            1.0, np.linalg.norm(f, np.inf)):
        raise NoConvergence(f"KKT stationarity residual {np.linalg.norm(resid, np.inf):.2e}")
    slack = dt.w + dt.S @ theta - dt.G @ U
    strict, weak = [], []
    for i, l in zip(work, np.atleast_1d(lam_signed[work])):
        if l > WEAK_ACTIVE_TOL:
            strict.append(i)
        else:
            weak.append(i)
    for i in range(dt.G.shape[0]):
        if i not in work and abs(slack[i]) <= WEAK_ACTIVE_TOL:
            weak.append(i)
    return QpSolution(U=U, lam=np.maximum(lam_signed, 0.0),
                      active=tuple(sorted(strict)),
                      weakly_active=tuple(sorted(weak)),
                      cost=dt.cost(U, theta))


# ---------------------------------------------------------------------------
# explicit regions


@dataclass(frozen=True)
class DtCriticalRegion:
    """Affine control law U = K theta + k on the polyhedron A theta <= c."""

    active: tuple
    K: np.ndarray
    k: np.ndarray
    A: np.ndarray
    c: np.ndarray
    chebyshev: float

    def contains(self, theta, tol=1e-9) -> bool:
        theta = np.asarray(theta, dtype=float).ravel()
        if self.A.size == 0:
            return True
        return bool(np.all(self.A @ theta - self.c <= tol))

    def u0(self, theta, m):
        theta = np.asarray(theta, dtype=float).ravel()
        return (self.K @ theta + self.k)[:m]


@dataclass(frozen=True)
class DtPartition:
    problem: DtProblem
    regions: tuple

    @property
    def n_regions(self):
        return len(self.regions)

    def region_at(self, theta):
        for r in self.regions:
            if r.contains(theta):
                return r
        return None


def region_from_active_set(dt: DtProblem, active) -> DtCriticalRegion | None:
    """Affine law and region inequalities for one strictly-active set.

    Returns None when the active set is rank-deficient or yields an empty
    region over the parameter box.
    """
    active = tuple(sorted(active))
    H, G = dt.H, dt.G
    nu = H.shape[0]
    Hi = np.linalg.inv(H)
    if active:
        G_A = G[list(active)]
        if np.linalg.matrix_rank(G_A) < len(active):
            return None
        M = G_A @ Hi @ G_A.T
        Mi = np.linalg.inv(M)
        # lam(th) = -Mi (w_A + S_A th + G_A Hi F' th)
        S_A = dt.S[list(active)]
        w_A = dt.w[list(active)]
        lam_K = -Mi @ (S_A + G_A @ Hi @ dt.F.T)
        lam_k = -Mi @ w_A
        U_K = -Hi @ (dt.F.T + G_A.T @ lam_K)
        U_k = -Hi @ (G_A.T @ lam_k)
    else:
        lam_K = np.zeros((0, dt.n))
        lam_k = np.zeros(0)
        U_K = -Hi @ dt.F.T
        U_k = np.zeros(nu)

    inactive = [i for i in range(G.shape[0]) if i not in active]
    # primal feasibility of inactive rows: G_I (U_K th + U_k) <= w_I + S_I th
    A_rows = [G[inactive] @ U_K - dt.S[inactive]]
    c_rows = [dt.w[inactive] - G[inactive] @ U_k]
    # dual feasibility: lam(th) >= 0
    if active:
        A_rows.append(-lam_K)
        c_rows.append(lam_k)
    A = np.vstack(A_rows)
    c = np.concatenate(c_rows)
    # normalise rows, drop trivial ones
    norms = np.linalg.norm(A, axis=1)
    keep = norms > 1e-12
    trivial_bad = (~keep) & (c < -1e-10)
    if np.any(trivial_bad):
        return None
    A, c = A[keep] / norms[keep, None], c[keep] / norms[keep]
    radius, center = chebyshev_radius(A, c, dt.source.theta_box)
    if radius <= RADIUS_DROP_TOL:
        return None
    return DtCriticalRegion(active=active, K=U_K, k=U_k, A=A, c=c,
                            chebyshev=radius)


def feasible_bounds(dt: DtProblem) -> np.ndarray:
    """Per-parameter bounds of the DT feasible set, via LPs over (theta, U).

    Returns an (n, 2) array [lo, hi]; raises Infeasible when the feasible
    set is empty inside the parameter box.
    """
    box = dt.source.theta_box
    n, nu = dt.n, dt.H.shape[0]
    A_ub = np.hstack([-dt.S, dt.G])
    bounds = [(lo, hi) for lo, hi in box] + [(None, None)] * nu
    out = np.zeros((n, 2))
    for i in range(n):
        for j, sign in enumerate((1.0, -1.0)):
            obj = np.zeros(n + nu)
            obj[i] = sign
            lp = scipy.optimize.linprog(obj, A_ub=A_ub, b_ub=dt.w,
                                        bounds=bounds, method="highs")
            if not lp.success:
                raise Infeasible("empty discrete-time feasible set")
            out[i, j] = lp.x[i]
    return out


def chebyshev_radius(A, c, box):
    """Largest inscribed ball of {A th <= c} intersected with the box."""
    box = np.asarray(box, dtype=float)
    n = box.shape[0]
    A_box = np.vstack([np.eye(n), -np.eye(n)])
    c_box = np.concatenate([box[:, 1], -box[:, 0]])
    A_all = np.vstack([A, A_box]) if A.size else A_box
    c_all = np.concatenate([c, c_box]) if A.size else c_box
    norms = np.linalg.norm(A_all, axis=1)
    obj = np.zeros(n + 1)
    obj[-1] = -1.0
    lp = scipy.optimize.linprog(
        obj, A_ub=np.hstack([A_all, norms[:, None]]), b_ub=c_all,
        bounds=[(None, None)] * n + [(0, None)], method="highs")
    if not lp.success:
        return 0.0, np.zeros(n)
    return float(lp.x[-1]), lp.x[:n]


def enumerate_partition(dt: DtProblem, strategy: str = "auto",
                        grid: int | None = None,
                        max_regions: int = 10000) -> DtPartition:
    """Explicit critical-region partition over the parameter box.

    Strategies: "sweep1d" (marching bisection, one parameter), "grid_seeded"
    (coarse grid of QP solves plus neighbour completion), "combinatorial"
    (all active sets up to the input-sequence length, capped by Budget).
    """
    if strategy == "auto":
        strategy = "sweep1d" if dt.n == 1 else "grid_seeded"
    if strategy == "sweep1d":
        if dt.n != 1:
            raise ValueError("sweep1d needs exactly one parameter")
        return _sweep_1d(dt, max_regions)
    if strategy == "grid_seeded":
        return _grid_seeded(dt, grid, max_regions)
    if strategy == "combinatorial":
        return _combinatorial(dt, max_regions)
    raise ValueError(f"unknown strategy {strategy!r}")


def _active_at(dt, theta):
    try:
        return solve_qp(dt, theta).active
    except Infeasible:
        return None


def _sweep_1d(dt, max_regions, points: int = 2001, tol: float = 1e-8):
    lo, hi = dt.source.theta_box[0]
    grid = np.linspace(lo, hi, points)
    sets = [_active_at(dt, [t]) for t in grid]
    regions = {}
    for t, s in zip(grid, sets):
        if s is None or s in regions:
            continue
        r = region_from_active_set(dt, s)
        if r is not None:
            regions[s] = r
        if len(regions) > max_regions:
            raise Budget(f"region cap {max_regions} exceeded")
    # refine transitions so adjacent thin regions are not missed
    for i in range(len(grid) - 1):
        if sets[i] == sets[i + 1]:
            continue
        a, b = grid[i], grid[i + 1]
        sa = sets[i]
        while b - a > tol:
            mid = 0.5 * (a + b)
            sm = _active_at(dt, [mid])
            if sm == sa:
                a = mid
            else:
                if sm is not None and sm not in regions:
                    r = region_from_active_set(dt, sm)
                    if r is not None:
                        regions[sm] = r
                b = mid
    ordered = sorted(regions.values(),
                     key=lambda r: _region_anchor(r, dt.source.theta_box))
    return DtPartition(problem=dt, regions=tuple(ordered))


def _region_anchor(region, box):
    _, center = chebyshev_radius(region.A, region.c, box)
    return tuple(np.round(center, 9))


def _grid_seeded(dt, grid, max_regions):
    box = dt.source.theta_box
    n = dt.n
    g = grid or (41 if n == 2 else 21)
    axes = [np.linspace(lo, hi, g) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    regions = {}
    frontier = []
    for th in pts:
        s = _active_at(dt, th)
        if s is None or s in regions:
            continue
        r = region_from_active_set(dt, s)
        if r is None:
            continue
        regions[s] = r
        frontier.append(s)
        if len(regions) > max_regions:
            raise Budget(f"region cap {max_regions} exceeded")
    # completion: step across each facet of each found region and solve there
    diam = float(np.linalg.norm(box[:, 1] - box[:, 0]))
    eps = 1e-6 * diam
    while frontier:
        s = frontier.pop()
        r = regions[s]
        for a_row, c_val in zip(r.A, r.c):
            # point just outside the facet, found via the facet's own LP
            probe = _facet_point(r, a_row, c_val, box)
            if probe is None:
                continue
            outside = probe + eps * a_row
            if np.any(outside < box[:, 0]) or np.any(outside > box[:, 1]):
                continue
            s2 = _active_at(dt, outside)
            if s2 is None or s2 in regions:
                continue
            r2 = region_from_active_set(dt, s2)
            if r2 is None:
                continue
            regions[s2] = r2
            frontier.append(s2)
            if len(regions) > max_regions:
                raise Budget(f"region cap {max_regions} exceeded")
    ordered = sorted(regions.values(), key=lambda r: _region_anchor(r, box))
    return DtPartition(problem=dt, regions=tuple(ordered))


def _facet_point(region, a_row, c_val, box):
    """Chebyshev center of one facet of the region polyhedron."""
    A_eq = a_row[None, :]
    n = len(a_row)
    A_others, c_others = [], []
    for a2, c2 in zip(region.A, region.c):
        if np.allclose(a2, a_row) and np.isclose(c2, c_val):
            continue
        A_others.append(a2)
        c_others.append(c2)
    A_ub = np.vstack([np.array(A_others).reshape(-1, n),
                      np.eye(n), -np.eye(n)])
    c_ub = np.concatenate([np.array(c_others),
                           box[:, 1], -box[:, 0]])
    lp = scipy.optimize.linprog(
        np.zeros(n), A_ub=A_ub, b_ub=c_ub,
        A_eq=A_eq, b_eq=[c_val],
        bounds=[(None, None)] * n, method="highs")
    if not lp.success:
        return None
    return lp.x


def _combinatorial(dt, max_regions):
    from itertools import combinations
    nc, nu = dt.G.shape
    regions = {}
    count = 0
    for size in range(0, nu + 1):
        for active in combinations(range(nc), size):
            count += 1
            if count > max_regions * 50:
                raise Budget("combinatorial enumeration budget exceeded")
            r = region_from_active_set(dt, active)
            if r is None:
                continue
            regions[active] = r
            if len(regions) > max_regions:
                raise Budget(f"region cap {max_regions} exceeded")
    ordered = sorted(regions.values(),
                     key=lambda r: _region_anchor(r, dt.source.theta_box))
    return DtPartition(problem=dt, regions=tuple(ordered))


# ---------------------------------------------------------------------------
# CT vs DT comparison


@dataclass(frozen=True)
class ComparisonReport:
    """Complexity and accuracy comparison at several horizons."""

    ct_regions: int
    dt_counts: dict  # N -> region count
    cost_gap: dict  # N -> max relative cost gap over the probe points
    u0_gap: dict  # N -> max |u_dt(0) - u_ct(0)| over the probe points


def compare_ct_dt(problem: LtiOcProblem, ct_regions, horizons,
                  probe_points, ct_cost_fn, strategy: str = "auto",
                  grid: int | None = None) -> ComparisonReport:
    """Region counts and solution gaps between the explicit CT and DT forms.

    `ct_cost_fn(theta)` must return (cost, u0) from the continuous solution.
    """
    dt_counts, cost_gap, u0_gap = {}, {}, {}
    for N in horizons:
        dtp = discretize_zoh(problem, N)
        part = enumerate_partition(dtp, strategy=strategy, grid=grid)
        dt_counts[N] = part.n_regions
        worst_c, worst_u = 0.0, 0.0
        for th in probe_points:
            try:
                sol = solve_qp(dtp, th)
            except Infeasible:
                continue
            ct_cost, ct_u0 = ct_cost_fn(th)
            rel = abs(sol.cost - ct_cost) / max(1.0, abs(ct_cost))
            worst_c = max(worst_c, rel)
            worst_u = max(worst_u, float(np.max(np.abs(
                sol.U[:problem.m] - np.asarray(ct_u0).ravel()))))
        cost_gap[N] = worst_c
        u0_gap[N] = worst_u
    return ComparisonReport(ct_regions=len(ct_regions), dt_counts=dt_counts,
                            cost_gap=cost_gap, u0_gap=u0_gap)
