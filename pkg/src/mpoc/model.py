"""Problem data model and per-active-set arc dynamics.

The continuous-time problem is

    min  1/2 x(T)' P x(T) + 1/2 int_0^T ( x' Q x + u' R u ) dt
    s.t. xdot = A x + B u,   Gx x + Gu u - b <= 0,   x(0) = x0,

with the initial state x0 ranging over a box.  For a fixed set of active
constraint rows, stationarity of the Hamiltonian plus the active equality
rows determine (u, mu) as affine functions of (x, lambda); substituting
them back gives an affine ODE on (x, lambda).  We homogenise that ODE by
appending a constant coordinate fixed at 1, so one matrix exponential
evaluates the whole arc exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NonFinite, SingularKkt

KKT_COND_LIMIT = 1e12


def _as_matrix(a, rows, cols, name):
    m = np.atleast_2d(np.asarray(a, dtype=float))
    if m.shape != (rows, cols):
        raise ValueError(f"{name} must be {rows}x{cols}, got {m.shape}")
    return m


@dataclass(frozen=True)
class LtiOcProblem:
    """LTI dynamics, quadratic cost, linear path constraints, horizon, parameter box."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray
    Gx: np.ndarray
    Gu: np.ndarray
    b: np.ndarray
    T: float
    theta_box: np.ndarray

    # memoised ArcDynamics per active set (mutable cache on a frozen value)
    _arc_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        B = np.asarray(self.B, dtype=float).reshape(n, -1)
        m = B.shape[1]
        Q = _as_matrix(self.Q, n, n, "Q")
        R = _as_matrix(self.R, m, m, "R")
        P = _as_matrix(self.P, n, n, "P")
        Gx = np.atleast_2d(np.asarray(self.Gx, dtype=float))
        c = Gx.shape[0]
        Gu = _as_matrix(self.Gu, c, m, "Gu")
        b = np.asarray(self.b, dtype=float).reshape(c)
        box = np.asarray(self.theta_box, dtype=float).reshape(n, 2)

        if A.shape != (n, n):
            raise ValueError("A must be square")
        for name, M in (("Q", Q), ("R", R), ("P", P)):
            if not np.allclose(M, M.T, atol=1e-12):
                raise ValueError(f"{name} must be symmetric")
        if np.min(np.linalg.eigvalsh(Q)) < -1e-12:
            raise ValueError("Q must be positive semidefinite")
        if np.min(np.linalg.eigvalsh(P)) < -1e-12:
            raise ValueError("P must be positive semidefinite")
        if np.min(np.linalg.eigvalsh(R)) <= 0:
            raise ValueError("R must be positive definite")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if np.any(box[:, 0] >= box[:, 1]):
            raise ValueError("theta_box must have lo < hi componentwise")
        for i in range(c):
            if np.all(Gx[i] == 0) and np.all(Gu[i] == 0):
                raise ValueError(f"constraint row {i} is identically zero")

        for name, val in (("A", A), ("B", B), ("Q", Q), ("R", R), ("P", P),
                          ("Gx", Gx), ("Gu", Gu), ("b", b), ("theta_box", box)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "T", float(self.T))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def n_con(self) -> int:
        return self.Gx.shape[0]

    def constraint_values(self, x, u):
        """g = Gx x + Gu u - b, vectorised over trailing sample axes."""
        return self.Gx @ x + self.Gu @ u - (self.b[:, None] if np.ndim(x) > 1 else self.b)

    def contains(self, x0, slack=0.0) -> bool:
        x0 = np.asarray(x0, dtype=float).reshape(self.n)
        return bool(np.all(x0 >= self.theta_box[:, 0] - slack)
                    and np.all(x0 <= self.theta_box[:, 1] + slack))


@dataclass(frozen=True, order=True)
class ActiveSet:
    """Sorted constraint row indices active on an arc."""

    indices: tuple = ()

    def __post_init__(self):
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        object.__setattr__(self, "indices", idx)

    def __contains__(self, row):
        return row in self.indices

    def __len__(self):
        return len(self.indices)

    def add(self, row: int) -> "ActiveSet":
        return ActiveSet(self.indices + (row,))

    def remove(self, row: int) -> "ActiveSet":
        return ActiveSet(tuple(i for i in self.indices if i != row))

    def label(self) -> str:
        if not self.indices:
            return "free"
        return "g" + "+g".join(str(i) for i in self.indices)


@dataclass(frozen=True)
class AffineMap:
    """y = Cx x + Cl lam + c0."""

    Cx: np.ndarray
    Cl: np.ndarray
    c0: np.ndarray

    def __call__(self, x, lam):
        c0 = self.c0[:, None] if np.ndim(x) > 1 else self.c0
        return self.Cx @ x + self.Cl @ lam + c0


@dataclass(frozen=True)
class ArcDynamics:
    """Homogeneous generator on z = (x, lambda, 1) plus control/multiplier recovery."""

    M: np.ndarray
    u_map: AffineMap
    mu_map: AffineMap  # multipliers of the active rows, in active-set order
    active: ActiveSet
    n: int
    m: int
    # eigendecomposition cache for fast trajectory sampling (None if unusable)
    _eig: tuple | None = field(default=None, repr=False, compare=False)

    def propagate(self, z0: np.ndarray, dt: float) -> np.ndarray:
        return matrix_exponential(self.M, dt) @ z0

    def flow(self, z0: np.ndarray, taus: np.ndarray) -> np.ndarray:
        """z(tau_j) for an array of elapsed times; shape (2n+1, len(taus))."""
        taus = np.asarray(taus, dtype=float)
        if self._eig is not None:
            w, V, Vinv = self._eig
            coef = Vinv @ z0
            Z = (V @ (np.exp(np.outer(w, taus)) * coef[:, None])).real
            return Z
        return np.column_stack([self.propagate(z0, t) for t in taus])


def matrix_exponential(M: np.ndarray, dt: float) -> np.ndarray:
    """exp(M*dt) by scaling-and-squaring (Pade), raising on overflow."""
    M = np.asarray(M, dtype=float)
    if not np.isfinite(dt) or not np.all(np.isfinite(M)):
        raise NonFinite("matrix_exponential given non-finite input")
    E = scipy.linalg.expm(M * dt)
    if not np.all(np.isfinite(E)):
        raise NonFinite(f"exp(M*dt) overflowed for dt={dt!r}")
    return E


def _try_eig(M):
    """Eigendecomposition usable for exact flow evaluation, or None."""
    try:
        w, V = np.linalg.eig(M)
        cond = np.linalg.cond(V)
    except np.linalg.LinAlgError:
        return None
    if not np.isfinite(cond) or cond > 1e8:
        return None
    Vinv = np.linalg.inv(V)
    # guard against defective matrices that eig silently mishandles
    err = np.max(np.abs((V * w) @ Vinv - M))
    scale = max(1.0, np.max(np.abs(M)))
    if err > 1e-10 * scale:
        return None
    return w, V, Vinv


def assemble_arc_system(problem: LtiOcProblem, active: ActiveSet) -> ArcDynamics:
    """Build the augmented linear ODE for one active set.

    Solves the block system [R, Gu_A'; Gu_A, 0] (u, mu_A) = (-B' lam, b_A - Gx_A x)
    for the affine recovery maps, then substitutes into the state/costate
    equations xdot = A x + B u, lamdot = -Q x - A' lam - Gx_A' mu_A.
    """
    cached = problem._arc_cache.get(active.indices)
    if cached is not None:
        return cached

    n, m = problem.n, problem.m
    rows = list(active.indices)
    a = len(rows)
    GxA = problem.Gx[rows]
    GuA = problem.Gu[rows]
    bA = problem.b[rows]

    K = np.block([[problem.R, GuA.T],
                  [GuA, np.zeros((a, a))]])
    if a and np.linalg.cond(K) >= KKT_COND_LIMIT:
        raise SingularKkt(f"active set {rows} gives a singular KKT block")
    try:
        Kinv = np.linalg.inv(K)
    except np.linalg.LinAlgError as exc:
        raise SingularKkt(f"active set {rows} gives a singular KKT block") from exc

    # rhs = Wx x + Wl lam + w0
    Wx = np.vstack([np.zeros((m, n)), -GxA])
    Wl = np.vstack([-problem.B.T, np.zeros((a, n))])
    w0 = np.concatenate([np.zeros(m), bA])

    Sol_x = Kinv @ Wx
    Sol_l = Kinv @ Wl
    sol_0 = Kinv @ w0
    u_map = AffineMap(Sol_x[:m], Sol_l[:m], sol_0[:m])
    mu_map = AffineMap(Sol_x[m:], Sol_l[m:], sol_0[m:])

    M = np.zeros((2 * n + 1, 2 * n + 1))
    M[:n, :n] = problem.A + problem.B @ u_map.Cx
    M[:n, n:2 * n] = problem.B @ u_map.Cl
    M[:n, 2 * n] = problem.B @ u_map.c0
    M[n:2 * n, :n] = -problem.Q - GxA.T @ mu_map.Cx
    M[n:2 * n, n:2 * n] = -problem.A.T - GxA.T @ mu_map.Cl
    M[n:2 * n, 2 * n] = -GxA.T @ mu_map.c0

    dyn = ArcDynamics(M=M, u_map=u_map, mu_map=mu_map, active=active,
                      n=n, m=m, _eig=_try_eig(M))
    problem._arc_cache[active.indices] = dyn
    return dyn


@dataclass(frozen=True)
class PointState:
    """Full trajectory point: time, state, costate, control, multipliers, constraints, Hamiltonian."""

    t: float
    x: np.ndarray
    lam: np.ndarray
    u: np.ndarray
    mu: np.ndarray
    g: np.ndarray
    H: float


def point_state(problem: LtiOcProblem, dyn: ArcDynamics, t: float,
                x: np.ndarray, lam: np.ndarray) -> PointState:
    """Fill in control, multipliers, constraint values and H at one point."""
    u = dyn.u_map(x, lam)
    mu = np.zeros(problem.n_con)
    mu[list(dyn.active.indices)] = dyn.mu_map(x, lam)
    g = problem.constraint_values(x, u)
    H = (0.5 * (x @ problem.Q @ x + u @ problem.R @ u)
         + lam @ (problem.A @ x + problem.B @ u)
         + mu @ g)
    return PointState(t=float(t), x=x, lam=lam, u=u, mu=mu, g=g, H=float(H))


def evaluate_arc(problem: LtiOcProblem, dyn: ArcDynamics,
                 z_start: tuple, t_start: float, t: float) -> PointState:
    """Exact arc point z(t) = exp(M (t - t_start)) (x, lambda, 1)."""
    if t < t_start - 1e-12:
        raise ValueError("evaluate_arc requires t >= t_start")
    x0, lam0 = z_start
    n = problem.n
    z = np.concatenate([np.asarray(x0, float).reshape(n),
                        np.asarray(lam0, float).reshape(n), [1.0]])
    zt = dyn.propagate(z, t - t_start)
    return point_state(problem, dyn, t, zt[:n], zt[n:2 * n])
