"""Built-in benchmark problems.

Both systems have two-sided output limits written as one canonical row per
side (Gx x + Gu u - b <= 0), so multiplier bookkeeping stays uniform.
"""

import numpy as np

from .model import LtiOcProblem


def integrator_problem() -> LtiOcProblem:
    """Scalar integrator xdot = -u with output y = x + u, |y| <= 1, u <= 2.

    Rows: 0: y <= 1, 1: -y <= 1 (lower output bound), 2: u <= 2.
    """
    return LtiOcProblem(
        A=[[0.0]], B=[[-1.0]],
        Q=[[1.0]], R=[[1.0]], P=[[1.0]],
        Gx=[[1.0], [-1.0], [0.0]],
        Gu=[[1.0], [-1.0], [1.0]],
        b=[1.0, 1.0, 2.0],
        T=2.0,
        theta_box=[[-2.0, 2.0]],
    )


def coupled_two_state_problem() -> LtiOcProblem:
    """Two coupled states with one input and two mixed output limits.

    Rows: 0: -x1 + x2 + u <= 1.2,  1: x1 - x2 - u <= 2.
    """
    return LtiOcProblem(
        A=[[0.0, -1.0], [-1.0, 0.0]],
        B=[[1.0], [0.0]],
        Q=np.eye(2), R=[[1.0]], P=np.eye(2),
        Gx=[[-1.0, 1.0], [1.0, -1.0]],
        Gu=[[1.0], [-1.0]],
        b=[1.2, 2.0],
        T=2.0,
        theta_box=[[-2.0, 2.0], [-2.0, 2.0]],
    )
