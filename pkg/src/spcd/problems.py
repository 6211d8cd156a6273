"""Built-in domains and test problems.

The catalog provides the three blob-shaped polar domains used by the
numerical experiments, a plain circle, the matching right-hand sides, and
a manufactured-solution case for convergence validation.  All callables
are module-level functions bound with :func:`functools.partial`, so cases
pickle cleanly for process-pool sweeps.

Note on problem 3: the printed right-hand side carries a product of unit
step factors that would vanish identically if read literally; the
implemented support is the band |y| <= beta, which makes the quartic bump
nonzero between the two waist points and zero on and beyond them.
"""

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .geometry import ParametricBoundary
from .operators import ProblemData

__all__ = [
    "TestCase",
    "circle",
    "omega1",
    "omega2",
    "omega3",
    "test_problem",
    "manufactured_case",
]


class _PolarBoundary(ParametricBoundary):
    """Closed curve rho(t)*(cos t, sin t) or rho(t)*(sin t, cos t).

    ``swap`` selects the second form, which traverses clockwise for
    positive rho; the orientation flag is set accordingly.
    """

    swap = False

    def __init__(self):
        super().__init__(period=2 * math.pi, orientation=-1 if self.swap else 1)

    def _rho(self, t):
        raise NotImplementedError

    def _drho(self, t):
        raise NotImplementedError

    def _d2rho(self, t):
        raise NotImplementedError

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        r = self._rho(t)
        c, s = np.cos(t), np.sin(t)
        return (r * s, r * c) if self.swap else (r * c, r * s)

    def deriv1(self, t):
        t = np.asarray(t, dtype=float)
        r, r1 = self._rho(t), self._drho(t)
        c, s = np.cos(t), np.sin(t)
        dc = r1 * c - r * s
        ds = r1 * s + r * c
        return (ds, dc) if self.swap else (dc, ds)

    def deriv2(self, t):
        t = np.asarray(t, dtype=float)
        r, r1, r2 = self._rho(t), self._drho(t), self._d2rho(t)
        c, s = np.cos(t), np.sin(t)
        d2c = r2 * c - 2 * r1 * s - r * c
        d2s = r2 * s + 2 * r1 * c - r * s
        return (d2s, d2c) if self.swap else (d2c, d2s)

    def polar_radius(self, angle):
        """rho at a polar angle, for the exact radial inside test."""
        return self._rho(np.asarray(angle, dtype=float))


class Circle(_PolarBoundary):
    def __init__(self, beta):
        self.beta = float(beta)
        super().__init__()

    def _rho(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.beta)

    def _drho(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    _d2rho = _drho


class Omega1(_PolarBoundary):
    """rho = beta + sin^2 t, anticlockwise."""

    def __init__(self, beta):
        self.beta = float(beta)
        super().__init__()

    def _rho(self, t):
        return self.beta + np.sin(t) ** 2

    def _drho(self, t):
        return np.sin(2 * t)

    def _d2rho(self, t):
        return 2 * np.cos(2 * t)


class Omega2(_PolarBoundary):
    """rho = 2.5*pi^2 + beta - t^2 sin^2 t on (rho sin t, rho cos t).

    Clockwise orientation; the curvature jumps at t = 0 because the second
    parameter derivative is one-sided there.  The jump point lies on the
    inflow boundary, so meshing and classification are unaffected.
    """

    swap = True

    def __init__(self, beta):
        self.beta = float(beta)
        self.rho0 = 2.5 * math.pi**2 + float(beta)
        super().__init__()

    def _rho(self, t):
        return self.rho0 - t**2 * np.sin(t) ** 2

    def _drho(self, t):
        return -(2 * t * np.sin(t) ** 2 + t**2 * np.sin(2 * t))

    def _d2rho(self, t):
        return -(2 * np.sin(t) ** 2 + 4 * t * np.sin(2 * t) + 2 * t**2 * np.cos(2 * t))


class Omega3(_PolarBoundary):
    """rho = beta + cos^2 t, anticlockwise, 0 < beta < 2."""

    def __init__(self, beta):
        if not 0 < beta < 2:
            raise ValueError("omega3 requires 0 < beta < 2")
        self.beta = float(beta)
        super().__init__()

    def _rho(self, t):
        return self.beta + np.cos(t) ** 2

    def _drho(self, t):
        return -np.sin(2 * t)

    def _d2rho(self, t):
        return -2 * np.cos(2 * t)


def circle(beta: float) -> ParametricBoundary:
    """Circle of radius beta centered at the origin."""
    return Circle(beta)


def omega1(beta: float) -> ParametricBoundary:
    """Vertically elongated blob with two external characteristic points
    at (0, +-(1+beta))."""
    return Omega1(beta)


def omega2(beta: float) -> ParametricBoundary:
    """Large asymmetric domain, clockwise parameterization, with a
    curvature jump at t = 0 and characteristic points at (0, +-M_y)."""
    return Omega2(beta)


def omega3(beta: float) -> ParametricBoundary:
    """Peanut-shaped domain with four external and two internal
    characteristic points; its outflow boundary is disconnected."""
    return Omega3(beta)


# ---------------------------------------------------------------------------
# Coefficient fields (module level, partial-bound for picklability)


def _const_field(x, y, value):
    return np.broadcast_to(np.float64(value), np.broadcast(np.asarray(x), np.asarray(y)).shape).copy()


def _f_problem1(x, y, beta):
    y = np.asarray(y, dtype=float)
    return (1 + beta) ** 2 - y**2 + 0.0 * np.asarray(x, dtype=float)


def _f_problem2(x, y, beta):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    Mx = 2.25 * math.pi**2 + beta
    My = 2.5 * math.pi**2 + beta
    return ((1 - y**2 / My**2) * (x / Mx)) ** 4


def _f_problem3(x, y, beta):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    bump = (1 - y / beta) ** 4 * (1 + y / beta) ** 4
    return np.where(np.abs(y) <= beta, bump, 0.0) + 0.0 * x


@dataclass
class TestCase:
    """Domain plus data plus per-problem solver defaults."""

    label: str
    boundary: ParametricBoundary
    data: ProblemData
    config: dict = field(default_factory=dict)


def test_problem(problem_id: int, beta: float, eps: float = 1.0) -> TestCase:
    """One of the three catalog problems, with a = b = 1 and the catalog
    right-hand side.  ``eps`` is a placeholder that sweep drivers replace.

    Default strip widths follow the experiments: R = 0.1 for problems 1
    and 3, R = 1 for problem 2.
    """
    a = partial(_const_field, value=1.0)
    b = partial(_const_field, value=1.0)
    if problem_id == 1:
        boundary = omega1(beta)
        f = partial(_f_problem1, beta=beta)
        config = {"R": 0.1, "c_star": 2.0}
    elif problem_id == 2:
        boundary = omega2(beta)
        f = partial(_f_problem2, beta=beta)
        config = {"R": 1.0, "c_star": 2.0}
    elif problem_id == 3:
        boundary = omega3(beta)
        f = partial(_f_problem3, beta=beta)
        config = {"R": 0.1, "c_star": 2.0}
    else:
        raise ValueError(f"unknown problem id {problem_id!r}")
    data = ProblemData(a=a, b=b, f=f, eps=float(eps), alpha=1.0)
    return TestCase(label=f"problem {problem_id} (beta={beta:g})",
                    boundary=boundary, data=data, config=config)


# ---------------------------------------------------------------------------
# Manufactured solution


class ExactSolution:
    """Closed-form solution with the derivatives needed to build f."""

    def u(self, x, y):
        raise NotImplementedError

    def u_x(self, x, y):
        raise NotImplementedError

    def u_y(self, x, y):
        raise NotImplementedError

    def laplacian(self, x, y):
        raise NotImplementedError


class BubbleExp(ExactSolution):
    """(1 - x^2 - y^2) * exp(x); vanishes on the unit circle."""

    def u(self, x, y):
        return (1 - x**2 - y**2) * np.exp(x)

    def u_x(self, x, y):
        return np.exp(x) * (1 - x**2 - y**2 - 2 * x)

    def u_y(self, x, y):
        return -2 * y * np.exp(x)

    def laplacian(self, x, y):
        return np.exp(x) * (-(x**2) - y**2 - 4 * x - 3)


class ZeroSolution(ExactSolution):
    def u(self, x, y):
        return 0.0 * np.asarray(x, dtype=float)

    u_x = u
    u_y = u
    laplacian = u


def _f_manufactured(x, y, exact, eps):
    return -eps * exact.laplacian(x, y) + exact.u_x(x, y) + exact.u(x, y)


def manufactured_case(boundary: ParametricBoundary, exact: ExactSolution,
                      eps: float, label: str = "manufactured") -> TestCase:
    """Case with a = b = 1 whose right-hand side is built from a known
    solution that vanishes on the boundary."""
    data = ProblemData(
        a=partial(_const_field, value=1.0),
        b=partial(_const_field, value=1.0),
        f=partial(_f_manufactured, exact=exact, eps=float(eps)),
        eps=float(eps),
        alpha=1.0,
    )
    return TestCase(label=label, boundary=boundary, data=data,
                    config={"R": 0.1, "c_star": 2.0})
