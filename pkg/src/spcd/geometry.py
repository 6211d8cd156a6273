"""Differential geometry of smooth closed parametric boundaries.

The domain is described by a closed curve t -> (x(t), y(t)) on [0, T].
This module computes the frame data attached to the curve (tangent
magnitude, signed curvature, inward unit normal), the boundary-fitted
coordinate map (r, t) -> (x, y) along inward normals together with its
inversion, the characteristic points where the inward normal becomes
perpendicular to the convection direction (the x axis), the resulting
inflow/outflow splitting of the boundary, and a polygonal winding-number
point-in-domain test.

Sign conventions: the normal returned by :func:`frame` always points into
the domain regardless of the parameterization direction, and the signed
curvature is positive where the boundary is locally convex (seen from
inside).  With these conventions the metric factor ``eta = 1 - kappa*r``
of the boundary-fitted coordinates stays positive for offsets r smaller
than the minimal radius of curvature.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

__all__ = [
    "ParametricBoundary",
    "FunctionBoundary",
    "FrameSample",
    "CharacteristicPoint",
    "CurvilinearPoint",
    "frame",
    "frame_arrays",
    "to_cartesian",
    "to_curvilinear",
    "find_characteristic_points",
    "outflow_arcs",
    "contains",
    "contains_batch",
    "boundary_distance",
    "theta_min",
    "validate_boundary",
]

_TANGENT_TOL = 1e-14
_ROOT_TOL = 1e-10


class ParametricBoundary:
    """Closed parametric curve with two derivatives.

    Subclasses implement ``eval``, ``deriv1`` and ``deriv2``; each takes a
    scalar or ndarray parameter value and returns the pair of coordinate
    arrays.  ``period`` is the parameter length T of one traversal and
    ``orientation`` is +1 for an anticlockwise parameterization, -1 for a
    clockwise one.

    Parameter values are used exactly as given; callers that work with
    wrapped arcs (intervals extending past T) reduce the parameter modulo
    the period before evaluating.
    """

    def __init__(self, period: float, orientation: int = 1):
        if period <= 0:
            raise ValueError("period must be positive")
        if orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        self.period = float(period)
        self.orientation = int(orientation)

    def eval(self, t):
        raise NotImplementedError

    def deriv1(self, t):
        raise NotImplementedError

    def deriv2(self, t):
        raise NotImplementedError


class FunctionBoundary(ParametricBoundary):
    """Boundary defined by user callables.

    ``eval_fn`` must return the coordinate pair; missing derivative
    callables fall back to centered finite differences with step
    ``1e-6 * period`` (second derivatives need this only for curvature,
    which tolerates the reduced accuracy).
    """

    def __init__(self, eval_fn, period, orientation=1, deriv1_fn=None, deriv2_fn=None):
        super().__init__(period, orientation)
        self._eval = eval_fn
        self._deriv1 = deriv1_fn
        self._deriv2 = deriv2_fn
        self._h = 1e-6 * self.period

    def eval(self, t):
        return self._eval(t)

    def deriv1(self, t):
        if self._deriv1 is not None:
            return self._deriv1(t)
        h = self._h
        xp, yp = self._eval(t + h)
        xm, ym = self._eval(t - h)
        return (xp - xm) / (2 * h), (yp - ym) / (2 * h)

    def deriv2(self, t):
        if self._deriv2 is not None:
            return self._deriv2(t)
        h = self._h
        xp, yp = self._eval(t + h)
        x0, y0 = self._eval(t)
        xm, ym = self._eval(t - h)
        return (xp - 2 * x0 + xm) / h**2, (yp - 2 * y0 + ym) / h**2


@dataclass(frozen=True)
class FrameSample:
    """Frame of the boundary at one parameter value."""

    t: float
    point: tuple
    tau: float
    kappa: float
    normal: tuple


@dataclass(frozen=True)
class CharacteristicPoint:
    """Boundary point where the inward normal has zero x component."""

    t: float
    point: tuple
    kind: str  # "internal" or "external"
    kappa_at: float


@dataclass(frozen=True)
class CurvilinearPoint:
    """Boundary-fitted coordinates: offset r along the inward normal at t."""

    r: float
    t: float


def _wrap(t, period):
    return np.mod(t, period)


def frame_arrays(boundary, t):
    """Vectorized frame evaluation.

    Parameters are reduced modulo the period, so wrapped arc coordinates
    are valid inputs.  Returns arrays ``(x, y, tau, kappa, n1, n2)`` with
    the orientation-corrected inward normal and signed curvature.
    """
    t = _wrap(np.asarray(t, dtype=float), boundary.period)
    x, y = boundary.eval(t)
    x1, y1 = boundary.deriv1(t)
    x2, y2 = boundary.deriv2(t)
    x, y, x1, y1, x2, y2 = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (x, y, x1, y1, x2, y2))
    )
    tau = np.hypot(x1, y1)
    if np.any(tau < _TANGENT_TOL):
        raise ValueError("singular parameterization")
    sign = boundary.orientation
    kappa = sign * (x1 * y2 - y1 * x2) / tau**3
    n1 = -sign * y1 / tau
    n2 = sign * x1 / tau
    return x, y, tau, kappa, n1, n2


def frame(boundary, t: float) -> FrameSample:
    """Frame of the boundary at parameter ``t``.

    Returns the point, the tangent magnitude, the signed curvature and the
    inward unit normal.  Raises ``ValueError`` when the tangent vector is
    degenerate.
    """
    x, y, tau, kappa, n1, n2 = frame_arrays(boundary, np.asarray([t], dtype=float))
    return FrameSample(
        t=float(t),
        point=(float(x[0]), float(y[0])),
        tau=float(tau[0]),
        kappa=float(kappa[0]),
        normal=(float(n1[0]), float(n2[0])),
    )


def offset_points(boundary, r, t):
    """Cartesian images of boundary-fitted coordinates (vectorized)."""
    x, y, _, _, n1, n2 = frame_arrays(boundary, t)
    r = np.asarray(r, dtype=float)
    return x + r * n1, y + r * n2


def to_cartesian(boundary, p: CurvilinearPoint):
    """Map a curvilinear point to Cartesian coordinates."""
    x, y = offset_points(boundary, np.asarray([p.r]), np.asarray([p.t]))
    return float(x[0]), float(y[0])


# ---------------------------------------------------------------------------
# Inversion of the normal-offset map


class _ArcSampling:
    """Dense sample of one boundary arc used to seed Newton inversion."""

    def __init__(self, boundary, arc, n=1024):
        self.boundary = boundary
        self.t0, self.t1 = float(arc[0]), float(arc[1])
        ts = np.linspace(self.t0, self.t1, n)
        x, y, *_ = frame_arrays(boundary, ts)
        self.ts = ts
        self.tree = cKDTree(np.column_stack([x, y]))
        seg = np.hypot(np.diff(x), np.diff(y))
        self.max_gap = float(seg.max()) if seg.size else 0.0


def _invert_batch(boundary, arc, r_max, xs, ys, sampling=None, maxiter=60):
    """Invert the normal-offset map for many points over one arc.

    Returns ``(found, r, t)`` arrays; points without a perpendicular foot
    on the arc within ``r_max`` have ``found = False``.  Raises
    ``RuntimeError`` when Newton and the bounded-minimization fallback fail
    to resolve a point that is not clearly outside the reach of the arc.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    if sampling is None:
        sampling = _ArcSampling(boundary, arc)
    t0, t1 = sampling.t0, sampling.t1
    ttol = 1e-9 * max(1.0, boundary.period)
    rtol = 1e-12

    dist, idx = sampling.tree.query(np.column_stack([xs, ys]))
    found = np.zeros(xs.shape, dtype=bool)
    r_out = np.full(xs.shape, np.nan)
    t_out = np.full(xs.shape, np.nan)

    # Points farther from the arc than r_max (minus the sampling gap) have
    # no preimage with r <= r_max.
    candidate = dist <= r_max + sampling.max_gap + 1e-9
    if not np.any(candidate):
        return found, r_out, t_out

    act = np.where(candidate)[0]
    t = sampling.ts[idx[act]].copy()
    px, py = xs[act], ys[act]
    slack = 0.05 * (t1 - t0) + 1e-12
    orient = boundary.orientation
    gtol = 1e-13 * np.maximum(1.0, np.maximum(np.abs(px), np.abs(py)))

    # state: 0 = iterating, 1 = converged, 2 = retry with scalar fallback
    state = np.zeros(t.shape, dtype=np.int8)
    for _ in range(maxiter):
        m = state == 0
        if not np.any(m):
            break
        bx, by, tau, kappa, n1, n2 = frame_arrays(boundary, t[m])
        dx = px[m] - bx
        dy = py[m] - by
        g = dx * n2 - dy * n1
        rhat = dx * n1 + dy * n2
        gp = -orient * tau * (1.0 - kappa * rhat)
        conv = np.abs(g) <= gtol[m]
        flat = np.abs(gp) <= 1e-14
        tn = t[m] - np.where(flat, 0.0, g / np.where(flat, 1.0, gp))
        off = (tn < t0 - slack) | (tn > t1 + slack)
        idxs = np.where(m)[0]
        state[idxs[conv]] = 1
        bad = ~conv & (flat | off)
        state[idxs[bad]] = 2
        step = ~conv & ~(flat | off)
        t[idxs[step]] = tn[step]
    state[state == 0] = 2
    t[state == 2] = np.nan

    # Evaluate the converged points and classify.
    for k, j in enumerate(act):
        tk = t[k]
        if not np.isfinite(tk):
            tk = _invert_fallback(boundary, (t0, t1), xs[j], ys[j], r_max)
            if tk is None:
                continue
        bx, by, tau, kappa, n1, n2 = (v[0] for v in frame_arrays(boundary, [tk]))
        dx, dy = xs[j] - bx, ys[j] - by
        g = dx * n2 - dy * n1
        rhat = dx * n1 + dy * n2
        if abs(g) > _ROOT_TOL:
            tk = _invert_fallback(boundary, (t0, t1), xs[j], ys[j], r_max)
            if tk is None:
                continue
            bx, by, tau, kappa, n1, n2 = (v[0] for v in frame_arrays(boundary, [tk]))
            dx, dy = xs[j] - bx, ys[j] - by
            g = dx * n2 - dy * n1
            rhat = dx * n1 + dy * n2
        if abs(g) > _ROOT_TOL:
            raise RuntimeError("inversion failed")
        if -rtol <= rhat <= r_max + 1e-12 and t0 - ttol <= tk <= t1 + ttol:
            found[j] = True
            r_out[j] = min(max(rhat, 0.0), r_max)
            t_out[j] = min(max(tk, t0), t1)
    return found, r_out, t_out


def _invert_fallback(boundary, arc, x, y, r_max):
    """Bounded distance minimization plus Newton polish.

    Returns the foot parameter, or None when the perpendicular foot lies
    beyond an arc endpoint (the nearest approach is the endpoint itself),
    which callers treat as "not in the strip of this arc".
    """
    t0, t1 = arc

    def dist2(t):
        bx, by = offset_points(boundary, 0.0, np.asarray([t]))
        return float((bx[0] - x) ** 2 + (by[0] - y) ** 2)

    res = minimize_scalar(dist2, bounds=(t0, t1), method="bounded",
                          options={"xatol": 1e-14})
    tk = float(res.x)
    slack = 0.25 * (t1 - t0)
    gtol = 1e-13 * max(1.0, abs(x), abs(y))
    orient = boundary.orientation
    g = math.inf
    for _ in range(60):
        bx, by, tau, kappa, n1, n2 = (float(v[0]) for v in frame_arrays(boundary, [tk]))
        dx, dy = x - bx, y - by
        g = dx * n2 - dy * n1
        if abs(g) <= gtol:
            break
        gp = -orient * tau * (1.0 - kappa * (dx * n1 + dy * n2))
        if abs(gp) < 1e-14:
            return None
        tk -= g / gp
        if not (t0 - slack <= tk <= t1 + slack):
            return None  # foot beyond the arc ends
    if abs(g) > _ROOT_TOL:
        raise RuntimeError("inversion failed")
    ttol = 1e-9 * max(1.0, boundary.period)
    if not (t0 - ttol <= tk <= t1 + ttol):
        return None
    return tk


def to_curvilinear(boundary, x, y, arc, r_max):
    """Invert the normal-offset map for one point.

    Looks for ``(r, t)`` with ``t`` in ``arc`` and ``0 <= r <= r_max``
    such that the point equals the boundary point at ``t`` offset by ``r``
    along the inward normal, to residual 1e-10.  Returns ``None`` when no
    such pair exists (the point is not in the strip above this arc).
    """
    found, r, t = _invert_batch(boundary, arc, r_max, [x], [y])
    if not found[0]:
        return None
    return CurvilinearPoint(r=float(r[0]), t=float(t[0]))


# ---------------------------------------------------------------------------
# Characteristic points and boundary splitting


def find_characteristic_points(boundary, samples: int = 4096):
    """Locate all boundary points where the normal x component vanishes.

    Scans ``samples`` uniform parameter values for sign changes of n1 and
    refines each root by bisection to |n1| <= 1e-10.  A root is classified
    external when the boundary is locally convex there (the tangent line
    stays outside the domain) and internal when it is locally concave (the
    tangent line enters the domain).

    Raises ``ValueError`` when n1 vanishes on a whole parameter interval,
    which signals a characteristic arc instead of isolated points.
    """
    if samples < 1024:
        raise ValueError("sample count must be at least 1024")
    T = boundary.period
    ts = np.linspace(0.0, T, samples, endpoint=False)
    _, _, _, _, n1, _ = frame_arrays(boundary, ts)

    zero = np.abs(n1) <= 1e-12
    if np.any(zero & np.roll(zero, -1)):
        raise ValueError("non-isolated characteristic points")

    roots = []
    for k in range(samples):
        k2 = (k + 1) % samples
        a, b = ts[k], ts[k] + T / samples
        fa, fb = n1[k], n1[k2]
        if zero[k]:
            roots.append(a)
            continue
        if zero[k2] or fa * fb > 0:
            continue
        # bisection on [a, b]
        for _ in range(200):
            m = 0.5 * (a + b)
            fm = float(frame_arrays(boundary, [m])[4][0])
            if abs(fm) <= _ROOT_TOL:
                a = b = m
                break
            if fa * fm < 0:
                b, fb = m, fm
            else:
                a, fa = m, fm
        roots.append(0.5 * (a + b))

    points = []
    for t in sorted(roots):
        x, y, _, kappa, _, _ = (float(v[0]) for v in frame_arrays(boundary, [t]))
        kind = "external" if kappa > 0 else "internal"
        points.append(CharacteristicPoint(t=t, point=(x, y), kind=kind, kappa_at=kappa))
    return points


def outflow_arcs(boundary, samples: int = 4096):
    """Maximal parameter intervals of the outflow boundary (n1 < 0).

    Arcs are bounded by consecutive characteristic points; an arc that
    crosses the parameter origin is returned wrapped, with its upper end
    exceeding the period.
    """
    points = find_characteristic_points(boundary, samples)
    if not points:
        raise ValueError("boundary has no characteristic points")
    T = boundary.period
    tvals = [p.t for p in points]
    arcs = []
    for k, ta in enumerate(tvals):
        tb = tvals[(k + 1) % len(tvals)]
        if tb <= ta:
            tb += T
        mid = 0.5 * (ta + tb)
        n1_mid = float(frame_arrays(boundary, [mid])[4][0])
        if n1_mid < 0:
            arcs.append((ta, tb))
    return arcs


def theta_min(boundary, delta: float = 0.0, samples: int = 4096):
    """Minimal |n1| over the outflow arcs trimmed by ``delta``.

    Each arc is shrunk by ``delta`` parameter units at both ends before
    taking the minimum; with ``delta = 0`` the open arcs are sampled just
    inside their endpoints, so the value tends to zero as the sampling is
    refined (the infimum at the characteristic points).  Raises
    ``ValueError`` when trimming empties every arc.
    """
    arcs = outflow_arcs(boundary)
    best = None
    for ta, tb in arcs:
        lo, hi = ta + delta, tb - delta
        if lo >= hi:
            continue
        ts = np.linspace(lo, hi, max(64, samples // max(1, len(arcs))))
        if delta == 0.0:
            ts = ts[1:-1]
        vals = np.abs(frame_arrays(boundary, ts)[4])
        k = int(np.argmin(vals))
        lo_w = ts[max(0, k - 1)]
        hi_w = ts[min(len(ts) - 1, k + 1)]
        res = minimize_scalar(
            lambda t: float(np.abs(frame_arrays(boundary, [t])[4][0])),
            bounds=(lo_w, hi_w), method="bounded", options={"xatol": 1e-13},
        )
        cand = min(float(vals[k]), float(res.fun))
        best = cand if best is None else min(best, cand)
    if best is None:
        raise ValueError("strip arcs degenerate")
    return best


# ---------------------------------------------------------------------------
# Point-in-domain test


def _polygon(boundary, vertices):
    cache = getattr(boundary, "_polygon_cache", None)
    if cache is None:
        cache = {}
        try:
            boundary._polygon_cache = cache
        except AttributeError:
            pass
    entry = cache.get(vertices)
    if entry is None:
        ts = np.linspace(0.0, boundary.period, vertices, endpoint=False)
        x, y = boundary.eval(ts)
        px = np.append(np.asarray(x, dtype=float), x[0])
        py = np.append(np.asarray(y, dtype=float), y[0])
        seg = np.hypot(np.diff(px), np.diff(py))
        tree = cKDTree(np.column_stack([px[:-1], py[:-1]]))
        entry = (px, py, tree, float(seg.max()))
        cache[vertices] = entry
    return entry


def _segment_distance(px, py, x, y):
    """Exact distance from one point to the polygon (all segments)."""
    ax, ay = px[:-1], py[:-1]
    bx, by = px[1:], py[1:]
    ex, ey = bx - ax, by - ay
    ln2 = ex * ex + ey * ey
    tproj = np.clip(((x - ax) * ex + (y - ay) * ey) / np.where(ln2 > 0, ln2, 1.0), 0.0, 1.0)
    cx = ax + tproj * ex
    cy = ay + tproj * ey
    return float(np.min(np.hypot(x - cx, y - cy)))


def contains_batch(boundary, xs, ys, vertices: int = 8192, chunk: int = 512):
    """Winding-number inside test for many points.

    The boundary is approximated by a polygon with ``vertices`` sampled
    vertices; a point is inside when the winding number of the polygon
    around it is nonzero.  Points within 1e-12 of the polygon are
    classified outside, so boundary nodes never receive an equation.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    px, py, tree, max_seg = _polygon(boundary, vertices)
    ax, ay = px[:-1], py[:-1]
    bx, by = px[1:], py[1:]

    inside = np.zeros(xs.shape, dtype=bool)
    for s in range(0, xs.size, chunk):
        e = min(s + chunk, xs.size)
        X = xs[s:e, None]
        Y = ys[s:e, None]
        up = (ay[None, :] <= Y) & (by[None, :] > Y)
        dn = (ay[None, :] > Y) & (by[None, :] <= Y)
        left = (bx - ax)[None, :] * (Y - ay[None, :]) - (X - ax[None, :]) * (by - ay)[None, :]
        wn = (up & (left > 0)).sum(axis=1) - (dn & (left < 0)).sum(axis=1)
        inside[s:e] = wn != 0

    # near-polygon override: within 1e-12 of the polygon counts as outside
    cand_idx = np.where(inside)[0]
    if cand_idx.size:
        dv, _ = tree.query(np.column_stack([xs[cand_idx], ys[cand_idx]]))
        near = cand_idx[dv <= 0.5 * max_seg + 1e-9]
        for j in near:
            if _segment_distance(px, py, xs[j], ys[j]) <= 1e-12:
                inside[j] = False
    return inside


def contains(boundary, x: float, y: float, vertices: int = 8192) -> bool:
    """True iff (x, y) is strictly inside the closed boundary."""
    return bool(contains_batch(boundary, [x], [y], vertices)[0])


def boundary_distance(boundary, x: float, y: float, vertices: int = 8192) -> float:
    """Distance from a point to the sampled boundary polygon."""
    px, py, tree, max_seg = _polygon(boundary, vertices)
    dv, _ = tree.query([x, y])
    if dv > max_seg:
        return float(dv)  # vertex distance is accurate enough far away
    return _segment_distance(px, py, float(x), float(y))


# ---------------------------------------------------------------------------
# Validation helpers


def validate_boundary(boundary, samples: int = 4096):
    """Check closure, regularity and derivative consistency.

    Raises ``ValueError`` with a description on the first violated
    invariant.  Finite-difference consistency is checked at interior
    parameter values only, so piecewise-smooth boundaries with isolated
    curvature jumps at t = 0 pass.
    """
    T = boundary.period
    x0, y0 = boundary.eval(0.0)
    xT, yT = boundary.eval(T)
    if abs(float(x0) - float(xT)) > 1e-12 or abs(float(y0) - float(yT)) > 1e-12:
        raise ValueError("boundary curve is not closed")

    ts = np.linspace(0.0, T, samples, endpoint=False)
    x1, y1 = boundary.deriv1(ts)
    tau = np.hypot(np.asarray(x1, dtype=float), np.asarray(y1, dtype=float))
    if np.any(tau < _TANGENT_TOL):
        raise ValueError("singular parameterization")

    # second differences of eval at this step size sit below the roundoff
    # floor, so deriv2 is checked against centered differences of deriv1
    h = 1e-5
    ts = np.linspace(0.05 * T, 0.95 * T, 64)
    xp, yp = boundary.eval(ts + h)
    xm, ym = boundary.eval(ts - h)
    d1x, d1y = boundary.deriv1(ts)
    d2x, d2y = boundary.deriv2(ts)
    scale1 = np.maximum(1.0, np.hypot(d1x, d1y))
    err1 = np.hypot((xp - xm) / (2 * h) - d1x, (yp - ym) / (2 * h) - d1y) / scale1
    d1xp, d1yp = boundary.deriv1(ts + h)
    d1xm, d1ym = boundary.deriv1(ts - h)
    scale2 = np.maximum(1.0, np.hypot(d2x, d2y))
    err2 = np.hypot((d1xp - d1xm) / (2 * h) - d2x,
                    (d1yp - d1ym) / (2 * h) - d2y) / scale2
    if np.max(err1) > 1e-6:
        raise ValueError("deriv1 inconsistent with finite differences")
    if np.max(err2) > 1e-6:
        raise ValueError("deriv2 inconsistent with finite differences")
    return True
