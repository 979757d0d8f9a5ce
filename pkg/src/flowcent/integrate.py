"""Numerical flows: adaptive integration, dense trajectories, period probes.

The integrator is an adaptive embedded Runge-Kutta pair (DOP853) with
dense output. Torus coordinates are kept unwrapped internally (the
catalog fields are 1-periodic, so the dynamics agree) and wrapped on
output; distances always use the wrap-around metric of the field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from .errors import IntegrationError

DEFAULT_TOL = 1e-10


def _solve(field, x0, t_end, tol, dense=False, t_eval=None):
    if t_end == 0.0:
        raise ValueError("empty integration span")
    sol = solve_ivp(lambda t, y: field(y), (0.0, t_end), np.asarray(x0, float),
                    method="DOP853", rtol=tol, atol=tol,
                    dense_output=dense, t_eval=t_eval)
    if not sol.success:
        last = float(sol.t[-1]) if sol.t.size else 0.0
        raise IntegrationError(
            f"integration failed at t = {last:.6g}: {sol.message}", last_t=last)
    return sol


def flow(field, x0, t, tol: float = DEFAULT_TOL) -> np.ndarray:
    """phi_t(x0) for the field's flow; torus coordinates wrapped to [0, 1)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    x0 = np.asarray(x0, dtype=float)
    if t == 0.0:
        return field.wrap_point(x0)
    sol = _solve(field, x0, t, tol, t_eval=[t])
    return field.wrap_point(sol.y[:, -1])


class OrbitSegment:
    """Dense orbit piece through x over [t_lo, t_hi] (may straddle 0)."""

    def __init__(self, field, x0, t_lo, t_hi, tol=DEFAULT_TOL):
        if t_lo > t_hi:
            raise ValueError("t_lo must not exceed t_hi")
        self.field = field
        self.x0 = np.asarray(x0, dtype=float)
        self.t_lo, self.t_hi = float(t_lo), float(t_hi)
        self._fwd = _solve(field, x0, max(t_hi, 0.0), tol, dense=True).sol \
            if t_hi > 0 else None
        self._bwd = _solve(field, x0, min(t_lo, 0.0), tol, dense=True).sol \
            if t_lo < 0 else None

    def __call__(self, t):
        if not (self.t_lo - 1e-12 <= t <= self.t_hi + 1e-12):
            raise ValueError(f"t = {t} outside segment [{self.t_lo}, {self.t_hi}]")
        if t == 0.0 or (t > 0 and self._fwd is None) or (t < 0 and self._bwd is None):
            return self.x0.copy()
        return (self._fwd if t > 0 else self._bwd)(t)


@dataclass
class Trajectory:
    """Uniformly sampled orbit with stored derivatives; cubic Hermite between
    samples (interp_order = 3)."""

    field: object
    times: np.ndarray
    states: np.ndarray  # unwrapped, shape (len(times), dim)
    derivs: np.ndarray
    tol: float

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    @property
    def states_wrapped(self) -> np.ndarray:
        return np.array([self.field.wrap_point(s) for s in self.states])

    def state(self, t) -> np.ndarray:
        """Cubic Hermite interpolation of the stored samples (wrapped)."""
        t = float(t)
        if not (self.t0 - 1e-12 <= t <= self.t1 + 1e-12):
            raise ValueError(f"t = {t} outside [{self.t0}, {self.t1}]")
        i = int(np.clip(np.searchsorted(self.times, t) - 1, 0, len(self.times) - 2))
        ta, tb = self.times[i], self.times[i + 1]
        h = tb - ta
        s = (t - ta) / h
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        x = (h00 * self.states[i] + h10 * h * self.derivs[i]
             + h01 * self.states[i + 1] + h11 * h * self.derivs[i + 1])
        return self.field.wrap_point(x)


def trajectory(field, x0, t_span, dt_out, tol: float = DEFAULT_TOL) -> Trajectory:
    """Dense-output trajectory over t_span = (t0, t1), sampled every dt_out."""
    t0, t1 = map(float, t_span)
    if not t0 < t1:
        raise ValueError("need t0 < t1")
    if dt_out <= 0:
        raise ValueError("dt_out must be positive")
    n = max(2, int(math.ceil((t1 - t0) / dt_out)) + 1)
    times = np.linspace(t0, t1, n)
    x0 = np.asarray(x0, dtype=float)

    states = np.empty((n, x0.size))
    if t0 == 0.0:
        states[0] = x0
        sol = _solve(field, x0, t1, tol, t_eval=times[1:])
        states[1:] = sol.y.T
    elif t1 == 0.0:
        states[-1] = x0
        sol = _solve(field, x0, t0, tol, t_eval=times[:-1][::-1])
        states[:-1] = sol.y.T[::-1]
    elif t0 < 0.0 < t1:
        k = int(np.searchsorted(times, 0.0))
        neg = times[:k][::-1]
        pos = times[k:]
        if neg.size:
            states[:k] = _solve(field, x0, t0, tol, t_eval=neg).y.T[::-1]
        states[k:] = _solve_through_zero(field, x0, pos, tol)
    else:
        # span does not contain 0: integrate from 0 to t0 first, then sample
        lead = _solve(field, x0, t0, tol, t_eval=[t0]).y[:, -1]
        states[0] = lead
        shifted = times - t0
        sol = solve_ivp(lambda t, y: field(y), (0.0, shifted[-1]), lead,
                        method="DOP853", rtol=tol, atol=tol, t_eval=shifted[1:])
        if not sol.success:
            raise IntegrationError(f"integration failed: {sol.message}")
        states[1:] = sol.y.T
    derivs = np.array([field(s) for s in states])
    return Trajectory(field=field, times=times, states=states, derivs=derivs, tol=tol)


def _solve_through_zero(field, x0, pos_times, tol):
    out = np.empty((pos_times.size, np.asarray(x0).size))
    i = 0
    if pos_times[0] == 0.0:
        out[0] = x0
        i = 1
    if i < pos_times.size:
        sol = _solve(field, x0, pos_times[-1], tol, t_eval=pos_times[i:])
        out[i:] = sol.y.T
    return out


class FlowMap:
    """Flow of a vector field as a reusable handle: point evaluation, dense
    segments, sampled orbits and the wrap-aware metric of the domain."""

    def __init__(self, field, tol: float = DEFAULT_TOL):
        self.field = field
        self.tol = float(tol)

    @property
    def dim(self) -> int:
        return self.field.dim

    def at(self, x, t) -> np.ndarray:
        return flow(self.field, x, t, self.tol)

    def segment(self, x, t_lo, t_hi) -> OrbitSegment:
        return OrbitSegment(self.field, x, t_lo, t_hi, self.tol)

    def trajectory(self, x, t_span, dt_out) -> Trajectory:
        return trajectory(self.field, x, t_span, dt_out, self.tol)

    def sampled_orbit(self, x, t0, t1, n):
        times = np.linspace(t0, t1, n)
        traj = trajectory(self.field, x, (t0, t1), (t1 - t0) / (n - 1), self.tol)
        return times, traj.states

    def distance(self, x, y) -> float:
        return self.field.distance(x, y)

    def pairwise_distance(self, A, B) -> np.ndarray:
        return self.field.pairwise_distance(A, B)

    def regular(self, x, tol_reg: float = 1e-12) -> bool:
        return bool(np.linalg.norm(self.field(x)) > tol_reg)

    def speed(self, x) -> float:
        return float(np.linalg.norm(self.field(x)))

    def tightened(self, factor: float) -> "FlowMap":
        return FlowMap(self.field, self.tol / factor)


@dataclass
class PeriodProbeResult:
    eps0_upper: float  # may be math.inf
    witness: tuple | None  # (point, period) of the best close return


def min_period_probe(flowlike, sample_points, t_max, tol_close,
                     t_floor=None, scan_dt=0.05) -> PeriodProbeResult:
    """Upper bound on the minimal period of regular periodic orbits.

    Each sample orbit is scanned for close returns ||phi_T(x) - x|| <=
    tol_close with T > t_floor; candidate returns are refined by scalar
    minimization of the return distance. Returns the smallest refined
    period found, or infinity when no orbit returns by t_max (a valid
    outcome, not an error).
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    if t_floor is None:
        t_floor = 10.0 * scan_dt
    best = math.inf
    witness = None
    for x in sample_points:
        x = np.asarray(x, dtype=float)
        if hasattr(flowlike, "regular") and not flowlike.regular(x, 1e-10):
            raise ValueError("sample point is not regular for the flow")
        speed = flowlike.speed(x) if hasattr(flowlike, "speed") else 1.0
        gate = max(tol_close, 0.75 * scan_dt * max(speed, 1e-12))

        if hasattr(flowlike, "segment"):
            seg = flowlike.segment(x, 0.0, t_max)
            dist_at = lambda t: flowlike.distance(seg(t), x)
        else:
            dist_at = lambda t: flowlike.distance(flowlike.at(x, t), x)

        ts = np.arange(scan_dt, t_max + scan_dt / 2, scan_dt)
        ds = np.array([dist_at(t) for t in ts])
        for i in range(1, len(ts) - 1):
            if ts[i] <= t_floor or ds[i] > gate:
                continue
            if ds[i] <= ds[i - 1] and ds[i] <= ds[i + 1]:
                res = minimize_scalar(dist_at, bounds=(ts[i - 1], ts[i + 1]),
                                      method="bounded",
                                      options={"xatol": 1e-12})
                if res.fun <= tol_close and res.x < best:
                    best = float(res.x)
                    witness = (x.copy(), best)
    return PeriodProbeResult(eps0_upper=best, witness=witness)


class Suspension1DFlow:
    """Suspension flow over an invertible base map with a positive roof.

    Points are arrays [base..., s] with 0 <= s < roof(base). The flow is
    the vertical displacement rule: climb at unit speed, apply the base
    map at each roof crossing. Exact up to base-map roundoff; no ODE
    integration involved.
    """

    def __init__(self, base_map, roof, base_inverse=None, base_dim=1,
                 wrap_base=True, max_crossings=10**6):
        self.f = base_map
        self.f_inv = base_inverse
        self.roof = roof
        self.base_dim = int(base_dim)
        self.wrap_base = bool(wrap_base)
        self.max_crossings = max_crossings
        # roof must be bounded away from zero on the fundamental domain
        probe = np.linspace(0.0, 1.0, 33)[:-1]
        grids = np.meshgrid(*([probe] * self.base_dim), indexing="ij")
        vals = [float(roof(np.array(pt))) for pt in zip(*(g.ravel() for g in grids))]
        if min(vals) <= 0:
            raise ValueError("roof must be positive")
        self._min_roof = min(vals)

    @property
    def dim(self) -> int:
        return self.base_dim + 1

    def split(self, p):
        p = np.asarray(p, dtype=float)
        return p[:self.base_dim], float(p[self.base_dim])

    def join(self, x, s) -> np.ndarray:
        return np.concatenate([np.asarray(x, float).ravel(), [float(s)]])

    def at(self, p, t) -> np.ndarray:
        x, s = self.split(p)
        total = s + t
        crossings = 0
        while total >= self.roof(x):
            total -= self.roof(x)
            x = self._apply(self.f, x)
            crossings += 1
            if crossings > self.max_crossings:
                raise IntegrationError("too many roof crossings")
        while total < 0.0:
            if self.f_inv is None:
                raise ValueError("backward flow needs the base inverse")
            x = self._apply(self.f_inv, x)
            total += self.roof(x)
            crossings += 1
            if crossings > self.max_crossings:
                raise IntegrationError("too many roof crossings")
        return self.join(x, total)

    def _apply(self, g, x):
        y = np.asarray(g(x), dtype=float).ravel()
        return np.mod(y, 1.0) if self.wrap_base else y

    def _base_dist(self, x, y):
        d = np.asarray(y, float) - np.asarray(x, float)
        if self.wrap_base:
            d = np.mod(d + 0.5, 1.0) - 0.5
        return float(np.linalg.norm(d))

    def distance(self, p, q) -> float:
        """Product metric minimized over single roof identifications."""
        x, s = self.split(p)
        y, u = self.split(q)
        cands = [self._base_dist(x, y) + abs(s - u)]
        cands.append(self._base_dist(self._apply(self.f, x), y)
                     + abs(s - self.roof(x) - u))
        cands.append(self._base_dist(x, self._apply(self.f, y))
                     + abs(s - (u - self.roof(y))))
        return min(cands)

    def pairwise_distance(self, A, B) -> np.ndarray:
        A = np.atleast_2d(A)
        B = np.atleast_2d(B)
        bd = self.base_dim

        def parts(P):
            base = P[:, :bd]
            s = P[:, bd]
            fbase = np.array([self._apply(self.f, b) for b in base])
            roof = np.array([float(self.roof(b)) for b in base])
            return base, s, fbase, roof

        xa, sa, fa, ra = parts(A)
        xb, sb, fb, rb = parts(B)

        def bdist(P, Q):
            D = Q[None, :, :] - P[:, None, :]
            if self.wrap_base:
                D = np.mod(D + 0.5, 1.0) - 0.5
            return np.linalg.norm(D, axis=-1)

        direct = bdist(xa, xb) + np.abs(sa[:, None] - sb[None, :])
        lift_a = bdist(fa, xb) + np.abs((sa - ra)[:, None] - sb[None, :])
        lift_b = bdist(xa, fb) + np.abs(sa[:, None] - (sb - rb)[None, :])
        return np.minimum(direct, np.minimum(lift_a, lift_b))

    def sampled_orbit(self, p, t0, t1, n):
        times = np.linspace(t0, t1, n)
        states = np.empty((n, self.dim))
        cur = self.at(p, times[0])
        states[0] = cur
        for i in range(1, n):
            cur = self.at(cur, times[i] - times[i - 1])
            states[i] = cur
        return times, states

    def regular(self, p, tol_reg: float = 0.0) -> bool:
        return True  # suspension flows have unit vertical speed everywhere

    def speed(self, p) -> float:
        return 1.0

    def tightened(self, factor):
        return self  # exact displacement arithmetic; nothing to tighten


def suspension1d_flow(base_map, roof, base_inverse=None, base_dim=1,
                      wrap_base=True) -> Suspension1DFlow:
    """Build the suspension flow of (base_map, roof); rejects roofs <= 0."""
    return Suspension1DFlow(base_map, roof, base_inverse=base_inverse,
                            base_dim=base_dim, wrap_base=wrap_base)
