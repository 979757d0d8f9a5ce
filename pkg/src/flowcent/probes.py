"""Falsification probes for expansiveness notions.

Every probe searches seeded sample pairs for a witness (x, y) whose orbits
stay delta-close under an allowed time alignment while violating the
notion's conclusion. The alignment is a sup-cost monotone matching on the
sampled orbit grid (minimax dynamic programming over staircase paths);
its three modes mirror the allowed time changes:

    identity       h = id                       (kinematic)
    monotone_fix0  increasing, h(0) = 0         (C / K style)
    monotone_free  increasing, unpinned         (Komuro style)

A probe returning None means only "no violation found at this resolution
(horizon, delta, sample grid)" and never certifies expansiveness. Every
emitted counterexample has been re-validated from scratch at 10x tighter
integration before being returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import IntegrationError

MODES = ("identity", "monotone_fix0", "monotone_free")


@dataclass
class MatchResult:
    """Sup-cost alignment between two sampled orbits."""

    cost: float
    times_x: np.ndarray
    times_y: np.ndarray
    path: list                 # [(i, j)] staircase cells, ascending
    mode: str

    @property
    def breakpoints(self) -> np.ndarray:
        """(t, h(t)) pairs: strictly increasing in t, nondecreasing in h."""
        by_i = {}
        for i, j in self.path:
            by_i[i] = max(j, by_i.get(i, -1))
        out = [(self.times_x[i], self.times_y[j]) for i, j in sorted(by_i.items())]
        return np.array(out)

    def validate(self) -> bool:
        bp = self.breakpoints
        if bp.shape[0] == 0:
            return False
        if np.any(np.diff(bp[:, 0]) <= 0) or np.any(np.diff(bp[:, 1]) < 0):
            return False
        if self.mode == "identity" and not np.allclose(bp[:, 0], bp[:, 1]):
            return False
        if self.mode == "monotone_fix0":
            k = int(np.argmin(np.abs(bp[:, 0])))
            if abs(bp[k, 0]) < 1e-12 and abs(bp[k, 1]) > 1e-12:
                return False
        return True


def _minimax_forward(D: np.ndarray, open_begin: bool) -> np.ndarray:
    """F[i, j] = minimal over staircase paths into (i, j) of the max distance.

    open_begin lets paths start fresh anywhere on the i = 0 / j = 0
    boundary; otherwise they start at (0, 0). Vectorized over
    anti-diagonals (all three predecessors live on earlier diagonals).
    """
    n, m = D.shape
    F = np.full((n, m), np.inf)
    if open_begin:
        F[0, :] = D[0, :]
        F[:, 0] = D[:, 0]
    else:
        F[0, 0] = D[0, 0]
        F[0, 1:] = np.maximum.accumulate(D[0])[1:]
        F[1:, 0] = np.maximum.accumulate(D[:, 0])[1:]
    for k in range(2, n + m - 1):
        i_lo = max(1, k - m + 1)
        i_hi = min(n - 1, k - 1)
        if i_lo > i_hi:
            continue
        ii = np.arange(i_lo, i_hi + 1)
        jj = k - ii
        prev = np.minimum(F[ii - 1, jj], np.minimum(F[ii, jj - 1], F[ii - 1, jj - 1]))
        F[ii, jj] = np.maximum(D[ii, jj], prev)
    return F


def _backtrack(F: np.ndarray, D: np.ndarray, end, open_begin: bool) -> list:
    i, j = end
    path = [(i, j)]
    while True:
        if i == 0 and j == 0:
            break
        if open_begin and (i == 0 or j == 0) and F[i, j] == D[i, j]:
            break
        cands = []
        if i > 0 and j > 0:
            cands.append((F[i - 1, j - 1], 0, (i - 1, j - 1)))
        if i > 0:
            cands.append((F[i - 1, j], 1, (i - 1, j)))
        if j > 0:
            cands.append((F[i, j - 1], 2, (i, j - 1)))
        _, _, (i, j) = min(cands)
        path.append((i, j))
    path.reverse()
    return path


def _argmin_boundary(F: np.ndarray):
    n, m = F.shape
    best = (np.inf, (n - 1, m - 1))
    for j in range(m):
        if F[n - 1, j] < best[0]:
            best = (F[n - 1, j], (n - 1, j))
    for i in range(n):
        if F[i, m - 1] < best[0]:
            best = (F[i, m - 1], (i, m - 1))
    return best


def minimax_alignment(D: np.ndarray, mode: str):
    """(cost, path) of the sup-cost staircase alignment for the given mode.

    Feasible path sets are nested (identity < fix0 < free), so the costs
    are monotone in the opposite direction.
    """
    n, m = D.shape
    if mode == "identity":
        if n != m:
            raise ValueError("identity mode needs a common grid")
        diag = D[np.arange(n), np.arange(n)]
        return float(diag.max()), [(i, i) for i in range(n)]
    if mode == "monotone_free":
        F = _minimax_forward(D, open_begin=True)
        cost, end = _argmin_boundary(F)
        return float(cost), _backtrack(F, D, end, open_begin=True)
    if mode == "monotone_fix0":
        # pinned through the t = 0 cell: forward into it, backward out of it
        ic = jc = 0  # probe grids start at t = 0
        F = _minimax_forward(D, open_begin=False)
        cost, end = _argmin_boundary(F)
        path = _backtrack(F, D, end, open_begin=False)
        assert path[0] == (ic, jc)
        return float(cost), path
    raise ValueError(f"unknown mode: {mode!r}")


def monotone_match(traj_x, traj_y, mode: str, metric=None) -> MatchResult:
    """Align two sampled orbits on a common grid, minimizing the sup distance.

    ``traj_x``/``traj_y`` may be Trajectory objects or (times, states)
    pairs; the metric defaults to the trajectory field's wrap-aware
    distance."""
    tx, sx = _as_samples(traj_x)
    ty, sy = _as_samples(traj_y)
    if tx.size != ty.size or not np.allclose(tx, ty):
        raise ValueError("trajectories must share one output grid")
    if metric is None:
        metric = traj_x.field.pairwise_distance
    D = metric(sx, sy)
    cost, path = minimax_alignment(D, mode)
    return MatchResult(cost=cost, times_x=tx, times_y=ty, path=path, mode=mode)


def _as_samples(traj):
    if hasattr(traj, "times"):
        return np.asarray(traj.times), np.asarray(traj.states)
    times, states = traj
    return np.asarray(times), np.asarray(states)


@dataclass
class Counterexample:
    """A pair falsifying an expansiveness notion at the probe resolution."""

    kind: str                   # which notion was violated
    x: np.ndarray
    y: np.ndarray
    mode: str
    horizon: float
    alignment: MatchResult
    closeness: float            # sup over aligned pairs, < delta
    separation: float           # conclusion margin, > 0
    eps: float
    delta: float
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "kind": self.kind,
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "mode": self.mode,
            "horizon": self.horizon,
            "closeness": self.closeness,
            "separation": self.separation,
            "eps": self.eps,
            "delta": self.delta,
            "alignment": self.alignment.breakpoints.tolist(),
            "meta": self.meta,
        }


def _sample_pairs(rng, n_pairs, dim, scale, domain=None, wrap=None, anchors=None):
    """Seeded nearby pairs; a fraction is anchored near supplied points."""
    if domain is None:
        lo = np.zeros(dim)
        hi = np.ones(dim)
    else:
        box = np.asarray(domain, dtype=float)
        lo, hi = box[:, 0], box[:, 1]
    X = lo + (hi - lo) * rng.random((n_pairs, dim))
    anchors = list(anchors) if anchors else []
    for k in range(len(anchors)):
        idx = slice(k, n_pairs, max(4, len(anchors) * 4))
        X[idx] = np.asarray(anchors[k], dtype=float)
    Y = X + scale * rng.standard_normal(X.shape)
    if wrap is not None:
        X[:, wrap] = np.mod(X[:, wrap], 1.0)
        Y[:, wrap] = np.mod(Y[:, wrap], 1.0)
    else:
        Y = np.clip(Y, lo, hi)
    return X, Y


def _orbit(flowlike, x, T, n_steps):
    if hasattr(flowlike, "sampled_orbit"):
        return flowlike.sampled_orbit(x, 0.0, T, n_steps)
    times = np.linspace(0.0, T, n_steps)
    states = np.array([flowlike.at(x, t) for t in times])
    return times, states


def _interp_state(times, states, t):
    i = int(np.clip(np.searchsorted(times, t) - 1, 0, len(times) - 2))
    w = (t - times[i]) / (times[i + 1] - times[i])
    return (1 - w) * states[i] + w * states[i + 1]


def _separation_point(flowlike, x, y, eps, n=41):
    """min over |s| <= eps of dist(y, phi_s(x)) for the point conclusions."""
    if hasattr(flowlike, "segment"):
        seg = flowlike.segment(x, -eps, eps)
        fn = lambda s: flowlike.distance(seg(s), y)
    else:
        fn = lambda s: flowlike.distance(flowlike.at(x, s), y)
    ss = np.linspace(-eps, eps, n)
    vals = [fn(s) for s in ss]
    i = int(np.argmin(vals))
    res = minimize_scalar(fn, bounds=(ss[max(i - 1, 0)], ss[min(i + 1, n - 1)]),
                          method="bounded", options={"xatol": 1e-10})
    return float(min(res.fun, min(vals)))


def _separation_komuro(flowlike, match, tx, sx, ty, sy, eps):
    """min over t0 of dist(phi_{h(t0)}(y), phi_{[t0-eps, t0+eps]}(x))."""
    bp = match.breakpoints
    T = tx[-1]
    best = math.inf
    for t0, h0 in bp:
        ypt = _interp_state(ty, sy, h0)
        lo = max(tx[0], t0 - eps)
        hi = min(T, t0 + eps)
        arc = np.linspace(lo, hi, 17)
        dmin = min(flowlike.distance(_interp_state(tx, sx, t), ypt) for t in arc)
        best = min(best, dmin)
        if best == 0.0:
            break
    return float(best)


def _probe(flowlike, kind, mode, eps, delta, n_pairs, T, seed, domain=None,
            anchors=None, n_steps=65, conclusion_tol=1e-6, revalidate=True):
    rng = np.random.default_rng(seed)
    dim = flowlike.dim
    wrap = getattr(getattr(flowlike, "field", None), "wrap", None)
    X, Y = _sample_pairs(rng, n_pairs, dim, scale=delta / 2.0, domain=domain,
                         wrap=wrap, anchors=anchors)
    for x, y in zip(X, Y):
        if flowlike.distance(x, y) <= 1e-12:
            continue
        try:
            tx, sx = _orbit(flowlike, x, T, n_steps)
            ty, sy = _orbit(flowlike, y, T, n_steps)
        except IntegrationError:
            continue  # pair escaped the integrable region; not a witness
        D = flowlike.pairwise_distance(sx, sy)
        cost, path = minimax_alignment(D, mode)
        if cost >= delta:
            continue
        match = MatchResult(cost=cost, times_x=tx, times_y=ty, path=path,
                            mode=mode)
        if kind == "komuro":
            sep = _separation_komuro(flowlike, match, tx, sx, ty, sy, eps)
        else:
            sep = _separation_point(flowlike, x, y, eps)
        if sep <= conclusion_tol:
            continue  # conclusion holds; not a counterexample
        ce = Counterexample(kind=kind, x=np.asarray(x, float),
                            y=np.asarray(y, float), mode=mode, horizon=T,
                            alignment=match, closeness=cost, separation=sep,
                            eps=eps, delta=delta,
                            meta={"seed": seed, "n_steps": n_steps})
        if not revalidate or revalidate_counterexample(ce, flowlike):
            return ce
    return None


def komuro_violation_search(flowlike, eps, delta, n_pairs, T, seed=0, **kw):
    """Counterexample to Komuro-style expansiveness: free monotone alignment,
    conclusion places one aligned y-point on a short orbit arc of x."""
    return _probe(flowlike, "komuro", "monotone_free", eps, delta, n_pairs, T,
                  seed, **kw)


def k_expansive_check(flowlike, eps, delta, n_pairs, T, seed=0, **kw):
    """Monotone alignment pinned at 0; conclusion y = phi_{t0}(x), |t0| < eps."""
    return _probe(flowlike, "k_expansive", "monotone_fix0", eps, delta,
                  n_pairs, T, seed, **kw)


def c_expansive_check(flowlike, eps, delta, n_pairs, T, seed=0, **kw):
    """Continuous h with h(0) = 0, approximated by the pinned monotone family
    (a subset, hence still a sound falsifier); point conclusion as K."""
    return _probe(flowlike, "c_expansive", "monotone_fix0", eps, delta,
                  n_pairs, T, seed, **kw)


def kinematic_violation_search(flowlike, eps, delta, n_pairs, T, seed=0, **kw):
    """h forced to the identity; conclusion y = phi_s(x), |s| < eps."""
    return _probe(flowlike, "kinematic", "identity", eps, delta, n_pairs, T,
                  seed, **kw)


def revalidate_counterexample(ce: Counterexample, flowlike, factor: float = 10.0,
                              conclusion_tol: float = 1e-6) -> bool:
    """Re-integrate both orbits at ``factor`` tighter tolerance and recheck
    that the recorded closeness and separation margins persist."""
    tight = flowlike.tightened(factor) if hasattr(flowlike, "tightened") else flowlike
    n_steps = ce.meta.get("n_steps", 65)
    tx, sx = _orbit(tight, ce.x, ce.horizon, n_steps)
    ty, sy = _orbit(tight, ce.y, ce.horizon, n_steps)
    bp = ce.alignment.breakpoints
    close = max(tight.distance(_interp_state(tx, sx, t), _interp_state(ty, sy, h))
                for t, h in bp)
    if close >= ce.delta:
        return False
    if ce.kind == "komuro":
        sep = _separation_komuro(tight, ce.alignment, tx, sx, ty, sy, ce.eps)
    else:
        sep = _separation_point(tight, ce.x, ce.y, ce.eps)
    return sep > conclusion_tol


# ---------------------------------------------------------------------------
# R^d-action probe


class PiecewiseLinearMap:
    """Componentwise monotone PL perturbation of the identity with h(0) = 0."""

    def __init__(self, knots, values):
        self.knots = np.asarray(knots, dtype=float)        # shared grid, has 0
        self.values = np.asarray(values, dtype=float)      # (d, len(knots))
        if np.any(np.diff(self.values, axis=1) < 0):
            raise ValueError("PL values must be nondecreasing per axis")
        zero = int(np.argmin(np.abs(self.knots)))
        if np.any(np.abs(self.values[:, zero]) > 1e-12):
            raise ValueError("PL map must fix 0")

    def __call__(self, v):
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return np.array([np.interp(v[i], self.knots, self.values[i])
                         for i in range(v.size)])


def _pl_family(rng, d, horizon, n_knots, n_draws):
    """Identity plus seeded monotone PL perturbations on [-horizon, horizon]."""
    knots = np.linspace(-horizon, horizon, 2 * n_knots + 1)
    fam = [PiecewiseLinearMap(knots, np.tile(knots, (d, 1)))]
    zero = n_knots
    for _ in range(n_draws):
        slopes = np.exp(rng.uniform(np.log(0.5), np.log(2.0),
                                    size=(d, knots.size - 1)))
        vals = np.zeros((d, knots.size))
        for i in range(d):
            seg = slopes[i] * np.diff(knots)
            vals[i, 1:] = np.cumsum(seg)
            vals[i] -= vals[i, zero]
        fam.append(PiecewiseLinearMap(knots, vals))
    return fam


def action_violation_search(action, eps, delta, n_pairs, horizon, seed=0,
                            v_per_axis=7, n_knots=2, n_draws=6,
                            conclusion_tol=1e-6, domain=None):
    """Falsifier for expansive R^d-actions.

    ``action`` needs ``apply(v, x)``, ``distance``, ``d`` and either
    ``sample(rng)`` or ``dim`` (+ optional domain). Searches seeded pairs
    and a family of componentwise monotone PL time changes h (h(0) = 0)
    for sup_v d(Phi_v(x), Phi_{h(v)}(y)) < delta over the v-grid with no
    connecting displacement of norm < eps.
    """
    import itertools as _it

    rng = np.random.default_rng(seed)
    d = action.d
    axis = np.linspace(-horizon, horizon, v_per_axis)
    vgrid = [np.asarray(v, float) for v in _it.product(axis, repeat=d)]
    family = _pl_family(rng, d, horizon, n_knots, n_draws)

    for _ in range(n_pairs):
        if hasattr(action, "sample"):
            x = action.sample(rng)
        else:
            x = rng.random(action.dim)
        y = np.asarray(x, float).copy()
        bump = (delta / 2.0) * rng.standard_normal(y.shape)
        y = y + bump
        if hasattr(action, "canonicalize"):
            x, y = action.canonicalize(x), action.canonicalize(y)
        if action.distance(x, y) <= 1e-12:
            continue
        best_cost = math.inf
        best_h = None
        for h in family:
            cost = 0.0
            for v in vgrid:
                cost = max(cost, action.distance(action.apply(v, x),
                                                 action.apply(h(v), y)))
                if cost >= min(delta, best_cost):
                    break
            if cost < best_cost:
                best_cost, best_h = cost, h
        if best_cost >= delta:
            continue
        # conclusion: some ||v0|| < eps with y = Phi_{v0}(x)
        steps = np.linspace(-eps, eps, 7)
        margin = math.inf
        for v0 in _it.product(steps, repeat=d):
            v0 = np.asarray(v0)
            if np.linalg.norm(v0) >= eps:
                continue
            margin = min(margin, action.distance(action.apply(v0, x), y))
        if margin > conclusion_tol:
            return {
                "kind": "action_expansive",
                "x": np.asarray(x, float).tolist(),
                "y": np.asarray(y, float).tolist(),
                "closeness": float(best_cost),
                "separation": float(margin),
                "h_knots": best_h.knots.tolist(),
                "h_values": best_h.values.tolist(),
                "eps": eps, "delta": delta, "horizon": horizon, "seed": seed,
            }
    return None
