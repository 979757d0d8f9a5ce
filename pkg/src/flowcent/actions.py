"""R^d-actions generated by d commuting vector fields on a torus.

An action is represented by its generator fields; homogeneity is the
pointwise linear independence of the generators, the change-of-basis
matrix A(x) solves [Y_1(x) ... Y_d(x)] = [X_1(x) ... X_d(x)] A in the
least-squares sense, and the collapse test runs the flow-reparameterization
pipeline direction by direction to detect one-dimensional orbits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import HypothesisError, MatchError
from .fields import CombinationField
from .integrate import DEFAULT_TOL, FlowMap, PeriodProbeResult, flow
from . import reparam


@dataclass
class CommutationReport:
    max_bracket: float
    max_flow_defect: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_bracket <= self.tol and self.max_flow_defect <= self.tol


def verify_commuting(fields_, sample_points, tol_comm: float = 1e-8,
                     st_pairs=((0.4, 0.6),), tol_int: float = DEFAULT_TOL
                     ) -> CommutationReport:
    """Max pairwise Lie bracket and flow-commutation defect over samples."""
    fl = [FlowMap(f, tol_int) for f in fields_]
    max_br = 0.0
    max_fd = 0.0
    for i in range(len(fields_)):
        for j in range(i + 1, len(fields_)):
            for x in sample_points:
                br = np.linalg.norm(reparam.lie_bracket(fields_[i], fields_[j], x))
                max_br = max(max_br, float(br))
            fd = reparam.flow_commutation_defect(fl[i], fl[j], sample_points,
                                                 st_pairs)
            max_fd = max(max_fd, fd)
    return CommutationReport(max_bracket=max_br, max_flow_defect=max_fd,
                             tol=tol_comm)


class ActionSpec:
    """d commuting generator fields on a common torus domain."""

    def __init__(self, generator_fields, sample_points=None, tol_comm: float = 1e-8,
                 tol_int: float = DEFAULT_TOL):
        if not generator_fields:
            raise ValueError("need at least one generator")
        dims = {f.dim for f in generator_fields}
        if len(dims) != 1:
            raise ValueError("generators must share one dimension")
        self.fields = list(generator_fields)
        self.dim = dims.pop()
        self.d = len(self.fields)
        self.tol_int = float(tol_int)
        if sample_points is None:
            sample_points = default_samples(self.dim, 3)
        self.commutation = verify_commuting(self.fields, sample_points, tol_comm,
                                            tol_int=tol_int)
        if not self.commutation.passed:
            raise ValueError(
                f"generators do not commute: bracket {self.commutation.max_bracket:.3g}, "
                f"flow defect {self.commutation.max_flow_defect:.3g} > {tol_comm:.3g}")

    @property
    def commutation_residual(self) -> float:
        return max(self.commutation.max_bracket, self.commutation.max_flow_defect)

    def generator_flow(self, i: int) -> FlowMap:
        return FlowMap(self.fields[i], self.tol_int)

    def frame(self, x) -> np.ndarray:
        """(n, d) matrix of generator values at x."""
        return np.column_stack([f(x) for f in self.fields])

    def apply(self, v, x) -> np.ndarray:
        """Phi_v(x), composing the commuting generator flows."""
        v = np.asarray(v, dtype=float)
        out = np.asarray(x, dtype=float)
        for i in range(self.d):
            if v[i] != 0.0:
                out = flow(self.fields[i], out, float(v[i]), self.tol_int)
        return out

    def direction_field(self, v) -> CombinationField:
        return CombinationField(self.fields, v)

    def distance(self, x, y) -> float:
        return self.fields[0].distance(x, y)


def default_samples(dim: int, per_axis: int) -> list:
    """Deterministic off-grid sample points in [0, 1)^dim."""
    axes = [np.linspace(0.11, 0.87, per_axis) + 0.013 * k
            for k in range(dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return [np.array(p) for p in zip(*(m.ravel() for m in mesh))]


def check_homogeneous(action: ActionSpec, sample_points, tol_rank: float = 1e-8):
    """True when the d generator vectors stay linearly independent: the
    smallest singular value of the frame exceeds tol_rank at every sample."""
    worst = math.inf
    for x in sample_points:
        s = np.linalg.svd(action.frame(x), compute_uv=False)
        worst = min(worst, float(s[-1]) if s.size >= action.d else 0.0)
    return worst > tol_rank, worst


def _grid_images(action: ActionSpec, x, axes):
    """Phi over a tensor grid of parameters, reusing dense trajectories.

    axes is a list of d 1-D time arrays; returns an array of shape
    (len(axes[0]), ..., len(axes[d-1]), n).
    """
    from .integrate import trajectory

    def images_1d(fld, x0, ts):
        out = np.empty((ts.size, action.dim))
        neg = ts[ts < 0]
        pos = ts[ts > 0]
        if neg.size:
            traj = trajectory(fld, x0, (float(neg.min()), 0.0),
                              -float(neg.min()) / max(neg.size, 1),
                              action.tol_int)
            for k, t in enumerate(ts):
                if t < 0:
                    out[k] = traj.state(t)
        if pos.size:
            traj = trajectory(fld, x0, (0.0, float(pos.max())),
                              float(pos.max()) / max(pos.size, 1),
                              action.tol_int)
            for k, t in enumerate(ts):
                if t > 0:
                    out[k] = traj.state(t)
        out[ts == 0.0] = x0
        return out

    def recurse(x0, depth):
        ts = np.asarray(axes[depth], dtype=float)
        base = images_1d(action.fields[depth], x0, ts)
        if depth == action.d - 1:
            return base
        return np.stack([recurse(b, depth + 1) for b in base])

    return recurse(np.asarray(x, dtype=float), 0)


def action_min_period(action: ActionSpec, sample_points, radius,
                      tol_close: float = 1e-8, grid: int = 50,
                      norm_floor=None) -> PeriodProbeResult:
    """Upper-bound search for the shortest nonzero period vector of the action.

    Coarse tensor grid of step radius/grid over [-radius, radius]^d, then
    Nelder-Mead refinement of the best candidates. Returns the least ||v||
    found with max_x dist(Phi_v(x), x) <= tol_close, or infinity.
    """
    if radius <= 0:
        return PeriodProbeResult(eps0_upper=math.inf, witness=None)
    step = radius / grid
    if norm_floor is None:
        norm_floor = 3.0 * step
    axis = np.arange(-grid, grid + 1) * step
    axes = [axis] * action.d
    gs = [np.asarray(g) for g in
          np.meshgrid(*axes, indexing="ij")]
    vnorm = np.sqrt(sum(g**2 for g in gs))

    dist_max = np.zeros_like(vnorm)
    for x in sample_points:
        imgs = _grid_images(action, x, axes)
        diffs = action.fields[0].pairwise_distance(
            imgs.reshape(-1, action.dim), np.asarray(x, float)[None, :])
        dist_max = np.maximum(dist_max, diffs.reshape(vnorm.shape))

    mask = (vnorm >= norm_floor) & (vnorm <= radius)
    cand = dist_max.copy()
    cand[~mask] = math.inf
    order = np.argsort(cand.ravel())

    def objective(v):
        if np.linalg.norm(v) > radius + step:
            return 1.0
        return max(action.distance(action.apply(v, x), x) for x in sample_points)

    best = math.inf
    witness = None
    gate = max(tol_close, 2.0 * step)
    for flat in order[:6]:
        if not np.isfinite(cand.ravel()[flat]) or cand.ravel()[flat] > gate:
            break
        v0 = np.array([g.ravel()[flat] for g in gs])
        res = minimize(objective, v0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400})
        v = res.x
        nv = float(np.linalg.norm(v))
        if res.fun <= tol_close and norm_floor <= nv < best:
            best = nv
            witness = v.copy()
    return PeriodProbeResult(eps0_upper=best, witness=witness)


def change_of_basis_A(Xs, Ys, x, tol_rank: float = 1e-10):
    """Solve [Y_1(x) ... Y_d(x)] = [X_1(x) ... X_d(x)] A by least squares.

    Xs, Ys: lists of fields (or anything callable at x). Returns (A, residual);
    the residual is the Frobenius norm of the unexplained part, zero exactly
    when every Y_i lies in span{X_j(x)}. A rank-deficient X-frame is an error
    naming the point.
    """
    x = np.asarray(x, dtype=float)
    Xmat = np.column_stack([f(x) for f in Xs])
    Ymat = np.column_stack([f(x) for f in Ys])
    svals = np.linalg.svd(Xmat, compute_uv=False)
    if svals.size < Xmat.shape[1] or svals[-1] <= tol_rank * svals[0]:
        raise HypothesisError(f"generator frame is rank-deficient at x = {x.tolist()}")
    A, _, _, _ = np.linalg.lstsq(Xmat, Ymat, rcond=None)
    resid = float(np.linalg.norm(Xmat @ A - Ymat))
    return A, resid


@dataclass
class ActionReparamMatrix:
    points: np.ndarray
    matrices: np.ndarray            # (m, d, d)
    invariance_residual: float
    certification_residual: float   # max ||Psi_v(x) - Phi(A(x) v, x)||
    frame_residual: float           # worst least-squares residual

    def to_dict(self):
        return {
            "points": self.points.tolist(),
            "matrices": self.matrices.tolist(),
            "invariance_residual": self.invariance_residual,
            "certification_residual": self.certification_residual,
            "frame_residual": self.frame_residual,
        }


def action_reparam_field(Phi: ActionSpec, Psi: ActionSpec, sample_points,
                         v_checks, tol_comm: float = 1e-6,
                         cross_samples=None) -> ActionReparamMatrix:
    """Sampled change-of-basis field A(x) with invariance and certification.

    Requires Phi and Psi to be valid actions and every Psi-generator to
    commute with every Phi-generator (checked; refused otherwise). The
    certification evaluates Psi_v(x) against Phi(A(x) v, x) directly for
    each check vector.
    """
    if cross_samples is None:
        cross_samples = sample_points[: min(3, len(sample_points))]
    for g in Psi.fields:
        rep = verify_commuting([*Phi.fields, g], cross_samples, tol_comm,
                               tol_int=Phi.tol_int)
        if not rep.passed:
            raise HypothesisError(
                f"a candidate generator does not commute with the action "
                f"(bracket {rep.max_bracket:.3g}, flow defect {rep.max_flow_defect:.3g})")

    pts = [np.asarray(p, dtype=float) for p in sample_points]
    mats = np.empty((len(pts), Phi.d, Phi.d))
    frame_resid = 0.0
    for i, p in enumerate(pts):
        mats[i], r = change_of_basis_A(Phi.fields, Psi.fields, p)
        frame_resid = max(frame_resid, r)

    inv = 0.0
    cert = 0.0
    for p, A in zip(pts, mats):
        for v in v_checks:
            v = np.asarray(v, dtype=float)
            moved = Phi.apply(v, p)
            A_moved, _ = change_of_basis_A(Phi.fields, Psi.fields, moved)
            inv = max(inv, float(np.linalg.norm(A_moved - A)))
            cert = max(cert, Phi.distance(Psi.apply(v, p),
                                          Phi.apply(A @ v, p)))
    return ActionReparamMatrix(points=np.array(pts), matrices=mats,
                               invariance_residual=inv,
                               certification_residual=cert,
                               frame_residual=frame_resid)


@dataclass
class CollapseDirection:
    direction: np.ndarray
    collinear: bool
    max_angle: float
    factors: np.ndarray | None      # sampled A_i(x), None when matching failed
    note: str = ""


@dataclass
class CollapseReport:
    reference: np.ndarray
    directions: list = field(default_factory=list)

    @property
    def all_collinear(self) -> bool:
        return all(d.collinear for d in self.directions)


def collapse_to_flow(action: ActionSpec, v, basis, sample_points,
                     mu=0.05, eps_cap=0.3, t_grid=(0.5, 1.0),
                     tol_match=1e-7, tol_angle=1e-6) -> CollapseReport:
    """Test whether the action's orbits degenerate to the orbits of one flow.

    The flow along v is the reference; each basis direction u_i is matched
    against it with the flow-reparameterization pipeline. A direction is
    collinear when its generator stays parallel to the reference generator
    on samples and the matching succeeds; any match failure reports that
    direction as non-collinear (transverse displacement).
    """
    v = np.asarray(v, dtype=float)
    phi = FlowMap(action.direction_field(v), action.tol_int)
    report = CollapseReport(reference=v)
    for u in basis:
        u = np.asarray(u, dtype=float)
        psi = FlowMap(action.direction_field(u), action.tol_int)
        max_angle = 0.0
        for x in sample_points:
            a = phi.field(x)
            b = psi.field(x)
            na, nb = np.linalg.norm(a), np.linalg.norm(b)
            if na == 0 or nb == 0:
                max_angle = math.pi / 2
                continue
            sin2 = 1.0 - min(1.0, (np.dot(a, b) / (na * nb)) ** 2)
            max_angle = max(max_angle, math.asin(math.sqrt(max(0.0, sin2))))
        try:
            factors = np.array([reparam.estimate_A(phi, psi, x, t_grid, mu,
                                                   eps_cap, tol_match)[0]
                                for x in sample_points])
            collinear = max_angle <= tol_angle
            note = "" if collinear else "generators not parallel"
        except MatchError as exc:
            factors = None
            collinear = False
            note = f"orbit matching failed: {exc}"
        report.directions.append(CollapseDirection(
            direction=u, collinear=collinear, max_angle=max_angle,
            factors=factors, note=note))
    return report
