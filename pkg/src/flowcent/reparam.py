"""Recover the time reparameterization between commuting flows.

Given a reference flow phi and a candidate commuting flow psi, the local
matcher finds for each small s the unique z with psi_s(x) = phi_z(x) on
the orbit of x; the dyadic recursion extends z to all time,

    z_k(t, x) = z_{k-1}(t - 1/2^N, x) + z(1/2^N, psi(t - 1/2^N, x)),

and the slope of the extended p(t, x) = A(x) t gives the orbit-invariant
factor A. Verdicts: ``trivial`` when A is a single constant across
samples, ``quasi-trivial`` when A is orbit invariant but varies, else
``inconclusive``.

All matching is 1-D minimization along numerically integrated orbit
segments (golden section + parabolic refinement on a dense interpolant).
A failed match means psi is not a reparameterization of phi at that
point, which is exactly how non-commuting candidates are flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import HypothesisError, MatchError
from .integrate import FlowMap

DEFAULT_TOL_MATCH = 1e-8
DEFAULT_TOL_A = 1e-4


def match_to_orbit(phi: FlowMap, x, target, eps_cap, tol_match=DEFAULT_TOL_MATCH,
                   coarse: int = 33, xatol: float = 1e-12) -> float:
    """z = argmin_{|tau| < eps_cap} dist(phi_tau(x), target).

    Bracketed scalar minimization along one dense orbit segment. Raises
    MatchError when the best match exceeds tol_match (the target is not on
    this orbit piece) or when the minimizer saturates the cap (window too
    large relative to the minimal-period bound).
    """
    if eps_cap <= 0:
        raise ValueError("eps_cap must be positive")
    x = np.asarray(x, dtype=float)
    target = np.asarray(target, dtype=float)
    seg = phi.segment(x, -eps_cap, eps_cap)
    taus = np.linspace(-eps_cap, eps_cap, coarse)
    dists = np.array([phi.distance(seg(t), target) for t in taus])
    i = int(np.argmin(dists))
    lo = taus[max(i - 1, 0)]
    hi = taus[min(i + 1, coarse - 1)]

    # Near a genuine match the displacement projected on the flow direction
    # crosses zero transversally; a root find there beats the sqrt(eps)
    # resolution floor of parabolic minimization.
    def proj(t):
        state = seg(t)
        return float(np.dot(phi.field.displacement(target, state),
                            phi.field(state)))

    z = None
    plo, phi_val = proj(lo), proj(hi)
    if plo == 0.0:
        z = lo
    elif phi_val == 0.0:
        z = hi
    elif plo * phi_val < 0.0:
        z = float(brentq(proj, lo, hi, xtol=xatol, rtol=4 * np.finfo(float).eps))
    if z is None:
        res = minimize_scalar(lambda t: phi.distance(seg(t), target),
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": xatol})
        z = float(res.x)
    best = phi.distance(seg(z), target)
    if best > tol_match:
        raise MatchError(
            f"not a reparameterization at this point: best orbit distance "
            f"{best:.3g} > tol_match {tol_match:.3g}")
    if abs(z) >= eps_cap * (1.0 - 1e-9):
        raise MatchError(
            f"matched time |z| = {abs(z):.3g} saturates the cap {eps_cap:.3g}; "
            "shrink the window or raise the period bound")
    return z


def local_reparam(phi: FlowMap, psi: FlowMap, x, s, eps_cap,
                  tol_match=DEFAULT_TOL_MATCH, tol_reg=1e-10, **kw) -> float:
    """The unique z(s, x) with psi_s(x) = phi_{z}(x), |z| < eps_cap."""
    x = np.asarray(x, dtype=float)
    if not phi.regular(x, tol_reg):
        raise MatchError("local reparameterization requires a regular point")
    return match_to_orbit(phi, x, psi.at(x, s), eps_cap, tol_match, **kw)


class LocalReparam:
    """Window reparameterization with cached samples and enforced caps.

    Stores z(s, x) for |s| <= mu; every accepted sample satisfies
    |z| < eps_cap and the orbit-match residual <= tol_match (enforced by
    the matcher, which raises otherwise).
    """

    def __init__(self, phi: FlowMap, psi: FlowMap, mu: float, eps_cap: float,
                 tol_match: float = DEFAULT_TOL_MATCH):
        if not 0 < mu:
            raise ValueError("mu must be positive")
        self.phi = phi
        self.psi = psi
        self.mu = float(mu)
        self.eps_cap = float(eps_cap)
        self.tol_match = float(tol_match)
        self.samples: dict = {}

    def z(self, x, s, **kw) -> float:
        if abs(s) > self.mu * (1 + 1e-12):
            raise ValueError(f"|s| = {abs(s):.3g} outside the window [{-self.mu}, {self.mu}]")
        key = (float(s), tuple(np.asarray(x, float)))
        if key not in self.samples:
            self.samples[key] = local_reparam(self.phi, self.psi, x, s,
                                              self.eps_cap, self.tol_match, **kw)
        return self.samples[key]


def choose_mu(psi: FlowMap, sample_points, radius, mu0=0.5, mu_min=1e-5) -> float:
    """Halve mu from mu0 until sup_{|s|<=mu} d(x, psi_s(x)) < radius on samples."""
    mu = float(mu0)
    while mu >= mu_min:
        disp = max(psi.distance(x, psi.at(x, s))
                   for x in sample_points
                   for s in (mu, -mu, mu / 2, -mu / 2))
        if disp < radius:
            return mu
        mu /= 2.0
    raise MatchError(f"could not find a window: displacement exceeds {radius} "
                     f"even at mu = {mu_min}")


def extend_reparam(phi: FlowMap, psi: FlowMap, x, t, mu, eps_cap,
                   tol_match=DEFAULT_TOL_MATCH, N=None, verify=True) -> float:
    """p(t, x) with psi_t(x) = phi_{p(t,x)}(x), by the dyadic recursion.

    Chain of local matches with step h = 2^-N < mu along the psi-orbit
    (one dense psi solve; one short phi segment per step), extended
    symmetrically for t < 0. When ``verify`` is set the result is checked
    against a direct integration: ||psi_t(x) - phi_p(x)|| <= tol_match * (1 + |t|).
    """
    x = np.asarray(x, dtype=float)
    if N is None:
        N = max(0, int(math.floor(math.log2(1.0 / mu))) + 1)
    h = 2.0 ** (-N)
    if not h < mu:
        raise ValueError(f"dyadic step 2^-{N} does not fit inside mu = {mu}")
    if t == 0.0:
        return 0.0

    sgn = 1.0 if t > 0 else -1.0
    h_s = sgn * h
    K = int(math.floor(abs(t) / h + 1e-12))
    rem = t - K * h_s

    seg = psi.segment(x, min(t, 0.0), max(t, 0.0))
    p = 0.0
    prev = x
    prev_t = 0.0
    if rem != 0.0:
        nxt = seg(rem)
        p += match_to_orbit(phi, prev, nxt, eps_cap, tol_match)
        prev, prev_t = nxt, rem
    for _ in range(K):
        nxt_t = prev_t + h_s
        nxt = seg(nxt_t)
        p += match_to_orbit(phi, prev, nxt, eps_cap, tol_match)
        prev, prev_t = nxt, nxt_t

    if verify:
        end = phi.at(x, p) if p != 0.0 else x
        err = phi.distance(end, seg(t))
        if err > tol_match * (1.0 + abs(t)):
            raise MatchError(
                f"extension drifted off the orbit: residual {err:.3g} at t = {t}")
    return p


def estimate_A(phi: FlowMap, psi: FlowMap, x, t_grid, mu, eps_cap,
               tol_match=DEFAULT_TOL_MATCH, N=None):
    """Least-squares slope of p(t, x) against t through the origin.

    Returns (A, linearity_residual) with residual = max |p(t) - A t|.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or np.any(t_grid == 0.0):
        raise ValueError("t_grid must be nonempty and avoid 0")
    ps = np.array([extend_reparam(phi, psi, x, t, mu, eps_cap, tol_match, N=N)
                   for t in t_grid])
    A = float(np.dot(t_grid, ps) / np.dot(t_grid, t_grid))
    resid = float(np.max(np.abs(ps - A * t_grid)))
    return A, resid


def verify_orbit_invariance(phi: FlowMap, psi: FlowMap, sample_points, t_checks,
                            t_grid, mu, eps_cap, tol_match=DEFAULT_TOL_MATCH) -> float:
    """max |A(phi_t(x)) - A(x)| over samples x and check times t."""
    worst = 0.0
    for x in sample_points:
        A0, _ = estimate_A(phi, psi, x, t_grid, mu, eps_cap, tol_match)
        for t in t_checks:
            moved = phi.at(x, t)
            A1, _ = estimate_A(phi, psi, moved, t_grid, mu, eps_cap, tol_match)
            worst = max(worst, abs(A1 - A0))
    return worst


def lie_bracket(X, Y, x) -> np.ndarray:
    """[X, Y](x) = DY(x) X(x) - DX(x) Y(x) using analytic Jacobians."""
    x = np.asarray(x, dtype=float)
    return Y.jacobian(x) @ X(x) - X.jacobian(x) @ Y(x)


def flow_commutation_defect(phi: FlowMap, psi: FlowMap, sample_points,
                            st_pairs=((0.5, 0.5), (1.0, -0.7))) -> float:
    """max ||psi_s(phi_t(x)) - phi_t(psi_s(x))|| over samples and (s, t)."""
    worst = 0.0
    for x in sample_points:
        for s, t in st_pairs:
            a = psi.at(phi.at(x, t), s)
            b = phi.at(psi.at(x, s), t)
            worst = max(worst, phi.distance(a, b))
    return worst


@dataclass
class CommutingCheck:
    max_bracket: float
    max_flow_defect: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_bracket <= self.tol and self.max_flow_defect <= self.tol


def commuting_check(phi: FlowMap, psi: FlowMap, sample_points,
                    tol: float = 1e-6) -> CommutingCheck:
    """Accept psi as commuting only when the Lie bracket and the direct
    flow-commutation defect both vanish on samples."""
    br = max(np.linalg.norm(lie_bracket(phi.field, psi.field, x))
             for x in sample_points)
    fd = flow_commutation_defect(phi, psi, sample_points)
    return CommutingCheck(max_bracket=float(br), max_flow_defect=fd, tol=tol)


@dataclass
class ExtensionCheck:
    A_at_sigma: float
    spread: float
    family_means: dict  # "stable"/"unstable" -> mean of sampled A
    samples: list       # (scale, direction index, family, A)


def singularity_extension_check(phi: FlowMap, psi: FlowMap, report,
                                mu, eps_cap, scales=None, t_mag=1.0,
                                tol_match=DEFAULT_TOL_MATCH) -> ExtensionCheck:
    """Sample A on orbits approaching a singularity along its eigenspaces.

    Requires the report's hyperbolicity and (separate) non-resonance
    verdicts; outside those hypotheses a continuous extension of A is not
    guaranteed and the check refuses to run. Stable-family points use
    forward probe times, unstable-family points backward ones, so the
    orbit segments stay near the singularity.
    """
    if not report.hyperbolic:
        raise HypothesisError("extension check requires a hyperbolic singularity")
    for name, verdict in (("stable", report.nonresonant_stable),
                          ("unstable", report.nonresonant_unstable)):
        if verdict is False:
            raise HypothesisError(
                f"extension check requires a non-resonant {name} bundle")
    if scales is None:
        scales = [10.0 ** (-k) for k in range(1, 7)]
    if min(scales) < 1e-6:
        raise ValueError("approach scale floor is 1e-6")

    sigma = report.location
    t_grid_fwd = np.array([0.25, 0.5, 1.0]) * t_mag
    samples = []
    for family, basis, t_grid in (("stable", report.stable_basis, t_grid_fwd),
                                  ("unstable", report.unstable_basis, -t_grid_fwd)):
        for j in range(basis.shape[1]):
            u = basis[:, j]
            for s in scales:
                for sign in (1.0, -1.0):
                    pt = sigma + sign * s * u
                    A, _ = estimate_A(phi, psi, pt, t_grid, mu, eps_cap, tol_match)
                    samples.append((s, j, family, A))
    values = np.array([a for *_, a in samples])
    mean = float(values.mean())
    spread = float(np.max(np.abs(values - mean)))
    fam_means = {}
    for family in ("stable", "unstable"):
        vals = [a for *_mid, fam, a in samples if fam == family]
        if vals:
            fam_means[family] = float(np.mean(vals))
    return ExtensionCheck(A_at_sigma=mean, spread=spread,
                          family_means=fam_means, samples=samples)


@dataclass
class ReparamField:
    """Sampled reparameterization factor with residuals and verdict."""

    points: np.ndarray              # (m, n)
    A: np.ndarray                   # (m,)
    orbit_invariance_residual: float
    linearity_residual: float
    verdict: str                    # "trivial" | "quasi-trivial" | "inconclusive"
    c: float | None = None          # constant when trivial
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "points": self.points.tolist(),
            "A": self.A.tolist(),
            "orbit_invariance_residual": self.orbit_invariance_residual,
            "linearity_residual": self.linearity_residual,
            "verdict": self.verdict,
            "c": self.c,
            "notes": list(self.notes),
        }


def triviality_verdict(A_values, invariance_residual, tol_A=DEFAULT_TOL_A,
                       tol_inv=1e-3, connectivity_hint=None):
    """Classify the sampled factor: one constant, orbit-invariant but
    varying, or nothing certified.

    Returns (verdict, c): c is the common constant for a trivial verdict.
    The connectivity hint (e.g. dense stable sets) is advisory; the verdict
    always reports what was measured.
    """
    A_values = np.asarray(A_values, dtype=float)
    if not np.all(np.isfinite(A_values)) or not np.isfinite(invariance_residual):
        return "inconclusive", None
    if invariance_residual > tol_inv:
        return "inconclusive", None
    c = float(np.mean(A_values))
    if np.max(np.abs(A_values - c)) <= tol_A:
        return "trivial", c
    return "quasi-trivial", None


def build_reparam_field(phi: FlowMap, psi: FlowMap, sample_points, t_grid,
                        mu, eps_cap, tol_match=DEFAULT_TOL_MATCH,
                        tol_A=DEFAULT_TOL_A, tol_inv=1e-3,
                        invariance_points=None, invariance_t_checks=(0.7, 1.7),
                        connectivity_hint=None) -> ReparamField:
    """Run the full pipeline over a sample set and issue the verdict."""
    pts = [np.asarray(p, dtype=float) for p in sample_points]
    A = np.empty(len(pts))
    lin = 0.0
    for i, p in enumerate(pts):
        A[i], r = estimate_A(phi, psi, p, t_grid, mu, eps_cap, tol_match)
        lin = max(lin, r)
    if invariance_points is None:
        invariance_points = pts[:: max(1, len(pts) // 4)][:4]
    inv = verify_orbit_invariance(phi, psi, invariance_points,
                                  invariance_t_checks, t_grid, mu, eps_cap,
                                  tol_match)
    verdict, c = triviality_verdict(A, inv, tol_A, tol_inv, connectivity_hint)
    notes = []
    if connectivity_hint and connectivity_hint.get("stable_manifold_dense") \
            and verdict == "quasi-trivial":
        notes.append("stable sets reported dense: a varying factor is "
                     "unexpected; inspect residuals")
    return ReparamField(points=np.array(pts), A=A,
                        orbit_invariance_residual=inv, linearity_residual=lin,
                        verdict=verdict, c=c, notes=notes)
