"""Locate and classify singularities of a vector field.

A singularity report collects the local spectrum together with the
verdicts that drive the commutant analysis downstream: hyperbolicity and
stable index, separate non-resonance of the stable and unstable
eigenvalue bundles, and the regularity order m = floor(minRe / maxRe) + 1
of a sink spectrum (the smallest m with m * maxRe < minRe).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EnumerationCapError
from .linalg import Spectrum, eigs

DEFAULT_TOL_HYP = 1e-8
DEFAULT_TOL_RES = 1e-9
ENUMERATION_CAP = 10**7


@dataclass(frozen=True)
class ResonanceWitness:
    """A violated spectral condition inside one stability bundle.

    kind == "relation":    Re(lam[i]) = sum_j coeffs[j] * Re(lam[j])
    kind == "coincidence": lam[i] and lam[j] coincide within tolerance
    """

    kind: str
    i: int
    j: int | None = None
    coeffs: dict | None = None

    def to_dict(self):
        d = {"kind": self.kind, "i": self.i}
        if self.j is not None:
            d["j"] = self.j
        if self.coeffs is not None:
            d["coeffs"] = {str(k): v for k, v in sorted(self.coeffs.items())}
        return d


def classify_hyperbolic(spectrum, tol_hyp: float = DEFAULT_TOL_HYP):
    """(hyperbolic, index): no eigenvalue within tol_hyp of the imaginary axis;
    index counts Re < 0 with multiplicity (None when not hyperbolic)."""
    if tol_hyp <= 0:
        raise ValueError("tol_hyp must be positive")
    re = np.array([z.real for z in spectrum])
    hyperbolic = bool(np.all(np.abs(re) > tol_hyp))
    index = int(np.sum(re < 0)) if hyperbolic else None
    return hyperbolic, index


def check_nonresonant(bundle, tol_res: float = DEFAULT_TOL_RES,
                      cap: int = ENUMERATION_CAP):
    """Non-resonance verdict for one stability bundle (all Re of equal sign).

    The bundle is resonant when (a) two of its eigenvalues coincide within
    tol_res * max|Re|, or (b) some nonnegative-integer relation
    Re(lam_i) = sum_{j != i} n_j Re(lam_j) with sum n_j >= 2 holds within
    the same tolerance. The integer enumeration is exhaustive and finite
    (n_j <= ceil(max|Re| / min|Re|) + 1); exceeding ``cap`` visited
    assignments raises instead of truncating silently.

    Returns (verdict, witness); witness is None when non-resonant.
    """
    lams = [complex(z) for z in bundle]
    if not lams:
        raise ValueError("bundle must be nonempty")
    re = np.array([z.real for z in lams])
    if np.any(re > 0) and np.any(re < 0):
        raise ValueError("mixed-sign real parts: split into stable/unstable bundles")
    if np.any(re == 0):
        raise ValueError("bundle contains an eigenvalue with zero real part")

    scale = float(np.max(np.abs(re)))
    tol_abs = tol_res * scale

    # (a) distinctness
    k = len(lams)
    for i in range(k):
        for j in range(i + 1, k):
            if abs(lams[i] - lams[j]) <= tol_abs:
                return False, ResonanceWitness(kind="coincidence", i=i, j=j)

    if k == 1:
        return True, None

    # (b) integer relations on real parts (work with magnitudes: same sign)
    u = np.abs(re)
    bound = int(np.ceil(np.max(u) / np.min(u))) + 1
    counter = [0]

    def search(target, others, idx, coeffs, partial):
        counter[0] += 1
        if counter[0] > cap:
            raise EnumerationCapError(
                f"resonance enumeration exceeded {cap} assignments"
            )
        if idx == len(others):
            if sum(coeffs.values()) >= 2 and abs(partial - target) <= tol_abs:
                return dict(coeffs)
            return None
        j, val = others[idx]
        for nj in range(bound + 1):
            s = partial + nj * val
            if s > target + tol_abs:
                break  # magnitudes only grow with further coefficients
            if nj:
                coeffs[j] = nj
            hit = search(target, others, idx + 1, coeffs, s)
            if hit is not None:
                return hit
            coeffs.pop(j, None)
        return None

    for i in range(k):
        others = [(j, u[j]) for j in range(k) if j != i]
        hit = search(u[i], others, 0, {}, 0.0)
        if hit is not None:
            return False, ResonanceWitness(kind="relation", i=i, coeffs=hit)
    return True, None


def kopell_order(sink_spectrum) -> int:
    """Least positive integer m with m * (max Re) < (min Re) for a sink spectrum.

    Equals floor(minRe / maxRe) + 1. Ratios within 1e-12 of an integer are
    snapped before flooring so exact spectra like {-1, -3} are not thrown
    off by roundoff.
    """
    re = np.array([complex(z).real for z in sink_spectrum])
    if re.size == 0:
        raise ValueError("empty spectrum")
    if np.any(re >= 0):
        raise ValueError("kopell_order requires a sink spectrum (all Re < 0)")
    hi = float(np.max(re))  # closest to the axis
    lo = float(np.min(re))
    ratio = lo / hi
    snapped = round(ratio)
    if abs(ratio - snapped) < 1e-12 * max(1.0, abs(ratio)):
        ratio = float(snapped)
    m = int(np.floor(ratio)) + 1
    return m


@dataclass
class NewtonSearchResult:
    points: list
    dropped: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


def find_singularities(vf, seeds, tol: float = 1e-10, merge_tol: float = 1e-6,
                       max_iter: int = 60, escape: float = 1e6) -> NewtonSearchResult:
    """Newton search for zeros of the field from each seed.

    Returned points satisfy ||X(p)|| <= tol; points within merge_tol of an
    already-found zero are merged. Seeds whose iteration diverges or meets a
    singular Jacobian are dropped and reported in ``dropped`` (not fatal).
    """
    result = NewtonSearchResult(points=[])
    for seed in seeds:
        x = np.asarray(seed, dtype=float).copy()
        ok = False
        reason = f"no convergence in {max_iter} iterations"
        for _ in range(max_iter):
            fx = vf(x)
            if np.linalg.norm(fx) <= tol:
                ok = True
                break
            J = vf.jacobian(x)
            try:
                step = np.linalg.solve(J, fx)
            except np.linalg.LinAlgError:
                reason = "singular Jacobian"
                break
            x = x - step
            if not np.all(np.isfinite(x)) or np.linalg.norm(x) > escape:
                reason = "iteration diverged"
                break
        if not ok:
            result.dropped.append((np.asarray(seed, dtype=float), reason))
            continue
        if getattr(vf, "wrap", None) is not None:
            x = vf.wrap_point(x)
        if all(np.linalg.norm(x - p) > merge_tol for p in result.points):
            result.points.append(x)
    result.points.sort(key=lambda p: tuple(p))
    return result


def grid_seeds(box, per_axis: int) -> list:
    """Uniform seed grid over a box given as [(lo, hi), ...]."""
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return [np.array(pt) for pt in zip(*(m.ravel() for m in mesh))]


def _invariant_bases(J: np.ndarray, tol_hyp: float):
    """Real orthonormal bases of the stable/unstable spectral subspaces."""
    vals, vecs = np.linalg.eig(J)
    stable_cols, unstable_cols = [], []
    seen_conj = set()
    for idx, lam in enumerate(vals):
        target = stable_cols if lam.real < -tol_hyp else (
            unstable_cols if lam.real > tol_hyp else None)
        if target is None:
            continue
        v = vecs[:, idx]
        if lam.imag == 0.0:
            target.append(np.real(v))
        elif idx not in seen_conj:
            # take the real/imaginary parts once per conjugate pair
            conj = [j for j in range(len(vals))
                    if j != idx and np.isclose(vals[j], lam.conjugate())]
            if conj:
                seen_conj.add(conj[0])
            target.extend([np.real(v), np.imag(v)])

    def orth(cols):
        if not cols:
            return np.zeros((J.shape[0], 0))
        Q, _ = np.linalg.qr(np.column_stack(cols))
        return Q

    return orth(stable_cols), orth(unstable_cols)


@dataclass
class SingularityReport:
    location: np.ndarray
    jacobian: np.ndarray
    spectrum: Spectrum
    hyperbolic: bool
    index: int | None
    stable_basis: np.ndarray
    unstable_basis: np.ndarray
    nonresonant_stable: bool | None
    nonresonant_unstable: bool | None
    kopell_m: int | None
    kopell_m_stable: int | None
    kopell_m_unstable: int | None
    witnesses: list

    def to_dict(self):
        return {
            "location": [float(v) for v in self.location],
            "jacobian": [[float(v) for v in row] for row in self.jacobian],
            "eigenvalues": [[z.real, z.imag] for z in self.spectrum],
            "hyperbolic": self.hyperbolic,
            "index": self.index,
            "stable_basis": [[float(v) for v in col] for col in self.stable_basis.T],
            "unstable_basis": [[float(v) for v in col] for col in self.unstable_basis.T],
            "nonresonant_stable": self.nonresonant_stable,
            "nonresonant_unstable": self.nonresonant_unstable,
            "kopell_m": self.kopell_m,
            "kopell_m_stable": self.kopell_m_stable,
            "kopell_m_unstable": self.kopell_m_unstable,
            "witnesses": [w.to_dict() for w in self.witnesses],
        }


def full_report(vf, p, tol_hyp: float = DEFAULT_TOL_HYP,
                tol_res: float = DEFAULT_TOL_RES) -> SingularityReport:
    """Complete spectral report at an (approximate) zero of the field.

    Resonance is checked separately per stability bundle. kopell_m on the
    full spectrum is present only for a sink (or a source, via the
    time-reversed field); saddles get per-bundle orders instead.
    """
    p = np.asarray(p, dtype=float)
    fp = vf(p)
    if np.linalg.norm(fp) > 1e-8:
        raise ValueError(f"not a singularity: ||X(p)|| = {np.linalg.norm(fp):.3g}")
    J = vf.jacobian(p)
    spec = eigs(J)
    hyperbolic, index = classify_hyperbolic(spec, tol_hyp)
    stable = [z for z in spec if z.real < -tol_hyp]
    unstable = [z for z in spec if z.real > tol_hyp]
    witnesses = []

    def bundle_verdict(bundle):
        if not bundle:
            return None
        ok, witness = check_nonresonant(bundle, tol_res)
        if witness is not None:
            witnesses.append(witness)
        return ok

    nr_stable = bundle_verdict(stable)
    nr_unstable = bundle_verdict(unstable)

    km_stable = kopell_order(stable) if stable else None
    km_unstable = kopell_order([-z for z in unstable]) if unstable else None
    if hyperbolic and index == spec.n:
        kopell_m = km_stable
    elif hyperbolic and index == 0:
        kopell_m = km_unstable
    else:
        kopell_m = None

    sb, ub = _invariant_bases(J, tol_hyp)
    return SingularityReport(
        location=p,
        jacobian=J,
        spectrum=spec,
        hyperbolic=hyperbolic,
        index=index,
        stable_basis=sb,
        unstable_basis=ub,
        nonresonant_stable=nr_stable,
        nonresonant_unstable=nr_unstable,
        kopell_m=kopell_m,
        kopell_m_stable=km_stable,
        kopell_m_unstable=km_unstable,
        witnesses=witnesses,
    )
