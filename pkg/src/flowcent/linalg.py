"""Dense real linear-algebra kernels for low-dimensional flow analysis.

Everything here works on small (n <= 16) dense real matrices: spectra,
matrix exponentials, tolerant nullspaces, commutant bases and scalar
proportionality tests. Operations are pure functions over immutable
inputs; all tolerance defaults are relative to the largest singular
value so the decisions are scale invariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceError

MAX_DIM = 16
DEFAULT_RANK_TOL = 1e-9


def as_matrix(M) -> np.ndarray:
    """Validate and return a square real matrix with finite entries, n <= 16."""
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if not 1 <= n <= MAX_DIM:
        raise ValueError(f"dimension {n} outside supported range [1, {MAX_DIM}]")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    return A


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a real matrix, with multiplicity.

    Sorted by (Re, Im) ascending; complex values occur in conjugate pairs
    (enforced by averaging each pair after the eigensolver so the pairing
    is exact).
    """

    eigenvalues: tuple

    @classmethod
    def from_values(cls, values) -> "Spectrum":
        vals = _symmetrize_conjugates(np.asarray(values, dtype=complex))
        vals = sorted(vals, key=lambda z: (z.real, z.imag))
        return cls(tuple(vals))

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def real_parts(self) -> np.ndarray:
        return np.array([z.real for z in self.eigenvalues])

    def __iter__(self):
        return iter(self.eigenvalues)

    def __len__(self):
        return len(self.eigenvalues)

    def __getitem__(self, i):
        return self.eigenvalues[i]


def _symmetrize_conjugates(vals: np.ndarray) -> list:
    """Average complex-conjugate pairs so the pairing holds exactly."""
    real = [complex(z.real, 0.0) for z in vals if z.imag == 0.0]
    upper = sorted((z for z in vals if z.imag > 0.0), key=lambda z: (z.real, z.imag))
    lower = sorted((z for z in vals if z.imag < 0.0), key=lambda z: (z.real, -z.imag))
    if len(upper) != len(lower):
        # roundoff split a pair across the axis; keep raw values rather than guess
        return list(vals)
    out = list(real)
    for zu, zl in zip(upper, lower):
        re = 0.5 * (zu.real + zl.real)
        im = 0.5 * (zu.imag - zl.imag)
        out.extend([complex(re, im), complex(re, -im)])
    return out


def eigs(M) -> Spectrum:
    """All eigenvalues of M with algebraic multiplicity.

    Backward stable (LAPACK); raises ConvergenceError instead of returning
    garbage when the QR iteration fails.
    """
    A = as_matrix(M)
    try:
        vals = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver did not converge: {exc}") from exc
    return Spectrum.from_values(vals)


def mat_exp(M, t: float = 1.0) -> np.ndarray:
    """e^{tM} by scaling-and-squaring with a Pade approximant."""
    A = as_matrix(M)
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    E = scipy.linalg.expm(t * A)
    if not np.all(np.isfinite(E)):
        raise ConvergenceError(
            f"matrix exponential overflowed for |t|*||M|| ~ {abs(t) * np.linalg.norm(A):.3g}"
        )
    return E


def nullspace(M, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the right nullspace of a rectangular matrix.

    A right singular vector belongs to the basis when its singular value is
    <= tol * sigma_max. Returns an (n, 0) array for full-rank input.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = np.asarray(M, dtype=float)
    if A.ndim != 2:
        raise ValueError("expected a 2-d array")
    try:
        _, s, Vt = np.linalg.svd(A)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"SVD did not converge: {exc}") from exc
    smax = s[0] if s.size else 0.0
    ncols = A.shape[1]
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    return Vt[rank:].T.copy() if rank < ncols else np.zeros((ncols, 0))


@dataclass(frozen=True)
class CommutantBasis:
    """Orthonormal basis (Frobenius inner product) of {C : BC = CB}."""

    generator: np.ndarray
    basis: tuple
    tol: float

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def __post_init__(self):
        B = self.generator
        scale = self.tol * (1.0 + np.linalg.norm(B))
        for C in self.basis:
            resid = np.linalg.norm(B @ C - C @ B)
            if resid > scale * np.linalg.norm(C):
                raise ConvergenceError(
                    f"commutant basis element violates BC=CB: residual {resid:.3g}"
                )


def commutant_basis(B, tol: float = DEFAULT_RANK_TOL) -> CommutantBasis:
    """Basis of the commutant of B via the vectorized n^2 x n^2 Sylvester operator.

    The operator C -> BC - CB acts on column-stacked matrices as
    kron(I, B) - kron(B^T, I); its nullspace is the commutant. The result
    always has dimension >= 1 (B commutes with itself and with the identity).
    """
    A = as_matrix(B)
    n = A.shape[0]
    K = np.kron(np.eye(n), A) - np.kron(A.T, np.eye(n))
    ns = nullspace(K, tol)
    mats = tuple(ns[:, j].reshape((n, n), order="F") for j in range(ns.shape[1]))
    return CommutantBasis(generator=A, basis=mats, tol=tol)


def is_proportional(C, B, tol: float = 1e-8):
    """Test C ~ cB in the least-squares sense.

    Returns (True, c) when ||C - cB||_F <= tol * ||C||_F with
    c = <C,B>_F / ||B||_F^2, else (False, None). A zero B is proportional
    only to a zero C (with c = 0).
    """
    Cm = as_matrix(C)
    Bm = as_matrix(B)
    if Cm.shape != Bm.shape:
        raise ValueError(f"dimension mismatch: {Cm.shape} vs {Bm.shape}")
    nB = np.linalg.norm(Bm)
    nC = np.linalg.norm(Cm)
    if nB == 0.0:
        return (nC == 0.0, 0.0 if nC == 0.0 else None)
    c = float(np.sum(Cm * Bm) / nB**2)
    resid = np.linalg.norm(Cm - c * Bm)
    if resid <= tol * nC:
        return True, c
    return False, None
