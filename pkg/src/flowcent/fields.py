"""Catalog of vector fields with analytic Jacobians.

Each field knows its dimension, which coordinates live on a torus
(``wrap`` mask) and how to measure distances there (wrap-around metric).
Fields are immutable and callable: ``field(x)`` evaluates the vector,
``field.jacobian(x)`` its analytic derivative. ``field_from_config``
parses the JSON form used by the experiment configs.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .linalg import as_matrix

TWO_PI = 2.0 * np.pi


class VectorField:
    """Base class; subclasses set ``dim`` and ``wrap`` and implement the
    evaluation and Jacobian."""

    dim: int
    wrap = None  # boolean mask of torus coordinates, or None for R^n

    def __call__(self, x):
        raise NotImplementedError

    def jacobian(self, x):
        raise NotImplementedError

    def wrap_point(self, x):
        x = np.asarray(x, dtype=float)
        if self.wrap is None:
            return x
        out = x.copy()
        out[self.wrap] = np.mod(out[self.wrap], 1.0)
        return out

    def displacement(self, x, y):
        """Shortest displacement y - x, wrap-aware on torus coordinates."""
        d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        if self.wrap is not None:
            d[self.wrap] = np.mod(d[self.wrap] + 0.5, 1.0) - 0.5
        return d

    def distance(self, x, y) -> float:
        return float(np.linalg.norm(self.displacement(x, y)))

    def pairwise_distance(self, A, B) -> np.ndarray:
        """Distance matrix between the rows of A (m, n) and B (k, n)."""
        D = np.asarray(B, float)[None, :, :] - np.asarray(A, float)[:, None, :]
        if self.wrap is not None:
            D[..., self.wrap] = np.mod(D[..., self.wrap] + 0.5, 1.0) - 0.5
        return np.linalg.norm(D, axis=-1)

    def to_config(self) -> dict:
        raise NotImplementedError


class LorenzField(VectorField):
    """The classical polynomial system on R^3 with parameters (a, b, r):
    x' = a(y - x), y' = -xz + rx - y, z' = xy - bz."""

    dim = 3

    def __init__(self, a=10.0, b=8.0 / 3.0, r=28.0):
        self.a, self.b, self.r = float(a), float(b), float(r)

    def __call__(self, x):
        x1, x2, x3 = x
        return np.array([
            self.a * (x2 - x1),
            -x1 * x3 + self.r * x1 - x2,
            x1 * x2 - self.b * x3,
        ])

    def jacobian(self, x):
        x1, x2, x3 = x
        return np.array([
            [-self.a, self.a, 0.0],
            [self.r - x3, -1.0, -x1],
            [x2, x1, -self.b],
        ])

    def equilibria(self):
        """The analytic zeros: origin and the symmetric pair when r > 1."""
        pts = [np.zeros(3)]
        if self.r > 1:
            s = np.sqrt(self.b * (self.r - 1.0))
            pts += [np.array([s, s, self.r - 1.0]), np.array([-s, -s, self.r - 1.0])]
        return pts

    def to_config(self):
        return {"kind": "lorenz", "a": self.a, "b": self.b, "r": self.r}


class LinearField(VectorField):
    """x' = Bx on R^n."""

    def __init__(self, B):
        self.B = as_matrix(B)
        self.dim = self.B.shape[0]

    def __call__(self, x):
        return self.B @ np.asarray(x, dtype=float)

    def jacobian(self, x):
        return self.B.copy()

    def to_config(self):
        return {"kind": "linear", "matrix": self.B.tolist()}


class TorusTranslation(VectorField):
    """Constant field alpha on the d-torus."""

    def __init__(self, alpha):
        self.alpha = np.asarray(alpha, dtype=float)
        self.dim = self.alpha.size
        self.wrap = np.ones(self.dim, dtype=bool)

    def __call__(self, x):
        return self.alpha.copy()

    def jacobian(self, x):
        return np.zeros((self.dim, self.dim))

    def to_config(self):
        return {"kind": "torus_translation", "alpha": self.alpha.tolist()}


class DampedTorus(VectorField):
    """Translation field on T^2 damped by a bump factor vanishing at one point.

    The factor f(x) = 1 - exp(-k * dist(x, p)^2) uses the wrap metric; it is
    exactly zero at p and positive elsewhere, so p is the unique equilibrium.
    """

    def __init__(self, alpha, center, sharpness=50.0):
        self.alpha = np.asarray(alpha, dtype=float)
        self.center = np.asarray(center, dtype=float)
        self.sharpness = float(sharpness)
        self.dim = self.alpha.size
        if self.center.size != self.dim:
            raise ValueError("center dimension mismatch")
        self.wrap = np.ones(self.dim, dtype=bool)

    def _delta(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return np.mod(d + 0.5, 1.0) - 0.5

    def factor(self, x) -> float:
        d = self._delta(x)
        return float(1.0 - np.exp(-self.sharpness * np.dot(d, d)))

    def factor_gradient(self, x) -> np.ndarray:
        d = self._delta(x)
        return 2.0 * self.sharpness * np.exp(-self.sharpness * np.dot(d, d)) * d

    def __call__(self, x):
        return self.factor(x) * self.alpha

    def jacobian(self, x):
        return np.outer(self.alpha, self.factor_gradient(x))

    def to_config(self):
        return {"kind": "damped_torus", "alpha": self.alpha.tolist(),
                "center": self.center.tolist(), "sharpness": self.sharpness}


class ScalarField:
    """Scalar factor h with analytic gradient, for reparameterized fields."""

    def __call__(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError


class SineWaveScalar(ScalarField):
    """h(x) = offset + amplitude * sin(2 pi <w, x>).

    With <w, alpha> = 0 the factor is constant along orbits of the
    translation field alpha, which is how the orbit-invariant test pairs
    are built.
    """

    def __init__(self, offset, amplitude, wavevector):
        self.offset = float(offset)
        self.amplitude = float(amplitude)
        self.wavevector = np.asarray(wavevector, dtype=float)

    def __call__(self, x):
        return self.offset + self.amplitude * np.sin(TWO_PI * np.dot(self.wavevector, x))

    def gradient(self, x):
        return (self.amplitude * TWO_PI *
                np.cos(TWO_PI * np.dot(self.wavevector, x)) * self.wavevector)

    def to_config(self):
        return {"kind": "sine_wave", "offset": self.offset,
                "amplitude": self.amplitude,
                "wavevector": self.wavevector.tolist()}


class ConstantScalar(ScalarField):
    def __init__(self, c):
        self.c = float(c)

    def __call__(self, x):
        return self.c

    def gradient(self, x):
        return np.zeros(np.asarray(x).size)

    def to_config(self):
        return {"kind": "constant", "c": self.c}


class ScaledField(VectorField):
    """Y = h * X for a scalar factor h and base field X."""

    def __init__(self, factor: ScalarField, base: VectorField):
        self.factor = factor
        self.base = base
        self.dim = base.dim
        self.wrap = base.wrap

    def __call__(self, x):
        return self.factor(x) * self.base(x)

    def jacobian(self, x):
        h = self.factor(x)
        return h * self.base.jacobian(x) + np.outer(self.base(x), self.factor.gradient(x))

    def to_config(self):
        return {"kind": "scaled", "factor": self.factor.to_config(),
                "base": self.base.to_config()}


class PolynomialField(VectorField):
    """Custom polynomial field: X(x) = sum_terms coeffs * prod_i x_i^e_i."""

    def __init__(self, dim, terms, wrap=None):
        self.dim = int(dim)
        self.terms = []
        for exps, coeffs in terms:
            e = np.asarray(exps, dtype=int)
            c = np.asarray(coeffs, dtype=float)
            if e.size != self.dim or c.size != self.dim or np.any(e < 0):
                raise ValueError("bad polynomial term")
            self.terms.append((e, c))
        self.wrap = None if wrap is None else np.asarray(wrap, dtype=bool)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(self.dim)
        for e, c in self.terms:
            out += c * np.prod(x**e)
        return out

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        J = np.zeros((self.dim, self.dim))
        for e, c in self.terms:
            for j in range(self.dim):
                if e[j] == 0:
                    continue
                ed = e.copy()
                ed[j] -= 1
                J[:, j] += c * e[j] * np.prod(x**ed)
        return J

    def to_config(self):
        return {"kind": "polynomial", "dim": self.dim,
                "terms": [{"exponents": e.tolist(), "coeffs": c.tolist()}
                          for e, c in self.terms]}


class CombinationField(VectorField):
    """Constant linear combination sum_i c_i X_i of same-domain fields."""

    def __init__(self, fields, coeffs):
        if not fields:
            raise ValueError("need at least one field")
        self.fields = list(fields)
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.size != len(self.fields):
            raise ValueError("coefficient count mismatch")
        self.dim = self.fields[0].dim
        self.wrap = self.fields[0].wrap
        for f in self.fields:
            if f.dim != self.dim:
                raise ValueError("field dimensions differ")

    def __call__(self, x):
        out = np.zeros(self.dim)
        for c, f in zip(self.coeffs, self.fields):
            out += c * f(x)
        return out

    def jacobian(self, x):
        J = np.zeros((self.dim, self.dim))
        for c, f in zip(self.coeffs, self.fields):
            J += c * f.jacobian(x)
        return J

    def to_config(self):
        return {"kind": "combination", "coeffs": self.coeffs.tolist(),
                "fields": [f.to_config() for f in self.fields]}


def scalar_from_config(cfg: dict) -> ScalarField:
    kind = cfg.get("kind")
    if kind == "sine_wave":
        return SineWaveScalar(cfg["offset"], cfg["amplitude"], cfg["wavevector"])
    if kind == "constant":
        return ConstantScalar(cfg["c"])
    raise ConfigError(f"unknown scalar factor kind: {kind!r}")


def field_from_config(cfg: dict) -> VectorField:
    """Parse a vector field from its JSON config form."""
    if not isinstance(cfg, dict):
        raise ConfigError("field config must be an object")
    kind = cfg.get("kind")
    try:
        if kind == "lorenz":
            return LorenzField(cfg.get("a", 10.0), cfg.get("b", 8.0 / 3.0),
                               cfg.get("r", 28.0))
        if kind == "linear":
            return LinearField(cfg["matrix"])
        if kind == "torus_translation":
            return TorusTranslation(cfg["alpha"])
        if kind == "damped_torus":
            return DampedTorus(cfg["alpha"], cfg["center"], cfg.get("sharpness", 50.0))
        if kind == "scaled":
            return ScaledField(scalar_from_config(cfg["factor"]),
                               field_from_config(cfg["base"]))
        if kind == "polynomial":
            terms = [(t["exponents"], t["coeffs"]) for t in cfg["terms"]]
            return PolynomialField(cfg["dim"], terms, cfg.get("wrap"))
        if kind == "combination":
            return CombinationField([field_from_config(f) for f in cfg["fields"]],
                                    cfg["coeffs"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid field config for kind {kind!r}: {exc}") from exc
    raise ConfigError(f"unknown field kind: {kind!r}")
