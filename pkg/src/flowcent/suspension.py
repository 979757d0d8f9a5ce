"""Suspensions of Z^d-actions with roof one: metrics and transfer tests.

The suspension space is (M x R_+^d) / ~ with (x, ..., 1, ...) ~ (f_i(x),
..., 0, ...). Points carry canonical heights in [0, 1)^d; the fiber
metric rho_h is the convex combination of base distances over the 2^d
corner maps f^sigma, and the global pseudo-metric is approximated from
above by shortest paths over an epsilon-net whose edges are horizontal
(same fiber, weight rho_h) or vertical (same orbit, weight = minimal
displacement norm).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _dijkstra

from .errors import FlowcentError


# ---------------------------------------------------------------------------
# base maps


class BaseMap:
    """Invertible self-map of the base torus with exact integer powers."""

    dim: int

    def power(self, x, k: int):
        raise NotImplementedError

    def power_many(self, X, k: int) -> np.ndarray:
        return np.array([self.power(x, k) for x in np.atleast_2d(X)])

    def __call__(self, x):
        return self.power(x, 1)

    def to_config(self) -> dict:
        raise NotImplementedError


class IdentityMap(BaseMap):
    def __init__(self, dim=1):
        self.dim = int(dim)

    def power(self, x, k):
        return np.asarray(x, dtype=float).copy()

    def power_many(self, X, k):
        return np.atleast_2d(np.asarray(X, dtype=float)).copy()

    def to_config(self):
        return {"kind": "identity", "dim": self.dim}


class CircleRotation(BaseMap):
    dim = 1

    def __init__(self, rho):
        self.rho = float(rho)

    def power(self, x, k):
        return np.mod(np.asarray(x, dtype=float) + k * self.rho, 1.0)

    def power_many(self, X, k):
        return np.mod(np.atleast_2d(np.asarray(X, dtype=float)) + k * self.rho, 1.0)

    def to_config(self):
        return {"kind": "circle_rotation", "rho": self.rho}


class TorusAutomorphism(BaseMap):
    """x -> Mx mod 1 for an integer matrix with |det| = 1.

    Powers are applied iteratively with a wrap after every step so long
    orbits stay in the fundamental domain (entry growth would otherwise
    destroy the fractional parts).
    """

    def __init__(self, M):
        M = np.asarray(M)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("automorphism matrix must be square")
        if not np.all(M == np.round(M)):
            raise ValueError("automorphism matrix must be integer")
        self.M = M.astype(np.int64)
        det = int(round(np.linalg.det(self.M)))
        if abs(det) != 1:
            raise ValueError(f"automorphism needs |det| = 1, got {det}")
        self.Minv = (np.round(np.linalg.inv(self.M) * det).astype(np.int64) * det)
        self.dim = self.M.shape[0]

    def power(self, x, k):
        return self.power_many(np.atleast_2d(x), k)[0]

    def power_many(self, X, k):
        Y = np.mod(np.atleast_2d(np.asarray(X, dtype=float)), 1.0)
        A = self.M if k >= 0 else self.Minv
        for _ in range(abs(int(k))):
            Y = np.mod(Y @ A.T, 1.0)
        return Y

    def to_config(self):
        return {"kind": "torus_automorphism", "matrix": self.M.tolist()}


class FiniteCycleMap(BaseMap):
    """Doubling-type map x -> mult*x mod 1 restricted to the invariant finite
    set {j/q}; invertible when gcd(mult, q) = 1 (q odd for mult = 2)."""

    dim = 1

    def __init__(self, q, multiplier=2):
        self.q = int(q)
        self.multiplier = int(multiplier)
        if math.gcd(self.multiplier, self.q) != 1:
            raise ValueError("multiplier must be invertible modulo q")
        self._inv = pow(self.multiplier, -1, self.q)

    def power(self, x, k):
        j = int(round(float(np.asarray(x).ravel()[0]) * self.q)) % self.q
        m = pow(self.multiplier if k >= 0 else self._inv, abs(int(k)), self.q)
        return np.array([(j * m % self.q) / self.q])

    def to_config(self):
        return {"kind": "finite_cycle", "q": self.q, "multiplier": self.multiplier}


def base_map_from_config(cfg: dict) -> BaseMap:
    from .errors import ConfigError

    kind = cfg.get("kind")
    try:
        if kind == "identity":
            return IdentityMap(cfg.get("dim", 1))
        if kind == "circle_rotation":
            return CircleRotation(cfg["rho"])
        if kind == "torus_automorphism":
            return TorusAutomorphism(cfg["matrix"])
        if kind == "finite_cycle":
            return FiniteCycleMap(cfg["q"], cfg.get("multiplier", 2))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid base map config for kind {kind!r}: {exc}") from exc
    raise ConfigError(f"unknown base map kind: {kind!r}")


def wrap_dist(x, y) -> float:
    d = np.mod(np.asarray(y, float) - np.asarray(x, float) + 0.5, 1.0) - 0.5
    return float(np.linalg.norm(d))


def wrap_dist_many(X, Y) -> np.ndarray:
    D = np.mod(np.asarray(Y, float) - np.asarray(X, float) + 0.5, 1.0) - 0.5
    return np.linalg.norm(D, axis=-1)


class BaseAction:
    """Commuting invertible maps f_1..f_d on a torus base, with the wrap
    metric and a sampled bi-Lipschitz constant."""

    def __init__(self, maps, tol_comm: float = 1e-9, n_check: int = 64, seed: int = 7):
        if not maps:
            raise ValueError("need at least one generator map")
        dims = {m.dim for m in maps}
        if len(dims) != 1:
            raise ValueError("generator maps must share the base dimension")
        self.maps = list(maps)
        self.d = len(maps)
        self.base_dim = dims.pop()
        rng = np.random.default_rng(seed)
        pts = rng.random((n_check, self.base_dim))
        for i in range(self.d):
            for j in range(i + 1, self.d):
                a = self.maps[i].power_many(self.maps[j].power_many(pts, 1), 1)
                b = self.maps[j].power_many(self.maps[i].power_many(pts, 1), 1)
                defect = float(np.max(wrap_dist_many(a, b)))
                if defect > tol_comm:
                    raise ValueError(
                        f"generators {i} and {j} do not commute: defect {defect:.3g}")
        self.lipschitz_bound = self._estimate_lipschitz(rng)

    def _estimate_lipschitz(self, rng, n_pairs: int = 128, scale: float = 1e-4):
        X = rng.random((n_pairs, self.base_dim))
        Y = np.mod(X + scale * rng.standard_normal(X.shape), 1.0)
        base = wrap_dist_many(X, Y)
        keep = base > 0
        C = 1.0
        for m in self.maps:
            for k in (1, -1):
                r = wrap_dist_many(m.power_many(X, k), m.power_many(Y, k))[keep] / base[keep]
                C = max(C, float(np.max(r)), float(1.0 / np.min(r)))
        return C

    def iterate(self, x, kvec) -> np.ndarray:
        out = np.asarray(x, dtype=float)
        for m, k in zip(self.maps, kvec):
            if k:
                out = m.power(out, int(k))
        return np.mod(out, 1.0)

    def iterate_many(self, X, kvec) -> np.ndarray:
        out = np.atleast_2d(np.asarray(X, dtype=float))
        for m, k in zip(self.maps, kvec):
            if k:
                out = m.power_many(out, int(k))
        return np.mod(out, 1.0)

    def corner(self, x, sigma) -> np.ndarray:
        """f_1^{s_1} o ... o f_d^{s_d}(x) for sigma in {0, 1}^d."""
        out = np.asarray(x, dtype=float)
        for m, s in zip(reversed(self.maps), reversed(list(sigma))):
            if s:
                out = m.power(out, 1)
        return np.mod(out, 1.0)

    def corner_many(self, X, sigma) -> np.ndarray:
        out = np.atleast_2d(np.asarray(X, dtype=float))
        for m, s in zip(reversed(self.maps), reversed(list(sigma))):
            if s:
                out = m.power_many(out, 1)
        return np.mod(out, 1.0)

    def to_config(self):
        return {"maps": [m.to_config() for m in self.maps]}


# ---------------------------------------------------------------------------
# suspension points and fiber metric


@dataclass
class SuspensionPoint:
    base: np.ndarray
    heights: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.base, self.heights])


def normalize(action: BaseAction, base, heights) -> SuspensionPoint:
    """Canonical representative: subtract the integer part of each height
    and push the base point by the matching generator powers. Order
    independent because the generators commute; idempotent on canonical
    input (floor of [0, 1) is zero)."""
    heights = np.asarray(heights, dtype=float)
    if heights.size != action.d:
        raise ValueError("height vector length must equal the action rank")
    k = np.floor(heights).astype(int)
    h = heights - k
    # guard against h == 1.0 from roundoff on huge inputs
    bump = h >= 1.0
    k[bump] += 1
    h[bump] -= 1.0
    return SuspensionPoint(base=action.iterate(base, k), heights=h)


def act(action: BaseAction, v, p: SuspensionPoint) -> SuspensionPoint:
    """The R^d-action on the suspension: add v to the heights, renormalize."""
    v = np.asarray(v, dtype=float)
    return normalize(action, p.base, p.heights + v)


def suspension_point(action: BaseAction, base, heights) -> SuspensionPoint:
    return normalize(action, np.mod(np.asarray(base, float), 1.0), heights)


def corner_weights(heights) -> dict:
    """sigma -> prod_i [sigma_i t_i + (1 - sigma_i)(1 - t_i)]."""
    t = np.asarray(heights, dtype=float)
    out = {}
    for sigma in itertools.product((0, 1), repeat=t.size):
        w = 1.0
        for ti, si in zip(t, sigma):
            w *= si * ti + (1 - si) * (1.0 - ti)
        out[sigma] = w
    return out


def weight_sum(heights) -> float:
    """Sum of the corner weights; identically 1 (telescoping product)."""
    return float(sum(corner_weights(heights).values()))


def rho_h(action: BaseAction, p: SuspensionPoint, q: SuspensionPoint) -> float:
    """Fiber metric: convex combination of base distances over corner maps.

    Requires p and q in the same fiber (equal heights)."""
    if not np.array_equal(p.heights, q.heights):
        raise ValueError("rho_h needs points in the same fiber (equal heights)")
    total = 0.0
    for sigma, w in corner_weights(p.heights).items():
        if w == 0.0:
            total += 0.0
            continue
        total += w * wrap_dist(action.corner(p.base, sigma),
                               action.corner(q.base, sigma))
    return total


def tilde_rho(action: BaseAction, x1, x2) -> float:
    """min over corner maps of the base distance between images."""
    return min(wrap_dist(action.corner(x1, sigma), action.corner(x2, sigma))
               for sigma in itertools.product((0, 1), repeat=action.d))


def quotient_distance(action: BaseAction, p: SuspensionPoint,
                      q: SuspensionPoint, k_range: int = 1) -> float:
    """Two-link upper bound on the suspension metric: one vertical move into
    q's fiber followed by one horizontal move, minimized over the lattice
    shift, symmetrized."""

    def one_way(a, b):
        best = math.inf
        for k in itertools.product(range(-k_range, k_range + 1), repeat=action.d):
            v = np.asarray(k, float) + b.heights - a.heights
            # the vertical move by v lands exactly in b's fiber at base f^k
            moved = SuspensionPoint(base=action.iterate(a.base, k),
                                    heights=b.heights.copy())
            best = min(best, float(np.linalg.norm(v)) + rho_h(action, moved, b))
        return best

    return min(one_way(p, q), one_way(q, p))


# ---------------------------------------------------------------------------
# chain metric on an epsilon-net


@dataclass
class ChainLink:
    kind: str                   # "horizontal" | "vertical"
    length: float
    displacement: np.ndarray | None = None  # vertical links only


@dataclass
class ChainPath:
    nodes: list
    links: list
    total_length: float

    def recompute_length(self) -> float:
        return float(sum(l.length for l in self.links))

    def validate(self, action: BaseAction, tol: float = 1e-9) -> bool:
        """Every link must connect its endpoints by the declared relation."""
        for a, b, link in zip(self.nodes, self.nodes[1:], self.links):
            if link.kind == "horizontal":
                if not np.allclose(a.heights, b.heights, atol=tol):
                    return False
                if abs(rho_h(action, a, b) - link.length) > tol:
                    return False
            else:
                moved = act(action, link.displacement, a)
                if wrap_dist(moved.base, b.base) > tol or \
                        not np.allclose(moved.heights, b.heights, atol=tol):
                    return False
                if abs(float(np.linalg.norm(link.displacement)) - link.length) > tol:
                    return False
        return abs(self.recompute_length() - self.total_length) <= tol


class SuspensionNet:
    """Shortest-path approximation of the chain metric on an epsilon-net.

    Vertices: a base grid (plus the injected points and their small orbit
    satellites) crossed with a height grid (plus the injected height
    levels). Horizontal edges connect whole fibers with rho_h weights;
    vertical edges connect orbit-related vertices with the minimal
    displacement norm, capped at 2 sqrt(d) (larger displacements cannot be
    optimal between net neighbors). Every edge weight upper-bounds the
    metric between its endpoints, so shortest paths are upper bounds too.
    """

    def __init__(self, action: BaseAction, injected, base_res: int = 12,
                 height_res: int = 4, k_range: int | None = None,
                 max_nodes: int = 40000):
        self.action = action
        d = action.d
        bd = action.base_dim
        if k_range is None:
            k_range = int(math.ceil(2.0 * math.sqrt(d))) + 1
        self.k_range = k_range
        self.vcap = 2.0 * math.sqrt(d)
        self.injected = list(injected)

        # --- base registry
        self._key_cache = {}
        bases = []

        def register(pt):
            key = tuple(np.round(np.mod(pt, 1.0), 9))
            if key not in self._key_cache:
                self._key_cache[key] = len(bases)
                bases.append(np.mod(np.asarray(pt, float), 1.0))
            return self._key_cache[key]

        grid = np.arange(base_res) / base_res
        for pt in itertools.product(grid, repeat=bd):
            register(np.array(pt))
        for p in self.injected:
            for k in itertools.product(range(-k_range, k_range + 1), repeat=d):
                register(action.iterate(p.base, k))
        self.bases = np.array(bases)
        B = len(bases)

        # --- height levels
        levels = []
        level_keys = {}

        def register_level(h):
            key = tuple(np.round(h, 12))
            if key not in level_keys:
                level_keys[key] = len(levels)
                levels.append(np.asarray(h, dtype=float))
            return level_keys[key]

        hgrid = np.arange(height_res) / height_res
        for h in itertools.product(hgrid, repeat=d):
            register_level(np.array(h))
        for p in self.injected:
            register_level(p.heights)
        self.levels = levels
        H = len(levels)
        if B * H > max_nodes:
            raise FlowcentError(
                f"net too large: {B} bases x {H} levels > max_nodes = {max_nodes}")
        self.B, self.H = B, H

        # --- corner distance matrices (shared across levels)
        corners = {}
        for sigma in itertools.product((0, 1), repeat=d):
            img = action.corner_many(self.bases, sigma)
            diff = np.mod(img[:, None, :] - img[None, :, :] + 0.5, 1.0) - 0.5
            corners[sigma] = np.linalg.norm(diff, axis=-1)

        rows, cols, ws = [], [], []

        # horizontal edges: complete graph inside each fiber
        iu = np.triu_indices(B, k=1)
        for li, h in enumerate(levels):
            W = np.zeros((B, B))
            for sigma, w in corner_weights(h).items():
                if w:
                    W += w * corners[sigma]
            rows.append(li * B + iu[0])
            cols.append(li * B + iu[1])
            ws.append(W[iu])

        # vertical edges: base related by f^k, any pair of levels
        img_idx = {}
        for k in itertools.product(range(-k_range, k_range + 1), repeat=d):
            img = action.iterate_many(self.bases, k)
            idx = np.array([self._key_cache.get(tuple(np.round(r, 9)), -1)
                            for r in img])
            img_idx[k] = idx
        base_ids = np.arange(B)
        for k, idx in img_idx.items():
            ok = idx >= 0
            if not np.any(ok):
                continue
            src_b = base_ids[ok]
            dst_b = idx[ok]
            for la, ha in enumerate(levels):
                for lb, hb in enumerate(levels):
                    v = np.asarray(k, float) + hb - ha
                    nv = float(np.linalg.norm(v))
                    if nv == 0.0 or nv > self.vcap:
                        continue
                    rows.append(la * B + src_b)
                    cols.append(lb * B + dst_b)
                    ws.append(np.full(src_b.size, nv))

        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        ws = np.concatenate(ws)
        # duplicates must resolve to the cheapest edge, not the COO sum
        enc = rows.astype(np.int64) * (B * H) + cols
        order = np.argsort(enc, kind="stable")
        enc, rows, cols, ws = enc[order], rows[order], cols[order], ws[order]
        uniq, start = np.unique(enc, return_index=True)
        wmin = np.minimum.reduceat(ws, start)
        self._graph = csr_matrix((wmin, (rows[start], cols[start])),
                                 shape=(B * H, B * H))
        del uniq

    def vertex_of(self, p: SuspensionPoint) -> int:
        bkey = tuple(np.round(np.mod(p.base, 1.0), 9))
        lkey = tuple(np.round(p.heights, 12))
        bi = self._key_cache.get(bkey)
        levels = {tuple(np.round(h, 12)): i for i, h in enumerate(self.levels)}
        li = levels.get(lkey)
        if bi is None or li is None:
            raise FlowcentError("point is not a vertex of this net (inject it)")
        return li * self.B + bi

    def point_of(self, vertex: int) -> SuspensionPoint:
        li, bi = divmod(vertex, self.B)
        return SuspensionPoint(base=self.bases[bi].copy(),
                               heights=self.levels[li].copy())

    def shortest_path(self, p: SuspensionPoint, q: SuspensionPoint):
        src = self.vertex_of(p)
        dst = self.vertex_of(q)
        dists, pred = _dijkstra(self._graph, directed=False, indices=src,
                                return_predecessors=True)
        if not np.isfinite(dists[dst]):
            raise FlowcentError(
                "net is disconnected between the query points; use a finer "
                "resolution")
        chain = [dst]
        while chain[-1] != src:
            chain.append(int(pred[chain[-1]]))
        chain.reverse()
        nodes = [self.point_of(v) for v in chain]
        links = [self._classify_link(a, b) for a, b in zip(nodes, nodes[1:])]
        path = ChainPath(nodes=nodes, links=links,
                         total_length=float(sum(l.length for l in links)))
        return float(dists[dst]), path

    def _classify_link(self, a: SuspensionPoint, b: SuspensionPoint) -> ChainLink:
        best_v = None
        best = math.inf
        for k in itertools.product(range(-self.k_range, self.k_range + 1),
                                   repeat=self.action.d):
            if wrap_dist(self.action.iterate(a.base, k), b.base) < 1e-9:
                v = np.asarray(k, float) + b.heights - a.heights
                nv = float(np.linalg.norm(v))
                if nv < best:
                    best, best_v = nv, v
        if np.allclose(a.heights, b.heights, atol=1e-12):
            horiz = rho_h(self.action, a, b)
            if horiz <= best:
                return ChainLink(kind="horizontal", length=horiz)
        if best_v is None:
            raise FlowcentError("could not classify a path link")
        return ChainLink(kind="vertical", length=best, displacement=best_v)


def chain_metric(action: BaseAction, p: SuspensionPoint, q: SuspensionPoint,
                 base_res: int = 12, height_res: int = 4,
                 max_nodes: int = 40000, k_range: int | None = None):
    """Upper bound on the chain metric plus the realizing chain."""
    net = SuspensionNet(action, [p, q], base_res=base_res,
                        height_res=height_res, k_range=k_range,
                        max_nodes=max_nodes)
    return net.shortest_path(p, q)


class SuspensionAction:
    """The suspension R^d-action in flat-coordinate form for the probes.

    Points are arrays [base..., heights...]; ``apply`` is exact integer
    bookkeeping plus base-map applications, ``distance`` the two-link
    quotient bound.
    """

    def __init__(self, base_action: BaseAction):
        self.base = base_action
        self.d = base_action.d
        self.dim = base_action.base_dim + base_action.d

    def split(self, flat) -> SuspensionPoint:
        flat = np.asarray(flat, dtype=float)
        bd = self.base.base_dim
        return SuspensionPoint(base=flat[:bd].copy(), heights=flat[bd:].copy())

    def apply(self, v, flat) -> np.ndarray:
        return act(self.base, v, self.split(flat)).flat()

    def canonicalize(self, flat) -> np.ndarray:
        p = self.split(flat)
        return normalize(self.base, p.base, p.heights).flat()

    def distance(self, a, b) -> float:
        return quotient_distance(self.base, self.split(a), self.split(b))

    def sample(self, rng) -> np.ndarray:
        return np.concatenate([rng.random(self.base.base_dim),
                               rng.random(self.d)])


# ---------------------------------------------------------------------------
# expansiveness transfer


def _axis_images(m: BaseMap, P: np.ndarray, horizon: int) -> dict:
    out = {0: P}
    cur = P
    for n in range(1, horizon + 1):
        cur = m.power_many(cur, 1)
        out[n] = cur
    cur = P
    for n in range(1, horizon + 1):
        cur = m.power_many(cur, -1)
        out[-n] = cur
    return out


def base_violation_sweep(action: BaseAction, delta, n_pairs, horizon,
                         seed: int = 0, pair_scale=None):
    """Search for distinct pairs whose full Z^d-orbit stays delta-close.

    Returns a violation record or None; None only means no violation at
    this resolution."""
    rng = np.random.default_rng(seed)
    if pair_scale is None:
        pair_scale = delta / 2.0
    X = rng.random((n_pairs, action.base_dim))
    Y = np.mod(X + pair_scale * rng.standard_normal(X.shape), 1.0)
    sep0 = wrap_dist_many(X, Y)
    distinct = sep0 > 1e-12
    maxd = sep0.copy()

    def rec(Xc, Yc, depth):
        if depth == action.d:
            np.maximum(maxd, wrap_dist_many(Xc, Yc), out=maxd)
            return
        xi = _axis_images(action.maps[depth], Xc, horizon)
        yi = _axis_images(action.maps[depth], Yc, horizon)
        for n in range(-horizon, horizon + 1):
            if np.all(maxd >= delta):
                return
            rec(xi[n], yi[n], depth + 1)

    rec(X, Y, 0)
    hits = np.where((maxd < delta) & distinct)[0]
    if hits.size == 0:
        return None
    i = int(hits[0])
    return {"x": X[i].tolist(), "y": Y[i].tolist(),
            "sup_distance": float(maxd[i]), "separation": float(sep0[i])}


def _rho_h_many(action: BaseAction, heights, X, Y) -> np.ndarray:
    total = np.zeros(np.atleast_2d(X).shape[0])
    for sigma, w in corner_weights(heights).items():
        if w:
            total += w * wrap_dist_many(action.corner_many(X, sigma),
                                        action.corner_many(Y, sigma))
    return total


def suspension_violation_sweep(action: BaseAction, eps, delta, n_pairs,
                               horizon, seed: int = 0, pair_scale=None,
                               fracs=(0.0, 0.5), conclusion_tol: float = 1e-9):
    """Falsifier for expansiveness of the suspension R^d-action (h = id).

    Pairs share the canonical mid heights; the parameter grid mixes the
    integer box with fractional offsets. A violation is a pair staying
    delta-close over the sampled grid with no connecting displacement of
    norm below eps."""
    rng = np.random.default_rng(seed)
    if pair_scale is None:
        pair_scale = delta / 2.0
    bd = action.base_dim
    d = action.d
    X = rng.random((n_pairs, bd))
    Y = np.mod(X + pair_scale * rng.standard_normal(X.shape), 1.0)
    h0 = np.full(d, 0.5)
    sep0 = wrap_dist_many(X, Y)
    distinct = sep0 > 1e-12
    maxd = np.zeros(n_pairs)
    vert_cap = 2.0 * math.sqrt(d)

    def pair_distance(Xc, Yc, heights):
        best = _rho_h_many(action, heights, Xc, Yc)
        for k in itertools.product((-1, 0, 1), repeat=d):
            if all(v == 0 for v in k):
                continue
            nv = float(np.linalg.norm(np.asarray(k, float)))
            if nv >= vert_cap:
                continue
            cand = nv + _rho_h_many(action, heights,
                                    action.iterate_many(Xc, k), Yc)
            np.minimum(best, cand, out=best)
        return best

    for s in itertools.product(fracs, repeat=d):
        heights = np.mod(h0 + np.asarray(s), 1.0)
        kbase = np.floor(h0 + np.asarray(s)).astype(int)

        def rec(Xc, Yc, depth):
            if depth == d:
                np.maximum(maxd, pair_distance(Xc, Yc, heights), out=maxd)
                return
            xi = _axis_images(action.maps[depth], Xc, horizon)
            yi = _axis_images(action.maps[depth], Yc, horizon)
            for n in range(-horizon, horizon + 1):
                if np.all(maxd >= delta):
                    return
                rec(xi[n], yi[n], depth + 1)

        rec(action.iterate_many(X, kbase), action.iterate_many(Y, kbase), 0)

    hits = np.where((maxd < delta) & distinct)[0]
    if hits.size == 0:
        return None
    # confirm the conclusion fails: no small displacement maps x-pt to y-pt
    for i in hits:
        p = SuspensionPoint(base=X[i].copy(), heights=h0.copy())
        q = SuspensionPoint(base=Y[i].copy(), heights=h0.copy())
        margin = math.inf
        steps = np.linspace(-eps, eps, 7)
        for v in itertools.product(steps, repeat=d):
            v = np.asarray(v)
            if np.linalg.norm(v) >= eps:
                continue
            margin = min(margin, quotient_distance(action, act(action, v, p), q))
        if margin > conclusion_tol:
            return {"x": p.flat().tolist(), "y": q.flat().tolist(),
                    "sup_distance": float(maxd[i]),
                    "separation_margin": float(margin)}
    return None


@dataclass
class TransferReport:
    base_violation: dict | None
    suspension_violation: dict | None
    params: dict = field(default_factory=dict)

    @property
    def base_expansive_at_resolution(self) -> bool:
        return self.base_violation is None

    @property
    def suspension_expansive_at_resolution(self) -> bool:
        return self.suspension_violation is None

    @property
    def agree(self) -> bool:
        return (self.base_violation is None) == (self.suspension_violation is None)

    def to_dict(self):
        return {
            "base_violation": self.base_violation,
            "suspension_violation": self.suspension_violation,
            "base_expansive_at_resolution": self.base_expansive_at_resolution,
            "suspension_expansive_at_resolution": self.suspension_expansive_at_resolution,
            "agree": self.agree,
            "params": self.params,
            "note": ("disagreement flags a numerical-resolution artifact; "
                     "refine the probe parameters" if not self.agree else ""),
        }


def transfer_test(base_action: BaseAction, eps, delta, n_pairs, horizon,
                  seed: int = 0) -> TransferReport:
    """Two-sided probe: falsify expansiveness of the base Z^d-action and of
    its suspension, then cross-check that the verdicts agree."""
    bv = base_violation_sweep(base_action, delta, n_pairs, horizon, seed=seed)
    sv = suspension_violation_sweep(base_action, eps, delta, n_pairs, horizon,
                                    seed=seed + 1)
    return TransferReport(
        base_violation=bv, suspension_violation=sv,
        params={"eps": eps, "delta": delta, "pairs": n_pairs,
                "horizon": horizon, "seed": seed,
                "lipschitz_bound": base_action.lipschitz_bound})
