"""Planar desk-scale domains: inside tests, boundary distance, grid masks,
and deterministic point-pair sampling.

Distance is exact for disks and rectangles; ellipses and limacons go through
a damped multi-start Newton iteration on the boundary parameter.  Sampling is
keyed per index by a counter-based generator (Philox), so pair i depends only
on (seed, i, strategy) and parallel generation is order independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Domain",
    "Disk",
    "Ellipse",
    "Limacon",
    "Rectangle",
    "parse_domain",
    "GridMask",
    "grid_discretize",
    "PointPair",
    "sample_pairs",
    "SAMPLING_STRATEGIES",
]

_NEWTON_STARTS = 8
_NEWTON_MAXITER = 100
_NEWTON_TOL = 1e-12


class Domain:
    """Bounded planar domain with inside test and boundary distance."""

    kind = "domain"
    smooth = True  # rectangles override; corners fall outside the smooth class

    def __init__(self, center=(0.0, 0.0)):
        self.center = np.asarray(center, dtype=float)

    # -- interface ---------------------------------------------------------
    def contains(self, p):
        """Strict inside test; scalar bool for a single point."""
        raise NotImplementedError

    def distance(self, p):
        """Unsigned distance to the boundary (defined everywhere)."""
        raise NotImplementedError

    def bounding_box(self):
        raise NotImplementedError

    @property
    def diameter(self) -> float:
        raise NotImplementedError

    # parametric boundary, used by Newton distance and normals
    def boundary_point(self, t):
        raise NotImplementedError

    def boundary_tangent(self, t):
        raise NotImplementedError

    def boundary_curvature_vec(self, t):
        raise NotImplementedError

    def tag(self) -> str:
        return self.kind

    def __repr__(self):
        return f"<{self.tag()}>"

    # -- shared helpers ----------------------------------------------------
    def outward_normal(self, p):
        """Unit outward normal at a boundary point."""
        t = self.nearest_boundary_param(p)
        tan = np.asarray(self.boundary_tangent(t), dtype=float)
        n = np.array([tan[1], -tan[0]])
        n /= np.linalg.norm(n)
        probe = np.asarray(p, dtype=float) + 1e-6 * self.diameter * n
        if self.contains(probe):
            n = -n
        return n

    def nearest_boundary_param(self, p):
        d, t = _newton_nearest(self, np.asarray(p, dtype=float)[None, :])
        return float(t[0])


def _as_points(p):
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    return (p[None, :], single) if single else (p, single)


def _newton_nearest(dom: Domain, pts, starts=_NEWTON_STARTS,
                    max_iter=_NEWTON_MAXITER, tol=_NEWTON_TOL):
    """Nearest-boundary distance by damped Newton on the boundary parameter.

    Works on stationary points of |p - gamma(t)|^2, runs all starts for all
    points at once, and keeps the closest converged candidate per point.
    """
    npts = pts.shape[0]
    t = np.tile(np.linspace(0.0, 2.0 * math.pi, starts, endpoint=False), (npts, 1))
    P = pts[:, None, :]
    scale = max(dom.diameter, 1e-300)
    for _ in range(max_iter):
        g = dom.boundary_point(t)
        dg = dom.boundary_tangent(t)
        d2g = dom.boundary_curvature_vec(t)
        diff = P - g
        grad = -(diff * dg).sum(-1)
        hess = (dg * dg).sum(-1) - (diff * d2g).sum(-1)
        step = grad / np.where(np.abs(hess) < 1e-30, 1e-30, hess)
        np.clip(step, -0.6, 0.6, out=step)
        t = t - step
        if np.all(np.abs(step) < 1e-16):
            break
    g = dom.boundary_point(t)
    dg = dom.boundary_tangent(t)
    diff = P - g
    resid = np.abs((diff * dg).sum(-1))
    dist = np.sqrt((diff * diff).sum(-1))
    norm = np.linalg.norm(dg, axis=-1) * (dist + scale)
    ok = resid <= tol * 1e3 * np.maximum(norm, 1e-300)
    if not np.all(ok.any(axis=1)):
        raise RuntimeError("boundary-distance Newton iteration failed to converge")
    dist = np.where(ok, dist, np.inf)
    best = dist.argmin(axis=1)
    rows = np.arange(npts)
    return dist[rows, best], t[rows, best]


class Disk(Domain):
    kind = "disk"

    def __init__(self, radius, center=(0.0, 0.0)):
        super().__init__(center)
        if radius <= 0:
            raise ValueError("disk radius must be positive")
        self.radius = float(radius)

    def contains(self, p):
        q, single = _as_points(p)
        out = ((q - self.center) ** 2).sum(-1) < self.radius**2
        return bool(out[0]) if single else out

    def distance(self, p):
        q, single = _as_points(p)
        out = np.abs(self.radius - np.linalg.norm(q - self.center, axis=-1))
        return float(out[0]) if single else out

    def bounding_box(self):
        r = self.radius
        return self.center - r, self.center + r

    @property
    def diameter(self):
        return 2.0 * self.radius

    def boundary_point(self, t):
        t = np.asarray(t, dtype=float)
        return self.center + self.radius * np.stack([np.cos(t), np.sin(t)], axis=-1)

    def boundary_tangent(self, t):
        t = np.asarray(t, dtype=float)
        return self.radius * np.stack([-np.sin(t), np.cos(t)], axis=-1)

    def boundary_curvature_vec(self, t):
        t = np.asarray(t, dtype=float)
        return -self.radius * np.stack([np.cos(t), np.sin(t)], axis=-1)

    def tag(self):
        return f"disk:{self.radius:g}"


class Ellipse(Domain):
    kind = "ellipse"

    def __init__(self, a, b, center=(0.0, 0.0)):
        super().__init__(center)
        if a <= 0 or b <= 0:
            raise ValueError("ellipse semi-axes must be positive")
        self.a = float(a)
        self.b = float(b)

    def contains(self, p):
        q, single = _as_points(p)
        q = q - self.center
        out = (q[..., 0] / self.a) ** 2 + (q[..., 1] / self.b) ** 2 < 1.0
        return bool(out[0]) if single else out

    def distance(self, p):
        q, single = _as_points(p)
        d, _ = _newton_nearest(self, q)
        return float(d[0]) if single else d

    def bounding_box(self):
        half = np.array([self.a, self.b])
        return self.center - half, self.center + half

    @property
    def diameter(self):
        return 2.0 * max(self.a, self.b)

    def boundary_point(self, t):
        t = np.asarray(t, dtype=float)
        return self.center + np.stack([self.a * np.cos(t), self.b * np.sin(t)], axis=-1)

    def boundary_tangent(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([-self.a * np.sin(t), self.b * np.cos(t)], axis=-1)

    def boundary_curvature_vec(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([-self.a * np.cos(t), -self.b * np.sin(t)], axis=-1)

    def tag(self):
        return f"ellipse:{self.a:g},{self.b:g}"


class Limacon(Domain):
    """Limacon with polar boundary rho(t) = a + b cos t about the center.

    a >= 2b > 0 keeps the curve simple (no inner loop) and the region
    star-shaped about the pole, so the polar inequality is the inside test.
    """

    kind = "limacon"

    def __init__(self, a, b, center=(0.0, 0.0)):
        super().__init__(center)
        if not (b > 0 and a >= 2.0 * b):
            raise ValueError("limacon requires a >= 2b > 0")
        self.a = float(a)
        self.b = float(b)

    def _rho(self, t):
        return self.a + self.b * np.cos(t)

    def contains(self, p):
        q, single = _as_points(p)
        q = q - self.center
        r = np.linalg.norm(q, axis=-1)
        th = np.arctan2(q[..., 1], q[..., 0])
        out = r < self._rho(th)
        return bool(out[0]) if single else out

    def distance(self, p):
        q, single = _as_points(p)
        d, _ = _newton_nearest(self, q)
        return float(d[0]) if single else d

    def bounding_box(self):
        t = np.linspace(0.0, 2.0 * math.pi, 4096)
        g = self.boundary_point(t)
        return g.min(axis=0), g.max(axis=0)

    @property
    def diameter(self):
        if not hasattr(self, "_diameter"):
            t = np.linspace(0.0, 2.0 * math.pi, 2048, endpoint=False)
            g = self.boundary_point(t)
            d2 = ((g[:, None, :] - g[None, :, :]) ** 2).sum(-1)
            self._diameter = math.sqrt(float(d2.max()))
        return self._diameter

    def boundary_point(self, t):
        t = np.asarray(t, dtype=float)
        rho = self._rho(t)
        return self.center + np.stack([rho * np.cos(t), rho * np.sin(t)], axis=-1)

    def boundary_tangent(self, t):
        t = np.asarray(t, dtype=float)
        rho = self._rho(t)
        drho = -self.b * np.sin(t)
        c, s = np.cos(t), np.sin(t)
        return np.stack([drho * c - rho * s, drho * s + rho * c], axis=-1)

    def boundary_curvature_vec(self, t):
        t = np.asarray(t, dtype=float)
        rho = self._rho(t)
        drho = -self.b * np.sin(t)
        d2rho = -self.b * np.cos(t)
        c, s = np.cos(t), np.sin(t)
        return np.stack(
            [d2rho * c - 2.0 * drho * s - rho * c,
             d2rho * s + 2.0 * drho * c - rho * s], axis=-1)

    def tag(self):
        return f"limacon:{self.a:g},{self.b:g}"


class Rectangle(Domain):
    """Axis-aligned rectangle.  Corners put it outside the smooth class the
    estimates assume, so analysis reports carry the flag."""

    kind = "rect"
    smooth = False

    def __init__(self, w, h, center=(0.0, 0.0)):
        super().__init__(center)
        if w <= 0 or h <= 0:
            raise ValueError("rectangle sides must be positive")
        self.w = float(w)
        self.h = float(h)

    def contains(self, p):
        q, single = _as_points(p)
        q = np.abs(q - self.center)
        out = (q[..., 0] < self.w / 2) & (q[..., 1] < self.h / 2)
        return bool(out[0]) if single else out

    def distance(self, p):
        q, single = _as_points(p)
        q = np.abs(q - self.center)
        ex = q[..., 0] - self.w / 2
        ey = q[..., 1] - self.h / 2
        outside = np.hypot(np.maximum(ex, 0.0), np.maximum(ey, 0.0))
        inside = -np.maximum(ex, ey)
        out = np.where((ex < 0) & (ey < 0), inside, outside)
        return float(out[0]) if single else out

    def bounding_box(self):
        half = np.array([self.w / 2, self.h / 2])
        return self.center - half, self.center + half

    @property
    def diameter(self):
        return math.hypot(self.w, self.h)

    def boundary_point(self, t):
        # piecewise parameterisation, kept only for API parity
        t = np.mod(np.asarray(t, dtype=float), 2.0 * math.pi) / (2.0 * math.pi) * 4.0
        side = np.floor(t).astype(int) % 4
        f = t - np.floor(t)
        w2, h2 = self.w / 2, self.h / 2
        x = np.select([side == 0, side == 1, side == 2, side == 3],
                      [-w2 + f * self.w, w2, w2 - f * self.w, -w2])
        y = np.select([side == 0, side == 1, side == 2, side == 3],
                      [-h2, -h2 + f * self.h, h2, h2 - f * self.h])
        return self.center + np.stack([x, y], axis=-1)

    def outward_normal(self, p):
        q = np.asarray(p, dtype=float) - self.center
        ex = abs(q[0]) - self.w / 2
        ey = abs(q[1]) - self.h / 2
        if abs(ex) <= abs(ey):
            return np.array([math.copysign(1.0, q[0]), 0.0])
        return np.array([0.0, math.copysign(1.0, q[1])])

    def tag(self):
        return f"rect:{self.w:g},{self.h:g}"


def parse_domain(text: str) -> Domain:
    """Parse CLI domain strings: disk:R, ellipse:a,b, limacon:a,b, rect:w,h."""
    try:
        kind, _, params = text.partition(":")
        vals = [float(v) for v in params.split(",")] if params else []
        if kind == "disk" and len(vals) == 1:
            return Disk(vals[0])
        if kind == "ellipse" and len(vals) == 2:
            return Ellipse(vals[0], vals[1])
        if kind == "limacon" and len(vals) == 2:
            return Limacon(vals[0], vals[1])
        if kind == "rect" and len(vals) == 2:
            return Rectangle(vals[0], vals[1])
    except ValueError as exc:
        raise ValueError(f"bad domain string {text!r}: {exc}") from None
    raise ValueError(
        f"unknown domain {text!r}; expected disk:R, ellipse:a,b, limacon:a,b or rect:w,h")


# ---------------------------------------------------------------------------
# grids

EXTERIOR, ADJACENT, INTERIOR = 0, 1, 2

# neighbourhood the 13-point bilaplacian touches
STENCIL_OFFSETS = [
    (1, 0), (-1, 0), (0, 1), (0, -1),
    (1, 1), (1, -1), (-1, 1), (-1, -1),
    (2, 0), (-2, 0), (0, 2), (0, -2),
]


@dataclass
class GridMask:
    """Uniform grid over a domain's bounding box with node classification.

    kind[i, j] is EXTERIOR, ADJACENT (touched by the stencil of an interior
    node) or INTERIOR (strictly inside); the domain center is always a node.
    """

    domain: Domain
    h: float
    origin: np.ndarray
    nx: int
    ny: int
    kind: np.ndarray
    index: np.ndarray = field(repr=False)  # interior node -> unknown, else -1
    n_interior: int = 0

    def node_coords(self, i, j):
        return self.origin + np.array([i, j], dtype=float) * self.h

    def axes(self):
        xs = self.origin[0] + np.arange(self.nx) * self.h
        ys = self.origin[1] + np.arange(self.ny) * self.h
        return xs, ys

    def interior_points(self):
        ii, jj = np.nonzero(self.kind == INTERIOR)
        return self.origin + np.stack([ii, jj], axis=1) * self.h

    def nearest_node(self, p):
        q = (np.asarray(p, dtype=float) - self.origin) / self.h
        i, j = int(round(q[0])), int(round(q[1]))
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise ValueError(f"point {p} outside the grid")
        return i, j


def grid_discretize(domain: Domain, h: float, min_interior: int = 25) -> GridMask:
    """Classify all nodes of the center-anchored bounding grid.

    Deterministic for identical inputs.  Grids with fewer than min_interior
    strictly inside nodes are rejected, reporting the count found.
    """
    if h <= 0:
        raise ValueError("grid spacing must be positive")
    lo, hi = domain.bounding_box()
    c = domain.center
    mx = int(math.ceil(max(c[0] - lo[0], hi[0] - c[0]) / h)) + 2
    my = int(math.ceil(max(c[1] - lo[1], hi[1] - c[1]) / h)) + 2
    nx, ny = 2 * mx + 1, 2 * my + 1
    origin = c - np.array([mx, my]) * h
    xs = origin[0] + np.arange(nx) * h
    ys = origin[1] + np.arange(ny) * h
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    inside = domain.contains(pts).reshape(nx, ny)

    n_int = int(inside.sum())
    if n_int < min_interior:
        raise ValueError(
            f"grid h={h:g} too coarse for {domain.tag()}: "
            f"{n_int} interior nodes, need >= {min_interior}")

    kind = np.zeros((nx, ny), dtype=np.uint8)
    kind[inside] = INTERIOR
    adj = np.zeros_like(inside)
    for di, dj in STENCIL_OFFSETS:
        src = np.zeros_like(inside)
        i0, i1 = max(0, di), min(nx, nx + di)
        j0, j1 = max(0, dj), min(ny, ny + dj)
        src[i0:i1, j0:j1] = inside[i0 - di:i1 - di, j0 - dj:j1 - dj]
        adj |= src
    kind[adj & ~inside] = ADJACENT

    index = -np.ones((nx, ny), dtype=np.int64)
    index[inside] = np.arange(n_int)
    return GridMask(domain, float(h), origin, nx, ny, kind, index, n_int)


# ---------------------------------------------------------------------------
# pair sampling

@dataclass(frozen=True)
class PointPair:
    """One strictly interior point pair with cached distances."""

    x: tuple
    y: tuple
    dx: float
    dy: float
    r: float


SAMPLING_STRATEGIES = ("uniform", "boundary-stratified", "near-diagonal")


def _pair_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))


def _draw_interior(dom: Domain, rng, lo, hi, batch=32):
    while True:
        cand = rng.uniform(lo, hi, size=(batch, 2))
        ok = dom.contains(cand)
        if ok.any():
            return cand[ok]


def sample_pairs(domain: Domain, count: int, seed: int,
                 strategy: str = "uniform") -> list[PointPair]:
    """Deterministic interior point pairs; identical for identical inputs.

    uniform             both points uniform in the domain
    boundary-stratified thirds by index: dx*dy <= r^2, dx*dy > r^2, and a
                        mixed band around the case boundary
    near-diagonal       r drawn below min(dx, dy)/2
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if strategy not in SAMPLING_STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    lo, hi = domain.bounding_box()
    pairs = []
    for i in range(count):
        rng = _pair_rng(seed, i)
        if strategy == "near-diagonal":
            pair = _draw_near_diagonal(domain, rng, lo, hi)
        else:
            stratum = i % 3 if strategy == "boundary-stratified" else None
            pair = _draw_stratified(domain, rng, lo, hi, stratum)
        pairs.append(pair)
    return pairs


def _draw_near_diagonal(dom, rng, lo, hi):
    while True:
        x = _draw_interior(dom, rng, lo, hi)[0]
        dx = float(dom.distance(x))
        if dx <= 0.0:
            continue
        u = rng.uniform()
        r = u * dx / 3.0
        if r <= 0.0:
            continue
        phi = rng.uniform(0.0, 2.0 * math.pi)
        y = x + r * np.array([math.cos(phi), math.sin(phi)])
        if not dom.contains(y):
            continue
        dy = float(dom.distance(y))
        if dy <= 0.0:
            continue
        return PointPair(tuple(x), tuple(y), dx, dy, r)


def _draw_stratified(dom, rng, lo, hi, stratum):
    while True:
        xs = _draw_interior(dom, rng, lo, hi)
        ys = _draw_interior(dom, rng, lo, hi)
        m = min(len(xs), len(ys))
        xs, ys = xs[:m], ys[:m]
        r = np.linalg.norm(xs - ys, axis=1)
        dxv = dom.distance(xs)
        dyv = dom.distance(ys)
        ok = (r > 0) & (dxv > 0) & (dyv > 0)
        if stratum is not None:
            p = dxv * dyv
            with np.errstate(divide="ignore"):
                if stratum == 0:
                    ok &= p <= r * r
                elif stratum == 1:
                    ok &= p > r * r
                else:  # mixed band around the case boundary
                    ok &= np.abs(np.log(np.where(p > 0, p, 1.0) / (r * r))) <= 0.25
        if ok.any():
            k = int(np.argmax(ok))
            return PointPair(tuple(xs[k]), tuple(ys[k]),
                             float(dxv[k]), float(dyv[k]), float(r[k]))
