"""Empirical verification layer.

Fits the two-sided band constants to Green samples, reports sign-change
structure, checks near-diagonal lower bounds on balls, runs boundary blow-up
sequences against the half-space kernel, and validates the reflection
extension that makes a clamped biharmonic half-plane field biharmonic across
the wall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .geometry import Disk, Domain, grid_discretize, sample_pairs
from .kernels import ball_green, comparison_kernel, halfspace_green
from .solver import (
    DEFAULT_TOL,
    GreenSample,
    assemble_bilaplacian,
    discrete_green,
    green_value,
)

__all__ = [
    "EstimateBand",
    "estimate_constants",
    "band_violations",
    "positivity_radius",
    "NegativePartReport",
    "negative_part_report",
    "RegionSamples",
    "ball_pair_samples",
    "exact_disk_samples",
    "NehariResult",
    "nehari_region_check",
    "BlowupStep",
    "BlowupResult",
    "blowup_sequence",
    "ReflectionField",
    "halfplane_field",
    "halfspace_slice_field",
    "duffin_extend",
    "duffin_residual",
    "duffin_refinement_study",
]


# ---------------------------------------------------------------------------
# two-sided band

@dataclass(frozen=True)
class EstimateBand:
    """Fitted band constants plus provenance.

    Every sample used in the fit satisfies
    c2^-1 * H <= G + c1 * dx^2 dy^2 <= c2 * H after the margin is applied.
    """

    c1: float
    c2: float
    epsilon: float
    domain: str = ""
    n_samples: int = 0
    seed: int | None = None
    grid_h: float | None = None


def _sample_arrays(samples):
    G = np.array([s.green for s in samples], dtype=float)
    dx = np.array([s.pair.dx for s in samples], dtype=float)
    dy = np.array([s.pair.dy for s in samples], dtype=float)
    r = np.array([s.pair.r for s in samples], dtype=float)
    H = np.array([s.bound for s in samples], dtype=float)
    return G, dx, dy, r, H


def estimate_constants(samples, epsilon: float = 0.01, domain: str = "",
                       seed: int | None = None, grid_h: float | None = None) -> EstimateBand:
    """Fit (c1, c2) so the band sandwiches every sample.

    c1 absorbs the worst negative value (scaled by the squared boundary
    distances) with a relative margin epsilon, which keeps the shifted Green
    value away from zero at the argmin sample; c2 is then the worst two-sided
    ratio against the comparison kernel.
    """
    if not samples:
        raise ValueError("estimate_constants needs at least one sample")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    G, dx, dy, _, H = _sample_arrays(samples)
    dd = dx * dx * dy * dy
    if np.any(H <= 0.0) or np.any(dd == 0.0):
        raise ValueError("samples must have H > 0 and dx*dy > 0 (interior pairs)")

    c1 = max(0.0, float(np.max(-G / dd)))
    if c1 > 0.0:
        c1 = (1.0 + epsilon) * c1
    elif np.any(G == 0.0):
        pos = G[G > 0.0]
        if len(pos) == 0:
            raise ValueError("all Green values are zero; no band can be fitted")
        c1 = epsilon * float(pos.min()) / float(dd.max())

    shifted = G + c1 * dd
    c2 = float(max(np.max(shifted / H), np.max(H / shifted)))
    return EstimateBand(c1, c2, epsilon, domain, len(samples), seed, grid_h)


def band_violations(samples, band: EstimateBand, rel_slack: float = 1e-12):
    """Indices of samples outside the fitted sandwich (independent check)."""
    G, dx, dy, _, H = _sample_arrays(samples)
    shifted = G + band.c1 * dx * dx * dy * dy
    lo = H / band.c2
    hi = H * band.c2
    slack = rel_slack * np.maximum(np.abs(shifted), hi)
    bad = (shifted < lo - slack) | (shifted > hi + slack)
    return [int(i) for i in np.nonzero(bad)[0]]


def positivity_radius(samples, diameter: float) -> float:
    """Empirical upper estimate of the guaranteed-positivity radius.

    Minimum pair distance over samples with G <= 0; the domain diameter when
    no such sample exists.  Sampling cannot certify positivity, so reports
    should read this as "no counterexample below r".
    """
    if not samples:
        raise ValueError("positivity_radius needs samples")
    rs = [s.pair.r for s in samples if s.green <= 0.0]
    return float(min(rs)) if rs else float(diameter)


@dataclass(frozen=True)
class NegativePartReport:
    """Sign-change inventory: every negative sample against the two bounds
    |G| <= c dx^2 dy^2 and |G| <= c r^-2 dx^2 dy^2 (planar exponent)."""

    c: float
    n_samples: int
    negatives: list
    violations: list
    worst_product_ratio: float
    worst_scaled_ratio: float
    max_negative: float
    max_positive: float

    @property
    def ok(self) -> bool:
        return not self.violations


def negative_part_report(samples, c: float) -> NegativePartReport:
    """List negative samples and check both smallness bounds with constant c.

    Violations are report content, not exceptions.
    """
    if c < 0:
        raise ValueError("c must be nonnegative")
    negatives, violations = [], []
    worst_prod = 0.0
    worst_scaled = 0.0
    max_neg = 0.0
    max_pos = 0.0
    for s in samples:
        max_pos = max(max_pos, s.green)
        if s.green >= 0.0:
            continue
        negatives.append(s)
        max_neg = max(max_neg, -s.green)
        dd = (s.pair.dx * s.pair.dy) ** 2
        bound_prod = c * dd
        bound_scaled = c * dd / s.pair.r**2
        rp = -s.green / bound_prod if bound_prod > 0 else math.inf
        rs = -s.green / bound_scaled if bound_scaled > 0 else math.inf
        worst_prod = max(worst_prod, rp)
        worst_scaled = max(worst_scaled, rs)
        if rp > 1.0 or rs > 1.0:
            violations.append(s)
    return NegativePartReport(c, len(samples), negatives, violations,
                              worst_prod, worst_scaled, max_neg, max_pos)


# ---------------------------------------------------------------------------
# exact-kernel sample providers

def exact_disk_samples(radius: float, count: int, seed: int,
                       strategy: str = "boundary-stratified",
                       center=(0.0, 0.0)) -> list[GreenSample]:
    """Green samples on a disk straight from the exact ball kernel."""
    dom = Disk(radius, center)
    pairs = sample_pairs(dom, count, seed, strategy)
    c = dom.center
    xs = np.array([p.x for p in pairs]) - c
    ys = np.array([p.y for p in pairs]) - c
    G = ball_green(2, xs, ys, radius)
    dx = np.array([p.dx for p in pairs])
    dy = np.array([p.dy for p in pairs])
    r = np.array([p.r for p in pairs])
    H = comparison_kernel(2, dx, dy, r)
    return [GreenSample(p, float(g), float(b), None)
            for p, g, b in zip(pairs, G, H)]


@dataclass(frozen=True)
class RegionSamples:
    """Columnar pair samples for region checks in any dimension."""

    dx: np.ndarray
    dy: np.ndarray
    r: np.ndarray
    green: np.ndarray

    @classmethod
    def from_green_samples(cls, samples):
        dx = np.array([s.pair.dx for s in samples])
        dy = np.array([s.pair.dy for s in samples])
        r = np.array([s.pair.r for s in samples])
        g = np.array([s.green for s in samples])
        return cls(dx, dy, r, g)

    def __len__(self):
        return len(self.green)


def ball_pair_samples(n: int, count: int, seed: int, delta: float = 0.5) -> RegionSamples:
    """Pairs in the unit n-ball with r <= delta*d(x), exact kernel values.

    Even indices spread broadly; odd indices crowd the corner of the region
    (x near the center, r near its cap) where the minimal ratio lives, which
    keeps the empirical constant stable under resampling.
    """
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must be in (0, 1]")
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    even = np.arange(count) % 2 == 0

    gx = rng.standard_normal((count, n))
    gx /= np.linalg.norm(gx, axis=1, keepdims=True)
    u = rng.uniform(size=count)
    rho = np.where(even, u ** (1.0 / n), 0.5 * u * u)
    x = gx * rho[:, None]
    dx = 1.0 - rho

    v = rng.uniform(size=count)
    frac = np.where(even, np.sqrt(v), 1.0 - 0.25 * v * v)
    # keep r strictly positive
    frac = np.maximum(frac, 1e-12)
    r = delta * dx * frac

    gy = rng.standard_normal((count, n))
    gy /= np.linalg.norm(gy, axis=1, keepdims=True)
    y = x + gy * r[:, None]
    dy = 1.0 - np.linalg.norm(y, axis=1)
    G = ball_green(n, x, y)
    return RegionSamples(dx, dy, r, np.asarray(G, dtype=float))


@dataclass(frozen=True)
class NehariResult:
    c3: float
    n_region: int
    n_violations: int
    violation_indices: tuple


def nehari_region_check(n: int, delta: float, samples: RegionSamples) -> NehariResult:
    """Minimal ratio of G to the dimension's lower-bound shape on the region
    r <= delta * max(d(x), d(y)); non-positive values there are violations.

    Shapes: r^(4-n) for n > 4, log(1 + r^-4) for n = 4, sqrt(d(x) d(y)) for
    n = 3, and the planar product form d(x) d(y) min(1, d(x)d(y)/r^2).
    """
    region = samples.r <= delta * np.maximum(samples.dx, samples.dy)
    if not np.any(region):
        raise ValueError("no samples fall inside the region; delta too small")
    dx, dy = samples.dx[region], samples.dy[region]
    r, G = samples.r[region], samples.green[region]
    if n > 4:
        shape = r ** (4.0 - n)
    elif n == 4:
        shape = np.log1p(1.0 / r**4)
    elif n == 3:
        shape = np.sqrt(dx * dy)
    else:
        shape = dx * dy * np.minimum(1.0, dx * dy / r**2)
    ratios = G / shape
    bad = np.nonzero(G <= 0.0)[0]
    return NehariResult(float(ratios.min()), int(region.sum()),
                        int(len(bad)), tuple(int(i) for i in bad))


# ---------------------------------------------------------------------------
# boundary blow-up

@dataclass(frozen=True)
class BlowupStep:
    """One rung of a rescaling sequence toward the half-space kernel."""

    k: int
    scale: float
    xi: tuple
    eta: tuple
    x: tuple
    y: tuple
    gk: float
    g_halfspace: float
    abs_error: float
    growth_diag: float
    h: float


@dataclass(frozen=True)
class BlowupResult:
    steps: list
    regime: str
    truncated: bool = False

    def __iter__(self):
        return iter(self.steps)

    def __len__(self):
        return len(self.steps)

    def __getitem__(self, i):
        return self.steps[i]


def _grid_shape(domain: Domain, h: float):
    lo, hi = domain.bounding_box()
    c = domain.center
    mx = int(math.ceil(max(c[0] - lo[0], hi[0] - c[0]) / h)) + 2
    my = int(math.ceil(max(c[1] - lo[1], hi[1] - c[1]) / h)) + 2
    return 2 * mx + 1, 2 * my + 1


def _log_plus(v):
    return max(0.0, math.log(v)) if v > 0 else 0.0


def blowup_sequence(domain: Domain, x0, regime: str = "A", steps: int = 4,
                    xi=(-1.0, 0.0), eta=(-2.0, 0.0), s0: float = 0.64,
                    nodes_per_scale: int = 8, node_budget: int = 1_000_000,
                    tol: float = DEFAULT_TOL) -> BlowupResult:
    """Zoom into a boundary point and compare rescaled Green values with the
    half-space kernel at the fixed target pair (xi, eta).

    Step k places the pair at x0 + s_k * frame(xi), s_k = s0 * 2^-k, solves
    on a grid refined with the scale (s_k >= nodes_per_scale * h), and
    rescales by the pair distance (regime A, |xi - eta| = 1) or the boundary
    distance of x (regime B, both targets at depth >= 1/2).  Refinement past
    the node budget stops the sequence at the last completed step.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if nodes_per_scale < 8:
        raise ValueError("nodes_per_scale must be >= 8 (pair must stay resolved)")
    x0 = np.asarray(x0, dtype=float)
    if domain.distance(x0) > 1e-8 * domain.diameter:
        raise ValueError(f"x0 = {x0} is not on the boundary")
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if xi[0] >= 0 or eta[0] >= 0:
        raise ValueError("xi, eta must be interior half-plane points (first coord < 0)")
    sep = float(np.linalg.norm(xi - eta))
    if regime == "A":
        if abs(sep - 1.0) > 1e-12:
            raise ValueError("regime A requires |xi - eta| = 1")
        if np.linalg.norm(xi) > 2.0 + 1e-12:
            raise ValueError("regime A requires |xi| <= 2")
    elif regime == "B":
        if abs(xi[0] + 1.0) > 1e-12 or abs(xi[1]) > 1e-12:
            raise ValueError("regime B pins xi = (-1, 0), the unit inward normal")
        if sep >= 0.5 or -eta[0] < 0.5:
            raise ValueError("regime B requires |xi - eta| < 1/2 and depth(eta) >= 1/2")
    else:
        raise ValueError(f"unknown regime {regime!r}")

    nu = domain.outward_normal(x0)
    tau = np.array([-nu[1], nu[0]])
    g_ref = float(halfspace_green(2, xi, eta))
    weight = ((1.0 + _log_plus(float(np.linalg.norm(xi))) + _log_plus(float(np.linalg.norm(eta))))
              * (1.0 + float(xi @ xi) + float(eta @ eta)))

    out = []
    truncated = False
    for k in range(1, steps + 1):
        s = s0 * 2.0 ** (-k)
        h = s / nodes_per_scale
        n1, n2 = _grid_shape(domain, h)
        if n1 * n2 > node_budget:
            truncated = True
            break
        xk = x0 + s * (xi[0] * nu + xi[1] * tau)
        yk = x0 + s * (eta[0] * nu + eta[1] * tau)
        op = assemble_bilaplacian(grid_discretize(domain, h))
        col = discrete_green(domain, h, yk, tol=tol, op=op)
        g = green_value(col, xk)
        if regime == "A":
            scale = float(np.linalg.norm(xk - yk))
        else:
            scale = float(domain.distance(xk))
        gk = g / scale**2
        out.append(BlowupStep(
            k=k, scale=scale, xi=tuple(xi), eta=tuple(eta),
            x=tuple(xk), y=tuple(yk), gk=gk, g_halfspace=g_ref,
            abs_error=abs(gk - g_ref), growth_diag=abs(gk) / weight, h=h))
    return BlowupResult(out, regime, truncated)


# ---------------------------------------------------------------------------
# reflection extension across the wall

def _fd_weights(offsets, deriv):
    """Exact finite-difference weights on integer offsets (unit spacing).

    Solves the Vandermonde moment system over the rationals so weight
    rounding stays at one ulp; solved in floating point the residual of the
    quadratic-reproduction check would already be visible.
    """
    m = len(offsets)
    rows = [[Fraction(o) ** i for o in offsets] + [Fraction(0)] for i in range(m)]
    rows[deriv][m] = Fraction(math.factorial(deriv))
    for k in range(m):
        piv = next(r for r in range(k, m) if rows[r][k] != 0)
        rows[k], rows[piv] = rows[piv], rows[k]
        pk = rows[k][k]
        rows[k] = [v / pk for v in rows[k]]
        for r in range(m):
            if r != k and rows[r][k] != 0:
                f = rows[r][k]
                rows[r] = [vr - f * vk for vr, vk in zip(rows[r], rows[k])]
    return [float(rows[j][m]) for j in range(m)]


# 7-point windows; index = how many points the window reaches past the
# evaluation row toward the wall (3 = centered).  Seven points give order 6
# for the first derivative and >= 5 for the second, enough for the discrete
# bilaplacian of the extension to keep shrinking under refinement; classical
# centered 3-point differences leave an O(h^2) slope mismatch at the wall
# that the h^-4 stencil amplifies into a growing residual.
_WINDOW = 7
_D1_W = {s: _fd_weights(list(range(s, s - _WINDOW, -1)), 1) for s in range(_WINDOW)}
_D2_W = {s: _fd_weights(list(range(s, s - _WINDOW, -1)), 2) for s in range(_WINDOW)}


def _window_shift(room_ahead: int, room_behind: int) -> int:
    s = min(3, room_ahead)
    need_behind = _WINDOW - 1 - s
    if need_behind > room_behind:
        s = _WINDOW - 1 - room_behind
    if s > room_ahead:
        raise ValueError("grid too shallow for the derivative window")
    return s


def _row_derivative(values, m, weights_table):
    """Unit-spacing derivative along axis 0 at row m, window shifted to fit."""
    n_rows = values.shape[0]
    s = _window_shift(n_rows - 1 - m, m)
    w = weights_table[s]
    acc = np.zeros(values.shape[1])
    for l, wl in enumerate(w):
        acc += wl * values[m + s - l]
    return acc


def _tangential_second(values_row, h):
    """Second derivative along a row, shifted windows near the ends."""
    n = len(values_row)
    out = np.empty(n)
    w = _D2_W[3]
    core = sum(wl * values_row[3 + 3 - l: n - 3 + 3 - l] for l, wl in enumerate(w))
    out[3:n - 3] = core
    for j in list(range(3)) + list(range(n - 3, n)):
        s = _window_shift(n - 1 - j, j)
        out[j] = sum(wl * values_row[j + s - l] for l, wl in enumerate(_D2_W[s]))
    return out / h**2


@dataclass
class ReflectionField:
    """Scalar field on a strip grid across the wall y1 = 0.

    Rows i <= i0 carry given data (y1 <= 0); rows above are filled by
    duffin_extend.  y1/y2 are the axis coordinates, uniform spacing h.
    """

    h: float
    y1: np.ndarray
    y2: np.ndarray
    values: np.ndarray
    i0: int
    singular_point: tuple | None = None
    extended: bool = False

    @property
    def depth_rows(self) -> int:
        return self.i0

    @property
    def height_rows(self) -> int:
        return len(self.y1) - 1 - self.i0


def halfplane_field(fn, h: float, depth: float, height: float,
                    y2_lo: float, y2_hi: float,
                    singular_point=None) -> ReflectionField:
    """Sample fn(Y1, Y2) on rows y1 in [-depth, 0]; rows above start at 0."""
    if h <= 0 or depth <= 0 or height <= 0:
        raise ValueError("h, depth, height must be positive")
    i0 = int(round(depth / h))
    n1 = i0 + int(round(height / h)) + 1
    n2 = int(round((y2_hi - y2_lo) / h)) + 1
    y1 = (np.arange(n1) - i0) * h
    y2 = y2_lo + np.arange(n2) * h
    Y1, Y2 = np.meshgrid(y1[: i0 + 1], y2, indexing="ij")
    values = np.zeros((n1, n2))
    values[: i0 + 1] = fn(Y1, Y2)
    return ReflectionField(float(h), y1, y2, values, i0, singular_point, False)


def halfspace_slice_field(x0, h: float, depth: float = 1.0, height: float = 0.3,
                          y2_lo: float = 1.0, y2_hi: float = 2.0) -> ReflectionField:
    """Half-plane kernel slice y -> G_H(x0, y) on a strip grid."""
    x0 = np.asarray(x0, dtype=float)

    def fn(Y1, Y2):
        pts = np.stack([Y1, Y2], axis=-1)
        return halfspace_green(2, x0, pts)

    return halfplane_field(fn, h, depth, height, y2_lo, y2_hi,
                           singular_point=tuple(x0))


def duffin_extend(fld: ReflectionField, check_boundary: bool = True,
                  boundary_tol: tuple | None = None) -> ReflectionField:
    """Fill the rows above the wall with the reflection extension.

    At height t the formula is
        -H(-t, .) - 2 t dH/dy1(-t, .) - t^2 (Lap H)(-t, .),
    with the derivatives taken by finite differences at the reflected rows.
    Clamped data (H = dH/dy1 = 0 on the wall) is what makes the result
    biharmonic across; data violating that beyond tolerance is rejected.
    """
    i0, h = fld.i0, fld.h
    if i0 < _WINDOW - 1:
        raise ValueError(
            f"need at least {_WINDOW - 1} node layers below the wall, have {i0}")
    data = fld.values[: i0 + 1]
    scale = float(np.max(np.abs(data))) if data.size else 0.0
    if check_boundary:
        tol_v, tol_d = boundary_tol if boundary_tol is not None else (
            1e-8 * max(scale, 1e-300), 25.0 * h**2 * max(1.0, scale))
        wall = np.max(np.abs(fld.values[i0]))
        d1_wall = np.max(np.abs(
            (3.0 * fld.values[i0] - 4.0 * fld.values[i0 - 1] + fld.values[i0 - 2]) / (2.0 * h)))
        if wall > tol_v:
            raise ValueError(f"wall values reach {wall:.3e}, above tolerance {tol_v:.3e}")
        if d1_wall > tol_d:
            raise ValueError(
                f"wall normal derivative reaches {d1_wall:.3e}, above tolerance {tol_d:.3e}")

    out = fld.values.copy()
    n1 = len(fld.y1)
    for i in range(i0 + 1, n1):
        k = i - i0
        m = i0 - k
        if m < 0:
            raise ValueError("extension reaches deeper than the given data")
        t = k * h
        d1 = _row_derivative(fld.values[: i0 + 1], m, _D1_W) / h
        d11 = _row_derivative(fld.values[: i0 + 1], m, _D2_W) / h**2
        d22 = _tangential_second(fld.values[m], h)
        out[i] = -fld.values[m] - 2.0 * t * d1 - t * t * (d11 + d22)
    return ReflectionField(h, fld.y1, fld.y2, out, i0, fld.singular_point, True)


@dataclass(frozen=True)
class DuffinResidual:
    max_abs: float
    h: float
    band_halfwidth: float
    n_nodes: int


def duffin_residual(fld: ReflectionField, band_halfwidth: float | None = None,
                    exclusion_nodes: int = 5) -> DuffinResidual:
    """Max |13-point discrete bilaplacian| in a band around the wall.

    The extension of a genuinely clamped biharmonic field must drive this to
    zero under refinement; broken wall data blows it up instead.  Nodes
    within exclusion_nodes of a recorded singular point are skipped.
    """
    if not fld.extended:
        raise ValueError("field must be extended first")
    U, h = fld.values, fld.h
    n1, n2 = U.shape
    if band_halfwidth is None:
        band_halfwidth = min(fld.y1[-1], -fld.y1[0]) - 2 * h
    c = U[2:-2, 2:-2]
    R = (20.0 * c
         - 8.0 * (U[1:-3, 2:-2] + U[3:-1, 2:-2] + U[2:-2, 1:-3] + U[2:-2, 3:-1])
         + 2.0 * (U[1:-3, 1:-3] + U[1:-3, 3:-1] + U[3:-1, 1:-3] + U[3:-1, 3:-1])
         + (U[:-4, 2:-2] + U[4:, 2:-2] + U[2:-2, :-4] + U[2:-2, 4:])) / h**4
    Y1 = fld.y1[2:-2, None] * np.ones((1, n2 - 4))
    band = np.abs(Y1) <= band_halfwidth
    if fld.singular_point is not None:
        sy1, sy2 = fld.singular_point
        i_s = (sy1 - fld.y1[0]) / h
        j_s = (sy2 - fld.y2[0]) / h
        I, J = np.meshgrid(np.arange(2, n1 - 2), np.arange(2, n2 - 2), indexing="ij")
        band &= np.maximum(np.abs(I - i_s), np.abs(J - j_s)) >= exclusion_nodes
    if not np.any(band):
        raise ValueError("residual band is empty")
    return DuffinResidual(float(np.max(np.abs(R[band]))), h,
                          float(band_halfwidth), int(band.sum()))


def duffin_refinement_study(make_field, h_list, band_halfwidth: float | None = None):
    """Extend and measure the wall residual over a list of spacings.

    make_field(h) must return an unextended ReflectionField.  Returns the
    list of (h, residual) rows; callers judge the trend.
    """
    rows = []
    for h in h_list:
        fld = duffin_extend(make_field(h))
        res = duffin_residual(fld, band_halfwidth=band_halfwidth)
        rows.append((float(h), res.max_abs))
    return rows
