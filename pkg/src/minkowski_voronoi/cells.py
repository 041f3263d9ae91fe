"""Ball-restricted Voronoi cells and their monomial moments.

Coordinates inside a cell are local: ``z = y - x`` for site ``x``. The cell
``B(x, R) & V_x(K_0)`` is the disk ``|z| <= R`` cut by the bisector
half-planes ``<z, e_j> <= h_j`` of the neighbours ``x_j``, with
``e_j = (x_j - x)/|x_j - x|`` and ``h_j = |x_j - x|/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import PreconditionError
from .symtensor import SymTensor, monomials, multi_indices

DEFAULT_MAX_DEGREE = 4
REL_EPS = 1e-12
# hash lookups visiting more buckets than this fall back to a linear scan
_MAX_BUCKETS = 400
_MC_BATCH = 1 << 18


# ----------------------------------------------------------------------
# neighbour search


class SpatialHash:
    """Uniform bucket grid over a fixed point array."""

    def __init__(self, points: np.ndarray, bucket: float):
        if bucket <= 0:
            raise ValueError("bucket size must be positive")
        self.points = np.asarray(points, dtype=float)
        self.bucket = float(bucket)
        keys = np.floor(self.points / self.bucket).astype(np.int64)
        self._buckets: dict[tuple, np.ndarray] = {}
        if len(keys):
            order = np.lexsort(keys.T[::-1])
            sk = keys[order]
            brk = np.flatnonzero(np.any(np.diff(sk, axis=0) != 0, axis=1)) + 1
            for start, stop in zip(np.r_[0, brk], np.r_[brk, len(sk)]):
                self._buckets[tuple(sk[start])] = np.sort(order[start:stop])

    def query(self, x, radius: float, inner: float = -1.0) -> np.ndarray:
        """Indices (ascending) of points with ``inner < |p - x| <= radius``."""
        x = np.asarray(x, dtype=float)
        d = self.points.shape[1]
        k = math.ceil(radius / self.bucket)
        if (2 * k + 1) ** d > _MAX_BUCKETS:
            cand = np.arange(len(self.points))
        else:
            base = np.floor(x / self.bucket).astype(np.int64)
            parts = []
            rng = range(-k, k + 1)
            for off in np.stack(np.meshgrid(*([rng] * d), indexing="ij"), -1).reshape(-1, d):
                got = self._buckets.get(tuple(base + off))
                if got is not None:
                    parts.append(got)
            if not parts:
                return np.zeros(0, dtype=np.int64)
            cand = np.sort(np.concatenate(parts))
        dist2 = np.sum((self.points[cand] - x) ** 2, axis=1)
        keep = dist2 <= radius * radius
        if inner >= 0:
            keep &= dist2 > inner * inner
        return cand[keep]


def neighbors_within(sample, x, radius: float, index: Optional[SpatialHash] = None) -> np.ndarray:
    """Sample points other than ``x`` within ``radius``, lexicographically sorted."""
    pts = sample.points if hasattr(sample, "points") else np.asarray(sample, dtype=float)
    if index is None:
        index = SpatialHash(pts, max(radius, 1e-300))
    idx = index.query(x, radius)
    out = pts[idx]
    out = out[np.any(out != np.asarray(x, dtype=float), axis=1)]
    return out[np.lexsort(out.T[::-1])] if len(out) else out


# ----------------------------------------------------------------------
# cell geometry


@dataclass(frozen=True)
class ArcPiece:
    theta0: float
    theta1: float  # theta1 > theta0, counterclockwise

    kind = "arc"


@dataclass(frozen=True)
class SegmentPiece:
    p0: tuple
    p1: tuple
    h: float  # signed distance of the supporting line from the site

    kind = "segment"


@dataclass(frozen=True, eq=False)
class RestrictedCell:
    site: np.ndarray
    radius: float
    normals: np.ndarray
    offsets: np.ndarray
    chain: Optional[tuple] = None  # planar cells only, local coordinates
    empty: bool = False

    @property
    def dim(self) -> int:
        return len(self.site)

    def contains(self, y) -> np.ndarray:
        z = np.atleast_2d(np.asarray(y, dtype=float)) - self.site
        inside = np.sum(z * z, axis=1) <= self.radius**2
        if len(self.offsets):
            inside &= np.all(z @ self.normals.T <= self.offsets, axis=1)
        return inside

    def to_json(self) -> dict:
        x = self.site
        pieces = []
        for p in self.chain or ():
            if isinstance(p, ArcPiece):
                pieces.append({
                    "type": "arc",
                    "center": x.tolist(),
                    "radius": self.radius,
                    "theta": [p.theta0, p.theta1],
                    "start": (x + self.radius * np.array([math.cos(p.theta0), math.sin(p.theta0)])).tolist(),
                    "end": (x + self.radius * np.array([math.cos(p.theta1), math.sin(p.theta1)])).tolist(),
                })
            else:
                pieces.append({
                    "type": "segment",
                    "start": (x + np.array(p.p0)).tolist(),
                    "end": (x + np.array(p.p1)).tolist(),
                })
        return {
            "site": x.tolist(),
            "radius": self.radius,
            "empty": self.empty,
            "constraints": [
                {"normal": e.tolist(), "offset": float(h)} for e, h in zip(self.normals, self.offsets)
            ],
            "boundary": pieces,
        }


def half_planes(x, neighbors, R: float) -> tuple[np.ndarray, np.ndarray]:
    """Bisector constraints that can cut ``B(x, R)``, in the given neighbour order."""
    x = np.asarray(x, dtype=float)
    nb = np.asarray(neighbors, dtype=float).reshape(-1, len(x))
    diff = nb - x
    dist = np.linalg.norm(diff, axis=1)
    ok = dist > 0
    diff, dist = diff[ok], dist[ok]
    h = dist / 2
    keep = h < R * (1 - REL_EPS)  # near-tangent bisectors do not cut
    # distinct neighbours give distinct bisectors; drop repeated points only
    e = diff[keep] / dist[keep, None]
    h = h[keep]
    if len(h):
        _, first = np.unique(np.round(np.c_[e, h] / (R * REL_EPS)), axis=0, return_index=True)
        first = np.sort(first)
        e, h = e[first], h[first]
    return e, h


def _square(half: float) -> list:
    return [(-half, -half), (half, -half), (half, half), (-half, half)]


def clip_polygon(poly: list, ex: float, ey: float, h: float, eps: float) -> list:
    """Clip a convex CCW polygon to ``<z, e> <= h``; no-op if the line misses it."""
    dist = [px * ex + py * ey - h for px, py in poly]
    if max(dist) <= eps:
        return poly
    out = []
    n = len(poly)
    for i in range(n):
        px, py = poly[i - 1]
        qx, qy = poly[i]
        dp, dq = dist[i - 1], dist[i]
        q_in, p_in = dq <= eps, dp <= eps
        if q_in != p_in:
            t = dp / (dp - dq)
            out.append((px + t * (qx - px), py + t * (qy - py)))
        if q_in:
            out.append((qx, qy))
    # merge coincident vertices created by grazing cuts
    merged = []
    for v in out:
        if not merged or abs(v[0] - merged[-1][0]) + abs(v[1] - merged[-1][1]) > eps:
            merged.append(v)
    while len(merged) > 1 and abs(merged[0][0] - merged[-1][0]) + abs(merged[0][1] - merged[-1][1]) <= eps:
        merged.pop()
    return merged


def disk_polygon_chain(poly: list, R: float, eps: float) -> tuple:
    """Boundary of ``poly & B(0, R)`` as arcs and segments, counterclockwise.

    The polygon must be convex and contain the origin.
    """
    segs = []
    n = len(poly)
    for i in range(n):
        px, py = poly[i]
        qx, qy = poly[(i + 1) % n]
        dx, dy = qx - px, qy - py
        a = dx * dx + dy * dy
        if a == 0.0:
            continue
        b = px * dx + py * dy
        c = px * px + py * py - R * R
        disc = b * b - a * c
        if disc <= 0:
            continue
        sq = math.sqrt(disc)
        lo = max(0.0, (-b - sq) / a)
        hi = min(1.0, (-b + sq) / a)
        length = math.sqrt(a)
        if (hi - lo) * length <= eps:
            continue
        h = (px * dy - py * dx) / length
        segs.append(SegmentPiece((px + lo * dx, py + lo * dy), (px + hi * dx, py + hi * dy), h))
    if not segs:
        return (ArcPiece(0.0, 2 * math.pi),)
    chain = []
    for i, s in enumerate(segs):
        chain.append(s)
        nxt = segs[(i + 1) % len(segs)]
        ex, ey = s.p1
        sx, sy = nxt.p0
        if abs(ex - sx) + abs(ey - sy) > eps:
            t0 = math.atan2(ey, ex)
            t1 = math.atan2(sy, sx)
            if t1 <= t0:
                t1 += 2 * math.pi
            chain.append(ArcPiece(t0, t1))
    return tuple(chain)


def cell_polygon(normals: np.ndarray, offsets: np.ndarray, bound: float) -> list:
    """Intersection of the half-planes with the square ``[-bound, bound]^2``."""
    eps = REL_EPS * bound
    poly = _square(bound)
    for (ex, ey), h in zip(normals.tolist(), offsets.tolist()):
        poly = clip_polygon(poly, ex, ey, h, eps)
        if len(poly) < 3:
            return []
    return poly


def build_cell(x, neighbors, R: float) -> RestrictedCell:
    if R <= 0:
        raise PreconditionError("R must be positive")
    x = np.asarray(x, dtype=float)
    e, h = half_planes(x, neighbors, R)
    chain = None
    empty = False
    if len(x) == 2:
        poly = cell_polygon(e, h, 1.25 * R)
        if len(poly) < 3:
            chain, empty = (), True
        else:
            chain = disk_polygon_chain(poly, R, REL_EPS * R)
    return RestrictedCell(x, float(R), e, h, chain, empty)


# ----------------------------------------------------------------------
# moments


@dataclass(frozen=True, eq=False)
class MomentTable:
    """``m_alpha = int_cell (y - x)^alpha dy`` grouped by total degree."""

    site: np.ndarray
    s_max: int
    values: dict
    stderr: Optional[dict] = None

    def tensor(self, s: int) -> SymTensor:
        return SymTensor(len(self.site), s, self.values[s])

    def __getitem__(self, alpha) -> float:
        alpha = tuple(alpha)
        deg = sum(alpha)
        return float(self.values[deg][multi_indices(len(self.site), deg).index(alpha)])

    def error(self, alpha) -> float:
        alpha = tuple(alpha)
        deg = sum(alpha)
        return float(self.stderr[deg][multi_indices(len(self.site), deg).index(alpha)])


@lru_cache(maxsize=None)
def _gauss01(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


def _trig_antiderivatives(theta: np.ndarray, deg_max: int) -> dict:
    """``F[a, b](theta)`` with ``F' = cos^a sin^b`` for ``a + b <= deg_max``.

    Built from the usual reduction formulas in the cosine exponent, and in
    the sine exponent when the cosine exponent is zero.
    """
    c, s = np.cos(theta), np.sin(theta)
    F = {(0, 0): theta.copy()}
    for b in range(1, deg_max + 1):
        if b == 1:
            F[0, 1] = -c
        else:
            F[0, b] = -(s ** (b - 1)) * c / b + (b - 1) / b * F[0, b - 2]
    for b in range(0, deg_max):
        F[1, b] = s ** (b + 1) / (b + 1)
    for a in range(2, deg_max + 1):
        for b in range(0, deg_max - a + 1):
            F[a, b] = c ** (a - 1) * s ** (b + 1) / (a + b) + (a - 1) / (a + b) * F[a - 2, b]
    return F


def chain_moments(chain: Sequence, R: float, degrees: Sequence[int]) -> dict:
    """Planar monomial moments of the region bounded by ``chain``.

    Uses ``int z^alpha dA = (|alpha| + 2)^-1 * oint z^alpha <z, n> dl``;
    on a bisector piece ``<z, n> = h`` and on an arc ``<z, n> = R``.
    """
    out = {}
    segs = [p for p in chain if isinstance(p, SegmentPiece)]
    arcs = [p for p in chain if isinstance(p, ArcPiece)]
    deg_max = max(degrees)
    if segs:
        p0 = np.array([p.p0 for p in segs])
        p1 = np.array([p.p1 for p in segs])
        hh = np.array([p.h for p in segs])
        length = np.linalg.norm(p1 - p0, axis=1)
        t, w = _gauss01(deg_max // 2 + 1)
        z = (p0[:, None, :] + t[None, :, None] * (p1 - p0)[:, None, :]).reshape(-1, 2)
        wz = (hh * length)[:, None] * w[None, :]
        wz = wz.reshape(-1)
    if arcs:
        th0 = np.array([p.theta0 for p in arcs])
        th1 = np.array([p.theta1 for p in arcs])
        F0 = _trig_antiderivatives(th0, deg_max)
        F1 = _trig_antiderivatives(th1, deg_max)
    for deg in degrees:
        total = np.zeros(deg + 1)
        if segs:
            total += wz @ monomials(z, deg)
        if arcs:
            for i, (a, b) in enumerate(multi_indices(2, deg)):
                total[i] += R ** (deg + 2) * float(np.sum(F1[a, b] - F0[a, b]))
        out[deg] = total / (deg + 2)
    return out


def moments_exact_2d(cell: RestrictedCell, s_max: int, max_degree: int = DEFAULT_MAX_DEGREE) -> MomentTable:
    if cell.dim != 2:
        raise PreconditionError("exact moments are planar only")
    if s_max > max_degree or s_max < 0:
        raise PreconditionError(f"moment degree {s_max} outside supported range 0..{max_degree}")
    degrees = list(range(s_max + 1))
    if cell.empty:
        values = {k: np.zeros(k + 1) for k in degrees}
    else:
        values = chain_moments(cell.chain, cell.radius, degrees)
    return MomentTable(cell.site, s_max, values)


def philox(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *stream)``."""
    key = np.random.SeedSequence([int(seed), *map(int, stream)]).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def moments_mc(
    region_predicate: Callable[[np.ndarray], np.ndarray],
    bounding_box,
    s_max: int,
    n: int,
    seed: int,
    origin=None,
    stream: Sequence[int] = (),
) -> MomentTable:
    """Monte Carlo moments about ``origin`` with standard errors.

    ``region_predicate`` maps an (m, d) array of absolute points to a mask.
    """
    if n < 1:
        raise PreconditionError("n must be at least 1")
    lo, hi = (np.asarray(b, dtype=float) for b in bounding_box)
    vol = float(np.prod(hi - lo))
    if not vol > 0:
        raise PreconditionError("bounding box has zero volume")
    d = len(lo)
    origin = np.zeros(d) if origin is None else np.asarray(origin, dtype=float)
    rng = philox(seed, *stream)
    sums = {k: np.zeros(len(multi_indices(d, k))) for k in range(s_max + 1)}
    sq = {k: np.zeros_like(v) for k, v in sums.items()}
    done = 0
    while done < n:
        m = min(_MC_BATCH, n - done)
        y = lo + (hi - lo) * rng.random((m, d))
        inside = np.asarray(region_predicate(y), dtype=bool)
        z = y[inside] - origin
        for k in sums:
            f = monomials(z, k) if len(z) else np.zeros((0, len(sums[k])))
            sums[k] += f.sum(axis=0)
            sq[k] += (f * f).sum(axis=0)
        done += m
    values, errs = {}, {}
    for k in sums:
        mean = sums[k] / n
        var = np.maximum(sq[k] / n - mean**2, 0.0) * n / max(n - 1, 1)
        values[k] = vol * mean
        errs[k] = vol * np.sqrt(var / n)
    return MomentTable(origin, s_max, values, errs)


# ----------------------------------------------------------------------
# per-sample cell engine


@dataclass
class CellStats:
    count: int = 0
    empty: int = 0
    constraints: int = 0

    @property
    def mean_constraints(self) -> float:
        return self.constraints / self.count if self.count else 0.0

    def to_json(self) -> dict:
        return {"count": self.count, "empty": self.empty, "mean_constraints": self.mean_constraints}


@dataclass
class VoronoiCells:
    """Neighbour search and cell construction for every site of a sample."""

    points: np.ndarray
    spacing_hint: Optional[float] = None
    index: SpatialHash = field(init=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        n, d = self.points.shape
        if self.spacing_hint is None:
            ext = np.ptp(self.points, axis=0) if n > 1 else np.ones(d)
            ext = np.where(ext > 0, ext, 1.0)
            self.spacing_hint = float((np.prod(ext) / max(n, 1)) ** (1 / d))
        self.index = SpatialHash(self.points, 3 * self.spacing_hint)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def _constraints(self, i: int, idx: np.ndarray):
        idx = idx[idx != i]
        diff = self.points[idx] - self.points[i]
        dist = np.linalg.norm(diff, axis=1)
        order = np.lexsort((idx, dist))
        return diff[order] / dist[order, None], dist[order] / 2

    def constraints(self, i: int, R: float) -> tuple[np.ndarray, np.ndarray]:
        """All bisectors of neighbours within 2R that reach into ``B(x, R)``."""
        e, h = self._constraints(i, self.index.query(self.points[i], 2 * R))
        keep = h < R * (1 - REL_EPS)
        return e[keep], h[keep]

    def polygon(self, i: int, R_max: float) -> tuple[list, int]:
        """Planar Voronoi polygon of site ``i``, exact inside ``B(x, R_max)``.

        Neighbours are fetched in growing shells; a site farther than twice
        the current cell radius has a bisector that cannot reach the cell.
        Returns the polygon (local coordinates) and the number of cuts.
        """
        x = self.points[i]
        bound = 1.25 * R_max
        eps = REL_EPS * bound
        poly = _square(bound)
        r_q = min(2 * R_max, 3 * self.spacing_hint)
        inner = -1.0
        cuts = 0
        while True:
            e, h = self._constraints(i, self.index.query(x, r_q, inner))
            keep = h < R_max * (1 - REL_EPS)
            e, h = e[keep], h[keep]
            while len(h):
                verts = np.array(poly)
                reach = (verts @ e.T - h).max(axis=0)
                live = reach > eps
                if not live.any():
                    break
                e, h = e[live], h[live]
                poly = clip_polygon(poly, e[0, 0], e[0, 1], h[0], eps)
                cuts += 1
                e, h = e[1:], h[1:]
                if len(poly) < 3:
                    return [], cuts
            rho = min(R_max, max(math.hypot(px, py) for px, py in poly))
            if 2 * rho <= r_q or r_q >= 2 * R_max:
                return poly, cuts
            inner, r_q = r_q, min(2 * rho, 2 * R_max)

    def cell(self, i: int, R: float) -> RestrictedCell:
        e, h = self.constraints(i, R)
        return build_cell_from_constraints(self.points[i], e, h, R)


def build_cell_from_constraints(x, e, h, R) -> RestrictedCell:
    chain, empty = None, False
    if len(x) == 2:
        poly = cell_polygon(e, h, 1.25 * R)
        if len(poly) < 3:
            chain, empty = (), True
        else:
            chain = disk_polygon_chain(poly, R, REL_EPS * R)
    return RestrictedCell(np.asarray(x, dtype=float), float(R), e, h, chain, empty)
