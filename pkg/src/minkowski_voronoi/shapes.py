"""Analytic reference sets, lattice digitization and ground-truth tensors."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import NumericalError, PreconditionError
from .symtensor import SymTensor, monomials, sym_pow, sym_product_rows

INFINITE = math.inf

# quadrature resolution for the boundary oracle
_N_PERIODIC = 4096
_N_GAUSS = 48


def _kappa(j: int) -> float:
    return math.pi ** (j / 2) / math.gamma(j / 2 + 1)


def _omega(j: int) -> float:
    return j * _kappa(j)


def _rot(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


def _as_points(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    return np.atleast_2d(arr), arr.ndim == 1


class Shape:
    """Common interface of the reference sets."""

    kind: str = ""

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def contains(self, x) -> np.ndarray | bool:
        pts, single = _as_points(x)
        out = self._contains(pts)
        return bool(out[0]) if single else out

    def _contains(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def projection(self, x) -> tuple[np.ndarray, bool]:
        """Nearest point of the shape and whether it is non-unique."""
        raise NotImplementedError

    def project(self, x) -> np.ndarray:
        return self.projection(x)[0]

    def distance(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.array([np.linalg.norm(p - self.project(p)) for p in pts])

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    @property
    def reach(self) -> float:
        raise NotImplementedError

    @property
    def reach_complement(self) -> float:
        """Reach of the closure of the complement."""
        raise NotImplementedError

    @property
    def regularity(self) -> float:
        """Largest delta for which the shape is delta-regular (0 if none)."""
        return min(self.reach, self.reach_complement)

    def boundary_points(self, spacing: float) -> np.ndarray:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Disk(Shape):
    """Euclidean ball; ``len(center)`` fixes the dimension."""

    center: tuple
    radius: float
    kind: str = field(default="disk", init=False)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.radius <= 0:
            raise PreconditionError("disk radius must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    def _contains(self, pts):
        return np.sum((pts - np.array(self.center)) ** 2, axis=1) <= self.radius**2

    def projection(self, x):
        x = np.asarray(x, dtype=float)
        c = np.array(self.center)
        v = x - c
        n = np.linalg.norm(v)
        if n <= self.radius:
            return x.copy(), False
        return c + v * (self.radius / n), False

    def distance(self, pts):
        pts = np.atleast_2d(pts)
        return np.maximum(np.linalg.norm(pts - np.array(self.center), axis=1) - self.radius, 0.0)

    def bbox(self):
        c = np.array(self.center)
        return c - self.radius, c + self.radius

    @property
    def reach(self):
        return INFINITE

    @property
    def reach_complement(self):
        return self.radius

    def boundary_points(self, spacing):
        if self.dim != 2:
            return _projected_grid_boundary(self, spacing)
        n = max(8, math.ceil(2 * math.pi * self.radius / spacing))
        t = 2 * math.pi * np.arange(n) / n
        return np.array(self.center) + self.radius * np.stack([np.cos(t), np.sin(t)], axis=1)

    def to_json(self):
        return {"kind": "disk", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Ellipse(Shape):
    center: tuple
    semi_axes: tuple
    rotation: float = 0.0
    kind: str = field(default="ellipse", init=False)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "semi_axes", tuple(float(c) for c in self.semi_axes))
        if len(self.center) != 2 or len(self.semi_axes) != 2:
            raise PreconditionError("ellipse is planar")
        if min(self.semi_axes) <= 0:
            raise PreconditionError("semi-axes must be positive")

    @property
    def dim(self):
        return 2

    def _local(self, pts):
        return (pts - np.array(self.center)) @ _rot(self.rotation)

    def _contains(self, pts):
        q = self._local(pts)
        a, b = self.semi_axes
        return (q[:, 0] / a) ** 2 + (q[:, 1] / b) ** 2 <= 1.0

    def projection(self, x):
        x = np.asarray(x, dtype=float)
        if self._contains(x[None, :])[0]:
            return x.copy(), False
        a, b = self.semi_axes
        q = self._local(x[None, :])[0]
        u, v = abs(q[0]), abs(q[1])

        def f(t):
            return (a * u / (t + a * a)) ** 2 + (b * v / (t + b * b)) ** 2 - 1.0

        def df(t):
            return -2 * (a * u) ** 2 / (t + a * a) ** 3 - 2 * (b * v) ** 2 / (t + b * b) ** 3

        m = max(a, b)
        lo, hi = 0.0, m * math.hypot(u, v) + m * m
        t = 0.5 * (lo + hi)
        for _ in range(100):
            ft = f(t)
            if abs(ft) <= 1e-12:
                break
            if ft > 0:
                lo = t
            else:
                hi = t
            step = t - ft / df(t)
            t = step if lo < step < hi else 0.5 * (lo + hi)
        else:
            raise NumericalError("ellipse projection did not converge")
        foot = np.array([
            math.copysign(a * a * u / (t + a * a), q[0]),
            math.copysign(b * b * v / (t + b * b), q[1]),
        ])
        return np.array(self.center) + _rot(self.rotation) @ foot, False

    def bbox(self):
        a, b = self.semi_axes
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        hw = np.array([math.hypot(a * c, b * s), math.hypot(a * s, b * c)])
        return np.array(self.center) - hw, np.array(self.center) + hw

    @property
    def reach(self):
        return INFINITE

    @property
    def reach_complement(self):
        a, b = self.semi_axes
        return min(a, b) ** 2 / max(a, b)

    def _param(self, t):
        a, b = self.semi_axes
        rot = _rot(self.rotation)
        pts = np.stack([a * np.cos(t), b * np.sin(t)], axis=1) @ rot.T + np.array(self.center)
        nrm = np.stack([b * np.cos(t), a * np.sin(t)], axis=1)
        nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
        speed = np.sqrt((a * np.sin(t)) ** 2 + (b * np.cos(t)) ** 2)
        return pts, nrm @ rot.T, speed

    def boundary_points(self, spacing):
        n = max(8, math.ceil(2 * math.pi * max(self.semi_axes) / spacing))
        return self._param(2 * math.pi * np.arange(n) / n)[0]

    def to_json(self):
        return {
            "kind": "ellipse",
            "center": list(self.center),
            "semi_axes": list(self.semi_axes),
            "rotation": self.rotation,
        }


@dataclass(frozen=True)
class Rectangle(Shape):
    """Axis-aligned box ``[lo, hi]``; any dimension."""

    lo: tuple
    hi: tuple
    kind: str = field(default="rectangle", init=False)

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(c) for c in self.lo))
        object.__setattr__(self, "hi", tuple(float(c) for c in self.hi))
        if len(self.lo) != len(self.hi) or any(h <= l for l, h in zip(self.lo, self.hi)):
            raise PreconditionError("rectangle needs lo < hi componentwise")

    @property
    def dim(self):
        return len(self.lo)

    def _contains(self, pts):
        return np.all((pts >= np.array(self.lo)) & (pts <= np.array(self.hi)), axis=1)

    def projection(self, x):
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi), False

    def distance(self, pts):
        pts = np.atleast_2d(pts)
        return np.linalg.norm(pts - np.clip(pts, self.lo, self.hi), axis=1)

    def bbox(self):
        return np.array(self.lo), np.array(self.hi)

    @property
    def sides(self) -> np.ndarray:
        return np.array(self.hi) - np.array(self.lo)

    @property
    def reach(self):
        return INFINITE

    @property
    def reach_complement(self):
        return 0.0

    def _corners(self):
        (x0, y0), (x1, y1) = self.lo, self.hi
        return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])

    def boundary_points(self, spacing):
        if self.dim != 2:
            return _projected_grid_boundary(self, spacing)
        c = self._corners()
        out = []
        for i in range(4):
            p, q = c[i], c[(i + 1) % 4]
            n = max(1, math.ceil(np.linalg.norm(q - p) / spacing))
            t = np.arange(n)[:, None] / n
            out.append(p + t * (q - p))
        return np.vstack(out)

    def to_json(self):
        return {"kind": "rectangle", "lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class Annulus(Shape):
    center: tuple
    inner: float
    outer: float
    kind: str = field(default="annulus", init=False)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 2:
            raise PreconditionError("annulus is planar")
        if not 0 < self.inner < self.outer:
            raise PreconditionError("annulus needs 0 < inner < outer")

    @property
    def dim(self):
        return 2

    def _contains(self, pts):
        r2 = np.sum((pts - np.array(self.center)) ** 2, axis=1)
        return (r2 >= self.inner**2) & (r2 <= self.outer**2)

    def projection(self, x):
        x = np.asarray(x, dtype=float)
        c = np.array(self.center)
        v = x - c
        n = np.linalg.norm(v)
        if n == 0.0:
            return c + np.array([self.inner, 0.0]), True
        if n < self.inner:
            return c + v * (self.inner / n), False
        if n > self.outer:
            return c + v * (self.outer / n), False
        return x.copy(), False

    def distance(self, pts):
        n = np.linalg.norm(np.atleast_2d(pts) - np.array(self.center), axis=1)
        return np.maximum(np.maximum(self.inner - n, n - self.outer), 0.0)

    def bbox(self):
        c = np.array(self.center)
        return c - self.outer, c + self.outer

    @property
    def reach(self):
        return self.inner

    @property
    def reach_complement(self):
        return (self.outer - self.inner) / 2

    def boundary_points(self, spacing):
        out = []
        for rad in (self.outer, self.inner):
            n = max(8, math.ceil(2 * math.pi * rad / spacing))
            t = 2 * math.pi * np.arange(n) / n
            out.append(np.array(self.center) + rad * np.stack([np.cos(t), np.sin(t)], axis=1))
        return np.vstack(out)

    def to_json(self):
        return {
            "kind": "annulus",
            "center": list(self.center),
            "inner": self.inner,
            "outer": self.outer,
        }


def _projected_grid_boundary(shape: Shape, spacing: float) -> np.ndarray:
    # grid around the shape pushed onto it; covers the boundary in any dimension
    lo, hi = shape.bbox()
    axes = [np.arange(l - spacing, h + 2 * spacing, spacing) for l, h in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
    grid = grid[~shape.contains(grid)]
    return np.array([shape.project(g) for g in grid])


def shape_from_json(obj: dict | str) -> Shape:
    if isinstance(obj, str):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or "kind" not in obj:
        raise PreconditionError("shape JSON needs a 'kind' field")
    kind = obj["kind"]
    try:
        if kind == "disk":
            return Disk(tuple(obj.get("center", (0.0, 0.0))), float(obj["radius"]))
        if kind == "ellipse":
            return Ellipse(
                tuple(obj.get("center", (0.0, 0.0))),
                tuple(obj["semi_axes"]),
                float(obj.get("rotation", 0.0)),
            )
        if kind == "rectangle":
            return Rectangle(tuple(obj["lo"]), tuple(obj["hi"]))
        if kind == "annulus":
            return Annulus(
                tuple(obj.get("center", (0.0, 0.0))), float(obj["inner"]), float(obj["outer"])
            )
    except KeyError as exc:
        raise PreconditionError(f"shape '{kind}' is missing parameter {exc}") from None
    raise PreconditionError(f"unknown shape kind {kind!r}")


# ----------------------------------------------------------------------
# lattices and samples


@dataclass(frozen=True)
class Lattice:
    """Cubic lattice ``a Z^d + offset``."""

    spacing: float
    offset: tuple
    dim: int = 2

    def __post_init__(self):
        if self.spacing <= 0:
            raise PreconditionError("lattice spacing must be positive")
        off = tuple(float(o) for o in self.offset) if self.offset is not None else (0.0,) * self.dim
        if len(off) != self.dim:
            raise PreconditionError("offset length must equal dimension")
        object.__setattr__(self, "offset", off)

    @classmethod
    def cubic(cls, spacing: float, dim: int = 2, offset=None) -> Lattice:
        return cls(spacing, offset if offset is not None else (0.0,) * dim, dim)

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def circumradius(self) -> float:
        """Radius C of the unit lattice cell, ``V_0 in B(0, C)``."""
        return math.sqrt(self.dim) / 2

    @property
    def covering_radius(self) -> float:
        return self.spacing * self.circumradius

    def indices(self, pts: np.ndarray) -> np.ndarray:
        return np.rint((np.atleast_2d(pts) - np.array(self.offset)) / self.spacing).astype(np.int64)

    def points(self, idx: np.ndarray) -> np.ndarray:
        return np.array(self.offset) + self.spacing * np.asarray(idx, dtype=float)


def _lexsort_rows(pts: np.ndarray) -> np.ndarray:
    return np.lexsort(pts.T[::-1]) if len(pts) else np.arange(0)


@dataclass(frozen=True, eq=False)
class PointSample:
    """Finite point set, lexicographically ordered and duplicate free."""

    points: np.ndarray
    lattice: Optional[Lattice] = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(0, 2) if pts.size == 0 else pts[None, :]
        if len(pts):
            pts = pts[_lexsort_rows(pts)]
            keep = np.ones(len(pts), dtype=bool)
            keep[1:] = np.any(np.diff(pts, axis=0) != 0, axis=1)
            pts = pts[keep]
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, mask: np.ndarray) -> PointSample:
        return PointSample(self.points[mask], self.lattice)

    def translated(self, t) -> PointSample:
        lat = None
        if self.lattice is not None:
            lat = Lattice(self.lattice.spacing, tuple(np.array(self.lattice.offset) + t), self.dim)
        return PointSample(self.points + np.asarray(t, dtype=float), lat)

    def to_json(self) -> dict:
        lat = self.lattice
        return {
            "a": lat.spacing if lat else None,
            "offset": list(lat.offset) if lat else None,
            "d": self.dim,
            "points": self.points.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> PointSample:
        d = int(obj["d"])
        pts = np.array(obj["points"], dtype=float).reshape(-1, d)
        lat = None
        if obj.get("a") is not None:
            lat = Lattice(float(obj["a"]), tuple(obj.get("offset") or (0.0,) * d), d)
        return cls(pts, lat)


def digitize(shape: Shape, lattice: Lattice, window=None) -> PointSample:
    """All lattice points of ``window`` that lie in the shape."""
    lo_s, hi_s = shape.bbox()
    if window is None:
        lo, hi = lo_s - lattice.spacing, hi_s + lattice.spacing
    else:
        lo, hi = (np.asarray(w, dtype=float) for w in window)
        if np.any(lo_s < lo) or np.any(hi_s > hi):
            raise PreconditionError(
                f"window [{lo.tolist()}, {hi.tolist()}] does not contain the shape "
                f"bounding box [{lo_s.tolist()}, {hi_s.tolist()}]"
            )
    if lattice.dim != shape.dim:
        raise PreconditionError("lattice and shape dimensions differ")
    off = np.array(lattice.offset)
    kmin = np.ceil((lo - off) / lattice.spacing - 1e-9).astype(int)
    kmax = np.floor((hi - off) / lattice.spacing + 1e-9).astype(int)
    axes = [np.arange(a, b + 1) for a, b in zip(kmin, kmax)]
    idx = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, shape.dim)
    pts = lattice.points(idx)
    return PointSample(pts[shape.contains(pts)], lattice)


def hausdorff_to_sample(shape: Shape, sample: PointSample, boundary_density: float) -> float:
    """Upper estimate of the Hausdorff distance between shape and sample.

    Probes the shape with boundary points at the given spacing plus an
    interior grid of the same spacing; refining the density makes the
    estimate increase towards the true distance.
    """
    if len(sample) == 0:
        raise PreconditionError("sample is empty")
    outside = float(np.max(shape.distance(sample.points)))
    lo, hi = shape.bbox()
    axes = [np.arange(l, h + boundary_density, boundary_density) for l, h in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, shape.dim)
    probes = np.vstack([shape.boundary_points(boundary_density), grid[shape.contains(grid)]])
    dist, _ = cKDTree(sample.points).query(probes)
    return max(outside, float(np.max(dist)))


# ----------------------------------------------------------------------
# PBM for planar samples


def write_pbm(sample: PointSample, path, window=None) -> Path:
    """Write a P1 bitmap plus sidecar ``<path>.json`` with (a, offset, window)."""
    if sample.dim != 2 or sample.lattice is None:
        raise PreconditionError("PBM export needs a planar lattice sample")
    lat = sample.lattice
    idx = lat.indices(sample.points)
    if window is None:
        kmin, kmax = idx.min(axis=0), idx.max(axis=0)
        window = (lat.points(kmin).tolist(), lat.points(kmax).tolist())
    else:
        kmin = np.ceil((np.asarray(window[0]) - lat.offset) / lat.spacing - 1e-9).astype(int)
        kmax = np.floor((np.asarray(window[1]) - lat.offset) / lat.spacing + 1e-9).astype(int)
    w, h = (kmax - kmin + 1).tolist()
    img = np.zeros((h, w), dtype=np.uint8)
    img[kmax[1] - idx[:, 1], idx[:, 0] - kmin[0]] = 1
    path = Path(path)
    lines = ["P1", f"{w} {h}"] + [" ".join(str(v) for v in row) for row in img]
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    header = {"a": lat.spacing, "offset": list(lat.offset), "window": [list(window[0]), list(window[1])]}
    Path(str(path) + ".json").write_text(json.dumps(header, indent=2), encoding="utf-8")
    return path


def read_pbm(path) -> PointSample:
    path = Path(path)
    header = json.loads(Path(str(path) + ".json").read_text(encoding="utf-8"))
    tokens = []
    for line in path.read_text(encoding="ascii").splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if not tokens or tokens[0] != "P1":
        raise PreconditionError(f"{path} is not a P1 bitmap")
    w, h = int(tokens[1]), int(tokens[2])
    bits = "".join(tokens[3:])
    img = np.array([int(c) for c in bits[: w * h]], dtype=np.uint8).reshape(h, w)
    lat = Lattice(float(header["a"]), tuple(header["offset"]), 2)
    kmin = np.ceil((np.asarray(header["window"][0]) - lat.offset) / lat.spacing - 1e-9).astype(int)
    rows, cols = np.nonzero(img)
    idx = np.stack([kmin[0] + cols, kmin[1] + (h - 1 - rows)], axis=1)
    return PointSample(lat.points(idx), lat)


# ----------------------------------------------------------------------
# ground truth


def _intrinsic_volumes(shape: Shape) -> Optional[list[float]]:
    d = shape.dim
    if isinstance(shape, Disk):
        return [math.comb(d, k) * _kappa(d) / _kappa(d - k) * shape.radius**k for k in range(d + 1)]
    if isinstance(shape, Rectangle):
        sides = shape.sides
        out = [0.0] * (d + 1)
        # elementary symmetric polynomials of the side lengths
        e = np.zeros(d + 1)
        e[0] = 1.0
        for side in sides:
            e[1:] = e[1:] + side * e[:-1]
        out = e.tolist()
        return out
    if isinstance(shape, Annulus):
        ro, ri = shape.outer, shape.inner
        return [0.0, math.pi * (ro + ri), math.pi * (ro * ro - ri * ri)]
    if isinstance(shape, Ellipse):
        a, b = shape.semi_axes
        return [1.0, None, math.pi * a * b]
    return None


def _gauss(n: int, lo: float, hi: float):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


def volume_tensor_quadrature(shape: Shape, r: int) -> SymTensor:
    """``(1/r!) int_K x^r dx`` by tensor-product quadrature, exact for polynomials."""
    d = shape.dim
    n_rad = max(_N_GAUSS, r + 2)
    if isinstance(shape, Rectangle):
        nodes = [_gauss(n_rad, l, h) for l, h in zip(shape.lo, shape.hi)]
        pts = np.stack(np.meshgrid(*[n[0] for n in nodes], indexing="ij"), -1).reshape(-1, d)
        w = np.prod(np.stack(np.meshgrid(*[n[1] for n in nodes], indexing="ij"), -1).reshape(-1, d), axis=1)
    elif d == 2 and isinstance(shape, (Disk, Ellipse, Annulus)):
        if isinstance(shape, Disk):
            rho, wr = _gauss(n_rad, 0.0, shape.radius)
            lin = np.eye(2)
        elif isinstance(shape, Annulus):
            rho, wr = _gauss(n_rad, shape.inner, shape.outer)
            lin = np.eye(2)
        else:
            rho, wr = _gauss(n_rad, 0.0, 1.0)
            lin = _rot(shape.rotation) @ np.diag(shape.semi_axes)
        n_th = 2 * r + 64
        th = 2 * math.pi * np.arange(n_th) / n_th
        circ = np.stack([np.cos(th), np.sin(th)], axis=1)
        local = (rho[:, None, None] * circ[None, :, :]).reshape(-1, 2)
        pts = local @ lin.T + np.array(shape.center)
        w = np.repeat(wr * rho, n_th) * (2 * math.pi / n_th) * abs(np.linalg.det(lin))
    else:
        raise PreconditionError(f"no volume-tensor quadrature for {shape.kind} in R^{d}")
    coeffs = (w[:, None] * monomials(pts, r)).sum(axis=0) / math.factorial(r)
    return SymTensor(d, r, coeffs)


def support_quadrature(shape: Shape, k: int):
    """Weighted (point, normal) nodes representing the support measure of order k.

    Planar shapes only; k = 1 is half the boundary length, k = 0 the
    normalized turning measure (signed on concave arcs).
    """
    if shape.dim != 2 or k not in (0, 1):
        raise PreconditionError("support measures are tabulated for planar shapes, k in {0, 1}")
    n = _N_PERIODIC
    t = 2 * math.pi * np.arange(n) / n
    dt = 2 * math.pi / n
    circ = np.stack([np.cos(t), np.sin(t)], axis=1)
    if isinstance(shape, Disk):
        pts = np.array(shape.center) + shape.radius * circ
        w = np.full(n, 0.5 * shape.radius * dt if k == 1 else dt / (2 * math.pi))
        return pts, circ, w
    if isinstance(shape, Annulus):
        c = np.array(shape.center)
        po, pi_ = c + shape.outer * circ, c + shape.inner * circ
        if k == 1:
            wo, wi = np.full(n, 0.5 * shape.outer * dt), np.full(n, 0.5 * shape.inner * dt)
        else:
            wo, wi = np.full(n, dt / (2 * math.pi)), np.full(n, -dt / (2 * math.pi))
        return np.vstack([po, pi_]), np.vstack([circ, -circ]), np.concatenate([wo, wi])
    if isinstance(shape, Ellipse):
        pts, nrm, speed = shape._param(t)
        if k == 1:
            w = 0.5 * speed * dt
        else:
            a, b = shape.semi_axes
            w = a * b / ((a * np.sin(t)) ** 2 + (b * np.cos(t)) ** 2) * dt / (2 * math.pi)
        return pts, nrm, w
    if isinstance(shape, Rectangle):
        c = shape._corners()
        normals = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
        pts, nrm, ws = [], [], []
        for i in range(4):
            if k == 1:
                p, q = c[i], c[(i + 1) % 4]
                s, w = _gauss(_N_GAUSS, 0.0, 1.0)
                pts.append(p + s[:, None] * (q - p))
                nrm.append(np.repeat(normals[i][None, :], len(s), axis=0))
                ws.append(0.5 * np.linalg.norm(q - p) * w)
            else:
                # corner i joins edge i-1 (normal angle i*pi/2 - pi) and edge i
                th0 = (i - 1) * math.pi / 2 - math.pi / 2
                th, w = _gauss(_N_GAUSS, th0, th0 + math.pi / 2)
                pts.append(np.repeat(c[i][None, :], len(th), axis=0))
                nrm.append(np.stack([np.cos(th), np.sin(th)], axis=1))
                ws.append(w / (2 * math.pi))
        return np.vstack(pts), np.vstack(nrm), np.concatenate(ws)
    raise PreconditionError(f"no support quadrature for {shape.kind}")


def minkowski_tensor_quadrature(shape: Shape, k: int, r: int, s: int) -> SymTensor:
    """Surface-type Minkowski tensor from the boundary quadrature oracle."""
    d = shape.dim
    pts, nrm, w = support_quadrature(shape, k)
    rows = sym_product_rows(monomials(pts, r), monomials(nrm, s), d, r, s)
    total = (w[:, None] * rows).sum(axis=0)
    scale = _omega(d - k) / _omega(d - k + s) / (math.factorial(r) * math.factorial(s))
    return SymTensor(d, r + s, total * scale)


def ground_truth_tagged(shape: Shape, k: int, r: int, s: int) -> tuple[SymTensor, str]:
    """Reference value of the Minkowski tensor and its provenance tag."""
    d = shape.dim
    if not 0 <= k <= d or r < 0 or s < 0:
        raise PreconditionError(f"invalid (k, r, s) = ({k}, {r}, {s})")
    if k == d and s >= 1:
        return SymTensor.zeros(d, r + s), "analytic"
    if r == 0 and s == 0:
        iv = _intrinsic_volumes(shape)
        if iv is not None and iv[k] is not None:
            return SymTensor.scalar(iv[k], d), "analytic"
    if isinstance(shape, Disk) and k == d and r <= 2:
        c = np.array(shape.center)
        vol = _kappa(d) * shape.radius**d
        if r == 0:
            return SymTensor.scalar(vol, d), "analytic"
        if r == 1:
            return sym_pow(c, 1) * vol, "analytic"
        second = _kappa(d) * shape.radius ** (d + 2) / (d + 2)
        return (sym_pow(c, 2) * vol + SymTensor.identity(d) * second) * 0.5, "analytic"
    if k == d:
        return volume_tensor_quadrature(shape, r), "derived"
    if d == 2:
        return minkowski_tensor_quadrature(shape, k, r, s), "derived"
    raise PreconditionError(f"no ground truth for {shape.kind} in R^{d} at (k, r, s) = ({k}, {r}, {s})")


def ground_truth(shape: Shape, k: int, r: int, s: int) -> SymTensor:
    return ground_truth_tagged(shape, k, r, s)[0]
