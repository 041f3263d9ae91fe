"""Voronoi tensor measures assembled from per-site cell moments.

The region indicator is evaluated at the site: inside ``V_x`` the nearest
sample point is ``x`` itself, so restricting to ``A`` just selects sites.
"""

from __future__ import annotations

import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cells import (
    DEFAULT_MAX_DEGREE,
    REL_EPS,
    CellStats,
    VoronoiCells,
    chain_moments,
    disk_polygon_chain,
    philox,
)
from .errors import PreconditionError
from .shapes import PointSample
from .symtensor import SymTensor, monomials, multi_indices, sym_product_rows

DEFAULT_MC_N = 20000


@dataclass(frozen=True)
class RegionOfInterest:
    """Spatial part ``A`` times direction part ``D`` of a set in R^d x S^(d-1)."""

    kind: str = "all"  # all | ball | halfspace | box
    center: Optional[tuple] = None
    radius: Optional[float] = None
    normal: Optional[tuple] = None
    offset: Optional[float] = None
    lo: Optional[tuple] = None
    hi: Optional[tuple] = None
    cap_axis: Optional[tuple] = None
    cap_angle: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("all", "ball", "halfspace", "box"):
            raise PreconditionError(f"unknown region kind {self.kind!r}")
        need = {"ball": ("center", "radius"), "halfspace": ("normal", "offset"), "box": ("lo", "hi")}
        for name in need.get(self.kind, ()):
            if getattr(self, name) is None:
                raise PreconditionError(f"{self.kind} region needs '{name}'")
        if (self.cap_axis is None) != (self.cap_angle is None):
            raise PreconditionError("a direction cap needs both axis and angle")

    @property
    def full_sphere(self) -> bool:
        return self.cap_axis is None

    def spatial(self) -> RegionOfInterest:
        return RegionOfInterest(self.kind, self.center, self.radius, self.normal, self.offset, self.lo, self.hi)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        if self.kind == "all":
            return np.ones(len(pts), dtype=bool)
        if self.kind == "ball":
            return np.sum((pts - np.array(self.center)) ** 2, axis=1) <= self.radius**2
        if self.kind == "halfspace":
            return pts @ np.array(self.normal, dtype=float) <= self.offset
        return np.all((pts >= np.array(self.lo)) & (pts <= np.array(self.hi)), axis=1)

    def direction_contains(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        if self.full_sphere:
            return np.ones(len(u), dtype=bool)
        axis = np.array(self.cap_axis, dtype=float)
        axis /= np.linalg.norm(axis)
        return u @ axis >= math.cos(self.cap_angle)

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        for name in ("center", "radius", "normal", "offset", "lo", "hi"):
            v = getattr(self, name)
            if v is not None:
                out[name] = list(v) if isinstance(v, tuple) else v
        if not self.full_sphere:
            out["direction"] = {"kind": "cap", "axis": list(self.cap_axis), "angle": self.cap_angle}
        return out

    @classmethod
    def from_json(cls, obj) -> RegionOfInterest:
        if obj is None:
            return cls()
        if not isinstance(obj, dict):
            raise PreconditionError("region must be a JSON object")
        tup = lambda v: tuple(float(c) for c in v) if v is not None else None
        direction = obj.get("direction") or {}
        if direction and direction.get("kind", "cap") != "cap":
            raise PreconditionError("direction part must be a cap")
        return cls(
            kind=obj.get("kind", "all"),
            center=tup(obj.get("center")),
            radius=obj.get("radius"),
            normal=tup(obj.get("normal")),
            offset=obj.get("offset"),
            lo=tup(obj.get("lo")),
            hi=tup(obj.get("hi")),
            cap_axis=tup(direction.get("axis")),
            cap_angle=direction.get("angle"),
        )


ALL_SPACE = RegionOfInterest()


@dataclass(frozen=True, eq=False)
class MeasureValue:
    tensor: SymTensor
    R: float
    r: int
    s: int
    region: RegionOfInterest = ALL_SPACE
    method: str = "exact"
    stderr: Optional[SymTensor] = None
    variant: str = "voronoi"  # voronoi | shell | refined

    def to_json(self) -> dict:
        out = self.tensor.to_json()
        out["metadata"] = {
            "R": self.R,
            "r": self.r,
            "s": self.s,
            "region": self.region.to_json(),
            "method": self.method,
            "variant": self.variant,
            "stderr": self.stderr.to_json() if self.stderr is not None else None,
        }
        return out


# ----------------------------------------------------------------------
# per-site work


@dataclass
class _Job:
    cells: VoronoiCells
    radii: tuple
    s: int
    method: str
    mc_n: int
    seed: int
    shell: bool
    cap: Optional[RegionOfInterest]
    max_degree: int


_JOB: Optional[_Job] = None


def _init_worker(job: _Job) -> None:
    global _JOB
    _JOB = job


def _site_exact(job: _Job, i: int):
    """Moments of degree s for every radius; shells are (R) minus (R/2)."""
    r_all = job.radii + tuple(R / 2 for R in job.radii) if job.shell else job.radii
    R_max = max(r_all)
    poly, cuts = job.cells.polygon(i, R_max)
    ncoef = len(multi_indices(2, job.s))
    vals = np.zeros((len(r_all), ncoef))
    if poly:
        for k, R in enumerate(r_all):
            chain = disk_polygon_chain(poly, R, REL_EPS * R)
            vals[k] = chain_moments(chain, R, [job.s])[job.s]
    n = len(job.radii)
    if job.shell:
        vals = vals[:n] - vals[n:]
    return vals, None, cuts, not poly


def _site_mc(job: _Job, i: int):
    cells = job.cells
    x = cells.points[i]
    d = cells.dim
    R_max = max(job.radii)
    e, h = cells.constraints(i, R_max)
    rng = philox(job.seed, i)
    z = (2 * rng.random((job.mc_n, d)) - 1) * R_max
    vol = (2 * R_max) ** d
    norm = np.linalg.norm(z, axis=1)
    inside = np.all(z @ e.T <= h, axis=1) if len(h) else np.ones(len(z), dtype=bool)
    if job.cap is not None:
        u = z / np.where(norm > 0, norm, 1.0)[:, None]
        inside &= job.cap.direction_contains(u)
    mono = monomials(z, job.s)
    ncoef = mono.shape[1]
    vals = np.zeros((len(job.radii), ncoef))
    errs = np.zeros_like(vals)
    for k, R in enumerate(job.radii):
        sel = inside & (norm <= R)
        if job.shell:
            sel &= norm > R / 2
        f = np.where(sel[:, None], mono, 0.0)
        vals[k] = vol * f.mean(axis=0)
        errs[k] = vol * f.std(axis=0, ddof=1) / math.sqrt(job.mc_n) if job.mc_n > 1 else 0.0
    return vals, errs, len(h), False


def _run_chunk(indices: Sequence[int]):
    job = _JOB
    fn = _site_exact if job.method == "exact" else _site_mc
    return [fn(job, i) for i in indices]


def _chunks(indices: np.ndarray, n: int) -> list:
    size = max(1, math.ceil(len(indices) / n))
    return [indices[k : k + size].tolist() for k in range(0, len(indices), size)]


def site_moments(
    sample: PointSample,
    radii: Sequence[float],
    s: int,
    sites: Optional[np.ndarray] = None,
    method: str = "exact",
    shell: bool = False,
    cap: Optional[RegionOfInterest] = None,
    mc_n: int = DEFAULT_MC_N,
    seed: int = 0,
    threads: int = 1,
    max_degree: int = DEFAULT_MAX_DEGREE,
    cells: Optional[VoronoiCells] = None,
):
    """Degree-``s`` moments of the restricted cells of the selected sites.

    Returns ``(values, stderr, stats)`` where ``values`` has shape
    (n_sites, n_radii, n_coeffs) and ``stderr`` is None for exact runs.
    Cells are always clipped against every sample point.
    """
    if len(sample) == 0:
        raise PreconditionError("sample is empty")
    if min(radii) <= 0:
        raise PreconditionError("radii must be positive")
    if method not in ("exact", "mc"):
        raise PreconditionError(f"unknown method {method!r}")
    if method == "exact":
        if sample.dim != 2:
            raise PreconditionError("the exact method is planar; use method='mc' in R^%d" % sample.dim)
        if s > max_degree:
            raise PreconditionError(f"moment degree {s} exceeds configured maximum {max_degree}")
        if cap is not None:
            raise PreconditionError("direction caps need method='mc'")
    if cells is None:
        hint = sample.lattice.spacing if sample.lattice is not None else None
        cells = VoronoiCells(sample.points, hint)
    if sites is None:
        sites = np.arange(len(sample))
    sites = np.asarray(sites, dtype=np.int64)
    job = _Job(cells, tuple(float(R) for R in radii), s, method, int(mc_n), int(seed), shell, cap, max_degree)

    if threads <= 1 or len(sites) < 2:
        _init_worker(job)
        results = _run_chunk(sites.tolist())
    else:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(threads, mp_context=ctx, initializer=_init_worker, initargs=(job,)) as pool:
            results = [r for part in pool.map(_run_chunk, _chunks(sites, 4 * threads)) for r in part]

    ncoef = len(multi_indices(sample.dim, s))
    values = np.zeros((len(sites), len(radii), ncoef))
    stderr = np.zeros_like(values) if method == "mc" else None
    stats = CellStats()
    for k, (vals, errs, ncons, empty) in enumerate(results):
        values[k] = vals
        if stderr is not None:
            stderr[k] = errs
        stats.count += 1
        stats.constraints += ncons
        stats.empty += int(empty)
    return values, stderr, stats


def _reduce(points: np.ndarray, values: np.ndarray, r: int, s: int, d: int) -> np.ndarray:
    """Fixed-order sum of ``x^r (.) M_s(x)`` over sites, per radius."""
    xr = monomials(points, r) if len(points) else np.zeros((0, len(multi_indices(d, r))))
    out = []
    for k in range(values.shape[1]):
        rows = sym_product_rows(xr, values[:, k, :], d, r, s)
        out.append([math.fsum(col) for col in rows.T])
    return np.array(out).reshape(values.shape[1], -1)


def _reduce_err(points, stderr, r, s, d):
    # independent per-site streams: variances add
    xr = monomials(points, r)
    out = []
    for k in range(stderr.shape[1]):
        rows = sym_product_rows(xr**2, stderr[:, k, :] ** 2, d, r, s)
        out.append(np.sqrt(rows.sum(axis=0)))
    return np.array(out)


@dataclass
class MeasureSweep:
    """Measures at several radii sharing one cell computation."""

    measures: list
    stats: CellStats = field(default_factory=CellStats)


def measure_sweep(
    sample: PointSample,
    radii: Sequence[float],
    r: int,
    s: int,
    region: RegionOfInterest = ALL_SPACE,
    method: str = "exact",
    variant: str = "voronoi",
    mc_n: int = DEFAULT_MC_N,
    seed: int = 0,
    threads: int = 1,
    max_degree: int = DEFAULT_MAX_DEGREE,
) -> MeasureSweep:
    if variant not in ("voronoi", "shell", "refined"):
        raise PreconditionError(f"unknown variant {variant!r}")
    if len(sample) == 0:
        raise PreconditionError("sample is empty")
    sel = region.contains(sample.points)
    if variant == "refined":
        interior, _ = interior_mask(sample)
        sel &= ~interior
    cap = None
    if not region.full_sphere:
        if variant != "shell":
            raise PreconditionError("direction caps are only defined for shell measures")
        cap = region
        method = "mc"
    sites = np.flatnonzero(sel)
    d = sample.dim
    nco = len(multi_indices(d, r + s))
    if len(sites) == 0:
        zero = np.zeros((len(radii), nco))
        tensors, errs, stats = zero, (zero if method == "mc" else None), CellStats()
    else:
        values, stderr, stats = site_moments(
            sample, radii, s, sites, method, variant == "shell", cap, mc_n, seed, threads, max_degree
        )
        pts = sample.points[sites]
        tensors = _reduce(pts, values, r, s, d)
        errs = _reduce_err(pts, stderr, r, s, d) if stderr is not None else None
    out = []
    for k, R in enumerate(radii):
        out.append(MeasureValue(
            SymTensor(d, r + s, tensors[k]),
            float(R), r, s, region, method,
            SymTensor(d, r + s, errs[k]) if errs is not None else None,
            variant,
        ))
    return MeasureSweep(out, stats)


def voronoi_tensor_measure(sample, R, r, s, A=ALL_SPACE, method="exact", **kw) -> MeasureValue:
    """``sum_{x in A} x^r (.) int_{B(x,R) & V_x} (y - x)^s dy``."""
    if R <= 0:
        raise PreconditionError("R must be positive")
    return measure_sweep(sample, [R], r, s, A.spatial(), method, "voronoi", **kw).measures[0]


def shell_measure(sample, R, r, s, B=ALL_SPACE, method="exact", **kw) -> MeasureValue:
    """Measure of the shell ``R/2 < |y - x| <= R`` with a direction filter."""
    if R <= 0:
        raise PreconditionError("R must be positive")
    return measure_sweep(sample, [R], r, s, B, method, "shell", **kw).measures[0]


def refined_measure(sample, R, r, s, A=ALL_SPACE, method="exact", **kw) -> MeasureValue:
    """Voronoi measure summed over boundary sites only."""
    if R <= 0:
        raise PreconditionError("R must be positive")
    return measure_sweep(sample, [R], r, s, A.spatial(), method, "refined", **kw).measures[0]


def interior_mask(sample: PointSample) -> tuple[np.ndarray, np.ndarray]:
    """Masks of interior sites (all 2d axis neighbours present) and the rest."""
    if sample.lattice is None:
        raise PreconditionError("interior filter needs lattice metadata")
    idx = sample.lattice.indices(sample.points)
    present = set(map(tuple, idx.tolist()))
    d = sample.dim
    steps = [np.eye(d, dtype=np.int64)[j] * sgn for j in range(d) for sgn in (1, -1)]
    interior = np.array(
        [all(tuple(k + st) in present for st in steps) for k in idx], dtype=bool
    ).reshape(-1)
    return interior, ~interior


def interior_filter(sample: PointSample) -> tuple[PointSample, PointSample]:
    interior, boundary = interior_mask(sample)
    return sample.subset(interior), sample.subset(boundary)
