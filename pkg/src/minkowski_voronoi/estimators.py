"""Steiner-system inversion: from Voronoi measures to Minkowski tensors."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import NumericalError, PreconditionError
from .measures import (
    ALL_SPACE,
    DEFAULT_MC_N,
    MeasureValue,
    RegionOfInterest,
    interior_mask,
    measure_sweep,
)
from .shapes import PointSample
from .symtensor import SymTensor, monomials, multi_indices

MAX_CONDITION = 1e12


def kappa(j: int) -> float:
    """Volume of the unit ball in R^j."""
    if j < 0:
        raise ValueError("j must be non-negative")
    return math.pi ** (j / 2) / math.gamma(j / 2 + 1)


def omega(j: int) -> float:
    """Surface area of the unit sphere in R^j."""
    return j * kappa(j)


@dataclass(frozen=True, eq=False)
class SteinerMatrix:
    entries: np.ndarray
    radii: tuple
    r: int
    s: int
    d: int
    variant: str  # standard | shell | reduced
    condition: float

    @property
    def orders(self) -> list[int]:
        """Intrinsic-volume index k for each unknown (column)."""
        if self.variant == "standard":
            return [self.d - j for j in range(self.d + 1)]
        return [self.d - j for j in range(1, self.d + 1)]


def steiner_matrix(radii: Sequence[float], r: int, s: int, d: int, variant: str = "standard") -> SteinerMatrix:
    """Coefficient matrix of the (local) Steiner polynomial at the given radii.

    Row i, column j holds ``r! s! kappa_{s+j} R_i^{s+j}``; the shell variant
    multiplies by ``1 - 2^-(s+j)`` and starts at j = 1, the reduced variant
    (s = 0, volume tensor subtracted) also starts at j = 1.
    """
    radii = tuple(float(R) for R in radii)
    if variant not in ("standard", "shell", "reduced"):
        raise PreconditionError(f"unknown variant {variant!r}")
    if variant == "reduced" and s != 0:
        raise PreconditionError("the reduced system needs s = 0")
    n_unknown = d + 1 if variant == "standard" else d
    if len(radii) < n_unknown:
        raise PreconditionError(f"{variant} system needs {n_unknown} radii, got {len(radii)}")
    if any(R <= 0 for R in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise PreconditionError("radii must be positive and strictly increasing")
    cols = range(d + 1) if variant == "standard" else range(1, d + 1)
    fac = math.factorial(r) * math.factorial(s)
    R = np.array(radii)
    entries = np.empty((len(radii), n_unknown))
    for c, j in enumerate(cols):
        col = fac * kappa(s + j) * R ** (s + j)
        if variant == "shell":
            col = col * (1 - 2.0 ** (-(s + j)))
        entries[:, c] = col
    cond = float(np.linalg.cond(entries))
    return SteinerMatrix(entries, radii, r, s, d, variant, cond)


@dataclass(frozen=True, eq=False)
class TensorEstimate:
    """Estimated tensors keyed by k, with solve diagnostics."""

    tensors: dict
    condition: float
    residual: float
    r: int
    s: int
    d: int
    variant: str
    config: dict = field(default_factory=dict)
    solved_volume_slot: Optional[SymTensor] = None
    least_squares: bool = False

    def __getitem__(self, k: int) -> SymTensor:
        return self.tensors[k]

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "variant": self.variant,
            "r": self.r,
            "s": self.s,
            "d": self.d,
            "condition": self.condition,
            "residual": self.residual,
            "least_squares": self.least_squares,
            "tensors": {str(k): self.tensors[k].to_json() for k in sorted(self.tensors)},
            "solved_volume_slot": (
                self.solved_volume_slot.to_json() if self.solved_volume_slot is not None else None
            ),
        }


def _solve(matrix: SteinerMatrix, rhs: np.ndarray) -> tuple[np.ndarray, float, bool]:
    if matrix.condition > MAX_CONDITION or not np.isfinite(matrix.condition):
        raise NumericalError(
            f"Steiner matrix is ill-conditioned (cond = {matrix.condition:.3e} > {MAX_CONDITION:.0e}) "
            f"for radii {matrix.radii}; use radii closer together in ratio or fewer orders"
        )
    A = matrix.entries
    # column equilibration before the factorization
    scale = np.max(np.abs(A), axis=0)
    As = A / scale
    lsq = A.shape[0] > A.shape[1]
    if lsq:
        sol = np.linalg.lstsq(As, rhs, rcond=None)[0]
    else:
        sol = lu_solve(lu_factor(As), rhs)
    sol = sol / scale[:, None]
    denom = np.linalg.norm(rhs)
    resid = float(np.linalg.norm(A @ sol - rhs) / denom) if denom > 0 else float(np.linalg.norm(A @ sol))
    return sol, resid, lsq


def _stack(measures: Sequence, matrix: SteinerMatrix) -> np.ndarray:
    if len(measures) != len(matrix.radii):
        raise PreconditionError("one measure per radius is required")
    for m, R in zip(measures, matrix.radii):
        if not math.isclose(m.R, R, rel_tol=1e-12):
            raise PreconditionError(f"measure at R={m.R} does not match matrix radius {R}")
        if (m.r, m.s) != (matrix.r, matrix.s):
            raise PreconditionError("measure ranks do not match the matrix")
    regions = {json_key(m.region) for m in measures}
    if len(regions) > 1:
        raise PreconditionError("measures are taken over different regions")
    return np.array([m.tensor.coeffs for m in measures])


def json_key(region: RegionOfInterest) -> str:
    import json

    return json.dumps(region.to_json(), sort_keys=True)


def _estimate(matrix: SteinerMatrix, rhs: np.ndarray, d: int, config: dict) -> TensorEstimate:
    sol, resid, lsq = _solve(matrix, rhs)
    rank = matrix.r + matrix.s
    tensors = {k: SymTensor(d, rank, sol[c]) for c, k in enumerate(matrix.orders)}
    solved = None
    if matrix.variant == "standard" and matrix.s >= 1:
        solved = tensors[d]
        tensors[d] = SymTensor.zeros(d, rank)
    return TensorEstimate(tensors, matrix.condition, resid, matrix.r, matrix.s, d, matrix.variant,
                          dict(config), solved, lsq)


def estimate_tensors(measures: Sequence[MeasureValue], matrix: SteinerMatrix, config: Optional[dict] = None) -> TensorEstimate:
    """Invert the Steiner system for every tensor coefficient at once.

    For s >= 1 the volume slot is zero by definition; the value the solver
    puts there is kept as ``solved_volume_slot``.
    """
    if matrix.variant != "standard":
        raise PreconditionError("estimate_tensors takes the standard matrix")
    return _estimate(matrix, _stack(measures, matrix), matrix.d, config or {})


def estimate_local(measures: Sequence[MeasureValue], matrix: SteinerMatrix, config: Optional[dict] = None) -> TensorEstimate:
    """Tensors k = 0..d-1 from shell measures."""
    if matrix.variant != "shell":
        raise PreconditionError("estimate_local takes the shell matrix")
    if any(m.variant != "shell" for m in measures):
        raise PreconditionError("estimate_local needs shell measures")
    return _estimate(matrix, _stack(measures, matrix), matrix.d, config or {})


def check_refined_radii(sample: PointSample, radii: Sequence[float]) -> None:
    lat = sample.lattice
    if lat is None:
        raise PreconditionError("refined estimation needs lattice metadata")
    aC = lat.spacing * lat.circumradius
    if not min(radii) > aC:
        raise PreconditionError(
            f"refined estimation needs a*C < R_0; got R_0 = {min(radii)} <= a*C = {aC:.6g}"
        )


def estimate_refined(measures: Sequence[MeasureValue], matrix: SteinerMatrix, sample: PointSample,
                     config: Optional[dict] = None) -> TensorEstimate:
    """Standard inversion applied to boundary-only measures."""
    check_refined_radii(sample, matrix.radii)
    if any(m.variant != "refined" for m in measures):
        raise PreconditionError("estimate_refined needs refined measures")
    if matrix.variant != "standard":
        raise PreconditionError("estimate_refined takes the standard matrix")
    return _estimate(matrix, _stack(measures, matrix), matrix.d, config or {})


def volume_tensor_hat(sample: PointSample, r: int) -> SymTensor:
    """Pixel-midpoint volume tensor ``(a^d / r!) sum_z z^r``."""
    if sample.lattice is None:
        raise PreconditionError("volume tensor estimator needs lattice metadata")
    d = sample.dim
    rows = monomials(sample.points, r) if len(sample) else np.zeros((0, 1))
    coeffs = np.array([math.fsum(c) for c in rows.T]) if len(sample) else np.zeros(rows.shape[1])
    return SymTensor(d, r, coeffs * sample.lattice.cell_volume / math.factorial(r))


def volume_tensor_pixels(sample: PointSample, r: int) -> SymTensor:
    """Exact integral ``(1/r!) sum_z int_{z + a V_0} x^r dx`` over the pixel cubes."""
    lat = sample.lattice
    if lat is None:
        raise PreconditionError("volume tensor estimator needs lattice metadata")
    d, h = sample.dim, lat.spacing / 2
    pts = sample.points
    # per-axis antiderivative differences, (n, d, r + 1)
    k = np.arange(r + 1)
    axis = ((pts[:, :, None] + h) ** (k + 1) - (pts[:, :, None] - h) ** (k + 1)) / (k + 1)
    coeffs = []
    for alpha in multi_indices(d, r):
        col = np.prod([axis[:, i, alpha[i]] for i in range(d)], axis=0)
        coeffs.append(math.fsum(col))
    return SymTensor(d, r, np.array(coeffs) / math.factorial(r))


def reduced_radius_estimate(measures: Sequence[MeasureValue], volume_hat: SymTensor, radii: Sequence[float],
                            config: Optional[dict] = None) -> TensorEstimate:
    """Tensors k = 0..d-1 from d radii after removing ``r! * volume_hat``."""
    if not measures:
        raise PreconditionError("no measures given")
    m0 = measures[0]
    if m0.s != 0:
        raise PreconditionError("the reduced estimator needs s = 0")
    if m0.region.kind != "all":
        raise PreconditionError("the reduced estimator is global (A = R^d)")
    d = m0.tensor.dim
    matrix = steiner_matrix(radii, m0.r, 0, d, "reduced")
    rhs = _stack(measures, matrix) - math.factorial(m0.r) * volume_hat.coeffs[None, :]
    est = _estimate(matrix, rhs, d, config or {})
    est.tensors[d] = volume_hat
    return est


def auto_radii(beta: float, d: int, count: Optional[int] = None) -> list[float]:
    """Geometric radii from 0.3*beta to 0.8*beta."""
    if not beta > 0 or not math.isfinite(beta):
        raise PreconditionError("auto radii need a finite positive reach bound")
    n = d + 1 if count is None else count
    lo, hi = 0.3 * beta, 0.8 * beta
    return [lo * (hi / lo) ** (i / (n - 1)) for i in range(n)]


# ----------------------------------------------------------------------
# end-to-end pipeline


@dataclass
class EstimatorConfig:
    r: int = 0
    s: int = 0
    radii: tuple = ()
    reach: float = math.inf
    region: RegionOfInterest = ALL_SPACE
    method: str = "exact"
    mode: str = "standard"  # standard | refined | shell | reduced
    mc_n: int = DEFAULT_MC_N
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "r": self.r,
            "s": self.s,
            "radii": list(self.radii),
            "reach": None if math.isinf(self.reach) else self.reach,
            "region": self.region.to_json(),
            "method": self.method,
            "mode": self.mode,
            "mc_n": self.mc_n,
            "seed": self.seed,
        }


def estimate_sample(sample: PointSample, config: EstimatorConfig, threads: int = 1):
    """Run the measure sweep and inversion selected by ``config.mode``.

    Returns ``(TensorEstimate, measures, CellStats)``.
    """
    d = sample.dim
    radii = tuple(config.radii)
    if radii and max(radii) >= config.reach:
        warnings.warn(
            f"largest radius {max(radii)} is not below the declared reach {config.reach}", stacklevel=2
        )
    kw = dict(method=config.method, mc_n=config.mc_n, seed=config.seed, threads=threads)
    mode = config.mode
    if mode == "standard":
        matrix = steiner_matrix(radii, config.r, config.s, d)
        sweep = measure_sweep(sample, radii, config.r, config.s, config.region.spatial(), variant="voronoi", **kw)
        est = estimate_tensors(sweep.measures, matrix, config.to_json())
    elif mode == "refined":
        check_refined_radii(sample, radii)
        matrix = steiner_matrix(radii, config.r, config.s, d)
        sweep = measure_sweep(sample, radii, config.r, config.s, config.region.spatial(), variant="refined", **kw)
        est = estimate_refined(sweep.measures, matrix, sample, config.to_json())
    elif mode == "shell":
        matrix = steiner_matrix(radii, config.r, config.s, d, "shell")
        sweep = measure_sweep(sample, radii, config.r, config.s, config.region, variant="shell", **kw)
        est = estimate_local(sweep.measures, matrix, config.to_json())
    elif mode == "reduced":
        if config.s != 0 or config.region.kind != "all":
            raise PreconditionError("reduced mode needs s = 0 and the whole space as region")
        steiner_matrix(radii, config.r, 0, d, "reduced")
        sweep = measure_sweep(sample, radii, config.r, 0, ALL_SPACE, variant="voronoi", **kw)
        est = reduced_radius_estimate(sweep.measures, volume_tensor_hat(sample, config.r), radii, config.to_json())
    else:
        raise PreconditionError(f"unknown mode {mode!r}")
    return est, sweep.measures, sweep.stats
