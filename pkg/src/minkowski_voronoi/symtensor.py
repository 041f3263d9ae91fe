"""Symmetric tensors over R^d stored by multi-index.

A rank-p tensor keeps one coefficient per exponent profile ``alpha`` with
``sum(alpha) == p``. The coefficient is the component ``T(e_i1, ..., e_ip)``
for any index tuple with that profile, so ``sym_pow(v, r)`` has coefficient
``prod(v**alpha)``.

Canonical order follows sorted index tuples ``i1 <= ... <= ip``; in exponent
terms this is descending lexicographic order, e.g. ``(2,0), (1,1), (0,2)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

SUP_NORM_GRID = 4096
_GOLDEN_TOL = 1e-10


@lru_cache(maxsize=None)
def multi_indices(dim: int, rank: int) -> tuple[tuple[int, ...], ...]:
    """All exponent profiles of degree ``rank`` in canonical order."""
    if dim < 1 or rank < 0:
        raise ValueError(f"invalid dim/rank: {dim}, {rank}")
    out = []
    for combo in itertools.combinations_with_replacement(range(dim), rank):
        exps = [0] * dim
        for i in combo:
            exps[i] += 1
        out.append(tuple(exps))
    return tuple(out)


@lru_cache(maxsize=None)
def _position(dim: int, rank: int) -> dict[tuple[int, ...], int]:
    return {alpha: i for i, alpha in enumerate(multi_indices(dim, rank))}


def multinomial(alpha: Sequence[int]) -> int:
    """Number of index tuples with exponent profile ``alpha``."""
    out = math.factorial(sum(alpha))
    for a in alpha:
        out //= math.factorial(a)
    return out


@lru_cache(maxsize=None)
def _multinomial_vector(dim: int, rank: int) -> np.ndarray:
    return np.array([multinomial(a) for a in multi_indices(dim, rank)], dtype=float)


@lru_cache(maxsize=None)
def _exponent_matrix(dim: int, rank: int) -> np.ndarray:
    return np.array(multi_indices(dim, rank), dtype=np.int64).reshape(-1, dim)


@lru_cache(maxsize=None)
def _product_table(dim: int, p1: int, p2: int):
    # (i1, i2, i_out, weight) with weight = M(a) M(b) / M(a+b)
    pos = _position(dim, p1 + p2)
    rows = []
    for i, a in enumerate(multi_indices(dim, p1)):
        for j, b in enumerate(multi_indices(dim, p2)):
            g = tuple(x + y for x, y in zip(a, b))
            rows.append((i, j, pos[g], multinomial(a) * multinomial(b) / multinomial(g)))
    arr = np.array(rows, dtype=float)
    return arr[:, 0].astype(int), arr[:, 1].astype(int), arr[:, 2].astype(int), arr[:, 3]


def monomials(points: np.ndarray, rank: int) -> np.ndarray:
    """Rows of ``prod(p**alpha)`` for every alpha of degree ``rank``.

    ``points`` has shape (n, d); the result has shape (n, n_coeffs).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = points.shape
    exps = _exponent_matrix(d, rank)
    if rank == 0:
        return np.ones((n, 1))
    # power table by repeated multiplication; much faster than float pow
    pw = np.empty((rank + 1, d, n))
    pw[0] = 1.0
    pts = points.T
    for k in range(1, rank + 1):
        pw[k] = pw[k - 1] * pts
    out = pw[exps[:, 0], 0, :].copy()
    for j in range(1, d):
        out *= pw[exps[:, j], j, :]
    return out.T


@dataclass(frozen=True, eq=False)
class SymTensor:
    dim: int
    rank: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        n = math.comb(self.dim + self.rank - 1, self.rank)
        if c.size != n:
            raise ValueError(
                f"rank-{self.rank} tensor over R^{self.dim} needs {n} coefficients, got {c.size}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # construction -----------------------------------------------------

    @classmethod
    def zeros(cls, dim: int, rank: int) -> SymTensor:
        return cls(dim, rank, np.zeros(math.comb(dim + rank - 1, rank)))

    @classmethod
    def scalar(cls, value: float, dim: int) -> SymTensor:
        return cls(dim, 0, [value])

    @classmethod
    def identity(cls, dim: int) -> SymTensor:
        """The metric tensor Q = sum_i e_i^2."""
        return cls(dim, 2, [1.0 if max(a) == 2 else 0.0 for a in multi_indices(dim, 2)])

    @classmethod
    def from_dict(cls, dim: int, rank: int, values: dict) -> SymTensor:
        pos = _position(dim, rank)
        c = np.zeros(len(pos))
        for alpha, v in values.items():
            c[pos[tuple(alpha)]] = v
        return cls(dim, rank, c)

    @classmethod
    def from_full(cls, arr: np.ndarray) -> SymTensor:
        """Take the symmetric part of a full ``(d,)*p`` array."""
        arr = np.asarray(arr, dtype=float)
        rank = arr.ndim
        dim = arr.shape[0] if rank else 1
        if rank == 0:
            return cls.scalar(float(arr), dim)
        c = np.zeros(math.comb(dim + rank - 1, rank))
        counts = np.zeros_like(c)
        pos = _position(dim, rank)
        for idx in itertools.product(range(dim), repeat=rank):
            alpha = [0] * dim
            for i in idx:
                alpha[i] += 1
            k = pos[tuple(alpha)]
            c[k] += arr[idx]
            counts[k] += 1
        return cls(dim, rank, c / counts)

    # access -----------------------------------------------------------

    @property
    def indices(self) -> tuple[tuple[int, ...], ...]:
        return multi_indices(self.dim, self.rank)

    def __getitem__(self, alpha) -> float:
        return float(self.coeffs[_position(self.dim, self.rank)[tuple(alpha)]])

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {a: float(v) for a, v in zip(self.indices, self.coeffs)}

    def to_full(self) -> np.ndarray:
        if self.rank == 0:
            return np.array(self.coeffs[0])
        out = np.empty((self.dim,) * self.rank)
        pos = _position(self.dim, self.rank)
        for idx in itertools.product(range(self.dim), repeat=self.rank):
            alpha = [0] * self.dim
            for i in idx:
                alpha[i] += 1
            out[idx] = self.coeffs[pos[tuple(alpha)]]
        return out

    # linear structure -------------------------------------------------

    def _check(self, other: SymTensor) -> None:
        if self.dim != other.dim or self.rank != other.rank:
            raise ValueError(
                f"shape mismatch: (d={self.dim}, p={self.rank}) vs (d={other.dim}, p={other.rank})"
            )

    def __add__(self, other: SymTensor) -> SymTensor:
        self._check(other)
        return SymTensor(self.dim, self.rank, self.coeffs + other.coeffs)

    def __sub__(self, other: SymTensor) -> SymTensor:
        self._check(other)
        return SymTensor(self.dim, self.rank, self.coeffs - other.coeffs)

    def __neg__(self) -> SymTensor:
        return SymTensor(self.dim, self.rank, -self.coeffs)

    def __mul__(self, c: float) -> SymTensor:
        return SymTensor(self.dim, self.rank, self.coeffs * float(c))

    __rmul__ = __mul__

    def __truediv__(self, c: float) -> SymTensor:
        return SymTensor(self.dim, self.rank, self.coeffs / float(c))

    def allclose(self, other: SymTensor, rtol: float = 1e-12, atol: float = 0.0) -> bool:
        return (
            self.dim == other.dim
            and self.rank == other.rank
            and bool(np.allclose(self.coeffs, other.coeffs, rtol=rtol, atol=atol))
        )

    def __repr__(self) -> str:
        body = ", ".join(f"{a}: {v:.6g}" for a, v in zip(self.indices, self.coeffs))
        return f"SymTensor(d={self.dim}, p={self.rank}, {{{body}}})"

    # serialization ----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "rank": self.rank,
            "coeffs": [
                {"index": list(a), "value": float(v)} for a, v in zip(self.indices, self.coeffs)
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> SymTensor:
        return cls.from_dict(
            int(obj["dim"]), int(obj["rank"]), {tuple(e["index"]): e["value"] for e in obj["coeffs"]}
        )


def sym_pow(v, r: int) -> SymTensor:
    """The r-fold symmetric power ``v^r``."""
    if r < 0:
        raise ValueError("r must be non-negative")
    v = np.asarray(v, dtype=float).reshape(-1)
    return SymTensor(v.size, r, monomials(v[None, :], r)[0])


def sym_product(t1: SymTensor, t2: SymTensor) -> SymTensor:
    if t1.dim != t2.dim:
        raise ValueError(f"dimension mismatch: {t1.dim} vs {t2.dim}")
    i1, i2, iout, w = _product_table(t1.dim, t1.rank, t2.rank)
    out = np.zeros(math.comb(t1.dim + t1.rank + t2.rank - 1, t1.rank + t2.rank))
    np.add.at(out, iout, w * t1.coeffs[i1] * t2.coeffs[i2])
    return SymTensor(t1.dim, t1.rank + t2.rank, out)


def sym_product_rows(a: np.ndarray, b: np.ndarray, dim: int, p1: int, p2: int) -> np.ndarray:
    """Row-wise symmetric product of coefficient arrays of shape (n, .)."""
    i1, i2, iout, w = _product_table(dim, p1, p2)
    out = np.zeros((a.shape[0], math.comb(dim + p1 + p2 - 1, p1 + p2)))
    contrib = a[:, i1] * b[:, i2] * w
    for col in range(out.shape[1]):
        out[:, col] = contrib[:, iout == col].sum(axis=1)
    return out


def evaluate(t: SymTensor, args: Sequence) -> float:
    """Evaluate ``T(v_1, ..., v_p)`` as a multilinear form."""
    if len(args) != t.rank:
        raise ValueError(f"rank-{t.rank} tensor takes {t.rank} arguments, got {len(args)}")
    full = t.to_full()
    for v in args:
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.size != t.dim:
            raise ValueError(f"argument has {v.size} components, expected {t.dim}")
        full = np.tensordot(v, full, axes=(0, 0))
    return float(full)


def evaluate_diagonal(t: SymTensor, v: np.ndarray) -> np.ndarray:
    """``T(v, ..., v)`` for each row of ``v`` (shape (n, d))."""
    return monomials(v, t.rank) @ (_multinomial_vector(t.dim, t.rank) * t.coeffs)


def rotate(t: SymTensor, q: np.ndarray) -> SymTensor:
    """Push ``t`` forward by the linear map ``q``: ``(qT)(v..) = T(q^T v, ..)``."""
    full = t.to_full()
    for axis in range(t.rank):
        full = np.moveaxis(np.tensordot(q, full, axes=(1, axis)), 0, axis)
    return SymTensor.from_full(full) if t.rank else t


class NormResult(NamedTuple):
    value: float
    method: str  # "sup" or "frobenius"
    grid: int


def tensor_norm(t: SymTensor) -> NormResult:
    """Tensor norm with provenance.

    In the plane the supremum of ``|T(v_1..v_p)|`` over unit vectors equals
    the supremum over equal arguments (Banach's theorem for symmetric forms),
    so it reduces to a one-dimensional angular search. For d >= 3 the
    Frobenius norm of the full array is returned instead; it bounds the
    sup-norm from above.
    """
    if t.rank == 0:
        return NormResult(abs(float(t.coeffs[0])), "sup", 0)
    if t.dim == 1:
        return NormResult(abs(float(t.coeffs[0])), "sup", 0)
    if t.dim != 2:
        w = _multinomial_vector(t.dim, t.rank)
        return NormResult(float(np.sqrt(np.sum(w * t.coeffs**2))), "frobenius", 0)

    weights = _multinomial_vector(2, t.rank) * t.coeffs

    def f(theta):
        v = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        return np.abs(monomials(np.atleast_2d(v), t.rank) @ weights)

    # |T(v..v)| has period pi
    step = np.pi / SUP_NORM_GRID
    grid = np.arange(SUP_NORM_GRID) * step
    vals = f(grid)
    k = int(np.argmax(vals))
    lo, hi = grid[k] - step, grid[k] + step
    invphi = (math.sqrt(5) - 1) / 2
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = f(np.array([c]))[0], f(np.array([d]))[0]
    while hi - lo > _GOLDEN_TOL:
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = f(np.array([c]))[0]
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = f(np.array([d]))[0]
    best = max(float(vals[k]), float(fc), float(fd))
    return NormResult(best, "sup", SUP_NORM_GRID)


def sup_norm(t: SymTensor) -> float:
    return tensor_norm(t).value


def max_abs_coeff(t: SymTensor) -> float:
    return float(np.max(np.abs(t.coeffs))) if t.coeffs.size else 0.0
