import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from minkowski_voronoi.symtensor import (
    SymTensor,
    evaluate,
    evaluate_diagonal,
    max_abs_coeff,
    monomials,
    multi_indices,
    rotate,
    sup_norm,
    sym_pow,
    sym_product,
    tensor_norm,
)

vec2 = st.lists(st.floats(-3, 3, allow_nan=False), min_size=2, max_size=2).map(np.array)
vec3 = st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3).map(np.array)


def full_symmetrize(arrays):
    """Brute-force symmetrized tensor product of full arrays (oracle)."""
    perms = list(itertools.permutations(range(len(arrays))))
    out = 0
    for p in perms:
        t = np.array(1.0)
        for i in p:
            t = np.multiply.outer(t, arrays[i])
        out = out + t
    return out / len(perms)


def test_coefficient_count():
    for d in (1, 2, 3, 4):
        for p in range(6):
            assert len(multi_indices(d, p)) == math.comb(d + p - 1, p)
            assert SymTensor.zeros(d, p).coeffs.shape == (math.comb(d + p - 1, p),)


def test_index_order_is_lexicographic_on_exponents():
    assert multi_indices(2, 2) == ((2, 0), (1, 1), (0, 2))
    idx = multi_indices(3, 3)
    assert list(idx) == sorted(idx, reverse=True)


def test_sym_pow_examples():
    t = sym_pow([1.0, 0.0], 2)
    assert t.as_dict() == {(2, 0): 1.0, (1, 1): 0.0, (0, 2): 0.0}
    assert sym_pow([1.0, 2.0], 2).as_dict() == {(2, 0): 1.0, (1, 1): 2.0, (0, 2): 4.0}
    s = sym_pow([3.0, -7.0], 0)
    assert s.rank == 0 and s.coeffs.tolist() == [1.0]


def test_sym_product_examples():
    e1, e2 = sym_pow([1.0, 0.0], 1), sym_pow([0.0, 1.0], 1)
    t = sym_product(e1, e2)
    assert t.as_dict() == {(2, 0): 0.0, (1, 1): 0.5, (0, 2): 0.0}
    assert sym_product(t, SymTensor.scalar(1.0, 2)).allclose(t)
    v = np.array([1.0, 1.0])
    assert sym_product(sym_pow(v, 2), sym_pow(v, 1)).allclose(sym_pow(v, 3))


def test_sym_product_dim_mismatch():
    with pytest.raises(ValueError):
        sym_product(SymTensor.zeros(2, 1), SymTensor.zeros(3, 1))


def test_evaluate_examples():
    e1, e2 = np.eye(2)
    t = sym_product(sym_pow(e1, 1), sym_pow(e2, 1))
    assert evaluate(t, [e1, e2]) == pytest.approx(0.5)
    v, u = np.array([0.3, -1.2]), np.array([2.0, 0.5])
    assert evaluate(sym_pow(v, 2), [u, u]) == pytest.approx(np.dot(v, u) ** 2)
    assert evaluate(SymTensor.scalar(2.5, 2), []) == 2.5
    with pytest.raises(ValueError):
        evaluate(t, [e1])


@given(vec3, vec3, vec3, st.integers(0, 3), st.integers(0, 3))
def test_product_matches_full_symmetrization(v, w, u, p, q):
    got = sym_product(sym_pow(v, p), sym_pow(w, q)).to_full()
    want = full_symmetrize([v] * p + [w] * q) if p + q else np.array(1.0)
    assert np.allclose(got, want, atol=1e-9 * (1 + np.abs(want).max()))


@given(vec2, vec2, st.integers(1, 3), st.integers(1, 3), st.randoms(use_true_random=False))
def test_evaluate_symmetric_in_arguments(v, w, p, q, rnd):
    t = sym_product(sym_pow(v, p), sym_pow(w, q))
    args = [np.array([rnd.uniform(-1, 1), rnd.uniform(-1, 1)]) for _ in range(p + q)]
    base = evaluate(t, args)
    perm = list(args)
    rnd.shuffle(perm)
    assert evaluate(t, perm) == pytest.approx(base, rel=1e-12, abs=1e-12)


@given(vec3, st.integers(0, 5))
def test_pow_is_repeated_product(v, r):
    t = SymTensor.scalar(1.0, 3)
    for _ in range(r):
        t = sym_product(t, sym_pow(v, 1))
    ref = sym_pow(v, r)
    assert np.allclose(t.coeffs, ref.coeffs, rtol=1e-12, atol=1e-12 * (1 + np.abs(ref.coeffs).max()))


@given(vec2, vec2, st.floats(-4, 4))
def test_linearity(v, w, c):
    a, b = sym_pow(v, 2), sym_pow(w, 2)
    assert np.array_equal((a + b).coeffs, a.coeffs + b.coeffs)
    assert np.array_equal((a * c).coeffs, a.coeffs * c)
    assert np.array_equal((a - b).coeffs, a.coeffs - b.coeffs)


def test_sup_norm_examples():
    assert sup_norm(sym_pow([3.0, 4.0], 2)) == pytest.approx(25.0, rel=1e-12)
    assert sup_norm(SymTensor.scalar(-2.0, 2)) == 2.0
    t = sym_product(sym_pow([1.0, 0.0], 1), sym_pow([0.0, 1.0], 1))
    res = tensor_norm(t)
    assert res.value == pytest.approx(0.5, abs=1e-12)
    assert res.method == "sup" and res.grid == 4096


def test_sup_norm_matches_dense_grid():
    # independent oracle: dense angular scan of |T(v,..,v)|
    rng = np.random.default_rng(3)
    th = np.linspace(0, np.pi, 200001)
    V = np.stack([np.cos(th), np.sin(th)], axis=1)
    for p in (1, 2, 3, 4):
        t = SymTensor(2, p, rng.normal(size=p + 1))
        dense = np.abs(evaluate_diagonal(t, V)).max()
        assert sup_norm(t) == pytest.approx(dense, rel=1e-9)


@given(vec2, vec2, st.integers(0, 3), st.integers(0, 3))
def test_product_norm_inequality(v, w, r, s):
    t = sym_product(sym_pow(v, r), sym_pow(w, s))
    bound = np.linalg.norm(v) ** r * np.linalg.norm(w) ** s
    assert sup_norm(t) <= bound + 1e-6 * max(1.0, bound)


def test_frobenius_fallback_in_3d():
    t = sym_pow([1.0, 2.0, 2.0], 2)
    res = tensor_norm(t)
    assert res.method == "frobenius"
    assert res.value == pytest.approx(9.0)  # |v v^T|_F = |v|^2
    assert res.value >= max_abs_coeff(t)


def test_full_round_trip_and_identity():
    rng = np.random.default_rng(0)
    t = SymTensor(3, 3, rng.normal(size=10))
    assert SymTensor.from_full(t.to_full()).allclose(t)
    q = SymTensor.identity(2)
    assert q.as_dict() == {(2, 0): 1.0, (1, 1): 0.0, (0, 2): 1.0}


def test_json_round_trip():
    t = SymTensor(2, 2, [1.0, -0.5, 3.0])
    obj = t.to_json()
    assert obj["dim"] == 2 and obj["rank"] == 2
    assert [c["index"] for c in obj["coeffs"]] == [[2, 0], [1, 1], [0, 2]]
    assert SymTensor.from_json(obj).allclose(t, rtol=0)


def test_rotate_rank_one_power():
    rng = np.random.default_rng(1)
    v = rng.normal(size=2)
    phi = 0.7
    q = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    assert rotate(sym_pow(v, 3), q).allclose(sym_pow(q @ v, 3), rtol=1e-12, atol=1e-12)


def test_monomials_rows():
    pts = np.array([[2.0, 3.0], [1.0, -1.0]])
    m = monomials(pts, 2)
    assert m.tolist() == [[4.0, 6.0, 9.0], [1.0, -1.0, 1.0]]


def test_coeffs_are_read_only():
    t = SymTensor(2, 1, [1.0, 2.0])
    with pytest.raises(ValueError):
        t.coeffs[0] = 5.0
