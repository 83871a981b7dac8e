import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import left_matmul, right_matmul
from qtlrkit import quatmat
from qtlrkit.quatcore import I, J, K, Quaternion
from qtlrkit.quatmat import (
    QSVDConsistencyError,
    adjoint,
    left_mul,
    qsvd,
    rank,
    right_mul,
    truncated_qsvd,
    truncation_rank,
)
from qtlrkit.quattensor import QuaternionTensor, frobenius_norm
from qtlrkit.svdkernel import KERNELS

shapes = st.tuples(st.integers(1, 9), st.integers(1, 9))
seeds = st.integers(0, 2**32 - 1)


def _q(shape, seed, real=False):
    return QuaternionTensor.random(shape, np.random.default_rng(seed), real=real)


def _scalar_matrix(q):
    return QuaternionTensor(np.array(q.as_tuple(), float).reshape(4, 1, 1))


def _eye_defect(u):
    s = u.dims[1]
    return frobenius_norm(left_mul(u.H, u) - QuaternionTensor.identity(s))


# products ---------------------------------------------------------------------


def test_unit_products():
    i, j = _scalar_matrix(I), _scalar_matrix(J)
    assert np.array_equal(left_mul(i, j).data, _scalar_matrix(K).data)
    assert np.array_equal(right_mul(i, j).data, (-_scalar_matrix(K)).data)


@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), seeds)
def test_products_match_entrywise_oracle(m, n, p, seed):
    a, b = _q((m, n), seed), _q((n, p), seed + 1)
    assert np.allclose(left_mul(a, b).data, left_matmul(a.data, b.data), atol=1e-12)
    assert np.allclose(right_mul(a, b).data, right_matmul(a.data, b.data), atol=1e-12)


def test_identity_and_real_products(rng):
    a = QuaternionTensor.random((4, 3), rng)
    assert np.allclose(left_mul(a, QuaternionTensor.identity(3)).data, a.data, atol=0)
    ar, br = QuaternionTensor.random((3, 5), rng, real=True), QuaternionTensor.random((5, 2), rng, real=True)
    assert np.allclose(left_mul(ar, br).data, right_mul(ar, br).data, atol=1e-13)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        left_mul(QuaternionTensor.zeros((2, 3)), QuaternionTensor.zeros((2, 3)))
    with pytest.raises(ValueError):
        right_mul(QuaternionTensor.zeros((2, 3)), QuaternionTensor.zeros((2, 3)))


@given(shapes, st.integers(1, 6), seeds)
def test_right_product_transpose_identity(shape, p, seed):
    a, b = _q(shape, seed), _q((shape[1], p), seed + 7)
    assert np.allclose(right_mul(a, b).data, left_mul(b.T, a.T).T.data, atol=1e-12)


@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), seeds)
def test_same_side_associativity(m, n, p, r, seed):
    a, b, c = _q((m, n), seed), _q((n, p), seed + 1), _q((p, r), seed + 2)
    for mul in (left_mul, right_mul):
        lhs = mul(mul(a, b), c)
        rhs = mul(a, mul(b, c))
        assert frobenius_norm(lhs - rhs) <= 1e-10 * max(1.0, frobenius_norm(lhs))


def test_mixed_associativity_fails_somewhere(rng):
    found = False
    for _ in range(10):
        a, b, c = (QuaternionTensor.random((3, 3), rng) for _ in range(3))
        lhs = right_mul(left_mul(a, b), c)
        rhs = left_mul(a, right_mul(b, c))
        found |= frobenius_norm(lhs - rhs) > 1e-6 * frobenius_norm(lhs)
    assert found


def test_adjoint_is_multiplicative(rng):
    a, b = QuaternionTensor.random((3, 4), rng), QuaternionTensor.random((4, 2), rng)
    assert np.allclose(adjoint(left_mul(a, b)), adjoint(a) @ adjoint(b), atol=1e-12)


# QSVD ----------------------------------------------------------------------------


@pytest.mark.parametrize("kernel", KERNELS)
@given(shape=shapes, seed=seeds)
def test_qsvd_factor_invariants(kernel, shape, seed):
    a = _q(shape, seed)
    f = qsvd(a, kernel)
    assert f.s == min(shape)
    assert np.all(np.diff(f.sigma) <= 0) and np.all(f.sigma >= 0)
    assert frobenius_norm(f.reconstruct() - a) <= 1e-10 * frobenius_norm(a)
    assert _eye_defect(f.U) <= 1e-10
    assert _eye_defect(f.V) <= 1e-10


@pytest.mark.parametrize("kernel", KERNELS)
@given(m=st.integers(2, 8), n=st.integers(2, 8), r=st.integers(1, 3), seed=seeds)
def test_qsvd_rank_deficient(kernel, m, n, r, seed):
    a = left_mul(_q((m, r), seed), _q((r, n), seed + 1))
    f = qsvd(a, kernel)
    assert frobenius_norm(f.reconstruct() - a) <= 1e-10 * frobenius_norm(a)
    assert _eye_defect(f.U) <= 1e-10 and _eye_defect(f.V) <= 1e-10
    assert rank(a, kernel) == min(r, m, n)


def test_qsvd_examples():
    f = qsvd(_scalar_matrix(Quaternion(1, 1, 1, 1)))
    assert f.sigma == pytest.approx([2.0], abs=1e-14)
    z = qsvd(QuaternionTensor.zeros((3, 2)))
    assert np.array_equal(z.sigma, np.zeros(2))
    assert _eye_defect(z.U) <= 1e-12 and _eye_defect(z.V) <= 1e-12
    e = qsvd(QuaternionTensor.identity(4))
    assert np.allclose(e.sigma, 1.0, atol=1e-14)


def test_qsvd_sigma_matches_adjoint_pairs(rng):
    a = QuaternionTensor.random((8, 5), rng)
    cs = np.linalg.svd(adjoint(a), compute_uv=False)
    assert np.allclose(qsvd(a).sigma, cs[0::2], rtol=1e-12)
    assert np.allclose(cs[0::2], cs[1::2], rtol=1e-10)


@pytest.mark.parametrize("kernel", KERNELS)
def test_real_input_gives_real_factors(kernel, rng):
    a = QuaternionTensor.random((7, 4), rng, real=True)
    f = qsvd(a, kernel)
    assert np.abs(f.U.data[1:]).max() <= 1e-12
    assert np.abs(f.V.data[1:]).max() <= 1e-12
    assert np.allclose(f.sigma, np.linalg.svd(a.w, compute_uv=False), rtol=1e-12)


def test_pair_mismatch_raises(monkeypatch):
    def broken(a, kernel):
        u, s, vh = np.linalg.svd(a, full_matrices=False)
        s = s.copy()
        s[1] = 0.5 * s[0]
        return u, s, vh

    monkeypatch.setattr(quatmat, "complex_svd", broken)
    with pytest.raises(QSVDConsistencyError):
        qsvd(QuaternionTensor.identity(3) * 2.0 + QuaternionTensor.random((3, 3), np.random.default_rng(0)))


# truncation and rank ------------------------------------------------------------------


def test_truncation_rank_examples():
    assert truncation_rank(np.array([5.0, 1.0, 0.01]), 1.0) == 2
    assert truncation_rank(np.array([5.0, 1.0]), 10.0) == 1
    assert truncation_rank(np.array([5.0, 1.0, 0.01]), 0.0) == 3
    # tail rule: drop the largest tail with energy <= delta^2
    assert truncation_rank(np.array([5.0, 1.0, 0.01]), 0.5, rule="tail") == 2
    assert truncation_rank(np.array([5.0, 1.0, 0.01]), 1.01, rule="tail") == 1
    with pytest.raises(ValueError):
        truncation_rank(np.array([1.0]), -1.0)
    with pytest.raises(ValueError):
        truncation_rank(np.array([1.0]), 1.0, rule="nope")


def test_truncated_qsvd_full_at_zero_delta(rng):
    a = QuaternionTensor.random((6, 4), rng)
    f, r = truncated_qsvd(a, 0.0)
    assert r == 4 and frobenius_norm(f.reconstruct() - a) <= 1e-12 * frobenius_norm(a)


@given(shape=shapes, seed=seeds, delta=st.floats(0.0, 5.0))
def test_tail_rule_error_bound(shape, seed, delta):
    a = _q(shape, seed)
    f, r = truncated_qsvd(a, delta, rule="tail")
    err = frobenius_norm(f.reconstruct() - a)
    assert r >= 1
    assert err <= delta + 1e-10 * frobenius_norm(a) or r == 1


def test_rank_examples(rng):
    assert rank(QuaternionTensor.identity(3)) == 3
    u, v = QuaternionTensor.random((5, 1), rng), QuaternionTensor.random((4, 1), rng)
    assert rank(left_mul(u, v.H)) == 1
    assert rank(QuaternionTensor.zeros((3, 3))) == 0
    with pytest.raises(ValueError):
        rank(QuaternionTensor.identity(2), side="up")


@given(m=st.integers(1, 6), n=st.integers(1, 6), p=st.integers(1, 6), r1=st.integers(1, 3), r2=st.integers(1, 3), seed=seeds)
def test_rank_inequalities(m, n, p, r1, r2, seed):
    # factors of prescribed rank so the bounds are not trivially met by shape
    a = left_mul(_q((m, r1), seed), _q((r1, n), seed + 1))
    b = left_mul(_q((n, r2), seed + 2), _q((r2, p), seed + 3))
    assert rank(left_mul(a, b)) <= min(rank(a), rank(b))
    left = lambda x: rank(x, side="left")  # noqa: E731
    assert left(right_mul(a, b)) <= min(left(a), left(b))


def test_right_product_breaks_right_rank_bound(rng):
    # the bound for ._R needs the left rank; with the QSVD (right) rank it fails
    a, b = QuaternionTensor.random((6, 2), rng), QuaternionTensor.random((2, 6), rng)
    c = right_mul(a, b)
    assert rank(a) == rank(b) == 2
    assert rank(c) > 2
    assert rank(c, side="left") == 2


def test_eckart_young(rng):
    a = QuaternionTensor.random((8, 6), rng)
    f = qsvd(a)
    for r in (1, 2, 4):
        best = frobenius_norm(f.truncate(r).reconstruct() - a)
        assert best == pytest.approx(np.sqrt(np.sum(f.sigma[r:] ** 2)), rel=1e-10)
        for _ in range(10):
            x = left_mul(QuaternionTensor.random((8, r), rng), QuaternionTensor.random((r, 6), rng))
            assert best <= frobenius_norm(x - a)
