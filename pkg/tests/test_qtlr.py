import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import all_indices, element_by_sum, left_matmul, right_matmul
from qtlrkit.qtlr import (
    QTLRCores,
    chain,
    element,
    left_connect,
    load_cores,
    qtlr_qsvd,
    reconstruct,
    reconstruct_permuted,
    relative_error,
    right_connect,
    save_cores,
    split_rank,
    subchain,
    trace_map,
    truncation_thresholds,
)
from qtlrkit.quatcore import Quaternion
from qtlrkit.quatmat import left_mul, rank
from qtlrkit.quattensor import (
    QuaternionTensor,
    circular_unfolding,
    classical_mode_k_unfolding,
    frobenius_norm,
    k_unfolding,
    mode_k_unfolding,
    permute_cyclic,
)

seeds = st.integers(0, 2**32 - 1)
small_dims = st.lists(st.integers(1, 3), min_size=2, max_size=4).map(tuple)


def _cores(dims, ranks, seed=0, real=False):
    return QTLRCores.random(dims, ranks, np.random.default_rng(seed), real=real)


def _lateral(z, i):
    return z.data[:, :, i, :]


def test_core_chain_validation(rng):
    with pytest.raises(ValueError):
        QTLRCores([QuaternionTensor.random((2, 3, 3), rng), QuaternionTensor.random((2, 3, 2), rng)])
    with pytest.raises(ValueError):
        QTLRCores([])
    zc = _cores((3, 4, 5), (2, 3, 1))
    assert zc.ranks == (2, 3, 1) and zc.dims == (3, 4, 5) and zc.order == 3
    assert zc.num_params() == 2 * 3 * 3 + 3 * 4 * 1 + 1 * 5 * 2


# element ------------------------------------------------------------------------


def test_element_matches_trace_sum_oracle():
    zc = _cores((2, 3, 2), (2, 2, 2), seed=3)
    for idx in all_indices(zc.dims):
        ref = element_by_sum([z.data for z in zc.cores], idx)
        assert element(zc, idx).isclose(ref, atol=1e-12)


def test_element_rank_one_is_scalar_product():
    zc = _cores((2, 2, 2), (1, 1, 1), seed=4)
    idx = (2, 1, 2)
    scalars = [Quaternion(*zc.cores[n].data[:, 0, idx[n] - 1, 0]) for n in range(3)]
    assert element(zc, idx).isclose(scalars[0] * scalars[1] * scalars[2], atol=1e-12)


def test_single_core_ring_is_slice_trace(rng):
    z = QuaternionTensor.random((2, 3, 2), rng)
    zc = QTLRCores([z])
    for i in (1, 2, 3):
        s = _lateral(z, i - 1)
        assert element(zc, (i,)).isclose(Quaternion(*(s[:, 0, 0] + s[:, 1, 1])), atol=1e-14)
    assert np.allclose(reconstruct(zc).data[:, 2], s[:, 0, 0] + s[:, 1, 1])


def test_element_bounds():
    zc = _cores((2, 2), (1, 1))
    with pytest.raises(IndexError):
        element(zc, (3, 1))


# connection products ------------------------------------------------------------------


@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), seeds)
def test_connect_lateral_slices(ra, ia, rb, ib, rc, seed):
    rng = np.random.default_rng(seed)
    a, b = QuaternionTensor.random((ra, ia, rb), rng), QuaternionTensor.random((rb, ib, rc), rng)
    lc, rcn = left_connect(a, b), right_connect(a, b)
    assert lc.dims == rcn.dims == (ra, ia * ib, rc)
    for i in range(ia):
        for j in range(ib):
            t = i + j * ia
            assert np.allclose(lc.data[:, :, t, :], left_matmul(_lateral(a, i), _lateral(b, j)), atol=1e-12)
            assert np.allclose(rcn.data[:, :, t, :], right_matmul(_lateral(a, i), _lateral(b, j)), atol=1e-12)


def test_connect_shapes_and_real_cores(rng):
    a, b = QuaternionTensor.random((2, 3, 4), rng), QuaternionTensor.random((4, 5, 2), rng)
    assert left_connect(a, b).dims == (2, 15, 2)
    with pytest.raises(ValueError):
        left_connect(a, a)
    ar, br = QuaternionTensor.random((2, 3, 4), rng, real=True), QuaternionTensor.random((4, 5, 2), rng, real=True)
    assert np.allclose(left_connect(ar, br).data, right_connect(ar, br).data, atol=1e-13)


def test_subchains():
    zc = _cores((2, 3, 2, 2), (2, 3, 2, 1), seed=5)
    assert np.array_equal(subchain(zc, "<=", 1).data, zc.cores[0].data)
    full = subchain(zc, ">=", 1)
    assert full.dims == (2, 24, 2)
    lt = subchain(zc, "<", 3)
    assert lt.dims == (2, 6, 2)
    for i in range(2):
        for j in range(3):
            ref = left_matmul(_lateral(zc.cores[0], i), _lateral(zc.cores[1], j))
            assert np.allclose(lt.data[:, :, i + 2 * j, :], ref, atol=1e-12)
    assert subchain(zc, ">", 2).dims == (2, 4, 2)
    with pytest.raises(ValueError):
        subchain(zc, "<", 1)
    with pytest.raises(ValueError):
        subchain(zc, ">", 4)
    with pytest.raises(ValueError):
        subchain(zc, "~", 2)


# reconstruction ------------------------------------------------------------------


def test_reconstruct_matches_element_exhaustively():
    zc = _cores((2, 2, 2), (2, 3, 2), seed=6)
    t = reconstruct(zc)
    for idx in all_indices(zc.dims):
        assert t.entry(idx).isclose(element(zc, idx), atol=1e-12)


def test_reconstruct_zero_and_tensor_train(rng):
    zero = QTLRCores([QuaternionTensor.zeros((2, 3, 2)), QuaternionTensor.zeros((2, 4, 2))])
    assert np.array_equal(reconstruct(zero).data, np.zeros((4, 3, 4)))
    # r1 = 1: plain chain of left products of row vector, matrices and column vector
    zc = _cores((2, 3, 2), (1, 2, 3), seed=7)
    for idx in all_indices(zc.dims):
        m = left_matmul(left_matmul(_lateral(zc.cores[0], idx[0] - 1), _lateral(zc.cores[1], idx[1] - 1)),
                        _lateral(zc.cores[2], idx[2] - 1))
        assert np.allclose(reconstruct(zc).entry(idx).as_tuple(), m[:, 0, 0], atol=1e-12)


def test_trace_map_rejects_nonsquare(rng):
    with pytest.raises(ValueError):
        trace_map(QuaternionTensor.random((2, 3, 1), rng), (3,))


@given(small_dims, seeds, st.data())
def test_cyclic_permutation(dims, seed, data):
    ranks = data.draw(st.lists(st.integers(1, 3), min_size=len(dims), max_size=len(dims)))
    zc = _cores(dims, ranks, seed)
    t = reconstruct(zc)
    assert np.array_equal(reconstruct_permuted(zc, 1).data, t.data)
    for n in range(1, len(dims) + 1):
        diff = reconstruct_permuted(zc, n).data - permute_cyclic(t, n).data
        assert np.abs(diff).max() <= 1e-10 * max(1.0, np.abs(t.data).max())


def test_cyclic_permutation_elementwise_oracle():
    zc = _cores((2, 2, 2), (2, 2, 2), seed=8)
    p = reconstruct_permuted(zc, 2)
    # the permuted chain is a right product of the two subchain groups
    for idx in all_indices((2, 2, 2)):
        head = left_matmul(_lateral(zc.cores[1], idx[0] - 1), _lateral(zc.cores[2], idx[1] - 1))
        prod = right_matmul(head, _lateral(zc.cores[0], idx[2] - 1))
        assert np.allclose(p.entry(idx).as_tuple(), prod[:, 0, 0] + prod[:, 1, 1], atol=1e-12)


@given(small_dims, seeds, st.data())
def test_k_unfolding_factorisation(dims, seed, data):
    ranks = data.draw(st.lists(st.integers(1, 3), min_size=len(dims), max_size=len(dims)))
    zc = _cores(dims, ranks, seed)
    t = reconstruct(zc)
    for k in range(1, len(dims)):
        lhs = k_unfolding(t, k)
        rhs = left_mul(classical_mode_k_unfolding(subchain(zc, "<=", k), 2),
                       mode_k_unfolding(subchain(zc, ">", k), 2).T)
        assert frobenius_norm(lhs - rhs) <= 1e-10 * max(1.0, frobenius_norm(lhs))


# rank bound -------------------------------------------------------------------------


def test_circular_unfolding_rank_bound_left_rank():
    ranks = (2, 3, 2, 3)
    zc = _cores((4, 5, 4, 5), ranks, seed=9)
    t = reconstruct(zc)
    n = 4
    for k in range(2, n + 1):
        l = n - k + 1
        bound = ranks[k - 1] * ranks[(k + l - 1) % n]
        assert rank(circular_unfolding(t, k, l), side="left") <= bound


def test_circular_unfolding_right_rank_exceeds_bound():
    zc = _cores((6, 6, 6, 6), (2, 2, 2, 2), seed=10)
    c = circular_unfolding(reconstruct(zc), 3, 2)
    assert rank(c, side="left") <= 4 < rank(c)


# learning ------------------------------------------------------------------------


def test_split_rank_and_thresholds():
    assert split_rank(4) == (2, 2)
    assert split_rank(12) == (3, 4)
    assert split_rank(7) == (1, 7)
    assert split_rank(1) == (1, 1)
    with pytest.raises(ValueError):
        split_rank(0)
    d1, dn = truncation_thresholds(2.0, 0.1, 4)
    assert dn == pytest.approx(0.1) and d1 == pytest.approx(0.1 * math.sqrt(2))


@given(st.lists(st.integers(2, 4), min_size=2, max_size=4).map(tuple), seeds,
       st.sampled_from([0.5, 0.3, 0.1, 0.01]))
def test_error_budget(dims, seed, eps):
    t = QuaternionTensor.random(dims, np.random.default_rng(seed))
    zc = qtlr_qsvd(t, eps)
    assert zc.dims == dims
    assert relative_error(t, zc) <= eps + 1e-12


def test_exact_cores_reconstruct():
    zc = _cores((4, 4, 4, 4), (2, 2, 2, 2), seed=11)
    t = reconstruct(zc)
    learned = qtlr_qsvd(t, 1e-10)
    assert relative_error(t, learned) <= 1e-8
    r1, r2 = learned.ranks[:2]
    assert r1 * r2 <= 4


def test_separable_tensor_has_unit_ranks(rng):
    vecs = [rng.standard_normal(d) for d in (3, 4, 2, 5)]
    w = np.einsum("a,b,c,d->abcd", *vecs)
    t = QuaternionTensor.from_components(w)
    zc = qtlr_qsvd(t, 1e-8)
    assert zc.ranks == (1, 1, 1, 1)
    assert relative_error(t, zc) <= 1e-12


def test_real_input_stays_real(rng):
    t = QuaternionTensor.random((3, 4, 3, 2), rng, real=True)
    zc = qtlr_qsvd(t, 0.1)
    for z in zc.cores:
        assert np.abs(z.data[1:]).max() <= 1e-12
    assert np.abs(reconstruct(zc).data[1:]).max() <= 1e-12


def test_literal_rule_is_available(rng):
    t = QuaternionTensor.random((3, 3, 3), rng)
    zc = qtlr_qsvd(t, 0.1, rule="delta_squared")
    assert zc.dims == (3, 3, 3)
    with pytest.raises(ValueError):
        qtlr_qsvd(t, 0.0)
    with pytest.raises(ValueError):
        qtlr_qsvd(QuaternionTensor.random((3,), rng), 0.1)


def test_relative_error_examples(rng):
    zc = _cores((2, 2), (1, 1), seed=12)
    t = reconstruct(zc)
    assert relative_error(t, zc) == 0.0
    zero = QTLRCores([QuaternionTensor.zeros((1, 2, 1)), QuaternionTensor.zeros((1, 2, 1))])
    assert relative_error(t, zero) == pytest.approx(1.0)
    t2 = QuaternionTensor.from_components(np.array([[3.0, 0.0], [0.0, 4.0]]))
    one = QTLRCores([QuaternionTensor.from_components(np.array([[[3.0], [0.0]]])),
                     QuaternionTensor.from_components(np.array([[[1.0], [0.0]]]))])
    # reconstruction [[3, 0], [0, 0]] leaves the entry 4: error 4/5
    assert relative_error(t2, one) == pytest.approx(0.8)
    with pytest.raises(ZeroDivisionError):
        relative_error(QuaternionTensor.zeros((2, 2)), zero)
    with pytest.raises(ValueError):
        relative_error(QuaternionTensor.zeros((2, 3)), zero)


def test_save_load_cores(tmp_path):
    zc = _cores((2, 3, 4), (2, 1, 3), seed=13)
    save_cores(zc, tmp_path / "c")
    back = load_cores(tmp_path / "c")
    assert back.ranks == zc.ranks
    for a, b in zip(back.cores, zc.cores):
        assert np.array_equal(a.data, b.data)
    text = (tmp_path / "c" / "cores.txt").read_text()
    assert "order=3" in text and "ranks=2,1,3" in text
    assert chain(zc.cores).dims == (2, 24, 2)


def test_zero_tensor_gives_zero_cores():
    zc = qtlr_qsvd(QuaternionTensor.zeros((2, 3, 2)), 0.1)
    assert zc.ranks == (1, 1, 1)
    assert all(not np.any(z.data) for z in zc.cores)
