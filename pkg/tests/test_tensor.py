import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from longmusic import tensor as T
from longmusic.errors import ContractError, DimensionError
from longmusic.oracles import matmul_loop
from longmusic.verify import GRAD_TOL, _op_cases, op_gradchecks


def test_matmul_identity():
    m = np.arange(9.0).reshape(3, 3)
    np.testing.assert_array_equal(T.matmul(T.Tensor(np.eye(3)), T.Tensor(m)).data, m)
    got = T.Tensor([[1.0, 2.0], [3.0, 4.0]]) @ T.Tensor([[1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_array_equal(got.data, [[1, 2], [3, 4]])


@pytest.mark.parametrize("seed", range(3))
def test_matmul_matches_triple_loop(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((5, 7)), rng.standard_normal((7, 3))
    with T.precision("float64"):
        got = T.matmul(T.Tensor(a), T.Tensor(b)).data
    assert np.abs(got - matmul_loop(a, b)).max() <= 1e-6


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(4, 5\)"):
        T.matmul(T.Tensor(np.ones((2, 3))), T.Tensor(np.ones((4, 5))))


def test_matmul_counts_macs():
    with T.count_macs() as c:
        T.matmul(T.Tensor(np.ones((2, 4, 5))), T.Tensor(np.ones((5, 3))))
    assert c.total == 2 * 4 * 5 * 3


def test_masked_softmax_examples():
    np.testing.assert_allclose(T.masked_softmax(T.Tensor([0.0, 0.0, 0.0]), [1, 1, 1]).data, [1 / 3] * 3, atol=1e-7)
    np.testing.assert_array_equal(T.masked_softmax(T.Tensor([10.0, 0.0]), [1, 0]).data, [1.0, 0.0])
    expected = [math.exp(x) / sum(math.exp(y) for y in (1, 2, 3)) for x in (1, 2, 3)]
    got = T.masked_softmax(T.Tensor([1.0, 2.0, 3.0])).data
    np.testing.assert_allclose(got, expected, atol=1e-6)
    np.testing.assert_allclose(got, [0.0900, 0.2447, 0.6652], atol=1e-3)


def test_fully_masked_row_is_zero_and_flagged():
    out, empty = T.masked_softmax(T.Tensor(np.ones((2, 3))), np.array([[0, 0, 0], [1, 0, 1]]), return_status=True)
    np.testing.assert_array_equal(out.data[0], 0.0)
    assert not np.isnan(out.data).any()
    assert empty.ravel().tolist() == [True, False]


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float64, (4, 6), elements=st.floats(-50, 50)),
    arrays(np.bool_, (4, 6)),
)
def test_masked_softmax_rows_sum_to_one(x, mask):
    with T.precision("float64"):
        out = T.masked_softmax(T.Tensor(x), mask).data
    assert (out[~mask] == 0).all()
    sums = out.sum(-1)
    live = mask.any(-1)
    np.testing.assert_allclose(sums[live], 1.0, atol=1e-6)
    assert (sums[~live] == 0).all()


def test_layer_norm_examples():
    g, b = T.Tensor(np.ones(4)), T.Tensor(np.zeros(4))
    np.testing.assert_allclose(T.layer_norm(T.Tensor(np.full(4, 3.0)), g, b).data, 0.0, atol=1e-6)
    g2, b2 = T.Tensor(np.ones(2)), T.Tensor(np.zeros(2))
    np.testing.assert_allclose(T.layer_norm(T.Tensor([1.0, -1.0]), g2, b2, eps=1e-12).data, [1.0, -1.0], atol=1e-6)
    with T.precision("float64"):
        x = np.random.default_rng(0).normal(3.0, 5.0, size=64)
        out = T.layer_norm(T.Tensor(x), T.Tensor(np.ones(64)), T.Tensor(np.zeros(64))).data
    assert abs(out.mean()) <= 1e-6
    assert abs(out.var() - 1) <= 1e-3


def test_layer_norm_empty_dim():
    with pytest.raises(DimensionError):
        T.layer_norm(T.Tensor(np.zeros((2, 0))), T.Tensor(np.zeros(0)), T.Tensor(np.zeros(0)))


def test_backward_simple_cases():
    with T.precision("float64"):
        w = T.parameter(np.random.default_rng(0).standard_normal((3, 4)))
        grads = w.sum().backward()
        np.testing.assert_array_equal(grads[w], np.ones((3, 4)))
        w.zero_grad()
        grads = (w * w).sum().backward()
        np.testing.assert_allclose(grads[w], 2 * w.data)


def test_backward_rejects_non_scalar():
    w = T.parameter(np.ones(3))
    with pytest.raises(ContractError):
        (w * 2).backward()


def test_diamond_graph_accumulates():
    with T.precision("float64"):
        x = T.parameter(np.array([0.3, -1.2]))
        y = T.exp(x)
        loss = (y * y + y).sum()  # d/dx = 2e^{2x} + e^x
        loss.backward()
        np.testing.assert_allclose(x.grad, 2 * np.exp(2 * x.data) + np.exp(x.data))


def test_no_graph_without_grad_leaves():
    a = T.Tensor(np.ones(3))
    assert (a * 2 + 1).grad_node is None
    p = T.parameter(np.ones(3))
    assert (p * 2).grad_node is not None
    with T.no_grad():
        assert (p * 2).grad_node is None


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (2, 3, 4), elements=st.floats(-10, 10)))
def test_views_preserve_element_sum(x):
    with T.precision("float64"):
        t = T.Tensor(x)
        total = x.sum()
        for view in (t.reshape(6, 4), t.transpose(2, 0, 1), t.swapaxes(0, 1), t.reshape(-1)):
            assert view.data.sum() == pytest.approx(total, rel=1e-6, abs=1e-9)
            assert sorted(view.data.ravel()) == sorted(x.ravel())


def test_dropout_inverted_scaling_and_eval_identity():
    x = T.Tensor(np.ones((200, 200)))
    out = T.dropout(x, 0.25, np.random.default_rng(0), training=True).data
    assert set(np.unique(out)) <= {0.0, np.float32(1 / 0.75)}
    assert abs(out.mean() - 1) < 0.02
    np.testing.assert_array_equal(T.dropout(x, 0.25, None, training=False).data, x.data)


def test_cross_entropy_ignores_index():
    logits = T.Tensor(np.zeros((3, 5)))
    loss = T.cross_entropy(logits, np.array([1, 4, 4]), ignore_index=4)
    assert float(loss.data) == pytest.approx(math.log(5), rel=1e-6)


def test_precision_context_restores_default():
    assert T.get_default_dtype() == np.float32
    with T.precision("float64"):
        assert T.Tensor([1.0]).dtype == np.float64
    assert T.Tensor([1.0]).dtype == np.float32


def test_gradcheck_requires_float64():
    p = T.parameter(np.ones(2, dtype=np.float32))
    with pytest.raises(ContractError):
        T.gradcheck(lambda: p.sum(), {"p": p})


@pytest.mark.parametrize("seed", range(5))
def test_every_op_gradient(seed):
    reports = op_gradchecks(seed)
    with T.precision("float64"):
        assert set(reports) == set(_op_cases(np.random.default_rng(0)))
    bad = {k: r.max_rel_error for k, r in reports.items() if not r.passed(GRAD_TOL)}
    assert not bad


def test_gradcheck_detects_a_wrong_gradient():
    with T.precision("float64"):
        x = T.parameter(np.random.default_rng(0).standard_normal(4))

        def broken():
            y = T.Tensor(x.data ** 3)  # forward uses x**3 ...
            return T.mul(x, T.Tensor(np.ones(4))).sum() + y.sum()  # ... gradient only sees x

        rep = T.gradcheck(broken, {"x": x})
    assert not rep.passed(GRAD_TOL)
