import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from proxyreg import numerics as nx
from proxyreg.errors import ConfigError, ContractError, DimensionError, DomainError, NumericalError

finite = st.floats(-50, 50, allow_nan=False)


# -- primitive forward --------------------------------------------------------

def test_matmul_identity():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(nx.matmul(a, np.eye(2)), a)


def test_tanh_zero_and_add():
    assert nx.tanh(np.array([0.0]))[0] == 0.0
    np.testing.assert_array_equal(nx.add([1.0, 2.0], [3.0, 4.0]), [4.0, 6.0])


def test_primitive_dispatch():
    np.testing.assert_array_equal(nx.primitive_forward("add", [1.0, 2.0], [3.0, 4.0]), [4.0, 6.0])
    np.testing.assert_array_equal(nx.primitive_forward("concat", [1.0], [2.0, 3.0]), [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(nx.primitive_forward("scale", [1.0, -2.0], 3.0), [3.0, -6.0])
    with pytest.raises(DomainError):
        nx.primitive_forward("conv", [1.0])


@pytest.mark.parametrize("op", [nx.add, nx.sub, nx.mul])
def test_elementwise_shape_mismatch(op):
    with pytest.raises(DimensionError):
        op(np.ones(3), np.ones(4))


def test_matmul_shape_mismatch():
    with pytest.raises(DimensionError):
        nx.matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_nonfinite_result_raises():
    with pytest.raises(NumericalError):
        nx.exp(np.array([1000.0]))


def test_sigmoid_extremes_are_finite():
    y = nx.sigmoid(np.array([-800.0, 0.0, 800.0]))
    np.testing.assert_allclose(y, [0.0, 0.5, 1.0])


# -- logsumexp ----------------------------------------------------------------

def test_logsumexp_examples():
    assert float(nx.logsumexp(np.array([0.0, 0.0]))) == pytest.approx(math.log(2), abs=1e-15)
    assert float(nx.logsumexp(np.array([1000.0, 1000.0]))) == pytest.approx(1000 + math.log(2), abs=1e-12)
    # direct summation at high precision
    expected = math.log(math.fsum(math.exp(v) for v in (1, 2, 3)))
    assert float(nx.logsumexp(np.array([1.0, 2.0, 3.0]))) == pytest.approx(expected, abs=1e-14)
    assert expected == pytest.approx(3.407606, abs=1e-6)


def test_logsumexp_extreme_inputs():
    assert float(nx.logsumexp(np.array([1e6, -1e6]))) == 1e6
    assert float(nx.logsumexp(np.array([-1e6, -1e6]))) == pytest.approx(-1e6 + math.log(2))


def test_logsumexp_empty():
    with pytest.raises(DomainError):
        nx.logsumexp(np.array([]))


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 12), elements=finite), st.floats(-1e3, 1e3))
def test_logsumexp_shift(v, c):
    assert float(nx.logsumexp(v + c)) == pytest.approx(float(nx.logsumexp(v)) + c, abs=1e-10)


# -- cosine -------------------------------------------------------------------

def test_cosine_examples():
    assert float(nx.cosine(np.array([1.0, 0.0]), np.array([1.0, 0.0]))) == 1.0
    assert float(nx.cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0]))) == 0.0
    assert float(nx.cosine(np.array([1.0, 2.0]), np.array([2.0, 1.0]))) == pytest.approx(0.8, abs=1e-15)


def test_cosine_zero_norm_convention():
    assert float(nx.cosine(np.zeros(3), np.ones(3))) == 0.0
    assert float(nx.cosine(np.full(3, 1e-13), np.ones(3))) == 0.0


def test_cosine_length_mismatch():
    with pytest.raises(DimensionError):
        nx.cosine(np.ones(2), np.ones(3))


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, 6, elements=st.floats(-10, 10)), arrays(np.float64, 6, elements=st.floats(-10, 10)),
       st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_cosine_scale_invariant(u, v, alpha, beta):
    if np.linalg.norm(u) < 1e-6 or np.linalg.norm(v) < 1e-6:
        return
    c = float(nx.cosine(u, v))
    assert -1 - 1e-12 <= c <= 1 + 1e-12
    assert float(nx.cosine(alpha * u, beta * v)) == pytest.approx(c, abs=1e-12)


# -- mean_max_pool ---------------------------------------------------------------

def test_mean_max_pool_examples():
    np.testing.assert_array_equal(nx.mean_max_pool(np.array([[1.0, 2.0, 3.0]])), [2.0, 4.0, 6.0])
    np.testing.assert_array_equal(nx.mean_max_pool(np.zeros((2, 2))), [0.0, 0.0])
    np.testing.assert_array_equal(nx.mean_max_pool(np.array([[1.0, 4.0], [3.0, 2.0]])), [5.0, 7.0])


def test_mean_max_pool_empty():
    with pytest.raises(DomainError):
        nx.mean_max_pool(np.zeros((0, 3)))


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 5)), elements=finite), st.randoms())
def test_mean_max_pool_row_permutation(h, rnd):
    perm = list(range(h.shape[0]))
    rnd.shuffle(perm)
    np.testing.assert_allclose(nx.mean_max_pool(h[perm]), nx.mean_max_pool(h), atol=1e-12)


def test_masked_pool_ignores_padding():
    h = np.array([[[1.0, 4.0], [3.0, 2.0], [100.0, 100.0]]])
    out = nx.mean_max_pool(h, axis=1, mask=np.array([[True, True, False]]))
    np.testing.assert_array_equal(out, [[5.0, 7.0]])


def test_max_tie_gradient_goes_to_first():
    g = nx.Graph()
    p = g.param("p", np.array([2.0, 5.0, 5.0, 1.0]))
    grads = nx.backward(g, nx.max(p, axis=0))
    np.testing.assert_array_equal(grads["p"], [0.0, 1.0, 0.0, 0.0])


# -- backward -----------------------------------------------------------------

def test_backward_sum_and_quadratic():
    g = nx.Graph()
    p = g.param("p", np.array([1.0, -2.0, 3.5]))
    np.testing.assert_array_equal(nx.backward(g, nx.sum(p))["p"], np.ones(3))
    g = nx.Graph()
    p = g.param("p", np.array([1.0, -2.0, 3.5]))
    np.testing.assert_array_equal(nx.backward(g, nx.sum(p * p))["p"], [2.0, -4.0, 7.0])


def test_backward_unreachable_param_gets_zero():
    g = nx.Graph()
    p = g.param("p", np.ones(2))
    g.param("q", np.ones((3, 2)))
    grads = nx.backward(g, nx.sum(nx.tanh(p)))
    np.testing.assert_array_equal(grads["q"], np.zeros((3, 2)))


def test_backward_non_scalar_loss():
    g = nx.Graph()
    p = g.param("p", np.ones(2))
    with pytest.raises(ContractError):
        nx.backward(g, nx.tanh(p))


def test_graph_is_append_only_and_ordered():
    g = nx.Graph()
    p = g.param("p", np.ones(2))
    y = nx.tanh(p * 2.0)
    assert [n.index for n in g.nodes] == list(range(len(g)))
    for node in g.nodes:
        assert all(par.index < node.index for par in node.parents if isinstance(par, nx.Node))
    assert y.index == len(g) - 1


def random_recipe(rng, depth):
    """A random op sequence over params drawn from a fixed pool."""
    rows, cols = rng.integers(1, 7), rng.integers(1, 7)
    params = {"x0": rng.normal(size=(rows, cols))}
    steps = []
    width = cols
    for i in range(depth):
        kind = rng.choice(["add", "sub", "mul", "matmul", "tanh", "sigmoid", "concat", "scale",
                           "lse", "norm", "pool"])
        name = f"w{i}"
        if kind in ("add", "sub", "mul"):
            params[name] = rng.normal(size=(rows, width))
        elif kind == "matmul":
            new = int(rng.integers(1, 7))
            params[name] = rng.normal(size=(width, new)) / math.sqrt(width)
            width = new
        elif kind == "concat":
            extra = int(rng.integers(1, 4))
            params[name] = rng.normal(size=(rows, extra))
            width += extra
        steps.append((kind, name, float(rng.uniform(-2, 2))))
    params["out"] = rng.normal(size=(rows, width))
    return params, steps


def run_recipe(params, steps):
    x = params["x0"]
    for kind, name, c in steps:
        if kind == "add":
            x = nx.add(x, params[name])
        elif kind == "sub":
            x = nx.sub(params[name], x)
        elif kind == "mul":
            x = nx.mul(x, params[name])
        elif kind == "matmul":
            x = nx.matmul(x, params[name])
        elif kind == "tanh":
            x = nx.tanh(x)
        elif kind == "sigmoid":
            x = nx.sigmoid(x)
        elif kind == "concat":
            x = nx.concat([x, params[name]], axis=1)
        elif kind == "scale":
            x = nx.scale(x, c)
        elif kind == "lse":
            # keep the shape: add a broadcast log-sum-exp column
            x = nx.add(x, nx.logsumexp(x, axis=1, keepdims=True))
        elif kind == "norm":
            x = nx.l2_normalize(x, axis=1)
        elif kind == "pool":
            x = nx.add(x, nx.mean_max_pool(x, axis=0))
    return nx.sum(nx.mul(x, params["out"]))


def test_backward_matches_finite_differences_on_random_graphs():
    rng = np.random.default_rng(1234)
    worst = 0.0
    for case in range(100):
        params, steps = random_recipe(rng, int(rng.integers(1, 7)))
        g = nx.Graph()
        loss = run_recipe(g.bind(params), steps)
        analytic = nx.backward(g, loss)
        numeric = nx.finite_diff_grad(lambda th: float(run_recipe(th, steps)), params)
        err = nx.relative_error(analytic, numeric)
        worst = max(worst, err)
        assert err < 1e-4, (case, steps, err)
    assert worst < 1e-4


# -- finite differences ----------------------------------------------------------

def test_finite_diff_examples():
    assert nx.finite_diff_grad(lambda x: float(x[0] ** 2), np.array([3.0]))[0] == pytest.approx(6.0, abs=1e-8)
    np.testing.assert_array_equal(nx.finite_diff_grad(lambda x: 4.0, np.ones(3)), np.zeros(3))


def test_finite_diff_bad_step():
    with pytest.raises(ConfigError):
        nx.finite_diff_grad(lambda x: 0.0, np.ones(1), h=0.0)


# -- adam ---------------------------------------------------------------------

def test_adam_zero_gradient():
    params = {"p": np.array([1.0, -2.0])}
    state = nx.AdamState({"p": np.array([0.5, 0.5])}, {"p": np.array([0.1, 0.1])}, 3)
    new, st2 = nx.adam_step(params, {"p": np.zeros(2)}, state, 0.1)
    np.testing.assert_allclose(new["p"], params["p"] - 0.1 * (0.45 / (1 - 0.9 ** 4))
                               / (np.sqrt(0.0999 / (1 - 0.999 ** 4)) + 1e-8))
    np.testing.assert_allclose(st2.m["p"], [0.45, 0.45])
    assert st2.t == 4
    # fresh state: nothing moves
    fresh, _ = nx.adam_step(params, {"p": np.zeros(2)}, nx.AdamState(), 0.1)
    np.testing.assert_array_equal(fresh["p"], params["p"])


def test_adam_first_step_hand_trace():
    new, state = nx.adam_step({"p": np.array(0.0)}, {"p": np.array(1.0)}, nx.AdamState(), 0.1)
    # m_hat = 1, v_hat = 1
    assert float(new["p"]) == pytest.approx(-0.1 / (1 + 1e-8), abs=1e-15)
    assert state.t == 1


def test_adam_two_steps_match_sequential_trace():
    g = np.array([0.3, -1.2])
    p = np.array([1.0, 2.0])
    params, state = {"p": p}, nx.AdamState()
    for _ in range(2):
        params, state = nx.adam_step(params, {"p": g}, state, 0.05)
    m = v = np.zeros(2)
    ref = p.copy()
    for t in (1, 2):
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 0.05 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    np.testing.assert_allclose(params["p"], ref, rtol=0, atol=1e-15)
    assert state.t == 2


def test_adam_rejects_bad_lr():
    with pytest.raises(ConfigError):
        nx.adam_step({"p": np.zeros(1)}, {"p": np.zeros(1)}, nx.AdamState(), 0.0)
