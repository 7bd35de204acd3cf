import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from oracles import central_difference
from monig import autodiff as ad
from monig.autodiff import (
    MLP,
    AdamState,
    EvidentialHead,
    Linear,
    MLPSpec,
    Parameter,
    Tensor,
    adam_step,
    concat,
    evidential_transform,
    mlp_forward,
    no_grad,
)
from monig.errors import ConfigError, GraphConsumed, ShapeMismatch
from monig.nig import is_valid

UNARY = {
    "log": (lambda t: t.log(), lambda x: np.log(x), (0.2, 3.0)),
    "exp": (lambda t: t.exp(), np.exp, (-2.0, 2.0)),
    "tanh": (lambda t: t.tanh(), np.tanh, (-2.0, 2.0)),
    "softplus": (lambda t: t.softplus(), lambda x: np.logaddexp(0, x), (-5.0, 5.0)),
    "lgamma": (lambda t: t.lgamma(), lambda x: np.array([__import__("math").lgamma(v) for v in np.ravel(x)]).reshape(np.shape(x)), (0.5, 6.0)),
    "pow3": (lambda t: t**3, lambda x: x**3, (-2.0, 2.0)),
    "recip": (lambda t: 1.0 / t, lambda x: 1.0 / x, (0.5, 2.0)),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_gradients(name):
    op, ref, (lo, hi) = UNARY[name]
    rng = np.random.default_rng(0)
    x0 = rng.uniform(lo, hi, size=(3, 2))
    p = Parameter(x0)
    op(p).sum().backward()
    fd = central_difference(lambda v: float(np.sum(ref(v))), x0)
    np.testing.assert_allclose(p.grad, fd, rtol=1e-6, atol=1e-9)


def test_binary_and_broadcast_gradients():
    rng = np.random.default_rng(1)
    a0, b0, w0 = rng.normal(size=(4, 3)), rng.normal(size=3), rng.normal(size=(3, 2))
    a, b, w = Parameter(a0), Parameter(b0), Parameter(w0)

    def f(a_, b_, w_):
        return ((((a_ + b_) * a_ - b_ / 2.0) @ w_) ** 2).mean()

    f(a, b, w).backward()
    np.testing.assert_allclose(a.grad, central_difference(lambda v: f(v, b0, w0), a0), rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(b.grad, central_difference(lambda v: f(a0, v, w0), b0), rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(w.grad, central_difference(lambda v: f(a0, b0, v), w0), rtol=1e-6, atol=1e-9)


def test_getitem_concat_and_abs():
    x0 = np.array([[1.0, -2.0, 3.0], [-0.5, 0.25, 4.0]])
    x = Parameter(x0)
    out = concat([x[:, 0], x[:, 2], x[:, 0]], axis=0).abs().sum()
    out.backward()
    np.testing.assert_array_equal(x.grad, [[2.0, 0.0, 1.0], [-2.0, 0.0, 1.0]])


def test_relu_gradient_away_from_kink():
    x = Parameter([-1.0, 2.0, 0.5])
    x.relu().sum().backward()
    np.testing.assert_array_equal(x.grad, [0.0, 1.0, 1.0])


def test_sum_of_params_and_constant_loss():
    a, b = Parameter(np.ones(3)), Parameter(np.ones((2, 2)))
    (a.sum() + b.sum()).backward()
    assert np.all(a.grad == 1) and np.all(b.grad == 1)
    c = Parameter(np.ones(2))
    (c * 0.0 + 5.0).sum().backward()
    assert np.all(c.grad == 0)


def test_gradients_accumulate_and_zero():
    p = Parameter(2.0)
    (p * p).backward()
    (p * 3.0).backward()
    assert p.grad == pytest.approx(7.0)
    p.zero_grad()
    assert p.grad == 0


def test_graph_released_after_backward():
    p = Parameter(1.5)
    y = (p * p).log()
    y.backward(retain_graph=True)
    y.backward()
    assert p.grad == pytest.approx(2 * (2 / 1.5))
    with pytest.raises(GraphConsumed):
        y.backward()


def test_backward_needs_scalar_without_seed():
    p = Parameter(np.ones(3))
    with pytest.raises(ShapeMismatch):
        (p * 2.0).backward()
    (p * 2.0).backward(np.array([1.0, 0.0, 2.0]))
    np.testing.assert_array_equal(p.grad, [2.0, 0.0, 4.0])


def test_numpy_on_the_left_defers_to_tensor():
    p = Parameter(np.ones(2))
    out = np.array([2.0, 3.0]) * p
    assert isinstance(out, Tensor)
    out.sum().backward()
    np.testing.assert_array_equal(p.grad, [2.0, 3.0])


def test_no_grad_is_thread_local():
    p = Parameter(1.0)
    seen = {}

    def worker():
        seen["parents"] = len((p * 2.0)._parents)

    with no_grad():
        inside = (p * 2.0)._parents
        t = threading.Thread(target=worker)
        t.start()
        t.join()
    assert inside == ()
    assert seen["parents"] > 0


# layers ------------------------------------------------------------------------


def test_zero_net_outputs_zero():
    net = MLP(MLPSpec(3, (4, 2)))  # rng=None gives zero weights
    np.testing.assert_array_equal(mlp_forward(net, np.ones((5, 3))).value, np.zeros((5, 2)))


def test_identity_layer_passthrough():
    net = MLP(MLPSpec(3, (3,), activation="identity"))
    net.layers[0].weight.value[...] = np.eye(3)
    x = np.random.default_rng(0).normal(size=(4, 3))
    np.testing.assert_array_equal(net(x).value, x)


def test_mlp_shape_errors():
    net = MLP(MLPSpec(3, (4,)), np.random.default_rng(0))
    with pytest.raises(ShapeMismatch):
        net(np.ones((2, 5)))
    with pytest.raises(ConfigError):
        MLPSpec(3, (4,), activation="gelu")


@pytest.mark.parametrize("act", ["relu", "tanh"])
def test_mlp_jvp_matches_finite_differences(act):
    rng = np.random.default_rng(7)
    net = MLP(MLPSpec(4, (6, 5), act), rng)
    x0 = rng.normal(size=4)
    v = rng.normal(size=4)
    h = 1e-6
    fd = (net(x0 + h * v).value - net(x0 - h * v).value) / (2 * h)
    # Jacobian by reverse mode, one output at a time
    jac = np.zeros((5, 4))
    for k in range(5):
        x = Parameter(x0)
        net(x)[k].backward()
        jac[k] = x.grad
    np.testing.assert_allclose(jac @ v, fd, rtol=1e-6, atol=1e-8)


def test_he_initialisation_is_seeded():
    a = Linear(50, 40, np.random.default_rng(3))
    b = Linear(50, 40, np.random.default_rng(3))
    np.testing.assert_array_equal(a.weight.value, b.weight.value)
    assert a.weight.value.std() == pytest.approx(np.sqrt(2 / 50), rel=0.05)
    assert np.all(a.bias.value == 0)


def test_evidential_transform_at_zero():
    p = evidential_transform(np.zeros(4))
    ln2 = np.log(2.0)
    assert float(p.delta.value) == 0.0
    assert float(p.gamma.value) == pytest.approx(ln2 + 1e-6, abs=1e-15)
    assert float(p.alpha.value) == pytest.approx(ln2 + 1 + 1e-6, abs=1e-15)
    assert float(p.beta.value) == pytest.approx(ln2 + 1e-6, abs=1e-15)


def test_evidential_transform_floors():
    p = evidential_transform(np.array([0.0, -1e4, -1e4, -1e4]))
    assert float(p.gamma.value) >= ad.PARAM_FLOOR
    assert float(p.alpha.value) > 1.0
    assert float(p.beta.value) >= ad.PARAM_FLOOR


def test_evidential_transform_valid_on_random_raw():
    raw = np.random.default_rng(0).normal(0, 30, size=(100_000, 4))
    p = evidential_transform(raw)
    assert is_valid(tuple(np.asarray(f.value) for f in p))


@given(hnp.arrays(np.float64, (7, 4), elements=st.floats(-700, 700)))
def test_evidential_transform_valid_property(raw):
    p = evidential_transform(raw)
    assert is_valid(tuple(np.asarray(f.value) for f in p))


def test_head_gradient():
    rng = np.random.default_rng(2)
    head = EvidentialHead(3, rng)
    h = rng.normal(size=(5, 3))
    w0 = head.linear.weight.value.copy()

    def f(w):
        head.linear.weight.value[...] = w
        with no_grad():
            p = head(h)
            return float((p.delta * p.gamma + p.alpha.log() * p.beta).sum().value)

    fd = central_difference(f, w0)
    head.linear.weight.value[...] = w0
    p = head(h)
    (p.delta * p.gamma + p.alpha.log() * p.beta).sum().backward()
    np.testing.assert_allclose(head.linear.weight.grad, fd, rtol=1e-6, atol=1e-9)


# optimiser ---------------------------------------------------------------------


def test_adam_zero_gradient_leaves_params():
    p = Parameter(np.array([1.0, -2.0]))
    adam_step(AdamState(lr=0.1), [p])
    np.testing.assert_array_equal(p.value, [1.0, -2.0])


def test_adam_first_step_is_lr_sized():
    p = Parameter(np.array([1.0, -2.0]))
    p.grad[...] = [3.0, -0.5]
    adam_step(AdamState(lr=0.01), [p])
    # m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
    np.testing.assert_allclose(p.value, [1.0 - 0.01 * 3 / (3 + 1e-8), -2.0 + 0.01 * 0.5 / (0.5 + 1e-8)], rtol=1e-15)
    assert np.all(p.grad == 0)


def test_adam_converges_on_bowl():
    # Adam moves each coordinate by at most about lr per step
    target = np.array([1.5, -0.7, 1.2])
    p = Parameter(np.zeros(3))
    state = AdamState(lr=1e-2)
    for _ in range(500):
        (((p - target) ** 2).sum()).backward()
        adam_step(state, [p])
    np.testing.assert_allclose(p.value, target, atol=1e-2)


def test_adam_rejects_bad_hyperparameters():
    with pytest.raises(ConfigError):
        AdamState(beta1=1.0)
    with pytest.raises(ConfigError):
        AdamState(eps=0.0)


# checkpoints -------------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    net = MLP(MLPSpec(3, (4, 2)), rng, name="n")
    doc = {"format_version": ad.CHECKPOINT_FORMAT_VERSION, "tensors": ad.params_to_dict(net.parameters())}
    ad.write_json(tmp_path / "c.json", doc)
    other = MLP(MLPSpec(3, (4, 2)), np.random.default_rng(9), name="n")
    ad.load_params_from_dict(other.parameters(), ad.read_checkpoint(tmp_path / "c.json")["tensors"])
    for a, b in zip(net.parameters(), other.parameters()):
        np.testing.assert_array_equal(a.value, b.value)


def test_checkpoint_errors(tmp_path):
    net = MLP(MLPSpec(3, (4,)), name="n")
    tensors = ad.params_to_dict(net.parameters())
    with pytest.raises(ShapeMismatch):
        ad.load_params_from_dict(MLP(MLPSpec(3, (5,)), name="n").parameters(), tensors)
    with pytest.raises(ConfigError):
        ad.load_params_from_dict(MLP(MLPSpec(3, (4,)), name="m").parameters(), tensors)
    ad.write_json(tmp_path / "bad.json", {"format_version": 99})
    with pytest.raises(ConfigError):
        ad.read_checkpoint(tmp_path / "bad.json")
