import numpy as np
import pytest

from harness.checks import check_gradients, finite_difference_error
from learning.network import ModelParameters, build_cnn, build_mlp, unflatten


def test_cnn_parameter_count_and_shapes():
    net, params = build_cnn()
    assert net.d == params.d == 12810
    counts = {name: n for name, _, n in net.describe()}
    assert counts["conv1"] == 160
    assert counts["conv2"] == 4640
    assert counts["dense"] == 8010
    shapes = {name: shape for name, shape, _ in net.describe()}
    assert shapes["conv1"] == (26, 26, 16)
    assert shapes["pool1"] == (13, 13, 16)
    assert shapes["conv2"] == (11, 11, 32)
    assert shapes["pool2"] == (5, 5, 32)
    assert shapes["flatten"] == (800,)


@pytest.mark.parametrize("hidden,d", [(32, 25450), (1, 805)])
def test_mlp_parameter_count(hidden, d):
    assert build_mlp(hidden)[0].d == d


def test_mlp_rejects_zero_width():
    with pytest.raises(ValueError):
        build_mlp(0)


def test_flatten_roundtrip(rng):
    net, params = build_cnn(rng)
    arrays = params.unflatten()
    rebuilt = ModelParameters.flatten(arrays, params.layout)
    np.testing.assert_array_equal(rebuilt.theta, params.theta)
    assert arrays[("conv1", "weight")].shape == (3, 3, 1, 16)
    views = unflatten(params.theta, params.layout)
    assert np.shares_memory(views[("dense", "bias")], params.theta)


def test_glorot_init_is_seeded_and_bounded():
    net, a = build_mlp(8, np.random.default_rng(3))
    _, b = build_mlp(8, np.random.default_rng(3))
    np.testing.assert_array_equal(a.theta, b.theta)
    arrays = a.unflatten()
    assert np.all(arrays[("hidden", "bias")] == 0)
    limit = np.sqrt(6.0 / (784 + 8))
    assert np.abs(arrays[("hidden", "weight")]).max() <= limit


def test_softmax_normalized(rng):
    net, params = build_cnn(rng)
    probs = net.predict_proba(params.theta, rng.uniform(size=(3, 28, 28)))
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)


def test_zero_weights_give_uniform_prediction(rng):
    net, _ = build_mlp(4)
    probs = net.predict_proba(np.zeros(net.d), rng.uniform(size=(5, 28, 28)))
    np.testing.assert_allclose(probs, 0.1)


def test_confident_prediction_has_near_zero_loss_and_gradient():
    net, _ = build_mlp(1)
    theta = np.zeros(net.d)
    arrays = unflatten(theta, net.layout)
    arrays[("output", "bias")][3] = 50.0
    loss, grad = net.loss_and_grad(theta, np.zeros((1, 28, 28)), np.array([3]))
    assert loss == pytest.approx(0.0, abs=1e-15)
    assert np.abs(grad).max() < 1e-15


def test_duplicated_batch_is_invariant(rng):
    net, params = build_mlp(6, rng)
    images = rng.uniform(size=(4, 28, 28))
    labels = rng.integers(0, 10, 4)
    loss, grad = net.loss_and_grad(params.theta, images, labels)
    loss2, grad2 = net.loss_and_grad(params.theta, np.concatenate([images, images]),
                                     np.concatenate([labels, labels]))
    assert loss2 == pytest.approx(loss, rel=1e-12)
    np.testing.assert_allclose(grad2, grad, rtol=1e-10, atol=1e-15)


def test_empty_batch_rejected():
    net, params = build_mlp(2)
    with pytest.raises(ValueError):
        net.loss_and_grad(params.theta, np.zeros((0, 28, 28)), np.array([], dtype=int))


def test_mlp_gradient_finite_differences(rng):
    net, params = build_mlp(16, rng)
    images = rng.uniform(size=(5, 28, 28))
    labels = rng.integers(0, 10, 5)
    assert finite_difference_error(net, params.theta, images, labels, rng=rng) < 1e-4


def test_maxpool_ties_route_to_first_element():
    net, _ = build_cnn()
    pool = net.layers[2]
    x = np.ones((1, 2, 2, 1))
    out, cache = pool.forward({}, x)
    dx, _ = pool.backward({}, cache, np.ones_like(out))
    np.testing.assert_array_equal(dx[0, :, :, 0], [[1, 0], [0, 0]])


def test_gradients_both_architectures():
    result = check_gradients()
    assert result.passed, result.detail
