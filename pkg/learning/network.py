"""
Feed-forward networks over a flat float64 parameter vector theta.

Every layer reads its weights as views into theta through the layout, and
writes its gradients into the matching slice of one flat gradient vector,
so theta and the gradient are what travels over the air.

Architectures:
    build_cnn()  conv3x3x16 -> pool2 -> conv3x3x32 -> pool2 -> flatten -> dense10  (d = 12810)
    build_mlp()  dense(hidden) -> ReLU -> dense10
"""
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

NUM_CLASSES = 10
IMAGE_SHAPE = (28, 28)


# ──────────────────────────────────────────────
# Parameter layout
# ──────────────────────────────────────────────

@dataclass(frozen=True)
class ParamSlot:
    layer: str
    role:  str                   # "weight" | "bias"
    shape: tuple
    start: int
    stop:  int


@dataclass(frozen=True)
class ModelParameters:
    theta:  np.ndarray
    layout: tuple[ParamSlot, ...]

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64).reshape(-1)
        expected = self.layout[-1].stop if self.layout else 0
        if theta.size != expected:
            raise ValueError(f"theta has {theta.size} entries, layout needs {expected}")
        object.__setattr__(self, "theta", theta)

    @property
    def d(self) -> int:
        return self.theta.size

    def unflatten(self) -> dict[tuple[str, str], np.ndarray]:
        return unflatten(self.theta, self.layout)

    @classmethod
    def flatten(cls, arrays: dict[tuple[str, str], np.ndarray],
                layout: tuple[ParamSlot, ...]) -> "ModelParameters":
        theta = np.concatenate([np.asarray(arrays[(s.layer, s.role)], dtype=np.float64).reshape(-1)
                                for s in layout])
        return cls(theta=theta, layout=layout)


def unflatten(theta: np.ndarray, layout) -> dict[tuple[str, str], np.ndarray]:
    return {(s.layer, s.role): theta[s.start:s.stop].reshape(s.shape) for s in layout}


# ──────────────────────────────────────────────
# Layers
# ──────────────────────────────────────────────

class Layer:
    name = "layer"

    def build(self, in_shape: tuple) -> tuple[dict[str, tuple], tuple]:
        """Return ({role: shape}, out_shape)."""
        return {}, in_shape

    def fans(self, role: str, shape: tuple) -> tuple[int, int]:
        return 1, 1

    def forward(self, params, x):
        raise NotImplementedError

    def backward(self, params, cache, dout):
        raise NotImplementedError


class Conv2D(Layer):
    """Valid (no padding) stride-1 convolution, NHWC, weight (kh, kw, Cin, Cout)."""

    def __init__(self, name: str, filters: int, kernel: int = 3):
        self.name = name
        self.filters = filters
        self.kernel = kernel

    def build(self, in_shape):
        H, W, C = in_shape
        k = self.kernel
        shapes = {"weight": (k, k, C, self.filters), "bias": (self.filters,)}
        return shapes, (H - k + 1, W - k + 1, self.filters)

    def fans(self, role, shape):
        k, _, cin, cout = shape
        return k * k * cin, k * k * cout

    def forward(self, params, x):
        W, b = params["weight"], params["bias"]
        k, _, cin, cout = W.shape
        N, H, Wd, _ = x.shape
        Ho, Wo = H - k + 1, Wd - k + 1
        cols = sliding_window_view(x, (k, k), axis=(1, 2)).reshape(N * Ho * Wo, cin * k * k)
        w_mat = W.transpose(2, 0, 1, 3).reshape(cin * k * k, cout)
        out = (cols @ w_mat + b).reshape(N, Ho, Wo, cout)
        return out, (x.shape, cols, w_mat)

    def backward(self, params, cache, dout):
        x_shape, cols, w_mat = cache
        k, _, cin, cout = params["weight"].shape
        N, Ho, Wo, _ = dout.shape
        d_mat = dout.reshape(-1, cout)
        d_weight = (cols.T @ d_mat).reshape(cin, k, k, cout).transpose(1, 2, 0, 3)
        d_bias = d_mat.sum(axis=0)
        d_cols = (d_mat @ w_mat.T).reshape(N, Ho, Wo, cin, k, k)
        dx = np.zeros(x_shape)
        for i in range(k):
            for j in range(k):
                dx[:, i:i + Ho, j:j + Wo, :] += d_cols[..., i, j]
        return dx, {"weight": d_weight, "bias": d_bias}


class MaxPool2D(Layer):
    """2x2 stride-2 max pooling; odd trailing rows/columns are dropped."""

    def __init__(self, name: str):
        self.name = name

    def build(self, in_shape):
        H, W, C = in_shape
        return {}, (H // 2, W // 2, C)

    def forward(self, params, x):
        N, H, W, C = x.shape
        Ho, Wo = H // 2, W // 2
        windows = (x[:, :2 * Ho, :2 * Wo, :]
                   .reshape(N, Ho, 2, Wo, 2, C)
                   .transpose(0, 1, 3, 5, 2, 4)
                   .reshape(N, Ho, Wo, C, 4))
        # argmax picks the first maximal element on ties
        winner = windows.argmax(axis=-1)
        out = np.take_along_axis(windows, winner[..., None], axis=-1)[..., 0]
        return out, (x.shape, winner)

    def backward(self, params, cache, dout):
        x_shape, winner = cache
        N, Ho, Wo, C = dout.shape
        d_windows = np.zeros((N, Ho, Wo, C, 4))
        np.put_along_axis(d_windows, winner[..., None], dout[..., None], axis=-1)
        dx = np.zeros(x_shape)
        dx[:, :2 * Ho, :2 * Wo, :] = (d_windows
                                      .reshape(N, Ho, Wo, C, 2, 2)
                                      .transpose(0, 1, 4, 2, 5, 3)
                                      .reshape(N, 2 * Ho, 2 * Wo, C))
        return dx, {}


class ReLU(Layer):
    def __init__(self, name: str):
        self.name = name

    def forward(self, params, x):
        return np.maximum(x, 0.0), x > 0

    def backward(self, params, cache, dout):
        return dout * cache, {}


class Flatten(Layer):
    def __init__(self, name: str):
        self.name = name

    def build(self, in_shape):
        return {}, (int(np.prod(in_shape)),)

    def forward(self, params, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, params, cache, dout):
        return dout.reshape(cache), {}


class Dense(Layer):
    def __init__(self, name: str, units: int):
        self.name = name
        self.units = units

    def build(self, in_shape):
        (fan_in,) = in_shape
        return {"weight": (fan_in, self.units), "bias": (self.units,)}, (self.units,)

    def fans(self, role, shape):
        return shape[0], shape[1]

    def forward(self, params, x):
        return x @ params["weight"] + params["bias"], x

    def backward(self, params, cache, dout):
        x = cache
        return dout @ params["weight"].T, {"weight": x.T @ dout, "bias": dout.sum(axis=0)}


# ──────────────────────────────────────────────
# Network
# ──────────────────────────────────────────────

def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


class Network:
    """A layer stack ending in a 10-way softmax with cross-entropy loss."""

    def __init__(self, name: str, layers: list[Layer], input_shape: tuple):
        self.name = name
        self.layers = layers
        self.input_shape = tuple(input_shape)

        slots, shapes = [], []
        offset, shape = 0, self.input_shape
        for layer in layers:
            param_shapes, shape = layer.build(shape)
            shapes.append(shape)
            for role, pshape in param_shapes.items():
                size = int(np.prod(pshape))
                slots.append(ParamSlot(layer.name, role, tuple(pshape), offset, offset + size))
                offset += size
        if shape != (NUM_CLASSES,):
            raise ValueError(f"{name} ends with shape {shape}, expected ({NUM_CLASSES},)")
        self.layout = tuple(slots)
        self.output_shapes = shapes

    @property
    def d(self) -> int:
        return self.layout[-1].stop

    def init_parameters(self, rng: np.random.Generator) -> ModelParameters:
        """Glorot-uniform weights, zero biases."""
        theta = np.zeros(self.d)
        layers = {layer.name: layer for layer in self.layers}
        for slot in self.layout:
            if slot.role != "weight":
                continue
            fan_in, fan_out = layers[slot.layer].fans(slot.role, slot.shape)
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            theta[slot.start:slot.stop] = rng.uniform(-limit, limit, slot.stop - slot.start)
        return ModelParameters(theta=theta, layout=self.layout)

    def _layer_params(self, theta):
        views = unflatten(np.asarray(theta, dtype=np.float64), self.layout)
        return {layer.name: {role: arr for (lname, role), arr in views.items() if lname == layer.name}
                for layer in self.layers}

    def _inputs(self, images: np.ndarray) -> np.ndarray:
        images = np.asarray(images, dtype=np.float64)
        return images.reshape((images.shape[0],) + self.input_shape)

    def logits(self, theta, images) -> np.ndarray:
        params = self._layer_params(theta)
        x = self._inputs(images)
        for layer in self.layers:
            x, _ = layer.forward(params[layer.name], x)
        return x

    def predict_proba(self, theta, images) -> np.ndarray:
        return np.exp(log_softmax(self.logits(theta, images)))

    def loss(self, theta, images, labels) -> float:
        logp = log_softmax(self.logits(theta, images))
        return float(-logp[np.arange(len(labels)), labels].mean())

    def loss_and_grad(self, theta, images, labels) -> tuple[float, np.ndarray]:
        """Mean cross-entropy over the batch and its exact gradient."""
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size == 0:
            raise ValueError("loss_and_grad needs a nonempty batch")
        params = self._layer_params(theta)
        x = self._inputs(images)
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(params[layer.name], x)
            caches.append(cache)

        n = labels.size
        logp = log_softmax(x)
        loss = float(-logp[np.arange(n), labels].mean())
        dout = np.exp(logp)
        dout[np.arange(n), labels] -= 1.0
        dout /= n

        grad = np.zeros(self.d)
        slots = {(s.layer, s.role): s for s in self.layout}
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            dout, grads = layer.backward(params[layer.name], cache, dout)
            for role, g in grads.items():
                slot = slots[(layer.name, role)]
                grad[slot.start:slot.stop] = g.reshape(-1)
        return loss, grad

    def describe(self) -> list[tuple[str, tuple, int]]:
        counts = {}
        for s in self.layout:
            counts[s.layer] = counts.get(s.layer, 0) + (s.stop - s.start)
        return [(layer.name, shape, counts.get(layer.name, 0))
                for layer, shape in zip(self.layers, self.output_shapes)]


def build_cnn(rng: np.random.Generator | None = None) -> tuple[Network, ModelParameters]:
    net = Network("cnn", [
        Conv2D("conv1", 16), ReLU("relu1"), MaxPool2D("pool1"),
        Conv2D("conv2", 32), ReLU("relu2"), MaxPool2D("pool2"),
        Flatten("flatten"), Dense("dense", NUM_CLASSES),
    ], input_shape=IMAGE_SHAPE + (1,))
    rng = rng if rng is not None else np.random.default_rng(0)
    return net, net.init_parameters(rng)


def build_mlp(hidden: int = 32,
              rng: np.random.Generator | None = None) -> tuple[Network, ModelParameters]:
    if hidden < 1:
        raise ValueError(f"hidden width must be >= 1, got {hidden}")
    net = Network(f"mlp{hidden}", [
        Dense("hidden", hidden), ReLU("relu"), Dense("output", NUM_CLASSES),
    ], input_shape=(IMAGE_SHAPE[0] * IMAGE_SHAPE[1],))
    rng = rng if rng is not None else np.random.default_rng(0)
    return net, net.init_parameters(rng)
