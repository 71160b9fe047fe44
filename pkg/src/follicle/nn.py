"""From-scratch neural network: conv/pool/dropout/dense layers with exact
backward passes, softmax cross-entropy, and Adam.

Layers operate on channel-last batches (N, H, W, C) or (N, D). Compute is
float32 by default; building a model with dtype=float64 gives the shadow
mode used by finite-difference gradient checks. Convolutions are 3x3 with
same-padding (zero pad 1), pooling is 2x2; both are fixed by the
architecture and validated rather than parameterized.
"""

from __future__ import annotations

import numpy as np

from .config import TrainConfig
from .errors import ParamError, PipelineError, ShapeError, TrainingDiverged
from .seeding import seed_stream

NUM_CLASSES = 3

# He-style init scaled down: with ReLU activations and per-coordinate Adam
# steps, full He gain makes the first few updates swing the logits hard and
# the epoch-1 loss spikes above ln(3). Halving the conv gain keeps the
# first-epoch mean loss near the untrained value without slowing training.
CONV_INIT_GAIN = 0.5


class Param:
    """One learnable tensor plus its gradient and Adam moments."""

    __slots__ = ("name", "value", "grad", "m", "v")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)
        self.m = np.zeros_like(value)
        self.v = np.zeros_like(value)


class Conv2D:
    """3x3 same-padding convolution, NHWC."""

    kind = "conv2d"

    def __init__(self, in_channels: int, out_channels: int, name: str, rng: np.random.Generator,
                 dtype=np.float32, needs_input_grad: bool = True):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.name = name
        self.needs_input_grad = needs_input_grad  # False for the input layer
        std = CONV_INIT_GAIN * np.sqrt(2.0 / (9 * in_channels))
        w = rng.standard_normal((3, 3, in_channels, out_channels)) * std
        self.weight = Param(f"{name}.weight", w.astype(dtype))
        self.bias = Param(f"{name}.bias", np.zeros(out_channels, dtype=dtype))
        self._cols = None
        self._in_shape = None

    def params(self):
        return [self.weight, self.bias]

    def _im2col(self, x: np.ndarray) -> np.ndarray:
        n, h, w, _ = x.shape
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
        win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(1, 2))
        # (N, H, W, C, 3, 3) -> rows indexed (ky, kx, cin) to match the
        # (3, 3, Cin, Cout) weight layout.
        return np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(n * h * w, -1)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 4 or x.shape[3] != self.in_channels:
            raise ShapeError(
                f"{self.name}: expected (N, H, W, {self.in_channels}), got {x.shape}"
            )
        n, h, w, _ = x.shape
        cols = self._im2col(x)
        out = cols @ self.weight.value.reshape(-1, self.out_channels) + self.bias.value
        if train:
            self._cols = cols
            self._in_shape = x.shape
        return out.reshape(n, h, w, self.out_channels)

    def backward(self, grad: np.ndarray) -> np.ndarray | None:
        if self._cols is None:
            raise PipelineError(f"{self.name}: backward called without a cached forward")
        n, h, w, _ = self._in_shape
        gf = grad.reshape(n * h * w, self.out_channels)
        self.weight.grad = (self._cols.T @ gf).reshape(self.weight.value.shape)
        self.bias.grad = gf.sum(axis=0)
        self._cols = None
        if not self.needs_input_grad:
            return None
        # Input gradient = same conv of grad with the spatially flipped,
        # channel-transposed kernel.
        wt = np.ascontiguousarray(self.weight.value[::-1, ::-1].transpose(0, 1, 3, 2))
        xp = np.pad(grad, ((0, 0), (1, 1), (1, 1), (0, 0)))
        win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(1, 2))
        cols = np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(n * h * w, -1)
        dx = cols @ wt.reshape(-1, self.in_channels)
        return dx.reshape(self._in_shape)


class MaxPool2x2:
    kind = "maxpool"

    def __init__(self):
        self._idx = None
        self._in_shape = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        n, h, w, c = x.shape
        if h % 2 or w % 2:
            raise ShapeError(f"maxpool needs even spatial dims, got {h}x{w}")
        windows = (
            x.reshape(n, h // 2, 2, w // 2, 2, c)
            .transpose(0, 1, 3, 5, 2, 4)
            .reshape(n, h // 2, w // 2, c, 4)
        )
        idx = windows.argmax(axis=-1)  # first index wins ties
        out = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]
        if train:
            self._idx = idx
            self._in_shape = x.shape
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        if self._idx is None:
            raise PipelineError("maxpool: backward called without a cached forward")
        n, h, w, c = self._in_shape
        flat = np.zeros((n, h // 2, w // 2, c, 4), dtype=grad.dtype)
        np.put_along_axis(flat, self._idx[..., None], grad[..., None], axis=-1)
        dx = (
            flat.reshape(n, h // 2, w // 2, c, 2, 2)
            .transpose(0, 1, 4, 2, 5, 3)
            .reshape(n, h, w, c)
        )
        self._idx = None
        return dx


class ReLU:
    kind = "relu"

    def __init__(self):
        self._mask = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if train:
            self._mask = x > 0
        return np.maximum(x, 0)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad * self._mask


class Dropout:
    """Inverted dropout: kept units scale by 1/(1-rate), eval is identity."""

    kind = "dropout"

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ParamError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self._mask = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, train: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        if not train or self.rate == 0.0:
            return x
        if rng is None:
            raise PipelineError("dropout in train mode needs an rng")
        keep = (rng.random(x.shape) >= self.rate).astype(x.dtype)
        self._mask = keep * (1.0 / (1.0 - self.rate))
        return x * self._mask

    def backward(self, grad: np.ndarray) -> np.ndarray:
        if self._mask is None:  # eval-mode or rate-0 pass-through
            return grad
        return grad * self._mask


class Flatten:
    kind = "flatten"

    def __init__(self):
        self._in_shape = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if train:
            self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad.reshape(self._in_shape)


class Dense:
    kind = "dense"

    def __init__(self, in_features: int, out_features: int, name: str, rng: np.random.Generator,
                 dtype=np.float32, init_scale: float = 2.0):
        self.in_features = in_features
        self.out_features = out_features
        self.name = name
        std = np.sqrt(init_scale / in_features)
        self.weight = Param(f"{name}.weight", (rng.standard_normal((in_features, out_features)) * std).astype(dtype))
        self.bias = Param(f"{name}.bias", np.zeros(out_features, dtype=dtype))
        self._x = None

    def params(self):
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"{self.name}: expected (N, {self.in_features}), got {x.shape}")
        if train:
            self._x = x
        return x @ self.weight.value + self.bias.value

    def backward(self, grad: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise PipelineError(f"{self.name}: backward called without a cached forward")
        self.weight.grad = self._x.T @ grad
        self.bias.grad = grad.sum(axis=0)
        dx = grad @ self.weight.value.T
        self._x = None
        return dx


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction; robust to huge logits."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood, probabilities clamped at 1e-12."""
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(picked.astype(np.float64), 1e-12))))


def cross_entropy_grad_logits(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradient of the mean cross-entropy with respect to the logits."""
    g = probs.copy()
    g[np.arange(len(labels)), labels] -= 1.0
    return g / len(labels)


class Model:
    """The fixed classifier: three conv/relu/pool/dropout blocks, flatten,
    a hidden dense layer with relu, a 3-way dense head, softmax."""

    def __init__(self, layers: list, config: TrainConfig, dtype=np.float32):
        self.layers = layers
        self.config = config
        self.dtype = dtype

    def params(self) -> list[Param]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def forward(self, x: np.ndarray, train: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        """Run the network and return class probabilities (N, 3)."""
        h = np.ascontiguousarray(x, dtype=self.dtype)
        for layer in self.layers:
            if isinstance(layer, Dropout):
                h = layer.forward(h, train=train, rng=rng)
            else:
                h = layer.forward(h, train=train)
        return softmax(h)

    def backward(self, probs: np.ndarray, labels: np.ndarray) -> None:
        """Populate parameter gradients from a train-mode forward pass."""
        grad = cross_entropy_grad_logits(probs, labels).astype(self.dtype)
        for layer in reversed(self.layers):
            grad = layer.backward(grad)

    def flat_width(self) -> int:
        side = self.config.input_size // 8
        return side * side * self.config.conv_filters[-1]


def build_model(config: TrainConfig, dtype=np.float32) -> Model:
    """Construct the network with seeded He-style initialization."""
    layers: list = []
    in_ch = 3
    for i, filters in enumerate(config.conv_filters, start=1):
        rng = seed_stream(config.seed, f"init:conv{i}")
        layers.append(Conv2D(in_ch, filters, f"conv{i}", rng, dtype=dtype, needs_input_grad=i > 1))
        layers.append(ReLU())
        layers.append(MaxPool2x2())
        layers.append(Dropout(config.dropout))
        in_ch = filters
    layers.append(Flatten())
    side = config.input_size // 8
    flat = side * side * config.conv_filters[-1]
    layers.append(Dense(flat, config.dense_hidden, "dense1", seed_stream(config.seed, "init:dense1"), dtype=dtype))
    layers.append(ReLU())
    # Small head init keeps the untrained loss near ln(3) for any input.
    layers.append(Dense(config.dense_hidden, NUM_CLASSES, "dense2", seed_stream(config.seed, "init:dense2"),
                        dtype=dtype, init_scale=0.01))
    return Model(layers, config, dtype=dtype)


def layer_specs(model: Model) -> list[dict]:
    """Serializable architecture description, in layer order."""
    specs = []
    for layer in model.layers:
        if isinstance(layer, Conv2D):
            specs.append({"kind": "conv2d", "in_channels": layer.in_channels, "out_channels": layer.out_channels, "kernel": [3, 3]})
        elif isinstance(layer, MaxPool2x2):
            specs.append({"kind": "maxpool", "pool": [2, 2]})
        elif isinstance(layer, ReLU):
            specs.append({"kind": "relu"})
        elif isinstance(layer, Dropout):
            specs.append({"kind": "dropout", "rate": layer.rate})
        elif isinstance(layer, Flatten):
            specs.append({"kind": "flatten"})
        elif isinstance(layer, Dense):
            specs.append({"kind": "dense", "in_features": layer.in_features, "out_features": layer.out_features})
    specs.append({"kind": "softmax"})
    return specs


class Adam:
    """Adam with bias correction; aborts on non-finite gradients or weights."""

    def __init__(self, params: list[Param], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, t: int = 0):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = t

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p in self.params:
            g = p.grad
            if not np.all(np.isfinite(g)):
                finite = g[np.isfinite(g)]
                peak = float(np.abs(finite).max()) if finite.size else float("nan")
                raise TrainingDiverged(f"non-finite gradient in {p.name} (max finite |g| = {peak})")
            p.m = self.beta1 * p.m + (1.0 - self.beta1) * g
            p.v = self.beta2 * p.v + (1.0 - self.beta2) * (g * g)
            m_hat = p.m / bc1
            v_hat = p.v / bc2
            p.value = p.value - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            if not np.all(np.isfinite(p.value)):
                raise TrainingDiverged(f"non-finite weights in {p.name} after Adam step {self.t}")
