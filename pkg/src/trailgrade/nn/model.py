"""The trail-difficulty network.

Three convolutional blocks (conv -> batchnorm -> relu -> maxpool -> dropout)
feed a 128-unit ReLU dense layer and a 3-way softmax head. Kernels are (m, 2)
with stride (1, 1) and same padding; pools are (2, 1) with ceil semantics, so
a 250-point window shrinks 250 -> 125 -> 63 -> 32 before flattening.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import KernelTooLong, ShapeMismatch, StaleCache
from . import ops

IN_CHANNELS = 3
SENSOR_ROWS = 4
KERNEL_WIDTH = 2


@dataclass(frozen=True)
class ModelConfig:
    window_points: int
    kernel_len: int
    filters: tuple = (4, 8, 16)
    dense_units: int = 128
    classes: int = 3
    dropout_rate: float = 0.3
    l2_coeff: float = 1e-2
    bn_momentum: float = 0.99
    bn_epsilon: float = 1e-3

    def __post_init__(self):
        counts = (self.window_points, self.kernel_len, self.dense_units, self.classes, *self.filters)
        if any(c < 1 for c in counts) or len(self.filters) != 3:
            raise ValueError("all sizes must be positive; exactly three conv blocks")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.kernel_len > self.window_points:
            raise KernelTooLong(
                f"kernel length {self.kernel_len} exceeds the {self.window_points}-point window"
            )

    def pooled_lengths(self) -> tuple:
        """Height after each of the three (2, 1) pools: repeated ceil(h / 2)."""
        h = self.window_points
        out = []
        for _ in self.filters:
            h = (h + 1) // 2
            out.append(h)
        return tuple(out)

    @property
    def flat_size(self) -> int:
        return self.pooled_lengths()[-1] * SENSOR_ROWS * self.filters[-1]


def param_shapes(config: ModelConfig) -> dict:
    """Canonical name -> shape mapping for every stored tensor, in order."""
    shapes = {}
    cin = IN_CHANNELS
    for i, cout in enumerate(config.filters, start=1):
        shapes[f"conv{i}/kernel"] = (config.kernel_len, KERNEL_WIDTH, cin, cout)
        shapes[f"conv{i}/bias"] = (cout,)
        for stat in ("gamma", "beta", "mean", "var"):
            shapes[f"bn{i}/{stat}"] = (cout,)
        cin = cout
    shapes["dense1/weights"] = (config.flat_size, config.dense_units)
    shapes["dense1/bias"] = (config.dense_units,)
    shapes["dense2/weights"] = (config.dense_units, config.classes)
    shapes["dense2/bias"] = (config.classes,)
    return shapes


def param_keys(config: ModelConfig):
    return list(param_shapes(config))


def trainable_keys(config: ModelConfig):
    """Everything except the batchnorm running statistics."""
    return [k for k in param_shapes(config) if not k.endswith(("/mean", "/var"))]


def parameter_count(config: ModelConfig) -> int:
    """Closed-form count of every stored value (weights, biases, bn stats)."""
    total = 0
    cin = IN_CHANNELS
    for cout in config.filters:
        total += config.kernel_len * KERNEL_WIDTH * cin * cout + cout  # kernel + bias
        total += 4 * cout  # gamma, beta, running mean, running var
        cin = cout
    total += config.flat_size * config.dense_units + config.dense_units
    total += config.dense_units * config.classes + config.classes
    return total


@dataclass
class ModelParams:
    """All stored tensors plus a step counter bumped by each optimizer update."""

    config: ModelConfig
    tensors: dict
    step: int = 0

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.tensors.items()}, self.step)


def build_model(config: ModelConfig, rng) -> ModelParams:
    """Fresh parameters: Glorot-uniform weights, zero biases, identity batchnorm."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    receptive = config.kernel_len * KERNEL_WIDTH
    tensors = {}
    for name, shape in param_shapes(config).items():
        if name.endswith("/kernel"):
            fan_in, fan_out = receptive * shape[2], receptive * shape[3]
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            tensors[name] = rng.uniform(-limit, limit, size=shape)
        elif name.endswith("/weights"):
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            tensors[name] = rng.uniform(-limit, limit, size=shape)
        elif name.endswith(("/gamma", "/var")):
            tensors[name] = np.ones(shape)
        else:  # biases, beta, running mean
            tensors[name] = np.zeros(shape)
    return ModelParams(config, tensors)


@dataclass
class ForwardCache:
    """Intermediates of one train-mode forward pass, consumed by backward()."""

    params: ModelParams
    params_step: int
    block_caches: list  # per block: (conv, bn, relu mask, pool, dropout mask)
    pre_flatten_shape: tuple
    dense1_cache: tuple
    relu4_mask: np.ndarray
    dense2_cache: tuple
    probs: np.ndarray


def forward(params: ModelParams, batch, *, train: bool = False, rng=None):
    """Run the network on a (B, n, 4, 3) batch.

    Returns (probabilities, cache); the cache is None outside train mode.
    Train mode updates the batchnorm running statistics on `params` and draws
    dropout masks from `rng`; infer mode is pure and deterministic.
    """
    cfg = params.config
    batch = np.asarray(batch, dtype=np.float64)
    expected = (cfg.window_points, SENSOR_ROWS, IN_CHANNELS)
    if batch.ndim != 4 or batch.shape[1:] != expected:
        raise ShapeMismatch(f"expected batch of shape (B, {expected[0]}, 4, 3), got {batch.shape}")
    if train and cfg.dropout_rate > 0.0 and rng is None:
        raise ValueError("train-mode forward needs an rng for dropout")

    t = params.tensors
    x = batch
    blocks = []
    for i in (1, 2, 3):
        x, conv_c = ops.conv2d_forward(x, t[f"conv{i}/kernel"], t[f"conv{i}/bias"])
        x, bn_c, new_mean, new_var = ops.batchnorm_forward(
            x,
            t[f"bn{i}/gamma"],
            t[f"bn{i}/beta"],
            t[f"bn{i}/mean"],
            t[f"bn{i}/var"],
            momentum=cfg.bn_momentum,
            eps=cfg.bn_epsilon,
            train=train,
        )
        if train:
            t[f"bn{i}/mean"], t[f"bn{i}/var"] = new_mean, new_var
        x, relu_mask = ops.relu(x)
        x, pool_c = ops.maxpool_forward(x)
        x, drop_mask = ops.dropout_forward(x, cfg.dropout_rate, rng, train=train)
        blocks.append((conv_c, bn_c, relu_mask, pool_c, drop_mask))

    pre_flatten = x.shape
    x = x.reshape(x.shape[0], -1)
    x, dense1_c = ops.dense_forward(x, t["dense1/weights"], t["dense1/bias"])
    x, relu4_mask = ops.relu(x)
    logits, dense2_c = ops.dense_forward(x, t["dense2/weights"], t["dense2/bias"])
    probs = ops.softmax(logits)
    if not train:
        return probs, None
    cache = ForwardCache(
        params, params.step, blocks, pre_flatten, dense1_c, relu4_mask, dense2_c, probs
    )
    return probs, cache


def backward(cache: ForwardCache, labels) -> dict:
    """Gradients of mean cross-entropy plus the conv-kernel L2 penalty.

    Covers every trainable tensor. Raises StaleCache when the parameters were
    updated after the forward pass that produced this cache.
    """
    params = cache.params
    if params.step != cache.params_step:
        raise StaleCache("parameters changed since this cache's forward pass")
    cfg = params.config
    _, dx = ops.sparse_categorical_crossentropy(cache.probs, labels)

    grads = {}
    dx, grads["dense2/weights"], grads["dense2/bias"] = ops.dense_backward(cache.dense2_cache, dx)
    dx = ops.relu_backward(cache.relu4_mask, dx)
    dx, grads["dense1/weights"], grads["dense1/bias"] = ops.dense_backward(cache.dense1_cache, dx)
    dx = dx.reshape(cache.pre_flatten_shape)
    for i in (3, 2, 1):
        conv_c, bn_c, relu_mask, pool_c, drop_mask = cache.block_caches[i - 1]
        dx = ops.dropout_backward(drop_mask, dx, cfg.dropout_rate)
        dx = ops.maxpool_backward(pool_c, dx)
        dx = ops.relu_backward(relu_mask, dx)
        dx, grads[f"bn{i}/gamma"], grads[f"bn{i}/beta"] = ops.batchnorm_backward(bn_c, dx)
        dx, grad_kernel, grads[f"conv{i}/bias"] = ops.conv2d_backward(conv_c, dx)
        grads[f"conv{i}/kernel"] = grad_kernel + 2.0 * cfg.l2_coeff * params.tensors[f"conv{i}/kernel"]
    return grads


def conv_kernels(params: ModelParams):
    """The three convolution kernel tensors (the L2-regularized set)."""
    return [params.tensors[f"conv{i}/kernel"] for i in (1, 2, 3)]
