"""Verify the hand-derived backward passes against finite differences.

Every gradient in the network is derived by hand, so each one is checked
against central differences (f(x+h) - f(x-h)) / 2h. This demo runs the check
live for a single convolution and then for the full network on a tiny
configuration.
"""

import numpy as np

from trailgrade.nn import ModelConfig, backward, build_model, forward
from trailgrade.nn.model import conv_kernels, trainable_keys
from trailgrade.nn.ops import (
    conv2d_backward,
    conv2d_forward,
    l2_penalty,
    sparse_categorical_crossentropy,
)


def finite_differences(loss_fn, x, h=1e-5):
    grad = np.zeros_like(x)
    flat, grad_flat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = loss_fn()
        flat[i] = keep - h
        down = loss_fn()
        flat[i] = keep
        grad_flat[i] = (up - down) / (2 * h)
    return grad


def worst_error(analytic, numeric):
    scale = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / scale))


rng = np.random.default_rng(0)

print("== one convolution layer ==")
x = rng.normal(size=(2, 6, 4, 3))
kernels = rng.normal(size=(4, 2, 3, 5))  # even kernel length: asymmetric padding
bias = rng.normal(size=5)
projection = rng.normal(size=(2, 6, 4, 5))


def conv_loss():
    out, _ = conv2d_forward(x, kernels, bias)
    return float(np.sum(out * projection))


_, cache = conv2d_forward(x, kernels, bias)
grad_x, grad_k, grad_b = conv2d_backward(cache, projection)
print(f"  d/d input   max relative error {worst_error(grad_x, finite_differences(conv_loss, x)):.2e}")
print(f"  d/d kernels max relative error {worst_error(grad_k, finite_differences(conv_loss, kernels)):.2e}")
print(f"  d/d bias    max relative error {worst_error(grad_b, finite_differences(conv_loss, bias)):.2e}")

print("\n== the full network, tiny configuration ==")
config = ModelConfig(window_points=8, kernel_len=3, filters=(2, 3, 4), dense_units=5, dropout_rate=0.0)
params = build_model(config, rng)
batch = rng.normal(size=(2, 8, 4, 3))
labels = rng.integers(0, 3, size=2)


def network_loss():
    probs, _ = forward(params, batch, train=True)
    ce, _ = sparse_categorical_crossentropy(probs, labels)
    penalty, _ = l2_penalty(conv_kernels(params), config.l2_coeff)
    return ce + penalty


_, cache = forward(params, batch, train=True)
grads = backward(cache, labels)
for key in trainable_keys(config):
    numeric = finite_differences(network_loss, params.tensors[key])
    print(f"  {key:15s} max relative error {worst_error(grads[key], numeric):.2e}")
