"""Differentiable building blocks with hand-derived backward passes.

Every forward returns (output, cache); the matching backward consumes that
cache. Layouts are channels-last (batch, height, width, channels), arithmetic
is float64 throughout, and every gradient here is checked against central
finite differences in the test suite.
"""

import numpy as np

from ..errors import DegenerateBatch, EmptyBatch, LabelOutOfRange, ShapeMismatch


def _pad_amounts(k: int):
    """Same-padding split of k-1 zeros; the odd zero goes after (bottom/right)."""
    before = (k - 1) // 2
    return before, k - 1 - before


def _unfold_hmajor(x, kh, kw):
    """Pad x (B, H, W, C) for same-output conv and lay it out height-major.

    The width taps are folded into the channel axis (kw slice copies), then the
    array is transposed to (Hp, B, W, kw*C). In that layout every kernel height
    offset u selects the contiguous block x3[u : u + H], so the convolution
    reduces to kh plain GEMMs with no gather copies at all.
    """
    b, h, w, c = x.shape
    pt, pb = _pad_amounts(kh)
    pl, pr = _pad_amounts(kw)
    xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    hp = h + kh - 1
    xw = np.empty((b, hp, w, kw * c))
    for v in range(kw):
        xw[:, :, :, v * c : (v + 1) * c] = xp[:, :, v : v + w, :]
    return np.ascontiguousarray(xw.transpose(1, 0, 2, 3))


def conv2d_forward(x, kernels, bias):
    """Same-padded stride-1 correlation.

    x: (B, H, W, Cin), kernels: (kh, kw, Cin, Cout), bias: (Cout,).
    Output spatial dims equal the input's; the odd padding zero goes to the
    bottom/right edge.
    """
    if x.ndim != 4 or kernels.ndim != 4:
        raise ShapeMismatch("conv2d expects a 4-d input and 4-d kernels")
    kh, kw, cin, cout = kernels.shape
    if x.shape[3] != cin or bias.shape != (cout,):
        raise ShapeMismatch(
            f"channel mismatch: input {x.shape}, kernels {kernels.shape}, bias {bias.shape}"
        )
    b, h, w, _ = x.shape
    x3 = _unfold_hmajor(x, kh, kw)  # (Hp, B, W, kw*Cin)
    m = b * w
    taps = x3.reshape(h + kh - 1, m, kw * cin)
    k2 = kernels.reshape(kh, kw * cin, cout)
    acc = np.zeros((h * m, cout))
    tmp = np.empty((h * m, cout))
    for u in range(kh):
        np.matmul(taps[u : u + h].reshape(h * m, kw * cin), k2[u], out=tmp)
        acc += tmp
    out = acc.reshape(h, b, w, cout).transpose(1, 0, 2, 3) + bias
    return out, (x3, x.shape, kernels)


def conv2d_backward(cache, grad_out):
    """Gradients of conv2d_forward w.r.t. input, kernels and bias."""
    x3, x_shape, kernels = cache
    kh, kw, cin, cout = kernels.shape
    b, h, w, _ = x_shape
    if grad_out.shape != (b, h, w, cout):
        raise ShapeMismatch(f"grad_out {grad_out.shape} does not match output {(b, h, w, cout)}")
    grad_bias = grad_out.sum(axis=(0, 1, 2))
    m = b * w
    hp = h + kh - 1
    kwc = kw * cin
    g2 = np.ascontiguousarray(grad_out.transpose(1, 0, 2, 3)).reshape(h * m, cout)
    taps = x3.reshape(hp, m, kwc)
    k2 = kernels.reshape(kh, kwc, cout)
    grad_kernels = np.empty((kh, kwc, cout))
    grad_taps = np.zeros((hp, m, kwc))
    tmp = np.empty((h * m, kwc))
    for u in range(kh):
        np.matmul(taps[u : u + h].reshape(h * m, kwc).T, g2, out=grad_kernels[u])
        np.matmul(g2, k2[u].T, out=tmp)
        grad_taps[u : u + h] += tmp.reshape(h, m, kwc)
    # undo the height-major transpose, the width unfold, and the padding
    gxw = grad_taps.reshape(hp, b, w, kwc).transpose(1, 0, 2, 3)
    pt, _ = _pad_amounts(kh)
    pl, _ = _pad_amounts(kw)
    grad_xp = np.zeros((b, hp, w + kw - 1, cin))
    for v in range(kw):
        grad_xp[:, :, v : v + w, :] += gxw[:, :, :, v * cin : (v + 1) * cin]
    grad_x = np.ascontiguousarray(grad_xp[:, pt : pt + h, pl : pl + w, :])
    return grad_x, grad_kernels.reshape(kh, kw, cin, cout), grad_bias


def batchnorm_forward(x, gamma, beta, running_mean, running_var, *, momentum=0.99, eps=1e-3, train=True):
    """Channel-wise batch normalization (channels on the last axis).

    Train mode normalizes with the batch's population statistics and returns
    exponentially updated running stats; infer mode reads the running stats
    and leaves them untouched. Returns (out, cache, running_mean, running_var).
    """
    axes = tuple(range(x.ndim - 1))
    if train:
        n_red = 1
        for a in axes:
            n_red *= x.shape[a]
        if n_red < 2:
            raise DegenerateBatch("batch statistics need at least 2 values per channel")
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x - mean) * inv_std
        out = gamma * xhat + beta
        new_mean = momentum * running_mean + (1.0 - momentum) * mean
        new_var = momentum * running_var + (1.0 - momentum) * var
        return out, (xhat, gamma, inv_std, n_red, axes), new_mean, new_var
    out = gamma * (x - running_mean) / np.sqrt(running_var + eps) + beta
    return out, None, running_mean, running_var


def batchnorm_backward(cache, grad_out):
    xhat, gamma, inv_std, n_red, axes = cache
    grad_beta = grad_out.sum(axis=axes)
    grad_gamma = (grad_out * xhat).sum(axis=axes)
    grad_x = (gamma * inv_std) * (grad_out - grad_beta / n_red - xhat * grad_gamma / n_red)
    return grad_x, grad_gamma, grad_beta


def relu(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(cache, grad_out):
    # gradient 0 at the tie x == 0
    return grad_out * cache


def maxpool_forward(x):
    """Max pool (2, 1) with stride (2, 1) along height, ceil mode.

    A trailing odd row pools alone, so output height is ceil(H / 2). The mask
    records each window's argmax (first occurrence on ties) for the backward.
    """
    b, h, w, c = x.shape
    ho = (h + 1) // 2
    if h % 2:
        x = np.concatenate([x, np.full((b, 1, w, c), -np.inf)], axis=1)
    xr = x.reshape(b, ho, 2, w, c)
    mask = xr.argmax(axis=2)
    return xr.max(axis=2), (mask, h)


def maxpool_backward(cache, grad_out):
    """Route each output gradient to its argmax position; zeros elsewhere."""
    mask, h = cache
    b, ho, w, c = grad_out.shape
    grad_x = np.zeros((b, ho, 2, w, c))
    np.put_along_axis(grad_x, mask[:, :, None], grad_out[:, :, None], axis=2)
    return grad_x.reshape(b, 2 * ho, w, c)[:, :h]


def dropout_forward(x, rate, rng, train=True):
    """Inverted dropout: zero with probability rate, scale survivors by 1/(1-rate).

    Outside train mode (or at rate 0) this is the identity and the mask is None.
    """
    if not train or rate == 0.0:
        return x, None
    keep = rng.random(x.shape) >= rate
    return x * keep / (1.0 - rate), keep


def dropout_backward(cache, grad_out, rate):
    if cache is None:
        return grad_out
    return grad_out * cache / (1.0 - rate)


def dense_forward(x, weights, bias):
    if x.ndim != 2 or x.shape[1] != weights.shape[0] or bias.shape != (weights.shape[1],):
        raise ShapeMismatch(
            f"dense shapes disagree: x {x.shape}, weights {weights.shape}, bias {bias.shape}"
        )
    return x @ weights + bias, (x, weights)


def dense_backward(cache, grad_out):
    x, weights = cache
    return grad_out @ weights.T, x.T @ grad_out, grad_out.sum(axis=0)


def softmax(logits):
    """Row-wise softmax, stabilized by subtracting the row max."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def sparse_categorical_crossentropy(probs, labels):
    """Mean negative log-probability of the true labels.

    Returns (loss, grad_logits) where grad_logits is the combined
    softmax + cross-entropy gradient (probs - onehot) / B, computed jointly
    for numerical stability.
    """
    labels = np.asarray(labels)
    if probs.ndim != 2:
        raise ShapeMismatch("probabilities must be (B, K)")
    b, k = probs.shape
    if b == 0:
        raise EmptyBatch("empty probability batch")
    if labels.shape != (b,):
        raise ShapeMismatch(f"labels shape {labels.shape} does not match batch {b}")
    if labels.min() < 0 or labels.max() >= k:
        raise LabelOutOfRange(f"labels must lie in [0, {k})")
    rows = np.arange(b)
    p_true = probs[rows, labels]
    loss = float(-np.log(np.clip(p_true, 1e-12, None)).mean())
    grad_logits = probs.copy()
    grad_logits[rows, labels] -= 1.0
    grad_logits /= b
    return loss, grad_logits


def l2_penalty(weight_tensors, coeff):
    """coeff * sum of squares over the given tensors; gradients are 2*coeff*w."""
    penalty = coeff * sum(float(np.sum(w * w)) for w in weight_tensors)
    grads = [2.0 * coeff * w for w in weight_tensors]
    return penalty, grads
