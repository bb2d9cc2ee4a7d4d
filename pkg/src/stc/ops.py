"""Dense float64 array ops with exact analytic gradients.

Everything the segmentation net and its losses need: same-padded stride-1
cross-correlation, ReLU, 2x2 mean pooling, align-corners bilinear resize,
and a numerically stabilized per-pixel channel softmax. Each backward
function is the exact gradient of its forward counterpart; the
finite-difference checker in `params` is the independent referee.

Array conventions: feature maps are (N, C, H, W), kernels (Cout, Cin, k, k),
single-image probability/logit maps (C+1, h, w). All math is float64.
"""
from __future__ import annotations

import numpy as np


def _f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """Zero-padded patch matrix: (N, C, H, W) -> (N, C*k*k, H*W)."""
    n, c, h, w = x.shape
    p = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    return win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * k * k, h * w)


def conv2d_forward(x, kernel, bias) -> np.ndarray:
    """Stride-1 cross-correlation with odd square kernel and zero same-padding.

    x: (N, Cin, H, W), kernel: (Cout, Cin, k, k), bias: (Cout,).
    Output spatial size equals input spatial size.
    """
    x, kernel, bias = _f64(x), _f64(kernel), _f64(bias)
    n, cin, h, w = x.shape
    cout, kcin, kh, kw = kernel.shape
    if kcin != cin:
        raise ValueError(
            f"channel mismatch: input shape {x.shape} vs kernel shape {kernel.shape}"
        )
    if kh != kw or kh % 2 == 0:
        raise ValueError(f"kernel must be square with odd size, got {kh}x{kw}")
    if bias.shape != (cout,):
        raise ValueError(f"bias shape {bias.shape} does not match {cout} output channels")
    cols = _im2col(x, kh)
    out = np.matmul(kernel.reshape(cout, -1), cols)
    out += bias[:, None]
    return out.reshape(n, cout, h, w)


def conv2d_backward(x, kernel, upstream):
    """Gradients of conv2d_forward: returns (grad_input, grad_kernel, grad_bias)."""
    x, kernel, upstream = _f64(x), _f64(kernel), _f64(upstream)
    n, cin, h, w = x.shape
    cout = kernel.shape[0]
    k = kernel.shape[2]
    if upstream.shape != (n, cout, h, w):
        raise ValueError(
            f"upstream shape {upstream.shape} does not match output shape {(n, cout, h, w)}"
        )
    grad_bias = upstream.sum(axis=(0, 2, 3))
    cols = _im2col(x, k)
    g = upstream.reshape(n, cout, h * w)
    grad_kernel = np.matmul(g, cols.transpose(0, 2, 1)).sum(axis=0).reshape(kernel.shape)
    # Input gradient is the upstream correlated with the spatially flipped,
    # channel-transposed kernel; exact for odd k, stride 1, same padding.
    kt = np.ascontiguousarray(kernel.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
    grad_input = conv2d_forward(upstream, kt, np.zeros(cin))
    return grad_input, grad_kernel, grad_bias


def relu_forward(x) -> np.ndarray:
    return np.maximum(_f64(x), 0.0)


def relu_backward(x, upstream) -> np.ndarray:
    """Subgradient at 0 is 0: upstream passes only where x > 0."""
    return np.where(_f64(x) > 0.0, _f64(upstream), 0.0)


def avgpool2_forward(x) -> np.ndarray:
    """Non-overlapping 2x2 mean pooling over the trailing two axes."""
    x = _f64(x)
    *lead, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"avgpool2 requires even spatial dims, got {h}x{w}")
    return x.reshape(*lead, h // 2, 2, w // 2, 2).mean(axis=(-3, -1))


def avgpool2_backward(upstream) -> np.ndarray:
    """Spreads each upstream value uniformly (1/4) over its 2x2 source block."""
    g = _f64(upstream)
    return np.repeat(np.repeat(g, 2, axis=-2), 2, axis=-1) * 0.25


def bilinear_resize(m, target_h: int, target_w: int) -> np.ndarray:
    """Align-corners bilinear interpolation over the trailing two axes.

    Exact identity when the target equals the source size. A target axis of 1
    samples the source origin.
    """
    m = _f64(m)
    *lead, h, w = m.shape
    if target_h < 1 or target_w < 1:
        raise ValueError(f"target size must be >= 1, got {target_h}x{target_w}")
    ys = np.linspace(0.0, h - 1.0, target_h)
    xs = np.linspace(0.0, w - 1.0, target_w)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0).reshape(-1, 1)
    fx = (xs - x0).reshape(1, -1)
    r0 = m[..., y0, :]
    r1 = m[..., y1, :]
    top = r0[..., x0] * (1.0 - fx) + r0[..., x1] * fx
    bot = r1[..., x0] * (1.0 - fx) + r1[..., x1] * fx
    return top * (1.0 - fy) + bot * fy


def channel_softmax(logits) -> np.ndarray:
    """Per-pixel softmax over the channel axis (axis -3).

    Accepts (..., C+1, h, w); stabilized by subtracting the per-pixel max
    logit before exponentiation.
    """
    z = _f64(logits)
    z = z - z.max(axis=-3, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-3, keepdims=True)
