"""Independent reference implementations used as test oracles.

Everything here is deliberately naive (explicit loops) and shares no code
with the package under test.
"""
from __future__ import annotations

import numpy as np


def naive_conv2d(x, kernel, bias):
    """Direct nested-loop same-padded stride-1 cross-correlation."""
    n, cin, h, w = x.shape
    cout, _, k, _ = kernel.shape
    p = k // 2
    out = np.zeros((n, cout, h, w))
    for ni in range(n):
        for co in range(cout):
            for y in range(h):
                for xx in range(w):
                    acc = bias[co]
                    for ci in range(cin):
                        for u in range(k):
                            for v in range(k):
                                yy, xv = y + u - p, xx + v - p
                                if 0 <= yy < h and 0 <= xv < w:
                                    acc += x[ni, ci, yy, xv] * kernel[co, ci, u, v]
                    out[ni, co, y, xx] = acc
    return out


def numeric_grad(f, x, eps=1e-5):
    """Central finite differences of scalar f w.r.t. every element of x."""
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f(x)
        flat[i] = orig - eps
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2 * eps)
    return g


def rel_err(a, b, floor=1e-8):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def brute_force_iou(mask_pairs, n):
    """Per-pixel confusion counting with explicit loops over (gt, pred) pairs.

    A class absent from both gt and prediction over the whole corpus gets
    IoU 1. Returns (per_class_iou, miou).
    """
    tp = [0] * n
    fp = [0] * n
    fn = [0] * n
    for gt, pred in mask_pairs:
        for i in range(gt.shape[0]):
            for j in range(gt.shape[1]):
                g, p = int(gt[i, j]), int(pred[i, j])
                if g == p:
                    tp[g] += 1
                else:
                    fn[g] += 1
                    fp[p] += 1
    ious = []
    for k in range(n):
        denom = tp[k] + fp[k] + fn[k]
        ious.append(tp[k] / denom if denom else 1.0)
    return ious, sum(ious) / n


def restricted_argmax_scan(pred, allowed):
    """Per-pixel linear scan over the allowed labels only."""
    _, h, w = pred.shape
    out = np.zeros((h, w), dtype=np.int64)
    ids = sorted(allowed)
    for i in range(h):
        for j in range(w):
            best, best_v = ids[0], pred[ids[0], i, j]
            for k in ids[1:]:
                if pred[k, i, j] > best_v:
                    best, best_v = k, pred[k, i, j]
            out[i, j] = best
    return out
