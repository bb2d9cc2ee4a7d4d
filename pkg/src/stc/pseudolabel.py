"""Pseudo-label mask generation from model predictions.

Plain per-pixel argmax, plus the label-restricted variants that inject
image-level supervision: simple images restrict to {background, class},
complex images to their label set with background adjoined. Ties always go
to the smallest label id.
"""
from __future__ import annotations

import numpy as np

from .network import predict
from .params import ParamSet


def argmax_full(pred: np.ndarray) -> np.ndarray:
    """(C+1, h, w) probabilities -> (h, w) labels; ties -> smallest id."""
    return np.argmax(np.asarray(pred), axis=0).astype(np.int64)


def argmax_restricted(pred: np.ndarray, allowed) -> np.ndarray:
    """Argmax over the allowed label subset only; background must be allowed."""
    pred = np.asarray(pred)
    ids = sorted(set(int(a) for a in allowed))
    if not ids or ids[0] != 0:
        raise ValueError(f"allowed set must be non-empty and contain background 0, got {ids}")
    if ids[-1] >= pred.shape[0]:
        raise ValueError(f"allowed label {ids[-1]} outside 0..{pred.shape[0] - 1}")
    lut = np.asarray(ids, dtype=np.int64)
    return lut[np.argmax(pred[lut], axis=0)]


def relabel_simple(params: ParamSet, image: np.ndarray, class_id: int) -> np.ndarray:
    """Pseudo-mask for a single-label image: argmax over {0, class_id}."""
    if class_id < 1:
        raise ValueError(f"class id must be >= 1, got {class_id}")
    return argmax_restricted(predict(params, image), {0, class_id})


def relabel_complex(params: ParamSet, image: np.ndarray, labels) -> np.ndarray:
    """Pseudo-mask restricted to the image-level label set plus background."""
    labels = set(int(c) for c in labels)
    if not labels:
        raise ValueError("label set must be non-empty")
    return argmax_restricted(predict(params, image), labels | {0})
