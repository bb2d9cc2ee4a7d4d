"""Named parameter store with gradient and momentum state.

Holds the network weights as an insertion-ordered mapping of name ->
(value, gradient, velocity), all float64 arrays of identical shape. Also
provides momentum SGD, a central finite-difference gradient checker, and
the binary checkpoint format (magic "STCP").
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np

CHECKPOINT_MAGIC = b"STCP"
CHECKPOINT_VERSION = 1


@dataclass
class Param:
    value: np.ndarray
    grad: np.ndarray
    velocity: np.ndarray


class ParamSet:
    """Ordered name -> Param mapping; iteration order is insertion order."""

    def __init__(self) -> None:
        self._entries: dict[str, Param] = {}

    def add(self, name: str, value) -> Param:
        if name in self._entries:
            raise ValueError(f"duplicate parameter name {name!r}")
        v = np.array(value, dtype=np.float64)
        p = Param(v, np.zeros_like(v), np.zeros_like(v))
        self._entries[name] = p
        return p

    def __getitem__(self, name: str) -> Param:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def subset(self, names: Iterable[str]) -> "ParamSet":
        """View over a subset of entries; Param objects are shared, not copied."""
        out = ParamSet()
        for name in names:
            out._entries[name] = self._entries[name]
        return out

    def zero_grads(self) -> None:
        for p in self._entries.values():
            p.grad[...] = 0.0

    def copy(self) -> "ParamSet":
        out = ParamSet()
        for name, p in self._entries.items():
            out._entries[name] = Param(p.value.copy(), p.grad.copy(), p.velocity.copy())
        return out

    def num_values(self) -> int:
        return sum(p.value.size for p in self._entries.values())


def sgd_step(params: ParamSet, lr: float, momentum: float, weight_decay: float) -> None:
    """One momentum-SGD update over every entry; gradients are zeroed afterward.

    velocity <- momentum*velocity + grad + weight_decay*value
    value    <- value - lr*velocity
    """
    for name, p in params.items():
        if not np.all(np.isfinite(p.grad)):
            raise ValueError(f"non-finite gradient for parameter {name!r}")
        p.velocity *= momentum
        p.velocity += p.grad
        p.velocity += weight_decay * p.value
        p.value -= lr * p.velocity
        p.grad[...] = 0.0


def finite_diff_check(
    f: Callable[[ParamSet], float], params: ParamSet, eps: float = 1e-5
) -> float:
    """Worst relative error between params' stored analytic grads and central
    finite differences of f, with denominator max(|analytic|, |numeric|, 1e-8).

    The analytic gradients must already be populated in params.grad; f is
    evaluated twice per scalar coordinate.
    """
    worst = 0.0
    for _, p in params.items():
        flat = p.value.reshape(-1)
        gflat = p.grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = f(params)
            flat[i] = orig - eps
            fm = f(params)
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * eps)
            err = abs(gflat[i] - numeric) / max(abs(gflat[i]), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst


def save_params(params: ParamSet, path) -> None:
    """Binary checkpoint: magic, version u32, count u32, then per entry
    name (u16 length + UTF-8), rank u8, dims u32 each, little-endian f64 values.
    Gradient and velocity are not serialized."""
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(params)))
        for name, p in params.items():
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            dims = p.value.shape
            fh.write(struct.pack("<B", len(dims)))
            fh.write(struct.pack(f"<{len(dims)}I", *dims))
            fh.write(np.ascontiguousarray(p.value, dtype="<f8").tobytes())


def load_params(path) -> ParamSet:
    """Reads a checkpoint written by save_params; gradient/velocity start at zero."""
    path = Path(path)
    data = path.read_bytes()

    def take(n: int, what: str) -> bytes:
        nonlocal off
        if off + n > len(data):
            raise ValueError(f"{path}: truncated checkpoint while reading {what}")
        chunk = data[off : off + n]
        off += n
        return chunk

    off = 0
    if take(4, "magic") != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad checkpoint magic")
    version, count = struct.unpack("<II", take(8, "header"))
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    out = ParamSet()
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2, "name length"))
        name = take(nlen, "name").decode("utf-8")
        (rank,) = struct.unpack("<B", take(1, "rank"))
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "dims"))
        size = int(np.prod(dims)) if rank else 1
        raw = take(8 * size, f"values of {name!r}")
        out.add(name, np.frombuffer(raw, dtype="<f8").reshape(dims))
    return out
