"""Binary PPM (P6) and PGM (P5) readers and writers, maxval 255.

Images are float arrays in [0,1]; on disk a pixel v is stored as
round(v*255) and read back as byte/255. Masks store raw label ids.
Errors always name the offending file.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np


def quantize01(values: np.ndarray) -> np.ndarray:
    """Snap [0,1] floats to the 8-bit grid k/255 used by the file formats."""
    return np.round(np.clip(values, 0.0, 1.0) * 255.0) / 255.0


def _to_bytes01(values: np.ndarray) -> np.ndarray:
    return np.round(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)


def _read_pnm(path: Path, magic: bytes) -> np.ndarray:
    data = path.read_bytes()
    if not data.startswith(magic):
        raise ValueError(f"{path}: expected {magic.decode()} file")
    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed; one whitespace byte ends the header.
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated header")
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    channels = 3 if magic == b"P6" else 1
    need = width * height * channels
    raw = data[pos : pos + need]
    if len(raw) != need:
        raise ValueError(f"{path}: truncated pixel data ({len(raw)} of {need} bytes)")
    arr = np.frombuffer(raw, dtype=np.uint8)
    return arr.reshape(height, width, 3) if channels == 3 else arr.reshape(height, width)


def write_ppm(path, image: np.ndarray) -> None:
    """image: (H, W, 3) floats in [0,1]."""
    path = Path(path)
    h, w, _ = image.shape
    with path.open("wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(_to_bytes01(image).tobytes())


def read_ppm(path) -> np.ndarray:
    path = Path(path)
    return _read_pnm(path, b"P6").astype(np.float64) / 255.0


def write_pgm(path, values: np.ndarray) -> None:
    """values: (H, W) integers in 0..255, written verbatim."""
    path = Path(path)
    v = np.asarray(values)
    if v.min() < 0 or v.max() > 255:
        raise ValueError(f"{path}: values outside 0..255 cannot be stored in PGM")
    h, w = v.shape
    with path.open("wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(v.astype(np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    """Returns raw (H, W) uint8 values."""
    path = Path(path)
    return _read_pnm(path, b"P5")


def write_saliency_pgm(path, saliency: np.ndarray) -> None:
    """saliency: (H, W) floats in [0,1], stored as round(v*255)."""
    write_pgm(path, _to_bytes01(saliency))


def read_saliency_pgm(path) -> np.ndarray:
    return read_pgm(path).astype(np.float64) / 255.0
