"""PNG framing shared by the dataset layout and the external-synthesizer
exchange: images as 16-bit grayscale with a linear [-1, 1] <-> [0, 65535]
map, labels as raw 8-bit values."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def to_uint16(img: np.ndarray) -> np.ndarray:
    """[-1, 1] -> [0, 65535], clipping out-of-range values."""
    x = np.clip(np.asarray(img, dtype=np.float64), -1.0, 1.0)
    return np.round((x + 1.0) / 2.0 * 65535.0).astype(np.uint16)


def from_uint16(raw: np.ndarray) -> np.ndarray:
    """[0, 65535] -> [-1, 1]."""
    return np.asarray(raw, dtype=np.float64) / 65535.0 * 2.0 - 1.0


def write_image16(path: str | Path, img: np.ndarray) -> None:
    # speckle frames barely compress; a low deflate level is much faster
    Image.fromarray(to_uint16(img)).save(path, compress_level=1)


def read_image16(path: str | Path) -> np.ndarray:
    arr = np.array(Image.open(path))
    if arr.ndim != 2:
        raise ValueError(f"{path}: expected a single-channel image")
    return from_uint16(arr.astype(np.uint16))


def write_label8(path: str | Path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    if labels.min(initial=0) < 0 or labels.max(initial=0) > 255:
        raise ValueError("label values outside uint8 range")
    Image.fromarray(labels.astype(np.uint8)).save(path)


def read_label8(path: str | Path) -> np.ndarray:
    arr = np.array(Image.open(path))
    if arr.ndim != 2:
        raise ValueError(f"{path}: expected a single-channel label image")
    return arr.astype(np.int32)


def read_mask(path: str | Path) -> np.ndarray:
    """8-bit mask PNG -> boolean array (nonzero = foreground)."""
    return read_label8(path) != 0
