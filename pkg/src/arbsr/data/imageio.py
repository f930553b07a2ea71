"""PNG / PPM reading and writing plus array conversions.

An image buffer is a ``uint8`` array of shape (H, W, 3).  Network tensors
are float arrays of shape (N, 3, H, W) in [0, 1].
"""
from __future__ import annotations

import logging
import os
from pathlib import Path

import numpy as np
from PIL import Image

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".ppm"}
_FORMATS = {".png": "PNG", ".ppm": "PPM", ".pgm": "PPM"}


def read_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_image(path, img: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 image.  Unrecognised suffixes get PPM."""
    path = Path(path)
    fmt = _FORMATS.get(path.suffix.lower(), "PPM")
    Image.fromarray(np.asarray(img, dtype=np.uint8), mode="RGB").save(path, format=fmt)


def write_pgm(path, gray: np.ndarray) -> None:
    """Write an (H, W) uint8 map as binary PGM (P5)."""
    gray = np.asarray(gray, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{gray.shape[1]} {gray.shape[0]}\n255\n".encode("ascii"))
        fh.write(gray.tobytes())


def read_pgm(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im, dtype=np.uint8).copy()


def to_tensor(img: np.ndarray, dtype=np.float32) -> np.ndarray:
    """(H, W, 3) uint8 -> (1, 3, H, W) float in [0, 1]."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) RGB image, got shape {img.shape}")
    return (img.transpose(2, 0, 1)[None].astype(dtype) / 255.0).astype(dtype)


def to_image(t: np.ndarray) -> np.ndarray:
    """(1, 3, H, W) or (3, H, W) float in [0, 1] -> clamped (H, W, 3) uint8."""
    t = np.asarray(t)
    if t.ndim == 4:
        t = t[0]
    return np.clip(np.rint(t * 255.0), 0, 255).astype(np.uint8).transpose(1, 2, 0)


def list_images(directory) -> list[Path]:
    """Image paths in ``directory``, or those named by its ``manifest.txt``."""
    directory = Path(directory)
    manifest = directory / "manifest.txt"
    if manifest.is_file():
        paths = []
        for line in manifest.read_text().splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                p = Path(line)
                paths.append(p if p.is_absolute() else directory / p)
        return paths
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def load_corpus(directory, dtype=np.float32) -> list[np.ndarray]:
    """Load every image under ``directory`` as a (3, H, W) float array."""
    if not os.path.isdir(directory):
        raise FileNotFoundError(f"corpus directory not found: {directory}")
    images = [to_tensor(read_image(p), dtype)[0] for p in list_images(directory)]
    log.info("loaded %d images from %s", len(images), directory)
    return images
