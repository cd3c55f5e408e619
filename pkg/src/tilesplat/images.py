"""Image output: 8-bit PPM (P6) always available, PNG via Pillow."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .raster import ImageBuffer


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(pixels * 255.0), 0, 255).astype(np.uint8)


def write_ppm(img: ImageBuffer, path) -> None:
    data = to_uint8(img.pixels)
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + data.tobytes())


def write_png(img: ImageBuffer, path) -> None:
    from PIL import Image
    Image.fromarray(to_uint8(img.pixels), mode="RGB").save(str(path))


def write_image(img: ImageBuffer, path) -> None:
    if str(path).lower().endswith(".png"):
        write_png(img, path)
    else:
        write_ppm(img, path)
