"""Image, mask and edge-map file formats (8-bit PNG / binary PGM)."""

from __future__ import annotations

import io
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from spmrf.mrf import DimensionMismatchError, GridGeometry, MrfError
from spmrf.partition import RgbImage, _parse_pgm_header
from spmrf.pipeline import EdgeMap

Source = Union[str, Path, bytes]


def _as_bytes(source: Source) -> bytes:
    if isinstance(source, bytes):
        return source
    return Path(source).read_bytes()


def read_image(source: Source) -> RgbImage:
    """Decode an 8-bit PNG or PGM image into an RgbImage."""
    data = _as_bytes(source)
    try:
        with Image.open(io.BytesIO(data)) as img:
            rgb = img.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except Exception as exc:
        raise MrfError(f"cannot decode image: {exc}") from exc
    return RgbImage.from_array(arr)


def image_to_png_bytes(image: RgbImage) -> bytes:
    arr = np.clip(np.round(image.stack() * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def read_binary_mask(source: Source) -> np.ndarray:
    """Binary PGM or PNG mask; any nonzero sample counts as set."""
    data = _as_bytes(source)
    stripped = data.lstrip()
    if stripped.startswith(b"P5"):
        (width, height, maxval), offset = _parse_pgm_header(stripped, b"P5")
        if maxval < 1 or maxval > 255:
            raise MrfError("binary masks must be 8-bit PGM")
        body = stripped[offset:offset + width * height]
        if len(body) != width * height:
            raise MrfError(f"PGM mask holds {len(body)} of {width * height} pixels")
        return (np.frombuffer(body, dtype=np.uint8) > 0).reshape(height, width)
    try:
        with Image.open(io.BytesIO(data)) as img:
            arr = np.asarray(img.convert("L"), dtype=np.uint8)
    except Exception as exc:
        raise MrfError(f"cannot decode mask: {exc}") from exc
    return arr > 0


def mask_to_pgm_bytes(mask: np.ndarray) -> bytes:
    """Binary P5 PGM with 255 for set pixels."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise DimensionMismatchError("mask must be 2-D")
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    return header + (arr.astype(bool).astype(np.uint8) * 255).tobytes()


def mask_to_png_bytes(mask: np.ndarray) -> bytes:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise DimensionMismatchError("mask must be 2-D")
    buf = io.BytesIO()
    Image.fromarray(arr.astype(bool).astype(np.uint8) * 255, mode="L").save(
        buf, format="PNG")
    return buf.getvalue()


def write_mask(path: Union[str, Path], mask: np.ndarray) -> None:
    """Write a mask as PGM or PNG depending on the file extension."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        path.write_bytes(mask_to_png_bytes(mask))
    else:
        path.write_bytes(mask_to_pgm_bytes(mask))


def read_edge_map(source: Source, geometry: GridGeometry | None = None) -> EdgeMap:
    """Binary PGM/PNG edge map (255 = edge pixel)."""
    mask = read_binary_mask(source)
    geom = GridGeometry(mask.shape[1], mask.shape[0])
    if geometry is not None and geom != geometry:
        raise DimensionMismatchError(
            f"edge map geometry {geom} differs from expected {geometry}")
    return EdgeMap(geom, mask)
