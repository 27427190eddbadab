"""RGB image buffers and the two file formats the CLI speaks.

Pixels are float64 in [0,1], shape (height, width, 3), clamped on the way
in. PPM (binary P6, maxval 255) is implemented natively so library
round-trip artifacts never depend on an image codec; PNG decoding goes
through Pillow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, InvalidParameterError

PROVENANCES = ("synthetic", "external", "reference")

# BT.601 luma weights; "grayscale" throughout the package means this.
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass
class ImageBuffer:
    pixels: np.ndarray  # (h, w, 3) float64 in [0, 1]
    provenance: str = "synthetic"

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise InvalidParameterError(
                f"pixels must have shape (h, w, 3) with h, w >= 1, got {px.shape}")
        if self.provenance not in PROVENANCES:
            raise InvalidParameterError(
                f"provenance {self.provenance!r} not in {PROVENANCES}")
        self.pixels = np.clip(px, 0.0, 1.0)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def grayscale(self) -> np.ndarray:
        """(h, w) BT.601 luma."""
        return self.pixels @ LUMA_WEIGHTS


def write_ppm(img: ImageBuffer, path) -> None:
    """Binary P6, maxval 255, rounding half away from zero."""
    data = np.floor(img.pixels * 255.0 + 0.5).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{img.width} {img.height}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def _read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    # Header: magic, width, height, maxval, separated by whitespace/comments,
    # then a single whitespace byte before the raster.
    pos = 0
    fields = []
    while len(fields) < 4:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PPM header")
        fields.append(blob[start:pos])
    pos += 1  # the single byte separating header from raster
    magic, w, h, maxval = fields
    if magic != b"P6":
        raise FormatError(f"{path}: not a binary PPM (P6) file")
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise FormatError(f"{path}: bad PPM header field: {exc}") from None
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 PPM is supported, got {maxval}")
    raster = blob[pos : pos + w * h * 3]
    if len(raster) != w * h * 3:
        raise FormatError(f"{path}: PPM raster truncated "
                          f"({len(raster)} of {w * h * 3} bytes)")
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3)
    return arr.astype(np.float64) / 255.0


def read_image(path, provenance: str = "external") -> ImageBuffer:
    """Load a PNG or binary PPM into an ImageBuffer."""
    path = str(path)
    if path.lower().endswith((".ppm", ".pnm")):
        return ImageBuffer(_read_ppm(path), provenance=provenance)
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover
        raise FormatError(f"Pillow is required to read {path}: {exc}") from None
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return ImageBuffer(arr, provenance=provenance)
