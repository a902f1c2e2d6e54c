"""Grayscale raster conventions and PGM (netpbm) file I/O.

An image is a 2-D float64 numpy array in (row, col) order, origin at the
top-left, nominal intensity range [0, 255]. Intensities stay floating
point through the whole processing chain and are quantized only when a
file is written. A binary mask is a 2-D uint8 array with values in {0, 1}.

Supported file format: PGM "P5" (binary) and "P2" (ASCII), maxval <= 255,
``#`` comments permitted between header tokens. Larger maxval is a hard
error rather than a silent rescale.
"""

from __future__ import annotations

import numpy as np

from .errors import MalformedHeader, TruncatedData, UnsupportedMaxval

__all__ = [
    "load_pgm",
    "save_pgm",
    "load_pgm_file",
    "save_pgm_file",
    "quantize",
    "validate_image",
    "validate_mask",
]


def validate_image(img: np.ndarray) -> np.ndarray:
    """Check image invariants and return the array as float64."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains NaN or infinite intensities")
    return arr


def validate_mask(mask: np.ndarray) -> np.ndarray:
    """Check mask invariants and return the array as uint8 in {0, 1}."""
    arr = np.asarray(mask)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D mask, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("mask values must be 0 or 1")
    return arr.astype(np.uint8)


def quantize(img: np.ndarray) -> np.ndarray:
    """Round intensities half-up and clamp to [0, 255]. Idempotent."""
    arr = validate_image(img)
    return np.clip(np.floor(arr + 0.5), 0.0, 255.0)


def _parse_int(token: bytes, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise MalformedHeader(f"non-numeric {what}: {token!r}") from None


def load_pgm(data: bytes) -> np.ndarray:
    """Decode PGM bytes into a float64 image.

    Raises
    ------
    MalformedHeader
        Unknown magic number or bad width/height tokens.
    UnsupportedMaxval
        Declared maxval above 255.
    TruncatedData
        Raster holds fewer samples than width*height (for P2 this also
        covers non-numeric sample tokens).
    """
    pos = 0
    n = len(data)

    def next_token() -> bytes:
        nonlocal pos
        while pos < n:
            c = data[pos : pos + 1]
            if c == b"#":
                nl = data.find(b"\n", pos)
                pos = n if nl < 0 else nl + 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise MalformedHeader("unexpected end of header")
        return data[start:pos]

    magic = next_token()
    if magic not in (b"P5", b"P2"):
        raise MalformedHeader(f"unsupported magic {magic!r}; only P5 and P2 are accepted")
    width = _parse_int(next_token(), "width")
    height = _parse_int(next_token(), "height")
    if width < 1 or height < 1:
        raise MalformedHeader(f"invalid dimensions {width}x{height}")
    maxval = _parse_int(next_token(), "maxval")
    if maxval > 255:
        raise UnsupportedMaxval(f"maxval {maxval} exceeds 255")
    if maxval < 1:
        raise MalformedHeader(f"invalid maxval {maxval}")

    count = width * height
    if magic == b"P5":
        # Exactly one whitespace byte separates the header from the raster.
        if pos >= n or not data[pos : pos + 1].isspace():
            raise MalformedHeader("missing whitespace after maxval")
        raster = data[pos + 1 :]
        if len(raster) < count:
            raise TruncatedData(f"expected {count} samples, found {len(raster)}")
        samples = np.frombuffer(raster, dtype=np.uint8, count=count)
    else:
        values = []
        try:
            while len(values) < count:
                values.append(int(next_token()))
        except (MalformedHeader, ValueError):
            raise TruncatedData(
                f"expected {count} ASCII samples, found {len(values)}"
            ) from None
        samples = np.asarray(values, dtype=np.int64)
    return samples.reshape(height, width).astype(np.float64)


def save_pgm(img: np.ndarray) -> bytes:
    """Encode an image as binary PGM (P5, maxval 255).

    Intensities are rounded half-up and clamped to [0, 255], so
    ``load_pgm(save_pgm(img))`` reproduces the quantized image exactly.
    """
    q = quantize(img).astype(np.uint8)
    height, width = q.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    return header + q.tobytes()


def load_pgm_file(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return load_pgm(fh.read())


def save_pgm_file(path, img: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(save_pgm(img))
