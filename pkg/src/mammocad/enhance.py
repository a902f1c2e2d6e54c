"""Image enhancement chain: Gaussian smoothing, grayscale morphology with a
disk structuring element, percentile contrast stretching, and a two-level
orthonormal Haar wavelet decompose/reconstruct step.

Border conventions
------------------
* Convolution and wavelet padding replicate the nearest edge pixel.
* Erosion and dilation take the min/max over the in-bounds part of the
  structuring element support only. For disk-shaped elements this is
  identical to edge replication, which the fast path below exploits.

All operations are pure functions; nothing here mutates its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, NonPositiveSigma
from .image import validate_image

__all__ = [
    "EnhanceConfig",
    "StructuringElement",
    "WaveletPyramid",
    "gaussian_kernel_1d",
    "gaussian_smooth",
    "disk_se",
    "erode",
    "dilate",
    "opening",
    "tophat",
    "contrast_stretch",
    "dwt2_forward",
    "dwt2_inverse",
    "denoise_reconstruct",
    "enhance",
]

_SQRT2 = math.sqrt(2.0)

DETAIL_POLICIES = ("zero_level1", "zero_all", "soft_threshold", "keep_all")


@dataclass(frozen=True)
class EnhanceConfig:
    """Parameters of the enhancement chain.

    detail_threshold is only consulted when detail_policy is
    "soft_threshold".
    """

    gaussian_sigma: float = 1.5
    se_radius: int = 45
    stretch_low: float = 1.0
    stretch_high: float = 99.0
    dwt_levels: int = 2
    detail_policy: str = "zero_level1"
    detail_threshold: float = 0.0

    def __post_init__(self):
        if self.gaussian_sigma <= 0:
            raise NonPositiveSigma(f"gaussian_sigma must be > 0, got {self.gaussian_sigma}")
        if self.se_radius < 0:
            raise ValueError(f"se_radius must be >= 0, got {self.se_radius}")
        if not (0 <= self.stretch_low < self.stretch_high <= 100):
            raise ValueError(
                f"stretch percentiles must satisfy 0 <= low < high <= 100, "
                f"got ({self.stretch_low}, {self.stretch_high})"
            )
        if self.dwt_levels < 1:
            raise ValueError(f"dwt_levels must be >= 1, got {self.dwt_levels}")
        if self.detail_policy not in DETAIL_POLICIES:
            raise ValueError(f"unknown detail_policy {self.detail_policy!r}")
        if self.detail_threshold < 0:
            raise ValueError("detail_threshold must be >= 0")


# ---------------------------------------------------------------------------
# Gaussian smoothing
# ---------------------------------------------------------------------------

def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Sampled Gaussian of odd length 2*ceil(3*sigma)+1, normalized to sum 1."""
    if sigma <= 0:
        raise NonPositiveSigma(f"sigma must be > 0, got {sigma}")
    half = int(math.ceil(3.0 * sigma))
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    kernel = np.exp(-(offsets * offsets) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def _correlate_rows(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Plain shifted-slice accumulation. Every output is the same fixed-order
    # sum, so regions with identical neighborhoods produce bit-identical
    # results (constant areas stay exactly constant).
    half = kernel.size // 2
    padded = np.pad(img, ((0, 0), (half, half)), mode="edge")
    width = img.shape[1]
    out = np.zeros_like(img)
    for tap, weight in enumerate(kernel):
        out += weight * padded[:, tap : tap + width]
    return out


def gaussian_smooth(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian smoothing (rows then columns), edge-replicated."""
    arr = validate_image(img)
    kernel = gaussian_kernel_1d(sigma)
    out = _correlate_rows(arr, kernel)
    out = _correlate_rows(out.T, kernel).T
    return out


# ---------------------------------------------------------------------------
# Grayscale morphology
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StructuringElement:
    """Flat structuring element given by (drow, dcol) offsets.

    Must contain the origin and be symmetric under negation.
    """

    offsets: tuple[tuple[int, int], ...]

    def __post_init__(self):
        offs = set(self.offsets)
        if (0, 0) not in offs:
            raise ValueError("structuring element must contain the origin")
        for dr, dc in offs:
            if (-dr, -dc) not in offs:
                raise ValueError("structuring element must be symmetric under negation")
        object.__setattr__(self, "offsets", tuple(sorted(offs)))

    def reflected(self) -> "StructuringElement":
        return StructuringElement(tuple((-r, -c) for r, c in self.offsets))


def disk_se(radius: int) -> StructuringElement:
    """Disk of offsets with dr^2 + dc^2 <= radius^2."""
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    r2 = radius * radius
    offs = [
        (dr, dc)
        for dr in range(-radius, radius + 1)
        for dc in range(-radius, radius + 1)
        if dr * dr + dc * dc <= r2
    ]
    return StructuringElement(tuple(offs))


def _symmetric_chords(offsets) -> list[tuple[int, int]] | None:
    """Decompose the offset set into per-row chords [-w, w], if possible.

    Returns a list of (drow, halfwidth) or None when some row is not a
    contiguous run centered on column 0.
    """
    by_row: dict[int, list[int]] = {}
    for dr, dc in offsets:
        by_row.setdefault(dr, []).append(dc)
    chords = []
    for dr in sorted(by_row):
        cols = sorted(by_row[dr])
        lo, hi = cols[0], cols[-1]
        if lo != -hi or len(cols) != hi - lo + 1:
            return None
        chords.append((dr, hi))
    return chords


def _windowed_lines(img, halfwidths, combine) -> dict[int, np.ndarray]:
    """Row-direction windowed min/max for every requested halfwidth.

    Builds one sparse table of power-of-two block extremes on the
    edge-padded rows, then answers each centered window [c-h, c+h] as the
    extreme of two overlapping blocks. Edge replication gives the same
    result as restricting to in-bounds columns because replicated samples
    duplicate pixels already inside the window.
    """
    width = img.shape[1]
    radius = max(halfwidths)
    lines: dict[int, np.ndarray] = {}
    if 0 in halfwidths:
        lines[0] = img
    if radius == 0:
        return lines
    table = [np.pad(img, ((0, 0), (radius, radius)), mode="edge")]
    max_level = (2 * radius + 1).bit_length() - 1
    for level in range(1, max_level + 1):
        step = 1 << (level - 1)
        prev = table[-1]
        table.append(combine(prev[:, :-step], prev[:, step:]))
    for h in halfwidths:
        if h == 0:
            continue
        size = 2 * h + 1
        level = size.bit_length() - 1  # largest 2^level <= size
        block = 1 << level
        left = table[level][:, radius - h : radius - h + width]
        right = table[level][:, radius + h - block + 1 : radius + h - block + 1 + width]
        lines[h] = combine(left, right)
    return lines


def _morph_chords(img, chords, is_min: bool) -> np.ndarray:
    height = img.shape[0]
    out = np.full_like(img, np.inf if is_min else -np.inf)
    combine = np.minimum if is_min else np.maximum
    lines = _windowed_lines(img, {h for _, h in chords}, combine)
    for dr, halfwidth in chords:
        if abs(dr) >= height:
            continue
        line = lines[halfwidth]
        dst = out[max(0, -dr) : height - max(0, dr)]
        src = line[max(0, dr) : height - max(0, -dr)]
        combine(dst, src, out=dst)
    return out


def _morph_generic(img, offsets, is_min: bool) -> np.ndarray:
    height, width = img.shape
    out = np.full_like(img, np.inf if is_min else -np.inf)
    combine = np.minimum if is_min else np.maximum
    for dr, dc in offsets:
        if abs(dr) >= height or abs(dc) >= width:
            continue
        dst = out[max(0, -dr) : height - max(0, dr), max(0, -dc) : width - max(0, dc)]
        src = img[max(0, dr) : height - max(0, -dr), max(0, dc) : width - max(0, -dc)]
        combine(dst, src, out=dst)
    return out


def _morph(img, se: StructuringElement, is_min: bool) -> np.ndarray:
    arr = validate_image(img)
    chords = _symmetric_chords(se.offsets)
    if chords is not None:
        return _morph_chords(arr, chords, is_min)
    return _morph_generic(arr, se.offsets, is_min)


def erode(img: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Min over the structuring element; out-of-bounds offsets ignored."""
    return _morph(img, se, is_min=True)


def dilate(img: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Max over the reflected structuring element; out-of-bounds ignored."""
    return _morph(img, se.reflected(), is_min=False)


def opening(img: np.ndarray, se: StructuringElement) -> np.ndarray:
    return dilate(erode(img, se), se)


def tophat(img: np.ndarray, se: StructuringElement) -> np.ndarray:
    """White top-hat: image minus its opening. Non-negative everywhere."""
    arr = validate_image(img)
    return arr - opening(arr, se)


# ---------------------------------------------------------------------------
# Contrast stretching
# ---------------------------------------------------------------------------

def _nearest_rank(sorted_flat: np.ndarray, percentile: float) -> float:
    rank = max(1, math.ceil(percentile / 100.0 * sorted_flat.size))
    return float(sorted_flat[rank - 1])


def contrast_stretch(img: np.ndarray, p_low: float, p_high: float) -> np.ndarray:
    """Linear stretch between the nearest-rank p_low/p_high percentiles.

    Maps x to 255*(x-a)/(b-a) clamped to [0, 255]. Degenerate images
    (a == b) are returned unchanged.
    """
    arr = validate_image(img)
    if not (0 <= p_low < p_high <= 100):
        raise ValueError(f"need 0 <= p_low < p_high <= 100, got ({p_low}, {p_high})")
    flat = np.sort(arr, axis=None)
    a = _nearest_rank(flat, p_low)
    b = _nearest_rank(flat, p_high)
    if a == b:
        return arr.copy()
    return np.clip((arr - a) * (255.0 / (b - a)), 0.0, 255.0)


# ---------------------------------------------------------------------------
# Orthonormal Haar DWT
# ---------------------------------------------------------------------------

@dataclass
class WaveletPyramid:
    """Multi-level 2-D Haar decomposition.

    ``details[k]`` holds the (lh, hl, hh) subbands produced by analysis
    level k+1 (finest first); ``ll`` is the coarsest approximation.
    With x = [[a, b], [c, d]] one level gives ll = (a+b+c+d)/2,
    lh = (a-b+c-d)/2, hl = (a+b-c-d)/2, hh = (a-b-c+d)/2.
    """

    ll: np.ndarray
    details: list[tuple[np.ndarray, np.ndarray, np.ndarray]]
    original_dims: tuple[int, int]

    @property
    def levels(self) -> int:
        return len(self.details)


def _pad_even(img: np.ndarray) -> np.ndarray:
    pad_r = img.shape[0] % 2
    pad_c = img.shape[1] % 2
    if pad_r or pad_c:
        return np.pad(img, ((0, pad_r), (0, pad_c)), mode="edge")
    return img


def _haar_forward_level(img: np.ndarray):
    padded = _pad_even(img)
    lo = (padded[:, 0::2] + padded[:, 1::2]) / _SQRT2
    hi = (padded[:, 0::2] - padded[:, 1::2]) / _SQRT2
    ll = (lo[0::2] + lo[1::2]) / _SQRT2
    hl = (lo[0::2] - lo[1::2]) / _SQRT2
    lh = (hi[0::2] + hi[1::2]) / _SQRT2
    hh = (hi[0::2] - hi[1::2]) / _SQRT2
    return ll, lh, hl, hh


def _haar_inverse_level(ll, lh, hl, hh) -> np.ndarray:
    rows2, cols2 = ll.shape
    lo = np.empty((2 * rows2, cols2))
    lo[0::2] = (ll + hl) / _SQRT2
    lo[1::2] = (ll - hl) / _SQRT2
    hi = np.empty((2 * rows2, cols2))
    hi[0::2] = (lh + hh) / _SQRT2
    hi[1::2] = (lh - hh) / _SQRT2
    out = np.empty((2 * rows2, 2 * cols2))
    out[:, 0::2] = (lo + hi) / _SQRT2
    out[:, 1::2] = (lo - hi) / _SQRT2
    return out


def _dims_chain(original_dims: tuple[int, int], levels: int) -> list[tuple[int, int]]:
    dims = [original_dims]
    for _ in range(levels):
        h, w = dims[-1]
        dims.append(((h + 1) // 2, (w + 1) // 2))
    return dims


def dwt2_forward(img: np.ndarray, levels: int) -> WaveletPyramid:
    """Multi-level separable Haar analysis.

    Odd-length edges are padded by edge replication to even before each
    level, so subband dims at level k are ceil(dim / 2^k).
    """
    arr = validate_image(img)
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    details = []
    current = arr
    for _ in range(levels):
        current, lh, hl, hh = _haar_forward_level(current)
        details.append((lh, hl, hh))
    return WaveletPyramid(ll=current, details=details, original_dims=arr.shape)


def dwt2_inverse(pyr: WaveletPyramid) -> np.ndarray:
    """Exact inverse of dwt2_forward, cropped to the original dims."""
    dims = _dims_chain(pyr.original_dims, pyr.levels)
    if tuple(pyr.ll.shape) != dims[-1]:
        raise DimensionMismatch(
            f"ll has shape {pyr.ll.shape}, expected {dims[-1]} for "
            f"{pyr.levels} levels over {pyr.original_dims}"
        )
    for k, (lh, hl, hh) in enumerate(pyr.details):
        expected = dims[k + 1]
        for name, band in (("lh", lh), ("hl", hl), ("hh", hh)):
            if tuple(band.shape) != expected:
                raise DimensionMismatch(
                    f"level {k + 1} {name} has shape {band.shape}, expected {expected}"
                )
    current = pyr.ll
    for k in range(pyr.levels - 1, -1, -1):
        lh, hl, hh = pyr.details[k]
        current = _haar_inverse_level(current, lh, hl, hh)
        h, w = dims[k]
        current = current[:h, :w]
    return current


def denoise_reconstruct(
    img: np.ndarray,
    levels: int,
    policy: str,
    threshold: float = 0.0,
) -> np.ndarray:
    """Forward transform, apply the detail policy, inverse transform.

    Policies: "keep_all" leaves details alone, "zero_level1" zeroes the
    finest level, "zero_all" zeroes every detail subband, and
    "soft_threshold" shrinks each coefficient by `threshold` toward zero.
    """
    if policy not in DETAIL_POLICIES:
        raise ValueError(f"unknown detail_policy {policy!r}")
    pyr = dwt2_forward(img, levels)
    if policy == "zero_level1":
        pyr.details[0] = tuple(np.zeros_like(b) for b in pyr.details[0])
    elif policy == "zero_all":
        pyr.details = [tuple(np.zeros_like(b) for b in bands) for bands in pyr.details]
    elif policy == "soft_threshold":
        shrink = lambda b: np.sign(b) * np.maximum(np.abs(b) - threshold, 0.0)
        pyr.details = [tuple(shrink(b) for b in bands) for bands in pyr.details]
    return dwt2_inverse(pyr)


# ---------------------------------------------------------------------------
# Full chain
# ---------------------------------------------------------------------------

def enhance(img: np.ndarray, cfg: EnhanceConfig | None = None) -> np.ndarray:
    """Run the fixed enhancement chain.

    Order: Gaussian smoothing, percentile contrast stretch, white top-hat
    with a disk element, wavelet denoise/reconstruct. The output is
    clamped to [0, 255].
    """
    cfg = cfg or EnhanceConfig()
    out = gaussian_smooth(img, cfg.gaussian_sigma)
    out = contrast_stretch(out, cfg.stretch_low, cfg.stretch_high)
    out = tophat(out, disk_se(cfg.se_radius))
    out = denoise_reconstruct(out, cfg.dwt_levels, cfg.detail_policy, cfg.detail_threshold)
    return np.clip(out, 0.0, 255.0)
