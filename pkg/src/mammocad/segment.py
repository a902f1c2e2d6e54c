"""Threshold segmentation: Otsu or fixed-threshold binarization, mask
re-smoothing, connected-component labeling, and candidate region filtering.

Everything is deterministic. Component labels are assigned in raster-scan
first-encounter order, and candidate regions are ordered by area (ties by
label), so identical inputs always produce identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .enhance import gaussian_smooth
from .errors import DegenerateHistogram
from .image import quantize, validate_image, validate_mask

__all__ = [
    "SegmentConfig",
    "LabelMap",
    "Region",
    "otsu_threshold",
    "binarize",
    "mask_smooth",
    "connected_components",
    "extract_regions",
    "segment",
]


@dataclass(frozen=True)
class SegmentConfig:
    threshold_mode: str = "otsu"
    fixed_threshold: int = 128
    min_area: int = 50
    mask_sigma: float = 1.0

    def __post_init__(self):
        if self.threshold_mode not in ("otsu", "fixed"):
            raise ValueError(f"unknown threshold_mode {self.threshold_mode!r}")
        if not (0 <= self.fixed_threshold <= 254):
            raise ValueError("fixed_threshold must be in [0, 254]")
        if self.min_area < 1:
            raise ValueError("min_area must be >= 1")
        if self.mask_sigma <= 0:
            raise ValueError("mask_sigma must be > 0")


@dataclass(frozen=True)
class LabelMap:
    """Connected-component labels, 0 for background, 1..region_count."""

    labels: np.ndarray
    region_count: int


@dataclass(frozen=True)
class Region:
    """One connected component.

    coords is an (n, 2) int array of (row, col) pixels in raster order;
    bbox is the tight (min_row, min_col, max_row, max_col).
    """

    label: int
    coords: np.ndarray
    bbox: tuple[int, int, int, int]

    @property
    def area(self) -> int:
        return int(self.coords.shape[0])

    @property
    def centroid(self) -> tuple[float, float]:
        r, c = self.coords.mean(axis=0)
        return float(r), float(c)


def otsu_threshold(img: np.ndarray) -> int:
    """Threshold maximizing between-class variance of the 256-bin histogram.

    Intensities are quantized to integers for histogramming. Ties are
    broken by the smallest threshold; the foreground convention used by
    `binarize` is strictly-greater-than. The comparison is carried out in
    exact integer arithmetic so tie-breaking is bit-reproducible.
    """
    q = quantize(img).astype(np.int64)
    counts = np.bincount(q.ravel(), minlength=256)
    if int(np.count_nonzero(counts)) < 2:
        raise DegenerateHistogram("all pixels share one intensity")
    total = int(counts.sum())
    total_sum = int((counts * np.arange(256, dtype=np.int64)).sum())
    best_t = -1
    best_num2 = -1  # squared numerator of the best variance, exact int
    best_den = 1
    w0 = 0
    s0 = 0
    for t in range(255):
        w0 += int(counts[t])
        s0 += t * int(counts[t])
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        # between-class variance = (s0*w1 - s1*w0)^2 / (w0*w1*total^2);
        # the constant total^2 is dropped from the comparison.
        num = s0 * w1 - (total_sum - s0) * w0
        den = w0 * w1
        if num * num * best_den > best_num2 * den:
            best_num2 = num * num
            best_den = den
            best_t = t
    return best_t


def binarize(img: np.ndarray, t: int) -> np.ndarray:
    """Mask of quantized intensities strictly greater than t."""
    return (quantize(img) > t).astype(np.uint8)


def mask_smooth(mask: np.ndarray, sigma: float) -> np.ndarray:
    """Smooth a binary mask and re-binarize at half maximum.

    Bits are treated as {0, 255} intensities, Gaussian-smoothed, and
    thresholded at > 127.5, which removes isolated speckle.
    """
    arr = validate_mask(mask)
    smoothed = gaussian_smooth(arr.astype(np.float64) * 255.0, sigma)
    return (smoothed > 127.5).astype(np.uint8)


_STRUCTURE_8 = np.ones((3, 3), dtype=np.uint8)
_STRUCTURE_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.uint8)


def connected_components(mask: np.ndarray, connectivity: int = 8) -> LabelMap:
    """Label connected foreground components.

    Labels are renumbered so that 1, 2, ... follow the raster-scan order
    of each component's first pixel, independent of the labeling backend.
    """
    arr = validate_mask(mask)
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    structure = _STRUCTURE_8 if connectivity == 8 else _STRUCTURE_4
    raw, count = ndimage.label(arr, structure=structure)
    if count == 0:
        return LabelMap(labels=raw.astype(np.int64), region_count=0)
    flat = raw.ravel()
    values, first_index = np.unique(flat, return_index=True)
    nonzero = values != 0
    order = np.argsort(first_index[nonzero], kind="stable")
    mapping = np.zeros(count + 1, dtype=np.int64)
    mapping[values[nonzero][order]] = np.arange(1, count + 1)
    return LabelMap(labels=mapping[raw], region_count=count)


def extract_regions(lm: LabelMap, min_area: int = 1) -> list[Region]:
    """Regions with at least min_area pixels, largest first (ties by label)."""
    if lm.region_count == 0:
        return []
    labels = lm.labels
    width = labels.shape[1]
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=lm.region_count + 1)
    keep = [
        lab
        for lab in range(1, lm.region_count + 1)
        if counts[lab] >= min_area
    ]
    keep.sort(key=lambda lab: (-counts[lab], lab))
    if not keep:
        return []
    # Stable sort groups pixels by label while preserving raster order.
    order = np.argsort(flat, kind="stable")
    starts = np.cumsum(counts)[:-1]
    regions = []
    for lab in keep:
        begin = int(starts[lab - 1])
        idx = order[begin : begin + int(counts[lab])]
        coords = np.column_stack((idx // width, idx % width)).astype(np.int64)
        bbox = (
            int(coords[:, 0].min()),
            int(coords[:, 1].min()),
            int(coords[:, 0].max()),
            int(coords[:, 1].max()),
        )
        regions.append(Region(label=int(lab), coords=coords, bbox=bbox))
    return regions


def segment(img: np.ndarray, cfg: SegmentConfig | None = None) -> list[Region]:
    """Binarize (Otsu or fixed threshold), re-smooth, label, and filter.

    A degenerate histogram (constant image) yields an empty region list.
    """
    cfg = cfg or SegmentConfig()
    arr = validate_image(img)
    if cfg.threshold_mode == "fixed":
        t = cfg.fixed_threshold
    else:
        try:
            t = otsu_threshold(arr)
        except DegenerateHistogram:
            return []
    mask = binarize(arr, t)
    mask = mask_smooth(mask, cfg.mask_sigma)
    lm = connected_components(mask, connectivity=8)
    return extract_regions(lm, cfg.min_area)
