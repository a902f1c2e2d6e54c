"""Geometric region descriptors: area, centroid, equivalent-ellipse axes,
eccentricity, orientation, filled area, extremal points, solidity and
equivalent diameter, flattened into a fixed-order numeric vector.

Pixels are modeled as unit squares: second moments carry the +1/12
per-pixel correction, extremal points and the convex hull are computed on
pixel corners. The full vector has 26 values (centroid contributes 2,
extrema contribute 16).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .segment import Region

__all__ = [
    "TEN_PROPERTIES",
    "MomentSet",
    "central_moments",
    "ellipse_params",
    "fill_holes",
    "filled_area",
    "extrema",
    "convex_hull_area",
    "solidity",
    "equiv_diameter",
    "feature_names",
    "properties_from_feature_names",
    "extract_features",
]

TEN_PROPERTIES = (
    "area",
    "centroid",
    "major_axis_length",
    "minor_axis_length",
    "eccentricity",
    "orientation",
    "filled_area",
    "extrema",
    "solidity",
    "equiv_diameter",
)

_EXTREMA_ORDER = (
    "top_left",
    "top_right",
    "right_top",
    "right_bottom",
    "bottom_right",
    "bottom_left",
    "left_bottom",
    "left_top",
)

_ISOTROPY_TOL = 1e-12


@dataclass(frozen=True)
class MomentSet:
    """Area, centroid and per-pixel-normalized central second moments."""

    m00: int
    centroid_row: float
    centroid_col: float
    mu_rr: float
    mu_cc: float
    mu_rc: float


def central_moments(region: Region) -> MomentSet:
    """Moments of the pixel set under the unit-square pixel model."""
    coords = region.coords.astype(np.float64)
    n = coords.shape[0]
    mean_r, mean_c = coords.mean(axis=0)
    dr = coords[:, 0] - mean_r
    dc = coords[:, 1] - mean_c
    return MomentSet(
        m00=int(n),
        centroid_row=float(mean_r),
        centroid_col=float(mean_c),
        mu_rr=float((dr * dr).mean() + 1.0 / 12.0),
        mu_cc=float((dc * dc).mean() + 1.0 / 12.0),
        mu_rc=float((dr * dc).mean()),
    )


def ellipse_params(m: MomentSet) -> tuple[float, float, float, float]:
    """(major, minor, eccentricity, orientation_degrees) of the moment ellipse.

    Axis lengths are 4*sqrt(eigenvalue) of the covariance
    [[mu_cc, mu_rc], [mu_rc, mu_rr]]. Orientation is the major-axis angle
    from the +col axis, counter-clockwise with row pointing down negated,
    in (-90, 90]; isotropic regions get 0.
    """
    trace = m.mu_cc + m.mu_rr
    diff = m.mu_cc - m.mu_rr
    disc = math.sqrt(diff * diff + 4.0 * m.mu_rc * m.mu_rc)
    lam1 = (trace + disc) / 2.0
    lam2 = max((trace - disc) / 2.0, 0.0)
    major = 4.0 * math.sqrt(lam1)
    minor = 4.0 * math.sqrt(lam2)
    eccentricity = math.sqrt(max(1.0 - lam2 / lam1, 0.0)) if lam1 > 0 else 0.0
    if disc <= _ISOTROPY_TOL:
        orientation = 0.0
    else:
        orientation = 0.5 * math.degrees(math.atan2(-2.0 * m.mu_rc, diff))
        if orientation <= -90.0:  # signed-zero atan2 can land on -pi
            orientation += 180.0
    return major, minor, eccentricity, orientation


def fill_holes(region: Region) -> np.ndarray:
    """Region pixels plus enclosed background, as (n, 2) coords.

    A hole is background inside the bounding box with no 4-connected path
    to the box border.
    """
    min_r, min_c, max_r, max_c = region.bbox
    mask = np.zeros((max_r - min_r + 1, max_c - min_c + 1), dtype=bool)
    mask[region.coords[:, 0] - min_r, region.coords[:, 1] - min_c] = True
    filled = ndimage.binary_fill_holes(mask)
    rows, cols = np.nonzero(filled)
    return np.column_stack((rows + min_r, cols + min_c)).astype(np.int64)


def filled_area(region: Region) -> int:
    return int(fill_holes(region).shape[0])


def extrema(region: Region) -> np.ndarray:
    """The 8 extremal points on pixel-corner coordinates, as an (8, 2) array.

    Order: top_left, top_right, right_top, right_bottom, bottom_right,
    bottom_left, left_bottom, left_top; each point is (row, col).
    """
    rows = region.coords[:, 0]
    cols = region.coords[:, 1]
    r_min, r_max = int(rows.min()), int(rows.max())
    c_min, c_max = int(cols.min()), int(cols.max())
    top = cols[rows == r_min]
    bottom = cols[rows == r_max]
    left = rows[cols == c_min]
    right = rows[cols == c_max]
    points = [
        (r_min, int(top.min())),            # top_left
        (r_min, int(top.max()) + 1),        # top_right
        (int(right.min()), c_max + 1),      # right_top
        (int(right.max()) + 1, c_max + 1),  # right_bottom
        (r_max + 1, int(bottom.max()) + 1), # bottom_right
        (r_max + 1, int(bottom.min())),     # bottom_left
        (int(left.max()) + 1, c_min),       # left_bottom
        (int(left.min()), c_min),           # left_top
    ]
    return np.asarray(points, dtype=np.float64)


def _row_extents(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-pixel-row (row_value, min_col, max_col); coords are raster-sorted."""
    rows = coords[:, 0]
    cols = coords[:, 1]
    change = np.flatnonzero(np.diff(rows)) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change - 1, [rows.size - 1]))
    return rows[starts], cols[starts], cols[ends]


def _hull_candidate_corners(region: Region) -> np.ndarray:
    """Corner points that can be hull vertices: per corner-row col extremes."""
    pr, pmin, pmax = _row_extents(region.coords)
    corner_rows = np.unique(np.concatenate((pr, pr + 1)))
    lo = np.full(corner_rows.size, np.iinfo(np.int64).max)
    hi = np.full(corner_rows.size, np.iinfo(np.int64).min)
    # corners at row v come from pixel rows v (top edge) and v-1 (bottom edge)
    for shift in (0, 1):
        pos = np.searchsorted(corner_rows, pr + shift)
        np.minimum.at(lo, pos, pmin)
        np.maximum.at(hi, pos, pmax + 1)
    points = np.concatenate(
        (
            np.column_stack((corner_rows, lo)),
            np.column_stack((corner_rows, hi)),
        )
    )
    return points.astype(np.float64)


def _monotone_chain(points: np.ndarray) -> np.ndarray:
    pts = sorted({(float(r), float(c)) for r, c in points})
    if len(pts) <= 2:
        return np.asarray(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) > 1 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) > 1 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.asarray(lower[:-1] + upper[:-1])


def convex_hull_area(region: Region) -> float:
    """Shoelace area of the hull of all pixel-corner points."""
    hull = _monotone_chain(_hull_candidate_corners(region))
    if hull.shape[0] < 3:
        return 0.0
    r = hull[:, 0]
    c = hull[:, 1]
    return float(abs(np.dot(c, np.roll(r, -1)) - np.dot(r, np.roll(c, -1))) / 2.0)


def solidity(region: Region) -> float:
    return region.area / convex_hull_area(region)


def equiv_diameter(region: Region) -> float:
    return math.sqrt(4.0 * region.area / math.pi)


def feature_names(properties=TEN_PROPERTIES) -> tuple[str, ...]:
    """Flattened column names for the selected properties, fixed order."""
    names: list[str] = []
    for prop in TEN_PROPERTIES:
        if prop not in properties:
            continue
        if prop == "centroid":
            names += ["centroid_row", "centroid_col"]
        elif prop == "extrema":
            for point in _EXTREMA_ORDER:
                names += [f"extrema_{point}_row", f"extrema_{point}_col"]
        else:
            names.append(prop)
    return tuple(names)


def properties_from_feature_names(names) -> tuple[str, ...]:
    """Recover the property subset from flattened column names."""
    present = set()
    for name in names:
        if name.startswith("centroid_"):
            present.add("centroid")
        elif name.startswith("extrema_"):
            present.add("extrema")
        else:
            present.add(name)
    unknown = present - set(TEN_PROPERTIES)
    if unknown:
        raise ValueError(f"unknown feature names for properties {sorted(unknown)}")
    return tuple(p for p in TEN_PROPERTIES if p in present)


def extract_features(region: Region, properties=TEN_PROPERTIES) -> np.ndarray:
    """Flatten the selected properties into a float vector (26 for all ten)."""
    unknown = set(properties) - set(TEN_PROPERTIES)
    if unknown:
        raise ValueError(f"unknown properties {sorted(unknown)}")
    selected = set(properties)
    moments = central_moments(region)
    needs_ellipse = selected & {
        "major_axis_length",
        "minor_axis_length",
        "eccentricity",
        "orientation",
    }
    if needs_ellipse:
        major, minor, ecc, orient = ellipse_params(moments)
    values: list[float] = []
    for prop in TEN_PROPERTIES:
        if prop not in selected:
            continue
        if prop == "area":
            values.append(float(region.area))
        elif prop == "centroid":
            values += [moments.centroid_row, moments.centroid_col]
        elif prop == "major_axis_length":
            values.append(major)
        elif prop == "minor_axis_length":
            values.append(minor)
        elif prop == "eccentricity":
            values.append(ecc)
        elif prop == "orientation":
            values.append(orient)
        elif prop == "filled_area":
            values.append(float(filled_area(region)))
        elif prop == "extrema":
            values += [float(v) for v in extrema(region).ravel()]
        elif prop == "solidity":
            values.append(solidity(region))
        elif prop == "equiv_diameter":
            values.append(equiv_diameter(region))
    return np.asarray(values, dtype=np.float64)
