"""Ground-truth records in the mini-MIAS info format.

Each line reads ``ref tissue abnormality [severity [x y radius]]`` with
whitespace-separated tokens. NORM lines carry exactly three tokens. The
lesion center is given as (x from the left edge, y from the BOTTOM edge);
`gt_to_image_coords` converts to (row, col) with row 0 at the top.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import (
    BadTokenCount,
    MissingCoordinates,
    NonNumericCoordinate,
    UnknownCode,
)

__all__ = [
    "TISSUE_CODES",
    "ABNORMALITY_CODES",
    "SEVERITY_CODES",
    "MiasRecord",
    "parse_mias_info",
    "load_mias_info",
    "format_mias_info",
    "group_by_ref",
    "gt_to_image_coords",
]

TISSUE_CODES = ("F", "G", "D")
ABNORMALITY_CODES = ("CALC", "CIRC", "SPIC", "MISC", "ARCH", "ASYM", "NORM")
SEVERITY_CODES = ("B", "M")


@dataclass(frozen=True)
class MiasRecord:
    """One ground-truth line; center is (x, y) with y measured from the bottom."""

    ref: str
    tissue: str
    abnormality: str
    severity: str | None = None
    center: tuple[float, float] | None = None
    radius: float | None = None

    def __post_init__(self):
        if self.tissue not in TISSUE_CODES:
            raise UnknownCode(f"unknown tissue code {self.tissue!r}")
        if self.abnormality not in ABNORMALITY_CODES:
            raise UnknownCode(f"unknown abnormality code {self.abnormality!r}")
        if self.severity is not None and self.severity not in SEVERITY_CODES:
            raise UnknownCode(f"unknown severity code {self.severity!r}")
        if self.abnormality == "NORM":
            if self.severity is not None or self.center is not None or self.radius is not None:
                raise ValueError("NORM records carry no severity, center or radius")
        if (self.center is None) != (self.radius is None):
            raise ValueError("center and radius must be given together")
        if self.radius is not None and self.radius <= 0:
            raise ValueError(f"radius must be > 0, got {self.radius}")

    @property
    def has_lesion(self) -> bool:
        return self.center is not None


def _coordinate(token: str, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise NonNumericCoordinate(f"non-numeric {what}: {token!r}") from None


def parse_mias_info(line: str) -> MiasRecord:
    """Parse one info line.

    Accepted layouts: 3 tokens (NORM or an abnormality without details),
    4 tokens (severity but no location), 7 tokens (severity + x y radius).
    """
    tokens = line.split()
    if len(tokens) not in (3, 4, 7):
        raise BadTokenCount(f"expected 3, 4 or 7 tokens, got {len(tokens)}: {line!r}")
    ref, tissue, abnormality = tokens[:3]
    severity = None
    center = None
    radius = None
    if len(tokens) >= 4:
        if abnormality == "NORM":
            raise BadTokenCount(f"NORM lines carry exactly 3 tokens: {line!r}")
        severity = tokens[3]
    if len(tokens) == 7:
        x = _coordinate(tokens[4], "x")
        y = _coordinate(tokens[5], "y")
        radius = _coordinate(tokens[6], "radius")
        center = (x, y)
    return MiasRecord(
        ref=ref,
        tissue=tissue,
        abnormality=abnormality,
        severity=severity,
        center=center,
        radius=radius,
    )


def load_mias_info(text: str) -> list[MiasRecord]:
    """Parse a whole info file, skipping blank lines and '#' comments."""
    records = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        records.append(parse_mias_info(stripped))
    return records


def format_mias_info(records) -> str:
    """Render records back to info-file text (floats keep full precision)."""
    lines = []
    for rec in records:
        parts = [rec.ref, rec.tissue, rec.abnormality]
        if rec.severity is not None:
            parts.append(rec.severity)
        if rec.center is not None:
            parts += [
                format(rec.center[0], ".17g"),
                format(rec.center[1], ".17g"),
                format(rec.radius, ".17g"),
            ]
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def group_by_ref(records) -> dict[str, list[MiasRecord]]:
    """Group records by image ref, keys in sorted order."""
    grouped: dict[str, list[MiasRecord]] = {}
    for rec in records:
        grouped.setdefault(rec.ref, []).append(rec)
    return {ref: grouped[ref] for ref in sorted(grouped)}


def gt_to_image_coords(rec: MiasRecord, image_height: int) -> tuple[float, float]:
    """Convert the bottom-origin (x, y) center to top-origin (row, col)."""
    if rec.center is None:
        raise MissingCoordinates(f"record {rec.ref} has no lesion center")
    x, y = rec.center
    return (image_height - 1 - y, x)
