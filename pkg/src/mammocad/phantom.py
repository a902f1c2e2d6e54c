"""Synthetic phantom generator for dataset-free verification.

A phantom is a flat background plus optional pseudo-Gaussian noise and
additive radial blobs amplitude * exp(-d^2 / (2 (radius/2)^2)). Every
random quantity comes from a counter-based SplitMix64 stream (constants
below) with Box-Muller for normal deviates, so a (spec, seed) pair
produces bit-identical phantoms on any platform.

PRNG definition: draw i of stream `seed` is
    mix64(seed + (i + 1) * 0x9E3779B97F4A7C15)  mod 2^64
where mix64 is the SplitMix64 finalizer
    z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
    z ^= z >> 27; z *= 0x94D049BB133111EB;
    z ^= z >> 31
and uniform doubles are (draw >> 11) * 2^-53 in [0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mias import MiasRecord

__all__ = [
    "Blob",
    "PhantomSpec",
    "BlobPopulation",
    "CorpusSpec",
    "splitmix64",
    "uniforms",
    "normals",
    "derive_seed",
    "generate_phantom",
    "generate_corpus",
    "acceptance_corpus_spec",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def splitmix64(n: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer applied elementwise to uint64 values."""
    z = np.asarray(n, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _raw(seed: int, count: int, offset: int) -> np.ndarray:
    counters = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    return splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + counters * _GOLDEN)


def uniforms(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Deterministic doubles in [0, 1)."""
    return (_raw(seed, count, offset) >> np.uint64(11)) * (2.0 ** -53)


def normals(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Deterministic standard normal deviates via Box-Muller."""
    pairs = (count + 1) // 2
    u1 = uniforms(seed, pairs, offset)
    u2 = uniforms(seed, pairs, offset + pairs)
    radius = np.sqrt(-2.0 * np.log(1.0 - u1))  # 1-u1 in (0, 1] avoids log(0)
    angle = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:count]


def derive_seed(master_seed: int, index: int) -> int:
    """Stable per-item sub-seed."""
    return int(_raw(master_seed, 1, index)[0])


@dataclass(frozen=True)
class Blob:
    """Radial Gaussian bump; center is (row, col), profile sigma = radius/2."""

    center: tuple[float, float]
    radius: float
    amplitude: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("blob radius must be > 0")
        if self.amplitude <= 0:
            raise ValueError("blob amplitude must be > 0")


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple[int, int] = (1024, 1024)
    background_level: float = 25.0
    noise_std: float = 0.0
    blobs: tuple[Blob, ...] = ()
    seed: int = 0

    def __post_init__(self):
        h, w = self.dims
        if h < 1 or w < 1:
            raise ValueError(f"invalid dims {self.dims}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        for blob in self.blobs:
            r, c = blob.center
            if not (0 <= r < h and 0 <= c < w):
                raise ValueError(f"blob center {blob.center} outside dims {self.dims}")
            if blob.amplitude <= self.noise_std:
                raise ValueError("blob amplitude must exceed noise_std")


def generate_phantom(spec: PhantomSpec, ref: str = "phantom") -> tuple[np.ndarray, list[MiasRecord]]:
    """Render the phantom and its ground-truth records.

    Records use the info-file conventions: the blob center is reported as
    (x from the left, y from the bottom). A blob-free phantom returns an
    empty record list.
    """
    height, width = spec.dims
    img = np.full((height, width), float(spec.background_level))
    if spec.noise_std > 0:
        img += spec.noise_std * normals(spec.seed, height * width).reshape(height, width)
    rows = np.arange(height, dtype=np.float64)[:, None]
    cols = np.arange(width, dtype=np.float64)[None, :]
    records = []
    for blob in spec.blobs:
        br, bc = blob.center
        sigma = blob.radius / 2.0
        d2 = (rows - br) ** 2 + (cols - bc) ** 2
        img += blob.amplitude * np.exp(-d2 / (2.0 * sigma * sigma))
        records.append(
            MiasRecord(
                ref=ref,
                tissue="F",
                abnormality="CIRC",
                severity="M",
                center=(bc, height - 1 - br),
                radius=blob.radius,
            )
        )
    return img, records


# ---------------------------------------------------------------------------
# Corpus generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlobPopulation:
    """A batch of same-flavored phantoms within a corpus."""

    count: int
    radius_range: tuple[float, float]
    amplitude_range: tuple[float, float]
    noise_std: float = 0.0
    blobs_per_image: int = 1

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be >= 0")
        if self.blobs_per_image < 0:
            raise ValueError("blobs_per_image must be >= 0")
        for lo, hi in (self.radius_range, self.amplitude_range):
            if not (0 < lo <= hi):
                raise ValueError("ranges must satisfy 0 < low <= high")


@dataclass(frozen=True)
class CorpusSpec:
    """Deterministic mixed-population phantom corpus.

    Population membership is interleaved: image index i belongs to the
    population whose slots (spaced evenly over the corpus) contain i, so
    an alternating train/test split sees every population on both sides.
    """

    dims: tuple[int, int] = (1024, 1024)
    background_level: float = 25.0
    margin: float = 100.0
    seed: int = 0
    populations: tuple[BlobPopulation, ...] = field(default_factory=tuple)

    @property
    def count(self) -> int:
        return sum(p.count for p in self.populations)


def _population_schedule(spec: CorpusSpec) -> list[int]:
    """Population index per image.

    Minority populations are spread evenly over the corpus at PAIR
    granularity (consecutive even/odd index pairs), so an alternating
    train/test split sees near-equal shares of every population. Odd
    counts place one singleton.
    """
    total = spec.count
    schedule = [-1] * total
    if not spec.populations:
        return schedule
    order = sorted(
        range(len(spec.populations)),
        key=lambda i: (spec.populations[i].count, i),
    )
    free_pairs = list(range((total + 1) // 2))
    for pop_index in order[:-1]:
        count = spec.populations[pop_index].count
        pairs_needed = count // 2
        if pairs_needed:
            stride = len(free_pairs) / pairs_needed
            chosen = sorted(
                {free_pairs[int(k * stride + stride / 2)] for k in range(pairs_needed)}
            )
            # collisions from rounding fall back to the next free pair
            while len(chosen) < pairs_needed:
                extra = next(p for p in free_pairs if p not in set(chosen))
                chosen = sorted(set(chosen) | {extra})
            for p in chosen:
                for slot in (2 * p, 2 * p + 1):
                    if slot < total:
                        schedule[slot] = pop_index
                free_pairs.remove(p)
        if count % 2:
            slot = next(i for i, v in enumerate(schedule) if v < 0)
            schedule[slot] = pop_index
            pair = slot // 2
            if pair in free_pairs and all(
                schedule[s] >= 0 for s in (2 * pair, 2 * pair + 1) if s < total
            ):
                free_pairs.remove(pair)
    last = order[-1]
    for i, v in enumerate(schedule):
        if v < 0:
            schedule[i] = last
    return schedule


def generate_corpus(spec: CorpusSpec) -> list[tuple[str, PhantomSpec]]:
    """Expand a corpus spec into per-image (ref, PhantomSpec) pairs.

    Refs are syn000, syn001, ... in schedule order. Blob placement and
    parameters come from the per-image SplitMix64 stream, so the corpus
    is a pure function of the spec.
    """
    height, width = spec.dims
    out = []
    for index, pop_index in enumerate(_population_schedule(spec)):
        pop = spec.populations[pop_index]
        image_seed = derive_seed(spec.seed, index)
        u = uniforms(image_seed, 4 * pop.blobs_per_image, offset=1 << 20)
        blobs = []
        for b in range(pop.blobs_per_image):
            u_row, u_col, u_rad, u_amp = u[4 * b : 4 * b + 4]
            blobs.append(
                Blob(
                    center=(
                        spec.margin + u_row * (height - 1 - 2 * spec.margin),
                        spec.margin + u_col * (width - 1 - 2 * spec.margin),
                    ),
                    radius=pop.radius_range[0]
                    + u_rad * (pop.radius_range[1] - pop.radius_range[0]),
                    amplitude=pop.amplitude_range[0]
                    + u_amp * (pop.amplitude_range[1] - pop.amplitude_range[0]),
                )
            )
        out.append(
            (
                f"syn{index:03d}",
                PhantomSpec(
                    dims=spec.dims,
                    background_level=spec.background_level,
                    noise_std=pop.noise_std,
                    blobs=tuple(blobs),
                    seed=image_seed,
                ),
            )
        )
    return out


def acceptance_corpus_spec(count: int = 200, seed: int = 20260809) -> CorpusSpec:
    """The pinned verification corpus: one blob per image.

    Most images are clean with a strong lesion; a small interleaved
    fraction has heavy noise with the lesion amplitude at exactly five
    noise sigmas. The noisy images defeat the fixed percentile stretch and
    flood segmentation with non-lesion regions, which supplies the
    negative training samples and bounds attainable sensitivity.
    """
    weak = max(2, round(count * 0.04))
    if weak % 2:
        weak += 1  # even: alternating splits get equal shares
    strong = count - weak
    return CorpusSpec(
        dims=(1024, 1024),
        background_level=25.0,
        margin=100.0,
        seed=seed,
        populations=(
            BlobPopulation(
                count=strong,
                radius_range=(10.0, 28.0),
                amplitude_range=(60.0, 140.0),
                noise_std=0.0,
            ),
            BlobPopulation(
                count=weak,
                radius_range=(10.0, 14.0),
                amplitude_range=(40.0, 40.0),
                noise_std=8.0,
            ),
        ),
    )
