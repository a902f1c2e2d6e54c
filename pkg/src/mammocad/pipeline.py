"""End-to-end orchestration: per-image processing, training-set assembly,
lesion-level evaluation, overlay rendering, config and report files.

Evaluation accounting is lesion-level: a ground-truth lesion is a true
positive when at least one segmented region matches it (region centroid
within the lesion radius) and is predicted tumor, otherwise a false
negative. Tumor-predicted regions matching no lesion count as false
positives; an all-NORM image with no tumor-predicted regions counts as one
true negative. Sensitivity is TP / (TP + FN).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import features as feat
from . import svm as svm_mod
from .enhance import EnhanceConfig, enhance
from .image import validate_image
from .mias import MiasRecord, gt_to_image_coords
from .segment import Region, SegmentConfig, segment

__all__ = [
    "FeatureConfig",
    "SvmConfig",
    "PipelineConfig",
    "default_config",
    "config_to_dict",
    "config_from_dict",
    "save_config",
    "load_config",
    "Detection",
    "EvalReport",
    "image_lesions",
    "match_region",
    "process_image",
    "detect_regions",
    "build_training_set",
    "train_on_images",
    "evaluate",
    "report_to_json",
    "render_overlay",
    "split_refs",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureConfig:
    properties: tuple[str, ...] = feat.TEN_PROPERTIES

    def __post_init__(self):
        unknown = set(self.properties) - set(feat.TEN_PROPERTIES)
        if unknown:
            raise ValueError(f"unknown properties {sorted(unknown)}")
        if not self.properties:
            raise ValueError("at least one property is required")


@dataclass(frozen=True)
class SvmConfig:
    kernel: svm_mod.KernelSpec = field(default_factory=svm_mod.KernelSpec)
    train: svm_mod.TrainConfig = field(default_factory=svm_mod.TrainConfig)


@dataclass(frozen=True)
class PipelineConfig:
    enhance: EnhanceConfig = field(default_factory=EnhanceConfig)
    segment: SegmentConfig = field(default_factory=SegmentConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    svm: SvmConfig = field(default_factory=SvmConfig)
    seed: int = 0


def default_config() -> PipelineConfig:
    return PipelineConfig()


def config_to_dict(cfg: PipelineConfig) -> dict:
    out = asdict(cfg)
    out["features"]["properties"] = list(cfg.features.properties)
    return out


def config_from_dict(data: dict) -> PipelineConfig:
    base = default_config()
    enh = replace(base.enhance, **data.get("enhance", {}))
    seg = replace(base.segment, **data.get("segment", {}))
    feats = FeatureConfig(
        properties=tuple(data.get("features", {}).get("properties", feat.TEN_PROPERTIES))
    )
    svm_data = data.get("svm", {})
    kernel = replace(base.svm.kernel, **svm_data.get("kernel", {}))
    train_cfg = replace(base.svm.train, **svm_data.get("train", {}))
    return PipelineConfig(
        enhance=enh,
        segment=seg,
        features=feats,
        svm=SvmConfig(kernel=kernel, train=train_cfg),
        seed=int(data.get("seed", 0)),
    )


def save_config(path, cfg: PipelineConfig) -> None:
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_config(path) -> PipelineConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Per-image processing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Detection:
    """One scored region; predicted is 'tumor' when score >= 0 (sign(0)=+1)."""

    image_ref: str
    region_index: int
    feature_vector: np.ndarray
    score: float
    predicted: str
    bbox: tuple[int, int, int, int]
    centroid: tuple[float, float]


def image_lesions(records, image_height: int) -> list[tuple[float, float, float]]:
    """(row, col, radius) for every coordinate-bearing record."""
    return [
        (*gt_to_image_coords(rec, image_height), float(rec.radius))
        for rec in records
        if rec.has_lesion
    ]


def match_region(region: Region, gt_center: tuple[float, float], gt_radius: float) -> bool:
    """True when the region centroid lies within gt_radius of gt_center."""
    cr, cc = region.centroid
    return math.hypot(cr - gt_center[0], cc - gt_center[1]) <= gt_radius


def process_image(img: np.ndarray, cfg: PipelineConfig):
    """Enhance, segment and featurize one image.

    Returns (enhanced, regions, feature_matrix) where feature_matrix has
    one row per region.
    """
    arr = validate_image(img)
    enhanced = enhance(arr, cfg.enhance)
    regions = segment(enhanced, cfg.segment)
    if regions:
        matrix = np.stack(
            [feat.extract_features(r, cfg.features.properties) for r in regions]
        )
    else:
        matrix = np.zeros((0, len(feat.feature_names(cfg.features.properties))))
    return enhanced, regions, matrix


def detect_regions(
    ref: str,
    img: np.ndarray,
    model: svm_mod.SvmModel,
    cfg: PipelineConfig,
):
    """Run the pipeline on one image and score every region with the model.

    The feature subset is recovered from the model's stored feature names
    so a mismatched config cannot skew prediction.
    """
    if model.feature_names:
        props = feat.properties_from_feature_names(model.feature_names)
        cfg = replace(cfg, features=FeatureConfig(properties=props))
    _, regions, matrix = process_image(img, cfg)
    detections = []
    for index, region in enumerate(regions):
        score = svm_mod.decision_value(model, matrix[index])
        detections.append(
            Detection(
                image_ref=ref,
                region_index=index,
                feature_vector=matrix[index],
                score=score,
                predicted="tumor" if score >= 0.0 else "normal",
                bbox=region.bbox,
                centroid=region.centroid,
            )
        )
    return regions, detections


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def build_training_set(images, records_by_ref, cfg: PipelineConfig) -> list[svm_mod.Sample]:
    """Label every segmented region against the ground truth.

    `images` yields (ref, image) pairs; iterate in sorted ref order for a
    deterministic sample order. A region matching any lesion of its image
    is labeled +1, every other region -1 (all regions of NORM images are
    -1). Images whose processing fails are skipped and logged.
    """
    samples: list[svm_mod.Sample] = []
    for ref, img in images:
        records = records_by_ref.get(ref, [])
        try:
            arr = validate_image(img)
            _, regions, matrix = process_image(arr, cfg)
        except Exception:
            logger.exception("skipping image %s: pipeline stage failed", ref)
            continue
        if not regions:
            logger.info("image %s produced no candidate regions", ref)
            continue
        lesions = image_lesions(records, arr.shape[0])
        for index, region in enumerate(regions):
            matched = any(
                match_region(region, (lr, lc), rad) for lr, lc, rad in lesions
            )
            samples.append(svm_mod.Sample(x=matrix[index], y=1 if matched else -1))
    return samples


def train_on_images(images, records_by_ref, cfg: PipelineConfig) -> svm_mod.SvmModel:
    """build_training_set followed by scaled SMO training."""
    samples = build_training_set(images, records_by_ref, cfg)
    return svm_mod.train(
        samples,
        cfg.svm.kernel,
        cfg.svm.train,
        feature_names=feat.feature_names(cfg.features.properties),
    )


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    sensitivity: float | None = None
    sensitivity_defined: bool = False
    n_images: int = 0
    n_lesions: int = 0
    per_image: list[dict] = field(default_factory=list)


def evaluate(model: svm_mod.SvmModel, images, records_by_ref, cfg: PipelineConfig) -> EvalReport:
    """Lesion-level evaluation over (ref, image) pairs.

    When the set contains no lesions at all, sensitivity is undefined and
    flagged rather than raised; the report is still produced.
    """
    report = EvalReport()
    for ref, img in images:
        records = records_by_ref.get(ref, [])
        arr = validate_image(img)
        regions, detections = detect_regions(ref, arr, model, cfg)
        lesions = image_lesions(records, arr.shape[0])
        report.n_images += 1
        report.n_lesions += len(lesions)

        matches: dict[int, list[int]] = {d.region_index: [] for d in detections}
        for lesion_index, (lr, lc, rad) in enumerate(lesions):
            hit = False
            for region, det in zip(regions, detections):
                if match_region(region, (lr, lc), rad):
                    matches[det.region_index].append(lesion_index)
                    if det.predicted == "tumor":
                        hit = True
            if hit:
                report.tp += 1
            else:
                report.fn += 1

        tumor_detections = [d for d in detections if d.predicted == "tumor"]
        for det in tumor_detections:
            if not matches[det.region_index]:
                report.fp += 1
        is_norm = bool(records) and all(r.abnormality == "NORM" for r in records)
        if is_norm and not tumor_detections:
            report.tn += 1

        report.per_image.append(
            {
                "ref": ref,
                "n_regions": len(regions),
                "detections": [
                    {
                        "region_index": d.region_index,
                        "score": d.score,
                        "predicted": d.predicted,
                        "centroid_row": d.centroid[0],
                        "centroid_col": d.centroid[1],
                        "area": regions[d.region_index].area,
                        "matched_lesions": matches[d.region_index],
                    }
                    for d in detections
                ],
                "lesions": [
                    {
                        "index": i,
                        "row": lr,
                        "col": lc,
                        "radius": rad,
                        "detected": any(
                            i in matches[d.region_index]
                            for d in tumor_detections
                        ),
                    }
                    for i, (lr, lc, rad) in enumerate(lesions)
                ],
            }
        )

    if report.tp + report.fn > 0:
        report.sensitivity = report.tp / (report.tp + report.fn)
        report.sensitivity_defined = True
    else:
        logger.warning("no lesions in the evaluated set; sensitivity undefined")
    return report


def report_to_json(report: EvalReport) -> str:
    """Stable JSON rendering with fixed field names, safe to diff in CI."""
    return json.dumps(asdict(report), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Overlay rendering
# ---------------------------------------------------------------------------

def render_overlay(img: np.ndarray, detections, records) -> np.ndarray:
    """Burn ground-truth circles (128) and tumor bboxes (255) into a copy.

    Circles are drawn first so boxes win where they overlap.
    """
    out = validate_image(img).copy()
    height, width = out.shape
    for rec in records:
        if not rec.has_lesion:
            continue
        row, col = gt_to_image_coords(rec, height)
        rr = np.arange(height)[:, None]
        cc = np.arange(width)[None, :]
        dist = np.sqrt((rr - row) ** 2 + (cc - col) ** 2)
        out[np.abs(dist - rec.radius) <= 0.5] = 128.0
    for det in detections:
        if det.predicted != "tumor":
            continue
        r0, c0, r1, c1 = det.bbox
        out[r0, c0 : c1 + 1] = 255.0
        out[r1, c0 : c1 + 1] = 255.0
        out[r0 : r1 + 1, c0] = 255.0
        out[r0 : r1 + 1, c1] = 255.0
    return out


# ---------------------------------------------------------------------------
# Split protocol
# ---------------------------------------------------------------------------

def split_refs(records_by_ref, part: str = "all", folds: int = 2, fold: int = 0) -> list[str]:
    """Deterministic stratified split of image refs.

    Refs are sorted, stratified by lesion presence, and dealt round-robin
    over `folds` folds: within each stratum, position p belongs to fold
    p % folds. part='test' selects fold `fold`, part='train' the rest,
    part='all' everything. The default folds=2, fold=0 is the 50/50
    protocol (even positions test, odd positions train within strata).
    """
    if part not in ("all", "train", "test"):
        raise ValueError(f"unknown split part {part!r}")
    if not (0 <= fold < folds):
        raise ValueError(f"fold {fold} out of range for {folds} folds")
    refs = sorted(records_by_ref)
    if part == "all":
        return refs
    with_lesion = {
        r for r in refs if any(rec.has_lesion for rec in records_by_ref[r])
    }
    chosen = []
    for stratum in (
        [r for r in refs if r in with_lesion],
        [r for r in refs if r not in with_lesion],
    ):
        for position, ref in enumerate(stratum):
            in_test = position % folds == fold
            if (part == "test") == in_test:
                chosen.append(ref)
    return sorted(chosen)
