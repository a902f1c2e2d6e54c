"""Command-line front end.

Subcommands: enhance, segment, features, train, predict, evaluate,
phantom. Exit codes: 0 success, 1 usage error, 2 data error; errors print
one diagnostic line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import features as feat
from . import pipeline as pipe
from . import phantom as ph
from . import svm as svm_mod
from .enhance import enhance
from .image import load_pgm_file, save_pgm_file
from .mias import format_mias_info, group_by_ref, load_mias_info
from .segment import segment


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; this tool reserves 2 for data errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _load_config(path: str | None) -> pipe.PipelineConfig:
    return pipe.load_config(path) if path else pipe.default_config()


def _iter_images(images_dir: str, refs):
    directory = Path(images_dir)
    for ref in refs:
        path = directory / f"{ref}.pgm"
        if not path.exists():
            raise FileNotFoundError(f"no image file for ref {ref!r}: {path}")
        yield ref, load_pgm_file(path)


def _records_for_dir(images_dir: str, info_path: str):
    records = load_mias_info(Path(info_path).read_text())
    by_ref = group_by_ref(records)
    available = {p.stem for p in Path(images_dir).glob("*.pgm")}
    missing = sorted(set(by_ref) - available)
    if missing:
        raise FileNotFoundError(
            f"info file references {len(missing)} refs without images, "
            f"first: {missing[0]}"
        )
    return by_ref


def _cmd_enhance(args) -> int:
    cfg = _load_config(args.config)
    out = enhance(load_pgm_file(args.input), cfg.enhance)
    save_pgm_file(args.output, out)
    return 0


def _cmd_segment(args) -> int:
    cfg = _load_config(args.config)
    img = load_pgm_file(args.input)
    enhanced = enhance(img, cfg.enhance)
    regions = segment(enhanced, cfg.segment)
    mask = np.zeros(img.shape, dtype=np.float64)
    for region in regions:
        mask[region.coords[:, 0], region.coords[:, 1]] = 255.0
    save_pgm_file(args.out_mask, mask)
    with open(args.out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["label", "area", "centroid_row", "centroid_col",
             "min_row", "min_col", "max_row", "max_col"]
        )
        for region in regions:
            cr, cc = region.centroid
            writer.writerow(
                [region.label, region.area, repr(cr), repr(cc), *region.bbox]
            )
    print(f"{len(regions)} regions")
    return 0


def _cmd_features(args) -> int:
    cfg = _load_config(args.config)
    img = load_pgm_file(args.input)
    _, regions, matrix = pipe.process_image(img, cfg)
    names = feat.feature_names(cfg.features.properties)
    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in matrix:
            writer.writerow([repr(v) for v in row])
    print(f"{len(regions)} regions x {len(names)} features")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_config(args.config)
    by_ref = _records_for_dir(args.images, args.info)
    refs = pipe.split_refs(by_ref, part=args.split)
    model = pipe.train_on_images(_iter_images(args.images, refs), by_ref, cfg)
    with open(args.output, "wb") as fh:
        fh.write(svm_mod.save_model(model))
    print(
        f"trained on {len(refs)} images: "
        f"{model.support_vectors.shape[0]} support vectors, "
        f"converged={model.converged}"
    )
    return 0


def _cmd_predict(args) -> int:
    cfg = _load_config(args.config)
    with open(args.model, "rb") as fh:
        model = svm_mod.load_model(fh.read())
    img = load_pgm_file(args.input)
    ref = Path(args.input).stem
    _, detections = pipe.detect_regions(ref, img, model, cfg)
    writer = csv.writer(sys.stdout)
    writer.writerow(
        ["region_index", "score", "predicted", "area",
         "centroid_row", "centroid_col", "min_row", "min_col", "max_row", "max_col"]
    )
    for det in detections:
        writer.writerow(
            [det.region_index, repr(det.score), det.predicted,
             int(det.feature_vector[0]), repr(det.centroid[0]),
             repr(det.centroid[1]), *det.bbox]
        )
    if args.overlay:
        save_pgm_file(args.overlay, pipe.render_overlay(img, detections, []))
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _load_config(args.config)
    with open(args.model, "rb") as fh:
        model = svm_mod.load_model(fh.read())
    by_ref = _records_for_dir(args.images, args.info)
    refs = pipe.split_refs(by_ref, part=args.split)
    report = pipe.evaluate(
        model, _iter_images(args.images, refs), by_ref, cfg
    )
    with open(args.report, "w") as fh:
        fh.write(pipe.report_to_json(report))
    sensitivity = (
        f"{report.sensitivity:.4f}" if report.sensitivity_defined else "undefined"
    )
    print(
        f"images={report.n_images} lesions={report.n_lesions} "
        f"tp={report.tp} fp={report.fp} fn={report.fn} tn={report.tn} "
        f"sensitivity={sensitivity}"
    )
    return 0


def _corpus_from_spec(data: dict) -> ph.CorpusSpec:
    populations = tuple(
        ph.BlobPopulation(
            count=int(p["count"]),
            radius_range=tuple(p["radius_range"]),
            amplitude_range=tuple(p["amplitude_range"]),
            noise_std=float(p.get("noise_std", 0.0)),
            blobs_per_image=int(p.get("blobs_per_image", 1)),
        )
        for p in data["populations"]
    )
    return ph.CorpusSpec(
        dims=tuple(data.get("dims", (1024, 1024))),
        background_level=float(data.get("background_level", 25.0)),
        margin=float(data.get("margin", 100.0)),
        seed=int(data.get("seed", 0)),
        populations=populations,
    )


def _cmd_phantom(args) -> int:
    with open(args.spec) as fh:
        spec = _corpus_from_spec(json.load(fh))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for ref, phantom_spec in ph.generate_corpus(spec):
        img, recs = ph.generate_phantom(phantom_spec, ref=ref)
        save_pgm_file(out_dir / f"{ref}.pgm", img)
        if recs:
            records.extend(recs)
        else:
            # blob-free phantoms are recorded as NORM lines
            records.append(ph.MiasRecord(ref=ref, tissue="F", abnormality="NORM"))
    (out_dir / "info.txt").write_text(format_mias_info(records))
    print(f"wrote {spec.count} phantoms to {out_dir}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="mammocad", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enhance", help="run the enhancement chain on one PGM")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_enhance)

    p = sub.add_parser("segment", help="enhance + segment, write mask and region CSV")
    p.add_argument("input")
    p.add_argument("--out-mask", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("features", help="enhance + segment + feature CSV")
    p.add_argument("input")
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("train", help="train an SVM on an image directory")
    p.add_argument("--images", required=True)
    p.add_argument("--info", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--config")
    p.add_argument("--split", choices=["all", "train", "test"], default="all")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="detections for one image as CSV on stdout")
    p.add_argument("input")
    p.add_argument("--model", required=True)
    p.add_argument("--overlay")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="lesion-level evaluation report")
    p.add_argument("--images", required=True)
    p.add_argument("--info", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--config")
    p.add_argument("--split", choices=["all", "train", "test"], default="all")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("phantom", help="generate a phantom corpus")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_phantom)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"mammocad: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
