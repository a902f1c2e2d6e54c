import json

import numpy as np
import pytest

from mammocad.cli import main
from mammocad.image import load_pgm_file, save_pgm_file
from mammocad.mias import format_mias_info
from mammocad.phantom import Blob, PhantomSpec, generate_phantom
from mammocad.pipeline import config_to_dict, default_config
from mammocad.enhance import EnhanceConfig
from mammocad.segment import SegmentConfig
from mammocad.pipeline import PipelineConfig, SvmConfig
from mammocad.svm import KernelSpec, TrainConfig


@pytest.fixture
def small_cfg_path(tmp_path):
    cfg = PipelineConfig(
        enhance=EnhanceConfig(se_radius=20, stretch_low=0.0, stretch_high=100.0),
        segment=SegmentConfig(min_area=10),
        svm=SvmConfig(kernel=KernelSpec(kind="rbf"), train=TrainConfig(c=10.0)),
    )
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(config_to_dict(cfg)))
    return str(path)


@pytest.fixture
def corpus_dir(tmp_path):
    """Four lesion phantoms and four NORM phantoms with distractor bumps."""
    directory = tmp_path / "imgs"
    directory.mkdir()
    records = []
    rows = [50, 90, 110, 70]
    cols = [60, 100, 50, 110]
    for i in range(4):
        ref = f"p{i}"
        spec = PhantomSpec(
            dims=(160, 160), background_level=20.0, noise_std=0.0,
            blobs=(Blob(center=(float(rows[i]), float(cols[i])), radius=8.0, amplitude=120.0),),
            seed=i,
        )
        img, recs = generate_phantom(spec, ref=ref)
        save_pgm_file(directory / f"{ref}.pgm", img)
        records.extend(recs)
        nref = f"n{i}"
        nspec = PhantomSpec(
            dims=(160, 160), background_level=20.0, noise_std=0.0,
            blobs=(Blob(center=(float(rows[i] + 20), float(cols[i] - 20)), radius=3.0,
                        amplitude=120.0),),
            seed=100 + i,
        )
        nimg, _ = generate_phantom(nspec, ref=nref)
        save_pgm_file(directory / f"{nref}.pgm", nimg)
        from mammocad.mias import MiasRecord

        records.append(MiasRecord(ref=nref, tissue="F", abnormality="NORM"))
    info = tmp_path / "info.txt"
    info.write_text(format_mias_info(records))
    return directory, info


def test_unknown_subcommand_exits_1(capsys):
    assert main(["frobnicate"]) == 1
    assert "error" in capsys.readouterr().err


def test_missing_file_exits_2(capsys, tmp_path):
    assert main(["enhance", str(tmp_path / "nope.pgm"), str(tmp_path / "out.pgm")]) == 2
    assert "error" in capsys.readouterr().err


def test_enhance_constant_becomes_zero(tmp_path):
    src = tmp_path / "in.pgm"
    dst = tmp_path / "out.pgm"
    save_pgm_file(src, np.full((64, 64), 99.0))
    assert main(["enhance", str(src), str(dst)]) == 0
    assert np.all(load_pgm_file(dst) == 0.0)


def test_segment_and_features_commands(tmp_path, small_cfg_path):
    spec = PhantomSpec(
        dims=(160, 160), background_level=20.0, noise_std=0.0,
        blobs=(Blob(center=(80.0, 70.0), radius=8.0, amplitude=120.0),), seed=5,
    )
    img, _ = generate_phantom(spec)
    src = tmp_path / "in.pgm"
    save_pgm_file(src, img)

    mask = tmp_path / "mask.pgm"
    regions_csv = tmp_path / "regions.csv"
    code = main(["segment", str(src), "--out-mask", str(mask),
                 "--out-csv", str(regions_csv), "--config", small_cfg_path])
    assert code == 0
    mask_img = load_pgm_file(mask)
    assert set(np.unique(mask_img)) == {0.0, 255.0}
    lines = regions_csv.read_text().strip().splitlines()
    assert lines[0].startswith("label,area,")
    assert len(lines) == 2  # header + one region

    features_csv = tmp_path / "features.csv"
    code = main(["features", str(src), "--out", str(features_csv),
                 "--config", small_cfg_path])
    assert code == 0
    rows = features_csv.read_text().strip().splitlines()
    assert rows[0].split(",")[0] == "area"
    assert len(rows[0].split(",")) == 26
    assert len(rows) == 2


def test_train_predict_evaluate_cycle(tmp_path, capsys, corpus_dir, small_cfg_path):
    directory, info = corpus_dir
    model_path = tmp_path / "model.svm"
    code = main(["train", "--images", str(directory), "--info", str(info),
                 "--out", str(model_path), "--config", small_cfg_path])
    assert code == 0
    out = capsys.readouterr().out
    assert "support vectors" in out and "converged=True" in out

    overlay = tmp_path / "overlay.pgm"
    code = main(["predict", str(directory / "p0.pgm"), "--model", str(model_path),
                 "--overlay", str(overlay), "--config", small_cfg_path])
    assert code == 0
    csv_out = capsys.readouterr().out.strip().splitlines()
    assert csv_out[0].startswith("region_index,score,predicted")
    assert len(csv_out) >= 2
    assert "tumor" in csv_out[1]
    assert load_pgm_file(overlay).shape == (160, 160)

    report_path = tmp_path / "report.json"
    code = main(["evaluate", "--images", str(directory), "--info", str(info),
                 "--model", str(model_path), "--report", str(report_path),
                 "--config", small_cfg_path])
    assert code == 0
    report = json.loads(report_path.read_text())
    assert report["sensitivity"] == 1.0
    assert report["tp"] == 4
    assert report["tn"] == 4
    assert "sensitivity=1.0000" in capsys.readouterr().out


def test_phantom_corpus_command(tmp_path):
    spec = {
        "dims": [96, 96],
        "background_level": 20.0,
        "margin": 24.0,
        "seed": 9,
        "populations": [
            {"count": 3, "radius_range": [4, 6], "amplitude_range": [80, 120]},
            {"count": 1, "radius_range": [4, 6], "amplitude_range": [80, 120],
             "blobs_per_image": 0},
        ],
    }
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec))
    out_dir = tmp_path / "corpus"
    assert main(["phantom", "--spec", str(spec_path), "--out-dir", str(out_dir)]) == 0
    pgms = sorted(out_dir.glob("*.pgm"))
    assert len(pgms) == 4
    info_text = (out_dir / "info.txt").read_text()
    assert "NORM" in info_text  # the blob-free phantom
    assert info_text.count("CIRC") == 3
    # regenerating is bit-identical
    out2 = tmp_path / "corpus2"
    assert main(["phantom", "--spec", str(spec_path), "--out-dir", str(out2)]) == 0
    for p in pgms:
        assert (out2 / p.name).read_bytes() == p.read_bytes()
    assert (out2 / "info.txt").read_text() == info_text


def test_evaluate_split_option(tmp_path, capsys, corpus_dir, small_cfg_path):
    directory, info = corpus_dir
    model_path = tmp_path / "model.svm"
    assert main(["train", "--images", str(directory), "--info", str(info),
                 "--out", str(model_path), "--split", "train",
                 "--config", small_cfg_path]) == 0
    capsys.readouterr()
    report_path = tmp_path / "report.json"
    assert main(["evaluate", "--images", str(directory), "--info", str(info),
                 "--model", str(model_path), "--report", str(report_path),
                 "--split", "test", "--config", small_cfg_path]) == 0
    report = json.loads(report_path.read_text())
    assert report["n_images"] == 4  # half of eight
