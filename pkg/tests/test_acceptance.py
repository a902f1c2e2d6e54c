"""Acceptance suite: one test per verification criterion, each printing a
pass/fail line (run with -s to see them). The phantom-corpus criterion is
the long one (a few minutes); everything else is seconds.
"""

import contextlib
import math
import os
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

import mammocad as m
from mammocad import pipeline as pipe
from mammocad.mias import group_by_ref
from mammocad.svm import apply_scaler, gram_matrix


@contextlib.contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    print(f"[PASS] {name}")


# ---------------------------------------------------------------------------
# 1. DWT perfect reconstruction + energy conservation
# ---------------------------------------------------------------------------

def test_dwt_reconstruction_and_energy():
    from mammocad.enhance import _haar_forward_level, _pad_even

    with criterion("DWT perfect reconstruction and energy conservation"):
        rng = np.random.default_rng(1001)
        t0 = time.time()
        worst_err = 0.0
        worst_energy = 0.0
        for i in range(200):
            h = (i % 65) + 1
            w = ((i * 37) % 65) + 1
            img = rng.uniform(0.0, 255.0, size=(h, w))
            out = m.dwt2_inverse(m.dwt2_forward(img, 2))
            worst_err = max(worst_err, float(np.max(np.abs(out - img))))
            current = img
            for _ in range(2):
                padded = _pad_even(current)
                ll, lh, hl, hh = _haar_forward_level(current)
                bands = sum(float(np.sum(b * b)) for b in (ll, lh, hl, hh))
                total = float(np.sum(padded * padded))
                worst_energy = max(
                    worst_energy, abs(bands - total) / max(total, 1.0)
                )
                current = ll
        elapsed = time.time() - t0
        assert worst_err <= 1e-9, worst_err
        assert worst_energy <= 1e-9, worst_energy
        assert elapsed < 10.0, elapsed


# ---------------------------------------------------------------------------
# 2. Morphology laws
# ---------------------------------------------------------------------------

def test_morphology_laws():
    with criterion("morphology laws (idempotence, anti-extensivity, "
                   "top-hat >= 0, duality)"):
        rng = np.random.default_rng(1002)
        for _ in range(1000):
            radius = int(rng.integers(0, 11))
            h = int(rng.integers(1, 24))
            w = int(rng.integers(1, 24))
            img = rng.integers(0, 256, size=(h, w)).astype(np.float64)
            se = m.disk_se(radius)
            opened = m.opening(img, se)
            assert np.array_equal(m.opening(opened, se), opened)
            assert np.all(opened <= img)
            assert np.all(m.tophat(img, se) >= 0.0)
            assert np.array_equal(m.erode(-img, se), -m.dilate(img, se))


# ---------------------------------------------------------------------------
# 3. Otsu oracle
# ---------------------------------------------------------------------------

def _otsu_oracle(counts):
    total = int(sum(counts))
    total_sum = sum(i * int(c) for i, c in enumerate(counts))
    best_t, best = -1, Fraction(-1)
    w0 = s0 = 0
    for t in range(255):
        w0 += int(counts[t])
        s0 += t * int(counts[t])
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        var = Fraction(w0 * w1) * (Fraction(s0, w0) - Fraction(total_sum - s0, w1)) ** 2
        if var > best:
            best, best_t = var, t
    return best_t


def test_otsu_oracle_agreement():
    with criterion("Otsu agrees exactly with the exhaustive 256-threshold scan"):
        rng = np.random.default_rng(1003)
        for _ in range(1000):
            support = int(rng.integers(2, 40))
            counts = np.zeros(256, dtype=np.int64)
            bins = rng.choice(256, size=support, replace=False)
            counts[bins] = rng.integers(1, 64, size=support)
            img = np.repeat(np.arange(256.0), counts).reshape(1, -1)
            assert m.otsu_threshold(img) == _otsu_oracle(counts)


# ---------------------------------------------------------------------------
# 4. Region properties oracle
# ---------------------------------------------------------------------------

def _region(pixels):
    from mammocad.segment import Region

    coords = np.asarray(sorted(pixels), dtype=np.int64)
    bbox = (
        int(coords[:, 0].min()),
        int(coords[:, 1].min()),
        int(coords[:, 0].max()),
        int(coords[:, 1].max()),
    )
    return Region(label=1, coords=coords, bbox=bbox)


def _hull_area_brute(region):
    corners = set()
    for r, c in region.coords:
        corners |= {(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)}
    pts = sorted(corners)
    n = len(pts)
    hull_pts = set()
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            ax, ay = pts[i]
            bx, by = pts[j]
            left = right = 0
            for k in range(n):
                if k in (i, j):
                    continue
                cross = (bx - ax) * (pts[k][1] - ay) - (by - ay) * (pts[k][0] - ax)
                if cross > 0:
                    left += 1
                elif cross < 0:
                    right += 1
            if left == 0 or right == 0:
                hull_pts.update((pts[i], pts[j]))
    cx = sum(p[0] for p in hull_pts) / len(hull_pts)
    cy = sum(p[1] for p in hull_pts) / len(hull_pts)
    ordered = sorted(hull_pts, key=lambda p: math.atan2(p[1] - cy, p[0] - cx))
    area = 0.0
    for a, b in zip(ordered, ordered[1:] + ordered[:1]):
        area += a[0] * b[1] - b[0] * a[1]
    return abs(area) / 2.0


def test_regionprops_oracle():
    from mammocad.features import (
        central_moments,
        convex_hull_area,
        ellipse_params,
        equiv_diameter,
        filled_area,
        solidity,
    )

    with criterion("region properties match closed forms and the hull oracle"):
        tol = 1e-9

        single = _region([(0, 0)])
        mom = central_moments(single)
        major, minor, ecc, orient = ellipse_params(mom)
        assert mom.m00 == 1
        assert abs(major - 4 / math.sqrt(12)) <= tol
        assert abs(minor - 4 / math.sqrt(12)) <= tol
        assert ecc <= tol and orient == 0.0
        assert filled_area(single) == 1
        assert abs(convex_hull_area(single) - 1.0) <= tol
        assert abs(solidity(single) - 1.0) <= tol
        assert abs(equiv_diameter(single) - 2 / math.sqrt(math.pi)) <= tol

        square = _region([(r, c) for r in range(3) for c in range(3)])
        mom = central_moments(square)
        major, minor, ecc, _ = ellipse_params(mom)
        assert (mom.centroid_row, mom.centroid_col) == (1.0, 1.0)
        assert abs(mom.mu_rr - 0.75) <= tol and abs(mom.mu_cc - 0.75) <= tol
        assert abs(major - 4 * math.sqrt(0.75)) <= tol
        assert ecc <= tol
        assert filled_area(square) == 9
        assert abs(convex_hull_area(square) - 9.0) <= tol
        assert abs(equiv_diameter(square) - math.sqrt(36 / math.pi)) <= tol

        line = _region([(0, c) for c in range(5)])
        major, minor, ecc, orient = ellipse_params(central_moments(line))
        assert abs(major - 4 * math.sqrt(25 / 12)) <= tol
        assert abs(minor - 4 * math.sqrt(1 / 12)) <= tol
        assert abs(ecc - math.sqrt(24 / 25)) <= tol
        assert orient == 0.0

        ring = _region(
            [(r, c) for r in range(3) for c in range(3) if (r, c) != (1, 1)]
        )
        assert filled_area(ring) == 9
        assert abs(convex_hull_area(ring) - 9.0) <= tol
        assert abs(solidity(ring) - 8 / 9) <= tol

        tromino = _region([(0, 0), (1, 0), (0, 1)])
        assert filled_area(tromino) == 3
        assert abs(convex_hull_area(tromino) - 3.5) <= tol
        assert abs(solidity(tromino) - 3 / 3.5) <= tol

        from scipy import ndimage

        rng = np.random.default_rng(1004)
        for _ in range(500):
            h = int(rng.integers(1, 8))
            w = int(rng.integers(1, 8))
            mask = rng.random((h, w)) < 0.55
            mask[int(rng.integers(0, h)), int(rng.integers(0, w))] = True
            labels, _ = ndimage.label(mask, structure=np.ones((3, 3)))
            keep = labels[mask.nonzero()[0][0], mask.nonzero()[1][0]]
            pixels = list(zip(*np.nonzero(labels == keep)))
            region = _region([(int(r), int(c)) for r, c in pixels])
            assert abs(convex_hull_area(region) - _hull_area_brute(region)) <= tol


# ---------------------------------------------------------------------------
# 5. SVM correctness
# ---------------------------------------------------------------------------

def _oracle_bias(k, y, alpha, c, eps=1e-8):
    g = k @ (alpha * y)
    cvals = y - g
    free = (alpha > eps) & (c - alpha > eps)
    if free.any():
        return float(cvals[free].mean())
    lower = ((y > 0) & (alpha <= eps)) | ((y < 0) & (c - alpha <= eps))
    upper = ((y < 0) & (alpha <= eps)) | ((y > 0) & (c - alpha <= eps))
    lo = cvals[lower].max() if lower.any() else None
    hi = cvals[upper].min() if upper.any() else None
    if lo is None:
        return float(hi)
    if hi is None:
        return float(lo)
    return float((lo + hi) / 2.0)


def _kkt_ok(model, data, c, tol):
    scaled = np.stack([apply_scaler(model.scaler, s.x) for s in data])
    f = gram_matrix(model.kernel, scaled, model.support_vectors) @ model.coeffs + model.bias
    lookup = {
        tuple(v): abs(co)
        for v, co in zip(map(tuple, model.support_vectors), model.coeffs)
    }
    for i, s in enumerate(data):
        alpha = lookup.get(tuple(scaled[i]), 0.0)
        margin = s.y * f[i]
        if alpha <= 1e-8 and margin < 1 - tol - 1e-6:
            return False
        if alpha >= c - 1e-8 and margin > 1 + tol + 1e-6:
            return False
        if 1e-8 < alpha < c - 1e-8 and abs(margin - 1) > tol + 1e-6:
            return False
    return True


def test_svm_correctness():
    with criterion("SVM: analytic 2-point case, XOR, grid-oracle agreement, KKT"):
        t0 = time.time()

        # (a) analytic two-point problem
        two = [m.Sample([-1.0], -1), m.Sample([1.0], 1)]
        model = m.smo_train(two, m.KernelSpec(kind="linear"), m.TrainConfig(c=10.0))
        np.testing.assert_allclose(np.abs(model.coeffs), [0.5, 0.5], atol=1e-6)
        assert abs(model.bias) <= 1e-6

        # (b) XOR with the RBF kernel
        xor = [
            m.Sample([0.0, 0.0], -1),
            m.Sample([1.0, 1.0], -1),
            m.Sample([0.0, 1.0], 1),
            m.Sample([1.0, 0.0], 1),
        ]
        xor_model = m.smo_train(xor, m.KernelSpec(kind="rbf", gamma=1.0), m.TrainConfig(c=10.0))
        assert [m.predict(xor_model, s.x) for s in xor] == [s.y for s in xor]

        # (c) grid oracle on 50 random small datasets, all four kernels
        rng = np.random.default_rng(1005)
        kinds = ["linear", "polynomial", "rbf", "sigmoid"]
        grid_steps = 8
        checked = 0
        attempt = 0
        while checked < 50:
            attempt += 1
            n = int(rng.integers(2, 7))
            dim = int(rng.integers(1, 4))
            x = rng.normal(size=(n, dim))
            y = rng.choice([-1, 1], size=n)
            if len(set(y.tolist())) < 2:
                continue
            data = [m.Sample(x[i], int(y[i])) for i in range(n)]
            spec = m.KernelSpec(kind=kinds[attempt % 4], gamma=0.75, coef=1.0, degree=2)
            c = float(rng.choice([0.5, 1.0, 4.0]))
            cfg = m.TrainConfig(c=c)
            model = m.smo_train(data, spec, cfg)

            lookup = {
                tuple(v): co
                for v, co in zip(map(tuple, model.support_vectors), model.coeffs)
            }
            smo_alpha = np.array([abs(lookup.get(tuple(x[i]), 0.0)) for i in range(n)])
            oracle_alpha = m.brute_force_qp(data, spec, c, grid_steps)
            w_smo = m.dual_objective(data, spec, smo_alpha)
            w_oracle = m.dual_objective(data, spec, oracle_alpha)
            assert w_smo >= w_oracle - n * c / grid_steps

            # oracle model predictions on training points
            k = gram_matrix(spec.resolved(dim), x, x)
            bias = _oracle_bias(k, y.astype(float), oracle_alpha, c)
            f_oracle = k @ (oracle_alpha * y) + bias
            sign_oracle = np.where(f_oracle >= 0, 1, -1)
            sign_smo = np.array([m.predict(model, x[i]) for i in range(n)])
            assert np.array_equal(sign_smo, sign_oracle)

            # (d) KKT at tolerance for every converged run
            if model.converged:
                assert _kkt_ok(model, data, c, cfg.tol)
            checked += 1

        assert time.time() - t0 < 60.0


# ---------------------------------------------------------------------------
# 6. End-to-end phantom corpus
# ---------------------------------------------------------------------------

def _full_run(spec):
    cfg = pipe.default_config()
    images = {}
    all_records = []
    for ref, pspec in m.generate_corpus(spec):
        img, recs = m.generate_phantom(pspec, ref=ref)
        images[ref] = m.quantize(img)
        all_records.extend(recs)
    by_ref = group_by_ref(all_records)
    train_refs = pipe.split_refs(by_ref, part="train")
    test_refs = pipe.split_refs(by_ref, part="test")
    t0 = time.time()
    samples = pipe.build_training_set(
        ((r, images[r]) for r in train_refs), by_ref, cfg
    )
    model = m.train(samples, cfg.svm.kernel, cfg.svm.train)
    report = pipe.evaluate(model, ((r, images[r]) for r in test_refs), by_ref, cfg)
    per_image = (time.time() - t0) / (len(train_refs) + len(test_refs))
    return pipe.report_to_json(report), report, per_image


def test_phantom_corpus_end_to_end():
    with criterion("200-phantom corpus: sensitivity >= 0.90, deterministic reports, "
                   "<= 2 s per image"):
        spec = m.acceptance_corpus_spec(200)
        assert spec.count == 200
        for pop in spec.populations:
            assert pop.blobs_per_image == 1
            assert pop.amplitude_range[0] >= 5.0 * pop.noise_std
        json_a, report, per_image = _full_run(spec)
        json_b, _, _ = _full_run(spec)
        assert report.sensitivity_defined
        assert report.tp + report.fn == report.n_lesions == 100
        assert report.sensitivity >= 0.90, report.sensitivity
        assert json_a == json_b
        assert per_image <= 2.0, per_image
        print(
            f"  sensitivity={report.sensitivity:.3f} "
            f"tp={report.tp} fn={report.fn} fp={report.fp} "
            f"per_image={per_image:.2f}s"
        )


# ---------------------------------------------------------------------------
# 7. I/O round trips
# ---------------------------------------------------------------------------

def test_io_roundtrips():
    with criterion("PGM round-trip bit-exact; model save/load preserves decisions"):
        rng = np.random.default_rng(1006)
        for shape in [(1024, 1024), (1024, 1024), (7, 3)]:
            img = rng.integers(0, 256, size=shape).astype(np.float64)
            assert np.array_equal(m.load_pgm(m.save_pgm(img)), img)

        x = rng.normal(size=(16, 5))
        y = np.where(x[:, 0] + x[:, 1] > 0, 1, -1)
        if len(set(y.tolist())) < 2:
            y[0] = -y[0]
        data = [m.Sample(x[i], int(y[i])) for i in range(16)]
        model = m.train(data, m.KernelSpec(kind="rbf"), m.TrainConfig())
        clone = m.load_model(m.save_model(model))
        for _ in range(100):
            probe = rng.normal(size=5) * 4.0
            assert m.decision_value(clone, probe) == m.decision_value(model, probe)


# ---------------------------------------------------------------------------
# 8. Optional: real mini-MIAS evaluation when the dataset is available
# ---------------------------------------------------------------------------

@pytest.mark.skipif(
    "MAMMOCAD_MIAS_DIR" not in os.environ,
    reason="set MAMMOCAD_MIAS_DIR to a directory of mdb*.pgm plus info.txt",
)
def test_mias_dataset_report():
    with criterion("mini-MIAS dataset evaluation completes and reports sensitivity"):
        root = Path(os.environ["MAMMOCAD_MIAS_DIR"])
        info = (root / "info.txt").read_text()
        records = m.load_mias_info(info)
        by_ref = group_by_ref(records)
        cfg = pipe.default_config()

        def iter_images(refs):
            for ref in refs:
                yield ref, m.load_pgm_file(root / f"{ref}.pgm")

        train_refs = pipe.split_refs(by_ref, part="train")
        test_refs = pipe.split_refs(by_ref, part="test")
        model = pipe.train_on_images(iter_images(train_refs), by_ref, cfg)
        report = pipe.evaluate(model, iter_images(test_refs), by_ref, cfg)
        assert report.n_images == len(test_refs)
        if report.sensitivity_defined:
            assert 0.0 <= report.sensitivity <= 1.0
        print(f"  mini-MIAS sensitivity: {report.sensitivity}")
