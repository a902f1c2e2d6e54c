import numpy as np
import pytest

from mammocad.phantom import (
    Blob,
    BlobPopulation,
    CorpusSpec,
    PhantomSpec,
    acceptance_corpus_spec,
    derive_seed,
    generate_corpus,
    generate_phantom,
    normals,
    uniforms,
)


def test_uniforms_deterministic_and_in_range():
    a = uniforms(123, 1000)
    b = uniforms(123, 1000)
    assert np.array_equal(a, b)
    assert a.min() >= 0.0 and a.max() < 1.0
    assert not np.array_equal(a, uniforms(124, 1000))


def test_uniforms_offset_is_stream_position():
    full = uniforms(9, 100)
    tail = uniforms(9, 60, offset=40)
    assert np.array_equal(full[40:], tail)


def test_normals_moments():
    z = normals(7, 200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01


def test_derive_seed_stable():
    assert derive_seed(5, 0) == derive_seed(5, 0)
    assert derive_seed(5, 0) != derive_seed(5, 1)


def test_phantom_peak_at_blob_center():
    spec = PhantomSpec(
        dims=(64, 64),
        background_level=10.0,
        noise_std=0.0,
        blobs=(Blob(center=(20.0, 41.0), radius=6.0, amplitude=50.0),),
        seed=1,
    )
    img, records = generate_phantom(spec, ref="p0")
    assert np.unravel_index(np.argmax(img), img.shape) == (20, 41)
    assert len(records) == 1
    rec = records[0]
    assert rec.center == (41.0, 63 - 20)  # (x from left, y from bottom)
    assert rec.radius == 6.0


def test_phantom_deterministic():
    spec = PhantomSpec(dims=(32, 48), background_level=5.0, noise_std=2.0,
                       blobs=(Blob(center=(10.0, 10.0), radius=4.0, amplitude=30.0),),
                       seed=77)
    a, _ = generate_phantom(spec)
    b, _ = generate_phantom(spec)
    assert np.array_equal(a, b)


def test_phantom_zero_blobs_empty_records():
    img, records = generate_phantom(PhantomSpec(dims=(16, 16), seed=3))
    assert records == []
    assert np.all(img == 25.0)


def test_phantom_spec_validation():
    with pytest.raises(ValueError):
        PhantomSpec(dims=(16, 16), blobs=(Blob(center=(20.0, 5.0), radius=2.0, amplitude=9.0),))
    with pytest.raises(ValueError):
        PhantomSpec(dims=(16, 16), noise_std=5.0,
                    blobs=(Blob(center=(5.0, 5.0), radius=2.0, amplitude=4.0),))


def test_corpus_deterministic_and_named():
    spec = CorpusSpec(
        dims=(64, 64),
        margin=16.0,
        seed=11,
        populations=(BlobPopulation(count=6, radius_range=(3.0, 5.0), amplitude_range=(40.0, 60.0)),),
    )
    a = generate_corpus(spec)
    b = generate_corpus(spec)
    assert a == b
    assert [ref for ref, _ in a] == [f"syn00{i}" for i in range(6)]
    for _, pspec in a:
        blob = pspec.blobs[0]
        assert 16.0 <= blob.center[0] <= 47.0
        assert 3.0 <= blob.radius <= 5.0


def test_acceptance_corpus_shape():
    spec = acceptance_corpus_spec(200)
    assert spec.count == 200
    assert all(p.blobs_per_image == 1 for p in spec.populations)
    for pop in spec.populations:
        # amplitude at least five noise sigmas
        assert pop.amplitude_range[0] >= 5.0 * pop.noise_std
    pairs = generate_corpus(spec)
    assert len(pairs) == 200
    weak_even = sum(
        1 for i, (_, s) in enumerate(pairs) if s.noise_std > 0 and i % 2 == 0
    )
    weak_odd = sum(
        1 for i, (_, s) in enumerate(pairs) if s.noise_std > 0 and i % 2 == 1
    )
    assert weak_even == weak_odd  # balanced across alternating split halves
