"""Noise sampling, library construction, persistence, and record ingest."""

import json

import numpy as np
import pytest

from noiselib.errors import FormatError, IngestError, InvalidParameterError
from noiselib.features import FeatureConfig
from noiselib.images import ImageBuffer, write_ppm
from noiselib.library import (
    FORMAT_VERSION,
    NoiseLibrary,
    build_library,
    ingest_records,
    load_library,
    sample_noise,
    save_library,
)

from conftest import fabricate_library


# ---------------------------------------------------------------------------
# noise sampling


def test_sample_noise_is_deterministic():
    a = sample_noise(42, 7, (4, 8, 8))
    b = sample_noise(42, 7, (4, 8, 8))
    assert a.values.dtype == np.float32
    assert a.values.shape == (4, 8, 8)
    assert np.array_equal(a.values, b.values)


def test_sample_noise_streams_are_distinct():
    base = sample_noise(42, 0, (4, 8, 8)).values
    assert not np.array_equal(base, sample_noise(42, 1, (4, 8, 8)).values)
    assert not np.array_equal(base, sample_noise(43, 0, (4, 8, 8)).values)


def test_sample_noise_prefix_stability():
    # The stream for a given (seed, id) must not depend on the requested shape
    # beyond truncation: same key, smaller tensor, same leading values.
    big = sample_noise(9, 3, (4, 16, 16)).values.ravel()
    small = sample_noise(9, 3, (1, 4, 4)).values.ravel()
    assert np.array_equal(small, big[: small.size])


def test_sample_noise_is_standard_normal():
    x = sample_noise(123, 0, (4, 160, 160)).values.ravel()
    assert x.size >= 100_000
    assert abs(x.mean()) <= 0.02
    assert abs(x.std() - 1.0) <= 0.02
    tail = np.mean(np.abs(x) > 1.96)
    assert 0.04 <= tail <= 0.06


def test_sample_noise_batch_statistics():
    # Means of 1000 independent (1, 8, 8) tensors: each mean has std 1/8,
    # so their average is within 3 * 0.125 / sqrt(1000) of zero and their
    # spread within a few sigma of 1/8.
    means = np.array([sample_noise(5, i, (1, 8, 8)).values.mean()
                      for i in range(1000)])
    assert abs(means.mean()) <= 3 * 0.125 / np.sqrt(1000)
    assert abs(means.std() - 0.125) <= 3 * 0.125 / np.sqrt(2 * 1000)


def test_sample_noise_validation():
    with pytest.raises(InvalidParameterError):
        sample_noise(1, -1, (4, 8, 8))
    with pytest.raises(InvalidParameterError):
        sample_noise(-1, 0, (4, 8, 8))
    with pytest.raises(InvalidParameterError):
        sample_noise(1, 0, (4, 8))
    with pytest.raises(InvalidParameterError):
        sample_noise(1, 0, (4, 0, 8))


# ---------------------------------------------------------------------------
# building


def test_build_library_basics():
    lib = build_library(17, 5, shape=(4, 8, 8))
    assert lib.count == 5
    assert lib.noise.shape == (5, 4, 8, 8)
    assert lib.noise.dtype == np.float32
    for i in range(5):
        rec = lib.record(i)
        assert rec.noise_id == i
        assert rec.color is not None and rec.sharpness is not None
        assert np.array_equal(lib.noise_tensor(i).values, lib.noise[i])


def test_build_library_empty():
    lib = build_library(17, 0, shape=(4, 8, 8))
    assert lib.count == 0
    assert lib.noise.shape == (0, 4, 8, 8)


def test_build_library_deterministic(tmp_path):
    for name in ("a", "b"):
        save_library(build_library(99, 4, shape=(4, 8, 8)), tmp_path / name)
    meta_a = (tmp_path / "a.meta.jsonl").read_bytes()
    meta_b = (tmp_path / "b.meta.jsonl").read_bytes()
    blob_a = (tmp_path / "a.noise.bin").read_bytes()
    blob_b = (tmp_path / "b.noise.bin").read_bytes()
    assert meta_a == meta_b
    assert blob_a == blob_b


def test_build_library_ingest_dir_posterior(tmp_path, rng):
    root = tmp_path / "posteriors"
    root.mkdir()
    for i in range(2):
        write_ppm(ImageBuffer(rng.random((8, 8, 3))), root / f"{i}.ppm")
    lib = build_library(3, 2, shape=(4, 8, 8), posterior=f"ingest-dir:{root}")
    assert lib.count == 2
    # A third record has no matching image and must fail loudly, by id.
    with pytest.raises(IngestError, match="noise_id 2"):
        build_library(3, 3, shape=(4, 8, 8), posterior=f"ingest-dir:{root}")


def test_build_library_rejects_unknown_posterior():
    with pytest.raises(InvalidParameterError):
        build_library(1, 1, shape=(4, 8, 8), posterior="oracle")


def test_noise_library_invariants():
    lib = build_library(2, 3, shape=(4, 8, 8))
    records = list(lib.records)
    with pytest.raises(InvalidParameterError):
        NoiseLibrary(master_seed=2, noise_shape=(4, 8, 8),
                     feature_config=lib.feature_config,
                     records=records[::-1], noise=lib.noise)
    with pytest.raises(InvalidParameterError):
        NoiseLibrary(master_seed=2, noise_shape=(4, 8, 8),
                     feature_config=lib.feature_config,
                     records=records[:2], noise=lib.noise)
    with pytest.raises(InvalidParameterError):
        lib.record(3)
    with pytest.raises(InvalidParameterError):
        lib.noise_tensor(-1)


# ---------------------------------------------------------------------------
# persistence


def test_save_load_round_trip(tmp_path):
    lib = build_library(7, 6, shape=(4, 8, 8))
    save_library(lib, tmp_path / "lib")
    loaded = load_library(tmp_path / "lib")
    assert loaded.count == lib.count
    assert loaded.master_seed == lib.master_seed
    assert loaded.noise_shape == lib.noise_shape
    assert np.array_equal(loaded.noise, lib.noise)
    for i in range(lib.count):
        assert np.array_equal(loaded.record(i).shape, lib.record(i).shape)
        assert loaded.record(i).sharpness == lib.record(i).sharpness
    # Saving what was loaded reproduces the files byte for byte.
    save_library(loaded, tmp_path / "again")
    assert ((tmp_path / "again.meta.jsonl").read_bytes()
            == (tmp_path / "lib.meta.jsonl").read_bytes())
    assert ((tmp_path / "again.noise.bin").read_bytes()
            == (tmp_path / "lib.noise.bin").read_bytes())


def test_load_missing_files(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_library(tmp_path / "nope")
    lib = build_library(1, 1, shape=(4, 8, 8))
    save_library(lib, tmp_path / "lib")
    (tmp_path / "lib.noise.bin").unlink()
    with pytest.raises(FileNotFoundError):
        load_library(tmp_path / "lib")


def test_load_rejects_truncated_blob(tmp_path):
    save_library(build_library(1, 2, shape=(4, 8, 8)), tmp_path / "lib")
    blob = tmp_path / "lib.noise.bin"
    blob.write_bytes(blob.read_bytes()[:-8])
    with pytest.raises(FormatError, match="expected"):
        load_library(tmp_path / "lib")


def test_load_rejects_malformed_meta_line(tmp_path):
    save_library(build_library(1, 2, shape=(4, 8, 8)), tmp_path / "lib")
    meta = tmp_path / "lib.meta.jsonl"
    lines = meta.read_text().splitlines()
    lines[2] = "{not json"
    meta.write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError, match="line 3"):
        load_library(tmp_path / "lib")


def test_load_rejects_version_and_count_mismatch(tmp_path):
    save_library(build_library(1, 2, shape=(4, 8, 8)), tmp_path / "lib")
    meta = tmp_path / "lib.meta.jsonl"
    lines = meta.read_text().splitlines()

    header = json.loads(lines[0])
    header["format_version"] = FORMAT_VERSION + 1
    meta.write_text("\n".join([json.dumps(header)] + lines[1:]) + "\n")
    with pytest.raises(FormatError, match="version"):
        load_library(tmp_path / "lib")

    header["format_version"] = FORMAT_VERSION
    meta.write_text("\n".join([json.dumps(header)] + lines[1:2]) + "\n")
    with pytest.raises(FormatError):
        load_library(tmp_path / "lib")


def test_header_contents(tmp_path):
    lib = build_library(11, 3, shape=(4, 8, 8),
                        feature_config=FeatureConfig(semantic_dim=16))
    header = lib.header_dict()
    assert header["format_version"] == FORMAT_VERSION
    assert header["master_seed"] == 11
    assert header["count"] == 3
    assert header["noise_shape"] == [4, 8, 8]
    assert header["semantic_dim"] == 16


# ---------------------------------------------------------------------------
# ingest


def write_record(path, obj):
    path.write_text(json.dumps(obj), encoding="utf-8")


def test_ingest_inline_and_file_embeddings(tmp_path, rng):
    lib = build_library(5, 3, shape=(4, 8, 8),
                        feature_config=FeatureConfig(semantic_dim=4))
    rdir = tmp_path / "records"
    rdir.mkdir()

    inline = rng.standard_normal(4)
    write_record(rdir / "0.json", {"noise_id": 0, "semantic": inline.tolist()})
    raw = rng.standard_normal(4).astype("<f4")
    raw.tofile(rdir / "1.f32le")
    write_record(rdir / "1.json", {"noise_id": 1, "semantic": "@1.f32le"})

    merged = ingest_records(lib, rdir)
    assert merged is not lib
    assert merged.noise is lib.noise  # tensors are shared, not copied
    for i, src in ((0, inline), (1, raw.astype(np.float64))):
        got = merged.record(i).semantic
        assert got.dtype == np.float32
        assert abs(np.linalg.norm(got.astype(np.float64)) - 1.0) <= 1e-6
        cos = float(got.astype(np.float64) @ (src / np.linalg.norm(src)))
        assert abs(cos - 1.0) <= 1e-6
    assert merged.record(2).semantic is None
    # The input library is untouched.
    assert lib.record(0).semantic is None


def test_ingest_scalar_and_vector_features(tmp_path):
    lib = build_library(5, 2, shape=(4, 8, 8))
    rdir = tmp_path / "records"
    rdir.mkdir()
    write_record(rdir / "0.json",
                 {"noise_id": 0, "sharpness": 0.42, "shape": [1.0] * 7})
    merged = ingest_records(lib, rdir)
    assert merged.record(0).sharpness == 0.42
    assert np.array_equal(merged.record(0).shape, np.ones(7))
    # Untouched fields survive the merge.
    assert merged.record(0).color is not None
    assert merged.record(1).sharpness == lib.record(1).sharpness


def test_ingest_errors(tmp_path, rng):
    lib = build_library(5, 2, shape=(4, 8, 8),
                        feature_config=FeatureConfig(semantic_dim=4))
    rdir = tmp_path / "records"
    rdir.mkdir()

    write_record(rdir / "bad.json", {"noise_id": 9, "sharpness": 0.1})
    with pytest.raises(IngestError, match="9"):
        ingest_records(lib, rdir)

    write_record(rdir / "bad.json", {"noise_id": 1, "semantic": [1.0, 2.0]})
    with pytest.raises(IngestError, match="noise_id 1"):
        ingest_records(lib, rdir)

    write_record(rdir / "bad.json", {"noise_id": 1, "sharpness": float("nan")})
    with pytest.raises(IngestError):
        ingest_records(lib, rdir)

    write_record(rdir / "bad.json", [1, 2, 3])
    with pytest.raises(IngestError, match="noise_id"):
        ingest_records(lib, rdir)

    no_slot = build_library(5, 2, shape=(4, 8, 8))
    write_record(rdir / "bad.json", {"noise_id": 0, "semantic": [1.0, 0.0]})
    with pytest.raises(IngestError):
        ingest_records(no_slot, rdir)

    with pytest.raises(FileNotFoundError):
        ingest_records(lib, tmp_path / "missing")


def test_ingest_empty_dir_is_identity(tmp_path):
    lib = build_library(5, 2, shape=(4, 8, 8))
    rdir = tmp_path / "records"
    rdir.mkdir()
    assert ingest_records(lib, rdir) is lib


def test_ingest_is_idempotent_on_disk(tmp_path, rng):
    lib = build_library(5, 2, shape=(4, 8, 8),
                        feature_config=FeatureConfig(semantic_dim=4))
    rdir = tmp_path / "records"
    rdir.mkdir()
    write_record(rdir / "0.json",
                 {"noise_id": 0, "semantic": rng.standard_normal(4).tolist()})
    once = ingest_records(lib, rdir)
    twice = ingest_records(once, rdir)
    save_library(once, tmp_path / "once")
    save_library(twice, tmp_path / "twice")
    assert ((tmp_path / "once.meta.jsonl").read_bytes()
            == (tmp_path / "twice.meta.jsonl").read_bytes())


# ---------------------------------------------------------------------------
# derived views


def test_feature_matrix_and_semantic_pack():
    lib = fabricate_library(8, dim=6, sharpness=True)
    mat = lib.feature_matrix("semantic")
    assert mat.shape == (8, 6)
    assert mat.dtype == np.float64
    assert lib.feature_matrix("semantic") is mat  # cached

    mat32, mat16, max_norm = lib.semantic_pack()
    assert mat32.dtype == np.float32 and mat16.dtype == np.float16
    assert mat32.flags["C_CONTIGUOUS"]
    assert np.allclose(mat32.astype(np.float64), mat, atol=1e-7)
    norms = np.linalg.norm(mat, axis=1)
    assert max_norm >= norms.max() - 1e-6
