"""Noise library: seeded sampling, offline construction, persistence, ingest.

A library is a flat collection of standard-normal noise tensors plus one
feature record per tensor. On disk it is two files: ``<prefix>.meta.jsonl``
(a header line followed by one JSON record per noise) and
``<prefix>.noise.bin`` (the tensors as concatenated little-endian float32,
in id order). Metadata stays greppable; the blob stays memory-mappable.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    FormatError,
    IngestError,
    InvalidParameterError,
    QueryError,
)
from .features import FeatureConfig, FeatureRecord, extract_all, normalize_embedding
from .images import ImageBuffer, read_image
from .synth import SynthConfig, synth_posterior

FORMAT_VERSION = 1

POSTERIOR_PRODUCERS = ("synthetic", "ingest-dir")

_IMAGE_SUFFIXES = (".ppm", ".pnm", ".png", ".jpg", ".jpeg", ".bmp")


def _canonical_json(obj) -> str:
    # One stable byte representation per value, so save(load(x)) == x.
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class NoiseTensor:
    """One standard-normal sample, keyed by its library id."""

    noise_id: int
    values: np.ndarray  # (channels, height, width) float32

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float32)
        if vals.ndim != 3:
            raise InvalidParameterError(
                f"noise values must be (c, h, w), got shape {vals.shape}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "noise_id", int(self.noise_id))

    @property
    def shape(self) -> tuple:
        return tuple(self.values.shape)


def sample_noise(master_seed: int, noise_id: int, shape) -> NoiseTensor:
    """Deterministic N(0, 1) tensor for (master_seed, noise_id).

    Uses a counter-based generator keyed on both integers, so any id can
    be regenerated independently and in any order.
    """
    shape = tuple(int(v) for v in shape)
    if len(shape) != 3 or min(shape) < 1:
        raise InvalidParameterError(
            f"shape must be three positive dimensions, got {shape}")
    if master_seed < 0 or noise_id < 0:
        raise InvalidParameterError("master_seed and noise_id must be non-negative")
    gen = np.random.Generator(np.random.Philox(key=[master_seed, noise_id]))
    values = gen.standard_normal(size=shape, dtype=np.float32)
    return NoiseTensor(noise_id=noise_id, values=values)


@dataclass(eq=False)
class NoiseLibrary:
    """Immutable bundle of noise tensors and their feature records."""

    master_seed: int
    noise_shape: tuple
    feature_config: FeatureConfig
    records: list
    noise: np.ndarray  # (n, c, h, w) float32
    format_version: int = FORMAT_VERSION
    _caches: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.noise_shape = tuple(int(v) for v in self.noise_shape)
        if len(self.noise_shape) != 3 or min(self.noise_shape) < 1:
            raise InvalidParameterError(
                f"noise_shape must be three positive dimensions, got {self.noise_shape}")
        noise = np.ascontiguousarray(self.noise, dtype=np.float32)
        if noise.shape != (len(self.records),) + self.noise_shape:
            raise InvalidParameterError(
                f"noise array shape {noise.shape} does not match "
                f"{len(self.records)} records of shape {self.noise_shape}")
        self.noise = noise
        for i, rec in enumerate(self.records):
            if rec.noise_id != i:
                raise InvalidParameterError(
                    f"record {i} has noise_id {rec.noise_id}; "
                    "ids must be exactly 0..n-1 in order")

    @property
    def count(self) -> int:
        return len(self.records)

    @property
    def semantic_dim(self):
        return self.feature_config.semantic_dim

    def record(self, noise_id: int) -> FeatureRecord:
        if not 0 <= noise_id < self.count:
            raise InvalidParameterError(
                f"noise_id {noise_id} out of range for library of {self.count}")
        return self.records[noise_id]

    def noise_tensor(self, noise_id: int) -> NoiseTensor:
        self.record(noise_id)  # range check
        return NoiseTensor(noise_id=noise_id, values=self.noise[noise_id])

    def header_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "master_seed": int(self.master_seed),
            "count": self.count,
            "noise_shape": list(self.noise_shape),
            "feature_config": self.feature_config.to_json_dict(),
            "semantic_dim": self.feature_config.semantic_dim,
        }

    # -- packed views used by the query engine ---------------------------

    def feature_matrix(self, path: str) -> np.ndarray:
        """Stack feature_values(path) across records: (n, d) or (n,) float64."""
        key = ("feat", path)
        if key not in self._caches:
            if not self.records:
                raise QueryError("library is empty")
            values = [rec.feature_values(path) for rec in self.records]
            if np.isscalar(values[0]):
                mat = np.asarray(values, dtype=np.float64)
            else:
                mat = np.ascontiguousarray(np.stack(values), dtype=np.float64)
            self._caches[key] = mat
        return self._caches[key]

    def semantic_pack(self):
        """(float32 matrix, float16 shadow, max row norm) for cosine scans.

        The float16 copy halves the bytes touched by a full scan; the
        screen it feeds is made exact again by re-scoring boundary rows
        from the float32 matrix in float64.
        """
        if "sem" not in self._caches:
            if self.feature_config.semantic_dim is None:
                raise QueryError("library was built without a semantic embedding slot")
            if not self.records:
                raise QueryError("library is empty")
            missing = [rec.noise_id for rec in self.records if rec.semantic is None]
            if missing:
                raise QueryError(
                    f"{len(missing)} records lack semantic embeddings "
                    f"(first missing noise_id {missing[0]}); ingest them first")
            mat32 = np.ascontiguousarray(
                np.stack([rec.semantic for rec in self.records]), dtype=np.float32)
            mat16 = mat32.astype(np.float16)
            norms = np.sqrt((mat32.astype(np.float64) ** 2).sum(axis=1))
            self._caches["sem"] = (mat32, mat16, float(norms.max()))
        return self._caches["sem"]


# ---------------------------------------------------------------------------
# construction


def _posterior_producer(posterior: str, synth_config: SynthConfig):
    if posterior == "synthetic":
        return lambda tensor: synth_posterior(tensor.values, synth_config)
    if posterior.startswith("ingest-dir:"):
        root = Path(posterior[len("ingest-dir:"):])
        if not root.is_dir():
            raise IngestError(f"posterior image directory not found: {root}")

        def from_dir(tensor) -> ImageBuffer:
            for suffix in _IMAGE_SUFFIXES:
                candidate = root / f"{tensor.noise_id}{suffix}"
                if candidate.exists():
                    return read_image(candidate)
            raise IngestError(
                f"no posterior image for noise_id {tensor.noise_id} in {root}")

        return from_dir
    raise InvalidParameterError(
        f"unknown posterior producer {posterior!r}; "
        "expected 'synthetic' or 'ingest-dir:<path>'")


def build_library(master_seed: int, count: int, shape=(4, 64, 64),
                  posterior: str = "synthetic",
                  feature_config: FeatureConfig | None = None,
                  synth_config: SynthConfig | None = None) -> NoiseLibrary:
    """Sample `count` noises, render each one's posterior, extract features."""
    if count < 0:
        raise InvalidParameterError("count must be non-negative")
    shape = tuple(int(v) for v in shape)
    config = feature_config if feature_config is not None else FeatureConfig()
    producer = _posterior_producer(posterior, synth_config or SynthConfig())

    noise = np.empty((count,) + shape, dtype=np.float32)
    records = []
    for i in range(count):
        tensor = sample_noise(master_seed, i, shape)
        noise[i] = tensor.values
        image = producer(tensor)
        records.append(extract_all(image, config, noise_id=i))
    return NoiseLibrary(master_seed=master_seed, noise_shape=shape,
                        feature_config=config, records=records, noise=noise)


# ---------------------------------------------------------------------------
# persistence


def _meta_path(prefix) -> Path:
    return Path(str(prefix) + ".meta.jsonl")


def _blob_path(prefix) -> Path:
    return Path(str(prefix) + ".noise.bin")


def save_library(lib: NoiseLibrary, path_prefix) -> None:
    lines = [_canonical_json(lib.header_dict())]
    lines.extend(_canonical_json(rec.to_json_dict()) for rec in lib.records)
    _meta_path(path_prefix).write_text("\n".join(lines) + "\n", encoding="utf-8")
    _blob_path(path_prefix).write_bytes(lib.noise.astype("<f4", copy=False).tobytes())


def _parse_meta_line(line: str, lineno: int, path: Path) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {lineno}: malformed JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise FormatError(f"{path}: line {lineno}: expected a JSON object")
    return obj


def load_library(path_prefix) -> NoiseLibrary:
    meta_path = _meta_path(path_prefix)
    blob_path = _blob_path(path_prefix)
    if not meta_path.is_file():
        raise FileNotFoundError(str(meta_path))
    if not blob_path.is_file():
        raise FileNotFoundError(str(blob_path))

    lines = meta_path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise FormatError(f"{meta_path}: empty metadata file")
    header = _parse_meta_line(lines[0], 1, meta_path)
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatError(
            f"{meta_path}: unsupported format_version {version!r} "
            f"(expected {FORMAT_VERSION})")
    try:
        count = int(header["count"])
        shape = tuple(int(v) for v in header["noise_shape"])
        master_seed = int(header["master_seed"])
        config = FeatureConfig.from_json_dict(header["feature_config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{meta_path}: bad header: {exc}") from None
    if header.get("semantic_dim") != config.semantic_dim:
        raise FormatError(
            f"{meta_path}: header semantic_dim {header.get('semantic_dim')!r} "
            f"disagrees with feature config {config.semantic_dim!r}")
    if len(lines) - 1 != count:
        raise FormatError(
            f"{meta_path}: header count {count} but {len(lines) - 1} record lines")

    records = []
    for i, line in enumerate(lines[1:], start=2):
        obj = _parse_meta_line(line, i, meta_path)
        try:
            records.append(FeatureRecord.from_json_dict(obj))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{meta_path}: line {i}: bad record: {exc}") from None

    raw = blob_path.read_bytes()
    expected = count * int(np.prod(shape)) * 4
    if len(raw) != expected:
        raise FormatError(
            f"{blob_path}: truncated or oversized blob: "
            f"{len(raw)} bytes, expected {expected}")
    noise = np.frombuffer(raw, dtype="<f4").astype(np.float32)
    noise = noise.reshape((count,) + shape)

    try:
        return NoiseLibrary(master_seed=master_seed, noise_shape=shape,
                            feature_config=config, records=records, noise=noise)
    except InvalidParameterError as exc:
        raise FormatError(f"{meta_path}: {exc}") from None


# ---------------------------------------------------------------------------
# external record ingestion


def _resolve_embedding(value, base_dir: Path, noise_id: int) -> np.ndarray:
    if isinstance(value, str):
        if not value.startswith("@"):
            raise IngestError(
                f"noise_id {noise_id}: embedding must be a list or '@file' "
                f"reference, got {value!r}")
        ref = base_dir / value[1:]
        if not ref.is_file():
            raise IngestError(f"noise_id {noise_id}: embedding file not found: {ref}")
        return np.fromfile(ref, dtype="<f4").astype(np.float64)
    return np.asarray(value, dtype=np.float64)


_PLAIN_VECTOR_FIELDS = {"texture": "texture", "shape": "shape",
                        "style_gram": "style_gram"}


def _merge_record(existing: FeatureRecord, raw: dict, base_dir: Path,
                  lib: NoiseLibrary) -> FeatureRecord:
    nid = existing.noise_id
    merged = FeatureRecord(
        noise_id=nid, color=existing.color, texture=existing.texture,
        shape=existing.shape, sharpness=existing.sharpness,
        style_gram=existing.style_gram, semantic=existing.semantic)

    if "semantic" in raw:
        emb = _resolve_embedding(raw["semantic"], base_dir, nid)
        dim = lib.feature_config.semantic_dim
        if dim is None:
            raise IngestError(
                f"noise_id {nid}: library was built without a semantic "
                "embedding slot (semantic_dim unset)")
        if emb.size != dim:
            raise IngestError(
                f"noise_id {nid}: embedding dimension {emb.size} != "
                f"library semantic_dim {dim}")
        try:
            unit = normalize_embedding(emb)
        except InvalidParameterError as exc:
            raise IngestError(f"noise_id {nid}: {exc}") from None
        merged.semantic = unit.astype(np.float32)

    for key, attr in _PLAIN_VECTOR_FIELDS.items():
        if key in raw:
            vec = np.asarray(raw[key], dtype=np.float64)
            if not np.all(np.isfinite(vec)):
                raise IngestError(f"noise_id {nid}: non-finite values in {key!r}")
            setattr(merged, attr, vec)
    if "sharpness" in raw:
        value = float(raw["sharpness"])
        if not np.isfinite(value):
            raise IngestError(f"noise_id {nid}: non-finite sharpness")
        merged.sharpness = value
    if "color" in raw:
        from .features import ColorStats

        stats = ColorStats.from_json_dict(raw["color"])
        if not np.all(np.isfinite(stats.as_vector())):
            raise IngestError(f"noise_id {nid}: non-finite values in color stats")
        merged.color = stats
    return merged


def ingest_records(lib: NoiseLibrary, records_dir) -> NoiseLibrary:
    """Merge externally produced feature records into a library.

    Reads every ``*.json`` file under records_dir; each must carry a
    noise_id plus any feature fields to replace. Embeddings referenced
    as ``"@file"`` are raw little-endian float32 and are re-normalized
    to unit length on ingest. Returns a new library sharing the noise
    tensors; the input library is untouched.
    """
    root = Path(records_dir)
    if not root.is_dir():
        raise FileNotFoundError(str(root))

    updates = {}
    for path in sorted(root.glob("*.json")):
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise IngestError(f"{path.name}: malformed JSON: {exc.msg}") from None
        if not isinstance(raw, dict) or "noise_id" not in raw:
            raise IngestError(f"{path.name}: record must be an object with a noise_id")
        nid = raw["noise_id"]
        if not isinstance(nid, int) or not 0 <= nid < lib.count:
            raise IngestError(
                f"{path.name}: unknown noise_id {nid!r} "
                f"(library holds 0..{lib.count - 1})")
        updates[nid] = raw

    if not updates:
        return lib

    records = list(lib.records)
    for nid, raw in sorted(updates.items()):
        records[nid] = _merge_record(lib.records[nid], raw, root, lib)
    return NoiseLibrary(master_seed=lib.master_seed, noise_shape=lib.noise_shape,
                        feature_config=lib.feature_config, records=records,
                        noise=lib.noise, format_version=lib.format_version)
