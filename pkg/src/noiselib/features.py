"""Image feature extraction: the key material records are built from.

Every extractor is a pure function computed in float64. The per-image
record bundles whichever feature kinds the config enables:

  color      mean RGB, mean HSV saturation/value, grayscale contrast,
             mean CIELAB (D65)
  texture    4 Haralick statistics x 4 co-occurrence offsets = 16 values
  shape      the 7 Hu invariants of the grayscale intensity, log-mapped
  sharpness  high-frequency energy fraction of the spectrum, in [0, 1]
  style      Gram matrix (upper triangle) over a proxy map stack
  semantic   an externally computed embedding, unit-normalized

Semantic embeddings are normalized in float64 and stored quantized to
float32; the quantized vector is what every downstream consumer sees.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, ShapeMismatchError
from .images import ImageBuffer, LUMA_WEIGHTS

FEATURE_KINDS = ("color", "texture", "shape", "sharpness", "style", "semantic")

DEFAULT_GLCM_LEVELS = 32
DEFAULT_GLCM_OFFSETS = ((0, 1), (1, 0), (1, 1), (1, -1))
DEFAULT_HFE_CUTOFF = 0.5

_HU_LOG_EPS = 1e-30

# sRGB -> XYZ (D65) and the D65 white point.
_SRGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_D65 = np.array([0.95047, 1.0, 1.08883])


# ---------------------------------------------------------------------------
# record types


@dataclass(eq=False)
class ColorStats:
    mean_rgb: np.ndarray       # (3,)
    mean_saturation: float
    mean_brightness: float
    contrast: float
    mean_lab: np.ndarray       # (3,)

    def to_json_dict(self) -> dict:
        return {
            "mean_rgb": [float(v) for v in self.mean_rgb],
            "mean_saturation": float(self.mean_saturation),
            "mean_brightness": float(self.mean_brightness),
            "contrast": float(self.contrast),
            "mean_lab": [float(v) for v in self.mean_lab],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ColorStats":
        return cls(
            mean_rgb=np.asarray(obj["mean_rgb"], dtype=np.float64),
            mean_saturation=float(obj["mean_saturation"]),
            mean_brightness=float(obj["mean_brightness"]),
            contrast=float(obj["contrast"]),
            mean_lab=np.asarray(obj["mean_lab"], dtype=np.float64),
        )

    def as_vector(self) -> np.ndarray:
        """Flat 9-vector: rgb(3), saturation, brightness, contrast, lab(3)."""
        return np.concatenate([
            self.mean_rgb,
            [self.mean_saturation, self.mean_brightness, self.contrast],
            self.mean_lab,
        ])


@dataclass(frozen=True)
class FeatureConfig:
    """Which feature kinds to extract and their parameters."""

    kinds: tuple = ("color", "texture", "shape", "sharpness", "style")
    semantic_dim: int | None = None
    glcm_levels: int = DEFAULT_GLCM_LEVELS
    glcm_offsets: tuple = DEFAULT_GLCM_OFFSETS
    hfe_cutoff: float = DEFAULT_HFE_CUTOFF
    style_maps: str = "proxy"

    def __post_init__(self):
        for kind in self.kinds:
            if kind not in FEATURE_KINDS:
                raise InvalidParameterError(
                    f"unknown feature kind {kind!r}; expected from {FEATURE_KINDS}")
        object.__setattr__(self, "kinds", tuple(self.kinds))
        object.__setattr__(
            self, "glcm_offsets",
            tuple((int(dy), int(dx)) for dy, dx in self.glcm_offsets))

    def to_json_dict(self) -> dict:
        return {
            "kinds": list(self.kinds),
            "semantic_dim": self.semantic_dim,
            "glcm": {
                "levels": self.glcm_levels,
                "offsets": [list(o) for o in self.glcm_offsets],
            },
            "hfe_cutoff": self.hfe_cutoff,
            "style_maps": self.style_maps,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "FeatureConfig":
        glcm = obj.get("glcm", {})
        return cls(
            kinds=tuple(obj.get("kinds", ("color", "texture", "shape",
                                          "sharpness", "style"))),
            semantic_dim=obj.get("semantic_dim"),
            glcm_levels=int(glcm.get("levels", DEFAULT_GLCM_LEVELS)),
            glcm_offsets=tuple(tuple(o) for o in
                               glcm.get("offsets", DEFAULT_GLCM_OFFSETS)),
            hfe_cutoff=float(obj.get("hfe_cutoff", DEFAULT_HFE_CUTOFF)),
            style_maps=obj.get("style_maps", "proxy"),
        )


@dataclass(eq=False)
class FeatureRecord:
    """All extracted features for one noise sample."""

    noise_id: int
    color: ColorStats | None = None
    texture: np.ndarray | None = None      # (16,)
    shape: np.ndarray | None = None        # (7,)
    sharpness: float | None = None
    style_gram: np.ndarray | None = None
    semantic: np.ndarray | None = None     # (D,) float32, unit norm

    def to_json_dict(self) -> dict:
        out: dict = {"noise_id": int(self.noise_id)}
        if self.color is not None:
            out["color"] = self.color.to_json_dict()
        if self.texture is not None:
            out["texture"] = [float(v) for v in self.texture]
        if self.shape is not None:
            out["shape"] = [float(v) for v in self.shape]
        if self.sharpness is not None:
            out["sharpness"] = float(self.sharpness)
        if self.style_gram is not None:
            out["style_gram"] = [float(v) for v in self.style_gram]
        if self.semantic is not None:
            # float32 values print exactly and re-parse to the same bits
            out["semantic"] = [float(v) for v in self.semantic]
        return out

    @classmethod
    def from_json_dict(cls, obj: dict) -> "FeatureRecord":
        color = obj.get("color")
        semantic = obj.get("semantic")
        return cls(
            noise_id=int(obj["noise_id"]),
            color=ColorStats.from_json_dict(color) if color is not None else None,
            texture=(np.asarray(obj["texture"], dtype=np.float64)
                     if "texture" in obj else None),
            shape=(np.asarray(obj["shape"], dtype=np.float64)
                   if "shape" in obj else None),
            sharpness=(float(obj["sharpness"]) if "sharpness" in obj else None),
            style_gram=(np.asarray(obj["style_gram"], dtype=np.float64)
                        if "style_gram" in obj else None),
            semantic=(np.asarray(semantic, dtype=np.float32)
                      if semantic is not None else None),
        )

    def feature_values(self, path: str):
        """Resolve a dotted feature path to a vector or scalar.

        "semantic", "style", "texture", "shape" give vectors; "sharpness"
        a scalar; "color" the flat 9-vector; "color.<stat>" a sub-vector
        and "color.<stat>.<i>" / "texture.<i>" etc. a scalar component.
        """
        parts = path.split(".")
        head = parts[0]
        if head == "semantic":
            base = self.semantic
        elif head == "style":
            base = self.style_gram
        elif head == "texture":
            base = self.texture
        elif head == "shape":
            base = self.shape
        elif head == "sharpness":
            base = self.sharpness
        elif head == "color":
            if self.color is None:
                base = None
            elif len(parts) == 1:
                base = self.color.as_vector()
            else:
                stat = parts[1]
                if not hasattr(self.color, stat):
                    raise InvalidParameterError(f"unknown color statistic {stat!r}")
                base = getattr(self.color, stat)
                parts = parts[1:]
        else:
            raise InvalidParameterError(f"unknown feature path {path!r}")
        if base is None:
            raise InvalidParameterError(
                f"feature {path!r} absent from record {self.noise_id}")
        if len(parts) > 1:
            try:
                idx = int(parts[-1])
                base = np.asarray(base, dtype=np.float64).reshape(-1)[idx]
            except (ValueError, IndexError) as exc:
                raise InvalidParameterError(
                    f"bad component index in feature path {path!r}: {exc}") from None
        if np.isscalar(base) or getattr(base, "ndim", 1) == 0:
            return float(base)
        return np.asarray(base, dtype=np.float64)


# ---------------------------------------------------------------------------
# color


def _rgb_to_hsv_sv(px: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """S and V planes of the HSV transform (hue is never needed here)."""
    v = px.max(axis=2)
    mn = px.min(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(v > 0.0, (v - mn) / v, 0.0)
    return s, v


def _srgb_to_lab(px: np.ndarray) -> np.ndarray:
    linear = np.where(px <= 0.04045, px / 12.92, ((px + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _SRGB_TO_XYZ.T
    ratio = xyz / _D65
    delta = 6.0 / 29.0
    f = np.where(ratio > delta ** 3,
                 np.cbrt(ratio),
                 ratio / (3.0 * delta ** 2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def color_features(img: ImageBuffer) -> ColorStats:
    """Channel means, HSV saturation/value means, grayscale contrast
    (population standard deviation), and CIELAB channel means."""
    px = img.pixels
    s, v = _rgb_to_hsv_sv(px)
    gray = img.grayscale()
    lab = _srgb_to_lab(px)
    return ColorStats(
        mean_rgb=px.mean(axis=(0, 1)),
        mean_saturation=float(s.mean()),
        mean_brightness=float(v.mean()),
        contrast=float(gray.std()),
        mean_lab=lab.mean(axis=(0, 1)),
    )


# ---------------------------------------------------------------------------
# texture


def glcm_matrix(gray: np.ndarray, levels: int, offset: tuple[int, int]) -> np.ndarray:
    """Symmetric, normalized co-occurrence matrix for one (dy, dx) offset."""
    h, w = gray.shape
    dy, dx = offset
    if h - abs(dy) < 1 or w - abs(dx) < 1:
        raise InvalidParameterError(
            f"offset {offset} does not fit a {h}x{w} image")
    q = np.minimum((gray * levels).astype(np.int64), levels - 1)
    y0, y1 = max(0, -dy), h - max(0, dy)
    x0, x1 = max(0, -dx), w - max(0, dx)
    a = q[y0:y1, x0:x1].ravel()
    b = q[y0 + dy : y1 + dy, x0 + dx : x1 + dx].ravel()
    counts = np.bincount(a * levels + b, minlength=levels * levels)
    mat = counts.reshape(levels, levels).astype(np.float64)
    mat += mat.T
    return mat / mat.sum()


def glcm_statistics(p: np.ndarray) -> np.ndarray:
    """[contrast, correlation, energy, homogeneity] of a normalized GLCM.

    Energy is the angular second moment (sum of squared entries).
    Correlation of a zero-variance marginal is defined as 1: a constant
    image is perfectly predictable.
    """
    levels = p.shape[0]
    idx = np.arange(levels, dtype=np.float64)
    diff = idx[:, None] - idx[None, :]
    contrast = float((p * diff ** 2).sum())
    energy = float((p * p).sum())
    homogeneity = float((p / (1.0 + diff ** 2)).sum())
    pi = p.sum(axis=1)
    mu = float((idx * pi).sum())
    var = float(((idx - mu) ** 2 * pi).sum())
    if var <= 0.0:
        correlation = 1.0
    else:
        cov = float((p * (idx[:, None] - mu) * (idx[None, :] - mu)).sum())
        correlation = cov / var
    return np.array([contrast, correlation, energy, homogeneity])


def glcm_features(img: ImageBuffer,
                  levels: int = DEFAULT_GLCM_LEVELS,
                  offsets=DEFAULT_GLCM_OFFSETS) -> np.ndarray:
    """Haralick statistics per offset, concatenated in offset order."""
    if levels < 2:
        raise InvalidParameterError(f"levels must be >= 2, got {levels}")
    gray = img.grayscale()
    return np.concatenate(
        [glcm_statistics(glcm_matrix(gray, levels, o)) for o in offsets])


# ---------------------------------------------------------------------------
# shape


def hu_moments(img: ImageBuffer, log_scale: bool = True) -> np.ndarray:
    """The 7 Hu invariants of grayscale intensity.

    Raw invariants span tens of orders of magnitude, so by default each is
    passed through h -> -sign(h) * log10(|h| + 1e-30). An all-black image
    has no moments to speak of and maps to the zero vector.
    """
    gray = img.grayscale()
    h, w = gray.shape
    y = np.arange(h, dtype=np.float64)[:, None]
    x = np.arange(w, dtype=np.float64)[None, :]

    m00 = gray.sum()
    if m00 == 0.0:
        return np.zeros(7)
    cx = (gray * x).sum() / m00
    cy = (gray * y).sum() / m00
    xc = x - cx
    yc = y - cy

    def mu(p, q):
        return ((xc ** p) * (yc ** q) * gray).sum()

    def eta(p, q):
        return mu(p, q) / m00 ** (1.0 + (p + q) / 2.0)

    n20, n02, n11 = eta(2, 0), eta(0, 2), eta(1, 1)
    n30, n03 = eta(3, 0), eta(0, 3)
    n21, n12 = eta(2, 1), eta(1, 2)

    phi = np.empty(7)
    phi[0] = n20 + n02
    phi[1] = (n20 - n02) ** 2 + 4.0 * n11 ** 2
    phi[2] = (n30 - 3.0 * n12) ** 2 + (3.0 * n21 - n03) ** 2
    phi[3] = (n30 + n12) ** 2 + (n21 + n03) ** 2
    phi[4] = ((n30 - 3.0 * n12) * (n30 + n12)
              * ((n30 + n12) ** 2 - 3.0 * (n21 + n03) ** 2)
              + (3.0 * n21 - n03) * (n21 + n03)
              * (3.0 * (n30 + n12) ** 2 - (n21 + n03) ** 2))
    phi[5] = ((n20 - n02) * ((n30 + n12) ** 2 - (n21 + n03) ** 2)
              + 4.0 * n11 * (n30 + n12) * (n21 + n03))
    phi[6] = ((3.0 * n21 - n03) * (n30 + n12)
              * ((n30 + n12) ** 2 - 3.0 * (n21 + n03) ** 2)
              - (n30 - 3.0 * n12) * (n21 + n03)
              * (3.0 * (n30 + n12) ** 2 - (n21 + n03) ** 2))
    if not log_scale:
        return phi
    return -np.sign(phi) * np.log10(np.abs(phi) + _HU_LOG_EPS)


# ---------------------------------------------------------------------------
# sharpness


def hfe(img: ImageBuffer, cutoff_fraction: float = DEFAULT_HFE_CUTOFF) -> float:
    """Fraction of non-DC spectral power beyond a radius cutoff.

    Frequencies are the normalized fftfreq coordinates, so the per-axis
    Nyquist radius is 0.5 and the cutoff sits at cutoff_fraction * 0.5.
    DC is excluded from both sums, which makes the measure invariant to
    constant brightness shifts; a constant image returns 0.
    """
    if not 0.0 < cutoff_fraction < 1.0:
        raise InvalidParameterError(
            f"cutoff_fraction must lie in (0, 1), got {cutoff_fraction}")
    gray = img.grayscale()
    h, w = gray.shape
    power = np.abs(np.fft.fft2(gray)) ** 2
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    radius = np.hypot(fy, fx)
    ac = radius > 0.0
    total = power[ac].sum()
    if total <= 0.0:
        return 0.0
    high = power[ac & (radius > cutoff_fraction * 0.5)].sum()
    return float(high / total)


# ---------------------------------------------------------------------------
# style


def gram_features(maps) -> np.ndarray:
    """Upper triangle (row-major) of the pixel-count-normalized Gram matrix."""
    if len(maps) < 1:
        raise InvalidParameterError("need at least one map")
    arrs = [np.asarray(m, dtype=np.float64) for m in maps]
    shape = arrs[0].shape
    for i, a in enumerate(arrs):
        if a.shape != shape:
            raise ShapeMismatchError(
                f"map {i} has shape {a.shape}, expected {shape}")
    flat = np.stack([a.ravel() for a in arrs])
    gram = (flat @ flat.T) / flat.shape[1]
    iu = np.triu_indices(len(arrs))
    return gram[iu]


def proxy_map_stack(img: ImageBuffer) -> list[np.ndarray]:
    """The built-in stand-in for neural feature maps: color planes, luma,
    and central-difference gradient magnitudes."""
    gray = img.grayscale()
    gy, gx = np.gradient(gray)
    return [img.pixels[..., 0], img.pixels[..., 1], img.pixels[..., 2],
            gray, np.abs(gx), np.abs(gy)]


# ---------------------------------------------------------------------------
# semantic


def normalize_embedding(v: np.ndarray) -> np.ndarray:
    """v / ||v||, in float64; idempotent; rejects the zero vector."""
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    norm = float(np.linalg.norm(v))
    if norm == 0.0 or not np.isfinite(norm):
        raise InvalidParameterError("cannot normalize a zero or non-finite vector")
    return v / norm


# ---------------------------------------------------------------------------
# the bundle


def extract_all(img: ImageBuffer, config: FeatureConfig,
                external_semantic: np.ndarray | None = None,
                noise_id: int = 0) -> FeatureRecord:
    """Populate a FeatureRecord with every kind the config enables."""
    rec = FeatureRecord(noise_id=noise_id)
    if "color" in config.kinds:
        rec.color = color_features(img)
    if "texture" in config.kinds:
        rec.texture = glcm_features(img, config.glcm_levels, config.glcm_offsets)
    if "shape" in config.kinds:
        rec.shape = hu_moments(img)
    if "sharpness" in config.kinds:
        rec.sharpness = hfe(img, config.hfe_cutoff)
    if "style" in config.kinds:
        rec.style_gram = gram_features(proxy_map_stack(img))
    if external_semantic is not None:
        unit = normalize_embedding(external_semantic)
        if config.semantic_dim is not None and unit.size != config.semantic_dim:
            raise ShapeMismatchError(
                f"semantic embedding has dim {unit.size}, "
                f"config declares {config.semantic_dim}")
        rec.semantic = unit.astype(np.float32)
    return rec
