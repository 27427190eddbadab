"""Feature extractors checked against slow, independently written oracles.

Every numeric check here recomputes the expected value with explicit Python
loops (or the stdlib), never by calling back into the code under test.
"""

import colorsys
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noiselib.errors import InvalidParameterError, ShapeMismatchError
from noiselib.features import (
    ColorStats,
    FeatureConfig,
    FeatureRecord,
    color_features,
    extract_all,
    glcm_features,
    glcm_matrix,
    glcm_statistics,
    gram_features,
    hfe,
    hu_moments,
    normalize_embedding,
    proxy_map_stack,
)
from noiselib.images import ImageBuffer


# ---------------------------------------------------------------------------
# oracles


def oracle_glcm(gray, levels, offset):
    """Count co-occurring quantized pairs one pixel at a time."""
    h, w = gray.shape
    dy, dx = offset
    mat = np.zeros((levels, levels))
    for i in range(h):
        for j in range(w):
            i2, j2 = i + dy, j + dx
            if 0 <= i2 < h and 0 <= j2 < w:
                a = min(int(gray[i, j] * levels), levels - 1)
                b = min(int(gray[i2, j2] * levels), levels - 1)
                mat[a, b] += 1.0
                mat[b, a] += 1.0
    return mat / mat.sum()


def oracle_glcm_stats(p):
    levels = p.shape[0]
    contrast = energy = homogeneity = 0.0
    for i in range(levels):
        for j in range(levels):
            contrast += p[i, j] * (i - j) ** 2
            energy += p[i, j] ** 2
            homogeneity += p[i, j] / (1.0 + (i - j) ** 2)
    marginal = [sum(p[i, j] for j in range(levels)) for i in range(levels)]
    mean = sum(i * marginal[i] for i in range(levels))
    var = sum((i - mean) ** 2 * marginal[i] for i in range(levels))
    if var <= 0.0:
        correlation = 1.0
    else:
        cov = sum(p[i, j] * (i - mean) * (j - mean)
                  for i in range(levels) for j in range(levels))
        correlation = cov / var
    return np.array([contrast, correlation, energy, homogeneity])


def oracle_hu(gray):
    """Hu's seven invariants from raw moment sums, explicit loops."""
    h, w = gray.shape

    def m(p, q):
        total = 0.0
        for i in range(h):
            for j in range(w):
                total += (j ** p) * (i ** q) * gray[i, j]
        return total

    m00 = m(0, 0)
    if m00 == 0.0:
        return np.zeros(7)
    cx, cy = m(1, 0) / m00, m(0, 1) / m00

    def eta(p, q):
        total = 0.0
        for i in range(h):
            for j in range(w):
                total += ((j - cx) ** p) * ((i - cy) ** q) * gray[i, j]
        return total / m00 ** (1.0 + (p + q) / 2.0)

    n20, n02, n11 = eta(2, 0), eta(0, 2), eta(1, 1)
    n30, n03, n21, n12 = eta(3, 0), eta(0, 3), eta(2, 1), eta(1, 2)
    a, b = n30 + n12, n21 + n03
    phi = [
        n20 + n02,
        (n20 - n02) ** 2 + 4 * n11 ** 2,
        (n30 - 3 * n12) ** 2 + (3 * n21 - n03) ** 2,
        a ** 2 + b ** 2,
        (n30 - 3 * n12) * a * (a ** 2 - 3 * b ** 2)
        + (3 * n21 - n03) * b * (3 * a ** 2 - b ** 2),
        (n20 - n02) * (a ** 2 - b ** 2) + 4 * n11 * a * b,
        (3 * n21 - n03) * a * (a ** 2 - 3 * b ** 2)
        - (n30 - 3 * n12) * b * (3 * a ** 2 - b ** 2),
    ]
    return np.array([-np.sign(v) * math.log10(abs(v) + 1e-30) for v in phi])


def oracle_srgb_to_lab(r, g, b):
    """Scalar sRGB -> CIELAB (D65), straight from the published formulas."""

    def lin(c):
        return c / 12.92 if c <= 0.04045 else ((c + 0.055) / 1.055) ** 2.4

    rl, gl, bl = lin(r), lin(g), lin(b)
    x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl
    y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl
    z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl

    def f(t):
        return t ** (1.0 / 3.0) if t > (6 / 29) ** 3 else t / (3 * (6 / 29) ** 2) + 4 / 29

    fx, fy, fz = f(x / 0.95047), f(y / 1.0), f(z / 1.08883)
    return 116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)


def oracle_gram(maps):
    n = len(maps)
    npix = maps[0].size
    out = []
    for i in range(n):
        for j in range(i, n):
            total = 0.0
            for a, b in zip(maps[i].ravel(), maps[j].ravel()):
                total += float(a) * float(b)
            out.append(total / npix)
    return np.array(out)


def box_blur3(px):
    """3x3 box blur with edge replication, written only for these tests."""
    padded = np.pad(px, ((1, 1), (1, 1), (0, 0)), mode="edge")
    out = np.zeros_like(px)
    for dy in range(3):
        for dx in range(3):
            out += padded[dy:dy + px.shape[0], dx:dx + px.shape[1]]
    return out / 9.0


def random_image(rng, h=12, w=10):
    return ImageBuffer(rng.random((h, w, 3)))


def checkerboard(h=16, w=16):
    px = np.indices((h, w)).sum(axis=0) % 2
    return ImageBuffer(np.repeat(px[:, :, None], 3, axis=2).astype(np.float64))


# ---------------------------------------------------------------------------
# GLCM


def test_glcm_matrix_matches_pair_count_oracle(rng):
    img = random_image(rng)
    gray = img.grayscale()
    for offset in [(0, 1), (1, 0), (1, 1), (1, -1), (2, -3)]:
        got = glcm_matrix(gray, 8, offset)
        want = oracle_glcm(gray, 8, offset)
        assert np.max(np.abs(got - want)) <= 1e-9


def test_glcm_checkerboard_statistics_are_analytic():
    # Horizontal neighbors always differ, so at 2 levels the GLCM is
    # [[0, .5], [.5, 0]]: contrast 1, correlation -1, energy .5, homogeneity .5.
    img = checkerboard()
    p = glcm_matrix(img.grayscale(), 2, (0, 1))
    assert np.allclose(p, [[0.0, 0.5], [0.5, 0.0]], atol=1e-12)
    stats = glcm_statistics(p)
    assert np.allclose(stats, [1.0, -1.0, 0.5, 0.5], atol=1e-12)


def test_glcm_constant_image():
    img = ImageBuffer(np.full((6, 6, 3), 0.4))
    stats = glcm_statistics(glcm_matrix(img.grayscale(), 16, (0, 1)))
    # Zero contrast, correlation pinned to 1, a single occupied cell.
    assert np.allclose(stats, [0.0, 1.0, 1.0, 1.0], atol=1e-12)


def test_glcm_statistics_match_loop_oracle(rng):
    gray = random_image(rng).grayscale()
    p = glcm_matrix(gray, 6, (1, 1))
    assert np.allclose(glcm_statistics(p), oracle_glcm_stats(p), atol=1e-12)


def test_glcm_features_concatenates_per_offset(rng):
    img = random_image(rng)
    offsets = ((0, 1), (1, 0))
    feats = glcm_features(img, levels=5, offsets=offsets)
    assert feats.shape == (8,)
    gray = img.grayscale()
    for k, off in enumerate(offsets):
        want = glcm_statistics(glcm_matrix(gray, 5, off))
        assert np.allclose(feats[4 * k:4 * k + 4], want, atol=1e-12)


def test_glcm_rejects_bad_parameters():
    img = ImageBuffer(np.zeros((4, 4, 3)))
    with pytest.raises(InvalidParameterError):
        glcm_features(img, levels=1)
    with pytest.raises(InvalidParameterError):
        glcm_matrix(img.grayscale(), 4, (0, 4))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 12))
def test_glcm_is_normalized_and_symmetric(seed, levels):
    gray = np.random.default_rng(seed).random((7, 9))
    p = glcm_matrix(gray, levels, (1, -1))
    assert abs(p.sum() - 1.0) <= 1e-12
    assert np.array_equal(p, p.T)
    assert p.min() >= 0.0


# ---------------------------------------------------------------------------
# Hu moments


def test_hu_moments_match_loop_oracle(rng):
    img = random_image(rng, 9, 11)
    got = hu_moments(img)
    want = oracle_hu(img.grayscale())
    assert np.allclose(got, want, rtol=1e-9, atol=1e-12)


def test_hu_moments_raw_scale(rng):
    img = random_image(rng, 6, 6)
    logged = hu_moments(img)
    raw = hu_moments(img, log_scale=False)
    assert np.allclose(logged, -np.sign(raw) * np.log10(np.abs(raw) + 1e-30))


def test_hu_rotation_invariance(rng):
    img = random_image(rng, 13, 13)
    base = hu_moments(img)
    for k in (1, 2, 3):
        rotated = ImageBuffer(np.rot90(img.pixels, k=k, axes=(0, 1)).copy())
        assert np.max(np.abs(hu_moments(rotated) - base)) <= 1e-6


def test_hu_translation_invariance(rng):
    small = rng.random((5, 6, 3))
    canvases = []
    for oy, ox in [(0, 0), (7, 3), (2, 9)]:
        canvas = np.zeros((20, 20, 3))
        canvas[oy:oy + 5, ox:ox + 6] = small
        canvases.append(hu_moments(ImageBuffer(canvas)))
    assert np.max(np.abs(canvases[1] - canvases[0])) <= 1e-9
    assert np.max(np.abs(canvases[2] - canvases[0])) <= 1e-9


def test_hu_black_image_is_zero_vector():
    assert np.array_equal(hu_moments(ImageBuffer(np.zeros((8, 8, 3)))), np.zeros(7))


# ---------------------------------------------------------------------------
# color


def test_color_features_match_scalar_oracle(rng):
    img = random_image(rng, 8, 7)
    px = img.pixels
    stats = color_features(img)

    sats, vals, labs = [], [], []
    for row in px.reshape(-1, 3):
        _, s, v = colorsys.rgb_to_hsv(*row)
        sats.append(s)
        vals.append(v)
        labs.append(oracle_srgb_to_lab(*row))
    gray = [0.299 * r + 0.587 * g + 0.114 * b for r, g, b in px.reshape(-1, 3)]
    mean_gray = sum(gray) / len(gray)
    contrast = math.sqrt(sum((g - mean_gray) ** 2 for g in gray) / len(gray))

    assert np.allclose(stats.mean_rgb, px.reshape(-1, 3).mean(axis=0), atol=1e-6)
    assert abs(stats.mean_saturation - np.mean(sats)) <= 1e-6
    assert abs(stats.mean_brightness - np.mean(vals)) <= 1e-6
    assert abs(stats.contrast - contrast) <= 1e-6
    assert np.max(np.abs(stats.mean_lab - np.mean(labs, axis=0))) <= 1e-6


def test_color_feature_ranges(rng):
    for _ in range(5):
        stats = color_features(random_image(rng))
        assert 0.0 <= stats.mean_saturation <= 1.0
        assert 0.0 <= stats.mean_brightness <= 1.0
        assert 0.0 <= stats.contrast <= 0.5


def test_color_black_image_has_zero_saturation():
    stats = color_features(ImageBuffer(np.zeros((4, 4, 3))))
    assert stats.mean_saturation == 0.0
    assert stats.mean_brightness == 0.0


def test_color_as_vector_layout(rng):
    stats = color_features(random_image(rng))
    vec = stats.as_vector()
    assert vec.shape == (9,)
    assert np.array_equal(vec[:3], stats.mean_rgb)
    assert vec[3] == stats.mean_saturation
    assert vec[4] == stats.mean_brightness
    assert vec[5] == stats.contrast
    assert np.array_equal(vec[6:], stats.mean_lab)


# ---------------------------------------------------------------------------
# sharpness


def test_hfe_constant_image_is_zero():
    assert hfe(ImageBuffer(np.full((16, 16, 3), 0.7))) == 0.0


def test_hfe_checkerboard_is_nyquist_dominated():
    # All AC power of a checkerboard sits at the Nyquist corner.
    assert hfe(checkerboard()) >= 0.999


def test_hfe_bounds(rng):
    for _ in range(5):
        value = hfe(random_image(rng))
        assert 0.0 <= value <= 1.0


def test_hfe_ignores_brightness_shifts(rng):
    base = rng.random((10, 10, 3)) * 0.5 + 0.1
    shifted = base + 0.3  # stays inside [0, 1]: no clamping confound
    assert abs(hfe(ImageBuffer(base)) - hfe(ImageBuffer(shifted))) <= 1e-9


def test_hfe_decreases_under_blur(rng):
    px = rng.random((14, 14, 3))
    sharp = hfe(ImageBuffer(px))
    blurred = hfe(ImageBuffer(box_blur3(px)))
    assert blurred < sharp


def test_hfe_cutoff_monotone_and_validated(rng):
    img = random_image(rng)
    values = [hfe(img, c) for c in (0.2, 0.5, 0.8)]
    assert values[0] >= values[1] >= values[2]
    for bad in (0.0, 1.0, -0.5):
        with pytest.raises(InvalidParameterError):
            hfe(img, bad)


# ---------------------------------------------------------------------------
# style


def test_gram_features_match_loop_oracle(rng):
    maps = [rng.random((5, 4)) for _ in range(3)]
    got = gram_features(maps)
    want = oracle_gram(maps)
    assert got.shape == (6,)
    assert np.allclose(got, want, atol=1e-12)


def test_gram_upper_triangle_order():
    # Constant maps make every entry the plain product of the two constants.
    maps = [np.full((2, 2), 2.0), np.full((2, 2), 3.0), np.full((2, 2), 5.0)]
    assert np.allclose(gram_features(maps), [4.0, 6.0, 10.0, 9.0, 15.0, 25.0])


def test_gram_matrix_is_positive_semidefinite(rng):
    maps = [rng.standard_normal((6, 6)) for _ in range(4)]
    tri = gram_features(maps)
    full = np.zeros((4, 4))
    full[np.triu_indices(4)] = tri
    full = full + full.T - np.diag(np.diag(full))
    assert np.linalg.eigvalsh(full).min() >= -1e-9


def test_gram_rejects_mismatched_maps(rng):
    with pytest.raises(ShapeMismatchError):
        gram_features([rng.random((3, 3)), rng.random((3, 4))])
    with pytest.raises(InvalidParameterError):
        gram_features([])


def test_proxy_map_stack_contents(rng):
    img = random_image(rng)
    maps = proxy_map_stack(img)
    assert len(maps) == 6
    for m in maps:
        assert m.shape == img.grayscale().shape
    for c in range(3):
        assert np.array_equal(maps[c], img.pixels[..., c])
    assert np.allclose(maps[3], img.grayscale())
    assert maps[4].min() >= 0.0 and maps[5].min() >= 0.0


# ---------------------------------------------------------------------------
# semantic


def test_normalize_embedding_unit_norm(rng):
    v = rng.standard_normal(33)
    unit = normalize_embedding(v)
    assert abs(np.linalg.norm(unit) - 1.0) <= 1e-12
    assert np.allclose(unit, v / np.linalg.norm(v))
    # Idempotent on an already-unit vector.
    assert np.allclose(normalize_embedding(unit), unit, atol=1e-15)


def test_normalize_embedding_rejects_degenerate_input():
    with pytest.raises(InvalidParameterError):
        normalize_embedding(np.zeros(4))
    with pytest.raises(InvalidParameterError):
        normalize_embedding(np.array([1.0, np.nan]))
    with pytest.raises(InvalidParameterError):
        normalize_embedding(np.array([np.inf, 0.0]))


# ---------------------------------------------------------------------------
# record and config plumbing


def full_record(rng, noise_id=3):
    img = random_image(rng)
    sem = normalize_embedding(rng.standard_normal(8)).astype(np.float32)
    return FeatureRecord(
        noise_id=noise_id,
        color=color_features(img),
        texture=glcm_features(img, levels=4, offsets=((0, 1),)),
        shape=hu_moments(img),
        sharpness=hfe(img),
        style_gram=gram_features(proxy_map_stack(img)),
        semantic=sem,
    )


def test_feature_record_json_round_trip(rng):
    rec = full_record(rng)
    back = FeatureRecord.from_json_dict(rec.to_json_dict())
    assert back.noise_id == rec.noise_id
    assert np.array_equal(back.texture, rec.texture)
    assert np.array_equal(back.shape, rec.shape)
    assert back.sharpness == rec.sharpness
    assert np.array_equal(back.style_gram, rec.style_gram)
    # float32 embeddings survive the float repr round trip bit for bit
    assert back.semantic.dtype == np.float32
    assert np.array_equal(back.semantic.view(np.uint32),
                          rec.semantic.view(np.uint32))
    assert np.array_equal(back.color.as_vector(), rec.color.as_vector())


def test_feature_record_omits_absent_kinds():
    rec = FeatureRecord(noise_id=0, sharpness=0.25)
    obj = rec.to_json_dict()
    assert set(obj) == {"noise_id", "sharpness"}
    back = FeatureRecord.from_json_dict(obj)
    assert back.color is None and back.semantic is None
    assert back.sharpness == 0.25


def test_feature_values_paths(rng):
    rec = full_record(rng)
    assert np.array_equal(rec.feature_values("semantic"),
                          rec.semantic.astype(np.float64))
    assert np.array_equal(rec.feature_values("style"), rec.style_gram)
    assert np.array_equal(rec.feature_values("texture"), rec.texture)
    assert np.array_equal(rec.feature_values("shape"), rec.shape)
    assert rec.feature_values("sharpness") == rec.sharpness
    assert np.array_equal(rec.feature_values("color"), rec.color.as_vector())
    assert np.array_equal(rec.feature_values("color.mean_rgb"), rec.color.mean_rgb)
    assert rec.feature_values("color.mean_rgb.0") == rec.color.mean_rgb[0]
    assert rec.feature_values("color.contrast") == rec.color.contrast
    assert rec.feature_values("shape.6") == rec.shape[6]
    assert rec.feature_values("semantic.2") == float(rec.semantic[2])


def test_feature_values_errors(rng):
    rec = full_record(rng)
    with pytest.raises(InvalidParameterError):
        rec.feature_values("edges")
    with pytest.raises(InvalidParameterError):
        rec.feature_values("color.hue")
    with pytest.raises(InvalidParameterError):
        rec.feature_values("shape.99")
    with pytest.raises(InvalidParameterError):
        rec.feature_values("shape.x")
    bare = FeatureRecord(noise_id=1)
    with pytest.raises(InvalidParameterError):
        bare.feature_values("semantic")


def test_feature_config_round_trip_and_validation():
    cfg = FeatureConfig(kinds=("color", "sharpness"), semantic_dim=16,
                        glcm_levels=8, glcm_offsets=((0, 1), (2, 2)),
                        hfe_cutoff=0.3, style_maps="proxy")
    back = FeatureConfig.from_json_dict(cfg.to_json_dict())
    assert back == cfg
    assert FeatureConfig.from_json_dict({}) == FeatureConfig()
    with pytest.raises(InvalidParameterError):
        FeatureConfig(kinds=("color", "spectral"))


def test_extract_all_respects_kinds(rng):
    img = random_image(rng)
    rec = extract_all(img, FeatureConfig(kinds=("color", "sharpness")))
    assert rec.color is not None and rec.sharpness is not None
    assert rec.texture is None and rec.shape is None
    assert rec.style_gram is None and rec.semantic is None

    full = extract_all(img, FeatureConfig(), noise_id=7)
    assert full.noise_id == 7
    for field in ("color", "texture", "shape", "sharpness", "style_gram"):
        assert getattr(full, field) is not None


def test_extract_all_semantic_handling(rng):
    img = random_image(rng)
    raw = rng.standard_normal(12) * 5.0
    rec = extract_all(img, FeatureConfig(kinds=("color",), semantic_dim=12),
                      external_semantic=raw)
    assert rec.semantic.dtype == np.float32
    assert abs(np.linalg.norm(rec.semantic.astype(np.float64)) - 1.0) <= 1e-6
    with pytest.raises(ShapeMismatchError):
        extract_all(img, FeatureConfig(kinds=("color",), semantic_dim=8),
                    external_semantic=raw)


# ---------------------------------------------------------------------------
# property tests


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_hu_invariants_stable_under_rot90_property(seed):
    px = np.random.default_rng(seed).random((8, 8, 3))
    base = hu_moments(ImageBuffer(px))
    rotated = hu_moments(ImageBuffer(np.rot90(px, axes=(0, 1)).copy()))
    assert np.max(np.abs(rotated - base)) <= 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.05, 0.95))
def test_hfe_bounded_property(seed, cutoff):
    img = ImageBuffer(np.random.default_rng(seed).random((9, 7, 3)))
    value = hfe(img, cutoff)
    assert 0.0 <= value <= 1.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_gram_diagonal_dominates_property(seed):
    # Cauchy-Schwarz: G[i,j]^2 <= G[i,i] * G[j,j].
    rng = np.random.default_rng(seed)
    maps = [rng.standard_normal((4, 5)) for _ in range(3)]
    tri = gram_features(maps)
    full = np.zeros((3, 3))
    full[np.triu_indices(3)] = tri
    full = full + full.T - np.diag(np.diag(full))
    for i in range(3):
        for j in range(3):
            assert full[i, j] ** 2 <= full[i, i] * full[j, j] + 1e-12
