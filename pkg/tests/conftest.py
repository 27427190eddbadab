import numpy as np
import pytest

from noiselib import FeatureConfig, FeatureRecord, NoiseLibrary


def fabricate_library(n, dim=None, rng=None, sharpness=False, shape_vec=False,
                      style=False, color=False):
    """In-memory library with random feature records and trivial noise.

    Keeps query/kernel tests independent of the (slower) posterior build
    path; the noise tensors are degenerate (1,1,1) zeros.
    """
    rng = rng or np.random.default_rng(0)
    records = []
    for i in range(n):
        rec = FeatureRecord(noise_id=i)
        if dim is not None:
            v = rng.standard_normal(dim)
            rec.semantic = (v / np.linalg.norm(v)).astype(np.float32)
        if sharpness:
            rec.sharpness = float(rng.uniform(0.0, 1.0))
        if shape_vec:
            rec.shape = rng.standard_normal(7)
        if style:
            rec.style_gram = rng.standard_normal(21)
        if color:
            from noiselib import ColorStats

            rgb = rng.uniform(0.0, 1.0, 3)
            lab = rng.uniform(-20.0, 80.0, 3)
            rec.color = ColorStats(
                mean_rgb=rgb, mean_saturation=float(rng.uniform(0, 1)),
                mean_brightness=float(rng.uniform(0, 1)),
                contrast=float(rng.uniform(0, 0.5)), mean_lab=lab)
        records.append(rec)
    config = FeatureConfig(semantic_dim=dim)
    return NoiseLibrary(master_seed=0, noise_shape=(1, 1, 1),
                        feature_config=config, records=records,
                        noise=np.zeros((n, 1, 1, 1), dtype=np.float32))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
