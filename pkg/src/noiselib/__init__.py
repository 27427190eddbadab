"""noiselib: goal-driven retrieval over libraries of seeded Gaussian noise.

Build a library of noise tensors keyed by features of their generative
posteriors, then at query time pick the noise whose features best match
a goal — by semantics, color, texture, shape, sharpness, or style, or a
staged combination. Also ships the diffusion-schedule analysis and the
DDIM sample/invert machinery behind the noise-offset procedure.
"""

from .errors import (
    FormatError,
    IngestError,
    InvalidParameterError,
    NoiselibError,
    QueryError,
    ShapeMismatchError,
)
from .features import (
    ColorStats,
    FeatureConfig,
    FeatureRecord,
    color_features,
    extract_all,
    glcm_features,
    gram_features,
    hfe,
    hu_moments,
    normalize_embedding,
    proxy_map_stack,
)
from .images import ImageBuffer, read_image, write_ppm
from .kernels import BACKEND as KERNEL_BACKEND
from .library import (
    NoiseLibrary,
    NoiseTensor,
    build_library,
    ingest_records,
    load_library,
    sample_noise,
    save_library,
)
from .query import (
    GoalSpec,
    GoalStage,
    bench_retrieval,
    load_goal,
    match_score,
    parse_goal,
    progressive_rerank,
    select_best,
    top_k,
)
from .schedule import (
    ScheduleSpec,
    apply_color_adjustment,
    build_schedule,
    ddim_invert,
    ddim_sample,
    ddim_timesteps,
    forward_diffuse,
    noise_offset,
    residual_signal_coefficient,
)
from .synth import SynthConfig, synth_posterior, toy_denoiser

__version__ = "0.1.0"

__all__ = [
    "ColorStats",
    "FeatureConfig",
    "FeatureRecord",
    "FormatError",
    "GoalSpec",
    "GoalStage",
    "ImageBuffer",
    "IngestError",
    "InvalidParameterError",
    "KERNEL_BACKEND",
    "NoiseLibrary",
    "NoiseTensor",
    "NoiselibError",
    "QueryError",
    "ScheduleSpec",
    "ShapeMismatchError",
    "SynthConfig",
    "apply_color_adjustment",
    "bench_retrieval",
    "build_library",
    "build_schedule",
    "color_features",
    "ddim_invert",
    "ddim_sample",
    "ddim_timesteps",
    "extract_all",
    "forward_diffuse",
    "glcm_features",
    "gram_features",
    "hfe",
    "hu_moments",
    "ingest_records",
    "load_goal",
    "load_library",
    "match_score",
    "noise_offset",
    "normalize_embedding",
    "parse_goal",
    "progressive_rerank",
    "proxy_map_stack",
    "read_image",
    "sample_noise",
    "save_library",
    "select_best",
    "synth_posterior",
    "top_k",
    "toy_denoiser",
    "write_ppm",
]
