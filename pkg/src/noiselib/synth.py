"""Synthetic generative posteriors and the linear toy denoiser.

The posterior producer is a deterministic stand-in for a diffusion model:
it turns a noise tensor into an RGB image whose channel means are, by
construction, strictly increasing in the corresponding noise-channel
means. That engineered coupling is what makes end-to-end retrieval
testable with an analytic oracle.

The blur used throughout is a truncated-at-3-sigma separable Gaussian over
a symmetrically mirrored border. Mirror padding with a symmetric kernel
conserves the array mean exactly (the shifted window sums pair up as
S_j + S_{-j} = 2*S_0), which keeps the noise-to-color coupling strictly
monotone rather than monotone-up-to-border-noise.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .images import ImageBuffer
from .schedule import ScheduleSpec

_GAUSS_ID = re.compile(r"^gauss\((\d+(?:\.\d+)?)\)$")


@dataclass(frozen=True)
class SynthConfig:
    blur_sigma: float = 4.0
    color_gain: float = 0.5
    output_size: tuple | None = None  # (h, w); defaults to the noise spatial size

    def __post_init__(self):
        if self.blur_sigma <= 0.0:
            raise InvalidParameterError(f"blur_sigma must be > 0, got {self.blur_sigma}")
        if self.output_size is not None and min(self.output_size) < 1:
            raise InvalidParameterError(f"output_size must be >= (1,1), got {self.output_size}")


def _convolve_axis(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = len(kernel) // 2
    if radius == 0:
        return arr * kernel[0]
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(arr, pad, mode="symmetric")
    moved = np.moveaxis(padded, axis, -1)
    out = np.apply_along_axis(lambda v: np.convolve(v, kernel, mode="valid"), -1, moved)
    return np.moveaxis(out, -1, axis)


def gaussian_blur(arr: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur on the last two axes, mirrored borders."""
    if sigma <= 0.0:
        raise InvalidParameterError(f"sigma must be > 0, got {sigma}")
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    kernel /= kernel.sum()
    out = np.asarray(arr, dtype=np.float64)
    out = _convolve_axis(out, kernel, out.ndim - 2)
    return _convolve_axis(out, kernel, out.ndim - 1)


def box_blur3(arr: np.ndarray) -> np.ndarray:
    """3x3 box average on the last two axes, mirrored borders."""
    kernel = np.full(3, 1.0 / 3.0)
    out = np.asarray(arr, dtype=np.float64)
    out = _convolve_axis(out, kernel, out.ndim - 2)
    return _convolve_axis(out, kernel, out.ndim - 1)


def synth_posterior(eps, cfg: SynthConfig = SynthConfig()) -> ImageBuffer:
    """Deterministic posterior image for a noise tensor.

    Per color channel c of the first three noise channels:
      pixel = clamp(0.5 + color_gain * mean(eps[c]) + 0.25 * blur(eps[c]), 0, 1)
    """
    values = np.asarray(getattr(eps, "values", eps), dtype=np.float64)
    if values.ndim != 3 or values.shape[0] < 3:
        raise InvalidParameterError(
            f"need a (c, h, w) tensor with at least 3 channels, got {values.shape}")
    planes = []
    for c in range(3):
        chan = values[c]
        field = 0.5 + cfg.color_gain * chan.mean() + 0.25 * gaussian_blur(chan, cfg.blur_sigma)
        planes.append(field)
    img = np.stack(planes, axis=-1)
    if cfg.output_size is not None and tuple(cfg.output_size) != img.shape[:2]:
        oh, ow = cfg.output_size
        ys = np.minimum((np.arange(oh) * img.shape[0] // oh), img.shape[0] - 1)
        xs = np.minimum((np.arange(ow) * img.shape[1] // ow), img.shape[1] - 1)
        img = img[np.ix_(ys, xs)]
    return ImageBuffer(np.clip(img, 0.0, 1.0), provenance="synthetic")


@dataclass(frozen=True)
class ToyDenoiser:
    """eps_hat(x, t) = (x - sqrt(a_t) * P(x)) / sqrt(1 - a_t) for a fixed
    linear smoothing operator P. Linear in x, so every DDIM step against it
    is an exactly invertible linear map."""

    schedule: ScheduleSpec
    smoothing: str

    def _smooth(self, x: np.ndarray) -> np.ndarray:
        if self.smoothing == "identity":
            return x
        if self.smoothing == "box3":
            return box_blur3(x)
        m = _GAUSS_ID.match(self.smoothing)
        if m:
            return gaussian_blur(x, float(m.group(1)))
        raise InvalidParameterError(f"unknown smoothing {self.smoothing!r}")

    def predict(self, x_t: np.ndarray, t: int) -> np.ndarray:
        x_t = np.asarray(x_t, dtype=np.float64)
        a = self.schedule.alphas_cumprod[t]
        return (x_t - np.sqrt(a) * self._smooth(x_t)) / np.sqrt(1.0 - a)


def toy_denoiser(schedule: ScheduleSpec, smoothing: str = "identity") -> ToyDenoiser:
    """Validate the smoothing id and build the denoiser."""
    probe = ToyDenoiser(schedule, smoothing)
    probe._smooth(np.zeros((2, 2)))  # rejects unknown ids eagerly
    return probe
