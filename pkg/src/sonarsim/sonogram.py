"""Shader image to sonar data: beams, range bins, normalization and noise.

Polar frames are stored beam-major: ``intensities[beam, bin]``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from . import rng
from .acoustics import WaterProperties
from .rasterizer import ReflectionImage
from .scene import InvalidParameterError

_SPECKLE_TAG = 0x7370636B


@dataclass(frozen=True)
class NoiseParams:
    sigma_mult: float = 0.0
    sigma_add: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_mult < 0 or self.sigma_add < 0:
            raise InvalidParameterError("noise standard deviations must be >= 0")

    @property
    def enabled(self) -> bool:
        return self.sigma_mult > 0 or self.sigma_add > 0


@dataclass(frozen=True)
class SigmoidParams:
    gain: float = 12.0
    center: float = 0.5

    def __post_init__(self):
        if not self.gain > 0:
            raise InvalidParameterError("sigmoid gain must be > 0")

    def __call__(self, i):
        return 1.0 / (1.0 + np.exp(-self.gain * (np.asarray(i, dtype=np.float64) - self.center)))


@dataclass
class SonarConfig:
    device: str = "FLS"
    n_beams: int = 128
    n_bins: int = 500
    fov_azimuth: float = math.radians(120.0)
    fov_elevation: float = math.radians(20.0)
    range_min: float = 0.5
    range_max: float = 30.0
    frequency: float = 700.0  # kHz
    water: WaterProperties = field(default_factory=WaterProperties)
    noise: NoiseParams = field(default_factory=lambda: NoiseParams(0.1, 0.01))
    sigmoid: SigmoidParams = field(default_factory=SigmoidParams)
    msis_step: float = math.radians(1.8)
    position: tuple = (0.0, 0.0, 0.0)
    orientation_deg: tuple = (0.0, 0.0, 0.0)  # roll, pitch, yaw
    image_width: int | None = None
    image_height: int | None = None
    secondary: bool = True
    attenuation: bool = True
    roughness: bool = True
    alpha: float | None = None  # dB/km; overrides the water model when set

    def __post_init__(self):
        self.device = str(self.device).upper()
        if self.device not in ("FLS", "MSIS"):
            raise InvalidParameterError(f"unknown device {self.device!r}")
        if self.n_beams < 1 or self.n_bins < 1:
            raise InvalidParameterError("n_beams and n_bins must be >= 1")
        if self.device == "MSIS" and self.n_beams != 1:
            raise InvalidParameterError("an MSIS head has exactly one beam")
        if not 0.0 < self.range_min < self.range_max:
            raise InvalidParameterError("need 0 < range_min < range_max")
        if not self.frequency > 0:
            raise InvalidParameterError("frequency must be > 0")
        if not 0 < self.msis_step <= 2 * math.pi + 1e-12:
            raise InvalidParameterError("msis_step must lie in (0, 2 pi]")
        if self.alpha is not None and not self.alpha >= 0:
            raise InvalidParameterError("alpha must be >= 0")

    @property
    def bin_width(self) -> float:
        return (self.range_max - self.range_min) / self.n_bins

    @property
    def shader_size(self) -> tuple[int, int]:
        """(width, height) of the render target.

        Width defaults to two columns per beam; height keeps square pixels
        on the image plane.
        """
        w = self.image_width or 2 * self.n_beams
        if self.image_height:
            return w, self.image_height
        ratio = math.tan(self.fov_elevation / 2) / math.tan(self.fov_azimuth / 2)
        return w, max(1, int(round(w * ratio)))


@dataclass
class SonarFrame:
    intensities: np.ndarray  # (n_beams, n_bins) in [0, 1]
    bearings: np.ndarray     # (n_beams,) radians, strictly increasing
    range_min: float
    range_max: float
    device: str = "FLS"
    fov_azimuth: float = 0.0
    fov_elevation: float = 0.0
    frequency: float = 0.0
    timestamp: float = 0.0
    index: int = 0

    @property
    def n_beams(self) -> int:
        return self.intensities.shape[0]

    @property
    def n_bins(self) -> int:
        return self.intensities.shape[1]

    @property
    def bin_width(self) -> float:
        return (self.range_max - self.range_min) / self.n_bins

    def bin_centers(self) -> np.ndarray:
        return self.range_min + (np.arange(self.n_bins) + 0.5) * self.bin_width


@dataclass
class AcousticImage:
    pixels: np.ndarray               # (height, width)
    origin: tuple[float, float]      # sonar head in pixel coordinates (x, y)
    meters_per_pixel: float
    background: float = 0.0


def beam_sections(image_width: int, n_beams: int) -> list[tuple[int, int]]:
    """Split columns into ``n_beams`` contiguous ``[start, stop)`` ranges.

    The first ``image_width % n_beams`` sections get one extra column.
    """
    if n_beams < 1 or image_width < n_beams:
        raise InvalidParameterError(f"cannot split {image_width} columns into {n_beams} beams")
    base, extra = divmod(image_width, n_beams)
    out, start = [], 0
    for b in range(n_beams):
        stop = start + base + (1 if b < extra else 0)
        out.append((start, stop))
        start = stop
    return out


def column_to_beam(image_width: int, n_beams: int) -> np.ndarray:
    beam = np.empty(image_width, dtype=np.int64)
    for b, (s, e) in enumerate(beam_sections(image_width, n_beams)):
        beam[s:e] = b
    return beam


def bin_indices(distance, n_bins: int, range_min: float, range_max: float) -> np.ndarray:
    """Bin index per distance, ``-1`` outside ``[range_min, range_max]``."""
    if not range_min < range_max:
        raise InvalidParameterError("need range_min < range_max")
    d = np.asarray(distance, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        idx = np.floor((d - range_min) / (range_max - range_min) * n_bins)
    inside = (d >= range_min) & (d <= range_max)
    idx = np.where(inside, np.minimum(np.nan_to_num(idx), n_bins - 1), -1)
    return idx.astype(np.int64)


def distance_histogram(samples, n_bins: int, range_min: float, range_max: float) -> list[np.ndarray]:
    """Group ``(distance, intensity)`` pairs into per-bin intensity lists."""
    samples = np.asarray(samples, dtype=np.float64).reshape(-1, 2)
    idx = bin_indices(samples[:, 0], n_bins, range_min, range_max)
    return [samples[idx == b, 1] for b in range(n_bins)]


def energy_normalization(bin_samples, sigmoid: SigmoidParams = SigmoidParams()) -> float:
    """Mean sigmoid response of a bin's echo intensities; 0 for an empty bin."""
    s = np.asarray(bin_samples, dtype=np.float64)
    if s.size == 0:
        return 0.0
    return float(np.mean(sigmoid(s)))


def _speckle_rows(intensity: np.ndarray, beams: np.ndarray, n_bins: int,
                  noise: NoiseParams, key: int) -> np.ndarray:
    bins = np.arange(n_bins)
    counters = beams[:, None].astype(np.uint64) * np.uint64(n_bins) + bins[None, :].astype(np.uint64)
    spread = noise.sigma_mult * (0.5 + bins / n_bins)
    out = intensity.copy()
    if noise.sigma_mult > 0:
        out = out * (1.0 + spread[None, :] * rng.normals(key, counters, 0))
    if noise.sigma_add > 0:
        out = out + noise.sigma_add * rng.normals(key, counters, 1)
    return np.clip(out, 0.0, 1.0)


def apply_speckle(frame: SonarFrame, noise: NoiseParams, workers: int = 1) -> SonarFrame:
    """Multiplicative plus additive Gaussian noise, clamped to [0, 1].

    The multiplicative spread grows linearly with range from 0.5 to 1.5 times
    ``sigma_mult``.  Draws depend only on (seed, frame index, beam, bin).
    """
    if not noise.enabled:
        return replace(frame, intensities=frame.intensities.copy())
    key = rng.stream_key(noise.seed, frame.index, _SPECKLE_TAG)
    beams = np.arange(frame.n_beams)
    if workers <= 1:
        out = _speckle_rows(frame.intensities, beams, frame.n_bins, noise, key)
    else:
        chunks = np.array_split(beams, workers)
        out = np.empty_like(frame.intensities)
        with ThreadPoolExecutor(workers) as pool:
            parts = pool.map(lambda c: _speckle_rows(frame.intensities[c], c, frame.n_bins, noise, key), chunks)
            for c, part in zip(chunks, parts):
                out[c] = part
    return replace(frame, intensities=out)


def beam_bearings(image_width: int, n_beams: int, fov_azimuth: float) -> np.ndarray:
    """Azimuth of each beam section's center column edge (pinhole mapping)."""
    tan_h = math.tan(fov_azimuth / 2)
    centers = np.array([(s + e) / 2.0 for s, e in beam_sections(image_width, n_beams)])
    return np.arctan(tan_h * (2.0 * centers / image_width - 1.0))


def bin_frame(shader: ReflectionImage, config: SonarConfig):
    """Histogram and normalize the shader samples; returns (intensities, assigned, discarded)."""
    h, w = shader.shape
    col, dist, inten = shader.samples()
    beam = column_to_beam(w, config.n_beams)[col]
    b = bin_indices(dist, config.n_bins, config.range_min, config.range_max)
    ok = b >= 0
    cell = beam[ok] * config.n_bins + b[ok]
    size = config.n_beams * config.n_bins
    total = np.bincount(cell, weights=config.sigmoid(inten[ok]), minlength=size)
    count = np.bincount(cell, minlength=size)
    out = np.zeros(size)
    nz = count > 0
    out[nz] = total[nz] / count[nz]
    return out.reshape(config.n_beams, config.n_bins), int(ok.sum()), int((~ok).sum())


def build_frame(shader: ReflectionImage, config: SonarConfig, index: int = 0,
                timestamp: float = 0.0, workers: int = 1) -> SonarFrame:
    h, w = shader.shape
    if w < config.n_beams:
        raise InvalidParameterError(f"shader width {w} smaller than beam count {config.n_beams}")
    if (w, h) != config.shader_size:
        raise InvalidParameterError(f"shader size {(w, h)} does not match config {config.shader_size}")
    intensities, _, _ = bin_frame(shader, config)
    frame = SonarFrame(
        intensities,
        beam_bearings(w, config.n_beams, config.fov_azimuth),
        config.range_min,
        config.range_max,
        config.device,
        config.fov_azimuth,
        config.fov_elevation,
        config.frequency,
        timestamp,
        index,
    )
    return apply_speckle(frame, config.noise, workers)


def msis_slot_count(step: float) -> int:
    return max(1, math.ceil(2 * math.pi / step - 1e-9))


def accumulate_msis_scan(frames, step: float, mosaic: SonarFrame | None = None) -> SonarFrame:
    """Place single-beam frames into a 360 degree polar mosaic.

    Slot ``k`` covers head bearing ``k * step``; when ``step`` does not divide
    a full turn the last slot is narrower.  Later frames overwrite earlier ones.
    """
    frames = list(frames)
    n_slots = msis_slot_count(step)
    if mosaic is None:
        if not frames:
            raise InvalidParameterError("no frames to accumulate")
        f0 = frames[0]
        mosaic = SonarFrame(
            np.zeros((n_slots, f0.n_bins)),
            np.arange(n_slots) * step,
            f0.range_min, f0.range_max, "MSIS",
            2 * math.pi, f0.fov_elevation, f0.frequency, f0.timestamp, f0.index,
        )
    for f in frames:
        if f.n_beams != 1:
            raise InvalidParameterError("MSIS frames carry exactly one beam")
        if f.n_bins != mosaic.n_bins:
            raise InvalidParameterError("bin count changed during the scan")
        bearing = float(f.bearings[0]) % (2 * math.pi)
        slot = int(round(bearing / step)) % n_slots
        mosaic.intensities[slot] = f.intensities[0]
        mosaic.timestamp = f.timestamp
    return mosaic


def _fan_geometry(frame: SonarFrame):
    span = frame.bearings[-1] - frame.bearings[0]
    if frame.n_beams > 1:
        half = span / (frame.n_beams - 1) / 2
    else:
        half = frame.fov_azimuth / 2
    lo, hi = frame.bearings[0] - half, frame.bearings[-1] + half
    full = hi - lo >= 2 * math.pi - 1e-9
    return lo, hi, full


def frame_to_cartesian(frame: SonarFrame, out_width: int, out_height: int,
                       background: float = 0.0) -> AcousticImage:
    """Fan-shaped Cartesian rendering of a polar frame (bilinear interpolation).

    The sonar head sits at the bottom center for sectors narrower than a half
    turn, else at the image center.  Forward is up and positive bearings
    (port) are to the left.
    """
    lo, hi, full = _fan_geometry(frame)
    rmax = frame.range_max
    if full or hi - lo > math.pi:
        extent_x, extent_y = 2 * rmax, 2 * rmax
        origin = (out_width / 2.0, out_height / 2.0)
    else:
        lateral = rmax * max(abs(math.sin(lo)), abs(math.sin(hi)), 0.0)
        if hi > math.pi / 2 or lo < -math.pi / 2:
            lateral = rmax
        extent_x, extent_y = 2 * lateral, rmax
        origin = (out_width / 2.0, float(out_height))
    mpp = max(extent_x / out_width, extent_y / out_height)

    bearings = frame.bearings.astype(np.float64)
    data = frame.intensities.astype(np.float64)
    if full:
        bearings = np.concatenate([bearings, [bearings[0] + 2 * math.pi]])
        data = np.vstack([data, data[:1]])
    pixels = np.empty((out_height, out_width))
    _fan_kernel(pixels, origin[0], origin[1], mpp, bearings, np.ascontiguousarray(data),
                frame.range_min, rmax, frame.bin_width, lo, hi, full, background)
    return AcousticImage(pixels, origin, mpp, background)


@njit(cache=True)
def _fan_kernel(pixels, ox, oy, mpp, bearings, data, rmin, rmax, bin_width, lo, hi, full,
                background):
    n_b = bearings.shape[0]
    n_k = data.shape[1]
    two_pi = 2.0 * np.pi
    for py in range(pixels.shape[0]):
        fwd = (oy - (py + 0.5)) * mpp
        for px in range(pixels.shape[1]):
            right = (px + 0.5 - ox) * mpp
            r = np.sqrt(fwd * fwd + right * right)
            theta = np.arctan2(-right, fwd)
            if full:
                theta = (theta - bearings[0]) % two_pi + bearings[0]
            elif theta < lo or theta > hi:
                pixels[py, px] = background
                continue
            if r < rmin or r > rmax:
                pixels[py, px] = background
                continue
            # fractional beam index, clamped at the fan edges
            j = np.searchsorted(bearings, theta)
            if j <= 0:
                b0, b1, wb = 0, 0, 0.0
            elif j >= n_b:
                b0, b1, wb = n_b - 1, n_b - 1, 0.0
            else:
                b0, b1 = j - 1, j
                wb = (theta - bearings[b0]) / (bearings[b1] - bearings[b0])
            kf = (r - rmin) / bin_width - 0.5
            if kf < 0.0:
                kf = 0.0
            if kf > n_k - 1:
                kf = n_k - 1.0
            k0 = int(kf)
            k1 = min(k0 + 1, n_k - 1)
            wk = kf - k0
            pixels[py, px] = ((1.0 - wb) * ((1.0 - wk) * data[b0, k0] + wk * data[b0, k1])
                              + wb * ((1.0 - wk) * data[b1, k0] + wk * data[b1, k1]))
