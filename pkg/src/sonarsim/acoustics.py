"""Sea-water absorption (Ainslie & McColm) and its application to echoes."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .rasterizer import ReflectionImage
from .scene import InvalidParameterError

# Np/km per dB/km used by the decay model: ln(10) / 200 = 0.0115129...
# The usual amplitude conversion is ln(10) / 20 (0.115 Np per dB); the model's
# gamma = 0.0115 alpha is ten times smaller and the numbers below keep to it.
DB_TO_NEPER = np.log(10.0) / 200.0


@dataclass(frozen=True)
class WaterProperties:
    temperature: float = 15.0  # deg C
    salinity: float = 35.0     # ppt
    ph: float = 8.0
    depth: float = 0.0         # km

    def __post_init__(self):
        if self.salinity < 0:
            raise InvalidParameterError("salinity must be >= 0")
        if self.depth < 0:
            raise InvalidParameterError("depth must be >= 0")
        if not 0.0 <= self.ph <= 14.0:
            raise InvalidParameterError("pH must lie in [0, 14]")


@dataclass(frozen=True)
class AttenuationBreakdown:
    alpha_boric: float      # dB/km
    alpha_magnesium: float  # dB/km
    alpha_fresh: float      # dB/km
    alpha_total: float      # dB/km
    f1: float               # kHz, boric acid relaxation
    f2: float               # kHz, magnesium sulphate relaxation
    gamma: float            # Np/km


def boric_relaxation_frequency(water: WaterProperties) -> float:
    return 0.78 * np.sqrt(water.salinity / 35.0) * np.exp(water.temperature / 26.0)


def magnesium_relaxation_frequency(water: WaterProperties) -> float:
    return 42.0 * np.exp(water.temperature / 17.0)


def attenuation_coefficient(frequency: float, water: WaterProperties) -> AttenuationBreakdown:
    """Absorption in dB/km at ``frequency`` kHz, split by mechanism."""
    if not frequency > 0:
        raise InvalidParameterError(f"frequency must be positive, got {frequency}")
    f = float(frequency)
    t, s, z = water.temperature, water.salinity, water.depth
    f1 = boric_relaxation_frequency(water)
    f2 = magnesium_relaxation_frequency(water)
    f_sq = f * f
    alpha_b = 0.106 * (f1 * f_sq / (f_sq + f1 * f1)) * np.exp((water.ph - 8.0) / 0.56)
    alpha_m = (0.52 * (1.0 + t / 43.0) * (s / 35.0)
               * (f2 * f_sq / (f_sq + f2 * f2)) * np.exp(-z / 6.0))
    alpha_f = 0.00049 * f_sq * np.exp(-(t / 27.0 + z / 17.0))
    alpha = alpha_b + alpha_m + alpha_f
    return AttenuationBreakdown(
        float(alpha_b), float(alpha_m), float(alpha_f), float(alpha),
        float(f1), float(f2), float(db_to_neper(alpha)),
    )


def db_to_neper(alpha):
    return np.multiply(alpha, DB_TO_NEPER)


def attenuation_factor(distance_m, gamma: float):
    """Two-way intensity factor ``exp(-2 gamma d)``, ``d`` in meters, ``gamma`` in Np/km."""
    d_km = np.asarray(distance_m, dtype=np.float64) / 1000.0
    with np.errstate(invalid="ignore"):
        return np.exp(-2.0 * gamma * d_km)


def apply_attenuation(image: ReflectionImage, gamma: float) -> ReflectionImage:
    """Scale every sample's intensity by ``exp(-2 gamma d)`` at its own distance."""
    if gamma < 0:
        raise InvalidParameterError("gamma must be >= 0")
    if gamma == 0:
        return replace(image)

    def decay(dist, inten):
        out = inten.copy()
        m = np.isfinite(dist)
        out[m] = inten[m] * attenuation_factor(dist[m], gamma)
        return out

    sec_i = image.secondary_intensity
    if sec_i is not None:
        sec_i = decay(image.secondary_distance, sec_i)
    return replace(image, intensity=decay(image.distance, image.intensity), secondary_intensity=sec_i)
