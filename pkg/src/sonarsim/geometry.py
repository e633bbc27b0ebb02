"""Coordinate conversions of the sonar projection.

The sonar frame uses ``x`` forward, ``y`` to port (positive azimuth) and
``z`` up.  Elevation ``phi`` is measured from the ``+z`` axis, so points on
the zero-elevation plane have ``phi = pi/2``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class SphericalPoint(NamedTuple):
    r: float
    theta: float
    phi: float


class PolarPoint(NamedTuple):
    r: float
    theta: float


def cartesian_to_spherical(p) -> SphericalPoint:
    """Convert a Cartesian point to (range, azimuth, elevation).

    The origin maps to ``(0, 0, 0)`` so empty pixels pass through silently.
    """
    x, y, z = (float(c) for c in p)
    rho = float(np.hypot(x, y))
    r = float(np.hypot(rho, z))  # nested hypot avoids under/overflow of the squares
    if r == 0.0:
        return SphericalPoint(0.0, 0.0, 0.0)
    theta = float(np.arctan2(y, x))
    phi = float(np.arctan2(rho, z))
    return SphericalPoint(r, theta, phi)


def spherical_to_cartesian(q) -> np.ndarray:
    r, theta, phi = q
    s = np.sin(phi)
    return np.array([r * s * np.cos(theta), r * s * np.sin(theta), r * np.cos(phi)])


def polar_to_cartesian(q) -> np.ndarray:
    """Zero-elevation mapping ``(r, theta) -> (r cos theta, r sin theta)``."""
    r, theta = q
    return np.array([r * np.cos(theta), r * np.sin(theta)])


def cartesian_to_polar(xy) -> PolarPoint:
    x, y = (float(c) for c in xy)
    return PolarPoint(float(np.hypot(x, y)), float(np.arctan2(y, x)))


# Vectorised forms used by the pipeline and the acceptance sweep.

def cartesian_to_spherical_array(p: np.ndarray) -> np.ndarray:
    """Row-wise conversion of an ``(N, 3)`` array to ``(N, 3)`` (r, theta, phi)."""
    p = np.asarray(p, dtype=np.float64)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    rho = np.hypot(x, y)
    r = np.hypot(rho, z)
    out = np.stack([r, np.arctan2(y, x), np.arctan2(rho, z)], axis=-1)
    out[r == 0.0] = 0.0
    return out


def spherical_to_cartesian_array(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    r, theta, phi = q[..., 0], q[..., 1], q[..., 2]
    s = np.sin(phi)
    return np.stack([r * s * np.cos(theta), r * s * np.sin(theta), r * np.cos(phi)], axis=-1)


def polar_to_cartesian_array(r, theta) -> tuple[np.ndarray, np.ndarray]:
    r = np.asarray(r, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    return r * np.cos(theta), r * np.sin(theta)


def cartesian_to_polar_array(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return np.hypot(x, y), np.arctan2(y, x)


def euler_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rotation matrix ``Rz(yaw) @ Ry(pitch) @ Rx(roll)`` (radians)."""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return rz @ ry @ rx
