"""Selective secondary reflections.

Only pixels that the rasterizer hit launch a mirror-reflected ray.  Each ray is
tested against the per-object bounding boxes first and against the triangles of
an object only when its box is hit (Moller-Trumbore).  ``use_aabb=False`` gives
the brute-force reference that tests every triangle.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from numba import njit

from .rasterizer import GBuffer, ReflectionImage, SonarCamera, primary_reflections
from .scene import AABB, InvalidParameterError, Scene, Triangle

ORIGIN_OFFSET = 1e-4    # meters, pushes secondary ray origins off the surface
HIT_EPSILON = 1e-6      # meters, minimum accepted ray parameter
BOX_PADDING = 1e-7      # meters, keeps the box test conservative under rounding


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise InvalidParameterError("ray direction must be unit length")
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64))
        object.__setattr__(self, "direction", d)


@dataclass
class IntersectionStats:
    rays_launched: int = 0
    box_tests: int = 0
    triangle_tests: int = 0
    triangle_tests_skipped_by_box: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def reflect_direction(incident, normal) -> np.ndarray:
    """Mirror ``incident`` about ``normal``: ``i - 2 (i . n) n``."""
    i = np.asarray(incident, dtype=np.float64)
    n = np.asarray(normal, dtype=np.float64)
    r = i - 2.0 * np.dot(i, n) * n
    return r / np.linalg.norm(r)


@njit(cache=True)
def _slab(ox, oy, oz, dx, dy, dz, bmin, bmax, pad):
    """Slab test; returns entry parameter (>= 0) or -1 on a miss."""
    tnear = -np.inf
    tfar = np.inf
    o = (ox, oy, oz)
    d = (dx, dy, dz)
    for k in range(3):
        lo = bmin[k] - pad
        hi = bmax[k] + pad
        if d[k] == 0.0:
            if o[k] < lo or o[k] > hi:
                return -1.0
            continue
        t1 = (lo - o[k]) / d[k]
        t2 = (hi - o[k]) / d[k]
        if t1 > t2:
            t1, t2 = t2, t1
        if t1 > tnear:
            tnear = t1
        if t2 < tfar:
            tfar = t2
    if tnear > tfar or tfar < 0.0:
        return -1.0
    return max(tnear, 0.0)


@njit(cache=True)
def _moller_trumbore(ox, oy, oz, dx, dy, dz, tri, eps):
    """Returns (t, u, v); t < 0 signals a miss."""
    e1x = tri[1, 0] - tri[0, 0]
    e1y = tri[1, 1] - tri[0, 1]
    e1z = tri[1, 2] - tri[0, 2]
    e2x = tri[2, 0] - tri[0, 0]
    e2y = tri[2, 1] - tri[0, 1]
    e2z = tri[2, 2] - tri[0, 2]
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if abs(det) < 1e-12:
        return -1.0, 0.0, 0.0
    inv = 1.0 / det
    sx = ox - tri[0, 0]
    sy = oy - tri[0, 1]
    sz = oz - tri[0, 2]
    u = (sx * px + sy * py + sz * pz) * inv
    if u < 0.0 or u > 1.0:
        return -1.0, 0.0, 0.0
    qx = sy * e1z - sz * e1y
    qy = sz * e1x - sx * e1z
    qz = sx * e1y - sy * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return -1.0, 0.0, 0.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    if t <= eps:
        return -1.0, 0.0, 0.0
    return t, u, v


def ray_aabb_intersect(ray: Ray, box: AABB) -> tuple[bool, float]:
    o, d = ray.origin, ray.direction
    t = _slab(o[0], o[1], o[2], d[0], d[1], d[2],
              np.asarray(box.min, dtype=np.float64), np.asarray(box.max, dtype=np.float64), 0.0)
    return (t >= 0.0), (t if t >= 0.0 else np.inf)


def ray_triangle_intersect(ray: Ray, tri: Triangle | np.ndarray, eps: float = HIT_EPSILON):
    """Moller-Trumbore; returns ``(t, u, v)`` or ``None``."""
    if isinstance(tri, Triangle):
        tri = np.array([tri.v0, tri.v1, tri.v2])
    tri = np.ascontiguousarray(tri, dtype=np.float64)
    o, d = ray.origin, ray.direction
    t, u, v = _moller_trumbore(o[0], o[1], o[2], d[0], d[1], d[2], tri, eps)
    if t < 0.0:
        return None
    return t, u, v


@njit(cache=True)
def _trace_kernel(origins, dirs, tris, normals, mids, refl, box_min, box_max, offsets,
                  use_aabb, eps, pad, hit_t, hit_tri, counters):
    n_obj = box_min.shape[0]
    for p in range(origins.shape[0]):
        ox, oy, oz = origins[p, 0], origins[p, 1], origins[p, 2]
        dx, dy, dz = dirs[p, 0], dirs[p, 1], dirs[p, 2]
        best = np.inf
        best_tri = -1
        for o in range(n_obj):
            t0, t1 = offsets[o], offsets[o + 1]
            if use_aabb:
                counters[0] += 1
                if _slab(ox, oy, oz, dx, dy, dz, box_min[o], box_max[o], pad) < 0.0:
                    counters[2] += t1 - t0
                    continue
            for k in range(t0, t1):
                counters[1] += 1
                t, u, v = _moller_trumbore(ox, oy, oz, dx, dy, dz, tris[k], eps)
                if t > 0.0 and t < best:
                    best = t
                    best_tri = k
        hit_t[p] = best
        hit_tri[p] = best_tri


def secondary_reflections(gbuffer: GBuffer, scene: Scene, camera: SonarCamera,
                          use_aabb: bool = True, primary: ReflectionImage | None = None):
    """Trace one mirror bounce from every hit pixel.

    The nearest front-facing secondary hit is stored at the launching pixel
    with distance ``primary range + segment length`` and intensity
    ``Lambert * reflectivity`` at the second surface, scaled by the pixel's
    primary intensity (computed from the G-buffer unless ``primary`` is
    passed in).  Returns the secondary
    ``ReflectionImage`` and the intersection counters.
    """
    shape = gbuffer.shape
    out = ReflectionImage.empty(shape)
    stats = IntersectionStats()
    hit = gbuffer.hit_mask
    idx = np.flatnonzero(hit.ravel())
    stats.rays_launched = int(len(idx))
    packed = scene.packed
    if len(idx) == 0 or len(packed.tris) == 0:
        if not use_aabb:
            stats.triangle_tests = stats.rays_launched * len(packed.tris)
        return out, stats

    pos = gbuffer.position.reshape(-1, 3)[idx]
    nrm = gbuffer.normal.reshape(-1, 3)[idx]
    view = pos - camera.position
    d1 = np.linalg.norm(view, axis=1)
    view /= d1[:, None]
    dirs = view - 2.0 * np.einsum("ij,ij->i", view, nrm)[:, None] * nrm
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    origins = np.ascontiguousarray(pos + ORIGIN_OFFSET * dirs)
    dirs = np.ascontiguousarray(dirs)

    hit_t = np.empty(len(idx))
    hit_tri = np.empty(len(idx), dtype=np.int64)
    counters = np.zeros(3, dtype=np.int64)
    _trace_kernel(origins, dirs, packed.tris, packed.normals, packed.material_ids,
                  packed.reflectivity, packed.box_min, packed.box_max, packed.offsets,
                  bool(use_aabb), HIT_EPSILON, BOX_PADDING, hit_t, hit_tri, counters)
    stats.box_tests = int(counters[0])
    stats.triangle_tests = int(counters[1])
    stats.triangle_tests_skipped_by_box = int(counters[2])

    found = hit_tri >= 0
    n2 = packed.normals[np.where(found, hit_tri, 0)]
    cos = -np.einsum("ij,ij->i", dirs, n2)
    keep = found & (cos > 0.0)
    sel = idx[keep]
    inten = cos[keep] * packed.reflectivity[packed.material_ids[hit_tri[keep]]]
    if primary is None:
        primary = primary_reflections(gbuffer, camera, scene.materials)
    inten = inten * primary.intensity.ravel()[sel]
    dist = out.distance.reshape(-1)
    ints = out.intensity.reshape(-1)
    dist[sel] = d1[keep] + ORIGIN_OFFSET + hit_t[keep]
    ints[sel] = np.clip(inten, 0.0, 1.0)
    return out, stats


def unify_reflections(primary: ReflectionImage, secondary: ReflectionImage) -> ReflectionImage:
    """Attach each secondary return to its launching pixel next to the primary one."""
    if primary.shape != secondary.shape:
        raise InvalidParameterError(f"shape mismatch {primary.shape} vs {secondary.shape}")
    orphan = np.isfinite(secondary.distance) & ~np.isfinite(primary.distance)
    if np.any(orphan):
        raise InvalidParameterError("secondary return at a pixel without a primary hit")
    return ReflectionImage(
        primary.distance.copy(),
        primary.intensity.copy(),
        secondary.distance.copy(),
        secondary.intensity.copy(),
    )

