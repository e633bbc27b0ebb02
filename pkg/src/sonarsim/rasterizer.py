"""Primary reflections: software z-buffer rasterization into G-buffers.

The virtual camera is a pinhole looking along its local ``+x`` axis with
``+y`` to the left and ``+z`` up.  Column ``c`` of a ``W``-pixel image sits at
image-plane coordinate ``tan(fov_azimuth/2) * (2 (c + 0.5) / W - 1)``, so every
pixel of a column shares one azimuth ``atan(...)``.  Row 0 is the top row.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from . import rng
from .geometry import euler_matrix
from .scene import (
    BENCH_FOV_AZIMUTH,
    BENCH_FOV_ELEVATION,
    BENCH_RANGE_MAX,
    BENCH_RANGE_MIN,
    InvalidParameterError,
    Material,
    Scene,
)

NO_HIT = np.inf

# Mean tilt (radians) of a perturbed normal per unit of material roughness.
NORMAL_PERTURBATION_GAIN = 0.5

_PERTURB_TAG = 0x6E6F726D


@dataclass
class SonarCamera:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    fov_azimuth: float = BENCH_FOV_AZIMUTH
    fov_elevation: float = BENCH_FOV_ELEVATION
    range_min: float = BENCH_RANGE_MIN
    range_max: float = BENCH_RANGE_MAX
    width: int = 256
    height: int = 64

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        if not 0.0 < self.fov_azimuth < np.pi:
            raise InvalidParameterError(f"fov_azimuth {self.fov_azimuth} must lie in (0, pi)")
        if not 0.0 < self.fov_elevation < np.pi:
            raise InvalidParameterError(f"fov_elevation {self.fov_elevation} must lie in (0, pi)")
        if not 0.0 < self.range_min < self.range_max:
            raise InvalidParameterError("need 0 < range_min < range_max")
        if self.width < 1 or self.height < 1:
            raise InvalidParameterError("image size must be at least 1x1")
        self.width, self.height = int(self.width), int(self.height)

    @classmethod
    def from_euler(cls, position, roll=0.0, pitch=0.0, yaw=0.0, **kw) -> "SonarCamera":
        return cls(position=position, rotation=euler_matrix(roll, pitch, yaw), **kw)

    @property
    def tan_half_azimuth(self) -> float:
        return float(np.tan(self.fov_azimuth / 2.0))

    @property
    def tan_half_elevation(self) -> float:
        return float(np.tan(self.fov_elevation / 2.0))

    def column_plane_coords(self) -> np.ndarray:
        c = np.arange(self.width) + 0.5
        return self.tan_half_azimuth * (2.0 * c / self.width - 1.0)

    def row_plane_coords(self) -> np.ndarray:
        r = np.arange(self.height) + 0.5
        return self.tan_half_elevation * (1.0 - 2.0 * r / self.height)

    def column_azimuths(self) -> np.ndarray:
        return np.arctan(self.column_plane_coords())

    def azimuth_of_column_edge(self, edge) -> np.ndarray:
        """Azimuth of fractional column coordinate ``edge`` (0 .. width)."""
        e = np.asarray(edge, dtype=np.float64)
        return np.arctan(self.tan_half_azimuth * (2.0 * e / self.width - 1.0))

    def pixel_directions(self) -> np.ndarray:
        """Unit world-space ray direction through every pixel center, ``(H, W, 3)``."""
        b, a = np.meshgrid(self.row_plane_coords(), self.column_plane_coords(), indexing="ij")
        local = np.stack([np.ones_like(a), a, b], axis=-1)
        local /= np.linalg.norm(local, axis=-1, keepdims=True)
        return local @ self.rotation.T

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points) - self.position) @ self.rotation


@dataclass
class GBuffer:
    position: np.ndarray     # (H, W, 3) world meters
    normal: np.ndarray       # (H, W, 3), zero where nothing was hit
    depth: np.ndarray        # (H, W) Euclidean range, inf where nothing was hit
    material_id: np.ndarray  # (H, W) int, -1 where nothing was hit
    triangle_id: np.ndarray  # (H, W) int, -1 where nothing was hit

    @property
    def hit_mask(self) -> np.ndarray:
        return np.any(self.normal != 0.0, axis=-1)

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape


@dataclass
class ReflectionImage:
    """Pulse distance (meters) and echo intensity per pixel.

    ``secondary_*`` hold at most one extra multipath sample per pixel, or are
    ``None`` when no secondary pass has been merged in.
    """

    distance: np.ndarray
    intensity: np.ndarray
    secondary_distance: np.ndarray | None = None
    secondary_intensity: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.distance.shape

    @classmethod
    def empty(cls, shape) -> "ReflectionImage":
        return cls(np.full(shape, NO_HIT), np.zeros(shape))

    def samples(self):
        """Flatten to ``(column, distance, intensity)`` arrays over all valid samples."""
        h, w = self.shape
        cols = np.broadcast_to(np.arange(w), (h, w))
        layers = [(self.distance, self.intensity)]
        if self.secondary_distance is not None:
            layers.append((self.secondary_distance, self.secondary_intensity))
        c, d, i = [], [], []
        for dist, inten in layers:
            m = np.isfinite(dist)
            c.append(cols[m])
            d.append(dist[m])
            i.append(inten[m])
        return np.concatenate(c), np.concatenate(d), np.concatenate(i)


@njit(cache=True)
def _raster_kernel(tris, front, width, height, tan_h, tan_v, x_near, rmin, rmax,
                   depth, tri_id, cam_pos):
    poly = np.empty((4, 3))
    tmp = np.empty((3, 3))
    u = np.empty(3)
    v = np.empty(3)
    for t in range(tris.shape[0]):
        if not front[t]:
            continue
        # clip against x >= x_near (Sutherland-Hodgman, one plane)
        n = 0
        for i in range(3):
            a = tris[t, i]
            b = tris[t, (i + 1) % 3]
            ina = a[0] >= x_near
            inb = b[0] >= x_near
            if ina:
                poly[n] = a
                n += 1
            if ina != inb:
                s = (x_near - a[0]) / (b[0] - a[0])
                poly[n] = a + s * (b - a)
                n += 1
        if n < 3:
            continue
        for k in range(1, n - 1):
            tmp[0] = poly[0]
            tmp[1] = poly[k]
            tmp[2] = poly[k + 1]
            for i in range(3):
                u[i] = (tmp[i, 1] / tmp[i, 0] / tan_h + 1.0) * 0.5 * width
                v[i] = (1.0 - tmp[i, 2] / tmp[i, 0] / tan_v) * 0.5 * height
            area = (u[1] - u[0]) * (v[2] - v[0]) - (u[2] - u[0]) * (v[1] - v[0])
            if area == 0.0:
                continue
            c0 = max(int(np.floor(min(u[0], u[1], u[2]) - 0.5)), 0)
            c1 = min(int(np.ceil(max(u[0], u[1], u[2]) - 0.5)), width - 1)
            r0 = max(int(np.floor(min(v[0], v[1], v[2]) - 0.5)), 0)
            r1 = min(int(np.ceil(max(v[0], v[1], v[2]) - 0.5)), height - 1)
            inv_area = 1.0 / area
            for r in range(r0, r1 + 1):
                py = r + 0.5
                for c in range(c0, c1 + 1):
                    px = c + 0.5
                    l0 = ((u[1] - px) * (v[2] - py) - (u[2] - px) * (v[1] - py)) * inv_area
                    l1 = ((u[2] - px) * (v[0] - py) - (u[0] - px) * (v[2] - py)) * inv_area
                    l2 = 1.0 - l0 - l1
                    if l0 < 0.0 or l1 < 0.0 or l2 < 0.0:
                        continue
                    # perspective-correct weights: screen barycentrics over depth
                    w0 = l0 / tmp[0, 0]
                    w1 = l1 / tmp[1, 0]
                    w2 = l2 / tmp[2, 0]
                    s = w0 + w1 + w2
                    x = (w0 * tmp[0, 0] + w1 * tmp[1, 0] + w2 * tmp[2, 0]) / s
                    y = (w0 * tmp[0, 1] + w1 * tmp[1, 1] + w2 * tmp[2, 1]) / s
                    z = (w0 * tmp[0, 2] + w1 * tmp[1, 2] + w2 * tmp[2, 2]) / s
                    d = np.sqrt(x * x + y * y + z * z)
                    if d < rmin or d > rmax:
                        continue
                    if d < depth[r, c]:
                        depth[r, c] = d
                        tri_id[r, c] = t
                        cam_pos[r, c, 0] = x
                        cam_pos[r, c, 1] = y
                        cam_pos[r, c, 2] = z


def rasterize(scene: Scene, camera: SonarCamera) -> GBuffer:
    """Z-buffered perspective rasterization of ``scene`` through ``camera``.

    Back faces are culled, fragments outside ``[range_min, range_max]`` are
    clipped, and the nearest surface wins (ties keep the lower triangle index).
    """
    h, w = camera.height, camera.width
    depth = np.full((h, w), NO_HIT)
    tri_id = np.full((h, w), -1, dtype=np.int64)
    cam_pos = np.zeros((h, w, 3))
    packed = scene.packed
    if len(packed.tris):
        cam_tris = np.ascontiguousarray(camera.to_camera(packed.tris))
        view = packed.tris[:, 0] - camera.position
        front = np.einsum("ij,ij->i", packed.normals, view) < 0.0
        tan_h, tan_v = camera.tan_half_azimuth, camera.tan_half_elevation
        x_near = camera.range_min / np.sqrt(1.0 + tan_h ** 2 + tan_v ** 2)
        _raster_kernel(cam_tris, front, w, h, tan_h, tan_v, x_near,
                       camera.range_min, camera.range_max, depth, tri_id, cam_pos)
    hit = tri_id >= 0
    position = np.zeros((h, w, 3))
    normal = np.zeros((h, w, 3))
    material = np.full((h, w), -1, dtype=np.int64)
    position[hit] = cam_pos[hit] @ camera.rotation.T + camera.position
    normal[hit] = packed.normals[tri_id[hit]]
    material[hit] = packed.material_ids[tri_id[hit]]
    return GBuffer(position, normal, depth, material, tri_id)


def _tangent_frame(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.where(np.abs(n[:, :1]) < 0.9, np.array([[1.0, 0.0, 0.0]]), np.array([[0.0, 1.0, 0.0]]))
    t1 = np.cross(n, helper)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    return t1, np.cross(n, t1)


def perturb_normals(gbuffer: GBuffer, materials: list[Material], seed: int,
                    gain: float = NORMAL_PERTURBATION_GAIN) -> GBuffer:
    """Tilt hit normals by seeded random angles to fake surface roughness.

    The tilt is half-normal with mean ``gain * roughness`` radians and the tilt
    direction is uniform around the normal.  Pixels with zero roughness are
    left untouched.
    """
    rough = np.array([m.roughness for m in materials], dtype=np.float64)
    mids = gbuffer.material_id.ravel()
    hit = mids >= 0
    sel = np.flatnonzero(hit)
    sel = sel[rough[mids[sel]] > 0.0]
    if len(sel) == 0:
        return replace(gbuffer)
    key = rng.stream_key(seed, _PERTURB_TAG)
    scale = gain * rough[mids[sel]] * np.sqrt(np.pi / 2.0)
    tilt = scale * np.abs(rng.normals(key, sel, 0))
    spin = 2.0 * np.pi * rng.uniforms(key, sel, 7)
    normals = gbuffer.normal.reshape(-1, 3).copy()
    n = normals[sel]
    t1, t2 = _tangent_frame(n)
    new = (np.cos(tilt)[:, None] * n
           + np.sin(tilt)[:, None] * (np.cos(spin)[:, None] * t1 + np.sin(spin)[:, None] * t2))
    normals[sel] = new / np.linalg.norm(new, axis=1, keepdims=True)
    return replace(gbuffer, normal=normals.reshape(gbuffer.normal.shape))


def primary_reflections(gbuffer: GBuffer, camera: SonarCamera,
                        materials: list[Material]) -> ReflectionImage:
    """Pulse distance and Lambertian echo intensity of the first hit per pixel."""
    hit = gbuffer.hit_mask
    refl = np.array([m.reflectivity for m in materials], dtype=np.float64)
    distance = np.full(gbuffer.shape, NO_HIT)
    intensity = np.zeros(gbuffer.shape)
    to_cam = camera.position - gbuffer.position[hit]
    dist = np.linalg.norm(to_cam, axis=1)
    cos = np.einsum("ij,ij->i", gbuffer.normal[hit], to_cam / dist[:, None])
    distance[hit] = dist
    intensity[hit] = np.clip(cos, 0.0, 1.0) * refl[gbuffer.material_id[hit]]
    return ReflectionImage(distance, intensity)
