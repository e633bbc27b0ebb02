"""Scene description: primitive tessellation, bounding boxes and scene files.

Scene files are YAML documents::

    materials:
      steel: {reflectivity: 0.9, roughness: 0.05}
    objects:
      - name: wall
        kind: box                 # box | sphere | cylinder | cone | plane | mesh
        size: [0.2, 4.0, 2.0]     # box: [sx, sy, sz]; plane: [sx, sy]
        material: steel           # or inline reflectivity / roughness keys
        position: [10.0, 0.0, 0.0]
        rotation_deg: [0, 0, 0]   # roll, pitch, yaw
      - kind: sphere
        radius: 1.0
        resolution: 16
        reflectivity: 0.5
      - kind: mesh
        path: hull.tri            # relative to the scene file

Mesh files (``.tri``) hold one ``v x y z`` line per vertex and one
``t i j k`` line per triangle with zero-based vertex indices; ``#`` starts a
comment.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import yaml

from .geometry import euler_matrix


class InvalidParameterError(ValueError):
    """Raised for out-of-range dimensions, counts or physical parameters."""


class SceneFormatError(ValueError):
    """Raised when a scene or mesh file cannot be interpreted."""


PRIMITIVE_KINDS = ("box", "sphere", "cylinder", "cone", "plane")

# Default benchmark viewport (FLS, 120 x 20 degrees).
BENCH_FOV_AZIMUTH = np.deg2rad(120.0)
BENCH_FOV_ELEVATION = np.deg2rad(20.0)
BENCH_RANGE_MIN = 0.5
BENCH_RANGE_MAX = 30.0
BENCH_RESOLUTION = 16


@dataclass(frozen=True)
class Triangle:
    v0: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    normal: np.ndarray
    centroid: np.ndarray


@dataclass(frozen=True)
class Material:
    reflectivity: float = 1.0
    roughness: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.reflectivity <= 1.0):
            raise InvalidParameterError(f"reflectivity {self.reflectivity} outside [0, 1]")
        if self.roughness < 0.0:
            raise InvalidParameterError(f"roughness {self.roughness} must be >= 0")


@dataclass(frozen=True)
class AABB:
    min: np.ndarray
    max: np.ndarray

    def contains(self, points: np.ndarray) -> bool:
        points = np.asarray(points).reshape(-1, 3)
        return bool(np.all(points >= self.min) and np.all(points <= self.max))


class TriMesh:
    """Triangle soup with per-face unit normals and centroids.

    ``vertices`` has shape ``(n, 3, 3)``: triangle, corner, coordinate.
    """

    def __init__(self, vertices, material_id: int = 0):
        v = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 3, 3)
        if len(v) == 0:
            raise InvalidParameterError("mesh has no triangles")
        if not np.all(np.isfinite(v)):
            raise InvalidParameterError("mesh has non-finite vertices")
        self.vertices = v
        self.material_id = int(material_id)
        cross = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        norm = np.linalg.norm(cross, axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            normals = np.where(norm > 0, cross / norm, 0.0)
        self.normals = normals
        self.centroids = v.mean(axis=1)

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def triangles(self) -> list[Triangle]:
        return [
            Triangle(t[0], t[1], t[2], n, c)
            for t, n, c in zip(self.vertices, self.normals, self.centroids)
        ]

    def transformed(self, rotation: np.ndarray, translation) -> "TriMesh":
        v = self.vertices @ np.asarray(rotation).T + np.asarray(translation, dtype=np.float64)
        return TriMesh(v, self.material_id)

    def with_material(self, material_id: int) -> "TriMesh":
        return TriMesh(self.vertices, material_id)

    def surface_area(self) -> float:
        v = self.vertices
        return float(0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1).sum())


def compute_aabb(mesh: TriMesh) -> AABB:
    if mesh is None or len(mesh.vertices) == 0:
        raise InvalidParameterError("cannot bound an empty mesh")
    pts = mesh.vertices.reshape(-1, 3)
    return AABB(pts.min(axis=0), pts.max(axis=0))


@dataclass
class SceneObject:
    mesh: TriMesh
    aabb: AABB
    kind: str = "mesh"
    name: str = ""


@dataclass
class Scene:
    objects: list[SceneObject] = field(default_factory=list)
    materials: list[Material] = field(default_factory=lambda: [Material()])

    def add(self, mesh: TriMesh, kind: str = "mesh", name: str = "") -> None:
        if not 0 <= mesh.material_id < len(self.materials):
            raise InvalidParameterError(f"material id {mesh.material_id} not defined")
        self.objects.append(SceneObject(mesh, compute_aabb(mesh), kind, name))
        self.__dict__.pop("packed", None)

    @property
    def n_triangles(self) -> int:
        return sum(len(o.mesh) for o in self.objects)

    @cached_property
    def packed(self) -> "PackedScene":
        return PackedScene.from_scene(self)


@dataclass(frozen=True)
class PackedScene:
    """Flat arrays consumed by the rasterizer and ray tracer kernels."""

    tris: np.ndarray          # (T, 3, 3)
    normals: np.ndarray       # (T, 3)
    material_ids: np.ndarray  # (T,) int64
    reflectivity: np.ndarray  # (M,)
    roughness: np.ndarray     # (M,)
    box_min: np.ndarray       # (O, 3)
    box_max: np.ndarray       # (O, 3)
    offsets: np.ndarray       # (O + 1,) triangle ranges per object

    @classmethod
    def from_scene(cls, scene: Scene) -> "PackedScene":
        objs = scene.objects
        if objs:
            tris = np.concatenate([o.mesh.vertices for o in objs])
            normals = np.concatenate([o.mesh.normals for o in objs])
            mids = np.concatenate([np.full(len(o.mesh), o.mesh.material_id) for o in objs])
            box_min = np.array([o.aabb.min for o in objs])
            box_max = np.array([o.aabb.max for o in objs])
        else:
            tris = np.zeros((0, 3, 3))
            normals = np.zeros((0, 3))
            mids = np.zeros(0)
            box_min = box_max = np.zeros((0, 3))
        offsets = np.concatenate([[0], np.cumsum([len(o.mesh) for o in objs])])
        return cls(
            np.ascontiguousarray(tris),
            np.ascontiguousarray(normals),
            mids.astype(np.int64),
            np.array([m.reflectivity for m in scene.materials], dtype=np.float64),
            np.array([m.roughness for m in scene.materials], dtype=np.float64),
            np.ascontiguousarray(box_min, dtype=np.float64),
            np.ascontiguousarray(box_max, dtype=np.float64),
            offsets.astype(np.int64),
        )


# ---------------------------------------------------------------------------
# Tessellation


def _require_positive(**dims):
    for name, value in dims.items():
        if not np.isfinite(value) or value <= 0:
            raise InvalidParameterError(f"{name} must be positive, got {value}")


def _orient_outward(tris: np.ndarray, center) -> np.ndarray:
    # All primitives are convex, so the centroid test decides orientation.
    n = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    flip = np.einsum("ij,ij->i", n, tris.mean(axis=1) - center) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


def _ring(radius: float, z: float, n: int) -> np.ndarray:
    a = 2.0 * np.pi * np.arange(n) / n
    return np.stack([radius * np.cos(a), radius * np.sin(a), np.full(n, z)], axis=1)


def tessellate_box(sx: float, sy: float, sz: float) -> np.ndarray:
    _require_positive(sx=sx, sy=sy, sz=sz)
    h = np.array([sx, sy, sz]) / 2.0
    c = np.array([[i, j, k] for i in (-1, 1) for j in (-1, 1) for k in (-1, 1)], dtype=float) * h
    # corner index = 4*i + 2*j + k with i, j, k in {0, 1}
    quads = [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]
    tris = []
    for a, b, cc, d in quads:
        tris.append([c[a], c[b], c[cc]])
        tris.append([c[a], c[cc], c[d]])
    return _orient_outward(np.array(tris), np.zeros(3))


def tessellate_sphere(radius: float, resolution: int) -> np.ndarray:
    """Latitude/longitude sphere with ``2 n (n - 1)`` triangles for ``n = resolution``."""
    _require_positive(radius=radius)
    n = int(resolution)
    if n < 3:
        raise InvalidParameterError("sphere resolution must be >= 3")
    polar = np.pi * np.arange(1, n) / n
    lon = 2.0 * np.pi * np.arange(n) / n
    rings = [
        np.stack([radius * np.sin(p) * np.cos(lon), radius * np.sin(p) * np.sin(lon),
                  np.full(n, radius * np.cos(p))], axis=1)
        for p in polar
    ]
    top = np.array([0.0, 0.0, radius])
    bottom = np.array([0.0, 0.0, -radius])
    tris = []
    for j in range(n):
        k = (j + 1) % n
        tris.append([top, rings[0][j], rings[0][k]])
        tris.append([bottom, rings[-1][k], rings[-1][j]])
        for i in range(n - 2):
            a, b = rings[i], rings[i + 1]
            tris.append([a[j], b[j], b[k]])
            tris.append([a[j], b[k], a[k]])
    return _orient_outward(np.array(tris), np.zeros(3))


def tessellate_cylinder(radius: float, height: float, resolution: int) -> np.ndarray:
    """Cylinder from ``z = 0`` to ``z = height``: ``4 n`` triangles."""
    _require_positive(radius=radius, height=height)
    n = int(resolution)
    if n < 3:
        raise InvalidParameterError("cylinder resolution must be >= 3")
    lo, hi = _ring(radius, 0.0, n), _ring(radius, height, n)
    c0, c1 = np.zeros(3), np.array([0.0, 0.0, height])
    tris = []
    for j in range(n):
        k = (j + 1) % n
        tris += [[lo[j], lo[k], hi[k]], [lo[j], hi[k], hi[j]], [c0, lo[k], lo[j]], [c1, hi[j], hi[k]]]
    return _orient_outward(np.array(tris), np.array([0.0, 0.0, height / 2.0]))


def tessellate_cone(radius: float, height: float, resolution: int) -> np.ndarray:
    """Cone with base disc at ``z = 0`` and apex at ``(0, 0, height)``: ``2 n`` triangles."""
    _require_positive(radius=radius, height=height)
    n = int(resolution)
    if n < 3:
        raise InvalidParameterError("cone resolution must be >= 3")
    base = _ring(radius, 0.0, n)
    apex, c0 = np.array([0.0, 0.0, height]), np.zeros(3)
    side = [[apex, base[j], base[(j + 1) % n]] for j in range(n)]
    cap = [[c0, base[(j + 1) % n], base[j]] for j in range(n)]
    return _orient_outward(np.array(side + cap), np.array([0.0, 0.0, height / 4.0]))


def tessellate_plane(sx: float, sy: float) -> np.ndarray:
    """Rectangle in the ``z = 0`` plane facing ``+z``."""
    _require_positive(sx=sx, sy=sy)
    hx, hy = sx / 2.0, sy / 2.0
    a, b, c, d = ([-hx, -hy, 0.0], [hx, -hy, 0.0], [hx, hy, 0.0], [-hx, hy, 0.0])
    return np.array([[a, b, c], [a, c, d]], dtype=float)


def tessellate_primitive(kind: str, params: dict, resolution: int = 16) -> TriMesh:
    """Tessellate a primitive given its dimensions in meters.

    ``params`` keys: box ``size``; sphere ``radius``; cylinder and cone
    ``radius`` and ``height``; plane ``size`` (two values).
    """
    try:
        if kind == "box":
            v = tessellate_box(*_size(params, 3))
        elif kind == "sphere":
            v = tessellate_sphere(float(params["radius"]), resolution)
        elif kind == "cylinder":
            v = tessellate_cylinder(float(params["radius"]), float(params["height"]), resolution)
        elif kind == "cone":
            v = tessellate_cone(float(params["radius"]), float(params["height"]), resolution)
        elif kind == "plane":
            v = tessellate_plane(*_size(params, 2))
        else:
            raise InvalidParameterError(f"unknown primitive kind {kind!r}")
    except KeyError as exc:
        raise InvalidParameterError(f"{kind} requires parameter {exc.args[0]!r}") from None
    return TriMesh(v)


def _size(params: dict, n: int) -> list[float]:
    size = params["size"]
    if np.isscalar(size):
        size = [size] * n
    if len(size) != n:
        raise InvalidParameterError(f"size needs {n} values, got {len(size)}")
    return [float(s) for s in size]


# ---------------------------------------------------------------------------
# Files


class _LineLoader(yaml.SafeLoader):
    pass


class _Mapping(dict):
    line = 0


def _construct_mapping(loader, node):
    m = _Mapping(loader.construct_mapping(node, deep=True))
    m.line = node.start_mark.line + 1
    return m


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def load_yaml(path) -> dict:
    """Read a YAML document whose mappings remember their source line."""
    with open(path) as fh:
        text = fh.read()
    try:
        doc = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark else str(path)
        raise SceneFormatError(f"{where}: {getattr(exc, 'problem', exc)}") from None
    return doc if doc is not None else _Mapping()


def load_mesh_file(path) -> TriMesh:
    verts, tris = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].split()
            if not line:
                continue
            tag, vals = line[0], line[1:]
            try:
                if tag == "v" and len(vals) == 3:
                    verts.append([float(x) for x in vals])
                elif tag == "t" and len(vals) == 3:
                    tris.append([int(x) for x in vals])
                else:
                    raise ValueError(f"expected 'v x y z' or 't i j k', got {raw.strip()!r}")
            except ValueError as exc:
                raise SceneFormatError(f"{path}:{lineno}: {exc}") from None
    verts = np.array(verts, dtype=np.float64).reshape(-1, 3)
    idx = np.array(tris, dtype=np.int64).reshape(-1, 3)
    if len(idx) == 0:
        raise SceneFormatError(f"{path}: no triangles")
    if idx.min() < 0 or idx.max() >= len(verts):
        raise SceneFormatError(f"{path}: triangle index out of range (have {len(verts)} vertices)")
    return TriMesh(verts[idx])


def save_mesh_file(mesh: TriMesh, path) -> None:
    pts = mesh.vertices.reshape(-1, 3)
    with open(path, "w") as fh:
        for p in pts:
            fh.write(f"v {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
        for i in range(len(mesh)):
            fh.write(f"t {3 * i} {3 * i + 1} {3 * i + 2}\n")


def _vec(obj: dict, key: str, default, ctx: str) -> np.ndarray:
    val = obj.get(key, default)
    try:
        arr = np.array(val, dtype=np.float64).reshape(3)
    except (TypeError, ValueError):
        raise SceneFormatError(f"{ctx}.{key}: expected three numbers, got {val!r}") from None
    if not np.all(np.isfinite(arr)):
        raise SceneFormatError(f"{ctx}.{key}: non-finite value")
    return arr


def _material(spec: dict, ctx: str) -> Material:
    if not isinstance(spec, dict):
        raise SceneFormatError(f"{ctx}: expected a mapping")
    refl = spec.get("reflectivity", 1.0)
    rough = spec.get("roughness", 0.0)
    try:
        refl, rough = float(refl), float(rough)
    except (TypeError, ValueError):
        raise SceneFormatError(f"{ctx}: reflectivity/roughness must be numbers") from None
    if not 0.0 <= refl <= 1.0:
        raise SceneFormatError(f"{ctx}.reflectivity = {refl} out of range [0, 1]")
    if rough < 0.0:
        raise SceneFormatError(f"{ctx}.roughness = {rough} must be >= 0")
    return Material(refl, rough)


def scene_from_dict(doc: dict, base_dir: str = ".", source: str = "<scene>") -> Scene:
    if not isinstance(doc, dict):
        raise SceneFormatError(f"{source}: top level must be a mapping")
    materials = [Material()]
    names = {}
    for name, spec in (doc.get("materials") or {}).items():
        line = getattr(spec, "line", 0)
        materials.append(_material(spec, f"{source}:{line}: materials.{name}"))
        names[name] = len(materials) - 1

    scene = Scene(materials=materials)
    objects = doc.get("objects") or []
    if not isinstance(objects, list):
        raise SceneFormatError(f"{source}: 'objects' must be a list")
    for i, obj in enumerate(objects):
        line = getattr(obj, "line", 0)
        ctx = f"{source}:{line}: objects[{i}]"
        if not isinstance(obj, dict):
            raise SceneFormatError(f"{ctx}: expected a mapping")
        kind = obj.get("kind")
        if kind == "mesh":
            if "path" not in obj:
                raise SceneFormatError(f"{ctx}.path: required for mesh objects")
            mesh = load_mesh_file(os.path.join(base_dir, obj["path"]))
        elif kind in PRIMITIVE_KINDS:
            try:
                mesh = tessellate_primitive(kind, obj, int(obj.get("resolution", 16)))
            except (InvalidParameterError, TypeError, ValueError) as exc:
                raise SceneFormatError(f"{ctx}: {exc}") from None
        else:
            raise SceneFormatError(f"{ctx}.kind: unknown primitive kind {kind!r}")

        if "material" in obj:
            mat = obj["material"]
            if isinstance(mat, str):
                if mat not in names:
                    raise SceneFormatError(f"{ctx}.material: undefined material {mat!r}")
                mid = names[mat]
            else:
                materials.append(_material(mat, f"{ctx}.material"))
                mid = len(materials) - 1
        elif "reflectivity" in obj or "roughness" in obj:
            materials.append(_material(obj, ctx))
            mid = len(materials) - 1
        else:
            mid = 0

        rot = np.deg2rad(_vec(obj, "rotation_deg", [0, 0, 0], ctx))
        pos = _vec(obj, "position", [0, 0, 0], ctx)
        mesh = mesh.transformed(euler_matrix(*rot), pos).with_material(mid)
        scene.add(mesh, kind, str(obj.get("name", f"{kind}{i}")))
    return scene


def load_scene(path) -> Scene:
    path = os.fspath(path)
    doc = load_yaml(path)
    return scene_from_dict(doc, os.path.dirname(os.path.abspath(path)), path)


# ---------------------------------------------------------------------------
# Benchmark scenes


def random_benchmark_scene(
    seed: int,
    fov_azimuth: float = BENCH_FOV_AZIMUTH,
    fov_elevation: float = BENCH_FOV_ELEVATION,
    range_min: float = BENCH_RANGE_MIN,
    range_max: float = BENCH_RANGE_MAX,
    resolution: int = BENCH_RESOLUTION,
) -> Scene:
    """One cylinder, box, sphere and cone placed at random inside the viewport.

    The sonar sits at the origin looking along ``+x``.  Ranges are uniform in
    the central 80 % of ``[range_min, range_max]``, bearings and elevations
    uniform within 80 % of the half fields of view.
    """
    rng = np.random.default_rng(seed)
    span = range_max - range_min
    scene = Scene(materials=[Material()])
    for kind in ("cylinder", "box", "sphere", "cone"):
        r = rng.uniform(range_min + 0.1 * span, range_max - 0.1 * span)
        az = rng.uniform(-0.8, 0.8) * fov_azimuth / 2.0
        el = rng.uniform(-0.8, 0.8) * fov_elevation / 2.0
        center = r * np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])
        dims = rng.uniform(0.4, 1.6, size=3)
        refl = rng.uniform(0.5, 1.0)
        angles = rng.uniform(-np.pi, np.pi, size=3)
        if kind == "box":
            mesh = tessellate_primitive("box", {"size": dims}, resolution)
        elif kind == "sphere":
            mesh = tessellate_primitive("sphere", {"radius": dims[0] / 2.0}, resolution)
        else:
            mesh = tessellate_primitive(kind, {"radius": dims[0] / 2.0, "height": dims[1]}, resolution)
            mesh = TriMesh(mesh.vertices - np.array([0.0, 0.0, dims[1] / 2.0]))
        scene.materials.append(Material(refl, 0.0))
        mesh = mesh.transformed(euler_matrix(*angles), center).with_material(len(scene.materials) - 1)
        scene.add(mesh, kind, kind)
    return scene
