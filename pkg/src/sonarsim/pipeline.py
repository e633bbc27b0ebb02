"""End-to-end frame simulation and the timing benchmark."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .acoustics import apply_attenuation, attenuation_coefficient, db_to_neper
from .rasterizer import (
    GBuffer,
    ReflectionImage,
    SonarCamera,
    perturb_normals,
    primary_reflections,
    rasterize,
)
from .raytracer import IntersectionStats, secondary_reflections, unify_reflections
from .scene import Scene, random_benchmark_scene
from .sonogram import AcousticImage, SonarConfig, SonarFrame, build_frame, frame_to_cartesian
from .geometry import euler_matrix

STAGES = (
    "camera", "rasterize", "perturb", "primary", "secondary",
    "unify", "attenuate", "sonogram", "display",
)


class PipelineError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"stage '{stage}' failed: {exc}")
        self.stage = stage


@dataclass
class SimulationRun:
    scene: Scene
    config: SonarConfig
    camera: SonarCamera
    gbuffer: GBuffer
    shader: ReflectionImage
    frame: SonarFrame
    image: AcousticImage | None
    stats: IntersectionStats
    timings_ms: dict = field(default_factory=dict)
    total_ms: float = 0.0


def camera_for(config: SonarConfig) -> SonarCamera:
    w, h = config.shader_size
    return SonarCamera(
        position=np.asarray(config.position, dtype=np.float64),
        rotation=euler_matrix(*np.deg2rad(config.orientation_deg)),
        fov_azimuth=config.fov_azimuth,
        fov_elevation=config.fov_elevation,
        range_min=config.range_min,
        range_max=config.range_max,
        width=w,
        height=h,
    )


def attenuation_gamma(config: SonarConfig) -> float:
    """Np/km from the explicit ``alpha`` if given, else from the water model."""
    if config.alpha is not None:
        return float(db_to_neper(config.alpha))
    return attenuation_coefficient(config.frequency, config.water).gamma


def display_size(frame: SonarFrame) -> tuple[int, int]:
    """Cartesian display size: one pixel row per range bin."""
    n = frame.n_bins
    if frame.fov_azimuth >= math.pi:
        return 2 * n, 2 * n
    half = frame.fov_azimuth / 2
    return max(1, int(round(2 * n * math.sin(half)))), n


def simulate_frame(scene: Scene, config: SonarConfig, index: int = 0,
                   timestamp: float = 0.0, display: bool = True) -> SimulationRun:
    """Run every stage once; output is a pure function of (scene, config, index)."""
    timings = {}
    seed = config.noise.seed
    t_start = time.perf_counter()

    def stage(name, fn, *args, **kw):
        t0 = time.perf_counter()
        try:
            out = fn(*args, **kw)
        except Exception as exc:
            raise PipelineError(name, exc) from exc
        timings[name] = (time.perf_counter() - t0) * 1e3
        return out

    camera = stage("camera", camera_for, config)
    gbuf = stage("rasterize", rasterize, scene, camera)
    if config.roughness:
        gbuf = stage("perturb", perturb_normals, gbuf, scene.materials, seed)
    primary = stage("primary", primary_reflections, gbuf, camera, scene.materials)
    if config.secondary:
        secondary, stats = stage("secondary", secondary_reflections, gbuf, scene, camera,
                                 primary=primary)
        shader = stage("unify", unify_reflections, primary, secondary)
    else:
        stats = IntersectionStats()
        shader = primary
    if config.attenuation:
        shader = stage("attenuate", apply_attenuation, shader, attenuation_gamma(config))
    frame = stage("sonogram", build_frame, shader, config, index, timestamp)
    image = None
    if display:
        image = stage("display", frame_to_cartesian, frame, *display_size(frame))
    total = (time.perf_counter() - t_start) * 1e3
    return SimulationRun(scene, config, camera, gbuf, shader, frame, image, stats, timings, total)


def simulate_scan(scene: Scene, config: SonarConfig, display: bool = True):
    """One full MSIS revolution; returns (mosaic frame, Cartesian image, runs)."""
    from .sonogram import accumulate_msis_scan, msis_slot_count

    n = msis_slot_count(config.msis_step)
    roll, pitch, yaw0 = config.orientation_deg
    mosaic, runs = None, []
    for k in range(n):
        yaw = yaw0 + math.degrees(k * config.msis_step)
        step_cfg = replace(config, orientation_deg=(roll, pitch, yaw))
        run = simulate_frame(scene, step_cfg, index=k, timestamp=float(k), display=False)
        run.frame.bearings = np.array([k * config.msis_step])
        mosaic = accumulate_msis_scan([run.frame], config.msis_step, mosaic)
        runs.append(run)
    image = frame_to_cartesian(mosaic, *display_size(mosaic)) if display else None
    return mosaic, image, runs


# ---------------------------------------------------------------------------
# Benchmark


def _fls(beams, bins, w_deg, h_deg):
    return SonarConfig("FLS", beams, bins, math.radians(w_deg), math.radians(h_deg))


def _msis(bins, w_deg, h_deg):
    return SonarConfig("MSIS", 1, bins, math.radians(w_deg), math.radians(h_deg))


PRESETS = {
    "paper-fls": [
        _fls(128, 500, 120, 20), _fls(128, 1000, 120, 20),
        _fls(256, 500, 120, 20), _fls(256, 1000, 120, 20),
        _fls(128, 500, 90, 15), _fls(128, 1000, 90, 15),
        _fls(256, 500, 90, 15), _fls(256, 1000, 90, 15),
    ],
    "paper-msis": [
        _msis(500, 3, 35), _msis(1000, 3, 35),
        _msis(500, 2, 20), _msis(1000, 2, 20),
    ],
}


@dataclass
class BenchmarkRow:
    device: str
    n_beams: int
    n_bins: int
    fov_w_deg: float
    fov_h_deg: float
    avg_time_ms: float
    std_dev_ms: float
    frame_rate_fps: float
    n_samples: int
    rays_launched: float = 0.0
    box_tests: float = 0.0
    triangle_tests: float = 0.0
    triangle_tests_skipped_by_box: float = 0.0

    @property
    def setup(self) -> str:
        return f"{self.device} {self.n_beams}x{self.n_bins} {self.fov_w_deg:g}x{self.fov_h_deg:g}"


@dataclass
class BenchmarkReport:
    rows: list[BenchmarkRow]
    ablation: list[dict] = field(default_factory=list)

    COLUMNS = ("device", "n_beams", "n_bins", "fov_w_deg", "fov_h_deg", "avg_time_ms",
               "std_dev_ms", "frame_rate_fps", "n_samples", "rays_launched", "box_tests",
               "triangle_tests", "triangle_tests_skipped_by_box")

    def to_tsv(self) -> str:
        lines = ["\t".join(self.COLUMNS)]
        for r in self.rows:
            vals = []
            for c in self.COLUMNS:
                v = getattr(r, c)
                vals.append(f"{v:.3f}" if isinstance(v, float) else str(v))
            lines.append("\t".join(vals))
        return "\n".join(lines) + "\n"


def benchmark_scene(seed: int, config: SonarConfig) -> Scene:
    return random_benchmark_scene(seed, config.fov_azimuth, config.fov_elevation,
                                  config.range_min, config.range_max)


def run_benchmark(configs, n_samples: int = 500, seed: int = 0, warmup: int = 1) -> BenchmarkReport:
    """Time scene construction plus ``simulate_frame`` over random scenes.

    Every configuration sees the same sequence of scene seeds.
    """
    rows = []
    for cfg in configs:
        for k in range(warmup):
            simulate_frame(benchmark_scene(seed + k, cfg), cfg)
        times, stats = [], []
        for i in range(n_samples):
            t0 = time.perf_counter()
            scene = benchmark_scene(seed + i, cfg)
            run = simulate_frame(scene, cfg, index=i)
            times.append((time.perf_counter() - t0) * 1e3)
            stats.append(run.stats)
        t = np.array(times)
        avg = float(t.mean())
        rows.append(BenchmarkRow(
            cfg.device, cfg.n_beams, cfg.n_bins,
            round(math.degrees(cfg.fov_azimuth), 6), round(math.degrees(cfg.fov_elevation), 6),
            avg, float(t.std()), 1000.0 / avg, n_samples,
            float(np.mean([s.rays_launched for s in stats])),
            float(np.mean([s.box_tests for s in stats])),
            float(np.mean([s.triangle_tests for s in stats])),
            float(np.mean([s.triangle_tests_skipped_by_box for s in stats])),
        ))
    return BenchmarkReport(rows)


def run_ablation(scene: Scene, config: SonarConfig) -> dict:
    """Render the secondary pass with and without box culling and compare."""
    camera = camera_for(config)
    gbuf = rasterize(scene, camera)
    if config.roughness:
        gbuf = perturb_normals(gbuf, scene.materials, config.noise.seed)
    primary = primary_reflections(gbuf, camera, scene.materials)
    out = {}
    images = {}
    for name, use_aabb in (("selective", True), ("brute_force", False)):
        t0 = time.perf_counter()
        img, stats = secondary_reflections(gbuf, scene, camera, use_aabb=use_aabb, primary=primary)
        out[f"{name}_ms"] = (time.perf_counter() - t0) * 1e3
        out[f"{name}_stats"] = stats
        images[name] = img
    a, b = images["selective"], images["brute_force"]
    both = np.isfinite(a.distance) & np.isfinite(b.distance)
    out["hit_pattern_equal"] = bool(np.array_equal(np.isfinite(a.distance), np.isfinite(b.distance)))
    out["max_intensity_diff"] = float(np.max(np.abs(a.intensity - b.intensity), initial=0.0))
    out["max_distance_diff"] = float(np.max(np.abs(a.distance[both] - b.distance[both]), initial=0.0))
    out["time_ratio"] = out["brute_force_ms"] / max(out["selective_ms"], 1e-9)
    return out
