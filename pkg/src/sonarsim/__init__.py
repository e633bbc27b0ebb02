"""Imaging sonar simulation from triangle-mesh scenes."""

from .acoustics import WaterProperties, apply_attenuation, attenuation_coefficient, db_to_neper
from .metrics import SimilarityReport, compare, ms_ssim, mse_similarity, psnr_similarity, ssim
from .pipeline import SimulationRun, run_ablation, run_benchmark, simulate_frame, simulate_scan
from .rasterizer import SonarCamera, perturb_normals, primary_reflections, rasterize
from .raytracer import secondary_reflections, unify_reflections
from .scene import InvalidParameterError, Scene, SceneFormatError, load_scene, random_benchmark_scene
from .sonogram import NoiseParams, SigmoidParams, SonarConfig, SonarFrame, build_frame

__version__ = "0.1.0"

__all__ = [
    "WaterProperties", "apply_attenuation", "attenuation_coefficient", "db_to_neper",
    "SimilarityReport", "compare", "ms_ssim", "mse_similarity", "psnr_similarity", "ssim",
    "SimulationRun", "run_ablation", "run_benchmark", "simulate_frame", "simulate_scan",
    "SonarCamera", "perturb_normals", "primary_reflections", "rasterize",
    "secondary_reflections", "unify_reflections",
    "InvalidParameterError", "Scene", "SceneFormatError", "load_scene", "random_benchmark_scene",
    "NoiseParams", "SigmoidParams", "SonarConfig", "SonarFrame", "build_frame",
]
