"""Command line interface: ``sonarsim render | scan | bench | compare``.

Every option can also be given in a YAML config file (``--config``) under the
option's long name with dashes replaced by underscores; command-line flags
override file values.  Exit codes: 0 success, 1 usage, 2 I/O, 3 validation.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass

import yaml

from . import formats
from .acoustics import WaterProperties
from .metrics import compare, fitting_weights
from .pipeline import PRESETS, PipelineError, benchmark_scene, run_ablation, run_benchmark, \
    simulate_frame, simulate_scan
from .scene import InvalidParameterError, SceneFormatError, load_scene, load_yaml
from .sonogram import NoiseParams, SigmoidParams, SonarConfig

log = logging.getLogger("sonarsim")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_VALIDATION = 0, 1, 2, 3

DEFAULTS = {
    "device": "fls",
    "beams": 128,
    "bins": 500,
    "fov_az_deg": 120.0,
    "fov_el_deg": 20.0,
    "range_min": 0.5,
    "range_max": 30.0,
    "frequency": 700.0,
    "temperature": 15.0,
    "salinity": 35.0,
    "ph": 8.0,
    "depth_km": 0.0,
    "alpha": None,
    "sigma_mult": 0.1,
    "sigma_add": 0.01,
    "sigmoid_gain": 12.0,
    "sigmoid_center": 0.5,
    "seed": 0,
    "step_deg": 1.8,
    "position": [0.0, 0.0, 0.0],
    "rotation_deg": [0.0, 0.0, 0.0],
    "width": None,
    "height": None,
    "noise": True,
    "attenuation": True,
    "secondary": True,
    "roughness": True,
    "dump_shader": False,
    "out": "sonar",
    "bits": 8,
    "figure": None,
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    scene: str | None
    sonar: SonarConfig
    out: str
    bits: int
    dump_shader: bool
    figure: str | None
    effective: dict


def _sonar_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("sonar")
    g.add_argument("--device", choices=["fls", "msis"], type=str.lower)
    g.add_argument("--beams", type=int)
    g.add_argument("--bins", type=int)
    g.add_argument("--fov-az-deg", type=float)
    g.add_argument("--fov-el-deg", type=float)
    g.add_argument("--range-min", type=float)
    g.add_argument("--range-max", type=float)
    g.add_argument("--frequency", type=float, help="kHz")
    g.add_argument("--step-deg", type=float, help="MSIS head step")
    g.add_argument("--position", type=float, nargs=3)
    g.add_argument("--rotation-deg", type=float, nargs=3, metavar=("ROLL", "PITCH", "YAW"))
    g.add_argument("--width", type=int, help="shader image width")
    g.add_argument("--height", type=int, help="shader image height")
    w = p.add_argument_group("water")
    w.add_argument("--temperature", type=float)
    w.add_argument("--salinity", type=float)
    w.add_argument("--ph", type=float)
    w.add_argument("--depth-km", type=float)
    w.add_argument("--alpha", type=float, help="attenuation in dB/km, overrides the water model")
    n = p.add_argument_group("noise")
    n.add_argument("--sigma-mult", type=float)
    n.add_argument("--sigma-add", type=float)
    n.add_argument("--sigmoid-gain", type=float)
    n.add_argument("--sigmoid-center", type=float)
    n.add_argument("--seed", type=int)
    f = p.add_argument_group("stages")
    for flag in ("noise", "attenuation", "secondary", "roughness"):
        f.add_argument(f"--{flag}", action=argparse.BooleanOptionalAction, default=None)


def _output_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output path prefix")
    p.add_argument("--bits", type=int, choices=[8, 16])
    p.add_argument("--dump-shader", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--figure", help="also write a PNG figure to this path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sonarsim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in (("render", "simulate one sonar frame"),
                        ("scan", "simulate a full MSIS revolution")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--scene", help="scene file")
        p.add_argument("--config", help="YAML file with option defaults")
        _sonar_options(p)
        _output_options(p)

    p = sub.add_parser("bench", help="timing benchmark over random scenes")
    p.add_argument("--preset", choices=sorted(PRESETS), default="paper-fls")
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ablation", action="store_true", help="also compare selective vs brute force")
    p.add_argument("--ablation-scenes", type=int, default=5)
    p.add_argument("--out", default="bench.tsv")
    p.add_argument("--figure")

    p = sub.add_parser("compare", help="similarity metrics between two frame files")
    p.add_argument("frame_a")
    p.add_argument("frame_b")
    p.add_argument("--out", help="also write the report to this file")
    return parser


def resolve_options(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    if getattr(args, "config", None):
        doc = load_yaml(args.config)
        if not isinstance(doc, dict):
            raise SceneFormatError(f"{args.config}: expected a mapping")
        for key, val in doc.items():
            k = key.replace("-", "_")
            if k not in DEFAULTS and k != "scene":
                raise SceneFormatError(f"{args.config}: unknown option {key!r}")
            opts[k] = val
    for key, val in vars(args).items():
        if val is not None and (key in DEFAULTS or key == "scene"):
            opts[key] = val
    return opts


def sonar_config_from_options(opts: dict) -> SonarConfig:
    device = str(opts["device"]).upper()
    noise_on = bool(opts["noise"])
    return SonarConfig(
        device=device,
        n_beams=1 if device == "MSIS" else int(opts["beams"]),
        n_bins=int(opts["bins"]),
        fov_azimuth=math.radians(float(opts["fov_az_deg"])),
        fov_elevation=math.radians(float(opts["fov_el_deg"])),
        range_min=float(opts["range_min"]),
        range_max=float(opts["range_max"]),
        frequency=float(opts["frequency"]),
        water=WaterProperties(float(opts["temperature"]), float(opts["salinity"]),
                              float(opts["ph"]), float(opts["depth_km"])),
        noise=NoiseParams(float(opts["sigma_mult"]) if noise_on else 0.0,
                          float(opts["sigma_add"]) if noise_on else 0.0,
                          int(opts["seed"])),
        sigmoid=SigmoidParams(float(opts["sigmoid_gain"]), float(opts["sigmoid_center"])),
        msis_step=math.radians(float(opts["step_deg"])),
        position=tuple(float(v) for v in opts["position"]),
        orientation_deg=tuple(float(v) for v in opts["rotation_deg"]),
        image_width=opts["width"],
        image_height=opts["height"],
        secondary=bool(opts["secondary"]),
        attenuation=bool(opts["attenuation"]),
        roughness=bool(opts["roughness"]),
        alpha=None if opts["alpha"] is None else float(opts["alpha"]),
    )


def run_config(args) -> RunConfig:
    opts = resolve_options(args)
    sonar = sonar_config_from_options(opts)
    return RunConfig(opts.get("scene"), sonar, str(opts["out"]), int(opts["bits"]),
                     bool(opts["dump_shader"]), opts["figure"], opts)


def _write_outputs(rc: RunConfig, frame, image, shader=None) -> list[str]:
    written = []
    out_dir = os.path.dirname(rc.out)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    frame_path = rc.out + ".sf"
    formats.write_frame(frame, frame_path)
    written.append(frame_path)
    echo = json.dumps(rc.effective, sort_keys=True)
    with open(rc.out + ".config.yaml", "w") as fh:
        yaml.safe_dump(rc.effective, fh, sort_keys=True)
    written.append(rc.out + ".config.yaml")
    if image is not None:
        path = rc.out + ".pgm"
        formats.write_pgm(image.pixels, path, rc.bits, comment=f"sonarsim {echo}")
        written.append(path)
    if rc.dump_shader and shader is not None:
        import numpy as np

        finite = np.isfinite(shader.distance)
        span = rc.sonar.range_max - rc.sonar.range_min
        dist = np.where(finite, (shader.distance - rc.sonar.range_min) / span, 0.0)
        formats.write_pgm(dist, rc.out + ".distance.pgm", 16)
        formats.write_pgm(shader.intensity, rc.out + ".intensity.pgm", 16)
        written += [rc.out + ".distance.pgm", rc.out + ".intensity.pgm"]
    return written


def _load_scene(rc: RunConfig):
    if not rc.scene:
        raise UsageError("--scene is required")
    if not os.path.exists(rc.scene):
        raise FileNotFoundError(f"scene file not found: {rc.scene}")
    return load_scene(rc.scene)


def cmd_render(args) -> int:
    rc = run_config(args)
    scene = _load_scene(rc)
    run = simulate_frame(scene, rc.sonar)
    written = _write_outputs(rc, run.frame, run.image, run.shader)
    if rc.figure:
        from .plotting import plot_frame, plot_shader

        plot_frame(run.frame, run.image, rc.figure)
        written.append(rc.figure)
        if rc.dump_shader:
            plot_shader(run.shader, rc.out + ".shader.png")
            written.append(rc.out + ".shader.png")
    for path in written:
        print(path)
    log.info("frame time %.1f ms, %d rays", run.total_ms, run.stats.rays_launched)
    return EXIT_OK


def cmd_scan(args) -> int:
    if args.device is None and not args.config:
        args.device = "msis"
    rc = run_config(args)
    if rc.sonar.device != "MSIS":
        raise UsageError("scan requires --device msis")
    scene = _load_scene(rc)
    mosaic, image, _ = simulate_scan(scene, rc.sonar)
    written = _write_outputs(rc, mosaic, image)
    if rc.figure:
        from .plotting import plot_frame

        plot_frame(mosaic, image, rc.figure)
        written.append(rc.figure)
    for path in written:
        print(path)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    configs = PRESETS[args.preset]
    report = run_benchmark(configs, args.samples, args.seed)
    text = report.to_tsv()
    if args.ablation:
        lines = ["scene_seed\tselective_ms\tbrute_force_ms\ttime_ratio\tselective_triangle_tests"
                 "\tbrute_force_triangle_tests\ttriangle_tests_skipped_by_box\tmax_intensity_diff"
                 "\tmax_distance_diff"]
        for k in range(args.ablation_scenes):
            cfg = configs[0]
            ab = run_ablation(benchmark_scene(args.seed + k, cfg), cfg)
            sel, bf = ab["selective_stats"], ab["brute_force_stats"]
            lines.append("\t".join(str(v) for v in (
                args.seed + k, f"{ab['selective_ms']:.3f}", f"{ab['brute_force_ms']:.3f}",
                f"{ab['time_ratio']:.3f}", sel.triangle_tests, bf.triangle_tests,
                sel.triangle_tests_skipped_by_box, f"{ab['max_intensity_diff']:.3g}",
                f"{ab['max_distance_diff']:.3g}")))
        text += "\n" + "\n".join(lines) + "\n"
    with open(args.out, "w") as fh:
        fh.write(text)
    sys.stdout.write(text)
    if args.figure:
        from .plotting import plot_benchmark

        plot_benchmark(report, args.figure)
    return EXIT_OK


def cmd_compare(args) -> int:
    a = formats.read_frame(args.frame_a)
    b = formats.read_frame(args.frame_b)
    if a.intensities.shape != b.intensities.shape:
        raise InvalidParameterError(
            f"frame shapes differ: {a.intensities.shape} vs {b.intensities.shape}")
    weights = fitting_weights(a.intensities.shape)
    report = compare(a.intensities, b.intensities, weights)
    text = "".join(f"{k}\t{v:.6f}\n" for k, v in report.as_dict().items())
    text += f"ms_ssim_scales\t{len(weights)}\n"
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    return EXIT_OK


COMMANDS = {"render": cmd_render, "scan": cmd_scan, "bench": cmd_bench, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"sonarsim {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SceneFormatError, formats.FrameFormatError) as exc:
        print(f"sonarsim {args.command}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"sonarsim {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvalidParameterError, PipelineError, ValueError) as exc:
        print(f"sonarsim {args.command}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
