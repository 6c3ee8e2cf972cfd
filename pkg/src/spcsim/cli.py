"""Command-line entry point.

Subcommands: mask-gen, acquire, reconstruct, analyze, sweep-threshold,
sweep-samples, sweep-size, repeat, full. Exit codes: 0 success,
1 parameter/config error, 2 I/O error, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .analysis import cutoff_slope, quality, radial_spectrum, write_spectrum_csv
from .config import ExperimentConfig, load_config
from .errors import (
    ConfigError,
    DataError,
    FlatSpectrumError,
    ParameterError,
    PgmFormatError,
    SetCorruptionError,
    ShapeMismatchError,
)
from .experiments import (
    run_full,
    run_particle_size_sweep,
    run_repeatability,
    run_sample_sweep,
    run_threshold_sweep,
    save_recon,
)
from .measurement import NoiseModel, acquire_set, load_set, save_set
from .pgm import read_pgm
from .seeds import record_seed
from .slm import generate_mask, mask_sidecar_pairs, save_mask
from .textio import write_kv_file
from .tv import solve_tv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NO_CONVERGENCE = 3


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as config errors (exit code 1)."""

    def error(self, message):
        raise ConfigError(message)


def _load_cfg(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("--config is required for this command")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _out_dir(args, cfg: ExperimentConfig | None = None) -> Path:
    if args.out is not None:
        return Path(args.out)
    if cfg is not None:
        return Path(cfg.out_dir)
    raise ConfigError("--out is required for this command")


def cmd_mask_gen(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    spec = cfg.particle_spec()
    for i in range(cfg.mask_count):
        seed = record_seed(cfg.seed, i)
        mask = generate_mask(spec, cfg.canvas_px, cfg.canvas_px, cfg.threshold, seed)
        save_mask(mask, out / f"mask_{i:04d}.pgm")
        write_kv_file(out / f"mask_{i:04d}.txt", mask_sidecar_pairs(spec, seed, cfg.threshold),
                      header="sampling mask sidecar")
    if not args.quiet:
        print(f"wrote {cfg.mask_count} masks to {out}")
    return EXIT_OK


def cmd_acquire(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    scene = cfg.build_scene()
    mset = acquire_set(scene, cfg.particle_spec(), cfg.n_samples, cfg.threshold,
                       NoiseModel(cfg.noise_sigma_rel), cfg.seed)
    save_set(mset, out)
    if not args.quiet:
        print(f"acquired {len(mset)} samples into {out}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    if args.set is None:
        raise ConfigError("--set <measurement set directory> is required")
    solver = _load_cfg(args).solver if args.config else None
    mset = load_set(args.set)
    out = Path(args.out) if args.out is not None else Path(args.set)
    out.mkdir(parents=True, exist_ok=True)
    result = solve_tv(mset) if solver is None else solve_tv(mset, solver)
    save_recon(result, out)
    if not args.quiet:
        print(f"reconstruction written to {out} "
              f"({result.outer_iters_used} outer iters, rel change {result.final_rel_change:.2e})")
    if not result.converged:
        if not args.quiet:
            print("warning: solver hit max outer iterations before reaching rel_tol", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.image is None:
        raise ConfigError("--image <graymap> is required")
    img = read_pgm(args.image).astype(np.float64)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    spectrum = radial_spectrum(img)
    try:
        cut = cutoff_slope(spectrum)
        write_spectrum_csv(out / "spectrum.csv", spectrum, cutoff=cut)
    except (FlatSpectrumError, ParameterError) as e:
        cut = None
        write_spectrum_csv(out / "spectrum.csv", spectrum, cutoff_error=str(e))
    if args.reference is not None:
        ref = read_pgm(args.reference).astype(np.float64)
        q = quality(ref, img)
        write_kv_file(out / "quality.txt", {"rel_l2_error": q.rel_l2_error, "psnr_db": q.psnr_db},
                      header="quality vs reference image")
    if not args.quiet:
        msg = f"spectrum written to {out}"
        if cut is not None:
            msg += f" (cutoff slope {cut.slope:.3f} over radii {cut.fit_range})"
        print(msg)
    return EXIT_OK


def cmd_sweep_threshold(args) -> int:
    cfg = _load_cfg(args)
    run_threshold_sweep(cfg, _out_dir(args, cfg), progress=not args.quiet)
    return EXIT_OK


def cmd_sweep_samples(args) -> int:
    cfg = _load_cfg(args)
    run_sample_sweep(cfg, _out_dir(args, cfg), progress=not args.quiet)
    return EXIT_OK


def cmd_sweep_size(args) -> int:
    cfg = _load_cfg(args)
    run_particle_size_sweep(cfg, _out_dir(args, cfg), progress=not args.quiet)
    return EXIT_OK


def cmd_repeat(args) -> int:
    cfg = _load_cfg(args)
    run_repeatability(cfg, out_dir=_out_dir(args, cfg), progress=not args.quiet)
    return EXIT_OK


def cmd_full(args) -> int:
    cfg = _load_cfg(args)
    result = run_full(cfg, _out_dir(args, cfg), progress=not args.quiet)
    if not result.recon.converged:
        if not args.quiet:
            print("warning: solver hit max outer iterations before reaching rel_tol", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


_COMMANDS = {
    "mask-gen": cmd_mask_gen,
    "acquire": cmd_acquire,
    "reconstruct": cmd_reconstruct,
    "analyze": cmd_analyze,
    "sweep-threshold": cmd_sweep_threshold,
    "sweep-samples": cmd_sweep_samples,
    "sweep-size": cmd_sweep_size,
    "repeat": cmd_repeat,
    "full": cmd_full,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spcsim",
                     description="Single-pixel camera simulator with a stochastic particle modulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="experiment config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        if name == "reconstruct":
            p.add_argument("--set", type=str, default=None, help="measurement set directory")
        if name == "analyze":
            p.add_argument("--image", type=str, default=None, help="image graymap to analyze")
            p.add_argument("--reference", type=str, default=None, help="reference graymap for quality metrics")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (ConfigError, ParameterError, DataError, ShapeMismatchError, FlatSpectrumError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, PgmFormatError, SetCorruptionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
