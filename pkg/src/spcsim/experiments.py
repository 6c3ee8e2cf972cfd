"""Experiment drivers: the sweeps behind the threshold, sample-count,
particle-size, and repeatability studies, plus the one-shot full pipeline.

Every driver writes its artifacts under one directory: per-cell subdirectories
with the reconstruction (affine-rescaled P5 plus a sidecar holding the exact
rescaling constants and iteration diagnostics), spectra as CSV, and a summary
table. A failing cell leaves a FAILED.txt marker and the sweep continues.
All randomness derives from the config seed.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import (
    CutoffEstimate,
    QualityMetrics,
    RadialSpectrum,
    average_spectra,
    cutoff_slope,
    fraction_within_band,
    quality,
    radial_spectrum,
    write_spectrum_csv,
)
from .config import ExperimentConfig
from .errors import ParameterError, ShapeMismatchError
from .measurement import MeasurementRecord, MeasurementSet, NoiseModel, acquire_set, measure, save_set
from .pgm import write_pgm
from .scenes import Scene
from .seeds import noise_seed, record_seed
from .slm import ParticleSpec, place_particles, render_frame, threshold_frame
from .textio import write_kv_file
from .tv import ReconResult, solve_tv


@dataclass
class SweepCell:
    label: str
    path: Path
    quality: Optional[QualityMetrics] = None
    spectrum: Optional[RadialSpectrum] = None
    cutoff: Optional[CutoffEstimate] = None
    recon: Optional[ReconResult] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class SweepResult:
    out_dir: Path
    cells: list[SweepCell] = field(default_factory=list)

    def cell(self, label: str) -> SweepCell:
        for c in self.cells:
            if c.label == label:
                return c
        raise KeyError(label)


@dataclass
class RepeatabilityResult:
    out_dir: Path
    spectra: list[RadialSpectrum]
    mean_spectrum: RadialSpectrum
    std: np.ndarray
    fraction_within_2std: float


@dataclass
class FullRunResult:
    out_dir: Path
    mset: MeasurementSet
    recon: ReconResult
    spectrum: RadialSpectrum
    quality: QualityMetrics


def composite_add(images: list[np.ndarray]) -> np.ndarray:
    """Pointwise sum of same-shape images (multi-exposure composites)."""
    if not images:
        raise ParameterError("composite_add needs at least one image")
    out = np.array(images[0], dtype=np.float64)
    for img in images[1:]:
        arr = np.asarray(img, dtype=np.float64)
        if arr.shape != out.shape:
            raise ShapeMismatchError(f"image {arr.shape} in a {out.shape} composite")
        out += arr
    return out


def save_recon(result: ReconResult, directory: Path, name: str = "recon") -> None:
    """Write a reconstruction as P5 after affine rescaling to [0, 255].

    The sidecar records the exact rescaling constants and iteration
    diagnostics, so the raw intensities are recoverable.
    """
    img = result.image
    lo = float(img.min())
    hi = float(img.max())
    if hi > lo:
        u8 = np.rint((img - lo) * (255.0 / (hi - lo))).astype(np.uint8)
    else:
        u8 = np.zeros(img.shape, dtype=np.uint8)
    write_pgm(directory / f"{name}.pgm", u8)
    write_kv_file(
        directory / f"{name}_meta.txt",
        {
            "rescale_min": lo,
            "rescale_max": hi,
            "outer_iters_used": result.outer_iters_used,
            "final_rel_change": result.final_rel_change,
            "data_residual": result.data_residual,
            "converged": result.converged,
        },
        header="reconstruction sidecar",
    )


def _write_summary(path: Path, header: str, rows: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(row + "\n")


def _fail_cell(cell: SweepCell, exc: Exception, progress: bool) -> None:
    cell.error = f"{type(exc).__name__}: {exc}"
    cell.path.mkdir(parents=True, exist_ok=True)
    (cell.path / "FAILED.txt").write_text(cell.error + "\n", encoding="utf-8")
    if progress:
        print(f"  {cell.label}: FAILED ({cell.error})")


def acquire_multi_threshold(
    scene: Scene,
    spec: ParticleSpec,
    m: int,
    thresholds: list[float],
    noise: NoiseModel,
    seed: int,
) -> dict[float, MeasurementSet]:
    """One set per threshold, all sharing the same particle frames.

    Equivalent to calling acquire_set once per threshold with the same seed
    (record i's placement depends only on (seed, i)), but renders each frame
    once, which is what the threshold study needs: identical physics,
    different binarization.
    """
    if m < 1:
        raise ParameterError(f"sample count must be >= 1, got {m}")
    masks = {t: [] for t in thresholds}
    records = {t: [] for t in thresholds}
    for i in range(m):
        rs = record_seed(seed, i)
        placement = place_particles(spec, scene.width_px, scene.height_px, rs)
        frame = render_frame(placement, spec)
        ns = noise_seed(rs)
        for t in thresholds:
            mask = threshold_frame(frame, t)
            power = measure(scene, mask, noise, seed=ns)
            masks[t].append(mask)
            records[t].append(MeasurementRecord(mask_id=i, power=power))
    return {
        t: MeasurementSet(
            records[t], masks[t], scene.width_px, scene.height_px,
            float(t), noise.sigma_rel, seed, spec,
        )
        for t in thresholds
    }


def run_threshold_sweep(cfg: ExperimentConfig, out_dir=None, progress: bool = False) -> SweepResult:
    """Reconstruct at every (particle shape, threshold) combination."""
    if not cfg.thresholds:
        raise ParameterError("thresholds list is empty")
    if not cfg.sweep_shapes:
        raise ParameterError("sweep_shapes list is empty")
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scene = cfg.build_scene()
    noise = NoiseModel(cfg.noise_sigma_rel)
    result = SweepResult(out)
    rows = []
    for shape in cfg.sweep_shapes:
        spec = cfg.particle_spec(shape=shape)
        sets = acquire_multi_threshold(scene, spec, cfg.n_samples, cfg.thresholds, noise, cfg.seed)
        for t in cfg.thresholds:
            label = f"{shape}_t{t:g}"
            cell = SweepCell(label, out / label)
            result.cells.append(cell)
            try:
                recon = solve_tv(sets[t], cfg.solver)
                cell.recon = recon
                cell.quality = quality(scene.intensity, recon.image)
                cell.path.mkdir(parents=True, exist_ok=True)
                save_recon(recon, cell.path)
                rows.append(f"{shape},{t:g},{cell.quality.rel_l2_error!r},{cell.quality.psnr_db!r},ok")
                if progress:
                    print(f"  {label}: rel_err={cell.quality.rel_l2_error:.4f}")
            except Exception as e:  # keep completed cells, mark this one
                _fail_cell(cell, e, progress)
                rows.append(f"{shape},{t:g},,,failed")
    _write_summary(out / "summary.csv", "shape,threshold,rel_l2_error,psnr_db,status", rows)
    return result


def run_sample_sweep(cfg: ExperimentConfig, out_dir=None, progress: bool = False) -> SweepResult:
    """Reconstruct from nested prefixes of one master measurement set."""
    if not cfg.samples:
        raise ParameterError("samples list is empty")
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scene = cfg.build_scene()
    spec = cfg.particle_spec()
    noise = NoiseModel(cfg.noise_sigma_rel)
    master_m = max(cfg.samples)
    master = acquire_set(scene, spec, master_m, cfg.threshold, noise, cfg.seed)
    result = SweepResult(out)
    rows = []
    for m in cfg.samples:
        label = f"m{m}"
        cell = SweepCell(label, out / label)
        result.cells.append(cell)
        try:
            sub = master.prefix(m)
            recon = solve_tv(sub, cfg.solver)
            cell.recon = recon
            cell.quality = quality(scene.intensity, recon.image)
            cell.spectrum = radial_spectrum(recon.image)
            cell.path.mkdir(parents=True, exist_ok=True)
            save_recon(recon, cell.path)
            write_spectrum_csv(cell.path / "spectrum.csv", cell.spectrum)
            rows.append(f"{m},{cell.quality.rel_l2_error!r},{cell.quality.psnr_db!r},ok")
            if progress:
                print(f"  {label}: rel_err={cell.quality.rel_l2_error:.4f}")
        except Exception as e:
            _fail_cell(cell, e, progress)
            rows.append(f"{m},,,failed")
    _write_summary(out / "summary.csv", "samples,rel_l2_error,psnr_db,status", rows)
    return result


def run_particle_size_sweep(cfg: ExperimentConfig, out_dir=None, progress: bool = False) -> SweepResult:
    """Reconstruct at several particle diameters and rank them by cutoff.

    Particle counts scale as (reference diameter / diameter)^2 so the opaque
    coverage stays comparable across sizes (a fixed-volume container holds
    fewer large beads); otherwise large diameters saturate the masks and the
    sweep would measure coverage collapse, not particle size. A steeper (more
    negative) spectrum slope marks a lower cutoff frequency, so the summary
    lists diameters from highest to lowest cutoff.
    """
    if len(cfg.particle_diameters_px) < 2:
        raise ParameterError("particle size sweep needs >= 2 diameters")
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scene = cfg.build_scene()
    noise = NoiseModel(cfg.noise_sigma_rel)
    result = SweepResult(out)
    for d in cfg.particle_diameters_px:
        label = f"d{d:g}"
        cell = SweepCell(label, out / label)
        result.cells.append(cell)
        try:
            spec = cfg.particle_spec(diameter_px=d)
            scaled = max(1, round(cfg.particle_count * (cfg.particle_diameter_px / d) ** 2))
            spec = replace(spec, count=scaled)
            mset = acquire_set(scene, spec, cfg.n_samples, cfg.threshold, noise, cfg.seed)
            recon = solve_tv(mset, cfg.solver)
            cell.recon = recon
            cell.quality = quality(scene.intensity, recon.image)
            cell.spectrum = radial_spectrum(recon.image)
            cell.cutoff = cutoff_slope(cell.spectrum)
            cell.path.mkdir(parents=True, exist_ok=True)
            save_recon(recon, cell.path)
            write_spectrum_csv(cell.path / "spectrum.csv", cell.spectrum, cutoff=cell.cutoff)
            if progress:
                print(f"  {label}: slope={cell.cutoff.slope:.3f} rel_err={cell.quality.rel_l2_error:.4f}")
        except Exception as e:
            _fail_cell(cell, e, progress)

    ranked = sorted((c for c in result.cells if c.ok), key=lambda c: abs(c.cutoff.slope))
    rows = [
        f"{c.label[1:]},{c.cutoff.slope!r},{c.cutoff.fit_range[0]},{c.cutoff.fit_range[1]},"
        f"{c.cutoff.noise_floor!r},{c.quality.rel_l2_error!r},ok"
        for c in ranked
    ]
    rows += [f"{c.label[1:]},,,,,,failed" for c in result.cells if not c.ok]
    _write_summary(
        out / "summary.csv",
        "diameter_px,cutoff_slope,fit_lo,fit_hi,noise_floor,rel_l2_error,status"
        " # rows ordered highest cutoff (shallowest slope) first",
        rows,
    )
    return result


def run_repeatability(cfg: ExperimentConfig, n_runs: int | None = None, out_dir=None,
                      progress: bool = False) -> RepeatabilityResult:
    """Repeat one acquisition+reconstruction with derived seeds; band-check spectra."""
    n = cfg.n_runs if n_runs is None else n_runs
    if n < 2:
        raise ParameterError(f"repeatability needs >= 2 runs, got {n}")
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scene = cfg.build_scene()
    spec = cfg.particle_spec()
    noise = NoiseModel(cfg.noise_sigma_rel)
    spectra = []
    for r in range(n):
        run_seed = record_seed(cfg.seed, r)
        mset = acquire_set(scene, spec, cfg.n_samples, cfg.threshold, noise, run_seed)
        recon = solve_tv(mset, cfg.solver)
        spectrum = radial_spectrum(recon.image)
        spectra.append(spectrum)
        run_dir = out / f"run_{r}"
        run_dir.mkdir(parents=True, exist_ok=True)
        save_recon(recon, run_dir)
        write_spectrum_csv(run_dir / "spectrum.csv", spectrum)
        if progress:
            print(f"  run {r}: seed={run_seed}")
    mean, std = average_spectra(spectra)
    fraction = fraction_within_band(spectra, n_std=2.0)
    write_spectrum_csv(out / "mean_spectrum.csv", mean, std=std)
    write_kv_file(out / "summary.txt", {"n_runs": n, "fraction_within_2std": fraction},
                  header="repeatability summary")
    return RepeatabilityResult(out, spectra, mean, std, fraction)


@contextlib.contextmanager
def _stage(name: str):
    """Prefix exceptions with the failing pipeline stage."""
    try:
        yield
    except Exception as e:
        e.args = (f"[{name} stage] {e}",) + e.args[1:]
        raise


def run_full(cfg: ExperimentConfig, out_dir=None, progress: bool = False) -> FullRunResult:
    """Acquire, reconstruct, analyze; leave a manifest that regenerates it all."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with _stage("config"):
        scene = cfg.build_scene()
        spec = cfg.particle_spec()
        noise = NoiseModel(cfg.noise_sigma_rel)
        pairs = cfg.to_pairs()
        pairs.update(scene_width_px=scene.width_px, scene_height_px=scene.height_px)
        write_kv_file(out / "manifest.txt", pairs, header="full-run manifest")

    with _stage("acquire"):
        mset = acquire_set(scene, spec, cfg.n_samples, cfg.threshold, noise, cfg.seed)
        save_set(mset, out / "set")
        if progress:
            print(f"  acquired {len(mset)} samples")

    with _stage("reconstruct"):
        recon = solve_tv(mset, cfg.solver)
        save_recon(recon, out)
        if progress:
            print(f"  reconstructed in {recon.outer_iters_used} outer iterations")

    with _stage("analyze"):
        spectrum = radial_spectrum(recon.image)
        try:
            cutoff = cutoff_slope(spectrum)
            write_spectrum_csv(out / "spectrum.csv", spectrum, cutoff=cutoff)
        except Exception as e:
            write_spectrum_csv(out / "spectrum.csv", spectrum, cutoff_error=str(e))
        q = quality(scene.intensity, recon.image)
        write_kv_file(out / "quality.txt", {"rel_l2_error": q.rel_l2_error, "psnr_db": q.psnr_db},
                      header="quality vs ground-truth scene")
        if progress:
            print(f"  rel_err={q.rel_l2_error:.4f}")

    return FullRunResult(out, mset, recon, spectrum, q)
