"""Experiment configuration: a flat key-value file resolved to a dataclass.

Every run is fully determined by the config (no wall-clock seeding); the
resolved pairs are echoed into run manifests so artifacts regenerate
bit-exactly. Unknown keys are rejected with their line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import ConfigError, ParameterError
from .scenes import Scene, apply_gaussian_illumination, load_mask_bitmap, make_cross, make_rectangle
from .slm import ParticleSpec
from .textio import KeyValueFile, read_kv_file, write_kv_file
from .tv import TvConfig

SCENE_KINDS = ("rectangle", "cross", "bitmap")

_KNOWN_KEYS = {
    "seed", "out_dir", "canvas_px", "px_per_mm",
    "scene", "rect_width_mm", "rect_height_mm", "cross_outer_mm", "cross_arm_mm",
    "bitmap_path", "illumination_fwhm_mm",
    "particle_shape", "particle_diameter_px", "particle_inner_diameter_px",
    "particle_count", "clustering", "edge_softness_px",
    "threshold", "thresholds", "n_samples", "samples",
    "particle_diameters_px", "sweep_shapes", "n_runs", "mask_count",
    "noise_sigma_rel",
    "solver_mu", "solver_beta", "solver_variant", "solver_max_outer_iters",
    "solver_inner_cg_iters", "solver_rel_tol", "solver_nonneg", "solver_center_rows",
}


@dataclass
class ExperimentConfig:
    seed: int
    out_dir: str = "out"
    canvas_px: int = 64
    px_per_mm: float = 10.0

    scene: str = "rectangle"
    rect_width_mm: float = 3.0
    rect_height_mm: float = 5.0
    cross_outer_mm: float = 6.0
    cross_arm_mm: float = 1.0
    bitmap_path: str | None = None
    illumination_fwhm_mm: float = 0.0  # 0 disables the Gaussian beam profile

    particle_shape: str = "disk"
    particle_diameter_px: float = 10.0
    particle_inner_diameter_px: float | None = None
    particle_count: int = 70
    clustering: float = 0.3
    edge_softness_px: float = 4.0

    threshold: float = 60.0
    thresholds: list[float] = field(default_factory=lambda: [90.0, 60.0, 30.0])
    n_samples: int = 1000
    samples: list[int] = field(default_factory=lambda: [1000, 750, 500, 250, 100, 50])
    particle_diameters_px: list[float] = field(default_factory=lambda: [8.0, 12.0, 16.0, 20.0])
    sweep_shapes: list[str] = field(default_factory=lambda: ["annulus", "granule"])
    n_runs: int = 4
    mask_count: int = 16
    noise_sigma_rel: float = 0.0

    solver: TvConfig = field(default_factory=TvConfig)

    def particle_spec(self, shape: str | None = None, diameter_px: float | None = None) -> ParticleSpec:
        """Particle spec from the config, with optional shape/size overrides.

        When the diameter is overridden for an annulus, the bore scales with
        it so the ring geometry stays similar.
        """
        shape = shape if shape is not None else self.particle_shape
        d = diameter_px if diameter_px is not None else self.particle_diameter_px
        inner = None
        if shape == "annulus":
            base_inner = self.particle_inner_diameter_px
            if base_inner is None:
                base_inner = 0.25 * self.particle_diameter_px
            inner = base_inner * (d / self.particle_diameter_px)
        return ParticleSpec(
            shape=shape,
            diameter_px=d,
            count=self.particle_count,
            clustering=self.clustering,
            edge_softness_px=self.edge_softness_px,
            inner_diameter_px=inner,
        )

    def build_scene(self) -> Scene:
        if self.scene == "rectangle":
            scene = make_rectangle(self.rect_width_mm, self.rect_height_mm, self.canvas_px, self.px_per_mm)
        elif self.scene == "cross":
            scene = make_cross(self.cross_outer_mm, self.cross_arm_mm, self.canvas_px, self.px_per_mm)
        elif self.scene == "bitmap":
            if self.bitmap_path is None:
                raise ConfigError("scene = bitmap requires bitmap_path")
            scene = load_mask_bitmap(self.bitmap_path, self.px_per_mm)
        else:
            raise ConfigError(f"unknown scene kind {self.scene!r}, expected one of {SCENE_KINDS}")
        if self.illumination_fwhm_mm > 0:
            scene = apply_gaussian_illumination(scene, self.illumination_fwhm_mm)
        return scene

    def to_pairs(self) -> dict:
        """Resolved config as manifest pairs, in a fixed order."""
        pairs = {
            "seed": self.seed,
            "out_dir": self.out_dir,
            "canvas_px": self.canvas_px,
            "px_per_mm": self.px_per_mm,
            "scene": self.scene,
            "rect_width_mm": self.rect_width_mm,
            "rect_height_mm": self.rect_height_mm,
            "cross_outer_mm": self.cross_outer_mm,
            "cross_arm_mm": self.cross_arm_mm,
        }
        if self.bitmap_path is not None:
            pairs["bitmap_path"] = self.bitmap_path
        pairs.update(
            illumination_fwhm_mm=self.illumination_fwhm_mm,
            particle_shape=self.particle_shape,
            particle_diameter_px=self.particle_diameter_px,
        )
        if self.particle_inner_diameter_px is not None:
            pairs["particle_inner_diameter_px"] = self.particle_inner_diameter_px
        pairs.update(
            particle_count=self.particle_count,
            clustering=self.clustering,
            edge_softness_px=self.edge_softness_px,
            threshold=self.threshold,
            thresholds=self.thresholds,
            n_samples=self.n_samples,
            samples=self.samples,
            particle_diameters_px=self.particle_diameters_px,
            sweep_shapes=self.sweep_shapes,
            n_runs=self.n_runs,
            mask_count=self.mask_count,
            noise_sigma_rel=self.noise_sigma_rel,
            solver_mu="auto" if self.solver.mu is None else self.solver.mu,
            solver_beta=self.solver.beta,
            solver_variant=self.solver.variant,
            solver_max_outer_iters=self.solver.max_outer_iters,
            solver_inner_cg_iters=self.solver.inner_cg_iters,
            solver_rel_tol=self.solver.rel_tol,
            solver_nonneg=self.solver.nonneg,
            solver_center_rows=self.solver.center_rows,
        )
        return pairs

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed)


def config_from_kv(kv: KeyValueFile) -> ExperimentConfig:
    for key in kv.pairs:
        if key not in _KNOWN_KEYS:
            line = kv.lines.get(key)
            raise ConfigError(f"{kv.source}:{line}: unknown key '{key}'")
    if "seed" not in kv:
        raise ConfigError(f"{kv.source}: missing required key 'seed'")

    mu_raw = kv.get_str("solver_mu", "auto")
    if mu_raw == "auto":
        mu = None
    else:
        try:
            mu = float(mu_raw)
        except ValueError:
            raise ConfigError(f"{kv.source}: key 'solver_mu' must be a number or 'auto'") from None
    try:
        solver = TvConfig(
            mu=mu,
            beta=kv.get_float("solver_beta", 32.0),
            variant=kv.get_str("solver_variant", "isotropic"),
            max_outer_iters=kv.get_int("solver_max_outer_iters", 400),
            inner_cg_iters=kv.get_int("solver_inner_cg_iters", 8),
            rel_tol=kv.get_float("solver_rel_tol", 1e-4),
            nonneg=kv.get_bool("solver_nonneg", True),
            center_rows=kv.get_bool("solver_center_rows", True),
        )
    except ParameterError as e:
        raise ConfigError(f"{kv.source}: {e}") from None

    inner_raw = kv.get_str("particle_inner_diameter_px", "none")
    inner = None if inner_raw.lower() == "none" else kv.get_float("particle_inner_diameter_px")

    shapes = [s.strip() for s in kv.get_str("sweep_shapes", "annulus,granule").split(",") if s.strip()]

    cfg = ExperimentConfig(
        seed=kv.get_int("seed"),
        out_dir=kv.get_str("out_dir", "out"),
        canvas_px=kv.get_int("canvas_px", 64),
        px_per_mm=kv.get_float("px_per_mm", 10.0),
        scene=kv.get_str("scene", "rectangle"),
        rect_width_mm=kv.get_float("rect_width_mm", 3.0),
        rect_height_mm=kv.get_float("rect_height_mm", 5.0),
        cross_outer_mm=kv.get_float("cross_outer_mm", 6.0),
        cross_arm_mm=kv.get_float("cross_arm_mm", 1.0),
        bitmap_path=kv.get_str("bitmap_path", "") or None,
        illumination_fwhm_mm=kv.get_float("illumination_fwhm_mm", 0.0),
        particle_shape=kv.get_str("particle_shape", "disk"),
        particle_diameter_px=kv.get_float("particle_diameter_px", 10.0),
        particle_inner_diameter_px=inner,
        particle_count=kv.get_int("particle_count", 70),
        clustering=kv.get_float("clustering", 0.3),
        edge_softness_px=kv.get_float("edge_softness_px", 4.0),
        threshold=kv.get_float("threshold", 60.0),
        thresholds=kv.get_float_list("thresholds", [90.0, 60.0, 30.0]),
        n_samples=kv.get_int("n_samples", 1000),
        samples=kv.get_int_list("samples", [1000, 750, 500, 250, 100, 50]),
        particle_diameters_px=kv.get_float_list("particle_diameters_px", [8.0, 12.0, 16.0, 20.0]),
        sweep_shapes=shapes,
        n_runs=kv.get_int("n_runs", 4),
        mask_count=kv.get_int("mask_count", 16),
        noise_sigma_rel=kv.get_float("noise_sigma_rel", 0.0),
        solver=solver,
    )
    if cfg.scene not in SCENE_KINDS:
        raise ConfigError(f"{kv.source}: scene must be one of {SCENE_KINDS}, got {cfg.scene!r}")
    return cfg


def load_config(path) -> ExperimentConfig:
    return config_from_kv(read_kv_file(path))


def write_config(path, cfg: ExperimentConfig, header: str | None = None) -> None:
    write_kv_file(path, cfg.to_pairs(), header=header)
