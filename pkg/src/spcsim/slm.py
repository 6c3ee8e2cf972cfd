"""Stochastic light modulator: a container of opaque particles observed by a camera.

Each measurement re-randomizes particle positions; a grayscale frame of the
container (0 = black, 100 = white, mirroring the camera convention) is
thresholded into a binary sampling mask. Soft particle rims are modeled as a
linear gray ramp of configurable width, which is what makes the threshold
level matter at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError, ShapeMismatchError
from .pgm import read_pgm, write_pgm

PARTICLE_SHAPES = ("disk", "annulus", "granule")

_BLOB_VERTICES = 12
_BLOB_RADIUS_JITTER = 0.3  # blob radius varies +-30% of the mean radius


@dataclass(frozen=True)
class ParticleSpec:
    """Geometry and statistics of the particles filling the container."""

    shape: str
    diameter_px: float
    count: int
    clustering: float = 0.0
    edge_softness_px: float = 0.0
    inner_diameter_px: Optional[float] = None

    def __post_init__(self):
        if self.shape not in PARTICLE_SHAPES:
            raise ParameterError(f"unknown particle shape {self.shape!r}, expected one of {PARTICLE_SHAPES}")
        if self.diameter_px <= 0:
            raise ParameterError(f"diameter_px must be positive, got {self.diameter_px}")
        if self.count < 1:
            raise ParameterError(f"count must be >= 1, got {self.count}")
        if not 0.0 <= self.clustering <= 1.0:
            raise ParameterError(f"clustering must be in [0, 1], got {self.clustering}")
        if self.edge_softness_px < 0:
            raise ParameterError(f"edge_softness_px must be >= 0, got {self.edge_softness_px}")
        if self.shape == "annulus":
            if self.inner_diameter_px is None:
                raise ParameterError("annulus requires inner_diameter_px")
            if not 0 <= self.inner_diameter_px < self.diameter_px:
                raise ParameterError(
                    f"inner diameter {self.inner_diameter_px} must be in [0, {self.diameter_px})"
                )
        elif self.inner_diameter_px is not None:
            raise ParameterError(f"inner_diameter_px only applies to annulus, not {self.shape}")

    def outer_radius_px(self) -> float:
        r = self.diameter_px / 2.0
        if self.shape == "granule":
            r *= 1.0 + _BLOB_RADIUS_JITTER
        return r


@dataclass(frozen=True)
class ParticlePlacement:
    """Poses of all particles for one frame: centers (x, y), rotations, blob outlines."""

    frame_w: int
    frame_h: int
    centers: np.ndarray  # (count, 2) float64, x then y, inside [0, W) x [0, H)
    angles: np.ndarray  # (count,) float64 radians
    blob_radii: Optional[np.ndarray] = None  # (count, 12) radius multipliers, granule only

    @property
    def count(self) -> int:
        return self.centers.shape[0]


@dataclass(frozen=True)
class SlmFrame:
    """Grayscale camera image of the container, values in [0, 100]."""

    width_px: int
    height_px: int
    gray: np.ndarray  # (height_px, width_px) float64 in [0, 100]

    def __post_init__(self):
        if self.gray.shape != (self.height_px, self.width_px):
            raise ShapeMismatchError(f"gray shape {self.gray.shape} != ({self.height_px}, {self.width_px})")
        if self.gray.min() < 0 or self.gray.max() > 100:
            raise ParameterError("gray values must lie in [0, 100]")


@dataclass(frozen=True)
class SamplingMask:
    """Binary transmission matrix: 1 = transparent, 0 = opaque."""

    width_px: int
    height_px: int
    transmit: np.ndarray  # (height_px, width_px) uint8 in {0, 1}
    threshold_used: float

    def __post_init__(self):
        if self.transmit.shape != (self.height_px, self.width_px):
            raise ShapeMismatchError(
                f"transmit shape {self.transmit.shape} != ({self.height_px}, {self.width_px})"
            )


def place_particles(spec: ParticleSpec, frame_w: int, frame_h: int, seed: int) -> ParticlePlacement:
    """Draw particle poses for one frame.

    Each center comes from a mixture: with probability ``spec.clustering`` a
    truncated isotropic Gaussian centered on the frame (sigma = frame_w / 6,
    redrawn until inside bounds), otherwise uniform over the frame. All draws
    come from one PCG64 stream keyed by ``seed``, so a (spec, seed) pair fixes
    the placement bitwise.
    """
    if frame_w <= 0 or frame_h <= 0:
        raise ParameterError(f"frame dimensions must be positive, got {frame_w}x{frame_h}")
    if spec.diameter_px >= min(frame_w, frame_h):
        raise ParameterError(
            f"particle diameter {spec.diameter_px} px does not fit a {frame_w}x{frame_h} frame"
        )
    rng = np.random.default_rng(seed)
    n = spec.count
    clustered = rng.random(n) < spec.clustering
    centers = np.empty((n, 2), dtype=np.float64)

    n_uniform = int(np.count_nonzero(~clustered))
    if n_uniform:
        centers[~clustered] = rng.uniform((0.0, 0.0), (frame_w, frame_h), size=(n_uniform, 2))

    pending = np.flatnonzero(clustered)
    mean = np.array([frame_w / 2.0, frame_h / 2.0])
    sigma = frame_w / 6.0
    while pending.size:
        draws = rng.normal(loc=mean, scale=sigma, size=(pending.size, 2))
        ok = (
            (draws[:, 0] >= 0.0)
            & (draws[:, 0] < frame_w)
            & (draws[:, 1] >= 0.0)
            & (draws[:, 1] < frame_h)
        )
        centers[pending[ok]] = draws[ok]
        pending = pending[~ok]

    angles = rng.uniform(0.0, 2.0 * np.pi, size=n)
    blob_radii = None
    if spec.shape == "granule":
        blob_radii = rng.uniform(
            1.0 - _BLOB_RADIUS_JITTER, 1.0 + _BLOB_RADIUS_JITTER, size=(n, _BLOB_VERTICES)
        )
    return ParticlePlacement(frame_w, frame_h, centers, angles, blob_radii)


def _rim_ramp(depth: np.ndarray, softness: float) -> np.ndarray:
    """Gray level from signed depth inside the opaque region.

    Fully dark at depth >= softness, linear ramp to 100 at the rim, 100 outside.
    """
    if softness == 0.0:
        return np.where(depth > 0.0, 0.0, 100.0)
    return 100.0 * np.clip(1.0 - depth / softness, 0.0, 1.0)


def render_frame(placement: ParticlePlacement, spec: ParticleSpec) -> SlmFrame:
    """Render the grayscale container image for a placement.

    Background is 100; overlapping particles combine by pointwise minimum, so
    the result is independent of particle order.
    """
    w, h = placement.frame_w, placement.frame_h
    gray = np.full((h, w), 100.0)
    softness = spec.edge_softness_px
    reach = spec.outer_radius_px() + softness + 1.0
    r_outer = spec.diameter_px / 2.0
    r_inner = spec.inner_diameter_px / 2.0 if spec.shape == "annulus" else 0.0
    vertex_angles = 2.0 * np.pi * np.arange(_BLOB_VERTICES) / _BLOB_VERTICES

    for i in range(placement.count):
        cx, cy = placement.centers[i]
        x0 = max(int(np.floor(cx - reach)), 0)
        x1 = min(int(np.ceil(cx + reach)) + 1, w)
        y0 = max(int(np.floor(cy - reach)), 0)
        y1 = min(int(np.ceil(cy + reach)) + 1, h)
        if x0 >= x1 or y0 >= y1:
            continue
        xs = np.arange(x0, x1, dtype=np.float64) + 0.5 - cx
        ys = np.arange(y0, y1, dtype=np.float64) + 0.5 - cy
        dx = xs[None, :]
        dy = ys[:, None]
        radius = np.hypot(dx, dy)

        if spec.shape == "disk":
            depth = r_outer - radius
        elif spec.shape == "annulus":
            depth = np.minimum(radius - r_inner, r_outer - radius)
        else:  # granule: star-convex blob, radial depth against the outline
            theta = np.arctan2(dy, dx) - placement.angles[i]
            rho = r_outer * np.interp(
                theta, vertex_angles, placement.blob_radii[i], period=2.0 * np.pi
            )
            depth = rho - radius

        patch = gray[y0:y1, x0:x1]
        np.minimum(patch, _rim_ramp(depth, softness), out=patch)

    return SlmFrame(w, h, gray)


def threshold_frame(frame: SlmFrame, t: float) -> SamplingMask:
    """Binarize a frame: pixels with gray >= t transmit, the rest are opaque."""
    if not 0.0 <= t <= 100.0:
        raise ParameterError(f"threshold must be in [0, 100], got {t}")
    transmit = (frame.gray >= t).astype(np.uint8)
    return SamplingMask(frame.width_px, frame.height_px, transmit, float(t))


def opaque_fraction(mask: SamplingMask) -> float:
    """Fraction of mask pixels that block light."""
    return float(1.0 - mask.transmit.mean())


def generate_mask(spec: ParticleSpec, frame_w: int, frame_h: int, threshold: float, seed: int) -> SamplingMask:
    """Place, render, and threshold in one step: one sampling matrix per seed."""
    placement = place_particles(spec, frame_w, frame_h, seed)
    return threshold_frame(render_frame(placement, spec), threshold)


def bernoulli_mask(width_px: int, height_px: int, transmit_prob: float, seed: int) -> SamplingMask:
    """Computer-generated i.i.d. random mask, the standard-modulator baseline."""
    if not 0.0 <= transmit_prob <= 1.0:
        raise ParameterError(f"transmit_prob must be in [0, 1], got {transmit_prob}")
    rng = np.random.default_rng(seed)
    transmit = (rng.random((height_px, width_px)) < transmit_prob).astype(np.uint8)
    return SamplingMask(width_px, height_px, transmit, threshold_used=float("nan"))


def save_mask(mask: SamplingMask, path) -> None:
    """Write a mask as P5: transmit 1 -> 255, 0 -> 0."""
    write_pgm(path, mask.transmit * np.uint8(255))


def load_mask(path, threshold_used: float = float("nan")) -> SamplingMask:
    img = read_pgm(path)
    transmit = (img > 127).astype(np.uint8)
    h, w = transmit.shape
    return SamplingMask(w, h, transmit, threshold_used)


def save_frame(frame: SlmFrame, path) -> None:
    """Write a grayscale frame as P5, mapping [0, 100] onto [0, 255]."""
    write_pgm(path, np.rint(frame.gray * 2.55).astype(np.uint8))


def mask_sidecar_pairs(spec: ParticleSpec, seed: int, threshold: float) -> dict:
    """Manifest keys accompanying a saved mask (documented sidecar schema)."""
    pairs = {
        "seed": seed,
        "shape": spec.shape,
        "diameter_px": float(spec.diameter_px),
        "count": spec.count,
        "clustering": float(spec.clustering),
        "edge_softness_px": float(spec.edge_softness_px),
        "threshold": float(threshold),
    }
    if spec.inner_diameter_px is not None:
        pairs["inner_diameter_px"] = float(spec.inner_diameter_px)
    return pairs
