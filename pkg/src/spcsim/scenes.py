"""Test scenes: ground-truth intensity fields placed in front of the modulator.

Shapes are rasterized with a pixel-center-inside test against half-open
physical bounds, so bright-pixel counts match closed-form areas exactly when
the physical size maps to a whole number of pixels. Pixel (r, c) has its
center at (r + 0.5, c + 0.5); the canvas center is (height/2, width/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .pgm import read_pgm


@dataclass(frozen=True)
class Scene:
    """Nonnegative 2-D intensity field with a pixels-per-mm calibration."""

    width_px: int
    height_px: int
    intensity: np.ndarray  # (height_px, width_px) float64, >= 0
    px_per_mm: float

    def __post_init__(self):
        if self.width_px <= 0 or self.height_px <= 0:
            raise ParameterError(f"scene dimensions must be positive, got {self.width_px}x{self.height_px}")
        if self.px_per_mm <= 0:
            raise ParameterError(f"px_per_mm must be positive, got {self.px_per_mm}")
        if self.intensity.shape != (self.height_px, self.width_px):
            raise ParameterError(
                f"intensity shape {self.intensity.shape} != ({self.height_px}, {self.width_px})"
            )
        if np.any(self.intensity < 0):
            raise ParameterError("scene intensity must be nonnegative")

    def total(self) -> float:
        return float(self.intensity.sum())


def _pixel_centers(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.float64) + 0.5


def make_rectangle(width_mm: float, height_mm: float, canvas_px: int, px_per_mm: float) -> Scene:
    """Centered bright rectangle of the given physical size on a square canvas."""
    if canvas_px <= 0:
        raise ParameterError(f"canvas_px must be positive, got {canvas_px}")
    if px_per_mm <= 0:
        raise ParameterError(f"px_per_mm must be positive, got {px_per_mm}")
    if width_mm < 0 or height_mm < 0:
        raise ParameterError("rectangle dimensions must be nonnegative")
    w_px = width_mm * px_per_mm
    h_px = height_mm * px_per_mm
    if w_px > canvas_px or h_px > canvas_px:
        raise ParameterError(
            f"rectangle {width_mm}x{height_mm} mm ({w_px}x{h_px} px) exceeds {canvas_px}-px canvas"
        )
    cx = cy = canvas_px / 2.0
    xs = _pixel_centers(canvas_px)
    in_x = (xs >= cx - w_px / 2.0) & (xs < cx + w_px / 2.0)
    in_y = (xs >= cy - h_px / 2.0) & (xs < cy + h_px / 2.0)
    intensity = (in_y[:, None] & in_x[None, :]).astype(np.float64)
    return Scene(canvas_px, canvas_px, intensity, px_per_mm)


def make_cross(outer_mm: float, arm_mm: float, canvas_px: int, px_per_mm: float) -> Scene:
    """Centered plus sign: union of a horizontal and a vertical bar.

    Both bars are outer_mm long and arm_mm wide.
    """
    if canvas_px <= 0:
        raise ParameterError(f"canvas_px must be positive, got {canvas_px}")
    if px_per_mm <= 0:
        raise ParameterError(f"px_per_mm must be positive, got {px_per_mm}")
    if arm_mm > outer_mm:
        raise ParameterError(f"arm width {arm_mm} mm exceeds outer extent {outer_mm} mm")
    if outer_mm * px_per_mm > canvas_px:
        raise ParameterError(f"cross extent {outer_mm} mm exceeds {canvas_px}-px canvas")
    if outer_mm < 0 or arm_mm < 0:
        raise ParameterError("cross dimensions must be nonnegative")
    outer_px = outer_mm * px_per_mm
    arm_px = arm_mm * px_per_mm
    c = canvas_px / 2.0
    xs = _pixel_centers(canvas_px)
    in_outer = (xs >= c - outer_px / 2.0) & (xs < c + outer_px / 2.0)
    in_arm = (xs >= c - arm_px / 2.0) & (xs < c + arm_px / 2.0)
    horiz = in_arm[:, None] & in_outer[None, :]
    vert = in_outer[:, None] & in_arm[None, :]
    intensity = (horiz | vert).astype(np.float64)
    return Scene(canvas_px, canvas_px, intensity, px_per_mm)


def load_mask_bitmap(path, px_per_mm: float) -> Scene:
    """Load a P5 graymap as a binary scene: values >= 128 become intensity 1."""
    if px_per_mm <= 0:
        raise ParameterError(f"px_per_mm must be positive, got {px_per_mm}")
    img = read_pgm(path)
    intensity = (img >= 128).astype(np.float64)
    h, w = intensity.shape
    return Scene(w, h, intensity, px_per_mm)


def apply_gaussian_illumination(scene: Scene, fwhm_mm: float) -> Scene:
    """Attenuate a scene by a centered Gaussian beam with unit peak.

    The profile is exp(-4 ln2 r^2 / fwhm^2), so intensity halves at radius
    fwhm/2 from the canvas center; the beam is truncated at the canvas edge
    without renormalization.
    """
    if fwhm_mm <= 0:
        raise ParameterError(f"FWHM must be positive, got {fwhm_mm}")
    fwhm_px = fwhm_mm * scene.px_per_mm
    xs = _pixel_centers(scene.width_px) - scene.width_px / 2.0
    ys = _pixel_centers(scene.height_px) - scene.height_px / 2.0
    r2 = ys[:, None] ** 2 + xs[None, :] ** 2
    beam = np.exp(-4.0 * math.log(2.0) * r2 / fwhm_px**2)
    return Scene(scene.width_px, scene.height_px, scene.intensity * beam, scene.px_per_mm)
