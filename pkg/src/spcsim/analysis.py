"""Resolution metrology: radial FFT spectra, cutoff slopes, and quality metrics.

The resolution diagnostic is the centered 2-D FFT magnitude of an image,
summed over annuli of integer radius (cycles per frame). Its initial descent
is fit with a line; a steeper descent marks a lower cutoff frequency and so
worse resolution. Frequency samples beyond r_max = floor(min(W, H) / 2) (the
corners of the shifted grid) accumulate into the top bin, making the bins an
exact partition of the plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FlatSpectrumError, ParameterError, ShapeMismatchError

DEFAULT_FLOOR_MARGIN = 0.25


@dataclass(frozen=True)
class RadialSpectrum:
    radii: np.ndarray  # integer bins 0..r_max, cycles per frame
    magnitude: np.ndarray  # summed FFT magnitude per bin

    def __len__(self) -> int:
        return len(self.radii)


@dataclass(frozen=True)
class CutoffEstimate:
    slope: float  # signed least-squares slope over the steep segment
    fit_range: tuple[int, int]  # (r_lo, r_hi), inclusive
    noise_floor: float


@dataclass(frozen=True)
class EffectiveResolution:
    total_width_px: float
    super_pixel_px: float
    value: float  # (total width / super-pixel size) squared


@dataclass(frozen=True)
class QualityMetrics:
    rel_l2_error: float
    psnr_db: float


def radial_spectrum(image: np.ndarray) -> RadialSpectrum:
    """Radially integrated centered FFT magnitude; DC lands in bin 0."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ParameterError(f"expected a non-empty 2-D image, got shape {img.shape}")
    h, w = img.shape
    mag = np.abs(np.fft.fftshift(np.fft.fft2(img)))
    fy = np.arange(h) - h // 2
    fx = np.arange(w) - w // 2
    r = np.rint(np.hypot(fy[:, None], fx[None, :])).astype(np.int64)
    r_max = min(h, w) // 2
    np.minimum(r, r_max, out=r)
    magnitude = np.bincount(r.ravel(), weights=mag.ravel(), minlength=r_max + 1)
    return RadialSpectrum(np.arange(r_max + 1), magnitude)


def cutoff_slope(spectrum: RadialSpectrum, margin: float = DEFAULT_FLOOR_MARGIN) -> CutoffEstimate:
    """Fit the steep initial descent of a radial spectrum.

    The noise floor is the median of the upper-half radius bins; the steep
    segment runs from radius 1 to the first bin at or below floor * (1 + margin).
    """
    mags = np.asarray(spectrum.magnitude, dtype=np.float64)
    n = len(mags)
    if n < 8:
        raise ParameterError(f"need >= 8 bins to estimate a cutoff, got {n}")
    noise_floor = float(np.median(mags[n // 2 :]))
    cut = noise_floor * (1.0 + margin)
    below = np.flatnonzero(mags[1:] <= cut)
    if below.size == 0:
        raise FlatSpectrumError("spectrum never reaches the noise floor")
    r_lo = 1
    r_hi = int(below[0]) + 1
    if r_hi - r_lo + 1 < 3:
        raise FlatSpectrumError(
            f"steep segment [{r_lo}, {r_hi}] shorter than 3 bins (spectrum too flat)"
        )
    xs = np.arange(r_lo, r_hi + 1, dtype=np.float64)
    slope, _ = np.polyfit(xs, mags[r_lo : r_hi + 1], 1)
    return CutoffEstimate(slope=float(slope), fit_range=(r_lo, r_hi), noise_floor=noise_floor)


def effective_resolution(total_width_px: float, super_pixel_px: float) -> EffectiveResolution:
    """Effective resolution of a grouped-element modulator: (width / super-pixel)^2."""
    if total_width_px <= 0 or super_pixel_px <= 0:
        raise ParameterError("total width and super-pixel size must be positive")
    if super_pixel_px > total_width_px:
        raise ParameterError(
            f"super-pixel {super_pixel_px} px larger than total width {total_width_px} px"
        )
    ratio = total_width_px / super_pixel_px
    return EffectiveResolution(total_width_px, super_pixel_px, ratio * ratio)


def quality(reference: np.ndarray, recon: np.ndarray) -> QualityMetrics:
    """Relative L2 error and PSNR after affine-gain calibration.

    Reconstructions from unnormalized random masks recover the scene only up
    to gain and offset, so the best least-squares scalar gain and offset are
    applied to the reconstruction before comparing.
    """
    ref = np.asarray(reference, dtype=np.float64).ravel()
    rec = np.asarray(recon, dtype=np.float64).ravel()
    if ref.shape != rec.shape:
        raise ShapeMismatchError(f"reference {reference.shape} vs reconstruction {recon.shape}")
    ref_norm = float(np.linalg.norm(ref))
    if ref_norm == 0.0:
        raise ParameterError("reference image is identically zero")
    rec_c = rec - rec.mean()
    var = float(rec_c @ rec_c)
    gain = float(rec_c @ (ref - ref.mean())) / var if var > 0 else 0.0
    offset = float(ref.mean() - gain * rec.mean())
    resid = gain * rec + offset - ref
    resid_norm = float(np.linalg.norm(resid))
    rel = resid_norm / ref_norm
    rmse = resid_norm / math.sqrt(ref.size)
    peak = float(ref.max())
    psnr = math.inf if rmse == 0.0 else 20.0 * math.log10(peak / rmse)
    return QualityMetrics(rel_l2_error=rel, psnr_db=psnr)


def average_spectra(spectra: list[RadialSpectrum]) -> tuple[RadialSpectrum, np.ndarray]:
    """Per-bin mean spectrum and sample standard deviation across runs."""
    if len(spectra) < 2:
        raise ParameterError(f"need >= 2 spectra to average, got {len(spectra)}")
    n = len(spectra[0])
    for s in spectra:
        if len(s) != n:
            raise ShapeMismatchError(f"spectrum with {len(s)} bins in a {n}-bin average")
    stack = np.stack([s.magnitude for s in spectra])
    mean = stack.mean(axis=0)
    std = stack.std(axis=0, ddof=1)
    return RadialSpectrum(spectra[0].radii.copy(), mean), std


def fraction_within_band(spectra: list[RadialSpectrum], n_std: float = 2.0) -> float:
    """Fraction of bins where every run stays within n_std sample deviations of the mean."""
    mean, std = average_spectra(spectra)
    stack = np.stack([s.magnitude for s in spectra])
    dev = np.abs(stack - mean.magnitude).max(axis=0)
    within = dev <= n_std * std + 1e-12 * np.abs(mean.magnitude)
    return float(np.count_nonzero(within) / len(mean))


def write_spectrum_csv(path, spectrum: RadialSpectrum, std: np.ndarray | None = None,
                       cutoff: CutoffEstimate | None = None, cutoff_error: str | None = None) -> None:
    """Comma-separated spectrum export; cutoff estimates go in a commented footer."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        if std is None:
            f.write("radius,magnitude\n")
            for r, m in zip(spectrum.radii, spectrum.magnitude):
                f.write(f"{int(r)},{m!r}\n")
        else:
            f.write("radius,magnitude,std\n")
            for r, m, s in zip(spectrum.radii, spectrum.magnitude, std):
                f.write(f"{int(r)},{m!r},{s!r}\n")
        if cutoff is not None:
            f.write(f"# cutoff_slope = {cutoff.slope!r}\n")
            f.write(f"# fit_range = {cutoff.fit_range[0]},{cutoff.fit_range[1]}\n")
            f.write(f"# noise_floor = {cutoff.noise_floor!r}\n")
        elif cutoff_error is not None:
            f.write(f"# cutoff_error = {cutoff_error}\n")
