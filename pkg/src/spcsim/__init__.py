"""Single-pixel camera simulator with a stochastic particle-array modulator.

Pipeline: synthesize a scene, scatter opaque particles over a virtual
container, image and threshold them into binary sampling masks, collect one
detector reading per mask, reconstruct by total-variation-regularized least
squares, and measure resolution through radially integrated FFT spectra.
"""

from .analysis import (
    CutoffEstimate,
    EffectiveResolution,
    QualityMetrics,
    RadialSpectrum,
    average_spectra,
    cutoff_slope,
    effective_resolution,
    quality,
    radial_spectrum,
)
from .config import ExperimentConfig, load_config
from .measurement import (
    MeasurementRecord,
    MeasurementSet,
    NoiseModel,
    acquire_set,
    build_set,
    load_set,
    measure,
    save_set,
)
from .scenes import Scene, apply_gaussian_illumination, load_mask_bitmap, make_cross, make_rectangle
from .slm import (
    ParticlePlacement,
    ParticleSpec,
    SamplingMask,
    SlmFrame,
    bernoulli_mask,
    generate_mask,
    opaque_fraction,
    place_particles,
    render_frame,
    threshold_frame,
)
from .tv import ReconResult, TvConfig, apply_adjoint, apply_forward, solve_tv, total_variation

__version__ = "0.1.0"
