"""Single-detector measurement: project a scene through masks, store the pairs.

A measurement set pairs every sampling mask with one detector power reading;
it is the only input reconstruction ever sees. Sets persist as a directory of
indexed mask graymaps plus one little-endian float64 power column, with a
key-value manifest, and round-trip bit-exactly.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ParameterError, SetCorruptionError, ShapeMismatchError
from .scenes import Scene
from .seeds import noise_seed, record_seed
from .slm import ParticleSpec, SamplingMask, load_mask, place_particles, render_frame, save_mask, threshold_frame
from .textio import read_kv_file, write_kv_file

MASK_FILE_PATTERN = "mask_%06d.pgm"
POWERS_FILE = "powers.f64"
MANIFEST_FILE = "manifest.txt"


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian detector noise, relative to the full-transparency reading."""

    sigma_rel: float = 0.0

    def __post_init__(self):
        if self.sigma_rel < 0:
            raise ParameterError(f"sigma_rel must be >= 0, got {self.sigma_rel}")


@dataclass(frozen=True)
class MeasurementRecord:
    mask_id: int
    power: float


@dataclass
class MeasurementSet:
    """Ordered (mask, power) pairs plus the acquisition metadata."""

    records: list[MeasurementRecord]
    masks: list[SamplingMask]
    width_px: int
    height_px: int
    threshold: float
    noise_sigma_rel: float
    seed: int
    spec: Optional[ParticleSpec] = None

    def __post_init__(self):
        if len(self.records) != len(self.masks):
            raise ParameterError(
                f"{len(self.records)} records but {len(self.masks)} masks"
            )
        if len(self.records) < 1:
            raise ParameterError("a measurement set needs at least one record")
        for m in self.masks:
            if (m.width_px, m.height_px) != (self.width_px, self.height_px):
                raise ShapeMismatchError(
                    f"mask {m.width_px}x{m.height_px} in a {self.width_px}x{self.height_px} set"
                )

    def __len__(self) -> int:
        return len(self.records)

    def powers(self) -> np.ndarray:
        return np.array([r.power for r in self.records], dtype=np.float64)

    def prefix(self, m: int) -> "MeasurementSet":
        """First m records (the nested-subset view used by sample sweeps)."""
        if not 1 <= m <= len(self):
            raise ParameterError(f"prefix length {m} outside [1, {len(self)}]")
        return MeasurementSet(
            self.records[:m], self.masks[:m], self.width_px, self.height_px,
            self.threshold, self.noise_sigma_rel, self.seed, self.spec,
        )


def measure(scene: Scene, mask: SamplingMask, noise: NoiseModel = NoiseModel(), seed: int = 0) -> float:
    """One detector reading: transmitted intensity summed over the mask.

    With sigma_rel > 0, adds one seeded Gaussian draw scaled by sigma_rel
    times the fully-transparent reading (the total scene intensity).
    """
    if (mask.height_px, mask.width_px) != scene.intensity.shape:
        raise ShapeMismatchError(
            f"mask {mask.width_px}x{mask.height_px} vs scene {scene.width_px}x{scene.height_px}"
        )
    power = float(np.sum(mask.transmit * scene.intensity))
    if noise.sigma_rel > 0:
        rng = np.random.default_rng(seed)
        power += float(rng.standard_normal()) * noise.sigma_rel * scene.total()
    return power


def acquire_set(
    scene: Scene,
    spec: ParticleSpec,
    m: int,
    threshold: float,
    noise: NoiseModel = NoiseModel(),
    seed: int = 0,
) -> MeasurementSet:
    """Acquire m measurements: re-randomize, image, threshold, measure, repeat.

    Record i draws its placement from record_seed(seed, i), so any prefix of
    a longer acquisition with the same master seed is identical to a shorter
    one (nested-set property), and any single record can be regenerated alone.
    """
    if m < 1:
        raise ParameterError(f"sample count must be >= 1, got {m}")
    records = []
    masks = []
    for i in range(m):
        rs = record_seed(seed, i)
        placement = place_particles(spec, scene.width_px, scene.height_px, rs)
        mask = threshold_frame(render_frame(placement, spec), threshold)
        power = measure(scene, mask, noise, seed=noise_seed(rs))
        masks.append(mask)
        records.append(MeasurementRecord(mask_id=i, power=power))
    return MeasurementSet(
        records, masks, scene.width_px, scene.height_px,
        float(threshold), noise.sigma_rel, seed, spec,
    )


def build_set(
    masks: list[SamplingMask],
    powers,
    threshold: float = float("nan"),
    noise_sigma_rel: float = 0.0,
    seed: int = 0,
    spec: Optional[ParticleSpec] = None,
) -> MeasurementSet:
    """Assemble a set from existing masks and readings (synthetic instances)."""
    if not masks:
        raise ParameterError("a measurement set needs at least one record")
    records = [MeasurementRecord(i, float(p)) for i, p in enumerate(powers)]
    return MeasurementSet(
        records, list(masks), masks[0].width_px, masks[0].height_px,
        threshold, noise_sigma_rel, seed, spec,
    )


def save_set(mset: MeasurementSet, directory) -> None:
    """Persist a set: manifest + indexed mask graymaps + raw float64 powers."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    pairs = {
        "m": len(mset),
        "width_px": mset.width_px,
        "height_px": mset.height_px,
        "threshold": mset.threshold,
        "noise_sigma_rel": mset.noise_sigma_rel,
        "seed": mset.seed,
    }
    if mset.spec is not None:
        s = mset.spec
        pairs.update(
            shape=s.shape,
            diameter_px=float(s.diameter_px),
            count=s.count,
            clustering=float(s.clustering),
            edge_softness_px=float(s.edge_softness_px),
        )
        if s.inner_diameter_px is not None:
            pairs["inner_diameter_px"] = float(s.inner_diameter_px)
    write_kv_file(directory / MANIFEST_FILE, pairs, header="measurement set manifest")
    for i, mask in enumerate(mset.masks):
        save_mask(mask, directory / (MASK_FILE_PATTERN % i))
    mset.powers().astype("<f8").tofile(directory / POWERS_FILE)


def load_set(directory) -> MeasurementSet:
    """Load a persisted set, verifying the manifest against what is on disk."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_FILE
    if not manifest_path.is_file():
        raise SetCorruptionError(f"{directory}: no {MANIFEST_FILE}")
    kv = read_kv_file(manifest_path)
    m = kv.get_int("m")
    width = kv.get_int("width_px")
    height = kv.get_int("height_px")
    threshold = kv.get_float("threshold")
    noise_sigma_rel = kv.get_float("noise_sigma_rel")
    seed = kv.get_int("seed")
    spec = None
    if "shape" in kv:
        spec = ParticleSpec(
            shape=kv.get_str("shape"),
            diameter_px=kv.get_float("diameter_px"),
            count=kv.get_int("count"),
            clustering=kv.get_float("clustering"),
            edge_softness_px=kv.get_float("edge_softness_px"),
            inner_diameter_px=kv.get_float("inner_diameter_px") if "inner_diameter_px" in kv else None,
        )

    mask_files = sorted(p.name for p in directory.glob("mask_*.pgm"))
    expected = [MASK_FILE_PATTERN % i for i in range(m)]
    if mask_files != expected:
        raise SetCorruptionError(
            f"{directory}: manifest declares {m} masks, found {len(mask_files)} matching files"
        )
    powers_path = directory / POWERS_FILE
    if not powers_path.is_file():
        raise SetCorruptionError(f"{directory}: no {POWERS_FILE}")
    if os.path.getsize(powers_path) != 8 * m:
        raise SetCorruptionError(
            f"{directory}: {POWERS_FILE} holds {os.path.getsize(powers_path)} bytes, expected {8 * m}"
        )
    powers = np.fromfile(powers_path, dtype="<f8")

    masks = [load_mask(directory / name, threshold_used=threshold) for name in expected]
    records = [MeasurementRecord(i, float(p)) for i, p in enumerate(powers)]
    return MeasurementSet(records, masks, width, height, threshold, noise_sigma_rel, seed, spec)


def sets_equal(a: MeasurementSet, b: MeasurementSet) -> bool:
    """Bit-exact equality, the save/load round-trip contract."""

    def feq(x, y):
        return x == y or (math.isnan(x) and math.isnan(y))

    if (len(a), a.width_px, a.height_px, a.seed) != (len(b), b.width_px, b.height_px, b.seed):
        return False
    if not (feq(a.threshold, b.threshold) and feq(a.noise_sigma_rel, b.noise_sigma_rel)):
        return False
    if a.spec != b.spec:
        return False
    if not np.array_equal(a.powers(), b.powers()):
        return False
    return all(np.array_equal(ma.transmit, mb.transmit) for ma, mb in zip(a.masks, b.masks))
