"""Total-variation reconstruction from a measurement set.

Minimizes TV(u) + (mu/2) ||A u - b||^2 where the rows of A are the vectorized
binary masks. The gradient split w = D u is handled with an augmented
Lagrangian: w-updates are exact soft-shrinkage, u-updates are a few warm-started
conjugate-gradient steps on (mu A^T A + beta D^T D) u = mu A^T b + beta D^T (w - lam),
and the multiplier lam accumulates the split residual each outer pass.

Mask rows are nearly parallel to the all-ones image (each transmits roughly
the same pixel fraction), which conditions A^T A poorly; by default each row
is therefore centered by its mean, A u = A_c u + row_mean * sum(u), and the
data term is split into the centered operator acting on the image plus one
scalar DC unknown t: ||A_c u + t * row_mean - b||^2. The centered operator and
the gradient both annihilate constants, so CG leaves the iterate's mean
untouched; after each pass t is refit exactly by least squares against the
original readings and re-applied as the iterate's mean. (Shifting b once by
an upfront scene-total estimate is biased whenever mask transmission
correlates spatially with the scene, e.g. center-clustered particles over a
centered object, so the DC must stay inside the iteration.)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError, ShapeMismatchError
from .measurement import MeasurementSet
from .slm import SamplingMask

TV_VARIANTS = ("isotropic", "anisotropic")

_TINY = 1e-30


@dataclass(frozen=True)
class TvConfig:
    """Solver knobs. mu = None picks the default data weight 16 / mean(|b|).

    That default keeps the data term weak enough for the gradient split to
    shape the nullspace within a few hundred passes on desk-scale mask
    ensembles; heavier weights fit the readings early and then crawl.
    """

    mu: float | None = None
    beta: float = 32.0
    variant: str = "isotropic"
    max_outer_iters: int = 400
    inner_cg_iters: int = 8
    rel_tol: float = 1e-4
    nonneg: bool = True
    center_rows: bool = True

    def __post_init__(self):
        if self.mu is not None and self.mu <= 0:
            raise ParameterError(f"mu must be positive, got {self.mu}")
        if self.beta <= 0:
            raise ParameterError(f"beta must be positive, got {self.beta}")
        if self.variant not in TV_VARIANTS:
            raise ParameterError(f"variant must be one of {TV_VARIANTS}, got {self.variant!r}")
        if self.max_outer_iters < 1 or self.inner_cg_iters < 1:
            raise ParameterError("iteration counts must be >= 1")
        if self.rel_tol <= 0:
            raise ParameterError(f"rel_tol must be positive, got {self.rel_tol}")


@dataclass
class ReconResult:
    image: np.ndarray
    outer_iters_used: int
    final_rel_change: float
    objective_history: list[float]
    data_residual: float
    converged: bool = False


def grad2(u: np.ndarray) -> np.ndarray:
    """Forward differences with replicate boundary: zero at the last row/column."""
    g = np.zeros((2,) + u.shape)
    g[0, :, :-1] = u[:, 1:] - u[:, :-1]
    g[1, :-1, :] = u[1:, :] - u[:-1, :]
    return g


def grad2_adjoint(g: np.ndarray) -> np.ndarray:
    """Exact adjoint of grad2: <grad2(u), g> == <u, grad2_adjoint(g)>."""
    gx, gy = g[0], g[1]
    out = np.zeros(gx.shape)
    out[:, 1:] += gx[:, :-1]
    out[:, :-1] -= gx[:, :-1]
    out[1:, :] += gy[:-1, :]
    out[:-1, :] -= gy[:-1, :]
    return out


def total_variation(u: np.ndarray, variant: str = "isotropic") -> float:
    """Discrete TV with forward differences and replicate boundary."""
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 2 or u.size == 0:
        raise ParameterError(f"expected a non-empty 2-D array, got shape {u.shape}")
    if variant not in TV_VARIANTS:
        raise ParameterError(f"variant must be one of {TV_VARIANTS}, got {variant!r}")
    g = grad2(u)
    if variant == "anisotropic":
        return float(np.abs(g).sum())
    return float(np.hypot(g[0], g[1]).sum())


def stack_masks(masks: list[SamplingMask]) -> np.ndarray:
    """Vectorize masks into the dense (M, N) measurement matrix."""
    if not masks:
        raise ParameterError("no masks given")
    w, h = masks[0].width_px, masks[0].height_px
    for m in masks:
        if (m.width_px, m.height_px) != (w, h):
            raise ShapeMismatchError(f"mask {m.width_px}x{m.height_px} in a {w}x{h} stack")
    return np.stack([m.transmit.ravel() for m in masks]).astype(np.float64)


def apply_forward(masks: list[SamplingMask], u: np.ndarray) -> np.ndarray:
    """A u: one transmitted-intensity sum per mask."""
    u = np.asarray(u, dtype=np.float64)
    a = stack_masks(masks)
    if u.shape != (masks[0].height_px, masks[0].width_px):
        raise ShapeMismatchError(f"image {u.shape} vs masks {masks[0].height_px}x{masks[0].width_px}")
    return a @ u.ravel()


def apply_adjoint(masks: list[SamplingMask], y: np.ndarray) -> np.ndarray:
    """A^T y: the y-weighted sum of masks, as an image."""
    y = np.asarray(y, dtype=np.float64)
    a = stack_masks(masks)
    if y.shape != (len(masks),):
        raise ShapeMismatchError(f"coefficient vector {y.shape} vs {len(masks)} masks")
    return (a.T @ y).reshape(masks[0].height_px, masks[0].width_px)


def _shrink(v: np.ndarray, amount: float, variant: str) -> np.ndarray:
    if variant == "anisotropic":
        return np.sign(v) * np.maximum(np.abs(v) - amount, 0.0)
    mag = np.hypot(v[0], v[1])
    scale = np.zeros_like(mag)
    nz = mag > 0.0
    scale[nz] = np.maximum(mag[nz] - amount, 0.0) / mag[nz]
    return v * scale


def solve_tv(mset: MeasurementSet, config: TvConfig = TvConfig()) -> ReconResult:
    """Reconstruct the scene behind a measurement set."""
    b = mset.powers()
    if not np.all(np.isfinite(b)):
        raise DataError("measurement powers contain non-finite values")
    shape = (mset.height_px, mset.width_px)
    n = shape[0] * shape[1]
    a = stack_masks(mset.masks)

    centered = config.center_rows
    if centered:
        row_mean = a.mean(axis=1)
        rm_sq = float(row_mean @ row_mean)
        if rm_sq <= 0.0:
            centered = False  # all-opaque masks carry no DC to split off

    if centered:

        def a_op(v):
            return a @ v - row_mean * v.sum()

        def at_op(y):
            return a.T @ y - float(row_mean @ y)

    else:

        def a_op(v):
            return a @ v

        def at_op(y):
            return a.T @ y

    mu = config.mu
    if mu is None:
        mean_abs_b = float(np.abs(b).mean())
        mu = 16.0 / mean_abs_b if mean_abs_b > 0 else 16.0

    beta = config.beta
    atb = at_op(b)
    at_rm = at_op(row_mean) if centered else None

    def h_op(v):
        dtd = grad2_adjoint(grad2(v.reshape(shape))).ravel()
        return mu * at_op(a_op(v)) + beta * dtd

    u = np.zeros(n)
    t = 0.0  # DC reading the data term sees; refit each pass when centering
    w = np.zeros((2,) + shape)
    lam = np.zeros((2,) + shape)
    shrink_amount = 1.0 / beta

    history: list[float] = []
    rel_change = np.inf
    converged = False
    iters = 0
    for iters in range(1, config.max_outer_iters + 1):
        du = grad2(u.reshape(shape))
        w = _shrink(du + lam, shrink_amount, config.variant)
        rhs = mu * atb + beta * grad2_adjoint(w - lam).ravel()
        if centered:
            rhs -= mu * t * at_rm
        u_new = _cg(h_op, rhs, u, config.inner_cg_iters)
        if centered:
            au_c = a_op(u_new)
            t = float(row_mean @ (b - au_c)) / rm_sq
            u_new += t / n - u_new.mean()
        if config.nonneg:
            np.maximum(u_new, 0.0, out=u_new)
        lam = lam + grad2(u_new.reshape(shape)) - w
        rel_change = float(np.linalg.norm(u_new - u) / max(np.linalg.norm(u), _TINY))
        u = u_new
        resid = a @ u - b
        history.append(
            total_variation(u.reshape(shape), config.variant) + 0.5 * mu * float(resid @ resid)
        )
        if rel_change < config.rel_tol:
            converged = True
            break

    image = u.reshape(shape)
    b_norm = float(np.linalg.norm(b))
    resid_norm = float(np.linalg.norm(a @ u - b))
    data_residual = resid_norm / b_norm if b_norm > 0 else resid_norm
    return ReconResult(
        image=image,
        outer_iters_used=iters,
        final_rel_change=rel_change,
        objective_history=history,
        data_residual=data_residual,
        converged=converged,
    )


def _cg(h_op, rhs: np.ndarray, x0: np.ndarray, iters: int) -> np.ndarray:
    """Fixed-step conjugate gradient for H x = rhs, warm-started at x0."""
    x = x0.copy()
    r = rhs - h_op(x)
    p = r.copy()
    rs = float(r @ r)
    for _ in range(iters):
        if rs <= _TINY:
            break
        hp = h_op(p)
        php = float(p @ hp)
        if php <= 0.0:
            break
        alpha = rs / php
        x += alpha * p
        r -= alpha * hp
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x
