"""Multichannel Wiener filtering.

Per-source magnitude estimates are refined into complex, spatially
consistent spectrograms. A power-ratio mask initializes the estimates;
each expectation-maximization pass then (1) re-estimates every source's
power spectral density as the channel-mean squared magnitude, (2) pools
outer products over time into a per-bin spatial covariance, and (3)
re-filters the mixture with the resulting Wiener gains. Mono and stereo
mixtures are supported; the 2x2 inversion uses the closed adjugate form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import ShapeMismatch, SingularMixCovariance
from .core import Spectrogram, SourceSpectrogramSet

_EPS_DIV = 1e-12  # guards the initialization mask against all-zero bins
_HERMITIAN_TOL = 1e-10
_EIGENVALUE_FLOOR = -1e-10


@dataclass(frozen=True)
class MwfConfig:
    """iterations: EM passes (0 keeps the initial mask estimates);
    eps: covariance regularizer (diagonal loading); mask_power:
    exponent applied to magnitudes when building the initial mask."""

    iterations: int = 1
    eps: float = 1e-10
    mask_power: float = 2.0

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not self.mask_power > 0:
            raise ValueError(f"mask_power must be positive, got {self.mask_power}")


@dataclass
class SpatialModel:
    """Gaussian source model: PSD v(t, f) and spatial covariance R(f).

    psd : (frames, bins) nonnegative float64
    spatial_cov : (bins, channels, channels) complex128, Hermitian PSD
    """

    psd: np.ndarray
    spatial_cov: np.ndarray

    def __post_init__(self):
        psd = np.asarray(self.psd, dtype=np.float64)
        cov = np.asarray(self.spatial_cov, dtype=np.complex128)
        if psd.ndim != 2 or cov.ndim != 3 or cov.shape[1] != cov.shape[2]:
            raise ValueError(
                f"bad spatial model shapes: psd {psd.shape}, spatial_cov {cov.shape}"
            )
        if np.any(psd < 0):
            raise ValueError("psd must be nonnegative")
        asym = np.max(np.abs(cov - np.conj(np.swapaxes(cov, 1, 2))))
        if asym > _HERMITIAN_TOL:
            raise ValueError(f"spatial covariance departs from Hermitian by {asym:.3e}")
        if np.min(np.linalg.eigvalsh(cov)) < _EIGENVALUE_FLOOR:
            raise ValueError("spatial covariance has a significantly negative eigenvalue")
        self.psd = psd
        self.spatial_cov = cov


def _check_against_mix(est: SourceSpectrogramSet, mix: Spectrogram) -> None:
    if est.sources[0].bins.shape != mix.bins.shape:
        raise ShapeMismatch(
            f"estimates of shape {est.sources[0].bins.shape} do not match "
            f"mixture {mix.bins.shape}"
        )
    if mix.channels > 2:
        raise ShapeMismatch(f"only mono and stereo are supported, got {mix.channels} channels")


def initial_estimates(
    mags: Sequence[np.ndarray], mix: Spectrogram, mask_power: float = 2.0
) -> SourceSpectrogramSet:
    """Soft-mask the mixture: y_j = v_j**a / (sum_k v_k**a + eps) * x.

    All-zero bins across sources get a zero mask rather than 0/0.
    """
    if not mask_power > 0:
        raise ValueError(f"mask_power must be positive, got {mask_power}")
    v = np.stack([np.asarray(m, dtype=np.float64) for m in mags])
    if v.shape[1:] != mix.bins.shape:
        raise ShapeMismatch(
            f"magnitudes of shape {v.shape[1:]} do not match mixture {mix.bins.shape}"
        )
    if np.any(v < 0):
        raise ValueError("magnitudes must be nonnegative")
    powered = v * v if mask_power == 2.0 else v ** mask_power
    masks = powered / (np.sum(powered, axis=0) + _EPS_DIV)
    return SourceSpectrogramSet(
        [Spectrogram(mask * mix.bins, mix.config, mix.sample_rate) for mask in masks]
    )


def estimate_spatial_model(est: SourceSpectrogramSet, eps: float) -> List[SpatialModel]:
    """EM model step: per-source PSD and time-pooled spatial covariance.

    v_j(t, f) is the channel mean of |y_j|^2; R_j(f) sums y_j y_j^H over
    frames, normalized by the summed PSD plus eps, then symmetrized to
    exact Hermitian form.
    """
    models = []
    for spec in est.sources:
        y = spec.bins  # (channels, frames, bins)
        with np.errstate(over="ignore", invalid="ignore"):
            v = np.mean(y.real ** 2 + y.imag ** 2, axis=0)  # (frames, bins)
            numer = np.einsum("ctf,dtf->fcd", y, np.conj(y))
            denom = np.sum(v, axis=0) + eps  # (bins,)
            cov = numer / denom[:, None, None]
            cov = 0.5 * (cov + np.conj(np.swapaxes(cov, 1, 2)))
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(cov))):
            raise SingularMixCovariance(
                "covariance estimation overflowed; eps is too small for the input scale"
            )
        models.append(SpatialModel(v, cov))
    return models


def _require_invertible(det: np.ndarray) -> None:
    if not np.all(np.isfinite(det)) or np.any(det == 0):
        raise SingularMixCovariance(
            "mixture covariance is singular even with diagonal loading; increase eps"
        )


def apply_filter(
    models: Sequence[SpatialModel], mix: Spectrogram, eps: float
) -> SourceSpectrogramSet:
    """Wiener step: y_j = v_j R_j (sum_k v_k R_k + eps I)^-1 x.

    The shared term z = (sum_k v_k R_k + eps I)^-1 x is computed once
    with the closed 1x1/2x2 inverse, componentwise over (frames, bins).
    """
    x = mix.bins
    channels = mix.channels
    if channels > 2:
        raise ShapeMismatch(f"only mono and stereo are supported, got {channels} channels")

    def cov_component(model: SpatialModel, a: int, b: int) -> np.ndarray:
        # (frames, bins) slice of v_j(t, f) * R_j(f)[a, b]
        return model.psd * model.spatial_cov[:, a, b]

    outputs = []
    if channels == 1:
        with np.errstate(over="ignore", invalid="ignore"):
            c00 = sum(cov_component(m, 0, 0) for m in models) + eps
        _require_invertible(c00)
        z0 = x[0] / c00
        for m in models:
            y = (m.psd * m.spatial_cov[:, 0, 0] * z0)[None]
            outputs.append(Spectrogram(y, mix.config, mix.sample_rate))
        return SourceSpectrogramSet(outputs)

    with np.errstate(over="ignore", invalid="ignore"):
        c00 = sum(cov_component(m, 0, 0) for m in models) + eps
        c11 = sum(cov_component(m, 1, 1) for m in models) + eps
        c01 = sum(cov_component(m, 0, 1) for m in models)
        c10 = sum(cov_component(m, 1, 0) for m in models)
        det = c00 * c11 - c01 * c10
    _require_invertible(det)
    z0 = (c11 * x[0] - c01 * x[1]) / det
    z1 = (c00 * x[1] - c10 * x[0]) / det
    for m in models:
        r = m.spatial_cov
        y0 = m.psd * (r[:, 0, 0] * z0 + r[:, 0, 1] * z1)
        y1 = m.psd * (r[:, 1, 0] * z0 + r[:, 1, 1] * z1)
        outputs.append(Spectrogram(np.stack([y0, y1]), mix.config, mix.sample_rate))
    return SourceSpectrogramSet(outputs)


def em_iterate(
    est: SourceSpectrogramSet, mix: Spectrogram, cfg: MwfConfig = MwfConfig()
) -> SourceSpectrogramSet:
    """Run cfg.iterations EM passes; zero iterations returns the input."""
    _check_against_mix(est, mix)
    current = est
    for _ in range(cfg.iterations):
        models = estimate_spatial_model(current, cfg.eps)
        current = apply_filter(models, mix, cfg.eps)
    return current


def mwf(
    mags: Sequence[np.ndarray], mix: Spectrogram, cfg: MwfConfig = MwfConfig()
) -> SourceSpectrogramSet:
    """Full filter: mask initialization followed by cfg.iterations EM passes."""
    return em_iterate(initial_estimates(mags, mix, cfg.mask_power), mix, cfg)
