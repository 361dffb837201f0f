"""Spectral graph filtering of stacked client updates (G-Fedfilt) and FedAvg."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .graph import Spectrum

__all__ = [
    "FilterSpec",
    "AggregationError",
    "filter_response",
    "build_filter_matrix",
    "aggregation_weights",
    "aggregate",
    "fedavg",
    "FilterCache",
]


class AggregationError(ValueError):
    """Invalid aggregation input."""


@dataclass(frozen=True)
class FilterSpec:
    mu_s: float

    def __post_init__(self):
        if not (np.isfinite(self.mu_s) and self.mu_s >= 0):
            raise AggregationError(f"mu_s must be finite and >= 0, got {self.mu_s}")


def filter_response(spec: FilterSpec | float, lam) -> np.ndarray | float:
    """Low-pass response ``1 / (1 + mu_s * lambda)``."""
    mu = spec.mu_s if isinstance(spec, FilterSpec) else float(spec)
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr < 0):
        raise AggregationError("graph frequencies must be nonnegative")
    out = 1.0 / (1.0 + mu * lam_arr)
    return float(out) if out.ndim == 0 else out


def build_filter_matrix(spectrum: Spectrum, spec: FilterSpec | float) -> np.ndarray:
    """``H = V h(Lambda) V^T``."""
    v = spectrum.eigenvectors
    h = filter_response(spec, spectrum.eigenvalues)
    mat = (v * h) @ v.T
    # symmetric by construction; remove rounding asymmetry
    return 0.5 * (mat + mat.T)


def aggregation_weights(data_sizes) -> np.ndarray:
    """Per-device weights ``K * |D_i| / sum |D|``, summing to ``K``.

    With an orthonormal Fourier basis this scaling makes the DC-only filter
    return the data-size weighted FedAvg mean.
    """
    sizes = np.asarray(data_sizes, dtype=float)
    if sizes.ndim != 1 or sizes.size == 0 or np.any(sizes < 0) or sizes.sum() <= 0:
        raise AggregationError("data sizes must be a nonempty nonnegative vector")
    return sizes.size * sizes / sizes.sum()


def _check_gradients(g, k: int) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != k:
        raise AggregationError(f"gradient matrix must have {k} rows, got shape {g.shape}")
    bad = ~np.all(np.isfinite(g), axis=1)
    if bad.any():
        raise AggregationError(f"non-finite gradient from device {int(np.argmax(bad))}")
    return g


def aggregate(h_matrix, kappa, gradients) -> np.ndarray:
    """G-Fedfilt: ``G_hat = H diag(kappa) G``; row i is broadcast to device i."""
    h_matrix = np.asarray(h_matrix, dtype=float)
    k = h_matrix.shape[0]
    kappa = np.asarray(kappa, dtype=float)
    if h_matrix.shape != (k, k) or kappa.shape != (k,):
        raise AggregationError(
            f"filter {h_matrix.shape} and weights {kappa.shape} do not match K={k}"
        )
    if np.any(kappa < 0) or not np.all(np.isfinite(kappa)):
        raise AggregationError("aggregation weights must be finite and nonnegative")
    g = _check_gradients(gradients, k)
    return h_matrix @ (kappa[:, None] * g)


def fedavg(weights, gradients) -> np.ndarray:
    """Weighted mean of client updates; ``weights`` must sum to one."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or abs(w.sum() - 1.0) > 1e-9:
        raise AggregationError(f"FedAvg weights must sum to 1, got {w.sum()!r}")
    g = _check_gradients(gradients, w.size)
    return w @ g


class FilterCache:
    """Holds one filter matrix per ``mu_s`` for a fixed spectrum."""

    def __init__(self, spectrum: Spectrum):
        self.spectrum = spectrum
        self._get = lru_cache(maxsize=16)(self._build)

    def _build(self, mu_s: float) -> np.ndarray:
        mat = build_filter_matrix(self.spectrum, FilterSpec(mu_s))
        mat.setflags(write=False)
        return mat

    def __call__(self, mu_s: float) -> np.ndarray:
        return self._get(float(mu_s))
