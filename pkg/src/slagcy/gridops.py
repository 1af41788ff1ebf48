"""Uniform-grid sampling, periodic quadrature and differentiation helpers."""

from __future__ import annotations

import numpy as np


def periodic_axis(n: int, periodic: bool = True) -> np.ndarray:
    """n uniform samples of [0, 1): left endpoints for periodic axes,
    midpoints for non-periodic ones (keeps 0 out of the sample set)."""
    if n < 2:
        raise ValueError(f"grid needs at least 2 points, got {n}")
    if periodic:
        return np.arange(n) / n
    return (np.arange(n) + 0.5) / n


def periodic_quad(samples, axis=None) -> np.ndarray | float:
    """Trapezoid rule over the unit period on a uniform periodic grid.

    With no endpoint duplication this is the plain mean, which is spectrally
    accurate for smooth periodic integrands.  ``axis=None`` integrates over
    every axis.
    """
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 0:
        return float(arr)
    if arr.ndim == 1 and arr.shape[0] < 2:
        raise ValueError("grid needs at least 2 samples")
    if axis is None:
        axis = tuple(range(arr.ndim))
    # size-1 axes of broadcast sample arrays integrate as constants
    out = arr.mean(axis=axis)
    return float(out) if np.ndim(out) == 0 else out


def spectral_diff(samples, axis: int, period: float = 1.0) -> np.ndarray:
    """FFT differentiation along one axis of a periodic sample array.

    Size-1 axes (broadcast constants) differentiate to zero.  For even n the
    Nyquist mode is dropped, as usual for odd-order spectral derivatives.
    """
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim <= axis or arr.shape[axis] == 1:
        return np.zeros_like(arr)
    n = arr.shape[axis]
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        k[n // 2] = 0.0
    shape = [1] * arr.ndim
    shape[axis] = n
    mult = (2j * np.pi / period) * k.reshape(shape)
    return np.real(np.fft.ifft(np.fft.fft(arr, axis=axis) * mult, axis=axis))


def grid_diff(samples, axis: int, periodic: bool, n: int) -> np.ndarray:
    """Derivative along an axis sampled by :func:`periodic_axis`: spectral on
    periodic axes, second-order finite differences otherwise."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim <= axis or arr.shape[axis] == 1:
        return np.zeros_like(arr)
    if periodic:
        return spectral_diff(arr, axis)
    return np.gradient(arr, 1.0 / n, axis=axis)
