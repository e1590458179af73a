"""Receiver-side equalizers."""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg


class EqualizerError(RuntimeError):
    """Raised when the MMSE system cannot be solved reliably; the frame should be dropped."""


def equalize_onetap(rx_grid, tf_coeffs, noise_var: float = 0.0) -> np.ndarray:
    """Per-subcarrier MMSE h* y / (|h|^2 + s2); zero-forcing when ``noise_var`` is 0."""
    y = np.asarray(rx_grid, dtype=complex)
    h = np.asarray(tf_coeffs, dtype=complex)
    if y.shape[-1] != h.shape[-1]:
        raise ValueError("grid and coefficient lengths differ")
    if noise_var == 0.0:
        return y / h
    return np.conj(h) * y / (np.abs(h) ** 2 + noise_var)


def afdm_mmse_equalize(rx_af, h_af, noise_var: float, rcond: float = 1e-12) -> np.ndarray:
    """x_hat = (H^H H + s2 I)^-1 H^H y, solved through a Cholesky (or LU when s2 = 0) factorization."""
    y = np.asarray(rx_af, dtype=complex)
    h = np.asarray(h_af, dtype=complex)
    gram = h.conj().T @ h
    if noise_var > 0:
        gram = gram + noise_var * np.eye(h.shape[1])
    rhs = h.conj().T @ y
    try:
        if noise_var > 0:
            factor = scipy.linalg.cho_factor(gram, check_finite=False)
            return scipy.linalg.cho_solve(factor, rhs, check_finite=False)
        with warnings.catch_warnings():
            # singularity is judged below from the pivots
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu = scipy.linalg.lu_factor(gram, check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise EqualizerError(str(exc)) from exc
    diag = np.abs(np.diag(lu[0]))
    if diag.min() <= rcond * diag.max():
        raise EqualizerError("channel matrix is numerically singular")
    return scipy.linalg.lu_solve(lu, rhs, check_finite=False)
