"""Symbol-level precoding for CSI-free direct detection at the UAV.

The transmitter knows the channel (reciprocity) and the symbols, so it can shape the
transmit vector such that every noiseless received sample falls inside the
constructive-interference region of its QPSK point: beyond the point along both of its
sign directions. Power minimization over that region is a bound-constrained least
squares problem once rewritten in the received-margin coordinates.
"""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np
from scipy.optimize import lsq_linear, minimize
from scipy.special import ndtr

log = logging.getLogger(__name__)


class Precoded(NamedTuple):
    vector: np.ndarray
    penalty_db: float  # margin loss relative to a unit-gain channel at the same power


def _real_form(h: np.ndarray) -> np.ndarray:
    return np.block([[h.real, -h.imag], [h.imag, h.real]])


def _margin_matrix(h: np.ndarray, x: np.ndarray) -> np.ndarray:
    signs = np.concatenate([np.sign(x.real), np.sign(x.imag)])
    return signs[:, None] * _real_form(h)


def slp_precode(intended, channel, power_budget: float | None = None, *, noise_var: float | None = None) -> Precoded:
    """Constructive-interference precoder for QPSK.

    ``channel`` is either an N x N matrix (AF domain) or a length-N vector of
    per-subcarrier coefficients. With ``noise_var`` given, the CI solution seeds a
    minimum-error-probability refinement on the power sphere.
    """
    x = np.asarray(intended, dtype=complex)
    n = x.size
    h = np.asarray(channel, dtype=complex)
    if h.ndim == 1:
        h = np.diag(h)
    if power_budget is None:
        power_budget = float(np.sum(np.abs(x) ** 2))

    g = _margin_matrix(h, x)
    g_inv = np.linalg.inv(g)
    # target margin equals the constellation's own half-distance
    tau = np.min(np.abs(np.concatenate([x.real, x.imag])))
    sol = lsq_linear(g_inv, np.zeros(2 * n), bounds=(tau, np.inf), method="bvls")
    z = g_inv @ sol.x
    need = float(z @ z)
    scale = np.sqrt(power_budget / need)
    penalty_db = float(10 * np.log10(need / float(np.sum(np.abs(x) ** 2))))
    if need > power_budget * (1 + 1e-9):
        log.debug("SLP power %.3g exceeds budget %.3g, scaled (%.2f dB penalty)", need, power_budget, penalty_db)
    z = z * scale

    if noise_var is not None and noise_var > 0:
        z = _min_error_refine(g, z, power_budget, noise_var)
    return Precoded(z[:n] + 1j * z[n:], penalty_db)


def _min_error_refine(g: np.ndarray, z0: np.ndarray, power: float, noise_var: float) -> np.ndarray:
    # per real dimension the received noise std is sqrt(noise_var / 2)
    k = np.sqrt(2.0 / noise_var)
    root_p = np.sqrt(power)

    def objective(v):
        nv = np.linalg.norm(v)
        z = root_p * v / nv
        u = k * (g @ z)
        dens = np.exp(-0.5 * u * u) / np.sqrt(2 * np.pi)
        grad_z = g.T @ (-k * dens)
        grad_v = (root_p / nv) * (grad_z - z * (z @ grad_z) / power)
        return float(ndtr(-u).sum()), grad_v

    res = minimize(objective, z0, jac=True, method="L-BFGS-B", options={"maxiter": 200})
    v = res.x if res.fun <= objective(z0)[0] else z0
    return root_p * v / np.linalg.norm(v)
