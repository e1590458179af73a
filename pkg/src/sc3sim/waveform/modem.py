"""OFDM and AFDM modems (single-symbol transforms with cyclic / chirp-periodic prefix)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ModemConfig:
    n_subcarriers: int = 128
    subcarrier_spacing: float = 120e3
    cp_len: int = 16
    constellation: str = "qpsk"

    def __post_init__(self):
        if self.n_subcarriers < 1 or self.cp_len < 0:
            raise ValueError("invalid modem numerology")
        if self.constellation != "qpsk":
            raise ValueError("only QPSK is supported")

    @property
    def sample_rate(self) -> float:
        return self.n_subcarriers * self.subcarrier_spacing

    @property
    def symbol_len(self) -> int:
        return self.n_subcarriers + self.cp_len

    @property
    def bandwidth(self) -> float:
        return self.sample_rate


@dataclass(frozen=True)
class AfdmParams:
    c1: float
    c2: float
    n: int

    @classmethod
    def for_doppler(cls, n: int, max_doppler_bins: float, c2: float | None = None) -> AfdmParams:
        """Chirp rates from the usual AFDM law: c1 = (2*alpha_max + 1) / (2N)."""
        alpha_max = max(1, math.ceil(max_doppler_bins - 1e-12))
        if c2 is None:
            c2 = math.sqrt(2.0) / (2.0 * n * n)
        return cls(c1=(2 * alpha_max + 1) / (2 * n), c2=c2, n=n)

    @classmethod
    def ofdm(cls, n: int) -> AfdmParams:
        return cls(c1=0.0, c2=0.0, n=n)

    @property
    def alpha_max(self) -> int:
        return int(round((2 * self.n * self.c1 - 1) / 2))

    @property
    def delay_spacing(self) -> int:
        """AF-domain index offset produced by one sample of delay (2 N c1)."""
        return int(round(2 * self.n * self.c1))


def _check_len(x: np.ndarray, n: int, what: str):
    if x.shape[-1] != n:
        raise ValueError(f"{what}: expected last dimension {n}, got {x.shape[-1]}")


def qpsk_map(bits: np.ndarray) -> np.ndarray:
    """Gray-mapped unit-energy QPSK; ``bits`` has shape (..., 2)."""
    b = np.asarray(bits)
    return ((1 - 2 * b[..., 0]) + 1j * (1 - 2 * b[..., 1])) / np.sqrt(2)


def qpsk_demap(symbols: np.ndarray) -> np.ndarray:
    s = np.asarray(symbols)
    return np.stack([(s.real < 0), (s.imag < 0)], axis=-1).astype(np.int8)


def ofdm_modulate(symbols, cfg: ModemConfig) -> np.ndarray:
    x = np.asarray(symbols, dtype=complex)
    _check_len(x, cfg.n_subcarriers, "ofdm_modulate")
    body = np.fft.ifft(x, axis=-1, norm="ortho")
    return np.concatenate([body[..., body.shape[-1] - cfg.cp_len :], body], axis=-1)


def ofdm_demodulate(samples, cfg: ModemConfig) -> np.ndarray:
    r = np.asarray(samples, dtype=complex)
    _check_len(r, cfg.symbol_len, "ofdm_demodulate")
    return np.fft.fft(r[..., cfg.cp_len :], axis=-1, norm="ortho")


def _chirp(c: float, n: int, sign: float) -> np.ndarray:
    k = np.arange(n, dtype=float)
    return np.exp(sign * 2j * np.pi * c * k * k)


def cpp_phase(p: AfdmParams, cp_len: int) -> np.ndarray:
    """Multipliers turning the last ``cp_len`` body samples into the chirp-periodic prefix."""
    n = np.arange(-cp_len, 0, dtype=float)
    return np.exp(-2j * np.pi * p.c1 * (p.n * p.n + 2 * p.n * n))


def afdm_modulate(symbols, p: AfdmParams, cp_len: int = 0) -> np.ndarray:
    """Inverse DAFT s[n] = N^-1/2 sum_m x[m] exp(j2pi(c1 n^2 + nm/N + c2 m^2)) plus CPP."""
    x = np.asarray(symbols, dtype=complex)
    _check_len(x, p.n, "afdm_modulate")
    if not 0 <= cp_len <= p.n:
        raise ValueError(f"cp_len must be in [0, {p.n}], got {cp_len}")
    if p.c2 != 0.0:
        x = x * _chirp(p.c2, p.n, +1)
    s = np.fft.ifft(x, axis=-1, norm="ortho")
    if p.c1 != 0.0:
        s = s * _chirp(p.c1, p.n, +1)
    prefix = s[..., p.n - cp_len :]
    if p.c1 != 0.0 and cp_len:
        prefix = prefix * cpp_phase(p, cp_len)
    return np.concatenate([prefix, s], axis=-1)


def afdm_demodulate(samples, p: AfdmParams, cp_len: int = 0) -> np.ndarray:
    r = np.asarray(samples, dtype=complex)
    _check_len(r, p.n + cp_len, "afdm_demodulate")
    body = r[..., cp_len:]
    if p.c1 != 0.0:
        body = body * _chirp(p.c1, p.n, -1)
    y = np.fft.fft(body, axis=-1, norm="ortho")
    if p.c2 != 0.0:
        y = y * _chirp(p.c2, p.n, -1)
    return y


def daft_matrix(p: AfdmParams) -> np.ndarray:
    """Forward DAFT matrix A = L_c2 F L_c1 (demodulation without prefix)."""
    return afdm_demodulate(np.eye(p.n), p, 0).T
