"""Doubly-dispersive air-ground link: tap sampling, tap-domain filtering, path loss, Shannon rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import Scene, is_los

# Rounded value keeps the closed-form Doppler numbers (40 m/s at 5.8 GHz -> 773.33 Hz) exact.
SPEED_OF_LIGHT = 3.0e8
BOLTZMANN_T0 = 1.380649e-23 * 290.0


@dataclass(frozen=True)
class PathTap:
    gain: complex
    delay: float  # seconds
    doppler: float  # Hz


@dataclass(frozen=True)
class ChannelRealization:
    taps: tuple[PathTap, ...]
    sample_rate: float
    noise_psd: float = 0.0  # W/Hz, relative to unit transmit power per sample

    def __post_init__(self):
        if not self.taps:
            raise ValueError("a channel realization needs at least one tap")

    @property
    def gains(self) -> np.ndarray:
        return np.array([t.gain for t in self.taps], dtype=complex)

    @property
    def delay_samples(self) -> np.ndarray:
        return np.rint(np.array([t.delay for t in self.taps]) * self.sample_rate).astype(int)

    @property
    def dopplers(self) -> np.ndarray:
        return np.array([t.doppler for t in self.taps], dtype=float)

    @property
    def noise_var(self) -> float:
        return self.noise_psd * self.sample_rate

    def with_noise_var(self, noise_var: float) -> ChannelRealization:
        return ChannelRealization(self.taps, self.sample_rate, noise_var / self.sample_rate)

    @classmethod
    def from_arrays(cls, gains, delay_samples, dopplers_hz, sample_rate, noise_psd=0.0):
        order = np.argsort(np.asarray(delay_samples), kind="stable")
        taps = tuple(
            PathTap(complex(gains[i]), float(delay_samples[i]) / sample_rate, float(dopplers_hz[i]))
            for i in order
        )
        return cls(taps=taps, sample_rate=float(sample_rate), noise_psd=float(noise_psd))


@dataclass(frozen=True)
class LinkBudget:
    carrier: float = 5.8e9
    tx_power: float = 1.0  # W (30 dBm)
    noise_figure: float = 7.0  # dB
    antenna_gain: float = 0.0  # dBi, applied once per end

    def __post_init__(self):
        if self.carrier <= 0 or self.tx_power <= 0:
            raise ValueError("carrier and tx_power must be positive")


@dataclass(frozen=True)
class ChannelProfile:
    """Multipath profile knobs with conventional low-altitude values."""

    k_factor_db: float = 10.0
    n_nlos: int = 3
    nlos_decay: float = 0.5  # power ratio between successive NLoS taps
    nlos_excess_db: float = 30.0
    scatter_radius: float = 5.0  # meters around the receiver (near-receiver ground clutter)
    scatter_height: float = 2.0  # meters, upper bound of scatterer heights
    max_delay: float = 1.0e-6  # seconds, excess delay cap
    max_speed: float = 40.0


def max_doppler(speed: float, carrier: float) -> float:
    return speed * carrier / SPEED_OF_LIGHT


def sample_channel(
    uav_position,
    uav_velocity,
    target,
    scene: Scene | None,
    budget: LinkBudget,
    rng: np.random.Generator,
    *,
    sample_rate: float = 15.36e6,
    profile: ChannelProfile = ChannelProfile(),
    noise_psd: float = 0.0,
) -> ChannelRealization:
    """Draw one quasi-static realization between the UAV and ``target``.

    Delays are excess delays relative to the earliest arrival; Doppler of each tap is
    the projection of the UAV velocity on the tap's departure direction.
    """
    p = np.asarray(uav_position, dtype=float)
    v = np.asarray(uav_velocity, dtype=float)
    q = np.asarray(target, dtype=float)
    speed = float(np.linalg.norm(v))
    if speed > profile.max_speed + 1e-9:
        raise ValueError(f"UAV speed {speed:.2f} m/s exceeds cap {profile.max_speed} m/s")
    scale = budget.carrier / SPEED_OF_LIGHT

    d_direct = float(np.linalg.norm(q - p))
    los = True if scene is None else is_los(p, q, scene)

    # scatterers on a disk around the receiver, low heights
    r = profile.scatter_radius * np.sqrt(rng.random(profile.n_nlos))
    phi = rng.uniform(0.0, 2 * np.pi, profile.n_nlos)
    s = q + np.column_stack([r * np.cos(phi), r * np.sin(phi), rng.uniform(0.0, profile.scatter_height, profile.n_nlos)])
    leg1 = s - p
    leg1_len = np.linalg.norm(leg1, axis=1)
    excess = (leg1_len + np.linalg.norm(q - s, axis=1) - d_direct) / SPEED_OF_LIGHT
    excess = np.minimum(excess, profile.max_delay)
    nlos_order = np.argsort(excess, kind="stable")
    excess = excess[nlos_order]
    u_nlos = (leg1 / np.maximum(leg1_len, 1e-12)[:, None])[nlos_order]

    w = profile.nlos_decay ** np.arange(profile.n_nlos)
    w = w / w.sum() if profile.n_nlos else w
    g_nlos = np.sqrt(w / 2) * (rng.standard_normal(profile.n_nlos) + 1j * rng.standard_normal(profile.n_nlos))
    dop_nlos = (u_nlos @ v) * scale

    gains, delays, dops = [], [], []
    if los:
        k = 10 ** (profile.k_factor_db / 10)
        u = (q - p) / max(d_direct, 1e-12)
        gains.append(np.sqrt(k / (k + 1)) * np.exp(2j * np.pi * rng.random()))
        delays.append(0.0)
        dops.append(float(u @ v) * scale)
        g_nlos = g_nlos / np.sqrt(k + 1)
    gains.extend(g_nlos)
    delays.extend(excess)
    dops.extend(dop_nlos)

    gains = np.asarray(gains, dtype=complex)
    gains /= np.linalg.norm(gains)
    delays = np.asarray(delays) - np.min(delays)
    order = np.argsort(delays, kind="stable")
    taps = tuple(PathTap(complex(gains[i]), float(delays[i]), float(dops[i])) for i in order)
    return ChannelRealization(taps=taps, sample_rate=sample_rate, noise_psd=noise_psd)


def apply_channel(
    x,
    h: ChannelRealization,
    rng: np.random.Generator | None = None,
    *,
    noiseless: bool = False,
    max_delay_samples: int | None = None,
) -> np.ndarray:
    """y[n] = sum_p g_p exp(j 2 pi f_p n Ts) x[n - l_p] + w[n], delays rounded to samples."""
    x = np.asarray(x, dtype=complex)
    ell = h.delay_samples
    if max_delay_samples is not None and ell.max() > max_delay_samples:
        raise ValueError(f"tap delay {ell.max()} samples exceeds limit {max_delay_samples}")
    n_out = len(x) + int(ell.max())
    n = np.arange(n_out)
    y = np.zeros(n_out, dtype=complex)
    ts = 1.0 / h.sample_rate
    for tap, l in zip(h.taps, ell):
        seg = slice(l, l + len(x))
        if tap.doppler == 0.0:
            y[seg] += tap.gain * x
        else:
            y[seg] += tap.gain * np.exp(2j * np.pi * tap.doppler * n[seg] * ts) * x
    if not noiseless and h.noise_psd > 0:
        if rng is None:
            raise ValueError("an rng is required when noise is enabled")
        sigma = np.sqrt(h.noise_var / 2)
        y += sigma * (rng.standard_normal(n_out) + 1j * rng.standard_normal(n_out))
    return y


def pathloss_db(distance: float, los: bool, carrier: float, nlos_excess_db: float = 30.0):
    """Free-space loss plus a fixed excess when the direct path is blocked."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    fs = 20.0 * np.log10(4 * np.pi * d * carrier / SPEED_OF_LIGHT)
    out = fs + np.where(los, 0.0, nlos_excess_db)
    return float(out) if out.ndim == 0 else out


def achievable_rate(snr_linear, bandwidth: float):
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    snr = np.asarray(snr_linear, dtype=float)
    if np.any(snr < 0):
        raise ValueError("snr must be non-negative")
    out = bandwidth * np.log2(1.0 + snr)
    return float(out) if out.ndim == 0 else out


def noise_power(bandwidth: float, noise_figure_db: float) -> float:
    return BOLTZMANN_T0 * bandwidth * 10 ** (noise_figure_db / 10)


def link_snr(budget: LinkBudget, distance, los, bandwidth: float, nlos_excess_db: float = 30.0):
    """Received SNR (linear) for the given geometry under ``budget``."""
    pl = pathloss_db(distance, los, budget.carrier, nlos_excess_db)
    rx_dbw = 10 * np.log10(budget.tx_power) + 2 * budget.antenna_gain - pl
    return 10 ** ((rx_dbw - 10 * np.log10(noise_power(bandwidth, budget.noise_figure))) / 10)
