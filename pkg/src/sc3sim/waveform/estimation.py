"""Effective AF-domain channel, AF-domain pilot estimation and TF-domain reconstruction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..channel import ChannelRealization
from .modem import AfdmParams, afdm_demodulate, afdm_modulate, cpp_phase


@dataclass(frozen=True)
class PilotLayout:
    pilot_index: int = 0
    guard_width: int = 64  # AF indices searched below the pilot
    pilot_power_boost: float = 0.0  # dB over a unit-energy data symbol
    max_delay: int = 16  # samples
    alpha_max: int = 1  # integer Doppler bins

    @property
    def amplitude(self) -> float:
        return float(10 ** (self.pilot_power_boost / 20))

    def window(self, q: int) -> np.ndarray:
        """Relative AF offsets a pilot response may occupy; a path at (delay l, Doppler a) lands at a - q*l."""
        lo = min(self.guard_width, q * self.max_delay + self.alpha_max)
        return np.arange(-lo, self.alpha_max + 1)

    def pilot_frame(self, n: int) -> np.ndarray:
        x = np.zeros(n, dtype=complex)
        x[self.pilot_index] = self.amplitude
        return x


@dataclass(frozen=True)
class EstimatedPath:
    delay_idx: int
    doppler_idx: float  # AF bins (multiples of the subcarrier spacing), may be fractional after tracking
    gain: complex  # referenced to stream sample 0


@dataclass(frozen=True)
class ChannelEstimate:
    paths: tuple[EstimatedPath, ...] = ()
    source_domain: str = "AF"
    meta: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.paths)

    def to_realization(self, n: int, sample_rate: float, noise_psd: float = 0.0) -> ChannelRealization:
        spacing = sample_rate / n
        return ChannelRealization.from_arrays(
            [pth.gain for pth in self.paths],
            [pth.delay_idx for pth in self.paths],
            [pth.doppler_idx * spacing for pth in self.paths],
            sample_rate,
            noise_psd,
        )


def time_domain_matrix(h: ChannelRealization, p: AfdmParams, cp_len: int, start: int = 0) -> np.ndarray:
    """Map from the prefix-free transmit body to the received body of one symbol.

    ``start`` is the stream index of the symbol's first prefix sample; the Doppler phase
    is referenced to stream sample 0, exactly as in ``apply_channel``.
    """
    n = p.n
    ell = h.delay_samples
    if ell.max() > cp_len:
        raise ValueError("tap delay exceeds the prefix length")
    prefix = cpp_phase(p, cp_len) if (p.c1 != 0.0 and cp_len) else np.ones(cp_len, dtype=complex)
    rows = np.arange(n)
    ht = np.zeros((n, n), dtype=complex)
    ts = 1.0 / h.sample_rate
    for tap, l in zip(h.taps, ell):
        ramp = tap.gain * np.exp(2j * np.pi * tap.doppler * (start + cp_len + rows) * ts)
        src = rows - l
        wrapped = src < 0
        coef = np.ones(n, dtype=complex)
        coef[wrapped] = prefix[cp_len + src[wrapped]]
        ht[rows, src % n] += ramp * coef
    return ht


def build_af_channel_matrix(h: ChannelRealization, p: AfdmParams, cp_len: int, start: int = 0) -> np.ndarray:
    """H_af with demod(apply_channel(mod(x))) == H_af @ x in noiseless mode."""
    ht = time_domain_matrix(h, p, cp_len, start)
    # A @ ht @ A^H, with A^H applied column-wise by the modulator
    s_cols = afdm_modulate(np.eye(p.n), p, 0).T  # columns: A^H e_k
    left = ht @ s_cols
    return afdm_demodulate(left.T, p, 0).T


def _unit_response(col: int, delay: int, doppler_bins: float, p: AfdmParams, cp_len: int, start: int) -> np.ndarray:
    """AF-domain response of a unit tap to an impulse at ``col`` (one column of H_af)."""
    x = np.zeros(p.n, dtype=complex)
    x[col] = 1.0
    s = afdm_modulate(x, p, cp_len)
    n_abs = start + cp_len + np.arange(p.n)
    body_src = np.arange(p.n) - delay  # index into the prefixed symbol = cp_len + body_src
    r = s[cp_len + body_src] * np.exp(2j * np.pi * doppler_bins * n_abs / p.n)
    return afdm_demodulate(np.concatenate([np.zeros(cp_len), r]), p, cp_len)


def af_pilot_estimate(
    rx_af,
    layout: PilotLayout,
    threshold: float,
    p: AfdmParams,
    cp_len: int,
    *,
    start: int = 0,
    max_paths: int = 8,
) -> ChannelEstimate:
    """Read delay/Doppler/gain of each path off the pilot's AF-domain neighbourhood.

    ``threshold`` is on the pilot-normalized magnitude. An empty estimate means no
    path cleared it (treated as an outage by callers).
    """
    y = np.asarray(rx_af, dtype=complex)
    q = p.delay_spacing
    amp = layout.amplitude
    offs = layout.window(q)
    idx = (layout.pilot_index + offs) % p.n
    mag = np.abs(y[idx]) / amp
    keep = np.flatnonzero(mag >= threshold)
    keep = keep[np.argsort(-mag[keep], kind="stable")][:max_paths]
    paths = []
    for k in sorted(keep):
        off = int(offs[k])
        delay = (layout.alpha_max - off) // q if q > 0 else 0
        alpha = off + q * delay
        if delay > layout.max_delay or abs(alpha) > layout.alpha_max:
            continue
        resp = _unit_response(layout.pilot_index, delay, alpha, p, cp_len, start)[idx[k]]
        paths.append(EstimatedPath(int(delay), float(alpha), complex(y[idx[k]] / (amp * resp))))
    return ChannelEstimate(paths=tuple(paths))


def track_doppler(est_a: ChannelEstimate, est_b: ChannelEstimate, n: int, mid_a: float, mid_b: float) -> ChannelEstimate:
    """Refine per-path Doppler from the phase rotation between two pilot symbols.

    ``mid_a``/``mid_b`` are the stream indices of the two pilot bodies' midpoints. Paths
    are paired by (delay, coarse Doppler); unpaired paths keep their coarse values.
    """
    lookup = {(pth.delay_idx, round(pth.doppler_idx)): pth for pth in est_b.paths}
    span = mid_b - mid_a
    out = []
    for pa in est_a.paths:
        pb = lookup.get((pa.delay_idx, round(pa.doppler_idx)))
        if pb is None or pa.gain == 0:
            out.append(pa)
            continue
        nu = np.angle(pb.gain / pa.gain) * n / (2 * np.pi * span)
        g0 = 0.5 * (
            pa.gain * np.exp(-2j * np.pi * nu * mid_a / n) + pb.gain * np.exp(-2j * np.pi * nu * mid_b / n)
        )
        out.append(EstimatedPath(pa.delay_idx, pa.doppler_idx + float(nu), complex(g0)))
    return ChannelEstimate(paths=tuple(out))


def estimate_to_tf(est: ChannelEstimate, n: int, cp_len: int = 0, t_mid: float | None = None) -> np.ndarray:
    """Per-subcarrier response with each path's Doppler phase frozen at ``t_mid``.

    ``t_mid`` is a stream sample index; the default is the body midpoint of a symbol
    whose prefix starts at sample 0.
    """
    if not est.paths:
        raise ValueError("empty channel estimate")
    if t_mid is None:
        t_mid = cp_len + (n - 1) / 2
    k = np.arange(n)
    h = np.zeros(n, dtype=complex)
    for pth in est.paths:
        h += pth.gain * np.exp(2j * np.pi * pth.doppler_idx * t_mid / n) * np.exp(-2j * np.pi * k * pth.delay_idx / n)
    return h


def ls_tf_estimate(rx_grid, pilots, cp_len: int) -> np.ndarray:
    """Conventional block-pilot LS estimate, denoised by keeping the first ``cp_len + 1`` taps."""
    h_ls = np.asarray(rx_grid) / np.asarray(pilots)
    taps = np.fft.ifft(h_ls)
    taps[cp_len + 1 :] = 0.0
    return np.fft.fft(taps)
