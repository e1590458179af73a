"""Monte-Carlo BER comparison of the four air-ground transmission schemes.

Frame layouts (every symbol carries its own prefix, channel quasi-static per frame):

* ``OFDM-TF-pilot``  [OFDM pilot][M x OFDM data][OFDM pilot]; block LS estimates from
  both pilot symbols are averaged (no Doppler model), then one-tap MMSE.
* ``OFDM-AF-pilot``  [AF pilot][M x OFDM data][AF pilot]; per-path delay/Doppler/gain
  read in the AF domain, Doppler refined from the pilot-to-pilot phase rotation, the TF
  response rebuilt per data symbol, then one-tap MMSE.
* ``AFDM-MMSE``      [AF pilot][M x AFDM data][AF pilot]; same estimator, full AF-domain
  channel matrix per data symbol, block MMSE.
* ``AFDM-SLP``       [M x AFDM data] precoded at the transmitter with its CSI; the
  receiver only demodulates and slices. Without pilots, the frame's energy budget
  (M + 2 symbols' worth) goes to data when ``equal_frame_energy`` is set.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from ..channel import (
    ChannelProfile,
    ChannelRealization,
    LinkBudget,
    apply_channel,
    max_doppler,
    sample_channel,
)
from .equalize import EqualizerError, afdm_mmse_equalize, equalize_onetap
from .estimation import (
    ChannelEstimate,
    EstimatedPath,
    PilotLayout,
    af_pilot_estimate,
    build_af_channel_matrix,
    estimate_to_tf,
    ls_tf_estimate,
    track_doppler,
)
from .modem import (
    AfdmParams,
    ModemConfig,
    afdm_demodulate,
    afdm_modulate,
    ofdm_demodulate,
    ofdm_modulate,
    qpsk_demap,
    qpsk_map,
)
from .precoding import slp_precode

SCHEMES = ("OFDM-TF-pilot", "AFDM-MMSE", "OFDM-AF-pilot", "AFDM-SLP")
CSV_FIELDS = ("scheme", "snr_db", "speed_mps", "frames", "bit_errors", "ber")


@dataclass(frozen=True)
class BerSetup:
    modem: ModemConfig = ModemConfig(n_subcarriers=128, subcarrier_spacing=120e3, cp_len=16)
    data_symbols: int = 30
    carrier: float = 5.8e9
    profile: ChannelProfile = ChannelProfile()
    detect_sigmas: float = 4.0
    csi: str = "estimated"  # or "perfect"
    slp_refine: bool = True
    # SLP frames need no pilots; spend the two pilot symbols' energy on data instead
    equal_frame_energy: bool = True
    link_distance: tuple[float, float] = (100.0, 500.0)
    uav_altitude: float = 100.0

    def afdm(self, speed: float) -> AfdmParams:
        bins = max_doppler(max(speed, self.profile.max_speed), self.carrier) / self.modem.subcarrier_spacing
        return AfdmParams.for_doppler(self.modem.n_subcarriers, bins)

    def layout(self, p: AfdmParams) -> PilotLayout:
        n = self.modem.n_subcarriers
        return PilotLayout(
            pilot_index=0,
            guard_width=n - 1 - p.alpha_max,
            pilot_power_boost=10 * np.log10(n),
            max_delay=self.modem.cp_len,
            alpha_max=p.alpha_max,
        )


@dataclass
class BerPoint:
    scheme: str
    snr_db: float
    speed_mps: float
    frames: int
    bit_errors: int
    bits: int

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else float("nan")


def draw_frame_channel(setup: BerSetup, speed: float, rng: np.random.Generator, noise_var: float) -> ChannelRealization:
    """Random geometry: UAV at altitude, random heading, ground receiver at random range."""
    d = rng.uniform(*setup.link_distance)
    az = rng.uniform(0, 2 * np.pi)
    target = np.array([d * np.cos(az), d * np.sin(az), 0.0])
    uav = np.array([0.0, 0.0, setup.uav_altitude])
    heading = rng.uniform(0, 2 * np.pi)
    vel = speed * np.array([np.cos(heading), np.sin(heading), 0.0])
    fs = setup.modem.sample_rate
    return sample_channel(uav, vel, target, None, LinkBudget(carrier=setup.carrier), rng,
                          sample_rate=fs, profile=setup.profile, noise_psd=noise_var / fs)


def _perfect_estimate(h: ChannelRealization, n: int) -> ChannelEstimate:
    spacing = h.sample_rate / n
    return ChannelEstimate(
        paths=tuple(
            EstimatedPath(int(l), float(t.doppler / spacing), t.gain) for t, l in zip(h.taps, h.delay_samples)
        ),
        source_domain="truth",
    )


def _pilot_estimate(rx, setup: BerSetup, p: AfdmParams, starts, noise_var: float) -> ChannelEstimate:
    n, cp = p.n, setup.modem.cp_len
    layout = setup.layout(p)
    thr = setup.detect_sigmas * np.sqrt(noise_var) / layout.amplitude
    ests, mids = [], []
    for s in starts:
        grid = afdm_demodulate(rx[s : s + n + cp], p, cp)
        ests.append(af_pilot_estimate(grid, layout, thr, p, cp, start=s))
        mids.append(s + cp + (n - 1) / 2)
    if not ests[0].paths:
        return ests[0]
    return track_doppler(ests[0], ests[1], n, mids[0], mids[1])


def _frame_ofdm(scheme, h, setup, p, bits, noise_var, rng):
    cfg = setup.modem
    n, cp, m = cfg.n_subcarriers, cfg.cp_len, setup.data_symbols
    L = cfg.symbol_len
    data = qpsk_map(bits)
    if scheme == "OFDM-TF-pilot":
        pilots = qpsk_map(rng.integers(0, 2, (n, 2)))
        pil_sym = ofdm_modulate(pilots, cfg)
    else:
        pil_sym = afdm_modulate(setup.layout(p).pilot_frame(n), p, cp)
    tx = np.concatenate([pil_sym, ofdm_modulate(data, cfg).ravel(), pil_sym])
    rx = apply_channel(tx, h, rng)
    starts_pilot = (0, (m + 1) * L)
    if setup.csi == "perfect":
        est = _perfect_estimate(h, n)
        h_sym = [estimate_to_tf(est, n, t_mid=(i + 1) * L + cp + (n - 1) / 2) for i in range(m)]
    elif scheme == "OFDM-TF-pilot":
        h_tf = np.mean([ls_tf_estimate(ofdm_demodulate(rx[s : s + L], cfg), pilots, cp) for s in starts_pilot], axis=0)
        h_sym = [h_tf] * m
    else:
        est = _pilot_estimate(rx, setup, p, starts_pilot, noise_var)
        if not est.paths:
            return None
        h_sym = [estimate_to_tf(est, n, t_mid=(i + 1) * L + cp + (n - 1) / 2) for i in range(m)]
    out = []
    for i in range(m):
        s = (i + 1) * L
        grid = ofdm_demodulate(rx[s : s + L], cfg)
        out.append(equalize_onetap(grid, h_sym[i], noise_var))
    return np.array(out)


def _frame_afdm_mmse(h, setup, p, bits, noise_var, rng):
    cfg = setup.modem
    n, cp, m = cfg.n_subcarriers, cfg.cp_len, setup.data_symbols
    L = cfg.symbol_len
    pil_sym = afdm_modulate(setup.layout(p).pilot_frame(n), p, cp)
    tx = np.concatenate([pil_sym, afdm_modulate(qpsk_map(bits), p, cp).ravel(), pil_sym])
    rx = apply_channel(tx, h, rng)
    if setup.csi == "perfect":
        h_use = h
    else:
        est = _pilot_estimate(rx, setup, p, (0, (m + 1) * L), noise_var)
        if not est.paths:
            return None
        h_use = est.to_realization(n, h.sample_rate)
    out = []
    for i in range(m):
        s = (i + 1) * L
        grid = afdm_demodulate(rx[s : s + L], p, cp)
        h_af = build_af_channel_matrix(h_use, p, cp, start=s)
        out.append(afdm_mmse_equalize(grid, h_af, noise_var))
    return np.array(out)


def _frame_afdm_slp(h, setup, p, bits, noise_var, rng):
    cfg = setup.modem
    n, cp, m = cfg.n_subcarriers, cfg.cp_len, setup.data_symbols
    L = cfg.symbol_len
    data = qpsk_map(bits)
    budget = float(n) * ((m + 2) / m if setup.equal_frame_energy else 1.0)
    tx = []
    for i in range(m):
        h_af = build_af_channel_matrix(h, p, cp, start=i * L)
        pre = slp_precode(data[i], h_af, budget, noise_var=noise_var if setup.slp_refine else None)
        tx.append(afdm_modulate(pre.vector, p, cp))
    rx = apply_channel(np.concatenate(tx), h, rng)
    return np.array([afdm_demodulate(rx[i * L : (i + 1) * L], p, cp) for i in range(m)])


def run_frame(scheme: str, h: ChannelRealization, setup: BerSetup, p: AfdmParams, bits, noise_var, rng):
    """Symbol decisions (soft values) for one frame, or None on outage/solver failure."""
    if scheme in ("OFDM-TF-pilot", "OFDM-AF-pilot"):
        return _frame_ofdm(scheme, h, setup, p, bits, noise_var, rng)
    if scheme == "AFDM-MMSE":
        try:
            return _frame_afdm_mmse(h, setup, p, bits, noise_var, rng)
        except EqualizerError:
            return None
    if scheme == "AFDM-SLP":
        return _frame_afdm_slp(h, setup, p, bits, noise_var, rng)
    raise ValueError(f"unknown scheme {scheme!r}")


def ber_experiment(
    scheme: str,
    snr_list,
    speed: float,
    n_frames: int,
    seed: int,
    setup: BerSetup = BerSetup(),
    *,
    noiseless: bool = False,
) -> list[BerPoint]:
    """BER per SNR point. Channels, payloads and noise are redrawn every frame.

    The same seed yields the same channels and payloads for every scheme, so runs of
    different schemes are paired. Dropped frames count as all bits in error.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if speed > setup.profile.max_speed:
        raise ValueError("speed above the configured cap")
    p = setup.afdm(speed)
    n, m = setup.modem.n_subcarriers, setup.data_symbols
    points = []
    for j, snr_db in enumerate(snr_list):
        noise_var = 0.0 if noiseless else 10 ** (-snr_db / 10)
        errors = 0
        for f in range(n_frames):
            rng = np.random.default_rng([seed, j, f])
            h = draw_frame_channel(setup, speed, rng, noise_var)
            bits = rng.integers(0, 2, (m, n, 2), dtype=np.int8)
            noise_rng = np.random.default_rng([seed, j, f, 1])
            est = run_frame(scheme, h, setup, p, bits, noise_var, noise_rng)
            if est is None:
                errors += bits.size
            else:
                errors += int(np.count_nonzero(qpsk_demap(est) != bits))
        points.append(BerPoint(scheme, float(snr_db), float(speed), n_frames, errors, n_frames * m * n * 2))
    return points


def ber_csv(points: list[BerPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for pt in points:
        w.writerow([pt.scheme, f"{pt.snr_db:g}", f"{pt.speed_mps:g}", pt.frames, pt.bit_errors, f"{pt.ber:.6e}"])
    return buf.getvalue()
