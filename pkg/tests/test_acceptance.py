"""Acceptance suite: one test per criterion, each recording a pass/fail line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
terminal summary under "acceptance criteria".
"""

import hashlib
import time
from dataclasses import replace

import numpy as np

from sc3sim.channel import ChannelRealization, apply_channel
from sc3sim.compute import ComputeConfig, latency_local, latency_pando, latency_relay, relay_stage_costs
from sc3sim.config import SimConfig
from sc3sim.control import RlConfig, evaluate, first_time_above, plan_aco, plan_rrt, train_rl
from sc3sim.loop import EXPERIMENTS, closed_loop_runs, planning_map, reference_image
from sc3sim.sar import iou, point_target_run
from sc3sim.waveform.ber import ber_experiment
from sc3sim.waveform.equalize import afdm_mmse_equalize
from sc3sim.waveform.estimation import build_af_channel_matrix
from sc3sim.waveform.modem import (
    AfdmParams,
    ModemConfig,
    afdm_demodulate,
    afdm_modulate,
    daft_matrix,
    ofdm_demodulate,
    ofdm_modulate,
)

from test_compute import event_makespan

CFG = SimConfig()


def _cplx(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def test_c01_modem_round_trip_and_unitarity(criterion):
    rng = np.random.default_rng(0)
    worst_rt = 0.0
    for n, cp in ((16, 4), (64, 16), (128, 16), (1200, 150)):
        cfg = ModemConfig(n_subcarriers=n, cp_len=cp)
        x = _cplx(rng, 4, n)
        worst_rt = max(worst_rt, np.abs(ofdm_demodulate(ofdm_modulate(x, cfg), cfg) - x).max())
        p = AfdmParams.for_doppler(n, 2)
        worst_rt = max(worst_rt, np.abs(afdm_demodulate(afdm_modulate(x, p, cp), p, cp) - x).max())
    worst_u = 0.0
    for n in (16, 64, 128):
        a = daft_matrix(AfdmParams.for_doppler(n, 2))
        worst_u = max(worst_u, np.abs(a @ a.conj().T - np.eye(n)).max())
    ok = worst_rt < 1e-10 and worst_u < 1e-9
    criterion(1, ok, f"round-trip error {worst_rt:.2e} (< 1e-10), DAFT unitarity error {worst_u:.2e} (< 1e-9)")
    assert ok


def test_c02_afdm_without_chirps_equals_ofdm(criterion):
    rng = np.random.default_rng(1)
    same = True
    for n, cp in ((16, 4), (128, 16), (1200, 150)):
        cfg = ModemConfig(n_subcarriers=n, cp_len=cp)
        p = AfdmParams(c1=0.0, c2=0.0, n=n)
        x = _cplx(rng, 3, n)
        s = ofdm_modulate(x, cfg)
        same &= np.array_equal(afdm_modulate(x, p, cp), s)
        same &= np.array_equal(afdm_demodulate(s, p, cp), ofdm_demodulate(s, cfg))
    criterion(2, same, "c1 = c2 = 0 modulator and demodulator outputs bit-identical to OFDM")
    assert same


def test_c03_channel_matrix_and_mmse_oracles(criterion):
    rng = np.random.default_rng(2)
    worst_h = 0.0
    for n in (8, 16, 32):
        cp = n // 4
        p = AfdmParams.for_doppler(n, 1)
        fs = n * 15e3
        h = ChannelRealization.from_arrays(_cplx(rng, 3), [0, 1, cp], rng.uniform(-1, 1, 3) * 15e3, fs)
        start = int(rng.integers(0, 200))
        probe = []
        for k in range(n):
            x = np.zeros(n, complex)
            x[k] = 1.0
            stream = np.concatenate([np.zeros(start, complex), afdm_modulate(x, p, cp)])
            probe.append(afdm_demodulate(apply_channel(stream, h, noiseless=True)[start : start + n + cp], p, cp))
        worst_h = max(worst_h, np.abs(build_af_channel_matrix(h, p, cp, start) - np.array(probe).T).max())
    worst_m = 0.0
    for n, s2 in ((16, 0.1), (64, 0.01), (128, 1.0)):
        hm, y = _cplx(rng, n, n), _cplx(rng, n)
        ref = np.linalg.inv(hm.conj().T @ hm + s2 * np.eye(n)) @ hm.conj().T @ y
        worst_m = max(worst_m, np.abs(afdm_mmse_equalize(y, hm, s2) - ref).max())
    ok = worst_h < 1e-9 and worst_m < 1e-8
    criterion(3, ok, f"H_af vs probing {worst_h:.2e} (< 1e-9), MMSE vs dense inverse {worst_m:.2e} (< 1e-8)")
    assert ok


def _ber_table(schemes, snrs, frames, setup, seed=0):
    return {
        s: [pt for pt in ber_experiment(s, snrs, 40.0, frames, seed, setup)]
        for s in schemes
    }


def test_c04_af_pilot_beats_tf_pilot(criterion):
    sec = CFG.ber
    t0 = time.perf_counter()
    table = _ber_table(("OFDM-TF-pilot", "OFDM-AF-pilot", "AFDM-MMSE"), sec.snr_db, sec.frames, sec.setup, CFG.seed)
    elapsed = time.perf_counter() - t0
    bits = table["OFDM-AF-pilot"][0].bits
    rows, ok = [], bits >= 1e5 and elapsed <= 300
    for i, snr in enumerate(sec.snr_db):
        tf, af, mm = (table[s][i].ber for s in ("OFDM-TF-pilot", "OFDM-AF-pilot", "AFDM-MMSE"))
        ok &= tf > af and af <= 2 * mm
        rows.append(f"{snr:g} dB TF {tf:.2e} AF {af:.2e} MMSE {mm:.2e}")
    criterion(4, ok, f"{'; '.join(rows)}; {bits} bits/point; {elapsed:.0f} s")
    assert ok


SLP_SNRS = (0.0, 5.0, 10.0, 15.0, 20.0)
SLP_FRAMES = 20


def test_c05_slp_not_worse_than_mmse_with_perfect_csi(criterion):
    setup = replace(CFG.ber.setup, csi="perfect")
    t0 = time.perf_counter()
    table = _ber_table(("AFDM-SLP", "AFDM-MMSE"), SLP_SNRS, SLP_FRAMES, setup, CFG.seed)
    elapsed = time.perf_counter() - t0
    wins = [table["AFDM-SLP"][i].ber <= table["AFDM-MMSE"][i].ber for i in range(len(SLP_SNRS))]
    frac = float(np.mean(wins))
    ok = frac >= 0.8 and elapsed <= 300
    pairs = ", ".join(f"{s:g} dB {a.ber:.2e}/{b.ber:.2e}" for s, a, b in zip(SLP_SNRS, table["AFDM-SLP"], table["AFDM-MMSE"]))
    criterion(5, ok, f"SLP <= MMSE at {frac:.0%} of points (SLP/MMSE: {pairs}); {elapsed:.0f} s")
    assert ok


def test_c06_sar_resolution_and_occupancy(criterion):
    sec = CFG.sar
    t0 = time.perf_counter()
    _, rep = point_target_run(sec.radar, slant_range=sec.point_slant_range, altitude=sec.point_altitude,
                              azimuth_res=sec.point_azimuth_res, pixel=sec.point_pixel, n_pixels=sec.point_pixels)
    img, occ, truth = reference_image(CFG)
    elapsed = time.perf_counter() - t0
    score = iou(occ, truth)
    grid = img.grid
    ok = (
        0.78 <= rep["range_width"] <= 1.30
        and 0.375 <= rep["azimuth_width"] <= 0.625
        and sec.occupancy.threshold == 0.3
        and score >= 0.5
        and (grid.nx, grid.ny) == (256, 256)
        and elapsed <= 120
    )
    criterion(6, ok, f"range {rep['range_width']:.3f} m, azimuth {rep['azimuth_width']:.3f} m, "
                     f"IoU {score:.3f} at threshold {sec.occupancy.threshold:g} on {grid.nx}x{grid.ny}; {elapsed:.0f} s")
    assert ok


def test_c07_latency_anchors(criterion):
    c = ComputeConfig()
    task = c.task()
    local = latency_local(task, c.nodes().uav).total
    pando = latency_pando(task, c.nodes(), c.links()).total
    slow = (c.nodes(5.0), c.links(1.92e6))
    fast = (c.nodes(40.0), c.links(15.36e6))
    relay_slow, pando_slow = latency_relay(task, *slow, c.chunks).total, latency_pando(task, *slow).total
    relay_fast, pando_fast = latency_relay(task, *fast, c.chunks).total, latency_pando(task, *fast).total
    oracle_ok = all(
        latency_relay(task, c.nodes(e), c.links(b), k).detail["makespan"]
        == event_makespan(relay_stage_costs(task, c.nodes(e), c.links(b), k), k)
        for e in c.sweep_edge_gcps for b in c.sweep_bandwidth_hz for k in (1, 2, 4)
    )
    reduction = 1 - pando / local
    ok = (
        round(local, 3) == 0.541 and round(pando, 3) == 0.077 and reduction >= 0.85
        and relay_slow < pando_slow and abs(relay_fast - pando_fast) <= 0.05 * pando_fast and oracle_ok
    )
    criterion(7, ok, f"local {local:.3f} s, P&O {pando:.3f} s ({reduction:.1%} less); "
                     f"relay {relay_slow:.3f} < P&O {pando_slow:.3f} at 5 Gc/s, 1.92 MHz; "
                     f"|relay - P&O| {abs(relay_fast - pando_fast) / pando_fast:.1%} at 40 Gc/s, 15.36 MHz; "
                     f"event oracle {'exact' if oracle_ok else 'MISMATCH'}")
    assert ok


def test_c08_rl_beats_planners(criterion):
    sec = CFG.mission
    scene = CFG.scene.build()
    occ = planning_map(scene, sec.planner_map, CFG.survey)
    t0 = time.perf_counter()
    times = {"rl": [], "rrt": [], "aco": []}
    collisions, climbs = 0, []
    for seed in sec.seeds:
        link = replace(sec.link)
        policy, _ = train_rl(scene, link, sec.mission, sec.rl, seed)
        rl = evaluate(policy, scene, link, sec.mission)
        runs = (rl, plan_rrt(occ, scene, link, sec.mission, seed, sec.rrt), plan_aco(occ, scene, link, sec.mission, seed, sec.aco))
        for r in runs:
            times[r.planner].append(r.completion_time if r.completed else np.inf)
            collisions += r.collisions
        climbs.append(first_time_above(rl, scene.median_height) <= rl.completion_time / 3)
    elapsed = time.perf_counter() - t0
    med = {k: float(np.median(v)) for k, v in times.items()}
    ok = (
        len(sec.seeds) >= 5 and med["rl"] < med["rrt"] < med["aco"]
        and collisions == 0 and all(climbs) and elapsed <= 900
    )
    criterion(8, ok, f"median completion RL {med['rl']:.2f} < RRT {med['rrt']:.2f} < ACO {med['aco']:.2f} s over "
                     f"{len(sec.seeds)} seeds; collisions {collisions}; RL above median height in first third "
                     f"{sum(climbs)}/{len(climbs)}; {elapsed:.0f} s")
    assert ok


def test_c09_edge_compute_speeds_up_the_loop(criterion):
    t0 = time.perf_counter()
    runs = closed_loop_runs(CFG, modes=("pando", "local"))
    elapsed = time.perf_counter() - t0
    med = {m: float(np.median([r.result.completion_time if r.result.completed else np.inf for r in runs if r.mode == m]))
           for m in ("pando", "local")}
    lat = {m: runs[[r.mode for r in runs].index(m)].result.meta["latency_s"] for m in ("pando", "local")}
    collisions = sum(r.result.collisions for r in runs)
    n_seeds = len({r.seed for r in runs})
    ok = n_seeds >= 5 and med["pando"] <= med["local"] and collisions == 0 and elapsed <= 600
    criterion(9, ok, f"median completion edge ({lat['pando']:.3f} s) {med['pando']:.2f} s <= local "
                     f"({lat['local']:.3f} s) {med['local']:.2f} s over {n_seeds} seeds; collisions {collisions}; {elapsed:.0f} s")
    assert ok


def _quick_config() -> SimConfig:
    """Reduced sizes so that every experiment can be run twice."""
    return replace(
        CFG,
        ber=replace(CFG.ber, frames=1),
        mission=replace(CFG.mission, rl=RlConfig(episodes=30), seeds=(0,)),
        loop=replace(CFG.loop, seeds=(0,)),
    )


def _digests(root):
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_c10_reruns_are_hash_identical(criterion, tmp_path):
    cfg = _quick_config()
    for run in ("a", "b"):
        for name, runner in EXPERIMENTS.items():
            runner(cfg, tmp_path / run / name)
    a, b = _digests(tmp_path / "a"), _digests(tmp_path / "b")
    diff = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    ok = bool(a) and not diff
    criterion(10, ok, f"{len(a)} files across {len(EXPERIMENTS)} experiments, {len(diff)} differ")
    assert ok
