"""Experiment harness: the four batch experiments and the closed sensing-to-control loop.

Each ``run_*`` writes CSV / PGM outputs plus ``manifest.json`` (config hash, seed and a
SHA-256 per output) into ``out`` and returns an :class:`ExperimentReport`. Nothing
time-dependent is written, so identical (config, seed) pairs give identical files.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import io
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .compute import ComputeConfig, choose_mode, latency_local, latency_pando, latency_relay, latency_sweep, sweep_csv
from .config import ConfigError, LoopSection, SimConfig
from .control.aco import plan_aco
from .control.env import (
    ACTIONS,
    HOVER,
    BudgetLink,
    MissionConfig,
    PlannerResult,
    env_step,
    initial_state,
    trajectory_csv,
)
from .control.evaluate import evaluate, first_time_above
from .control.maps import OccupancyMap
from .control.rl import Policy, train_rl, training_curve_csv
from .control.rrt import plan_rrt
from .sar import (
    SarImage,
    SurveyConfig,
    back_project,
    iou,
    point_target_run,
    sensed_occupancy,
    straight_pass,
    survey_image,
    synthesize_echoes,
    write_pgm,
)
from .scene import Scene, footprint_mask, scatterers
from .waveform.ber import ber_csv, ber_experiment

log = logging.getLogger(__name__)


@dataclass
class ExperimentReport:
    experiment: str
    outputs: list[str]
    summary: dict
    config_hash: str
    seed: int


@dataclass(frozen=True)
class TickRecord:
    t: float
    position: tuple[float, float, float]
    velocity: tuple[float, float, float]
    served: tuple[float, ...]  # cumulative bits per GU
    sensing_frames: int
    map_version: int
    control_latency: float
    shielded: bool  # the shield overrode the policy's first choice


TICK_FIELDS = ("t", "x", "y", "z", "vx", "vy", "vz", "served_bits_total", "sensing_frames", "map_version",
               "control_latency_s", "shielded")


# -- output plumbing ------------------------------------------------------------------


class _Writer:
    def __init__(self, out):
        self.out = Path(out) if out is not None else None
        self.files: list[Path] = []
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)

    def text(self, name: str, content: str) -> None:
        if self.out is None:
            return
        p = self.out / name
        with open(p, "w", newline="\n") as fh:
            fh.write(content)
        self.files.append(p)

    def pgm(self, name: str, img: SarImage) -> None:
        if self.out is None:
            return
        p = write_pgm(img, self.out / name)
        self.files += [p, p.with_suffix(".json")]

    def finish(self, experiment: str, cfg: SimConfig, summary: dict) -> ExperimentReport:
        digest = cfg.digest()
        if self.out is not None:
            manifest = {
                "experiment": experiment,
                "config_hash": digest,
                "seed": cfg.seed,
                "outputs": {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in self.files},
                "summary": summary,
            }
            self.text("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
            (self.out / "config.json").write_text(cfg.dumps() + "\n")
        return ExperimentReport(experiment, [str(p) for p in self.files], summary, digest, cfg.seed)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _r(x: float, nd: int = 6) -> float:
    return float(round(float(x), nd))


# -- BER ------------------------------------------------------------------------------


def run_ber(cfg: SimConfig, out=None) -> ExperimentReport:
    """BER of every configured scheme over the SNR grid; one CSV row per (scheme, SNR)."""
    sec = cfg.ber
    points = []
    for scheme in sec.schemes:
        points += ber_experiment(scheme, sec.snr_db, sec.speed, sec.frames, cfg.seed, sec.setup)
    w = _Writer(out)
    w.text("ber.csv", ber_csv(points))
    summary = {f"{p.scheme}@{p.snr_db:g}dB": _r(p.ber, 9) for p in points}
    return w.finish("ber", cfg, summary)


# -- latency --------------------------------------------------------------------------


def run_latency(cfg: SimConfig, out=None) -> ExperimentReport:
    """Latency of every mode over the (edge speed, bandwidth) sweep."""
    rows = latency_sweep(cfg.latency)
    task = cfg.latency.task()
    nodes, links = cfg.latency.nodes(), cfg.latency.links()
    w = _Writer(out)
    w.text("latency.csv", sweep_csv(rows))
    summary = {
        "local_s": _r(latency_local(task, nodes.uav).total),
        "pando_s": _r(latency_pando(task, nodes, links).total),
        "relay_s": _r(latency_relay(task, nodes, links, cfg.latency.chunks).total),
        "chosen_mode": choose_mode(task, nodes, links, cfg.latency.chunks).mode,
        "input_bits": _r(task.input_bits, 3),
    }
    return w.finish("latency", cfg, summary)


# -- SAR ------------------------------------------------------------------------------


def reference_image(cfg: SimConfig) -> tuple[SarImage, np.ndarray, np.ndarray]:
    """Image of the reference patch; returns (image, sensed occupancy, true footprint)."""
    sec = cfg.sar
    patch = sec.patch.build()
    times, pos = straight_pass(sec.radar, sec.pass_center)
    scat = scatterers(patch, sec.scatterer_spacing, jitter=sec.jitter)
    img = back_project(synthesize_echoes(pos, scat, sec.radar, times=times), sec.radar)
    occ = sensed_occupancy(img, sec.occupancy)
    truth = footprint_mask(patch, sec.radar.grid.x, sec.radar.grid.y)
    return img, occ, truth


def run_sar(cfg: SimConfig, out=None) -> ExperimentReport:
    """Point-target resolution run plus the reference-patch image and its occupancy map."""
    sec = cfg.sar
    pt_img, rep = point_target_run(
        sec.radar,
        slant_range=sec.point_slant_range,
        altitude=sec.point_altitude,
        azimuth_res=sec.point_azimuth_res,
        pixel=sec.point_pixel,
        n_pixels=sec.point_pixels,
    )
    img, occ, truth = reference_image(cfg)
    score = iou(occ, truth)
    w = _Writer(out)
    w.pgm("point_target.pgm", pt_img)
    w.pgm("patch_image.pgm", img)
    w.pgm("patch_occupancy.pgm", SarImage(occ.astype(float), img.grid))
    w.pgm("patch_truth.pgm", SarImage(truth.astype(float), img.grid))
    keys = ("range_width", "azimuth_width", "peak_error", "theory_range", "theory_azimuth")
    rows = [(k, f"{rep[k]:.6f}") for k in keys] + [("iou", f"{score:.6f}"), ("threshold", f"{sec.occupancy.threshold:g}")]
    w.text("sar_report.csv", _csv(("metric", "value"), rows))
    summary = {k: _r(rep[k]) for k in keys} | {"iou": _r(score)}
    return w.finish("sar", cfg, summary)


# -- maps -----------------------------------------------------------------------------


@functools.lru_cache(maxsize=4)
def _survey_cached(scene_json: str, survey: SurveyConfig) -> OccupancyMap:
    scene = Scene.loads(scene_json)
    img, occ = survey_image(scene, survey)
    return OccupancyMap.from_raster(occ, img.grid.x, img.grid.y)


def survey_map(scene: Scene, survey: SurveyConfig) -> OccupancyMap:
    """SAR-derived footprint map of the whole scene (cached per scene and survey settings)."""
    return _survey_cached(scene.dumps(), survey)


def planning_map(scene: Scene, source: str, survey: SurveyConfig) -> OccupancyMap:
    if source == "truth":
        return OccupancyMap.from_scene(scene, cell=survey.pixel)
    if source == "sar":
        return survey_map(scene, survey)
    raise ConfigError(f"unknown map source {source!r}")


# -- mission --------------------------------------------------------------------------


MISSION_FIELDS = ("planner", "seed", "completion_time", "completed", "collisions", "served_bits", "first_above_median_s")


def _mission_row(res: PlannerResult, seed: int, scene: Scene) -> tuple:
    return (
        res.planner,
        seed,
        f"{res.completion_time:.2f}",
        int(res.completed),
        res.collisions,
        f"{res.served.sum():.0f}",
        f"{first_time_above(res, scene.median_height):.2f}",
    )


def run_mission(cfg: SimConfig, out=None) -> ExperimentReport:
    """RL (trained per seed), RRT and ACO on the reference scene for every configured seed."""
    sec = cfg.mission
    scene = cfg.scene.build()
    occ = planning_map(scene, sec.planner_map, cfg.survey)
    w = _Writer(out)
    rows = []
    times: dict[str, list[float]] = {"rl": [], "rrt": [], "aco": []}
    failures = 0
    for seed in sec.seeds:
        link = replace(sec.link)  # fresh LoS cache per seed
        policy, curve = train_rl(scene, link, sec.mission, sec.rl, seed)
        results = [
            evaluate(policy, scene, link, sec.mission),
            plan_rrt(occ, scene, link, sec.mission, seed, sec.rrt),
            plan_aco(occ, scene, link, sec.mission, seed, sec.aco),
        ]
        w.text(f"training_seed{seed}.csv", training_curve_csv(curve))
        for res in results:
            w.text(f"trajectory_{res.planner}_seed{seed}.csv", trajectory_csv(res))
            rows.append(_mission_row(res, seed, scene))
            times[res.planner].append(res.completion_time)
            failures += int(not res.completed)
    w.text("mission_summary.csv", _csv(MISSION_FIELDS, rows))
    summary = {f"median_{k}_s": _r(np.median(v)) for k, v in times.items()}
    summary |= {"median_building_height": _r(scene.median_height), "incomplete_runs": failures}
    return w.finish("mission", cfg, summary)


# -- closed loop ----------------------------------------------------------------------


def frequency_plan(loop: LoopSection) -> dict:
    """Subcarrier index ranges of the wideband (sensing + service) and narrowband (control) blocks."""
    wb, nb = loop.wideband, loop.narrowband
    if wb.subcarrier_spacing != nb.subcarrier_spacing:
        raise ConfigError("both blocks must share one subcarrier grid")
    wide = (0, wb.n_subcarriers)
    narrow = (loop.narrowband_offset, loop.narrowband_offset + nb.n_subcarriers)
    if narrow[0] < wide[1] and wide[0] < narrow[1]:
        raise ConfigError(f"narrowband block {narrow} overlaps the wideband block {wide}")
    frame = wb.symbol_len / wb.sample_rate
    if loop.tick < frame:
        raise ConfigError(f"tick {loop.tick} s is shorter than one wideband frame ({frame:.3g} s)")
    return {"wideband": wide, "narrowband": narrow, "frame_s": frame, "frames_per_tick": int(loop.tick // frame)}


def response_latency(compute: ComputeConfig, mode: str) -> float:
    task, nodes, links = compute.task(), compute.nodes(), compute.links()
    if mode == "local":
        return latency_local(task, nodes.uav).total
    if mode == "pando":
        return latency_pando(task, nodes, links).total
    if mode == "relay":
        return latency_relay(task, nodes, links, compute.chunks).total
    if mode == "auto":
        return choose_mode(task, nodes, links, compute.chunks).total
    raise ConfigError(f"unknown compute mode {mode!r}")


def _disc_mask(occ: OccupancyMap, center, radius: float) -> np.ndarray:
    nx, ny = occ.shape
    xs = occ.x0 + (np.arange(nx) + 0.5) * occ.cell
    ys = occ.y0 + (np.arange(ny) + 0.5) * occ.cell
    return ((xs[:, None] - center[0]) ** 2 + (ys[None, :] - center[1]) ** 2) <= radius * radius


def _shield(ranking, is_safe) -> int:
    """Best-ranked safe action. A vetoed move is replaced by the next safe move, not by
    hover, so a stale command at a boundary cannot park the UAV; hover is the fallback."""
    first = int(ranking[0])
    if first == HOVER or is_safe(first):
        return first
    return next((int(c) for c in ranking[1:] if c != HOVER and is_safe(int(c))), HOVER)


def closed_loop(
    scene: Scene,
    policy: Policy,
    link: BudgetLink,
    mission: MissionConfig,
    loop: LoopSection,
    latency: float,
    source_map: OccupancyMap,
) -> tuple[PlannerResult, list[TickRecord]]:
    """Serial tick loop with offloaded sensing and control.

    At each tick boundary the UAV's sensing batch and state snapshot are offloaded; the
    map update (``source_map`` revealed within ``sensing_radius``) and the policy's
    command for that snapshot both return ``latency`` seconds later. The UAV flies the
    newest delivered command (hover before the first). A command is the policy's action
    ranking; the onboard shield flies the best-ranked action whose target stays inside
    the scene and, below ``clearance_altitude``, lies in a cell that the current map has
    revealed and shows free (with the safety margin). A vetoed move falls through to the
    next safe move; hover is the last resort. With ``loop.predict`` the planner first
    flies the snapshot forward through the commands still in flight.
    """
    plan = frequency_plan(loop)
    if abs(loop.tick - mission.dt) > 1e-12:
        raise ConfigError("loop tick and mission dt must agree")
    blocked = source_map.inflated(mission.margin).mask
    revealed = np.zeros(source_map.shape, bool)
    s = initial_state(scene, mission)
    demanded = s.remaining_bits.copy()
    pending: list[tuple[float, np.ndarray, np.ndarray]] = []  # (ready time, action ranking, sensing position)
    ranking, version, frames = np.array([HOVER]), 0, 0
    ticks: list[TickRecord] = []
    rows = [(0.0, *s.uav_position, 0.0)]

    def offload(state):
        ready = state.elapsed + latency
        ahead = state
        if loop.predict:
            # the planner knows the commands still in flight and flies the snapshot
            # through them, so the new command fits the state it will be applied in
            current, queue, t = ranking, list(pending), state.elapsed
            while t < ready - 1e-12 and not ahead.done:
                while queue and queue[0][0] <= t + 1e-12:
                    current = queue.pop(0)[1]
                ahead, _ = env_step(ahead, int(current[0]), scene, link, mission)
                t += mission.dt
        scores = policy.scores(ahead.uav_position, ahead.remaining_bits, scene)
        pending.append((ready, np.argsort(-scores, kind="stable"), state.uav_position.copy()))

    def safe(p) -> bool:
        if not (0.0 <= p[0] <= scene.bounds[0] and 0.0 <= p[1] <= scene.bounds[1]):
            return False
        if p[2] >= loop.clearance_altitude:
            return True
        ix, iy = source_map.cell_index(p[:2])
        nx, ny = source_map.shape
        if not (0 <= ix < nx and 0 <= iy < ny):
            return False
        return bool(revealed[ix, iy] and not blocked[ix, iy])

    if not s.done:
        offload(s)
    while not s.done and s.elapsed < mission.time_limit - 1e-9:
        while pending and pending[0][0] <= s.elapsed + 1e-12:
            _, ranking, where = pending.pop(0)
            revealed |= _disc_mask(source_map, where, loop.sensing_radius)
            version += 1
        a = _shield(ranking, lambda c: safe(s.uav_position + ACTIONS[c] * mission.step_len))
        shielded = a != int(ranking[0])
        s, _ = env_step(s, a, scene, link, mission)
        frames += plan["frames_per_tick"]
        served = demanded - s.remaining_bits
        ticks.append(TickRecord(
            t=float(s.elapsed),
            position=tuple(float(v) for v in s.uav_position),
            velocity=tuple(float(v) for v in s.uav_velocity),
            served=tuple(float(v) for v in served),
            sensing_frames=frames,
            map_version=version,
            control_latency=float(latency),
            shielded=bool(shielded),
        ))
        rows.append((s.elapsed, *s.uav_position, float(served.sum())))
        if not s.done:
            offload(s)
    res = PlannerResult(
        trajectory=np.array(rows),
        completion_time=float(s.elapsed),
        collisions=int(s.collided),
        served=demanded - s.remaining_bits,
        completed=s.done and not s.collided,
        planner="rl-closed-loop",
        meta={"latency_s": latency, "map_versions": version, "shielded_ticks": sum(t.shielded for t in ticks)},
    )
    return res, ticks


def ticks_csv(ticks: list[TickRecord]) -> str:
    rows = [
        (f"{k.t:.2f}", *(f"{v:.3f}" for v in k.position), *(f"{v:.3f}" for v in k.velocity),
         f"{sum(k.served):.0f}", k.sensing_frames, k.map_version, f"{k.control_latency:.6f}", int(k.shielded))
        for k in ticks
    ]
    return _csv(TICK_FIELDS, rows)


@dataclass
class LoopRun:
    seed: int
    mode: str
    result: PlannerResult
    ticks: list[TickRecord] = field(repr=False)


def closed_loop_runs(cfg: SimConfig, modes=None, seeds=None) -> list[LoopRun]:
    """One RL policy per seed (trained in the simulator), flown once per compute mode."""
    loop = cfg.loop
    modes = tuple(modes) if modes is not None else (loop.compute_mode,)
    seeds = tuple(seeds) if seeds is not None else loop.seeds
    scene = cfg.scene.build()
    mission = cfg.mission.mission
    if loop.map_source == "truth":
        source = OccupancyMap.from_scene(scene, cell=cfg.survey.pixel)
    else:
        source = survey_map(scene, cfg.survey)
    latencies = {m: response_latency(cfg.latency, m) for m in modes}
    runs = []
    for seed in seeds:
        link = replace(cfg.mission.link)
        policy, _ = train_rl(scene, link, mission, cfg.mission.rl, seed)
        for m in modes:
            res, ticks = closed_loop(scene, policy, link, mission, loop, latencies[m], source)
            runs.append(LoopRun(seed, m, res, ticks))
    return runs


LOOP_FIELDS = ("seed", "mode", "latency_s", "completion_time", "completed", "collisions", "map_versions", "shielded_ticks")


def run_closed_loop(cfg: SimConfig, out=None, *, modes=None, seeds=None) -> ExperimentReport:
    """Closed-loop missions for every (seed, compute mode); default modes: the configured one and local."""
    if modes is None:
        modes = tuple(dict.fromkeys((cfg.loop.compute_mode, "local")))
    runs = closed_loop_runs(cfg, modes, seeds)
    w = _Writer(out)
    rows = []
    for r in runs:
        w.text(f"ticks_{r.mode}_seed{r.seed}.csv", ticks_csv(r.ticks))
        m = r.result.meta
        rows.append((r.seed, r.mode, f"{m['latency_s']:.6f}", f"{r.result.completion_time:.2f}",
                     int(r.result.completed), r.result.collisions, m["map_versions"], m["shielded_ticks"]))
    w.text("closed_loop_summary.csv", _csv(LOOP_FIELDS, rows))
    summary = {"frequency_plan": {k: list(v) if isinstance(v, tuple) else v for k, v in frequency_plan(cfg.loop).items()}}
    for mode in modes:
        ct = [r.result.completion_time for r in runs if r.mode == mode]
        summary[f"median_{mode}_s"] = _r(np.median(ct))
        summary[f"incomplete_{mode}"] = sum(not r.result.completed for r in runs if r.mode == mode)
    return w.finish("closed-loop", cfg, summary)


EXPERIMENTS = {
    "ber": run_ber,
    "latency": run_latency,
    "sar": run_sar,
    "mission": run_mission,
    "closed-loop": run_closed_loop,
}
