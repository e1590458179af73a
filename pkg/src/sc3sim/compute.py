"""UAV-edge-cloud computation latency and energy: local, packaging-and-offloading, relay."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

from .channel import achievable_rate

MODES = ("local", "pando", "relay")  # also the tie-break order
TIE_TOL = 1e-12  # s


@dataclass(frozen=True)
class Stage:
    cycles: float
    out_bits: float


@dataclass(frozen=True)
class TaskSpec:
    input_bits: float
    total_cycles: float
    output_bits: float
    stages: tuple[Stage, ...] = ()

    def __post_init__(self):
        if min(self.input_bits, self.total_cycles, self.output_bits) < 0:
            raise ValueError("task sizes must be non-negative")
        if self.stages:
            if not math.isclose(sum(s.cycles for s in self.stages), self.total_cycles, rel_tol=1e-9, abs_tol=1e-6):
                raise ValueError("stage cycles must sum to total_cycles")
            outs = [s.out_bits for s in self.stages]
            if any(b > a for a, b in zip(outs, outs[1:])):
                raise ValueError("stage outputs must be nonincreasing")
            if not math.isclose(outs[-1], self.output_bits, rel_tol=1e-12, abs_tol=1e-9):
                raise ValueError("last stage output must equal output_bits")

    @classmethod
    def split(cls, input_bits, total_cycles, output_bits, cycle_shares, feature_shares) -> TaskSpec:
        """Three-stage task: cycle fractions per stage, feature sizes as fractions of input_bits."""
        if len(cycle_shares) != 3 or len(feature_shares) != 2:
            raise ValueError("a split task has three stages and two intermediate features")
        outs = [f * input_bits for f in feature_shares] + [output_bits]
        stages = tuple(Stage(c * total_cycles, b) for c, b in zip(cycle_shares, outs))
        return cls(input_bits, total_cycles, output_bits, stages)


@dataclass(frozen=True)
class NodeProfile:
    role: str
    frequency: float  # cycles/s

    def __post_init__(self):
        if self.role not in ("uav", "edge", "cloud"):
            raise ValueError(f"unknown role {self.role!r}")
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")


@dataclass(frozen=True)
class Nodes:
    uav: NodeProfile
    edge: NodeProfile
    cloud: NodeProfile


@dataclass(frozen=True)
class LinkProfile:
    bandwidth: float  # Hz, UAV-edge access link
    snr_linear: float
    backhaul_rate: float  # bit/s, edge-cloud

    def __post_init__(self):
        if self.bandwidth <= 0 or self.backhaul_rate <= 0 or self.snr_linear < 0:
            raise ValueError("invalid link profile")

    @property
    def rate(self) -> float:
        """Access-link rate, used for both directions."""
        return achievable_rate(self.snr_linear, self.bandwidth)


@dataclass(frozen=True)
class LatencyBreakdown:
    upload: float
    compute: float
    download: float
    total: float
    mode: str
    detail: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if min(self.upload, self.compute, self.download, self.total) < 0:
            raise ValueError("latency components must be non-negative")


def _xfer(bits: float, rate: float) -> float:
    if bits == 0:
        return 0.0
    return bits / rate if rate > 0 else math.inf


def latency_local(task: TaskSpec, uav: NodeProfile) -> LatencyBreakdown:
    c = task.total_cycles / uav.frequency
    return LatencyBreakdown(0.0, c, 0.0, c, "local")


def latency_pando(task: TaskSpec, nodes: Nodes, links: LinkProfile, executor: str = "edge") -> LatencyBreakdown:
    """Ship the raw input, run the whole task on ``executor``, return the command.

    An unreachable executor (zero-rate link) yields infinite latency.
    """
    if executor not in ("edge", "cloud"):
        raise ValueError("executor must be edge or cloud")
    r = links.rate
    up = _xfer(task.input_bits, r)
    down = _xfer(task.output_bits, r)
    node = nodes.edge
    if executor == "cloud":
        up += _xfer(task.input_bits, links.backhaul_rate)
        down += _xfer(task.output_bits, links.backhaul_rate)
        node = nodes.cloud
    c = task.total_cycles / node.frequency
    return LatencyBreakdown(up, c, down, up + c + down, "pando", {"executor": executor})


def relay_stage_costs(task: TaskSpec, nodes: Nodes, links: LinkProfile, chunks: int) -> list[float]:
    """Per-chunk busy time of the five pipeline resources: uav, uplink, edge, backhaul, cloud."""
    if len(task.stages) != 3:
        raise ValueError("relay processing needs exactly three stages (uav, edge, cloud)")
    if chunks < 1:
        raise ValueError("chunks must be >= 1")
    s_uav, s_edge, s_cloud = task.stages
    return [
        s_uav.cycles / nodes.uav.frequency / chunks,
        _xfer(s_uav.out_bits, links.rate) / chunks,
        s_edge.cycles / nodes.edge.frequency / chunks,
        _xfer(s_edge.out_bits, links.backhaul_rate) / chunks,
        s_cloud.cycles / nodes.cloud.frequency / chunks,
    ]


def flow_shop_makespan(costs, chunks: int) -> float:
    """Finish time of ``chunks`` identical jobs through serial FIFO resources:
    done[j] = max(done[j], done[j - 1]) + costs[j], swept once per chunk."""
    done = [0.0] * len(costs)
    for _ in range(chunks):
        prev = 0.0
        for j, c in enumerate(costs):
            done[j] = max(done[j], prev) + c
            prev = done[j]
    return done[-1] if done else 0.0


def latency_relay(task: TaskSpec, nodes: Nodes, links: LinkProfile, chunks: int = 2) -> LatencyBreakdown:
    """Pipelined split execution: chunk i+1 enters a resource as soon as chunk i leaves it.

    The makespan of identical chunks through the five serial resources equals
    sum(costs) + (chunks - 1) * max(costs); it is evaluated with the completion-time
    recurrence so that it matches an event-driven schedule to the last bit. The command
    then returns cloud -> edge -> UAV.
    """
    costs = relay_stage_costs(task, nodes, links, chunks)
    makespan = flow_shop_makespan(costs, chunks)
    down = _xfer(task.output_bits, links.backhaul_rate) + _xfer(task.output_bits, links.rate)
    compute = chunks * (costs[0] + costs[2] + costs[4])
    upload = chunks * (costs[1] + costs[3])
    return LatencyBreakdown(
        upload, compute, down, makespan + down, "relay", {"chunks": chunks, "makespan": makespan, "stage_costs": costs}
    )


def choose_mode(task: TaskSpec, nodes: Nodes, links: LinkProfile, chunks: int = 2) -> LatencyBreakdown:
    """Lowest predicted total; ties within ``TIE_TOL`` go to the earlier entry of ``MODES``."""
    cands = [latency_local(task, nodes.uav), latency_pando(task, nodes, links)]
    if len(task.stages) == 3:
        cands.append(latency_relay(task, nodes, links, chunks))
    best = cands[0]
    for c in cands[1:]:
        if c.total < best.total - TIE_TOL:
            best = c
    return best


@dataclass(frozen=True)
class EnergyBreakdown:
    uav_compute: float
    uav_transmit: float
    remote_compute: float

    @property
    def uav(self) -> float:
        return self.uav_compute + self.uav_transmit

    @property
    def total(self) -> float:
        return self.uav + self.remote_compute


def energy_estimate(
    task: TaskSpec,
    mode: str,
    nodes: Nodes,
    links: LinkProfile,
    *,
    kappa: float = 1e-27,
    tx_power: float = 1.0,
    chunks: int = 2,
) -> EnergyBreakdown:
    """kappa * f^2 * cycles on every executing node plus UAV transmit power times uplink airtime."""

    def e(node: NodeProfile, cycles: float) -> float:
        return kappa * node.frequency**2 * cycles

    if mode == "local":
        return EnergyBreakdown(e(nodes.uav, task.total_cycles), 0.0, 0.0)
    if mode == "pando":
        lat = latency_pando(task, nodes, links)
        if not math.isfinite(lat.total):
            raise ValueError("mode latency is not finite")
        return EnergyBreakdown(0.0, tx_power * _xfer(task.input_bits, links.rate), e(nodes.edge, task.total_cycles))
    if mode == "relay":
        lat = latency_relay(task, nodes, links, chunks)
        if not math.isfinite(lat.total):
            raise ValueError("mode latency is not finite")
        s_uav, s_edge, s_cloud = task.stages
        return EnergyBreakdown(
            e(nodes.uav, s_uav.cycles),
            tx_power * _xfer(s_uav.out_bits, links.rate),
            e(nodes.edge, s_edge.cycles) + e(nodes.cloud, s_cloud.cycles),
        )
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class ComputeConfig:
    """Calibrated reference: local 0.541 s, and P&O at (40 Gcycles/s, 15.36 MHz) = 0.077 s.

    The UAV pair (2 Gcycles/s, 1.082 Gcycles) fixes the local anchor. With the access
    link at 10 dB SNR, ``input_bits`` is solved so that upload + edge compute + download
    of a 10 kbit command equals the P&O anchor.
    """

    uav_gcps: float = 2.0
    total_gcycles: float = 1.082
    edge_gcps: float = 40.0
    cloud_gcps: float = 100.0
    bandwidth_hz: float = 15.36e6
    snr_db: float = 10.0
    backhaul_bps: float = 1e9
    output_bits: float = 1e4
    pando_anchor_s: float = 0.077
    cycle_shares: tuple[float, float, float] = (0.12, 0.63, 0.25)
    feature_shares: tuple[float, float] = (0.10, 0.02)
    chunks: int = 2
    kappa: float = 1e-27
    tx_power: float = 1.0
    sweep_edge_gcps: tuple[float, ...] = (5.0, 10.0, 20.0, 40.0)
    sweep_bandwidth_hz: tuple[float, ...] = (1.92e6, 7.68e6, 15.36e6)

    def links(self, bandwidth_hz: float | None = None) -> LinkProfile:
        bw = self.bandwidth_hz if bandwidth_hz is None else bandwidth_hz
        return LinkProfile(bw, 10 ** (self.snr_db / 10), self.backhaul_bps)

    def nodes(self, edge_gcps: float | None = None) -> Nodes:
        eg = self.edge_gcps if edge_gcps is None else edge_gcps
        return Nodes(NodeProfile("uav", self.uav_gcps * 1e9), NodeProfile("edge", eg * 1e9), NodeProfile("cloud", self.cloud_gcps * 1e9))

    def calibrated_input_bits(self) -> float:
        r = self.links().rate
        budget = self.pando_anchor_s - self.total_gcycles / self.edge_gcps - self.output_bits / r
        if budget <= 0:
            raise ValueError("anchor latency leaves no time for the upload")
        return budget * r

    def task(self) -> TaskSpec:
        return TaskSpec.split(
            self.calibrated_input_bits(), self.total_gcycles * 1e9, self.output_bits, self.cycle_shares, self.feature_shares
        )


SWEEP_FIELDS = ("mode", "edge_gcps", "bandwidth_hz", "upload_s", "compute_s", "download_s", "total_s")


def latency_sweep(cfg: ComputeConfig = ComputeConfig()) -> list[dict]:
    task = cfg.task()
    rows = []
    for bw in cfg.sweep_bandwidth_hz:
        links = cfg.links(bw)
        for eg in cfg.sweep_edge_gcps:
            nodes = cfg.nodes(eg)
            for lat in (
                latency_local(task, nodes.uav),
                latency_pando(task, nodes, links),
                latency_relay(task, nodes, links, cfg.chunks),
            ):
                rows.append(
                    {"mode": lat.mode, "edge_gcps": eg, "bandwidth_hz": bw, "upload_s": lat.upload,
                     "compute_s": lat.compute, "download_s": lat.download, "total_s": lat.total}
                )
    return rows


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_FIELDS)
    for r in rows:
        w.writerow([r["mode"], f"{r['edge_gcps']:g}", f"{r['bandwidth_hz']:.0f}"] + [f"{r[k]:.9f}" for k in SWEEP_FIELDS[3:]])
    return buf.getvalue()
