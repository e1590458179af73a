"""Synthetic urban world: box buildings, ground users, line-of-sight and collision queries."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

DEFAULT_BOUNDS = (1000.0, 1000.0)
DEFAULT_DEMAND_BITS = 10e6


class ScenePlacementError(RuntimeError):
    """Raised when buildings or users cannot be placed within the retry budget."""


@dataclass(frozen=True)
class Building:
    center_xy: tuple[float, float]
    width: float
    depth: float
    height: float

    def __post_init__(self):
        if self.width <= 0 or self.depth <= 0 or self.height <= 0:
            raise ValueError(f"building dimensions must be positive: {self}")

    @property
    def lo(self) -> np.ndarray:
        cx, cy = self.center_xy
        return np.array([cx - self.width / 2, cy - self.depth / 2, 0.0])

    @property
    def hi(self) -> np.ndarray:
        cx, cy = self.center_xy
        return np.array([cx + self.width / 2, cy + self.depth / 2, self.height])

    def footprint_overlaps(self, other: Building, gap: float = 0.0) -> bool:
        """Closed-rectangle overlap test, optionally requiring ``gap`` meters of clearance."""
        dx = abs(self.center_xy[0] - other.center_xy[0])
        dy = abs(self.center_xy[1] - other.center_xy[1])
        return (dx <= (self.width + other.width) / 2 + gap) and (
            dy <= (self.depth + other.depth) / 2 + gap
        )


@dataclass(frozen=True)
class GroundUser:
    position: tuple[float, float, float]
    demanded_bits: float = DEFAULT_DEMAND_BITS
    remaining_bits: float = DEFAULT_DEMAND_BITS

    def __post_init__(self):
        if not 0 <= self.remaining_bits <= self.demanded_bits:
            raise ValueError("remaining_bits must lie in [0, demanded_bits]")


@dataclass(frozen=True)
class Scene:
    bounds: tuple[float, float]
    buildings: tuple[Building, ...] = ()
    users: tuple[GroundUser, ...] = ()
    rng_seed: int = 0

    @cached_property
    def box_lo(self) -> np.ndarray:
        return np.array([b.lo for b in self.buildings]).reshape(-1, 3)

    @cached_property
    def box_hi(self) -> np.ndarray:
        return np.array([b.hi for b in self.buildings]).reshape(-1, 3)

    @cached_property
    def user_positions(self) -> np.ndarray:
        return np.array([u.position for u in self.users], dtype=float).reshape(-1, 3)

    @property
    def max_height(self) -> float:
        return max((b.height for b in self.buildings), default=0.0)

    @property
    def median_height(self) -> float:
        if not self.buildings:
            return 0.0
        return float(np.median([b.height for b in self.buildings]))

    # -- serialization ---------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "bounds": list(self.bounds),
            "rng_seed": self.rng_seed,
            "buildings": [
                {
                    "center_xy": list(b.center_xy),
                    "width": b.width,
                    "depth": b.depth,
                    "height": b.height,
                }
                for b in self.buildings
            ],
            "users": [
                {
                    "position": list(u.position),
                    "demanded_bits": u.demanded_bits,
                    "remaining_bits": u.remaining_bits,
                }
                for u in self.users
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> Scene:
        return cls(
            bounds=tuple(float(v) for v in doc["bounds"]),
            rng_seed=int(doc.get("rng_seed", 0)),
            buildings=tuple(
                Building(
                    center_xy=tuple(float(v) for v in b["center_xy"]),
                    width=float(b["width"]),
                    depth=float(b["depth"]),
                    height=float(b["height"]),
                )
                for b in doc.get("buildings", [])
            ),
            users=tuple(
                GroundUser(
                    position=tuple(float(v) for v in u["position"]),
                    demanded_bits=float(u["demanded_bits"]),
                    remaining_bits=float(u["remaining_bits"]),
                )
                for u in doc.get("users", [])
            ),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def loads(cls, text: str) -> Scene:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ScattererSet:
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    reflectivity: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return len(self.reflectivity)


def generate_scene(
    seed: int,
    n_buildings: int = 12,
    bounds: tuple[float, float] = DEFAULT_BOUNDS,
    *,
    n_users: int = 10,
    demanded_bits: float = DEFAULT_DEMAND_BITS,
    size_range: tuple[float, float] = (60.0, 140.0),
    height_range: tuple[float, float] = (20.0, 100.0),
    street_gap: float = 30.0,
    edge_clearance: float = 40.0,
    user_clearance: float = 10.0,
    max_tries: int = 10_000,
) -> Scene:
    """Place ``n_buildings`` non-overlapping boxes and ``n_users`` ground users.

    Buildings are rejection-sampled with at least ``street_gap`` meters between
    footprints and ``edge_clearance`` meters from the scene border, so that a
    low-altitude flight corridor always exists. Users are drawn uniformly in the
    free space outside every footprint (inflated by ``user_clearance``).
    """
    if n_buildings < 0 or n_users < 0:
        raise ValueError("counts must be non-negative")
    w, h = bounds
    if w <= 0 or h <= 0:
        raise ValueError("bounds must be positive")
    rng = np.random.default_rng(seed)

    buildings: list[Building] = []
    tries = 0
    while len(buildings) < n_buildings:
        tries += 1
        if tries > max_tries:
            raise ScenePlacementError(
                f"placed {len(buildings)}/{n_buildings} buildings in {max_tries} tries"
            )
        bw, bd = rng.uniform(*size_range, size=2)
        bh = rng.uniform(*height_range)
        lo_x, hi_x = edge_clearance + bw / 2, w - edge_clearance - bw / 2
        lo_y, hi_y = edge_clearance + bd / 2, h - edge_clearance - bd / 2
        if lo_x > hi_x or lo_y > hi_y:
            continue
        cand = Building(
            center_xy=(float(rng.uniform(lo_x, hi_x)), float(rng.uniform(lo_y, hi_y))),
            width=float(bw),
            depth=float(bd),
            height=float(bh),
        )
        if any(cand.footprint_overlaps(b, street_gap) for b in buildings):
            continue
        buildings.append(cand)

    users: list[GroundUser] = []
    tries = 0
    while len(users) < n_users:
        tries += 1
        if tries > max_tries:
            raise ScenePlacementError(f"placed {len(users)}/{n_users} users in {max_tries} tries")
        x, y = rng.uniform(user_clearance, w - user_clearance), rng.uniform(
            user_clearance, h - user_clearance
        )
        if any(
            abs(x - b.center_xy[0]) <= b.width / 2 + user_clearance
            and abs(y - b.center_xy[1]) <= b.depth / 2 + user_clearance
            for b in buildings
        ):
            continue
        users.append(
            GroundUser(
                position=(float(x), float(y), 0.0),
                demanded_bits=demanded_bits,
                remaining_bits=demanded_bits,
            )
        )
    return Scene(bounds=(float(w), float(h)), buildings=tuple(buildings), users=tuple(users), rng_seed=seed)


def segments_blocked(a: np.ndarray, b: np.ndarray, scene: Scene) -> np.ndarray:
    """Vectorized segment/box test. ``a`` and ``b`` are (..., 3); returns a bool array."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    out_shape = a.shape[:-1]
    if not scene.buildings:
        return np.zeros(out_shape, dtype=bool)
    # canonical endpoint order keeps the test exactly symmetric in (a, b)
    swap = _lex_greater(a, b)
    p = np.where(swap[..., None], b, a)[..., None, :]
    q = np.where(swap[..., None], a, b)[..., None, :]
    d = q - p
    lo, hi = scene.box_lo, scene.box_hi
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (lo - p) * inv
        t2 = (hi - p) * inv
    tmin = np.minimum(t1, t2)
    tmax = np.maximum(t1, t2)
    # axis-parallel segment: inside the slab for all t, or never
    parallel = d == 0
    inside = (p >= lo) & (p <= hi)
    tmin = np.where(parallel, np.where(inside, -np.inf, np.inf), tmin)
    tmax = np.where(parallel, np.where(inside, np.inf, -np.inf), tmax)
    enter = np.maximum(tmin.max(axis=-1), 0.0)
    leave = np.minimum(tmax.min(axis=-1), 1.0)
    return (enter <= leave).any(axis=-1).reshape(out_shape)


def _lex_greater(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    gt = np.zeros(a.shape[:-1], dtype=bool)
    decided = np.zeros(a.shape[:-1], dtype=bool)
    for k in range(a.shape[-1]):
        gt |= ~decided & (a[..., k] > b[..., k])
        decided |= a[..., k] != b[..., k]
    return gt


def is_los(a, b, scene: Scene) -> bool:
    """True iff the closed segment a-b touches no building box."""
    return not bool(segments_blocked(np.asarray(a, float), np.asarray(b, float), scene))


def distance_to_buildings(p, scene: Scene) -> np.ndarray:
    """Euclidean distance from ``p`` (..., 3) to every building box; 0 inside."""
    p = np.asarray(p, dtype=float)[..., None, :]
    gap = np.maximum(np.maximum(scene.box_lo - p, p - scene.box_hi), 0.0)
    return np.sqrt((gap**2).sum(axis=-1))


def collides(p, scene: Scene, margin: float = 0.0) -> bool:
    """Flight-safety predicate: within ``margin`` of a box (boundary included) or out of bounds."""
    if margin < 0:
        raise ValueError("margin must be non-negative")
    x, y, z = (float(v) for v in p)
    w, h = scene.bounds
    if x < 0 or y < 0 or x > w or y > h or z < 0:
        return True
    if not scene.buildings:
        return False
    return bool((distance_to_buildings((x, y, z), scene) <= margin).any())


def _edge_samples(length: float, spacing: float) -> np.ndarray:
    n = max(2, math.ceil(length / spacing - 1e-9) + 1)
    return np.linspace(0.0, length, n)


def building_surface_points(b: Building, spacing: float, jitter: float = 0.0, rng: np.random.Generator | None = None) -> np.ndarray:
    """Roof grid plus facade grids of one box, each surface point listed once.

    ``jitter`` (fraction of ``spacing``) displaces points uniformly within their own face,
    which turns the mirror-like regular grid into a diffuse surface for imaging.
    """
    xs = b.lo[0] + _edge_samples(b.width, spacing)
    ys = b.lo[1] + _edge_samples(b.depth, spacing)
    zs = _edge_samples(b.height, spacing)
    rx, ry = np.meshgrid(xs, ys, indexing="ij")
    roof = np.column_stack([rx.ravel(), ry.ravel(), np.full(rx.size, b.height)])
    ring = np.concatenate(
        [
            np.column_stack([xs, np.full(xs.size, ys[0])]),
            np.column_stack([xs, np.full(xs.size, ys[-1])]),
            np.column_stack([np.full(ys.size - 2, xs[0]), ys[1:-1]]),
            np.column_stack([np.full(ys.size - 2, xs[-1]), ys[1:-1]]),
        ]
    )
    walls = np.concatenate([np.column_stack([ring, np.full(len(ring), z)]) for z in zs[:-1]])
    if jitter > 0:
        if rng is None:
            raise ValueError("jitter needs an rng")
        half = jitter * spacing / 2
        roof[:, :2] += rng.uniform(-half, half, (len(roof), 2))
        d = rng.uniform(-half, half, (len(walls), 2))
        on_x_face = np.isclose(walls[:, 0], xs[0]) | np.isclose(walls[:, 0], xs[-1])
        walls[:, 2] += d[:, 1]
        walls[~on_x_face, 0] += d[~on_x_face, 0]
        walls[on_x_face, 1] += d[on_x_face, 0]
        roof = np.clip(roof, b.lo, b.hi)
        walls = np.clip(walls, b.lo, b.hi)
    return np.concatenate([roof, walls])


def scatterers(scene: Scene, spacing: float, *, jitter: float = 0.0, seed: int | None = None) -> ScattererSet:
    """Surface samples of every building with unit reflectivity.

    With ``jitter`` > 0 the in-face displacement is drawn from ``seed`` (default: the
    scene's own seed), so the set stays a pure function of its arguments.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if not 0.0 <= jitter <= 1.0:
        raise ValueError("jitter must lie in [0, 1]")
    if not scene.buildings:
        return ScattererSet()
    rng = np.random.default_rng(scene.rng_seed if seed is None else seed) if jitter > 0 else None
    pts = np.concatenate([building_surface_points(b, spacing, jitter, rng) for b in scene.buildings])
    return ScattererSet(points=pts, reflectivity=np.ones(len(pts)))


def footprint_mask(scene: Scene, x_centers: np.ndarray, y_centers: np.ndarray, min_height: float = 0.0) -> np.ndarray:
    """Boolean raster (len(x), len(y)) of building footprints sampled at cell centers."""
    gx, gy = np.meshgrid(np.asarray(x_centers), np.asarray(y_centers), indexing="ij")
    mask = np.zeros(gx.shape, dtype=bool)
    for b in scene.buildings:
        if b.height < min_height:
            continue
        lo, hi = b.lo, b.hi
        mask |= (gx >= lo[0]) & (gx <= hi[0]) & (gy >= lo[1]) & (gy <= hi[1])
    return mask
