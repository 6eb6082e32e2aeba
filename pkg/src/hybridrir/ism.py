"""Image-source enumeration for polyhedral rooms and specular reflection events.

Images are generated level by level by mirroring across every surface whose
plane has the parent image on its inner side.  A mirrored image always lies
behind the plane it was mirrored in, so its descendants depend only on its
position; images are therefore de-duplicated per order before expanding the
next level.  Each surviving position is then traced back from the receiver:
the unfolded path must pierce the surface it was last mirrored in, the
mirrored parent must exist one order lower, and (optionally) no other surface
may block any leg of the path.  In a shoebox this reproduces the classic
mirror lattice, 4k^2 + 2 images of order k.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import defaults
from .errors import BudgetExceeded
from .geometry import points_in_polygon

KEY_SCALE = 1e7        # image positions are merged on a 0.1 um grid
PLANE_EPS = 1e-9       # metres
T_EPS = 1e-10          # parametric, along a path leg
TIE_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class ImageSource:
    position: np.ndarray
    order: int
    surface_path: tuple
    band_gain: np.ndarray
    emission_direction: np.ndarray


@dataclass(frozen=True, eq=False)
class ReflectionEvent:
    arrival_time: float
    doa: np.ndarray
    band_amplitude: np.ndarray
    order: int

    @property
    def distance_time(self):
        return self.arrival_time


def _key(p):
    return tuple(np.round(np.asarray(p) * KEY_SCALE).astype(np.int64).tolist())


class _Room:
    def __init__(self, scene):
        self.polys = scene.room
        planes = [p.plane for p in scene.room]
        self.normals = np.array([n for n, _, _ in planes])
        self.offsets = np.array([d for _, d, _ in planes])
        self.verts = [p.array for p in scene.room]
        self.reflect = np.array([
            np.sqrt(1.0 - np.asarray(scene.materials[p.material_id].absorption)) for p in scene.room
        ])

    def sd(self, pts):
        return pts @ self.normals.T - self.offsets[None, :]

    def inclusion(self, pts, mask):
        """``(M, F)`` inclusion of ``pts[m, f]`` in polygon ``f`` where ``mask``."""
        out = np.zeros(mask.shape, dtype=bool)
        for f in range(mask.shape[1]):
            rows = np.flatnonzero(mask[:, f])
            if rows.size:
                out[rows, f] = points_in_polygon(pts[rows, f], self.verts[f], self.normals[f])
        return out


def _blocked(room, p, q, excl_a, excl_b, t_max):
    """True where the leg ``p -> q`` crosses a surface strictly before ``t_max``."""
    sp, sq = room.sd(p), room.sd(q)
    crosses = ((sp < -PLANE_EPS) & (sq > PLANE_EPS)) | ((sp > PLANE_EPS) & (sq < -PLANE_EPS))
    f_idx = np.arange(crosses.shape[1])[None, :]
    crosses &= (f_idx != excl_a[:, None]) & (f_idx != excl_b[:, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(crosses, sp / (sp - sq), np.inf)
    crosses &= (t > T_EPS) & (t < t_max[:, None] - T_EPS)
    if not crosses.any():
        return np.zeros(len(p), dtype=bool)
    hit = p[:, None, :] + np.where(crosses, t, 0.0)[..., None] * (q - p)[:, None, :]
    return np.any(room.inclusion(hit, crosses), axis=1)


def _trace_level(room, images, lookup, level, receiver, source, check_occlusion):
    """Backtrace every image of ``level``; returns (visible mask, paths, first-bounce points)."""
    m = len(images)
    target = images.copy()
    start = np.repeat(receiver[None, :], m, axis=0)
    excl = np.full(m, -1)
    alive = np.ones(m, dtype=bool)
    paths = np.zeros((m, level), dtype=int)
    f_idx = np.arange(len(room.polys))[None, :]

    for j in range(level, 0, -1):
        sp, st = room.sd(start), room.sd(target)
        cross = (st > PLANE_EPS) & (sp <= PLANE_EPS) & (f_idx != excl[:, None]) & alive[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(cross, sp / (sp - st), np.inf)
        t = np.where(t < 0.0, 0.0, t)
        hit = start[:, None, :] + np.where(cross, t, 0.0)[..., None] * (target - start)[:, None, :]
        inc = room.inclusion(hit, cross)
        t = np.where(inc, t, np.inf)
        order = np.argsort(t, axis=1, kind="stable")
        chosen = np.full(m, -1)
        parents = np.zeros_like(target)
        prev = lookup[j - 1]
        for i in np.flatnonzero(alive):
            t0 = t[i, order[i, 0]]
            if not np.isfinite(t0):
                continue
            for f in order[i]:
                if t[i, f] > t0 + TIE_EPS:
                    break
                parent = target[i] - 2.0 * st[i, f] * room.normals[f]
                if _key(parent) in prev:
                    chosen[i] = f
                    parents[i] = parent
                    break
        alive &= chosen >= 0
        rows = np.flatnonzero(alive)
        t_hit = t[rows, chosen[rows]]
        hit_pt = hit[rows, chosen[rows]]
        if check_occlusion and rows.size:
            blocked = _blocked(room, start[rows], target[rows], excl[rows], chosen[rows], t_hit)
            alive[rows[blocked]] = False
        start[rows] = hit_pt
        target[rows] = parents[rows]
        excl[rows] = chosen[rows]
        paths[rows, j - 1] = chosen[rows]

    if check_occlusion:
        rows = np.flatnonzero(alive)
        if rows.size:
            src = np.repeat(source[None, :], rows.size, axis=0)
            blocked = _blocked(room, start[rows], src, excl[rows], np.full(rows.size, -1),
                               np.ones(rows.size))
            alive[rows[blocked]] = False
    return alive, paths, start


def enumerate_images(scene, source_id, max_order=defaults.MAX_ORDER,
                     max_candidates=10 ** 7, check_occlusion=True, max_distance=None):
    """All image sources up to ``max_order`` that are valid and visible at the receiver.

    ``max_distance`` (m) prunes images farther than that from the receiver.
    Pruning is only applied when the receiver is on the inner side of every
    surface plane, where mirroring can never bring an image closer.
    Raises :class:`BudgetExceeded` once more than ``max_candidates`` mirror
    operations have been attempted.
    """
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    room = _Room(scene)
    src = scene.sources[source_id]
    s = src.position.as_array()
    r = scene.receiver.position.as_array()
    prune = max_distance is not None and np.all(room.sd(r[None, :]) <= 0.0)

    levels = [s[None, :]]
    lookup = [{_key(s): 0}]
    candidates = 0
    for _ in range(max_order):
        parents = levels[-1]
        if len(parents) == 0:
            break
        candidates += parents.shape[0] * len(room.polys)
        if candidates > max_candidates:
            raise BudgetExceeded(f"image enumeration passed {max_candidates} candidates")
        sd = room.sd(parents)
        valid = sd < -PLANE_EPS
        kids = parents[:, None, :] - 2.0 * sd[..., None] * room.normals[None, :, :]
        kids = kids[valid]
        if prune and len(kids):
            kids = kids[np.linalg.norm(kids - r, axis=1) <= max_distance]
        uniq = {}
        for p in kids:
            uniq.setdefault(_key(p), p)
        level = np.array(list(uniq.values())).reshape(-1, 3)
        levels.append(level)
        lookup.append({k: i for i, k in enumerate(uniq)})

    first = (r - s) / np.linalg.norm(r - s)
    images = []
    none = np.full(1, -1)
    if not (check_occlusion and _blocked(room, r[None, :], s[None, :], none, none, np.ones(1))[0]):
        images.append(ImageSource(s.copy(), 0, (), np.ones(defaults.N_BANDS), first))
    for k in range(1, len(levels)):
        if len(levels[k]) == 0:
            continue
        alive, paths, bounce = _trace_level(room, levels[k], lookup, k, r, s, check_occlusion)
        for i in np.flatnonzero(alive):
            path = tuple(int(f) for f in paths[i])
            gain = np.prod(room.reflect[list(path)], axis=0)
            emit = bounce[i] - s
            emit = emit / np.linalg.norm(emit)
            images.append(ImageSource(levels[k][i].copy(), k, path, gain, emit))
    return images


def directivity_gain(pattern, a, emission_direction, facing):
    """Cardioid-family gain ``a + (1 - a) cos(theta)``, floored at zero; omni is 1."""
    if pattern == "omni":
        return 1.0
    u = np.asarray(emission_direction, dtype=float)
    f = np.asarray(facing, dtype=float)
    cos_t = float(u @ f / (np.linalg.norm(u) * np.linalg.norm(f)))
    return max(0.0, a + (1.0 - a) * cos_t)


def collect_reflections(images, receiver, environment, window=defaults.EVENT_WINDOW, source=None):
    """Convert images into arrival events at the receiver, sorted by time.

    ``source`` supplies the directivity; without it every image is treated as omni.
    """
    if not window > 0:
        raise ValueError("window must be positive")
    c = environment.speed_of_sound
    att = np.asarray(environment.air_attenuation)
    r = receiver.position.as_array()
    events = []
    for img in images:
        v = img.position - r
        d = float(np.linalg.norm(v))
        t = d / c
        if t > window:
            continue
        g = 1.0
        if source is not None:
            g = directivity_gain(source.pattern, source.directivity_a, img.emission_direction, source.facing)
        amp = img.band_gain * (1.0 / d) * 10.0 ** (-att * d / 20.0) * g
        events.append(ReflectionEvent(t, v / d, amp, img.order))
    events.sort(key=lambda e: (e.arrival_time, e.order))
    return events


def simulate_events(scene, source_id, max_order=defaults.MAX_ORDER, window=defaults.EVENT_WINDOW,
                    check_occlusion=True):
    images = enumerate_images(scene, source_id, max_order, check_occlusion=check_occlusion,
                              max_distance=window * scene.environment.speed_of_sound)
    return collect_reflections(images, scene.receiver, scene.environment, window,
                               scene.sources[source_id])


CSV_COLUMNS = ["order", "time_s", "doa_x", "doa_y", "doa_z"] + [
    f"gain_b{int(f)}" for f in defaults.OCTAVE_CENTERS
]


def events_to_csv(events):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for e in events:
        w.writerow([e.order, repr(e.arrival_time), *map(repr, e.doa.tolist()),
                    *map(repr, e.band_amplitude.tolist())])
    return buf.getvalue()


def events_from_csv(text):
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        out.append(ReflectionEvent(
            float(row["time_s"]),
            np.array([float(row[k]) for k in ("doa_x", "doa_y", "doa_z")]),
            np.array([float(row[c]) for c in CSV_COLUMNS[5:]]),
            int(row["order"]),
        ))
    return out
