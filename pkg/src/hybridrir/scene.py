"""Room geometry, materials, source/receiver layouts and the two station scenes.

Scenes are plain frozen dataclasses.  The JSON schema used by
:func:`load_scene` / :func:`emit_scene` is::

    {
      "room": [{"vertices": [[x, y, z], ...], "material": "floor"}, ...],
      "materials": {"floor": [a125, a250, a500, a1k, a2k, a4k, a8k], ...},
      "sources": [{"id": 1, "position": [x, y, z], "facing": [fx, fy, fz],
                   "directivity": {"pattern": "omni", "a": 1.0},
                   "level_db": 65.0}, ...],
      "receiver": {"position": [x, y, z], "facing_azimuth_deg": 0.0},
      "environment": {"temperature_c": 20.0, "humidity_pct": 50.0,
                      "air_attenuation_db_per_m": [...7 values...]}
    }

Units are SI; angles are degrees in files and radians in memory.  The room
frame is right handed with z up.  Azimuth is counter-clockwise seen from
above, so with the listener facing +x, +90 degrees is to the listener's left.
"""

import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import defaults
from .errors import ClampWarning, GeometryError, ParseError, RangeError, ValidationError
from .geometry import max_plane_deviation, point_in_polyhedron, polygon_plane

COPLANAR_TOL = 1e-6


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for v in (self.x, self.y, self.z):
            if not math.isfinite(v):
                raise ValidationError(f"non-finite coordinate in {self!r}")

    @classmethod
    def of(cls, xyz):
        x, y, z = (float(v) for v in xyz)
        return cls(x, y, z)

    def as_array(self):
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class Material:
    absorption: tuple

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.absorption)
        if len(alpha) != defaults.N_BANDS:
            raise ValidationError(f"material needs {defaults.N_BANDS} absorption values, got {len(alpha)}")
        if any(not (0.0 <= a <= 1.0) for a in alpha):
            raise ValidationError(f"absorption outside [0, 1]: {alpha}")
        object.__setattr__(self, "absorption", alpha)

    @classmethod
    def uniform(cls, alpha):
        return cls((float(alpha),) * defaults.N_BANDS)


@dataclass(frozen=True)
class SurfacePolygon:
    """Planar polygon; vertex order is counter-clockwise seen from outside the room."""

    vertices: tuple
    material_id: str

    def __post_init__(self):
        verts = tuple(v if isinstance(v, Point3) else Point3.of(v) for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 3:
            raise ValidationError(f"polygon needs at least 3 vertices, got {len(verts)}")
        n, d, area = polygon_plane(self.array)
        if not area > 0.0:
            raise ValidationError("degenerate polygon (zero area)")
        if max_plane_deviation(self.array, n, d) > COPLANAR_TOL:
            raise ValidationError("polygon vertices are not coplanar")

    @property
    def array(self):
        return np.array([v.as_array() for v in self.vertices])

    @property
    def plane(self):
        """``(outward unit normal, offset, area)``."""
        return polygon_plane(self.array)


@dataclass(frozen=True)
class SourceSpec:
    position: Point3
    facing: tuple = (1.0, 0.0, 0.0)
    pattern: str = "omni"
    directivity_a: float = 1.0
    reference_level: float = defaults.SOURCE_LEVEL_DB

    def __post_init__(self):
        if not isinstance(self.position, Point3):
            object.__setattr__(self, "position", Point3.of(self.position))
        facing = tuple(float(v) for v in self.facing)
        if len(facing) != 3 or abs(math.sqrt(sum(v * v for v in facing)) - 1.0) > 1e-9:
            raise ValidationError(f"source facing must be a unit vector, got {facing}")
        object.__setattr__(self, "facing", facing)
        if self.pattern not in ("omni", "cardioid"):
            raise ValidationError(f"unknown directivity pattern {self.pattern!r}")
        if not 0.0 <= self.directivity_a <= 1.0:
            raise ValidationError("directivity parameter a must lie in [0, 1]")
        if not math.isfinite(self.reference_level):
            raise ValidationError("reference level must be finite")


@dataclass(frozen=True)
class ReceiverSpec:
    position: Point3
    facing_azimuth: float = 0.0

    def __post_init__(self):
        if not isinstance(self.position, Point3):
            object.__setattr__(self, "position", Point3.of(self.position))


def speed_of_sound(temperature):
    """Speed of sound in air (m/s) for a temperature in degC."""
    if not -30.0 <= temperature <= 50.0:
        raise RangeError(f"temperature {temperature} degC outside [-30, 50]")
    return 331.3 * math.sqrt(1.0 + temperature / 273.15)


@dataclass(frozen=True)
class Environment:
    temperature: float = 20.0
    humidity: float = 50.0
    air_attenuation: tuple = defaults.AIR_ATTENUATION

    def __post_init__(self):
        att = tuple(float(a) for a in self.air_attenuation)
        if len(att) != defaults.N_BANDS or any(not (a >= 0.0) for a in att):
            raise ValidationError(f"air attenuation needs {defaults.N_BANDS} non-negative values")
        object.__setattr__(self, "air_attenuation", att)
        speed_of_sound(self.temperature)

    @property
    def speed_of_sound(self):
        return speed_of_sound(self.temperature)


@dataclass(frozen=True)
class SceneConfig:
    room: tuple
    materials: dict
    sources: dict
    receiver: ReceiverSpec
    environment: Environment = field(default_factory=Environment)

    def __post_init__(self):
        object.__setattr__(self, "room", tuple(self.room))
        object.__setattr__(self, "sources", dict(sorted(self.sources.items())))
        for poly in self.room:
            if poly.material_id not in self.materials:
                raise ValidationError(f"unknown material {poly.material_id!r}")
        for sid in self.sources:
            if not isinstance(sid, int) or sid < 1:
                raise ValidationError(f"source ids must be positive integers, got {sid!r}")
        if not self.contains(self.receiver.position):
            raise ValidationError("receiver lies outside the room")
        for sid, src in self.sources.items():
            if not self.contains(src.position):
                raise GeometryError(f"source {sid} lies outside the room")

    def _planes(self):
        out = []
        for poly in self.room:
            n, d, _ = poly.plane
            out.append((poly.array, n, d))
        return out

    def contains(self, point):
        p = point.as_array() if isinstance(point, Point3) else np.asarray(point, float)
        return point_in_polyhedron(p, self._planes())

    @property
    def surface_area(self):
        return float(sum(poly.plane[2] for poly in self.room))

    @property
    def volume(self):
        # divergence theorem over the closed, outward-oriented surface
        return float(sum(area * d for _, d, area in (poly.plane for poly in self.room)) / 3.0)

    def mean_absorption(self):
        areas = np.array([poly.plane[2] for poly in self.room])
        alphas = np.array([self.materials[p.material_id].absorption for p in self.room])
        return areas @ alphas / areas.sum()

    def with_material(self, material, material_ids=None):
        """Copy with the given material assigned to ``material_ids`` (default: all)."""
        ids = set(self.materials) if material_ids is None else set(material_ids)
        mats = {k: (material if k in ids else v) for k, v in self.materials.items()}
        return replace(self, materials=mats)

    def with_sources(self, sources):
        return replace(self, sources=dict(sources))


# -- geometry builders --------------------------------------------------------

def shoebox_room(dims, material_ids=None):
    """Six outward-wound faces of an axis-aligned box with a corner at the origin.

    Face order: floor, ceiling, wall_x0, wall_x1, wall_y0, wall_y1.
    """
    lx, ly, lz = (float(v) for v in dims)
    if min(lx, ly, lz) <= 0:
        raise ValidationError(f"box dimensions must be positive, got {dims}")
    names = ("floor", "ceiling", "wall_x0", "wall_x1", "wall_y0", "wall_y1")
    ids = dict(zip(names, material_ids or names))
    faces = {
        "floor": [(0, 0, 0), (0, ly, 0), (lx, ly, 0), (lx, 0, 0)],
        "ceiling": [(0, 0, lz), (lx, 0, lz), (lx, ly, lz), (0, ly, lz)],
        "wall_x0": [(0, 0, 0), (0, 0, lz), (0, ly, lz), (0, ly, 0)],
        "wall_x1": [(lx, 0, 0), (lx, ly, 0), (lx, ly, lz), (lx, 0, lz)],
        "wall_y0": [(0, 0, 0), (lx, 0, 0), (lx, 0, lz), (0, 0, lz)],
        "wall_y1": [(0, ly, 0), (0, ly, lz), (lx, ly, lz), (lx, ly, 0)],
    }
    return tuple(SurfacePolygon(tuple(Point3.of(v) for v in faces[n]), ids[n]) for n in names)


def default_station_room(dims=defaults.STATION_DIMS, absorption=0.1, environment=None):
    """Shoebox stand-in for the station platform hall, receiver at its centre."""
    room = shoebox_room(dims)
    materials = {poly.material_id: Material.uniform(absorption) for poly in room}
    lx, ly, lz = dims
    receiver = ReceiverSpec(Point3(lx / 2.0, ly / 2.0, lz / 2.0), 0.0)
    return SceneConfig(room, materials, {}, receiver, environment or Environment())


def _source_at(receiver, rel_azimuth, distance, level=defaults.SOURCE_LEVEL_DB):
    r = receiver.position.as_array()
    az = receiver.facing_azimuth + rel_azimuth
    pos = r + distance * np.array([math.cos(az), math.sin(az), 0.0])
    facing = (r - pos) / np.linalg.norm(r - pos)
    return SourceSpec(Point3.of(pos), tuple(facing), "omni", 1.0, level)


def scene1_sources(receiver):
    """Positions 1-12: 1.6 m ring, 30 degree steps counter-clockwise from the front."""
    step = math.radians(defaults.SCENE1_SPACING_DEG)
    return {k + 1: _source_at(receiver, k * step, defaults.SCENE1_DISTANCE) for k in range(12)}


def scene2_sources(receiver):
    """Positions 13-17 on the frontal ray, plus position 1 at 1.6 m."""
    out = {1: _source_at(receiver, 0.0, defaults.SCENE1_DISTANCE)}
    for sid, dist in defaults.SCENE2_DISTANCES.items():
        out[sid] = _source_at(receiver, 0.0, dist)
    return out


def build_preset_scene(scene_id, room):
    """Attach the preset source layout ``scene1``, ``scene2`` or ``all`` to ``room``."""
    if scene_id == "scene1":
        sources = scene1_sources(room.receiver)
    elif scene_id == "scene2":
        sources = scene2_sources(room.receiver)
    elif scene_id == "all":
        sources = {**scene1_sources(room.receiver), **scene2_sources(room.receiver)}
    else:
        raise ValidationError(f"unknown preset {scene_id!r}")
    for sid, src in sources.items():
        if not room.contains(src.position):
            raise GeometryError(f"preset source {sid} falls outside the room")
    return room.with_sources(sources)


# -- absorption calibration ---------------------------------------------------

def air_intensity_coefficient(att_db_per_m):
    """Energy attenuation constant ``m`` (1/m) from a level attenuation in dB/m."""
    return np.asarray(att_db_per_m, dtype=float) * np.log(10.0) / 10.0


def eyring_t60(volume, area, alpha, air_m=0.0):
    """Eyring decay time, with the ``4 m V`` air term when ``air_m`` is given."""
    alpha = np.asarray(alpha, dtype=float)
    return 0.161 * volume / (-area * np.log1p(-alpha) + 4.0 * np.asarray(air_m) * volume)


def calibrate_absorption(room, target_t60, lo=0.01, hi=0.99, include_air=True):
    """Per-band absorption that makes the Eyring decay time hit ``target_t60``.

    With ``include_air`` the ``4 m V`` air term of the room's environment is
    accounted for, so the surfaces only supply what the air does not.

    Bands whose solution falls outside ``[lo, hi]`` are clamped and reported
    with a :class:`ClampWarning`.
    """
    t60 = np.asarray(target_t60, dtype=float)
    if t60.shape != (defaults.N_BANDS,) or np.any(~(t60 > 0)):
        raise RangeError(f"need {defaults.N_BANDS} positive decay times, got {target_t60}")
    air = 4.0 * air_intensity_coefficient(room.environment.air_attenuation) * room.volume if include_air else 0.0
    with np.errstate(divide="ignore"):
        alpha = -np.expm1(-(0.161 * room.volume / t60 - air) / room.surface_area)
    clamped = (alpha < lo) | (alpha > hi)
    if np.any(clamped):
        bands = [int(defaults.OCTAVE_CENTERS[i]) for i in np.flatnonzero(clamped)]
        warnings.warn(f"absorption clamped in bands {bands} Hz", ClampWarning, stacklevel=2)
    return Material(tuple(np.clip(alpha, lo, hi)))


def predicted_t60(scene):
    """Eyring decay time per band from the scene's geometry and materials."""
    return eyring_t60(scene.volume, scene.surface_area, scene.mean_absorption(),
                      air_intensity_coefficient(scene.environment.air_attenuation))


def station_scene(scene_id="all", dims=defaults.STATION_DIMS, target_t60=defaults.STATION_T30):
    """Default hall calibrated to the measured decay times, with preset sources."""
    base = default_station_room(dims)
    base = base.with_material(calibrate_absorption(base, target_t60))
    return build_preset_scene(scene_id, base)


# -- JSON ---------------------------------------------------------------------

def scene_to_dict(scene):
    return {
        "room": [
            {"vertices": [[v.x, v.y, v.z] for v in p.vertices], "material": p.material_id}
            for p in scene.room
        ],
        "materials": {k: list(m.absorption) for k, m in scene.materials.items()},
        "sources": [
            {
                "id": sid,
                "position": [s.position.x, s.position.y, s.position.z],
                "facing": list(s.facing),
                "directivity": {"pattern": s.pattern, "a": s.directivity_a},
                "level_db": s.reference_level,
            }
            for sid, s in scene.sources.items()
        ],
        "receiver": {
            "position": [scene.receiver.position.x, scene.receiver.position.y, scene.receiver.position.z],
            "facing_azimuth_deg": math.degrees(scene.receiver.facing_azimuth),
        },
        "environment": {
            "temperature_c": scene.environment.temperature,
            "humidity_pct": scene.environment.humidity,
            "air_attenuation_db_per_m": list(scene.environment.air_attenuation),
        },
    }


def emit_scene(scene):
    return json.dumps(scene_to_dict(scene), indent=2)


def scene_from_dict(data):
    try:
        room = [SurfacePolygon(tuple(Point3.of(v) for v in p["vertices"]), str(p["material"]))
                for p in data["room"]]
        materials = {str(k): Material(tuple(v)) for k, v in data["materials"].items()}
        sources = {}
        for s in data.get("sources", []):
            sid = s["id"]
            if sid in sources:
                raise ValidationError(f"duplicate source id {sid}")
            d = s.get("directivity", {})
            sources[sid] = SourceSpec(
                Point3.of(s["position"]),
                tuple(s.get("facing", (1.0, 0.0, 0.0))),
                d.get("pattern", "omni"),
                float(d.get("a", 1.0)),
                float(s.get("level_db", defaults.SOURCE_LEVEL_DB)),
            )
        rec = data["receiver"]
        receiver = ReceiverSpec(Point3.of(rec["position"]),
                                math.radians(float(rec.get("facing_azimuth_deg", 0.0))))
        env = data.get("environment", {})
        environment = Environment(
            float(env.get("temperature_c", 20.0)),
            float(env.get("humidity_pct", 50.0)),
            tuple(env.get("air_attenuation_db_per_m", defaults.AIR_ATTENUATION)),
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f"scene does not match the schema: {exc!r}") from exc
    except ValueError as exc:
        if isinstance(exc, RangeError):
            raise
        raise ParseError(f"bad value in scene: {exc}") from exc
    return SceneConfig(tuple(room), materials, sources, receiver, environment)


def load_scene(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed scene JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError("scene JSON must be an object")
    return scene_from_dict(data)
