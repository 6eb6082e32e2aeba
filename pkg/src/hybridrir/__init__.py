"""Hybrid room impulse responses: image-source early reflections, diffuse late tails,
loudspeaker-array and binaural rendering, room-acoustic and binaural metrics, and a
simulated speech-reception-threshold experiment."""

from .errors import HybridRirError
from .metrics import AcousticReport, analyze
from .scene import SceneConfig, station_scene
from .synth import ImpulseResponse, LateTailSpec, assemble_hybrid, generate_late_tail

__version__ = "0.1.0"

__all__ = [
    "AcousticReport",
    "HybridRirError",
    "ImpulseResponse",
    "LateTailSpec",
    "SceneConfig",
    "analyze",
    "assemble_hybrid",
    "generate_late_tail",
    "station_scene",
]
