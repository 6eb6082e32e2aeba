"""File artefacts: float WAV with a level sidecar, JSON and CSV, all written atomically."""

import json
import os
import tempfile
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from . import defaults
from .errors import IOFailure, ParseError
from .synth import ImpulseResponse


def _atomic(path, write):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text(path, text):
    try:
        _atomic(path, lambda fh: fh.write(text.encode("utf-8")))
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def write_json(path, obj):
    write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def read_text(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc


def sidecar_path(path):
    return Path(path).with_suffix(".json")


def write_ir(path, ir, extra=None):
    """Write ``ir`` as 32-bit float WAV, unnormalised, plus a JSON sidecar.

    Sample values are pressures in pascals for a source at its reference
    level; the sidecar records the dB SPL reference so later stages can
    recover absolute levels.
    """
    data = np.ascontiguousarray(ir.samples.T.astype(np.float32))
    meta = {
        "sample_rate": int(ir.sample_rate),
        "channels": int(ir.n_channels),
        "time_origin_s": float(ir.time_origin),
        "reference_pressure_pa": defaults.P_REF,
        "labels": list(ir.labels),
    }
    if extra:
        meta.update(extra)
    try:
        _atomic(path, lambda fh: wavfile.write(fh, int(ir.sample_rate), data))
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc
    write_json(sidecar_path(path), meta)


def read_ir(path):
    """Load a WAV written by :func:`write_ir` (or any PCM/float WAV)."""
    try:
        fs, data = wavfile.read(path)
    except (OSError, ValueError) as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    x = np.asarray(data)
    if np.issubdtype(x.dtype, np.integer):
        x = x / float(np.iinfo(x.dtype).max)
    x = np.atleast_2d(x.astype(float).T) if x.ndim == 2 else x.astype(float)[None, :]
    origin, labels = 0.0, ()
    side = sidecar_path(path)
    if side.exists():
        meta = read_json(side)
        origin = float(meta.get("time_origin_s", 0.0))
        labels = tuple(meta.get("labels", ()))
    return ImpulseResponse(int(fs), x, origin, labels)
