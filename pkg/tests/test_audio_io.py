import json

import numpy as np
import pytest

from hybridrir.audio_io import read_ir, read_json, sidecar_path, write_ir, write_json, write_text
from hybridrir.errors import IOFailure, ParseError
from hybridrir.synth import ImpulseResponse


def test_ir_round_trip(tmp_path):
    x = np.random.default_rng(0).standard_normal((3, 500)) * 0.01
    ir = ImpulseResponse(44100, x, 0.0, ("a", "b", "c"))
    write_ir(tmp_path / "x.wav", ir, {"source": 4})
    back = read_ir(tmp_path / "x.wav")
    assert back.sample_rate == 44100 and back.labels == ("a", "b", "c")
    np.testing.assert_array_equal(back.samples, x.astype(np.float32))
    meta = json.loads(sidecar_path(tmp_path / "x.wav").read_text())
    assert meta["channels"] == 3 and meta["source"] == 4
    assert meta["reference_pressure_pa"] == pytest.approx(2e-5)


def test_no_temp_files_left(tmp_path):
    write_text(tmp_path / "a.txt", "hi")
    write_json(tmp_path / "b.json", {"z": 1, "a": 2})
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.txt", "b.json"]
    assert (tmp_path / "b.json").read_text() == '{\n  "a": 2,\n  "z": 1\n}\n'


def test_read_errors(tmp_path):
    with pytest.raises(IOFailure):
        read_json(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ParseError):
        read_json(tmp_path / "bad.json")
    with pytest.raises(IOFailure):
        read_ir(tmp_path / "missing.wav")
