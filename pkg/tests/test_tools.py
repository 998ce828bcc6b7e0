import json
import math

import numpy as np
import pytest

from core.errors import DomainError
from tools.bitfile import read_bits, read_float_stream, sidecar_path, write_bits, write_codes, write_float_stream
from tools.reports import canonical_json, config_digest, write_csv, write_report


def test_bits_are_packed_msb_first(tmp_path):
    path = write_bits(tmp_path / "out" / "bits.bin", np.array([1, 0, 1, 1, 0, 0, 0, 0, 1, 1]), {"m_out": 5})
    assert path.read_bytes() == bytes([0b10110000, 0b11000000])
    side = json.loads(sidecar_path(path).read_text())
    assert side["bit_length"] == 10 and side["m_out"] == 5

    bits, meta = read_bits(path)
    assert bits.tolist() == [1, 0, 1, 1, 0, 0, 0, 0, 1, 1]
    assert meta["format"] == "packed-msb-first"


def test_bit_file_needs_consistent_sidecar(tmp_path):
    path = write_bits(tmp_path / "bits.bin", np.ones(8, dtype=np.uint8))
    sidecar_path(path).write_text(json.dumps({"bit_length": 9}))
    with pytest.raises(DomainError):
        read_bits(path)
    with pytest.raises(FileNotFoundError):
        read_bits(tmp_path / "nope.bin")


def test_float_stream_sidecar(tmp_path):
    path = write_float_stream(tmp_path / "s.f32", np.array([0.5, -0.25]), 8e9, 1e-3, 42)
    samples, meta = read_float_stream(path)
    assert samples.tolist() == [0.5, -0.25]
    assert meta["seed"] == 42 and meta["n_samples"] == 2


def test_code_files_hold_bytes(tmp_path):
    path = write_codes(tmp_path / "codes.u8", np.array([0, 255, 17]), 8)
    assert path.read_bytes() == bytes([0, 255, 17])
    with pytest.raises(DomainError):
        write_codes(tmp_path / "wide.u8", np.array([0]), 12)


def test_canonical_json_handles_numpy_and_infinity():
    doc = {"b": np.float64(1.5), "a": np.arange(3), "c": math.inf}
    assert canonical_json(doc) == '{"a":[0,1,2],"b":1.5,"c":"inf"}'


def test_digest_ignores_key_order():
    assert config_digest({"x": 1, "y": [1, 2]}) == config_digest({"y": [1, 2], "x": 1})
    assert config_digest({"x": 1}) != config_digest({"x": 2})


def test_reports_are_byte_stable(tmp_path):
    doc = {"z": 1, "a": {"q": np.float32(0.5)}}
    first = write_report(tmp_path / "a.json", doc).read_bytes()
    second = write_report(tmp_path / "b.json", dict(reversed(list(doc.items())))).read_bytes()
    assert first == second


def test_csv_keeps_full_float_precision(tmp_path):
    path = write_csv(tmp_path / "series.csv", ["f", "v"], [(1e9, 0.1 + 0.2), (2e9, np.float64(3))])
    assert path.read_text() == "f,v\n1000000000.0,0.30000000000000004\n2000000000.0,3.0\n"
