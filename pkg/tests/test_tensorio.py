import numpy as np
import pytest
import torch

from ctgraph import tensorio


def test_roundtrip(rng):
    data = {"b": rng.normal(size=(2, 3)), "a": np.arange(5), "m": np.array([True, False]), "s": np.float32([1.5])}
    blob = tensorio.dumps(data, {"k": 1})
    out, meta = tensorio.loads(blob)
    assert meta == {"k": 1}
    for k, v in data.items():
        assert np.array_equal(out[k], v) and out[k].dtype == v.dtype


def test_bytes_independent_of_insertion_order():
    a = tensorio.dumps({"x": np.ones(2), "y": np.zeros(1)})
    b = tensorio.dumps({"y": np.zeros(1), "x": np.ones(2)})
    assert a == b


def test_torch_input(tmp_path):
    tensorio.save(tmp_path / "t.bin", {"w": torch.ones(2, 2, dtype=torch.float64)})
    out, _ = tensorio.load(tmp_path / "t.bin")
    assert np.array_equal(out["w"], np.ones((2, 2)))


def test_bad_magic():
    with pytest.raises(tensorio.TensorFormatError):
        tensorio.loads(b"NOTMAGIC" + bytes(20))


def test_truncated():
    blob = tensorio.dumps({"x": np.ones(10)})
    with pytest.raises(tensorio.TensorFormatError):
        tensorio.loads(blob[:-5])
