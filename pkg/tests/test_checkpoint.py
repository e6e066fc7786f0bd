import struct

import numpy as np
import pytest

from streakcnn.checkpoint import dumps, load_checkpoint, loads, save_checkpoint
from streakcnn.errors import CorruptFileError, FormatError
from streakcnn.nn import Network, TrainConfig, train
from streakcnn.zoo import LayerSpec, ModelConfig

from test_nn import separable_set, tiny_config


def crc64_xz_reference(data: bytes) -> int:
    """Bitwise CRC-64/XZ, independent of the library used by the writer."""
    poly = 0xC96C5795D7870F42
    crc = 0xFFFFFFFFFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ poly if crc & 1 else crc >> 1
    return crc ^ 0xFFFFFFFFFFFFFFFF


def test_crc_reference_check_value():
    assert crc64_xz_reference(b"123456789") == 0x995DC9BBDF1939FA


def test_layout_and_crc():
    net = Network.initialized(tiny_config(), seed=1)
    data = dumps(net, TrainConfig())
    assert data[:4] == b"RPCK"
    assert struct.unpack("<I", data[4:8])[0] == 1
    (hlen,) = struct.unpack("<I", data[8:12])
    assert b"model.layers=" in data[12:12 + hlen]
    assert len(data) == 12 + hlen + 3 * net.size * 8 + 8
    assert struct.unpack("<Q", data[-8:])[0] == crc64_xz_reference(data[:-8])
    payload = np.frombuffer(data[12 + hlen:12 + hlen + net.size * 8], dtype="<f8")
    np.testing.assert_array_equal(payload, net.params)


def test_default_hyperparameters_in_header():
    net = Network.initialized(tiny_config(), seed=1)
    header = dumps(net, TrainConfig()).decode("latin-1")
    assert "train.batch_size=4\n" in header
    assert "train.learning_rate=0.001\n" in header


def test_save_load_save_identical(tmp_path):
    x, y = separable_set(16, 0)
    net = Network.initialized(tiny_config(dropout=0.4), seed=2)
    cfg = TrainConfig(epochs=1, seed=2)
    _, state = train(net, (x, y), (x, y), None, cfg)
    path = tmp_path / "a.rpck"
    save_checkpoint(path, net, cfg, state)
    ck = load_checkpoint(path)
    assert dumps(ck.model, ck.train_config, ck.state) == path.read_bytes()
    assert ck.state.optimizer.t == state.optimizer.t
    assert [vars(r) for r in ck.state.history] == [vars(r) for r in state.history]


def test_truncated_file(tmp_path):
    data = dumps(Network.initialized(tiny_config(), seed=1), TrainConfig())
    with pytest.raises(CorruptFileError):
        loads(data[:-100])
    with pytest.raises(CorruptFileError):
        loads(data[:10])


def test_flipped_byte(tmp_path):
    data = bytearray(dumps(Network.initialized(tiny_config(), seed=1), TrainConfig()))
    data[200] ^= 0x01
    with pytest.raises(CorruptFileError):
        loads(bytes(data))


def _reseal(body: bytes) -> bytes:
    return body + struct.pack("<Q", crc64_xz_reference(body))


def test_version_mismatch():
    data = dumps(Network.initialized(tiny_config(), seed=1), TrainConfig())
    body = data[:4] + struct.pack("<I", 99) + data[8:-8]
    with pytest.raises(FormatError, match="version"):
        loads(_reseal(body))


def test_weight_shape_mismatch():
    net = Network.initialized(tiny_config(), seed=1)
    data = dumps(net, TrainConfig())
    (hlen,) = struct.unpack("<I", data[8:12])
    header = data[12:12 + hlen].replace(b"dense:4,", b"dense:5,")
    body = data[:8] + struct.pack("<I", len(header)) + header + data[12 + hlen:-8]
    with pytest.raises(FormatError, match="payload"):
        loads(_reseal(body))


def test_resume_from_file_matches_uninterrupted(tmp_path):
    x, y = separable_set(40, 5)
    cfg = TrainConfig(epochs=1, seed=6)
    full = Network.initialized(tiny_config(dropout=0.4), seed=6)
    train(full, (x, y), (x, y), None, TrainConfig(epochs=2, seed=6))

    first = Network.initialized(tiny_config(dropout=0.4), seed=6)
    _, state = train(first, (x, y), (x, y), None, cfg)
    save_checkpoint(tmp_path / "mid.rpck", first, cfg, state)
    ck = load_checkpoint(tmp_path / "mid.rpck")
    train(ck.model, (x, y), (x, y), None, ck.train_config, state=ck.state)
    assert ck.model.params.tobytes() == full.params.tobytes()


def test_randomized_round_trips(tmp_path):
    rng = np.random.default_rng(0)
    for k in range(5):
        filters = int(rng.integers(1, 5))
        cfg = ModelConfig("r", (LayerSpec("conv", size=filters), LayerSpec("relu"), LayerSpec("flatten"),
                                LayerSpec("dense", size=1), LayerSpec("sigmoid")), input_shape=(1, 5, 5))
        net = Network(cfg, rng.normal(size=Network(cfg).size))
        data = dumps(net, TrainConfig(seed=int(rng.integers(1000))))
        again = loads(data)
        assert dumps(again.model, again.train_config, again.state) == data
