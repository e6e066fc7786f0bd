"""Binary checkpoint files.

Layout (all integers little-endian)::

    b"RPCK"              magic
    u32                  format version
    u32 + bytes          UTF-8 header text, ``key=value`` per line
    f64[size]            parameters, layer by layer in declaration order
    f64[size]            Adam first moments, same layout
    f64[size]            Adam second moments, same layout
    u64                  CRC-64/XZ of every preceding byte

The header echoes the model and training configuration, the optimizer step,
completed epochs, the seed that keys every random stream, and the per-epoch
history, which together are enough to resume training bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from fastcrc import crc64

from .errors import CorruptFileError, FormatError
from .nn import Adam, EpochRecord, Network, TrainConfig, TrainState
from .zoo import ModelConfig

MAGIC = b"RPCK"
VERSION = 1
_F64 = np.dtype("<f8")


def crc(data: bytes) -> int:
    return crc64.xz(data)


@dataclass
class Checkpoint:
    model: Network
    train_config: TrainConfig
    state: TrainState


def _header(model: Network, cfg: TrainConfig, state: TrainState) -> str:
    c = model.config
    lines = [
        f"model.name={c.name}",
        "model.input=" + "x".join(str(d) for d in c.input_shape),
        f"model.layers={c.layers_text()}",
    ]
    for f in fields(TrainConfig):
        lines.append(f"train.{f.name}={getattr(cfg, f.name)!r}")
    lines += [
        f"state.step={state.optimizer.t}",
        f"state.epoch={state.epoch}",
        f"rng.seed={cfg.seed}",
    ]
    for r in state.history:
        lines.append(f"history.{r.epoch}={r.train_loss!r},{r.train_acc!r},{r.val_loss!r},{r.val_acc!r}")
    return "\n".join(lines) + "\n"


def dumps(model: Network, cfg: TrainConfig, state: TrainState | None = None) -> bytes:
    if state is None:
        state = TrainState(Adam(model.size, cfg))
    text = _header(model, cfg, state).encode("utf-8")
    parts = [
        MAGIC,
        struct.pack("<I", VERSION),
        struct.pack("<I", len(text)),
        text,
        model.params.astype(_F64).tobytes(),
        state.optimizer.m.astype(_F64).tobytes(),
        state.optimizer.v.astype(_F64).tobytes(),
    ]
    body = b"".join(parts)
    return body + struct.pack("<Q", crc(body))


def save_checkpoint(path, model: Network, cfg: TrainConfig, state: TrainState | None = None) -> None:
    Path(path).write_bytes(dumps(model, cfg, state))


def _parse_value(text: str):
    if text == "None":
        return None
    try:
        return int(text)
    except ValueError:
        return float(text)


def loads(data: bytes) -> Checkpoint:
    if len(data) < 20 or data[:4] != MAGIC:
        raise CorruptFileError("not a checkpoint file (bad magic or too short)")
    body, (stored,) = data[:-8], struct.unpack("<Q", data[-8:])
    if crc(body) != stored:
        raise CorruptFileError("checkpoint CRC mismatch (file truncated or corrupted)")
    (version,) = struct.unpack_from("<I", body, 4)
    if version != VERSION:
        raise FormatError(f"checkpoint format version {version}, expected {VERSION}")
    (hlen,) = struct.unpack_from("<I", body, 8)
    if 12 + hlen > len(body):
        raise CorruptFileError("header length runs past end of file")
    header = {}
    for line in body[12:12 + hlen].decode("utf-8").splitlines():
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"malformed header line {line!r}")
        header[key] = value

    try:
        config = ModelConfig.from_text(
            header["model.name"], header["model.layers"],
            tuple(int(d) for d in header["model.input"].split("x")),
        )
        cfg = TrainConfig(**{f.name: _parse_value(header[f"train.{f.name}"]) for f in fields(TrainConfig)})
        step, epoch = int(header["state.step"]), int(header["state.epoch"])
    except KeyError as exc:
        raise FormatError(f"checkpoint header lacks {exc.args[0]!r}") from None

    history = []
    for e in range(1, epoch + 1):
        raw = header.get(f"history.{e}")
        if raw is None:
            break
        history.append(EpochRecord(e, *(float(v) for v in raw.split(","))))

    model = Network(config)
    payload = body[12 + hlen:]
    if len(payload) != 3 * model.size * 8:
        raise FormatError(
            f"weight payload holds {len(payload) // 8} values; config "
            f"{config.name!r} needs {3 * model.size} (params + two moment buffers)"
        )
    arrays = np.frombuffer(payload, dtype=_F64).astype(np.float64).reshape(3, model.size)
    model.params[...] = arrays[0]
    optimizer = Adam(model.size, cfg, m=arrays[1], v=arrays[2], t=step)
    return Checkpoint(model, cfg, TrainState(optimizer, epoch, history))


def load_checkpoint(path) -> Checkpoint:
    return loads(Path(path).read_bytes())
