"""Minimal FITS reader/writer for 2-D primary images.

Supports ``BITPIX`` 16 and -32 with optional ``BZERO``/``BSCALE``. That is
all the pipeline needs for camera frames; anything else is rejected rather
than half-read.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import CorruptFileError, FormatError

BLOCK = 2880
CARD = 80
_DTYPES = {16: np.dtype(">i2"), -32: np.dtype(">f4")}


def _card(key: str, value) -> bytes:
    if isinstance(value, bool):
        text = "T" if value else "F"
    elif isinstance(value, (int, np.integer)):
        text = str(int(value))
    else:
        text = repr(float(value)).upper()
    return f"{key:<8s}= {text:>20s}".ljust(CARD).encode("ascii")


def _parse_value(raw: str):
    raw = raw.split("/", 1)[0].strip() if not raw.lstrip().startswith("'") else raw.strip()
    if raw == "T":
        return True
    if raw == "F":
        return False
    if raw.startswith("'"):
        return raw[1:].split("'", 1)[0].rstrip()
    try:
        return int(raw)
    except ValueError:
        return float(raw.replace("D", "E"))


def read_header(data: bytes) -> tuple[dict, int]:
    """Parse header cards. Returns the keyword dict and the data offset."""
    header: dict = {}
    pos = 0
    while True:
        if pos + BLOCK > len(data):
            raise CorruptFileError("FITS header not terminated by END")
        block = data[pos:pos + BLOCK]
        pos += BLOCK
        for k in range(0, BLOCK, CARD):
            card = block[k:k + CARD].decode("ascii", errors="replace")
            key = card[:8].strip()
            if key == "END":
                return header, pos
            if card[8:10] == "= " and key:
                try:
                    header[key] = _parse_value(card[10:])
                except ValueError:
                    raise FormatError(f"unparseable value for {key}: {card[10:].strip()!r}") from None


def read_frame(path) -> np.ndarray:
    """Read a 2-D image as float64 ``(NAXIS2, NAXIS1)`` physical values."""
    data = Path(path).read_bytes()
    header, offset = read_header(data)
    if header.get("SIMPLE") is not True:
        raise FormatError("not a FITS primary header (SIMPLE != T)")
    bitpix = header.get("BITPIX")
    if bitpix not in _DTYPES:
        raise FormatError(f"unsupported BITPIX {bitpix}; supported: 16, -32")
    naxis = header.get("NAXIS")
    if naxis != 2:
        raise FormatError(f"unsupported NAXIS {naxis}; only 2-D images")
    width, height = header.get("NAXIS1"), header.get("NAXIS2")
    if not isinstance(width, int) or not isinstance(height, int) or width < 1 or height < 1:
        raise FormatError(f"bad image extents NAXIS1={width}, NAXIS2={height}")
    dtype = _DTYPES[bitpix]
    nbytes = width * height * dtype.itemsize
    if offset + nbytes > len(data):
        raise CorruptFileError(f"data unit truncated: need {nbytes} bytes, have {len(data) - offset}")
    stored = np.frombuffer(data, dtype=dtype, count=width * height, offset=offset)
    frame = stored.astype(np.float64).reshape(height, width)
    bscale = float(header.get("BSCALE", 1.0))
    bzero = float(header.get("BZERO", 0.0))
    if bscale != 1.0:
        frame *= bscale
    if bzero != 0.0:
        frame += bzero
    return frame


def encode_frame(frame, bitpix: int = -32, bzero: float = 0.0, bscale: float = 1.0) -> bytes:
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2:
        raise FormatError(f"only 2-D frames can be written, got shape {frame.shape}")
    if bitpix not in _DTYPES:
        raise FormatError(f"unsupported BITPIX {bitpix}")
    height, width = frame.shape
    cards = [
        _card("SIMPLE", True),
        _card("BITPIX", bitpix),
        _card("NAXIS", 2),
        _card("NAXIS1", width),
        _card("NAXIS2", height),
    ]
    if bzero != 0.0:
        cards.append(_card("BZERO", bzero))
    if bscale != 1.0:
        cards.append(_card("BSCALE", bscale))
    cards.append(b"END".ljust(CARD))
    header = b"".join(cards)
    header += b" " * (-len(header) % BLOCK)

    stored = (frame - bzero) / bscale
    if bitpix == 16:
        stored = np.rint(stored)
        if stored.min(initial=0) < -32768 or stored.max(initial=0) > 32767:
            raise FormatError("values do not fit BITPIX 16 with the given BZERO/BSCALE")
    body = stored.astype(_DTYPES[bitpix]).tobytes()
    body += b"\0" * (-len(body) % BLOCK)
    return header + body


def write_frame(frame, path, bitpix: int = -32, bzero: float = 0.0, bscale: float = 1.0) -> None:
    Path(path).write_bytes(encode_frame(frame, bitpix, bzero, bscale))
