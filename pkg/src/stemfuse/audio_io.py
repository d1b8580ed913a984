"""WAV stem reading and writing.

Stems are exchanged with external separation models as one WAV file per
source. Only little-endian RIFF/WAVE containers are handled: PCM16,
PCM24 and IEEE float32 for reading, PCM16 and float32 for writing.
Chunks other than ``fmt `` and ``data`` are skipped. Writes are atomic
(temp file + rename).
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import IoFailure, MalformedHeader, TruncatedData, UnsupportedEncoding
from .core import Waveform

_FORMAT_PCM = 0x0001
_FORMAT_IEEE_FLOAT = 0x0003

ENCODINGS = ("pcm16", "float32")


def _parse_fmt(body: bytes, path) -> tuple:
    if len(body) < 16:
        raise MalformedHeader(f"{path}: fmt chunk too short ({len(body)} bytes)")
    tag, channels, rate, _byte_rate, _block_align, bits = struct.unpack_from("<HHIIHH", body, 0)
    if channels < 1:
        raise MalformedHeader(f"{path}: zero channels in fmt chunk")
    if rate <= 0:
        raise MalformedHeader(f"{path}: non-positive sample rate {rate}")
    if tag == _FORMAT_PCM:
        if bits not in (16, 24):
            raise UnsupportedEncoding(f"{path}: PCM {bits}-bit is not supported (use 16 or 24)")
    elif tag == _FORMAT_IEEE_FLOAT:
        if bits != 32:
            raise UnsupportedEncoding(f"{path}: float {bits}-bit is not supported (use 32)")
    else:
        raise UnsupportedEncoding(f"{path}: wFormatTag 0x{tag:04x} is not PCM or IEEE float")
    return tag, channels, rate, bits


def _decode_pcm24(raw: bytes) -> np.ndarray:
    b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int64)
    value = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
    value = (value ^ 0x800000) - 0x800000  # sign-extend 24 -> 64 bit
    return value.astype(np.float64) / float(1 << 23)


def read_wav(path) -> Waveform:
    """Read a WAV file into a channel-major float64 Waveform.

    Integer PCM is scaled to [-1, 1] by 2**(bits-1); float32 samples are
    taken verbatim.
    """
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise MalformedHeader(f"{path} is not a RIFF/WAVE file")

    fmt = None
    data = None
    declared = None
    pos = 12
    while pos + 8 <= len(blob):
        chunk_id = blob[pos:pos + 4]
        size = struct.unpack_from("<I", blob, pos + 4)[0]
        body = blob[pos + 8:pos + 8 + size]
        if chunk_id == b"fmt ":
            fmt = _parse_fmt(body, path)
        elif chunk_id == b"data":
            data = body
            declared = size
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None:
        raise MalformedHeader(f"{path}: no fmt chunk")
    if data is None:
        raise MalformedHeader(f"{path}: no data chunk")
    if len(data) < declared:
        raise TruncatedData(
            f"{path}: data chunk declares {declared} bytes but only {len(data)} are present"
        )

    tag, channels, rate, bits = fmt
    bytes_per_frame = channels * bits // 8
    if declared % bytes_per_frame:
        raise MalformedHeader(f"{path}: data size {declared} is not a whole number of frames")
    frames = declared // bytes_per_frame

    if tag == _FORMAT_PCM and bits == 16:
        flat = np.frombuffer(data[:declared], dtype="<i2").astype(np.float64) / float(1 << 15)
    elif tag == _FORMAT_PCM:
        flat = _decode_pcm24(data[:declared])
    else:
        flat = np.frombuffer(data[:declared], dtype="<f4").astype(np.float64)

    samples = flat.reshape(frames, channels).T  # de-interleave to channel-major
    return Waveform(samples, rate)


def write_wav(w: Waveform, path, encoding: str = "float32") -> None:
    """Write a Waveform as PCM16 or IEEE float32 WAV.

    PCM16 rounds to nearest and clamps to [-1, 1 - 2**-15]; float32 is a
    plain narrowing cast, so float32-valued samples round-trip exactly.
    """
    if encoding not in ENCODINGS:
        raise ValueError(f"encoding must be one of {ENCODINGS}, got {encoding!r}")

    interleaved = w.samples.T  # (frames, channels)
    if encoding == "float32":
        tag, bits = _FORMAT_IEEE_FLOAT, 32
        payload = np.ascontiguousarray(interleaved, dtype="<f4").tobytes()
    else:
        tag, bits = _FORMAT_PCM, 16
        scaled = np.round(interleaved * float(1 << 15))
        clamped = np.clip(scaled, -(1 << 15), (1 << 15) - 1)
        payload = np.ascontiguousarray(clamped, dtype="<i2").tobytes()

    channels = w.channels
    block_align = channels * bits // 8
    fmt_body = struct.pack(
        "<HHIIHH", tag, channels, w.sample_rate, w.sample_rate * block_align, block_align, bits
    )
    chunks = b"fmt " + struct.pack("<I", len(fmt_body)) + fmt_body
    if tag == _FORMAT_IEEE_FLOAT:
        chunks += b"fact" + struct.pack("<II", 4, w.length)
    chunks += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        chunks += b"\x00"
    blob = b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks

    path = Path(path)
    try:
        fd, tmp_name = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(blob)
            os.replace(tmp_name, path)
        except BaseException:
            os.unlink(tmp_name)
            raise
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
