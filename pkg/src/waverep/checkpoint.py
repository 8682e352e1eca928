"""Versioned binary checkpoint container.

Layout (all little-endian): magic ``WREP``, format version (u32), array count
(u32), then per array: name length (u16) + UTF-8 name, rank (u32), dims (u64
each), float64 payload in C order; the file ends with a CRC32 (u32) of all
preceding bytes.  Files are written atomically (temp file + rename) and
round-trip every value bit-for-bit.
"""

from __future__ import annotations

import os
import struct
import zlib
from pathlib import Path

import numpy as np

from .decoder import DecoderParameters
from .encoder import EncoderParameters
from .errors import CheckpointError

MAGIC = b"WREP"
FORMAT_VERSION = 1


def save_arrays(path, arrays: dict[str, np.ndarray]) -> None:
    """Write named float64 arrays; insertion order is preserved."""
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(arrays))]
    for name, arr in arrays.items():
        # ascontiguousarray would promote 0-d scalars to 1-d; keep ranks as-is
        arr = np.asarray(arr, dtype="<f8", order="C")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    blob = b"".join(parts)
    blob += struct.pack("<I", zlib.crc32(blob) & 0xFFFFFFFF)

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def load_arrays(path) -> dict[str, np.ndarray]:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 16:
        raise CheckpointError(f"{path}: truncated checkpoint")
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic bytes (not a checkpoint)")
    (stored_crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise CheckpointError(f"{path}: checksum mismatch, file is corrupted")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {version} is not supported (expected {FORMAT_VERSION})"
        )

    arrays: dict[str, np.ndarray] = {}
    pos = 12
    end = len(blob) - 4
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}Q", blob, pos)
            pos += 8 * rank
            size = int(np.prod(dims, dtype=np.int64)) if rank else 1
            payload = blob[pos : pos + 8 * size]
            if len(payload) < 8 * size:
                raise CheckpointError(f"{path}: truncated array payload for {name!r}")
            arrays[name] = np.frombuffer(payload, dtype="<f8").reshape(dims).copy()
            pos += 8 * size
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated checkpoint") from exc
    if pos != end:
        raise CheckpointError(f"{path}: trailing bytes after the last array")
    return arrays


def save_model(path, enc: EncoderParameters, dec: DecoderParameters) -> None:
    save_arrays(path, {
        "encoder/kernels": enc.kernels,
        "encoder/dilated_kernels": enc.dilated_kernels,
        "decoder/freq": dec.freq,
        "decoder/phase": dec.phase,
        "decoder/modulator": dec.modulator,
        "meta/stride": np.float64(enc.stride),
        "meta/dilation": np.float64(enc.dilation),
        "meta/square_freq": np.float64(1.0 if dec.square_freq else 0.0),
    })


def load_model(path) -> tuple[EncoderParameters, DecoderParameters]:
    arrs = load_arrays(path)
    try:
        stride = int(arrs["meta/stride"])
        enc = EncoderParameters(
            kernels=arrs["encoder/kernels"],
            dilated_kernels=arrs["encoder/dilated_kernels"],
            stride=stride,
            dilation=int(arrs["meta/dilation"]),
        )
        dec = DecoderParameters(
            freq=arrs["decoder/freq"],
            phase=arrs["decoder/phase"],
            modulator=arrs["decoder/modulator"],
            stride=stride,
            square_freq=bool(arrs["meta/square_freq"]),
        )
    except KeyError as exc:
        raise CheckpointError(f"{path}: missing array {exc.args[0]!r}") from exc
    return enc, dec
