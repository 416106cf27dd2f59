"""Binary containers for mel files and checkpoints.

Both formats share the same layout: an 8-byte magic string, a little-endian
uint32 giving the length of a UTF-8 JSON header, the header itself, then
row-major 32-bit little-endian float payloads in the order the header
declares. Files with the wrong magic are rejected loudly.

Mel file header:   {"shape": [T, F], "frame_params": {...}, "log_scaled": bool}
Checkpoint header: {"kind": ..., "format_version": 1, "config": {...},
                    "frame_params": {...}, "step": int,
                    "tensors": [{"name": ..., "shape": [...]}, ...]}
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .dsp import MelParams, MelSpectrogram
from .errors import AudioIOError, StateError

MEL_MAGIC = b"PMVCMEL1"
CKPT_MAGIC = b"PMVCKPT1"
CKPT_FORMAT_VERSION = 1


def _write_container(path, magic: bytes, header: dict, payloads: list[np.ndarray]) -> None:
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    try:
        with open(path, "wb") as f:
            f.write(magic)
            f.write(struct.pack("<I", len(blob)))
            f.write(blob)
            for arr in payloads:
                f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    except OSError as exc:
        raise AudioIOError(f"cannot write {path}: {exc}")


def _read_container(path, magic: bytes) -> tuple[dict, bytes]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise AudioIOError(f"cannot read {path}: {exc}")
    if len(raw) < len(magic) + 4 or raw[: len(magic)] != magic:
        raise StateError(f"{path}: not a {magic.decode()} container")
    (hlen,) = struct.unpack_from("<I", raw, len(magic))
    start = len(magic) + 4
    header = json.loads(raw[start : start + hlen].decode("utf-8"))
    return header, raw[start + hlen :]


def save_mel(path, spec: MelSpectrogram) -> None:
    header = {
        "shape": list(spec.frames.shape),
        "frame_params": spec.params.to_dict(),
        "log_scaled": spec.log_scaled,
    }
    _write_container(path, MEL_MAGIC, header, [spec.frames])


def load_mel(path) -> MelSpectrogram:
    header, payload = _read_container(path, MEL_MAGIC)
    t, f = header["shape"]
    frames = np.frombuffer(payload, dtype="<f4", count=t * f).reshape(t, f).copy()
    return MelSpectrogram(
        frames=frames,
        params=MelParams.from_dict(header["frame_params"]),
        log_scaled=header["log_scaled"],
    )


def save_checkpoint(
    path,
    kind: str,
    tensors: dict[str, np.ndarray],
    config: dict,
    frame_params: dict | None = None,
    step: int = 0,
) -> None:
    """Save named float32 tensors plus configuration under one magic-tagged file."""
    names = list(tensors.keys())
    header = {
        "kind": kind,
        "format_version": CKPT_FORMAT_VERSION,
        "config": config,
        "frame_params": frame_params,
        "step": step,
        "tensors": [{"name": n, "shape": list(tensors[n].shape)} for n in names],
    }
    _write_container(path, CKPT_MAGIC, header, [tensors[n] for n in names])


def load_checkpoint(path, expected_kind: str | None = None) -> dict:
    """Load a checkpoint; returns {kind, config, frame_params, step, tensors}."""
    header, payload = _read_container(path, CKPT_MAGIC)
    if header.get("format_version") != CKPT_FORMAT_VERSION:
        raise StateError(
            f"{path}: checkpoint format version {header.get('format_version')} "
            f"!= {CKPT_FORMAT_VERSION}"
        )
    if expected_kind is not None and header["kind"] != expected_kind:
        raise StateError(f"{path}: checkpoint kind {header['kind']!r}, expected {expected_kind!r}")
    tensors = {}
    offset = 0
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        tensors[entry["name"]] = arr.reshape(shape).copy()
        offset += count * 4
    return {
        "kind": header["kind"],
        "config": header["config"],
        "frame_params": header["frame_params"],
        "step": header["step"],
        "tensors": tensors,
    }
