"""Binary checkpoints for denoiser parameters.

Layout (all integers little-endian)::

    magic      8 bytes   b"UNPRCKPT"
    version    u32
    desc_len   u32, then the arch descriptor (utf-8)
    sched_T    u32       0 when the params carry no schedule
    alpha      sched_T x f64
    sched_hash 32 bytes  (zeros without a schedule)
    seed       i64
    step       u64       optimizer step counter
    n          u64       parameter count
    theta, m, v          n x f64 each

Loading rebuilds the schedule from the stored per-step alphas and checks
it against the stored hash and, if given, the caller's schedule.
"""
from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from . import denoiser as dn
from .errors import IoFailure, MissingCheckpoint, ScheduleMismatch, VersionMismatch
from .schedule import NoiseSchedule

MAGIC = b"UNPRCKPT"
VERSION = 1
_NOHASH = bytes(32)


def encode(p: dn.DenoiserParams, seed: int = 0) -> bytes:
    desc = p.arch.descriptor().encode()
    sched = p.schedule
    parts = [MAGIC, struct.pack("<II", VERSION, len(desc)), desc]
    if sched is None:
        parts += [struct.pack("<I", 0), _NOHASH]
    else:
        parts += [struct.pack("<I", sched.T), np.ascontiguousarray(sched.alpha, dtype="<f8").tobytes(), sched.hash()]
    parts.append(struct.pack("<qQQ", int(seed), int(p.step), p.theta.size))
    for arr in (p.theta, p.m, p.v):
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf, self.off, self.path = buf, 0, path

    def take(self, n: int, what: str) -> bytes:
        if self.off + n > len(self.buf):
            raise IoFailure(
                f"{self.path}: truncated while reading {what} at byte {self.off} "
                f"(need {n}, file has {len(self.buf) - self.off} left)",
                offset=self.off,
            )
        out = self.buf[self.off : self.off + n]
        self.off += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode(buf: bytes, schedule: NoiseSchedule | None = None, path="<bytes>") -> tuple[dn.DenoiserParams, int]:
    """Parse checkpoint bytes into ``(params, seed)``."""
    r = _Reader(buf, path)
    if r.take(len(MAGIC), "magic") != MAGIC:
        raise IoFailure(f"{path}: not a checkpoint (bad magic)", offset=0)
    version, desc_len = r.unpack("<II", "header")
    if version != VERSION:
        raise VersionMismatch(f"{path}: checkpoint version {version}, this build reads {VERSION}")
    arch = dn.Arch.from_descriptor(r.take(desc_len, "arch descriptor").decode())
    (T,) = r.unpack("<I", "schedule length")
    stored = None
    if T:
        alpha = np.frombuffer(r.take(8 * T, "schedule"), dtype="<f8").astype(np.float64)
        stored = NoiseSchedule(T, alpha, np.cumprod(alpha))
    digest = r.take(32, "schedule hash")
    if stored is not None and stored.hash() != digest:
        raise IoFailure(f"{path}: stored schedule does not match its hash (corrupt file)", offset=r.off - 32)
    if schedule is not None and (stored is None or stored.hash() != schedule.hash()):
        have = "no schedule" if stored is None else f"a T={stored.T} schedule"
        raise ScheduleMismatch(f"{path}: checkpoint was trained with {have}, config expects T={schedule.T}")
    seed, step, n = r.unpack("<qQQ", "counters")
    if n != arch.n_params:
        raise IoFailure(f"{path}: header says {n} params, arch needs {arch.n_params}", offset=r.off - 8)
    arrs = [np.frombuffer(r.take(8 * n, name), dtype="<f8").astype(np.float64) for name in ("theta", "m", "v")]
    if r.off != len(buf):
        raise IoFailure(f"{path}: {len(buf) - r.off} trailing bytes", offset=r.off)
    return dn.DenoiserParams(arch, arrs[0], arrs[1], arrs[2], int(step), stored), int(seed)


def save_checkpoint(p: dn.DenoiserParams, path, seed: int = 0) -> str:
    """Write ``p`` to ``path``; returns the sha256 of the written bytes."""
    data = encode(p, seed)
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {path}: {exc.strerror}") from None
    return hashlib.sha256(data).hexdigest()


def load_checkpoint(path, schedule: NoiseSchedule | None = None) -> tuple[dn.DenoiserParams, int]:
    path = Path(path)
    if not path.exists():
        raise MissingCheckpoint(f"checkpoint {path} does not exist; run the upstream command first")
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read checkpoint {path}: {exc.strerror}") from None
    return decode(buf, schedule, path)


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
