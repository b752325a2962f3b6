"""ATDR recording container and a plain-text CSV loader for fixtures.

ATDR layout, little-endian:

    magic   4 bytes  0x41 0x54 0x44 0x52 ("ATDR")
    u16     version (1)
    u16     subject_id
    u8      session (0 = K-, 1 = K+)
    u16     n_channels
    u32     n_events
    u64     n_samples
    f64     sample_rate_hz
    per channel: u8 name length + ASCII name
    per event:   3 x u64 (deviation onset, response onset, response offset)
    samples: n_channels * n_samples f32, channel-major

Samples are stored as f32; a loaded recording keeps that dtype so
save(load(path)) reproduces the file byte for byte.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .recording import DeviationEvent, Recording, Session

MAGIC = b"ATDR"
VERSION = 1

_HEADER = struct.Struct("<4sHHBHIQd")


def save_atdr(rec: Recording, path: str | Path) -> None:
    """Write a recording atomically (temp file + rename)."""
    parts = [
        _HEADER.pack(
            MAGIC,
            VERSION,
            rec.subject_id,
            rec.session.value,
            rec.n_channels,
            len(rec.events),
            rec.n_samples,
            rec.sample_rate_hz,
        )
    ]
    for name in rec.channel_names:
        raw = name.encode("ascii")
        if len(raw) > 255:
            raise FormatError(f"channel name too long: {name!r}")
        parts.append(struct.pack("<B", len(raw)) + raw)
    for ev in rec.events:
        parts.append(
            struct.pack("<QQQ", ev.deviation_onset, ev.response_onset, ev.response_offset)
        )
    parts.append(np.ascontiguousarray(rec.samples, dtype="<f4").tobytes())
    _atomic_write(Path(path), b"".join(parts))


def load_atdr(path: str | Path) -> Recording:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, subject_id, session, n_channels, n_events, n_samples, fs = _HEADER.unpack_from(
        data, 0
    )
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    off = _HEADER.size
    names = []
    for _ in range(n_channels):
        if off >= len(data):
            raise FormatError(f"{path}: truncated channel table")
        (ln,) = struct.unpack_from("<B", data, off)
        off += 1
        names.append(data[off : off + ln].decode("ascii"))
        off += ln
    events = []
    for _ in range(n_events):
        dev, r_on, r_off = struct.unpack_from("<QQQ", data, off)
        off += 24
        events.append(DeviationEvent(dev, r_on, r_off))
    expected = n_channels * n_samples * 4
    blob = data[off:]
    if len(blob) != expected:
        raise FormatError(
            f"{path}: sample payload is {len(blob)} bytes, expected {expected}"
        )
    samples = np.frombuffer(blob, dtype="<f4").reshape(n_channels, n_samples)
    try:
        return Recording(
            subject_id=subject_id,
            session=Session(session),
            sample_rate_hz=fs,
            channel_names=names,
            samples=samples,
            events=events,
        )
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def load_recordings_dir(directory: str | Path) -> list[Recording]:
    """All *.atdr files under a directory, sorted by filename."""
    directory = Path(directory)
    paths = sorted(directory.glob("*.atdr"))
    return [load_atdr(p) for p in paths]


def load_recording_csv(
    samples_csv: str | Path,
    events_csv: str | Path,
    *,
    sample_rate_hz: float,
    subject_id: int,
    session: Session,
) -> Recording:
    """Hand-made fixture loader.

    samples_csv: one row per sample, one column per channel; an optional
    first row of non-numeric cells is taken as channel names.
    events_csv: three integer columns (deviation onset, response onset,
    response offset), optional header row.
    """
    rows = _read_csv_rows(samples_csv)
    if not rows:
        raise FormatError(f"{samples_csv}: no rows")
    names: list[str] | None = None
    if not _is_numeric_row(rows[0]):
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise FormatError(f"{samples_csv}: header but no samples")
    table = np.array([[float(c) for c in r] for r in rows], dtype=np.float64)
    if names is None:
        names = [f"ch{i:02d}" for i in range(table.shape[1])]
    ev_rows = _read_csv_rows(events_csv)
    if ev_rows and not _is_numeric_row(ev_rows[0]):
        ev_rows = ev_rows[1:]
    events = [DeviationEvent(int(r[0]), int(r[1]), int(r[2])) for r in ev_rows]
    return Recording(
        subject_id=subject_id,
        session=session,
        sample_rate_hz=sample_rate_hz,
        channel_names=names,
        samples=table.T,  # rows are samples on disk, channel-major in memory
        events=events,
    )


def _read_csv_rows(path: str | Path) -> list[list[str]]:
    import csv

    with open(path, newline="") as fh:
        return [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]


def _is_numeric_row(row: list[str]) -> bool:
    try:
        for cell in row:
            float(cell)
    except ValueError:
        return False
    return True


def _atomic_write(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)
