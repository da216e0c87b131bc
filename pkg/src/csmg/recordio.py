"""Binary click-record format: one byte per photon plus a tiny header.

Layout (little endian):

    offset 0   4 bytes   magic  0x43 0x53 0x4D 0x47  ("CSMG")
    offset 4   1 byte    format version, currently 0x01
    offset 5   8 bytes   photon count, unsigned
    offset 13  8 bytes   burn-in count, unsigned
    offset 21  1 byte per photon

Event bytes: 0x00 = photon lost.  Otherwise bits 2..1 hold the detection
basis (01 = X, 10 = Y, 11 = Z) and bit 0 holds the outcome (0 -> +1,
1 -> -1), i.e. X+ = 0x02, X- = 0x03, Y+ = 0x04, Y- = 0x05, Z+ = 0x06,
Z- = 0x07.  Every other byte value is invalid and readers reject it with
the absolute file offset of the first offender.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from typing import Iterator, Tuple, Union

import numpy as np

MAGIC = b"CSMG"
VERSION = 1
_HEADER = struct.Struct("<4sBQQ")
HEADER_SIZE = _HEADER.size  # 21

EVENT_LOST = 0x00
BASIS_NONE = 0  # byte >> 1 for a lost photon
BASIS_X = 1
BASIS_Y = 2
BASIS_Z = 3
BASIS_NAMES = {BASIS_X: "X", BASIS_Y: "Y", BASIS_Z: "Z"}
BASIS_CODES = {"X": BASIS_X, "Y": BASIS_Y, "Z": BASIS_Z}


class RecordFormatError(Exception):
    """Malformed record file; carries the offending absolute byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (byte offset {offset})")
        self.offset = offset


def encode_event(basis: int, outcome: int) -> int:
    """Pack a detection into one byte; basis is BASIS_X/Y/Z, outcome +1/-1."""
    if basis not in (BASIS_X, BASIS_Y, BASIS_Z):
        raise ValueError(f"bad basis code {basis}")
    if outcome not in (1, -1):
        raise ValueError(f"bad outcome {outcome}")
    return (basis << 1) | (0 if outcome == 1 else 1)


def event_basis(byte: int) -> int:
    return byte >> 1


def event_outcome(byte: int) -> int:
    """+1/-1 for a detection; raises on a lost photon."""
    if byte == EVENT_LOST:
        raise ValueError("lost photon has no outcome")
    return 1 - 2 * (byte & 1)


@dataclass
class ClickRecord:
    """A photon-by-photon detection record.

    ``events`` is a uint8 array using the byte encoding above; the first
    ``burn_in`` photons were produced while the source settles and are
    skipped by default during scanning.
    """

    events: np.ndarray
    burn_in: int = 0

    def __post_init__(self) -> None:
        self.events = np.ascontiguousarray(self.events, dtype=np.uint8)
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")

    def __len__(self) -> int:
        return int(self.events.shape[0])

    @property
    def n_photons(self) -> int:
        return len(self)

    def lost_fraction(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.count_nonzero(self.events == EVENT_LOST) / len(self))

    def basis_counts(self) -> dict:
        b = self.events >> 1
        return {name: int(np.count_nonzero(b == code))
                for code, name in BASIS_NAMES.items()}


def validate_events(events: np.ndarray, base_offset: int = HEADER_SIZE) -> None:
    """Reject any byte outside {0x00, 0x02..0x07}; reports the file offset."""
    bad = (events == 0x01) | (events > 0x07)
    if bad.any():
        idx = int(np.argmax(bad))
        raise RecordFormatError(
            f"invalid event byte 0x{int(events[idx]):02X}", base_offset + idx)


def write_record(path: Union[str, os.PathLike], record: ClickRecord) -> None:
    events = np.ascontiguousarray(record.events, dtype=np.uint8)
    validate_events(events)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, events.shape[0], record.burn_in))
        fh.write(events.tobytes())


def _read_header(fh) -> Tuple[int, int]:
    raw = fh.read(HEADER_SIZE)
    if len(raw) < HEADER_SIZE:
        raise RecordFormatError("truncated header", len(raw))
    magic, version, count, burn_in = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise RecordFormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise RecordFormatError(f"unsupported version {version}", 4)
    return count, burn_in


def read_record(path: Union[str, os.PathLike], validate: bool = True) -> ClickRecord:
    """Load a record fully into memory, validating payload bytes."""
    with open(path, "rb") as fh:
        count, burn_in = _read_header(fh)
        payload = fh.read()
    if len(payload) != count:
        raise RecordFormatError(
            f"payload holds {len(payload)} photons, header promised {count}",
            HEADER_SIZE + min(len(payload), count))
    events = np.frombuffer(payload, dtype=np.uint8)
    if validate:
        validate_events(events)
    return ClickRecord(events=events.copy(), burn_in=burn_in)


def open_record(path: Union[str, os.PathLike], validate: bool = True) -> ClickRecord:
    """Memory-map a record read-only; payload pages load on demand."""
    size = os.path.getsize(path)
    with open(path, "rb") as fh:
        count, burn_in = _read_header(fh)
    if size - HEADER_SIZE != count:
        raise RecordFormatError(
            f"file holds {size - HEADER_SIZE} photons, header promised {count}",
            HEADER_SIZE + min(size - HEADER_SIZE, count))
    events = np.memmap(path, dtype=np.uint8, mode="r", offset=HEADER_SIZE, shape=(count,))
    if validate:
        chunk = 1 << 24
        for start in range(0, count, chunk):
            validate_events(events[start:start + chunk], HEADER_SIZE + start)
    return ClickRecord(events=events, burn_in=burn_in)


def iter_event_chunks(path: Union[str, os.PathLike],
                      chunk_size: int = 1 << 22) -> Iterator[Tuple[int, np.ndarray]]:
    """Yield (photon_index, events) pieces of a record without loading it all."""
    with open(path, "rb") as fh:
        count, _ = _read_header(fh)
        done = 0
        while done < count:
            raw = fh.read(min(chunk_size, count - done))
            if not raw:
                raise RecordFormatError("truncated payload", HEADER_SIZE + done)
            events = np.frombuffer(raw, dtype=np.uint8)
            validate_events(events, HEADER_SIZE + done)
            yield done, events
            done += len(events)


def format_events(events: np.ndarray, limit: int = 32) -> str:
    """Human-readable preview like ``Z+ Y- __ X+ ...`` for logs and the CLI."""
    parts = []
    for byte in events[:limit]:
        byte = int(byte)
        if byte == EVENT_LOST:
            parts.append("__")
        else:
            parts.append(BASIS_NAMES[event_basis(byte)] + ("+" if byte & 1 == 0 else "-"))
    if len(events) > limit:
        parts.append("...")
    return " ".join(parts)
