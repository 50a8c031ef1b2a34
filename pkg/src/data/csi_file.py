"""
Native binary CSI capture format

Little-endian header (magic, version, carrier, subcarrier count, antenna
count, sample rate, antenna spacing) followed by the subcarrier
frequencies as float64. Each record is a float64 timestamp and an
n_subcarriers x n_antennas complex64 payload, subcarrier-major.
"""

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Tuple, Union

import numpy as np
from loguru import logger

from src.core.exceptions import (BadMagic, CsiFormatError, NonMonotoneTimestamp, RecordShapeMismatch,
                                 TruncatedRecord, VersionMismatch)
from src.core.models import SystemConfig

CSI_MAGIC = b"PWRSENSE"
CSI_VERSION = 1
_HEADER = struct.Struct("<8sHdHBdd")


@dataclass
class CsiRecord:
    """One CSI sample"""
    timestamp: float
    payload: np.ndarray


@dataclass
class CsiFileHeader:
    carrier_freq: float
    subcarrier_freqs: np.ndarray
    num_antennas: int
    sample_rate: float
    antenna_spacing: float
    version: int = CSI_VERSION

    @property
    def num_subcarriers(self) -> int:
        return len(self.subcarrier_freqs)

    @property
    def payload_shape(self) -> Tuple[int, int]:
        return self.num_subcarriers, self.num_antennas

    @property
    def record_dtype(self) -> np.dtype:
        return np.dtype([("timestamp", "<f8"), ("payload", "<c8", self.payload_shape)])

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "CsiFileHeader":
        return cls(
            carrier_freq=cfg.carrier_freq,
            subcarrier_freqs=cfg.freqs.copy(),
            num_antennas=cfg.num_antennas,
            sample_rate=1.0 / cfg.sample_interval,
            antenna_spacing=cfg.antenna_spacing,
        )

    def pack(self) -> bytes:
        head = _HEADER.pack(CSI_MAGIC, self.version, self.carrier_freq, self.num_subcarriers,
                            self.num_antennas, self.sample_rate, self.antenna_spacing)
        return head + np.asarray(self.subcarrier_freqs, dtype="<f8").tobytes()

    @classmethod
    def unpack(cls, raw: bytes) -> Tuple["CsiFileHeader", int]:
        """Parse the header; returns it with the offset of the first record"""
        if len(raw) < _HEADER.size:
            raise CsiFormatError("File is shorter than the CSI header")
        magic, version, carrier, n_sub, n_ant, rate, spacing = _HEADER.unpack_from(raw)
        if magic != CSI_MAGIC:
            raise BadMagic(f"Unexpected magic {magic!r}")
        if version != CSI_VERSION:
            raise VersionMismatch(f"CSI format version {version}, expected {CSI_VERSION}")
        offset = _HEADER.size + 8 * n_sub
        if len(raw) < offset:
            raise CsiFormatError("File ends inside the subcarrier table")
        freqs = np.frombuffer(raw, dtype="<f8", count=n_sub, offset=_HEADER.size).copy()
        return cls(carrier, freqs, n_ant, rate, spacing, version), offset

    def check_config(self, cfg: SystemConfig) -> None:
        """Raise RecordShapeMismatch when the capture does not fit the configuration"""
        if self.payload_shape != (cfg.num_subcarriers, cfg.num_antennas):
            raise RecordShapeMismatch(
                f"Capture is {self.payload_shape[0]}x{self.payload_shape[1]}, "
                f"config expects {cfg.num_subcarriers}x{cfg.num_antennas}"
            )
        if abs(1.0 / self.sample_rate - cfg.sample_interval) > 1e-9 * cfg.sample_interval:
            logger.warning(f"Capture sample rate {self.sample_rate:.1f} Hz differs from config")


def write_csi(path: Union[str, Path], header: CsiFileHeader, records: Iterable[CsiRecord]) -> int:
    """
    Write a capture record by record

    Returns:
        Number of records written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dtype = header.record_dtype
    count = 0
    last_time = -np.inf
    with open(path, "wb") as fh:
        fh.write(header.pack())
        for record in records:
            payload = np.asarray(record.payload)
            if payload.shape != header.payload_shape:
                raise RecordShapeMismatch(
                    f"Record {count} has shape {payload.shape}, header says {header.payload_shape}"
                )
            if record.timestamp < last_time:
                raise NonMonotoneTimestamp(f"Record {count} at {record.timestamp} s precedes {last_time} s")
            last_time = record.timestamp
            row = np.zeros(1, dtype=dtype)
            row["timestamp"] = record.timestamp
            row["payload"] = payload
            fh.write(row.tobytes())
            count += 1
    logger.info(f"Wrote {count} CSI records to {path}")
    return count


def write_csi_arrays(path: Union[str, Path], header: CsiFileHeader, timestamps: np.ndarray,
                     payloads: np.ndarray) -> int:
    """Vectorized write of N timestamps and N x N_f x N_a payloads"""
    if payloads.shape[1:] != header.payload_shape:
        raise RecordShapeMismatch(f"Payloads have shape {payloads.shape[1:]}, header says {header.payload_shape}")
    if np.any(np.diff(timestamps) < 0):
        raise NonMonotoneTimestamp("Timestamps are not non-decreasing")
    rows = np.zeros(len(timestamps), dtype=header.record_dtype)
    rows["timestamp"] = timestamps
    rows["payload"] = payloads
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(header.pack())
        fh.write(rows.tobytes())
    logger.info(f"Wrote {len(rows)} CSI records to {path}")
    return len(rows)


def read_csi(path: Union[str, Path]) -> Tuple[CsiFileHeader, np.ndarray, np.ndarray]:
    """
    Read a whole capture

    Returns:
        (header, timestamps of shape N, complex64 payloads N x N_f x N_a)

    Raises:
        TruncatedRecord: the file ends mid-record; the complete records are
            attached to the exception as `partial`
    """
    raw = Path(path).read_bytes()
    header, offset = CsiFileHeader.unpack(raw)
    dtype = header.record_dtype
    body = len(raw) - offset
    n_records, remainder = divmod(body, dtype.itemsize)

    rows = np.frombuffer(raw, dtype=dtype, count=n_records, offset=offset)
    timestamps = rows["timestamp"].copy()
    payloads = rows["payload"].copy()

    bad = np.flatnonzero(np.diff(timestamps) < 0)
    if len(bad):
        raise NonMonotoneTimestamp(f"Timestamp decreases at record {int(bad[0]) + 1}")

    if remainder:
        error = TruncatedRecord(n_records)
        error.partial = (header, timestamps, payloads)
        raise error

    logger.info(f"Read {n_records} CSI records from {path}")
    return header, timestamps, payloads


def iter_records(timestamps: np.ndarray, payloads: np.ndarray) -> Iterator[CsiRecord]:
    for ts, payload in zip(timestamps, payloads):
        yield CsiRecord(float(ts), payload)
