"""
Live CSI over UDP

One CSI sample per datagram: u32 sequence number, f64 timestamp, then
the complex64 payload laid out as in the capture file.
"""

import socket
import struct
import time
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
from loguru import logger

from src.core.exceptions import MalformedDatagram
from src.core.models import SystemConfig
from src.data.csi_file import CsiRecord

DATAGRAM_HEADER = struct.Struct("<Id")
MAX_DATAGRAM = 65535


@dataclass
class MissingSample:
    """Placeholder for a sequence number that never arrived"""
    seq: int
    timestamp: Optional[float] = None


def encode_datagram(seq: int, timestamp: float, payload: np.ndarray) -> bytes:
    return DATAGRAM_HEADER.pack(seq & 0xFFFFFFFF, timestamp) + np.ascontiguousarray(payload, dtype="<c8").tobytes()


def decode_datagram(data: bytes, shape: Tuple[int, int]) -> Tuple[int, CsiRecord]:
    """
    Parse one datagram

    Raises:
        MalformedDatagram: size does not match header plus payload, or the
            timestamp or CSI is non-finite
    """
    expected = DATAGRAM_HEADER.size + 8 * shape[0] * shape[1]
    if len(data) != expected:
        raise MalformedDatagram(f"Datagram of {len(data)} bytes, expected {expected}")
    seq, timestamp = DATAGRAM_HEADER.unpack_from(data)
    if not np.isfinite(timestamp):
        raise MalformedDatagram(f"Datagram {seq} has a non-finite timestamp")
    payload = np.frombuffer(data, dtype="<c8", offset=DATAGRAM_HEADER.size).reshape(shape).copy()
    if not np.all(np.isfinite(payload)):
        raise MalformedDatagram(f"Datagram {seq} carries non-finite CSI")
    return seq, CsiRecord(timestamp, payload)


class ReorderBuffer:
    """
    Restores sequence order within a window of `depth` held datagrams

    When more than `depth` datagrams are waiting, or on flush, the
    missing sequence numbers up to the oldest held datagram are declared
    as a gap. Datagrams older than the emitted position are dropped.
    """

    def __init__(self, depth: int = 8):
        self.depth = depth
        self.next_seq: Optional[int] = None
        self.pending: Dict[int, CsiRecord] = {}
        self.late_dropped = 0
        self.duplicates = 0
        self.gaps_declared = 0

    def _drain(self) -> List[Union[CsiRecord, MissingSample]]:
        out: List[Union[CsiRecord, MissingSample]] = []
        while self.next_seq in self.pending:
            out.append(self.pending.pop(self.next_seq))
            self.next_seq += 1
        return out

    def _skip_to_oldest(self) -> List[MissingSample]:
        oldest = min(self.pending)
        gap = [MissingSample(s) for s in range(self.next_seq, oldest)]
        if gap:
            logger.warning(f"Declared gap of {len(gap)} samples ({self.next_seq}..{oldest - 1})")
        self.gaps_declared += len(gap)
        self.next_seq = oldest
        return gap

    def push(self, seq: int, record: CsiRecord) -> List[Union[CsiRecord, MissingSample]]:
        """Insert a datagram; returns whatever can be emitted in order"""
        if self.next_seq is None:
            self.next_seq = seq
        if seq < self.next_seq:
            self.late_dropped += 1
            logger.debug(f"Late datagram {seq} dropped (expecting {self.next_seq})")
            return []
        if seq in self.pending:
            self.duplicates += 1
            return []

        self.pending[seq] = record
        out = self._drain()
        while len(self.pending) > self.depth:
            out.extend(self._skip_to_oldest())
            out.extend(self._drain())
        return out

    def flush(self) -> List[Union[CsiRecord, MissingSample]]:
        """Emit everything still held, declaring the gaps between"""
        out: List[Union[CsiRecord, MissingSample]] = []
        while self.pending:
            out.extend(self._skip_to_oldest())
            out.extend(self._drain())
        return out


class UdpCsiReceiver:
    """Blocking UDP reader yielding records in sequence order"""

    def __init__(self, host: str, port: int, cfg: SystemConfig, poll_timeout: float = 0.5):
        self.cfg = cfg
        self.shape = (cfg.num_subcarriers, cfg.num_antennas)
        self.buffer = ReorderBuffer(cfg.reorder_depth)
        self.malformed = 0
        self.received = 0
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind((host, port))
        self.sock.settimeout(poll_timeout)
        self.address = self.sock.getsockname()
        logger.info(f"Listening for CSI on udp://{self.address[0]}:{self.address[1]}")

    def records(self, max_seconds: Optional[float] = None,
                stop=None) -> Iterator[Union[CsiRecord, MissingSample]]:
        """
        Yield ordered records until max_seconds elapse or stop() returns True
        """
        deadline = None if max_seconds is None else time.monotonic() + max_seconds
        try:
            while deadline is None or time.monotonic() < deadline:
                if stop is not None and stop():
                    break
                try:
                    data, _ = self.sock.recvfrom(MAX_DATAGRAM)
                except socket.timeout:
                    continue
                try:
                    seq, record = decode_datagram(data, self.shape)
                except MalformedDatagram as e:
                    self.malformed += 1
                    logger.warning(f"Dropped datagram: {e}")
                    continue
                self.received += 1
                yield from self.buffer.push(seq, record)
            yield from self.buffer.flush()
        finally:
            self.close()
            logger.info(
                f"UDP ingest finished: {self.received} received, {self.malformed} malformed, "
                f"{self.buffer.late_dropped} late, {self.buffer.gaps_declared} missing"
            )

    def close(self) -> None:
        self.sock.close()


def parse_address(text: str) -> Tuple[str, int]:
    """'host:port' -> (host, port)"""
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"Expected host:port, got '{text}'")
    return host, int(port)


def send_capture(host: str, port: int, timestamps: np.ndarray, payloads: np.ndarray,
                 order: Optional[np.ndarray] = None) -> int:
    """Replay a capture as datagrams (optionally in a permuted order)"""
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    indices = np.arange(len(timestamps)) if order is None else order
    try:
        for i in indices:
            sock.sendto(encode_datagram(int(i), float(timestamps[i]), payloads[i]), (host, port))
    finally:
        sock.close()
    return len(indices)
