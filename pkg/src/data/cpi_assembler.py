"""
Sliding CPI windows over an ordered CSI stream
"""

import threading
from collections import deque
from typing import Deque, Iterable, Iterator, List, Optional, Union

import numpy as np
from loguru import logger

from src.core.exceptions import CsiTrackError
from src.core.models import CpiCube, SystemConfig
from src.data.csi_file import CsiRecord
from src.data.udp_ingest import MissingSample

StreamItem = Union[CsiRecord, MissingSample]


class CpiAssembler:
    """
    Cuts the stream into windows of cpi_len samples advancing by cpi_stride

    Missing samples are filled with the previous record (the next one for
    a leading gap); windows with more than max_missing_fraction missing are
    skipped. Records carrying non-finite CSI count as missing.
    """

    def __init__(self, cfg: SystemConfig):
        self.cfg = cfg
        self.window: Deque[Optional[CsiRecord]] = deque(maxlen=cfg.cpi_len)
        self.times: Deque[float] = deque(maxlen=cfg.cpi_len)
        self.samples_seen = 0
        self.windows_seen = 0
        self.emitted = 0
        self.skipped = 0
        self.rejected = 0
        self._last_time: Optional[float] = None

    def push(self, item: StreamItem) -> Optional[CpiCube]:
        """Add one sample; returns a CpiCube when a window completes"""
        if isinstance(item, CsiRecord) and not np.all(np.isfinite(item.payload)):
            self.rejected += 1
            logger.warning(f"Record at {item.timestamp:.6f} s carries non-finite CSI, treated as missing")
            item = MissingSample(-1, timestamp=item.timestamp)
        if isinstance(item, MissingSample):
            if item.timestamp is not None:
                estimate = item.timestamp
            elif self._last_time is not None:
                estimate = self._last_time + self.cfg.sample_interval
            else:
                estimate = np.nan
            self.window.append(None)
            self.times.append(estimate)
            self._last_time = estimate
        else:
            self.window.append(item)
            self.times.append(item.timestamp)
            self._last_time = item.timestamp
        self.samples_seen += 1

        if self.samples_seen < self.cfg.cpi_len or (self.samples_seen - self.cfg.cpi_len) % self.cfg.cpi_stride:
            return None
        return self._emit()

    def _emit(self) -> Optional[CpiCube]:
        seq = self.windows_seen
        self.windows_seen += 1
        missing = sum(record is None for record in self.window)
        if missing == self.cfg.cpi_len or missing > self.cfg.max_missing_fraction * self.cfg.cpi_len:
            self.skipped += 1
            logger.warning(f"CPI {seq} skipped: {missing} of {self.cfg.cpi_len} samples missing")
            return None

        records: List[Optional[CsiRecord]] = list(self.window)
        first_valid = next(r for r in records if r is not None)
        previous = first_valid
        payloads = []
        for record in records:
            if record is not None:
                previous = record
            payloads.append(previous.payload)

        start_time = self.times[0]
        if not np.isfinite(start_time):
            start_time = first_valid.timestamp - records.index(first_valid) * self.cfg.sample_interval
        data = np.stack(payloads, axis=-1).astype(np.complex128)
        cube = CpiCube(data=data, start_time=float(start_time), seq=seq, filled=missing)
        try:
            cube.validate(self.cfg)
        except CsiTrackError as e:
            self.skipped += 1
            logger.warning(f"CPI {seq} skipped: {e}")
            return None
        self.emitted += 1
        if missing:
            logger.debug(f"CPI {seq}: filled {missing} missing samples")
        return cube


def fill_timestamp_gaps(records: Iterable[CsiRecord], cfg: SystemConfig) -> Iterator[StreamItem]:
    """Insert MissingSample markers where consecutive timestamps jump by more than 1.5 sample intervals"""
    previous: Optional[float] = None
    for record in records:
        if previous is not None:
            if record.timestamp - previous > 1.5 * cfg.sample_interval:
                steps = int(round((record.timestamp - previous) / cfg.sample_interval))
                for _ in range(steps - 1):
                    yield MissingSample(-1)
        previous = record.timestamp
        yield record


def assemble_cpis(stream: Iterable[StreamItem], cfg: SystemConfig) -> Iterator[CpiCube]:
    """Generator of CpiCubes over an ordered stream"""
    assembler = CpiAssembler(cfg)
    for item in stream:
        cube = assembler.push(item)
        if cube is not None:
            yield cube
    logger.info(f"Assembled {assembler.emitted} CPIs from {assembler.samples_seen} samples "
                f"({assembler.skipped} skipped)")


class CpiQueue:
    """Bounded hand-off between the ingest thread and the processing loop; drops the oldest CPI when full"""

    def __init__(self, maxsize: int):
        self.maxsize = maxsize
        self._items: Deque[CpiCube] = deque()
        self._cond = threading.Condition()
        self._closed = False
        self.dropped = 0

    def put(self, cube: CpiCube) -> None:
        with self._cond:
            if len(self._items) >= self.maxsize:
                old = self._items.popleft()
                self.dropped += 1
                logger.warning(f"Processing behind: dropped CPI {old.seq}")
            self._items.append(cube)
            self._cond.notify()

    def get(self, timeout: Optional[float] = None) -> Optional[CpiCube]:
        """Next CPI, or None once closed and empty (or on timeout)"""
        with self._cond:
            if not self._items and not self._closed:
                self._cond.wait(timeout)
            if self._items:
                return self._items.popleft()
            return None

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    @property
    def closed(self) -> bool:
        with self._cond:
            return self._closed and not self._items

    def __len__(self) -> int:
        with self._cond:
            return len(self._items)
