"""
Exception hierarchy for the CSI power tracker
"""

from typing import Optional


class CsiTrackError(Exception):
    """Base class for all pipeline errors"""


class ConfigError(CsiTrackError):
    """Invalid or inconsistent configuration"""


class NonPhysicalBin(CsiTrackError):
    """AoA bin whose arcsin argument falls outside [-1, 1]"""

    def __init__(self, bin_index: int, argument: float):
        super().__init__(f"AoA bin {bin_index} is non-physical (arcsin argument {argument:.4f})")
        self.bin_index = bin_index
        self.argument = argument


class EmptyTensor(CsiTrackError):
    """All bins of a feature tensor were gated away"""


class InsufficientData(CsiTrackError):
    """Not enough samples for the requested operation"""


class AllZero(CsiTrackError):
    """Matrix contains only zeros"""


class DegenerateGeometry(CsiTrackError):
    """Bistatic geometry cannot be resolved"""


class TrajectoryOutOfBounds(DegenerateGeometry):
    """Trajectory undefined at the requested time or passes through Rx/Tx"""


class NumericalFailure(CsiTrackError):
    """Singular matrix or non-finite result in the filter"""


class CsiFormatError(CsiTrackError):
    """Problem with the binary CSI file or datagram layout"""


class BadMagic(CsiFormatError):
    """File does not start with the expected magic bytes"""


class VersionMismatch(CsiFormatError):
    """Unsupported format version"""


class TruncatedRecord(CsiFormatError):
    """File ends in the middle of a record"""

    def __init__(self, records_recovered: int, message: Optional[str] = None):
        super().__init__(message or f"File truncated after {records_recovered} complete records")
        self.records_recovered = records_recovered


class NonMonotoneTimestamp(CsiFormatError):
    """Record timestamp went backwards"""


class RecordShapeMismatch(CsiFormatError):
    """Record payload shape differs from the header"""


class MalformedDatagram(CsiFormatError):
    """UDP datagram with the wrong size or layout"""
