"""
Binary dump of feature tensors for debugging
"""

import struct
from pathlib import Path
from typing import Union

import numpy as np
from loguru import logger

from src.core.exceptions import BadMagic, CsiFormatError, VersionMismatch
from src.core.models import FeatureTensor

TENSOR_MAGIC = b"CSITENSR"
TENSOR_VERSION = 1
# magic, version, n_delay, n_aoa, n_doppler, start_time
_HEADER = struct.Struct("<8sHIIId")


def dump_tensor(path: Union[str, Path], tensor: FeatureTensor) -> Path:
    """
    Write header, the three axes as float64, then complex64 data row-major
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_delay, n_aoa, n_doppler = tensor.data.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(TENSOR_MAGIC, TENSOR_VERSION, n_delay, n_aoa, n_doppler, tensor.start_time))
        for axis in (tensor.delay_axis, tensor.aoa_axis, tensor.doppler_axis):
            fh.write(np.ascontiguousarray(axis, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(tensor.data, dtype="<c8").tobytes())
    logger.debug(f"Dumped tensor {tensor.data.shape} to {path}")
    return path


def load_tensor(path: Union[str, Path]) -> FeatureTensor:
    """Read a tensor written by dump_tensor (data comes back as complex64)"""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise CsiFormatError(f"Tensor file {path} is shorter than its header")
    magic, version, n_delay, n_aoa, n_doppler, start_time = _HEADER.unpack_from(raw)
    if magic != TENSOR_MAGIC:
        raise BadMagic(f"{path} is not a tensor dump")
    if version != TENSOR_VERSION:
        raise VersionMismatch(f"Tensor dump version {version}, expected {TENSOR_VERSION}")

    offset = _HEADER.size
    axes = []
    for count in (n_delay, n_aoa, n_doppler):
        axes.append(np.frombuffer(raw, dtype="<f8", count=count, offset=offset).copy())
        offset += 8 * count

    expected = n_delay * n_aoa * n_doppler
    if len(raw) - offset != 8 * expected:
        raise CsiFormatError(f"Tensor dump {path} has {len(raw) - offset} data bytes, expected {8 * expected}")
    data = np.frombuffer(raw, dtype="<c8", offset=offset).reshape(n_delay, n_aoa, n_doppler).copy()
    return FeatureTensor(data=data, delay_axis=axes[0], aoa_axis=axes[1], doppler_axis=axes[2], start_time=start_time)
