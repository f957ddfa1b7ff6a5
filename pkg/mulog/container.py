"""MULG covariance container files.

Layout (little-endian):

    header   magic "MULG" | version u16 | width u32 | height u32 | dim u8 | looks f64 | flags u8
    payload  D diagonal planes, then (Re, Im) planes of each upper off-diagonal
             entry in channel order; each plane height x width float64, row-major
    sidecar  (flags bit 0) channel basis: A (D^2 x D^2, row-major), b (D^2), phi (D^2)

Single real planes (dim = 1) are also the exchange format of external denoisers.
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .channelizer import ChannelBasis, offdiag_pairs
from .exceptions import ContainerFormatError, InvalidInputError
from .utils import atomic_write_bytes

log = logging.getLogger(__name__)

MAGIC = b"MULG"
VERSION = 1
HEADER = struct.Struct("<4sHIIBdB")
FLAG_SIDECAR = 0x01
F8 = np.dtype("<f8")


@dataclass(frozen=True, eq=False)
class CovContainer:
    """Covariance image (height, width, D, D) plus its looks and optional basis."""

    data: np.ndarray
    looks: float
    basis: Optional[ChannelBasis] = None

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 4 or data.shape[-1] != data.shape[-2]:
            raise InvalidInputError(f"expected (height, width, D, D) data, got shape {data.shape}")
        if data.shape[-1] > 255:
            raise InvalidInputError(f"matrix dimension {data.shape[-1]} does not fit the header")
        if self.basis is not None and self.basis.dim != data.shape[-1]:
            raise InvalidInputError("basis dimension does not match the data")
        object.__setattr__(self, "data", data.astype(np.complex128, copy=False))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[-1]


def _planes(data: np.ndarray) -> np.ndarray:
    d = data.shape[-1]
    idx = np.arange(d)
    planes = [data[..., i, i].real for i in idx]
    rows, cols = offdiag_pairs(d)
    for i, j in zip(rows, cols):
        planes.append(data[..., i, j].real)
        planes.append(data[..., i, j].imag)
    return np.stack(planes)


def _from_planes(planes: np.ndarray, d: int) -> np.ndarray:
    h, w = planes.shape[1:]
    data = np.zeros((h, w, d, d), dtype=np.complex128)
    for i in range(d):
        data[..., i, i] = planes[i]
    rows, cols = offdiag_pairs(d)
    for p, (i, j) in enumerate(zip(rows, cols)):
        vals = planes[d + 2 * p] + 1j * planes[d + 2 * p + 1]
        data[..., i, j] = vals
        data[..., j, i] = np.conj(vals)
    return data


def encode_container(container: CovContainer) -> bytes:
    flags = FLAG_SIDECAR if container.basis is not None else 0
    header = HEADER.pack(
        MAGIC, VERSION, container.width, container.height, container.dim, float(container.looks), flags
    )
    parts = [header, _planes(container.data).astype(F8).tobytes()]
    if container.basis is not None:
        basis = container.basis
        parts.append(np.concatenate([basis.A.ravel(), basis.b, basis.phi]).astype(F8).tobytes())
    return b"".join(parts)


def decode_container(raw: bytes) -> CovContainer:
    if len(raw) < HEADER.size:
        raise ContainerFormatError(f"file too short for a header ({len(raw)} bytes)")
    magic, version, width, height, dim, looks, flags = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ContainerFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ContainerFormatError(f"unsupported version {version}")
    if dim < 1:
        raise ContainerFormatError("matrix dimension must be >= 1")
    n_ch = dim * dim
    payload = width * height * n_ch * F8.itemsize
    sidecar = (n_ch * n_ch + 2 * n_ch) * F8.itemsize if flags & FLAG_SIDECAR else 0
    expected = HEADER.size + payload + sidecar
    if len(raw) != expected:
        raise ContainerFormatError(f"expected {expected} bytes, found {len(raw)}")

    planes = np.frombuffer(raw, dtype=F8, count=width * height * n_ch, offset=HEADER.size)
    data = _from_planes(planes.reshape(n_ch, height, width).astype(np.float64), dim)
    basis = None
    if sidecar:
        vals = np.frombuffer(raw, dtype=F8, offset=HEADER.size + payload).astype(np.float64)
        try:
            basis = ChannelBasis(
                dim,
                vals[: n_ch * n_ch].reshape(n_ch, n_ch),
                vals[n_ch * n_ch : n_ch * n_ch + n_ch],
                vals[n_ch * n_ch + n_ch :],
            )
        except InvalidInputError as e:
            raise ContainerFormatError(f"invalid sidecar: {e}") from e
    return CovContainer(data, looks, basis)


def write_container(path: Path, container: CovContainer) -> None:
    atomic_write_bytes(path, encode_container(container))
    log.debug(f"Wrote {container.height}x{container.width} D={container.dim} container to {path}")


def read_container(path: Path) -> CovContainer:
    return decode_container(Path(path).read_bytes())


def write_plane(path: Path, plane, looks: float = 1.0) -> None:
    """Store a real 2-D plane as a dim=1 container."""
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2:
        raise InvalidInputError(f"expected a 2-D plane, got shape {plane.shape}")
    write_container(path, CovContainer(plane[..., None, None], looks))


def read_plane(path: Path) -> np.ndarray:
    container = read_container(path)
    if container.dim != 1:
        raise ContainerFormatError(f"expected a single plane, found D={container.dim}")
    return container.data[..., 0, 0].real.copy()
