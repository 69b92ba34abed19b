"""Binary field snapshots and restartable checkpoints.

Snapshot layout (all little-endian)::

    offset  size  field
    0       4     magic  b"HMSF"
    4       4     uint32 format version (1)
    8       4     uint32 n_per_axis
    12      4     uint32 component count (3 for a field, 6 for a state: u then B)
    16      1     uint8  layout: 0 = spectral half-spectrum, 1 = physical samples
    17      1     uint8  dtype:  0 = complex128, 1 = complex64, 2 = float64, 3 = float32
    18      2     padding (zero)
    20      8     float64 box_length
    28      8     float64 time
    36      8     float64 dealias_fraction
    44      ...   data block, C order

Spectral blocks have shape ``(ncomp, n, n, n//2 + 1)``: axes ``x`` and ``y``
run over ``m = 0, 1, ..., n/2 - 1, -n/2, ..., -1`` and ``z`` over the
non-negative half ``m = 0, ..., n/2``; the omitted ``m_z < 0`` modes are the
complex conjugates of their mirror images.  Coefficients follow the forward
transform normalization ``f_hat = n^-3 sum f e^{-ik.x}``.  Physical blocks
have shape ``(ncomp, n, n, n)`` on the grid ``x_j = j L / n``.

A checkpoint is a state snapshot plus a JSON sidecar (same stem, ``.json``)
carrying the stepper configuration and step count.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .spectral import GridSpec, SolenoidalState, SpectralField, inverse_array
from .stepper import StepperConfig

__all__ = [
    "SnapshotHeader",
    "write_snapshot",
    "read_snapshot",
    "read_state",
    "save_checkpoint",
    "load_checkpoint",
]

MAGIC = b"HMSF"
VERSION = 1
_HEADER = struct.Struct("<4sIIIBB2xddd")
_DTYPES = {0: "<c16", 1: "<c8", 2: "<f8", 3: "<f4"}
_LAYOUTS = {0: "spectral", 1: "physical"}


@dataclass(frozen=True)
class SnapshotHeader:
    n: int
    ncomp: int
    layout: str
    dtype: str
    box_length: float
    time: float
    dealias_fraction: float

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.n, self.box_length, self.dealias_fraction)


def _components(obj) -> tuple[GridSpec, np.ndarray, float]:
    if isinstance(obj, SolenoidalState):
        return obj.grid, np.concatenate([obj.u.coeffs, obj.B.coeffs]), obj.time
    if isinstance(obj, SpectralField):
        return obj.grid, obj.coeffs, 0.0
    raise TypeError(f"cannot snapshot {type(obj).__name__}")


def write_snapshot(path, obj, layout: str = "spectral", single: bool = False,
                   time: float | None = None) -> Path:
    """Write a field or state to ``path`` in the documented binary layout."""
    grid, coeffs, t = _components(obj)
    if time is not None:
        t = float(time)
    if layout == "spectral":
        code = 1 if single else 0
        block = coeffs
    elif layout == "physical":
        code = 3 if single else 2
        block = inverse_array(grid, coeffs)
    else:
        raise ValueError(f"layout must be 'spectral' or 'physical', got {layout!r}")
    lay = 0 if layout == "spectral" else 1
    header = _HEADER.pack(MAGIC, VERSION, grid.n, block.shape[0], lay, code, grid.box_length, t,
                          grid.dealias_fraction)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(block, dtype=_DTYPES[code]).tobytes())
    return path


def read_snapshot(path) -> tuple[SnapshotHeader, np.ndarray]:
    """Header and data block (native complex128/float64) of a snapshot file."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, n, ncomp, lay, code, L, t, frac = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a snapshot file (magic {magic!r})")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    if lay not in _LAYOUTS or code not in _DTYPES:
        raise ValueError(f"{path}: unknown layout/dtype code {lay}/{code}")
    layout = _LAYOUTS[lay]
    shape = (ncomp, n, n, n // 2 + 1) if layout == "spectral" else (ncomp, n, n, n)
    dt = np.dtype(_DTYPES[code])
    expected = _HEADER.size + int(np.prod(shape)) * dt.itemsize
    if len(raw) != expected:
        raise ValueError(f"{path}: size {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype=dt, offset=_HEADER.size).reshape(shape)
    native = np.complex128 if dt.kind == "c" else np.float64
    header = SnapshotHeader(n, ncomp, layout, dt.name, L, t, frac)
    return header, data.astype(native)


def read_state(path) -> SolenoidalState:
    header, data = read_snapshot(path)
    if header.layout != "spectral" or header.ncomp != 6:
        raise ValueError(f"{path}: not a spectral state snapshot")
    grid = header.grid
    return SolenoidalState(SpectralField(grid, data[:3]), SpectralField(grid, data[3:]), header.time)


def save_checkpoint(path, state: SolenoidalState, cfg: StepperConfig, steps: int) -> Path:
    """Full-precision state snapshot plus a JSON sidecar for restarting."""
    path = Path(path)
    write_snapshot(path, state)
    meta = {"time": state.time, "steps": steps, "stepper": cfg.to_dict()}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def load_checkpoint(path) -> tuple[SolenoidalState, StepperConfig, int]:
    path = Path(path)
    state = read_state(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    st = meta["stepper"]
    cfg = StepperConfig(dt=st["dt"], scheme=st["scheme"], t_end=st["t_end"],
                        snapshot_times=tuple(st["snapshot_times"]), safety=st["safety"],
                        nonlinear=st["nonlinear"])
    return state, cfg, int(meta["steps"])
