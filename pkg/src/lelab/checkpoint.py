"""Binary checkpoints.

Layout (little-endian throughout)::

    magic    4 bytes   b"LELB"
    version  u32
    n1 n2 n3 u32 x 3
    t delta r  f64 x 3     (r is NaN when the datum was not regularized)
    eta      f64 x 3*n1*n2*n3   displacement eta - x, C order
    v        f64 x 3*n1*n2*n3
    q        f64 x n1*n2*n3

The particle map is stored as its displacement because eta itself is not
periodic; adding the grid coordinates back is exact.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import Grid, ScalarField, VectorField
from .lagrangian import LagrangianState

MAGIC = b"LELB"
VERSION = 1
_HEADER = struct.Struct("<4sI3I3d")
_F64 = np.dtype("<f8")


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Checkpoint:
    grid: Grid
    t: float
    delta: float
    r: float
    displacement: np.ndarray
    v: np.ndarray
    q: np.ndarray

    @classmethod
    def from_state(cls, state: LagrangianState, delta: float, r: float | None = None):
        if state.q is None:
            raise CheckpointError("state carries no pressure")
        return cls(state.grid, state.t, delta, math.nan if r is None else r,
                   state.displacement.values, state.v.values, state.q.values)

    def to_bytes(self) -> bytes:
        g = self.grid
        header = _HEADER.pack(MAGIC, VERSION, g.n1, g.n2, g.n3, self.t, self.delta, self.r)
        body = b"".join(np.ascontiguousarray(a, dtype=_F64).tobytes()
                        for a in (self.displacement, self.v, self.q))
        return header + body

    @classmethod
    def from_bytes(cls, data: bytes) -> Checkpoint:
        if len(data) < _HEADER.size:
            raise CheckpointError("truncated header")
        magic, version, n1, n2, n3, t, delta, r = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise CheckpointError(f"bad magic {magic!r}")
        if version != VERSION:
            raise CheckpointError(f"unsupported version {version}")
        grid = Grid(n1, n2, n3)
        size = n1 * n2 * n3
        expected = _HEADER.size + 7 * size * _F64.itemsize
        if len(data) != expected:
            raise CheckpointError(f"expected {expected} bytes, got {len(data)}")
        flat = np.frombuffer(data, dtype=_F64, offset=_HEADER.size).astype(float)
        disp = flat[:3 * size].reshape((3,) + grid.shape)
        v = flat[3 * size:6 * size].reshape((3,) + grid.shape)
        q = flat[6 * size:].reshape(grid.shape)
        return cls(grid, t, delta, r, disp, v, q)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_bytes(self.to_bytes())
        return path

    @classmethod
    def load(cls, path: str | Path) -> Checkpoint:
        return cls.from_bytes(Path(path).read_bytes())

    def state(self, omega0: VectorField) -> LagrangianState:
        """Rebuild a state; the initial vorticity is not stored and must be supplied."""
        g = self.grid
        return LagrangianState(t=self.t, displacement=VectorField(g, self.displacement),
                               v=VectorField(g, self.v), omega0=omega0,
                               q=ScalarField(g, self.q))
