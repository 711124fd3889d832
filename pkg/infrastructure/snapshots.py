"""
Snapshot storage for structure fields.

Each snapshot is a pair of files:
- <stem>.json: header (grid spec, field kind, time, step, array layout)
- <stem>.bin: raw payload, little-endian float64, each array row-major over
  the grid axes then the component indices, arrays concatenated in header order
"""

import json
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, Field

from infrastructure.grid import GridSpec


BYTE_ORDER = "little"
DTYPE = "<f8"
LAYOUT = "row-major over grid axes, then component indices"


class ArrayEntry(BaseModel):
    name: str
    shape: List[int]


class SnapshotHeader(BaseModel):
    """JSON header describing one snapshot payload."""

    grid: GridSpec
    kind: str = Field(description="Flow kind of the stored structure")
    t: float
    step: int = Field(ge=0)
    arrays: List[ArrayEntry]
    dtype: str = DTYPE
    byte_order: str = BYTE_ORDER
    layout: str = LAYOUT


def write_snapshot(directory: Path, stem: str, grid: GridSpec, kind: str, t: float, step: int,
                   arrays: Dict[str, np.ndarray]) -> Path:
    """
    Write a snapshot header and payload.

    Args:
        directory: Output directory (created if missing)
        stem: File stem, e.g. "snapshot_000100"
        grid: Grid of the field
        kind: Flow kind label
        t: Time
        step: Step counter
        arrays: Named arrays; each must start with grid.sizes

    Returns:
        Path of the JSON header
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = [ArrayEntry(name=name, shape=list(np.shape(values))) for name, values in arrays.items()]
    header = SnapshotHeader(grid=grid, kind=kind, t=float(t), step=int(step), arrays=entries)
    payload = b"".join(np.ascontiguousarray(values, dtype=DTYPE).tobytes(order="C") for values in arrays.values())
    (directory / f"{stem}.bin").write_bytes(payload)
    header_path = directory / f"{stem}.json"
    header_path.write_text(header.model_dump_json(indent=2))
    return header_path


def read_snapshot(header_path: Path) -> Tuple[SnapshotHeader, Dict[str, np.ndarray]]:
    """Read a snapshot written by write_snapshot."""
    header_path = Path(header_path)
    header = SnapshotHeader(**json.loads(header_path.read_text()))
    raw = np.frombuffer(header_path.with_suffix(".bin").read_bytes(), dtype=header.dtype)
    arrays: Dict[str, np.ndarray] = {}
    offset = 0
    for entry in header.arrays:
        count = int(np.prod(entry.shape)) if entry.shape else 1
        arrays[entry.name] = raw[offset: offset + count].reshape(entry.shape).astype(float)
        offset += count
    if offset != raw.size:
        raise ValueError(f"snapshot payload has {raw.size} values, header describes {offset}")
    return header, arrays
