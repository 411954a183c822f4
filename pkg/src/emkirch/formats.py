"""On-disk artifact formats: delimited text, EMKM binary grids, manifests.

The EMKM binary layout (version 1, everything little-endian):

    bytes 0-3   magic "EMKM"
    u32         version = 1
    u32         kind (1 c3-vector, 2 c3x3-tensor, 3 c2-vector,
                      4 c2x2-block, 5 real scalar)
    u32         rank D (1..3)
    D x u32     counts, first axis slowest (row-major point order)
    3 x f64     grid origin
    D x 3 x f64 axis unit vectors
    D x f64     spacings
    payload     per point, per component: f64 (re, im) interleaved for
                complex kinds, a single f64 for kind 5; components of
                matrix kinds are row-major

Text grids carry the same metadata in '#'-prefixed header lines followed
by one tab-separated row per point.  Full details in docs/formats.md.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .scene import ImagingGrid

MAGIC = b"EMKM"
BINARY_VERSION = 1
TEXT_SCHEMA_VERSION = 1

_KINDS = {
    (3,): 1,
    (3, 3): 2,
    (2,): 3,
    (2, 2): 4,
    (): 5,
}
_KIND_NAMES = {1: "cvec3", 2: "cmat3", 3: "cvec2", 4: "cmat2", 5: "scalar"}
_KIND_SHAPES = {v: k for k, v in _KINDS.items()}


def _kind_of(values: np.ndarray) -> int:
    comp = values.shape[1:]
    if comp not in _KINDS:
        raise ValueError(f"unsupported value component shape {comp}")
    kind = _KINDS[comp]
    if kind == 5 and np.iscomplexobj(values):
        raise ValueError("scalar grids must be real")
    return kind


def write_grid_binary(path, grid: ImagingGrid, values: np.ndarray) -> None:
    values = np.asarray(values)
    kind = _kind_of(values)
    if values.shape[0] != grid.n_points:
        raise ValueError("one value per grid point required")
    d = grid.ndim
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<3I", BINARY_VERSION, kind, d))
        fh.write(struct.pack(f"<{d}I", *grid.counts))
        fh.write(np.asarray(grid.origin, "<f8").tobytes())
        fh.write(np.asarray(grid.axes, "<f8").tobytes())
        fh.write(np.asarray(grid.spacings, "<f8").tobytes())
        if kind == 5:
            fh.write(np.ascontiguousarray(values, "<f8").tobytes())
        else:
            fh.write(np.ascontiguousarray(values, "<c16").tobytes())


def read_grid_binary(path):
    """Read an EMKM file back as (grid, values)."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError(f"{path}: not an EMKM file")
        version, kind, d = struct.unpack("<3I", fh.read(12))
        if version != BINARY_VERSION:
            raise ValueError(f"{path}: unsupported EMKM version {version}")
        if kind not in _KIND_SHAPES or not 1 <= d <= 3:
            raise ValueError(f"{path}: invalid kind/rank")
        counts = struct.unpack(f"<{d}I", fh.read(4 * d))
        origin = np.frombuffer(fh.read(24), "<f8")
        axes = np.frombuffer(fh.read(24 * d), "<f8").reshape(d, 3)
        spacings = np.frombuffer(fh.read(8 * d), "<f8")
        grid = ImagingGrid(origin, axes, spacings, counts)
        comp = _KIND_SHAPES[kind]
        n_comp = int(np.prod(comp, dtype=int)) if comp else 1
        if kind == 5:
            payload = np.frombuffer(fh.read(8 * grid.n_points), "<f8")
        else:
            payload = np.frombuffer(fh.read(16 * grid.n_points * n_comp), "<c16")
        return grid, payload.reshape((grid.n_points,) + comp).copy()


def _component_labels(kind: int):
    if kind == 1:
        tags = ["x", "y", "z"]
    elif kind == 2:
        tags = [f"{i}{j}" for i in range(1, 4) for j in range(1, 4)]
    elif kind == 3:
        tags = ["x", "y"]
    elif kind == 4:
        tags = [f"{i}{j}" for i in range(1, 3) for j in range(1, 3)]
    else:
        return ["value"]
    return [f"{part}_{t}" for t in tags for part in ("re", "im")]


def write_grid_text(path, grid: ImagingGrid, values: np.ndarray, label: str) -> None:
    """Delimited text grid: header rows, then x y z and value columns."""
    values = np.asarray(values)
    kind = _kind_of(values)
    pts = grid.points()
    flat = values.reshape(grid.n_points, -1)
    with open(path, "w") as fh:
        fh.write(f"# emkirch grid text v{TEXT_SCHEMA_VERSION}\n")
        fh.write(f"# label: {label}\n")
        fh.write(f"# kind: {_KIND_NAMES[kind]}\n")
        fh.write(f"# counts: {' '.join(str(c) for c in grid.counts)}\n")
        fh.write("\t".join(["x", "y", "z"] + _component_labels(kind)) + "\n")
        for g in range(grid.n_points):
            row = [f"{v:.17g}" for v in pts[g]]
            if kind == 5:
                row.append(f"{flat[g, 0]:.17g}")
            else:
                for v in flat[g]:
                    row.append(f"{v.real:.17g}")
                    row.append(f"{v.imag:.17g}")
            fh.write("\t".join(row) + "\n")


def write_profile_text(path, positions, magnitudes, label: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"# emkirch profile v{TEXT_SCHEMA_VERSION}\n")
        fh.write(f"# label: {label}\n")
        fh.write("offset\tmagnitude\n")
        for p, m in zip(positions, magnitudes):
            fh.write(f"{p:.17g}\t{m:.17g}\n")


def write_report_text(path, entries: dict) -> None:
    with open(path, "w") as fh:
        fh.write(f"# emkirch report v{TEXT_SCHEMA_VERSION}\n")
        for key, value in entries.items():
            fh.write(f"{key}: {value}\n")


def config_hash(config: dict) -> str:
    """Deterministic hash of a (JSON-serializable) config structure."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


@dataclass
class RunManifest:
    """Record of everything a run produced."""

    config_hash: str
    backend: str
    files: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def add_file(self, path: str, kind: str, schema_version: int) -> None:
        self.files.append(
            {"path": path, "kind": kind, "schema_version": schema_version}
        )

    def write(self, path) -> None:
        payload = {
            "manifest_version": 1,
            "config_hash": self.config_hash,
            "backend": self.backend,
            "files": self.files,
            "timings_seconds": self.timings,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
