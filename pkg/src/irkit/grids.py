"""2-D scalar maps on a fixed micron pitch, plus their file formats.

Every map the toolkit produces (golden IR drop, feature channels,
predictions) is a ScalarGrid: row-major float32 values tagged with a units
string. Three on-disk formats are supported:

* CSV   - one grid row per line, '.'-decimal floats
* PGM   - binary 8-bit, min-max normalized (visualization only, lossy)
* SGRD  - binary: magic "SGRD", u32 width, u32 height (little endian),
          width*height little-endian float32 values, then the units tag
          as UTF-8 to end of file
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
import struct

import numpy as np

SGRD_MAGIC = b"SGRD"


@dataclass(frozen=True)
class GridSpec:
    """Pixel raster: `pixel_pitch` microns per pixel, width x height pixels."""

    pixel_pitch: float = 1.0
    width: int = 1
    height: int = 1

    def __post_init__(self):
        if self.pixel_pitch <= 0:
            raise ValueError(f"pixel pitch must be positive, got {self.pixel_pitch}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.width}x{self.height}")

    def pixel_of_micron(self, x_um: float, y_um: float) -> tuple[int, int]:
        """Map a micron position to (col, row), clipped to the grid."""
        col = min(max(int(x_um / self.pixel_pitch), 0), self.width - 1)
        row = min(max(int(y_um / self.pixel_pitch), 0), self.height - 1)
        return col, row

    def centers_x(self) -> np.ndarray:
        return (np.arange(self.width) + 0.5) * self.pixel_pitch

    def centers_y(self) -> np.ndarray:
        return (np.arange(self.height) + 0.5) * self.pixel_pitch


@dataclass(frozen=True)
class ScalarGrid:
    """Row-major float32 map; `values` has shape (height, width)."""

    values: np.ndarray
    units: str = "dimensionless"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 2:
            raise ValueError(f"grid values must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def same_shape(self, other: "ScalarGrid") -> bool:
        return self.values.shape == other.values.shape


def write_csv(grid: ScalarGrid, path: str | Path) -> None:
    # %.9g round-trips float32 exactly.
    with open(path, "w", encoding="ascii", newline="\n") as f:
        for row in grid.values:
            f.write(",".join("%.9g" % x for x in row))
            f.write("\n")


def read_csv(path: str | Path, units: str = "dimensionless") -> ScalarGrid:
    rows = []
    with open(path, "r", encoding="ascii") as f:
        for line in f:
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split(",")])
    if not rows:
        raise ValueError(f"{path}: empty CSV grid")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"{path}: ragged CSV grid (row lengths {sorted(widths)})")
    return ScalarGrid(np.array(rows, dtype=np.float32), units=units)


def write_pgm(grid: ScalarGrid, path: str | Path) -> None:
    """Binary 8-bit PGM, min-max normalized; constant grids map to 0."""
    v = grid.values.astype(np.float64)
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        img = np.rint((v - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        img = np.zeros_like(v, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (grid.width, grid.height))
        f.write(img.tobytes())


def write_sgrd(grid: ScalarGrid, path: str | Path) -> None:
    with open(path, "wb") as f:
        f.write(SGRD_MAGIC)
        f.write(struct.pack("<II", grid.width, grid.height))
        f.write(grid.values.astype("<f4").tobytes())
        f.write(grid.units.encode("utf-8"))


def read_sgrd(path: str | Path) -> ScalarGrid:
    data = Path(path).read_bytes()
    if data[:4] != SGRD_MAGIC:
        raise ValueError(f"{path}: not an SGRD file (bad magic {data[:4]!r})")
    width, height = struct.unpack_from("<II", data, 4)
    nbytes = width * height * 4
    payload = data[12 : 12 + nbytes]
    if len(payload) != nbytes:
        raise ValueError(f"{path}: truncated SGRD payload")
    values = np.frombuffer(payload, dtype="<f4").reshape(height, width)
    units = data[12 + nbytes :].decode("utf-8") or "dimensionless"
    return ScalarGrid(values, units=units)


def read_grid(path: str | Path) -> ScalarGrid:
    """Load a grid by extension (.sgrd or .csv)."""
    p = Path(path)
    if p.suffix.lower() == ".sgrd":
        return read_sgrd(p)
    if p.suffix.lower() == ".csv":
        return read_csv(p)
    raise ValueError(f"{path}: unknown grid format (expected .sgrd or .csv)")


def bilinear_resize(grid: ScalarGrid, width: int, height: int) -> ScalarGrid:
    """Separable bilinear resample onto a width x height raster.

    Source and target pixels are sampled at their centers, so resizing to
    the same shape is the identity.
    """
    src = grid.values.astype(np.float64)
    sh, sw = src.shape
    # Target pixel centers expressed in source pixel coordinates.
    xs = (np.arange(width) + 0.5) * (sw / width) - 0.5
    ys = (np.arange(height) + 0.5) * (sh / height) - 0.5
    out = np.empty((sh, width))
    for i in range(sh):
        out[i] = np.interp(xs, np.arange(sw), src[i])
    out2 = np.empty((height, width))
    for j in range(width):
        out2[:, j] = np.interp(ys, np.arange(sh), out[:, j])
    return ScalarGrid(out2.astype(np.float32), units=grid.units)
