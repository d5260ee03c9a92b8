"""Load and validate experimental artifacts into typed in-memory objects.

Three on-disk formats are supported: grayscale PNG (8/16-bit), raw float32
with a JSON sidecar, and CSV curves with a unit header row. Vendor microscope
formats are deliberately out of scope.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image


class IngestError(ValueError):
    pass


class UnsupportedFormat(IngestError):
    pass


class CorruptHeader(IngestError):
    pass


class NonFiniteData(IngestError):
    pass


class DimensionMismatch(IngestError):
    pass


class NonMonotoneAxis(IngestError):
    pass


class NegativeIntensity(IngestError):
    pass


@dataclass(frozen=True)
class ImageGrid:
    width: int
    height: int
    values: np.ndarray  # (height, width), float64 in [0, 1]
    pixel_size_nm: Optional[float] = None

    def __post_init__(self):
        if self.values.shape != (self.height, self.width):
            raise DimensionMismatch(
                f"values shape {self.values.shape} != ({self.height}, {self.width})"
            )
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteData("image contains non-finite values")
        if self.values.size and (self.values.min() < 0 or self.values.max() > 1):
            raise IngestError("image values outside [0, 1]")


@dataclass(frozen=True)
class HyperCube:
    nx: int
    ny: int
    nbands: int
    wavelengths: np.ndarray  # strictly increasing
    values: np.ndarray  # (ny, nx, nbands), non-negative
    axis_unit: str = "nm"

    def __post_init__(self):
        if len(self.wavelengths) != self.nbands:
            raise DimensionMismatch(
                f"{len(self.wavelengths)} wavelengths for {self.nbands} bands"
            )
        if self.values.shape != (self.ny, self.nx, self.nbands):
            raise DimensionMismatch(
                f"cube shape {self.values.shape} != ({self.ny}, {self.nx}, {self.nbands})"
            )
        if np.any(np.diff(self.wavelengths) <= 0):
            raise NonMonotoneAxis("wavelengths must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteData("cube contains non-finite values")
        if self.values.size and self.values.min() < 0:
            raise NegativeIntensity(f"negative intensity {self.values.min()}")


@dataclass(frozen=True)
class Curve1D:
    x: np.ndarray
    y: np.ndarray
    x_unit: str
    sigma: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise DimensionMismatch(f"|x|={len(self.x)} != |y|={len(self.y)}")
        if np.any(np.diff(self.x) <= 0):
            raise NonMonotoneAxis("x must be strictly increasing")
        if self.sigma is not None:
            if len(self.sigma) != len(self.x):
                raise DimensionMismatch("sigma length mismatch")
            if np.any(self.sigma <= 0):
                raise IngestError("sigma values must be positive")
        for a in (self.x, self.y):
            if not np.all(np.isfinite(a)):
                raise NonFiniteData("curve contains non-finite values")


def _normalize(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.zeros_like(values, dtype=np.float64)
    return (values.astype(np.float64) - lo) / (hi - lo)


def _read_sidecar(path: Path) -> dict:
    sidecar = path.with_suffix(path.suffix + ".json")
    if not sidecar.exists():
        raise CorruptHeader(f"missing sidecar {sidecar}")
    try:
        meta = json.loads(sidecar.read_text())
    except json.JSONDecodeError as e:
        raise CorruptHeader(f"sidecar is not valid JSON: {e}") from e
    if meta.get("dtype") != "f32":
        raise CorruptHeader(f"unsupported dtype {meta.get('dtype')!r}")
    if "shape" not in meta or not all(isinstance(n, int) and n > 0 for n in meta["shape"]):
        raise CorruptHeader("sidecar shape missing or invalid")
    return meta


def _read_raw(path: Path, shape: tuple[int, ...]) -> np.ndarray:
    data = np.fromfile(path, dtype="<f4")
    expected = math.prod(shape)
    if data.size != expected:
        raise DimensionMismatch(f"file holds {data.size} floats, sidecar declares {expected}")
    return data.reshape(shape).astype(np.float64)


def load_image(path: str | Path) -> ImageGrid:
    path = Path(path)
    if path.suffix.lower() == ".png":
        img = Image.open(path)
        if img.mode not in ("L", "I", "I;16"):
            raise UnsupportedFormat(f"PNG mode {img.mode}; only grayscale supported")
        arr = np.asarray(img, dtype=np.float64)
        pixel_size = None
    elif path.suffix.lower() in (".bin", ".raw", ".f32"):
        meta = _read_sidecar(path)
        if len(meta["shape"]) != 2:
            raise DimensionMismatch(f"image sidecar shape {meta['shape']} is not 2D")
        arr = _read_raw(path, tuple(meta["shape"]))
        pixel_size = meta.get("pixel_size_nm")
    else:
        raise UnsupportedFormat(f"unrecognized image extension {path.suffix!r}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteData("image file contains non-finite values")
    h, w = arr.shape
    return ImageGrid(width=w, height=h, values=_normalize(arr), pixel_size_nm=pixel_size)


def save_image(grid: ImageGrid, path: str | Path) -> None:
    path = Path(path)
    meta = {"dtype": "f32", "shape": [grid.height, grid.width]}
    if grid.pixel_size_nm is not None:
        meta["pixel_size_nm"] = grid.pixel_size_nm
    grid.values.astype("<f4").tofile(path)
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta))


def load_cube(path: str | Path) -> HyperCube:
    path = Path(path)
    meta = _read_sidecar(path)
    if len(meta["shape"]) != 3:
        raise DimensionMismatch(f"cube sidecar shape {meta['shape']} is not 3D")
    if "wavelengths" not in meta:
        raise CorruptHeader("cube sidecar lacks wavelengths")
    arr = _read_raw(path, tuple(meta["shape"]))
    if not np.all(np.isfinite(arr)):
        raise NonFiniteData("cube contains non-finite values")
    peak = float(arr.max()) if arr.size else 0.0
    floor = -1e-6 * max(peak, 0.0)
    if arr.size and arr.min() < floor:
        raise NegativeIntensity(f"cube minimum {arr.min()} below tolerance {floor}")
    arr = np.clip(arr, 0.0, None)
    ny, nx, nbands = arr.shape
    return HyperCube(
        nx=nx,
        ny=ny,
        nbands=nbands,
        wavelengths=np.asarray(meta["wavelengths"], dtype=np.float64),
        values=arr,
        axis_unit=meta.get("axis_unit", "nm"),
    )


def save_cube(cube: HyperCube, path: str | Path) -> None:
    path = Path(path)
    meta = {
        "dtype": "f32",
        "shape": [cube.ny, cube.nx, cube.nbands],
        "axis_unit": cube.axis_unit,
        "wavelengths": [float(w) for w in cube.wavelengths],
    }
    cube.values.astype("<f4").tofile(path)
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta))


def load_curve(path: str | Path) -> Curve1D:
    path = Path(path)
    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise CorruptHeader("empty curve file")
    header = [c.strip() for c in lines[0].split(",")]
    if len(header) not in (2, 3):
        raise UnsupportedFormat(f"curve CSV must have 2 or 3 columns, got {len(header)}")
    # header convention: first column "<name>_<unit>"
    x_unit = header[0].rsplit("_", 1)[-1] if "_" in header[0] else ""
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        cells = ln.split(",")
        if len(cells) != len(header):
            raise DimensionMismatch(f"line {i}: {len(cells)} cells, expected {len(header)}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError as e:
            raise CorruptHeader(f"line {i}: {e}") from e
    data = np.asarray(rows, dtype=np.float64)
    sigma = data[:, 2] if data.shape[1] == 3 else None
    return Curve1D(x=data[:, 0], y=data[:, 1], x_unit=x_unit, sigma=sigma)


def save_curve(curve: Curve1D, path: str | Path) -> None:
    path = Path(path)
    cols = [f"x_{curve.x_unit}" if curve.x_unit else "x", "y"]
    if curve.sigma is not None:
        cols.append("sigma")
    lines = [",".join(cols)]
    for i in range(len(curve.x)):
        row = [repr(float(curve.x[i])), repr(float(curve.y[i]))]
        if curve.sigma is not None:
            row.append(repr(float(curve.sigma[i])))
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")
