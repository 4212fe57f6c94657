"""Per-AU spatial attention maps from facial landmarks.

Each action unit owns a group of the 68 landmarks (plus an optional
displacement).  An ellipse is fitted to the group from its second moments,
rasterized onto the feature grid, smoothed with a truncated Gaussian, and
max-rescaled so the map acts as a soft spatial gate in [0, 1].

Coordinates are normalized to [0, 1]^2 with x rightward and y downward;
map arrays are indexed [row, col] = [y, x].
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from aurel.errors import ContractError

GRID = 14
N_LANDMARKS = 68
# smallest semi-axis, in grid cells: guarantees single-landmark regions
# still cover at least one cell center
MIN_SEMI_AXIS_CELLS = 1.0
SMOOTH_SIGMA_CELLS = 3.0


@dataclass(frozen=True)
class LandmarkSet:
    """68 (x, y) points in normalized image coordinates."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (N_LANDMARKS, 2):
            raise ContractError(f"expected {N_LANDMARKS} landmark pairs, got shape {pts.shape}")
        if np.any(pts < 0.0) or np.any(pts > 1.0):
            raise ContractError("landmark coordinates must lie in [0, 1]")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class AuRegionSpec:
    """One AU's landmark group and optional displacement."""

    au_index: int
    landmark_ids: tuple[int, ...]
    offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.landmark_ids:
            raise ContractError("landmark_ids must be non-empty")
        for i in self.landmark_ids:
            if not 0 <= i < N_LANDMARKS:
                raise ContractError(f"landmark id {i} out of range [0, {N_LANDMARKS})")


@dataclass(frozen=True)
class Ellipse:
    center: tuple[float, float]
    semi_axes: tuple[float, float]  # (major, minor)
    rotation: float  # major-axis angle, radians


@dataclass(frozen=True)
class AttentionMap:
    """K attention maps on the GRID x GRID feature lattice."""

    maps: np.ndarray  # (K, GRID, GRID)

    def __post_init__(self):
        m = np.asarray(self.maps, dtype=np.float64)
        if m.ndim != 3 or m.shape[1:] != (GRID, GRID):
            raise ContractError(f"maps must be (K, {GRID}, {GRID}), got {m.shape}")
        object.__setattr__(self, "maps", m)

    @property
    def k(self) -> int:
        return self.maps.shape[0]


def fit_ellipse(points: np.ndarray, min_semi_axis: float = MIN_SEMI_AXIS_CELLS / GRID) -> Ellipse:
    """Fit an ellipse to points via their centroid and second moments.

    The semi-axes are sqrt(2 * eigenvalue) of the covariance (exact for
    points uniform on an ellipse boundary), floored at ``min_semi_axis``;
    a single point degenerates to a circle of the floor radius.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise ContractError("fit_ellipse requires at least one point")
    center = pts.mean(axis=0)
    d = pts - center
    cxx = float((d[:, 0] ** 2).mean())
    cyy = float((d[:, 1] ** 2).mean())
    cxy = float((d[:, 0] * d[:, 1]).mean())
    half_trace = 0.5 * (cxx + cyy)
    spread = np.sqrt(max(0.25 * (cxx - cyy) ** 2 + cxy**2, 0.0))
    lam_max = max(half_trace + spread, 0.0)
    lam_min = max(half_trace - spread, 0.0)
    if spread == 0.0:
        rotation = 0.0
    else:
        rotation = 0.5 * np.arctan2(2.0 * cxy, cxx - cyy)
    major = max(np.sqrt(2.0 * lam_max), min_semi_axis)
    minor = max(np.sqrt(2.0 * lam_min), min_semi_axis)
    return Ellipse(center=(float(center[0]), float(center[1])), semi_axes=(major, minor), rotation=float(rotation))


def _gauss_kernel_1d(sigma: float) -> np.ndarray:
    radius = int(np.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return k / k.sum()


def _smooth2d(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian with edge-replicate padding.

    Equals the direct 2-D convolution of the once-padded image because the
    kernel is an exact outer product; replicate padding keeps constant
    inputs constant (each 1-D kernel sums to 1).
    """
    k = _gauss_kernel_1d(sigma)
    r = (len(k) - 1) // 2
    padded = np.pad(img, r, mode="edge")
    rows = sliding_window_view(padded, len(k), axis=1) @ k
    cols = sliding_window_view(rows.T, len(k), axis=1) @ k
    return cols.T


def rasterize_and_smooth(e: Ellipse, grid: int = GRID, sigma: float = SMOOTH_SIGMA_CELLS) -> np.ndarray:
    """Binary ellipse-interior mask on the grid, Gaussian-smoothed (sigma in
    grid cells, truncated at 3 sigma, kernel normalized to sum 1), then
    rescaled so the maximum cell is exactly 1."""
    cx, cy = e.center
    if not (0.0 <= cx <= 1.0 and 0.0 <= cy <= 1.0):
        raise ContractError("ellipse center must lie in [0, 1]^2")
    a, b = e.semi_axes
    centers = (np.arange(grid) + 0.5) / grid
    dx = centers[None, :] - cx  # column offsets
    dy = centers[:, None] - cy  # row offsets
    cos_t, sin_t = np.cos(e.rotation), np.sin(e.rotation)
    u = dx * cos_t + dy * sin_t
    v = -dx * sin_t + dy * cos_t
    mask = ((u / a) ** 2 + (v / b) ** 2 <= 1.0).astype(np.float64)
    smoothed = _smooth2d(mask, sigma)
    peak = smoothed.max()
    if peak <= 0.0:
        # unreachable: the floor radius always covers >= 1 cell center
        raise ContractError("ellipse mask is empty")
    return smoothed / peak


def build_attention(landmarks: LandmarkSet, specs: list[AuRegionSpec]) -> AttentionMap:
    """K per-AU maps: fit, rasterize, smooth each spec's landmark group.

    Pure function of its inputs: identical inputs give identical maps.
    The fitted center is clamped into [0, 1]^2 in case offsets push a group
    outside the frame.
    """
    if not specs:
        raise ContractError("need at least one AU region spec")
    maps = np.empty((len(specs), GRID, GRID), dtype=np.float64)
    for slot, spec in enumerate(specs):
        pts = landmarks.points[list(spec.landmark_ids)] + np.asarray(spec.offset, dtype=np.float64)
        e = fit_ellipse(pts)
        e = Ellipse(
            center=(min(max(e.center[0], 0.0), 1.0), min(max(e.center[1], 0.0), 1.0)),
            semi_axes=e.semi_axes,
            rotation=e.rotation,
        )
        maps[slot] = rasterize_and_smooth(e)
    return AttentionMap(maps=maps)


def ellipse_bbox_cells(e: Ellipse, grid: int = GRID) -> tuple[int, int, int, int]:
    """Bounding box of the ellipse in cell indices: (row0, row1, col0, col1), inclusive."""
    a, b = e.semi_axes
    cos_t, sin_t = np.cos(e.rotation), np.sin(e.rotation)
    extent_x = np.sqrt((a * cos_t) ** 2 + (b * sin_t) ** 2)
    extent_y = np.sqrt((a * sin_t) ** 2 + (b * cos_t) ** 2)
    cx, cy = e.center
    col0 = int(np.clip(np.floor((cx - extent_x) * grid), 0, grid - 1))
    col1 = int(np.clip(np.ceil((cx + extent_x) * grid) - 1, 0, grid - 1))
    row0 = int(np.clip(np.floor((cy - extent_y) * grid), 0, grid - 1))
    row1 = int(np.clip(np.ceil((cy + extent_y) * grid) - 1, 0, grid - 1))
    return row0, row1, col0, col1


# ------------------------------------------------------------------ file IO

LANDMARK_HEADER = [f"{axis}{i}" for i in range(N_LANDMARKS) for axis in ("x", "y")]


def write_landmarks_csv(path: str | Path, landmarks: np.ndarray) -> None:
    """One row per image, 136 columns x0,y0,...,x67,y67."""
    arr = np.asarray(landmarks, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[1:] != (N_LANDMARKS, 2):
        raise ContractError(f"landmarks must be (N, {N_LANDMARKS}, 2), got {arr.shape}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LANDMARK_HEADER)
        for row in arr:
            writer.writerow([repr(v) for v in row.reshape(-1)])


def read_landmarks_csv(path: str | Path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != LANDMARK_HEADER:
            raise ContractError(f"{path}: landmark CSV header mismatch")
        rows = [[float(v) for v in row] for row in reader]
    return np.asarray(rows, dtype=np.float64).reshape(-1, N_LANDMARKS, 2)


def write_region_specs_csv(path: str | Path, specs: list[AuRegionSpec]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["au_index", "landmark_ids", "dx", "dy"])
        for s in specs:
            writer.writerow([s.au_index, ";".join(str(i) for i in s.landmark_ids), s.offset[0], s.offset[1]])


def read_region_specs_csv(path: str | Path) -> list[AuRegionSpec]:
    """Load AU region specs, sorted by au_index; indices must be 0..K-1."""
    specs = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["au_index", "landmark_ids", "dx", "dy"]:
            raise ContractError(f"{path}: region spec CSV header mismatch")
        for row in reader:
            if not row:
                continue
            specs.append(
                AuRegionSpec(
                    au_index=int(row[0]),
                    landmark_ids=tuple(int(t) for t in row[1].split(";")),
                    offset=(float(row[2]), float(row[3])),
                )
            )
    specs.sort(key=lambda s: s.au_index)
    if [s.au_index for s in specs] != list(range(len(specs))):
        raise ContractError(f"{path}: au_index values must cover 0..K-1 exactly")
    return specs


def default_region_specs(k: int) -> list[AuRegionSpec]:
    """The shipped landmark-group files for the supported AU counts."""
    data_dir = Path(__file__).parent / "data"
    path = data_dir / f"au_regions_k{k}.csv"
    if not path.exists():
        raise ContractError(f"no shipped AU region file for K={k} (have K=8, K=12)")
    return read_region_specs_csv(path)
