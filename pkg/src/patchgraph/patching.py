"""Fixed-grid patch partitioning and grid neighbourhoods."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import BoundsError, ConfigError, ShapeError

MIN_PATCHES = 4


class Connectivity(Enum):
    FOUR = 4
    EIGHT = 8

    @classmethod
    def parse(cls, value) -> "Connectivity":
        if isinstance(value, Connectivity):
            return value
        try:
            return cls(int(value))
        except (ValueError, TypeError):
            raise ConfigError(f"connectivity must be 4 or 8, got {value!r}") from None

    @property
    def offsets(self) -> tuple[tuple[int, int], ...]:
        four = ((-1, 0), (1, 0), (0, -1), (0, 1))
        if self is Connectivity.FOUR:
            return four
        return four + ((-1, -1), (-1, 1), (1, -1), (1, 1))


@dataclass
class PatchGrid:
    grid_rows: int
    grid_cols: int
    patch_size: int
    patches: np.ndarray  # (P, patch_size * patch_size * Ch), row-major over the grid

    @property
    def P(self) -> int:
        return self.grid_rows * self.grid_cols


def grid_shape(height: int, width: int, patch_size: int) -> tuple[int, int]:
    if patch_size < 1:
        raise ConfigError("patch_size must be >= 1")
    rows, cols = height // patch_size, width // patch_size
    if rows * cols < MIN_PATCHES:
        raise ConfigError(
            f"patch size {patch_size} on a {height}x{width} image yields {rows * cols} patches; "
            f"at least {MIN_PATCHES} patches per image are required"
        )
    return rows, cols


def partition_batch(images: np.ndarray, patch_size: int) -> tuple[np.ndarray, int, int]:
    """Split (N, H, W, Ch) images into (N, P, s*s*Ch) patch vectors; remainders are cropped."""
    images = np.asarray(images)
    if images.ndim == 3:
        images = images[..., None]
    if images.ndim != 4:
        raise ShapeError(f"expected (N, H, W, Ch) images, got {images.shape}")
    n, h, w, ch = images.shape
    rows, cols = grid_shape(h, w, patch_size)
    s = patch_size
    cropped = images[:, : rows * s, : cols * s, :]
    blocks = cropped.reshape(n, rows, s, cols, s, ch).transpose(0, 1, 3, 2, 4, 5)
    return blocks.reshape(n, rows * cols, s * s * ch), rows, cols


def partition(img: np.ndarray, patch_size: int) -> PatchGrid:
    img = np.asarray(img)
    if img.ndim == 2:
        img = img[..., None]
    if img.ndim != 3:
        raise ShapeError(f"expected (H, W, Ch) image, got {img.shape}")
    patches, rows, cols = partition_batch(img[None], patch_size)
    return PatchGrid(rows, cols, patch_size, patches[0])


def unpartition(grid: PatchGrid, channels: int = 1) -> np.ndarray:
    s = grid.patch_size
    blocks = grid.patches.reshape(grid.grid_rows, grid.grid_cols, s, s, channels)
    return blocks.transpose(0, 2, 1, 3, 4).reshape(grid.grid_rows * s, grid.grid_cols * s, channels)


def grid_neighbors(rows: int, cols: int, index: int, conn=Connectivity.FOUR) -> list[int]:
    conn = Connectivity.parse(conn)
    if not 0 <= index < rows * cols:
        raise BoundsError(f"patch index {index} outside grid of {rows * cols}")
    r, c = divmod(index, cols)
    out = []
    for dr, dc in conn.offsets:
        rr, cc = r + dr, c + dc
        if 0 <= rr < rows and 0 <= cc < cols:
            out.append(rr * cols + cc)
    return sorted(out)


def neighbors(g: PatchGrid, index: int, conn=Connectivity.FOUR) -> list[int]:
    return grid_neighbors(g.grid_rows, g.grid_cols, index, conn)
