"""Cubical pairs on boxes and their relative homology over GF(2).

A box at resolution R is carved into R cells per axis.  The elementary
cube complex is indexed by an integer lattice with 2R+1 coordinates per
axis: even coordinates are vertex slabs, odd coordinates are open
intervals, and a cell's dimension is its number of odd coordinates.
Every mask in this module is a boolean array over that lattice.

The convention buys three things.  Faces of a cell are its coordinate
neighbors (odd -> even, one axis at a time).  The 3^n sample stencil of
a cell coincides with the lattice points the cell covers, so a sampled
max over every cell is a separable rolling maximum.  And closedness of a
mask reduces to two slice comparisons per axis.

Relative homology of a pair of closed masks B subset A is computed from
the quotient chain complex: cells of A not in B, boundary entries into B
dropped, ranks over GF(2) via the bitpacked kernels in ``_backend``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import gf2_rank, pack_columns

EXCISION_RADIUS_CELLS = 2


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by per-axis bounds."""

    lo: tuple
    hi: tuple

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)


def box_around(center, radius: float) -> Box:
    """Isotropic box of half-width ``radius`` centered at ``center``."""
    c = np.atleast_1d(np.asarray(center, dtype=float))
    if radius <= 0:
        raise ValueError("box radius must be positive")
    return Box(tuple(c - radius), tuple(c + radius))


@dataclass(frozen=True)
class CubicalPair:
    """Sublevel complex and excised part of it, over a common lattice.

    Masks are boolean arrays of shape (2*resolution+1,)**n.  Both must be
    closed complexes and ``excision_mask`` must be contained in
    ``subcomplex_mask``; ``validate_pair`` enforces this.
    """

    box: Box
    resolution: int
    subcomplex_mask: np.ndarray
    excision_mask: np.ndarray
    level: float


@dataclass(frozen=True)
class BettiVector:
    """GF(2) homology ranks by degree, plus a two-resolution stability bit."""

    ranks: tuple
    stable: bool = True

    def __getitem__(self, q: int) -> int:
        if 0 <= q < len(self.ranks):
            return self.ranks[q]
        return 0

    @property
    def euler(self) -> int:
        return int(sum((-1) ** q * r for q, r in enumerate(self.ranks)))


def lattice_axes(box: Box, resolution: int) -> list:
    """Per-axis sample coordinates at half-cell spacing, 2R+1 points."""
    if resolution < 1:
        raise ValueError("resolution must be at least 1 cell per axis")
    return [
        np.linspace(box.lo[i], box.hi[i], 2 * resolution + 1)
        for i in range(box.n)
    ]


def lattice_points(box: Box, resolution: int) -> np.ndarray:
    """Full sample lattice, shape (2R+1,)*n + (n,)."""
    axes = lattice_axes(box, resolution)
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack(grids, axis=-1)


def cell_dimensions(shape) -> np.ndarray:
    """Per-cell dimension: the number of odd lattice coordinates."""
    dims = np.zeros(shape, dtype=np.int8)
    for ax, size in enumerate(shape):
        parity = (np.arange(size) % 2).astype(np.int8)
        view = [1] * len(shape)
        view[ax] = size
        dims = dims + parity.reshape(view)
    return dims


def sampled_cell_max(values: np.ndarray) -> np.ndarray:
    """Max of lattice values over each cell's closed point set.

    Axis-by-axis rolling maximum at odd coordinates; the composition over
    axes yields the max over the full 3^n stencil (even axes contribute
    just the cell's own slab).  Writing only odd slots while reading even
    ones keeps the in-place update sound.
    """
    out = np.array(values, dtype=float, copy=True)
    for ax in range(out.ndim):
        arr = np.moveaxis(out, ax, -1)
        mids = arr[..., 1::2]
        np.maximum(mids, arr[..., :-1:2], out=mids)
        np.maximum(mids, arr[..., 2::2], out=mids)
    return out


def cell_distances(box: Box, resolution: int, point) -> np.ndarray:
    """Euclidean distance from ``point`` to each cell's closed box."""
    point = np.atleast_1d(np.asarray(point, dtype=float))
    axes = lattice_axes(box, resolution)
    n = box.n
    d2 = np.zeros((1,) * n)
    for i in range(n):
        t = axes[i]
        size = t.size
        lo_edge = np.empty(size)
        hi_edge = np.empty(size)
        lo_edge[0::2] = t[0::2]
        hi_edge[0::2] = t[0::2]
        lo_edge[1::2] = t[0:-1:2]
        hi_edge[1::2] = t[2::2]
        gap = np.maximum(np.maximum(lo_edge - point[i], point[i] - hi_edge), 0.0)
        view = [1] * n
        view[i] = size
        d2 = d2 + (gap**2).reshape(view)
    return np.sqrt(d2)


def is_closed_mask(mask: np.ndarray) -> bool:
    """True when every cell in the mask has both faces per odd axis."""
    for ax in range(mask.ndim):
        m = np.moveaxis(mask, ax, -1)
        odd = m[..., 1::2]
        if np.any(odd & ~m[..., :-1:2]) or np.any(odd & ~m[..., 2::2]):
            return False
    return True


def validate_pair(pair: CubicalPair) -> None:
    shape = tuple(2 * pair.resolution + 1 for _ in range(pair.box.n))
    if pair.subcomplex_mask.shape != shape or pair.excision_mask.shape != shape:
        raise ValueError(
            f"inconsistent masks: expected lattice shape {shape}, got "
            f"{pair.subcomplex_mask.shape} and {pair.excision_mask.shape}"
        )
    if np.any(pair.excision_mask & ~pair.subcomplex_mask):
        raise ValueError("inconsistent masks: excised cells outside the subcomplex")
    if not is_closed_mask(pair.subcomplex_mask):
        raise ValueError("inconsistent masks: subcomplex is not a closed complex")
    if not is_closed_mask(pair.excision_mask):
        raise ValueError("inconsistent masks: excised part is not a closed complex")


def _boundary_rank(ids_q, ordinal, strides, multi, n_rows) -> int:
    """GF(2) rank of the quotient boundary matrix out of the given q-cells."""
    if ids_q.size == 0 or n_rows == 0:
        return 0
    n_axes = strides.size
    faces = np.full((ids_q.size, 2 * n_axes), -1, dtype=np.int64)
    for ax in range(n_axes):
        odd = (multi[:, ax] % 2) == 1
        faces[odd, 2 * ax] = ids_q[odd] - strides[ax]
        faces[odd, 2 * ax + 1] = ids_q[odd] + strides[ax]
    face_ord = np.where(faces >= 0, ordinal[np.maximum(faces, 0)], -1)
    cols = [row[row >= 0] for row in face_ord]
    return gf2_rank(pack_columns(cols, n_rows))


def relative_homology_z2(pair: CubicalPair) -> BettiVector:
    """Homology ranks of (subcomplex, excised part) over GF(2).

    Works on the quotient complex: chains are cells of the subcomplex not
    excised, and boundary entries landing in the excised part vanish.
    rank H_q = dim C_q - rank d_q - rank d_{q+1}.
    """
    validate_pair(pair)
    n = pair.box.n
    shape = pair.subcomplex_mask.shape
    active = pair.subcomplex_mask & ~pair.excision_mask
    dims = cell_dimensions(shape)

    flat_active = active.ravel()
    flat_dims = dims.ravel()
    ordinal = np.full(flat_active.size, -1, dtype=np.int64)
    ids_by_dim = []
    for q in range(n + 1):
        ids = np.flatnonzero(flat_active & (flat_dims == q))
        ordinal[ids] = np.arange(ids.size)
        ids_by_dim.append(ids)

    strides = np.array(
        [int(np.prod(shape[i + 1 :], dtype=np.int64)) for i in range(n)],
        dtype=np.int64,
    )
    bd_rank = [0] * (n + 2)
    for q in range(1, n + 1):
        ids_q = ids_by_dim[q]
        multi = (
            np.array(np.unravel_index(ids_q, shape)).T
            if ids_q.size
            else np.zeros((0, n), dtype=np.int64)
        )
        bd_rank[q] = _boundary_rank(
            ids_q, ordinal, strides, multi, ids_by_dim[q - 1].size
        )

    ranks = tuple(
        int(ids_by_dim[q].size - bd_rank[q] - bd_rank[q + 1]) for q in range(n + 1)
    )
    return BettiVector(ranks=ranks, stable=True)


def sublevel_mask(values: np.ndarray, level: float) -> np.ndarray:
    """Cells whose sampled max stays at or below the level, with slack.

    The slack absorbs roundoff in level-set membership; a cell's sample
    set contains every face's sample set, so the mask is closed by
    construction.
    """
    cell_max = sampled_cell_max(values)
    scale = max(1.0, float(np.abs(values).max()))
    return cell_max <= level + 1e-12 * scale


def excision_ball_mask(
    box: Box, resolution: int, center, radius_cells: int = EXCISION_RADIUS_CELLS
) -> np.ndarray:
    """Cells at or beyond ``radius_cells`` cell widths from the center.

    The complement (the kept window) is an open ball, so the excised set
    shares the window's frontier and stays a closed complex: a face's box
    is contained in its cell's, hence at least as far from the center.
    """
    h = float(np.max(box.widths) / resolution)
    dist = cell_distances(box, resolution, center)
    return dist >= radius_cells * h
