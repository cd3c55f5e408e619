"""Depth ordering of Gaussians per tile or per group.

Both pipelines share one deterministic total order: ascending depth with ties
broken by ascending gaussian id. Restricting a group's sorted list to any
tile therefore reproduces the tile's own sorted list element for element,
which is what makes the grouped pipeline lossless.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SortedList:
    """Depth-sorted entries owned by one tile or group."""

    owner: int
    ids: np.ndarray       # (n,) gaussian ids, (depth, id)-ordered
    depths: np.ndarray    # (n,) float32, ascending
    masks: np.ndarray | None = None  # (n,) uint16, grouped pipeline only

    def __len__(self) -> int:
        return self.ids.shape[0]

    @property
    def entries(self) -> list:
        return list(zip(self.ids.tolist(), self.depths.tolist()))


@dataclass(frozen=True)
class CellLists:
    """CSR layout of sorted per-cell lists over a full cell grid.

    offsets has n_cells + 1 entries; rows of cell k live at
    order[offsets[k]:offsets[k+1]] and index the projected batch.
    """

    n_cells: int
    offsets: np.ndarray   # (n_cells + 1,) int64
    rows: np.ndarray      # (total,) int32 batch row indices
    masks: np.ndarray | None = None  # (total,) uint16

    @property
    def total_entries(self) -> int:
        return int(self.rows.shape[0])

    def sort_ops(self) -> float:
        """Sum over lists of n * log2(max(n, 2)), the comparison-sort work."""
        counts = np.diff(self.offsets)
        counts = counts[counts > 0].astype(np.float64)
        return float(np.sum(counts * np.log2(np.maximum(counts, 2.0))))

    def list_for(self, cell: int, ids: np.ndarray, depths: np.ndarray) -> SortedList:
        lo, hi = int(self.offsets[cell]), int(self.offsets[cell + 1])
        sel = self.rows[lo:hi]
        return SortedList(owner=cell, ids=ids[sel], depths=depths[sel],
                          masks=None if self.masks is None else self.masks[lo:hi])


def sort_cells(pair_rows: np.ndarray, pair_cells: np.ndarray, depths: np.ndarray,
               n_cells: int, masks: np.ndarray | None = None) -> CellLists:
    """Build per-cell sorted lists from (row, cell) assignment pairs.

    Entries within each cell come out ascending by (depth, row). Rows index
    the projected batch, which preserves scene order, so the row tie-break
    equals the gaussian-id tie-break.
    """
    order = np.lexsort((pair_rows, depths[pair_rows], pair_cells))
    cells_sorted = pair_cells[order]
    offsets = np.zeros(n_cells + 1, dtype=np.int64)
    np.add.at(offsets, cells_sorted + 1, 1)
    np.cumsum(offsets, out=offsets)
    return CellLists(n_cells=n_cells, offsets=offsets,
                     rows=pair_rows[order].astype(np.int32),
                     masks=None if masks is None else masks[order])


def _as_sorted_lists(assignments, depths, masks=None) -> dict:
    out = {}
    for cell, ids in assignments.items():
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size == 0:
            continue
        d = np.array([depths[int(i)] for i in ids], dtype=np.float32)
        order = np.lexsort((ids, d))
        cell_masks = None
        if masks is not None:
            cell_masks = np.asarray(masks[cell], dtype=np.uint16)[order]
            if (cell_masks == 0).any():
                raise ValueError(f"cell {cell}: zero mask in sorted list")
        out[cell] = SortedList(owner=int(cell), ids=ids[order], depths=d[order],
                               masks=cell_masks)
    return out


def sort_per_tile(assignments, depths) -> dict:
    """Map {tile: gaussian ids} + {id: depth} to {tile: SortedList}."""
    return _as_sorted_lists(assignments, depths)


def sort_per_group(assignments, depths) -> dict:
    """Grouped variant: assignments maps group -> sequence of (id, mask).

    Masks permute in lockstep with the depth order.
    """
    ids_only = {}
    masks = {}
    for group, entries in assignments.items():
        pairs = list(entries)
        ids_only[group] = [int(i) for i, _ in pairs]
        masks[group] = [int(m) for _, m in pairs]
    return _as_sorted_lists(ids_only, depths, masks)
