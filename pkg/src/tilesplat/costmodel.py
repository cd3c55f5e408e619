"""Analytical cycle and traffic model of the grouped-sorting accelerator.

Relative, not cycle-accurate: the model maps measured work counters onto the
throughputs of the functional units and credits the grouped pipeline for
overlapping bitmask generation with the group sort (max instead of sum). It
reproduces orderings between configurations, not absolute silicon numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

from .pipeline import WorkCounters


class CostModelError(ValueError):
    """Counter/mode mismatch or invalid parameters."""


@dataclass(frozen=True)
class CostParams:
    pm_lanes: int = 4                      # parallel preprocessing lanes
    tile_check_units: int = 4              # rectangle tests per cycle
    sort_comparators: int = 16
    mask_filter_width: int = 8             # AND-filtered entries per cycle
    raster_units: int = 16
    dram_bandwidth: float = 51.2e9         # bytes/s
    bytes_per_gaussian_feature: int = 48   # depth + center + cov + rgb + opacity

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise CostModelError(f"cost parameter {f.name} must be positive")

    @classmethod
    def from_json(cls, path) -> "CostParams":
        with open(path) as fh:
            raw = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise CostModelError(f"{path}: unknown cost parameters {sorted(unknown)}")
        return cls(**raw)


@dataclass
class CostReport:
    cycles_preprocess: float
    cycles_bitmask: float
    cycles_sort: float
    cycles_raster: float
    cycles_total: float
    dram_bytes: float
    speedup_vs: dict = field(default_factory=dict)

    def speedup_against(self, label: str, other: "CostReport") -> float:
        ratio = other.cycles_total / self.cycles_total
        self.speedup_vs[label] = ratio
        return ratio


def estimate(counters: WorkCounters, mode, params: CostParams = CostParams()) -> CostReport:
    """Map one render's work counters to estimated accelerator cycles.

    Grouped mode overlaps the bitmask and sort terms; baseline mode has no
    bitmask or mask-filter work at all.
    """
    mode_name = mode.value if hasattr(mode, "value") else str(mode)
    if mode_name != counters.pipeline:
        raise CostModelError(f"counters came from the {counters.pipeline!r} pipeline "
                             f"but mode {mode_name!r} was requested")

    cycles_preprocess = (counters.gaussians_after_cull / params.pm_lanes
                         + counters.identification_tests / params.tile_check_units)
    cycles_sort = counters.sort_ops / params.sort_comparators

    if mode_name == "grouped":
        # one tile-check unit emits a full 16-bit mask per entry per cycle
        # (the per-tile tests inside a group are parallel comparisons), and
        # the mask filter streams each sorted group entry once, broadcasting
        # the AND against all tile locations of the group
        cycles_bitmask = counters.group_pairs_identified / params.tile_check_units
        filter_stream = counters.group_entries
        middle = max(cycles_bitmask, cycles_sort)
        streamed = counters.group_entries
    else:
        cycles_bitmask = 0.0
        filter_stream = 0
        middle = cycles_sort
        streamed = counters.tile_entries

    cycles_raster = (counters.alpha_computations / params.raster_units
                     + filter_stream / params.mask_filter_width)

    total = cycles_preprocess + middle + cycles_raster
    dram_bytes = (streamed * params.bytes_per_gaussian_feature
                  + counters.pixels * 3)
    return CostReport(cycles_preprocess=cycles_preprocess,
                      cycles_bitmask=cycles_bitmask,
                      cycles_sort=cycles_sort,
                      cycles_raster=cycles_raster,
                      cycles_total=total,
                      dram_bytes=float(dram_bytes))
