"""RoI boxes from a normalized activation map: mask, components, boxes, merge, selection."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .cam import ActivationMap
from .errors import ParameterError
from .geometry import Rect, iou
from .kernels import label_components
from .partition import CropRef, map_box_to_frame


@dataclass(frozen=True, eq=False)
class HeatMask:
    bits: np.ndarray
    crop_id: int | None
    threshold: float

    @property
    def shape(self):
        return self.bits.shape


@dataclass(frozen=True)
class Component:
    """Cells of one connected region, in raster order."""

    rows: tuple[int, ...]
    cols: tuple[int, ...]

    @property
    def cells(self) -> frozenset[tuple[int, int]]:
        return frozenset(zip(self.rows, self.cols))

    def __len__(self):
        return len(self.rows)


@dataclass(frozen=True)
class RoiBox:
    rect: Rect
    part: int
    heat_mass: float
    cells: int
    rate: float | None = None
    valid: bool = True

    @property
    def mean_heat(self) -> float:
        return self.heat_mass / self.cells if self.cells else 0.0

    @property
    def area(self) -> int:
        return self.rect.area


@dataclass(frozen=True)
class ValidityPolicy:
    min_area: int = 32 * 32
    sigma_v: float = 0.55
    max_boxes: int | None = 6


@dataclass(frozen=True)
class RoiConfig:
    sigma_m: float = 0.5
    pad: int = 8
    merge_iou: float = 0.2
    validity: ValidityPolicy = ValidityPolicy()

    def __post_init__(self):
        if not 0.0 < self.sigma_m < 1.0:
            raise ParameterError(f"sigma_m must lie in (0, 1), got {self.sigma_m}")
        if self.pad < 0:
            raise ParameterError("pad must be non-negative")
        if not 0.0 < self.merge_iou <= 1.0:
            raise ParameterError("merge_iou must lie in (0, 1]")


def threshold_mask(m: ActivationMap, sigma_m: float) -> HeatMask:
    if not 0.0 < sigma_m < 1.0:
        raise ParameterError(f"heat threshold must lie in (0, 1), got {sigma_m}")
    return HeatMask(m.values >= np.float32(sigma_m), m.crop_id, sigma_m)


def connected_components(mask: HeatMask | np.ndarray) -> list[Component]:
    bits = mask.bits if isinstance(mask, HeatMask) else np.asarray(mask, dtype=bool)
    if bits.size == 0 or not bits.any():
        return []
    labels, n = label_components(bits)
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    sorted_labels = flat[order]
    starts = np.searchsorted(sorted_labels, np.arange(1, n + 2))
    w = bits.shape[1]
    comps = []
    for k in range(n):
        idx = order[starts[k] : starts[k + 1]]
        comps.append(Component(tuple((idx // w).tolist()), tuple((idx % w).tolist())))
    return comps


def boxes_from_components(
    components: list[Component],
    amap: ActivationMap,
    crop: CropRef,
    stride: int,
    pad: int = 8,
) -> list[RoiBox]:
    """Tight cell box per component, mapped to frame pixels, padded, clamped to the part."""
    out = []
    vals = amap.values
    for comp in components:
        rows, cols = comp.rows, comp.cols
        cell_box = Rect.from_corners(min(cols), min(rows), max(cols) + 1, max(rows) + 1)
        rect = map_box_to_frame(cell_box, crop, stride).dilate(pad).intersect(crop.rect)
        if rect.area == 0:
            continue
        mass = float(vals[list(rows), list(cols)].astype(np.float64).sum())
        out.append(RoiBox(rect, crop.part, mass, len(comp)))
    return out


def _merge(a: RoiBox, b: RoiBox) -> RoiBox:
    return replace(a, rect=a.rect.union(b.rect), heat_mass=a.heat_mass + b.heat_mass, cells=a.cells + b.cells)


def merge_overlapping(boxes: list[RoiBox], iou_threshold: float = 0.2) -> list[RoiBox]:
    """Union any pair with IoU >= threshold until no such pair remains."""
    out = list(boxes)
    changed = True
    while changed:
        changed = False
        for i in range(len(out)):
            for j in range(i + 1, len(out)):
                if iou(out[i].rect, out[j].rect) >= iou_threshold:
                    out[i] = _merge(out[i], out[j])
                    del out[j]
                    changed = True
                    break
            if changed:
                break
    return out


def select_valid(boxes: list[RoiBox], policy: ValidityPolicy = ValidityPolicy()) -> list[RoiBox]:
    """Area and mean-heat filter; with a cap, keep the heaviest boxes by heat mass."""
    kept = [b for b in boxes if b.area >= policy.min_area and b.mean_heat >= policy.sigma_v]
    if policy.max_boxes is None:
        return kept
    kept = sorted(kept, key=lambda b: -b.heat_mass)
    return kept[: policy.max_boxes]


def extract_part_boxes(amap: ActivationMap, crop: CropRef, stride: int, config: RoiConfig = RoiConfig()) -> list[RoiBox]:
    """Mask -> components -> padded boxes -> merged boxes, for one normalized crop map."""
    mask = threshold_mask(amap, config.sigma_m)
    comps = connected_components(mask)
    boxes = boxes_from_components(comps, amap, crop, stride, config.pad)
    return merge_overlapping(boxes, config.merge_iou)
