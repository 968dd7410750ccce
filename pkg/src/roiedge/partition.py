"""The "four plus one" frame layout, feature crops, and object-occupancy statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ParameterError, RangeError
from .geometry import Rect
from .tensor import FeatureMap, Tensor

TOP_PARTS = (1, 2)
BOTTOM_PARTS = (3, 4, 5)


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


@dataclass(frozen=True)
class PartitionLayout:
    """P1/P2 split the top band, P3/P4 the bottom band, P5 is centred.

    ``top_fraction`` is the top band's share of the frame height and
    ``center_fraction`` is P5's share of both width and height.
    """

    width: int
    height: int
    top_fraction: float = 0.5
    center_fraction: float = 0.5
    parts: dict[int, Rect] = field(init=False, compare=False)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ParameterError("frame dimensions must be positive")
        if not 0.0 < self.top_fraction < 1.0:
            raise ParameterError(f"top_fraction must lie in (0, 1), got {self.top_fraction}")
        if not 0.0 < self.center_fraction <= 1.0:
            raise ParameterError(f"center_fraction must lie in (0, 1], got {self.center_fraction}")
        top = _round_half_up(self.height * self.top_fraction)
        mid = _round_half_up(self.width / 2.0)
        cw = _round_half_up(self.width * self.center_fraction)
        ch = _round_half_up(self.height * self.center_fraction)
        parts = {
            1: Rect(0, 0, mid, top),
            2: Rect(mid, 0, self.width - mid, top),
            3: Rect(0, top, mid, self.height - top),
            4: Rect(mid, top, self.width - mid, self.height - top),
            5: Rect((self.width - cw) // 2, (self.height - ch) // 2, cw, ch),
        }
        for pid, r in parts.items():
            if r.area == 0:
                raise ParameterError(f"part P{pid} is empty for layout {self.width}x{self.height}")
        object.__setattr__(self, "parts", parts)

    @property
    def top_band(self) -> Rect:
        return self.parts[1].union(self.parts[2])

    def tiles(self) -> list[Rect]:
        return [self.parts[k] for k in (1, 2, 3, 4)]


def make_layout(width: int, height: int, top_fraction: float = 0.5, center_fraction: float = 0.5) -> PartitionLayout:
    return PartitionLayout(width, height, top_fraction, center_fraction)


@dataclass(frozen=True)
class CropRef:
    part: int
    rect: Rect  # frame pixels
    cells: Rect  # feature cells, rounded outward


def crop_ref(layout: PartitionLayout, part: int, stride: int) -> CropRef:
    if part not in layout.parts:
        raise ParameterError(f"unknown part id {part}")
    r = layout.parts[part]
    gw, gh = -(-layout.width // stride), -(-layout.height // stride)
    x0, y0 = r.x // stride, r.y // stride
    x1 = min(gw, -(-r.x1 // stride))
    y1 = min(gh, -(-r.y1 // stride))
    return CropRef(part, r, Rect.from_corners(x0, y0, x1, y1))


def make_crops(layout: PartitionLayout, stride: int, include_top: bool = False) -> list[CropRef]:
    parts = (*TOP_PARTS, *BOTTOM_PARTS) if include_top else BOTTOM_PARTS
    return [crop_ref(layout, k, stride) for k in parts]


def full_frame_crop(width: int, height: int, stride: int) -> CropRef:
    gw, gh = -(-width // stride), -(-height // stride)
    return CropRef(0, Rect(0, 0, width, height), Rect(0, 0, gw, gh))


def crop_feature(f: FeatureMap, c: CropRef) -> FeatureMap:
    cells = c.cells
    if cells.x < 0 or cells.y < 0 or cells.x1 > f.width or cells.y1 > f.height or cells.area == 0:
        raise RangeError(f"crop {cells} outside feature map {f.width}x{f.height}")
    sub = f.tensor.data[:, cells.y : cells.y1, cells.x : cells.x1]
    return FeatureMap(Tensor(sub.copy()), f.stride)


def map_box_to_frame(box: Rect, crop: CropRef, stride: int, frame_w: int | None = None, frame_h: int | None = None) -> Rect:
    """Cell box inside ``crop`` -> frame pixels, clamped to the frame when its size is given."""
    px = Rect((crop.cells.x + box.x) * stride, (crop.cells.y + box.y) * stride, box.w * stride, box.h * stride)
    if frame_w is not None and frame_h is not None:
        px = px.intersect(Rect(0, 0, frame_w, frame_h))
    return px


def frame_box_to_crop(box: Rect, crop: CropRef, stride: int) -> Rect:
    """Frame pixels -> cell box relative to ``crop``, rounded outward."""
    x0, y0 = box.x // stride, box.y // stride
    x1, y1 = -(-box.x1 // stride), -(-box.y1 // stride)
    return Rect.from_corners(x0 - crop.cells.x, y0 - crop.cells.y, x1 - crop.cells.x, y1 - crop.cells.y)


def occupancy_stats(gt, layout: PartitionLayout) -> dict:
    """Share of frames holding at least one object centre in each region.

    Regions are ``top`` (P1 u P2), ``center_top`` (P5 n (P1 u P2)) and each part.
    """
    regions = {"top": layout.top_band, "center_top": layout.parts[5].intersect(layout.top_band)}
    for k, r in layout.parts.items():
        regions[f"P{k}"] = r
    n = gt.num_frames
    counts = dict.fromkeys(regions, 0)
    total_objects = 0
    for frame in range(n):
        objs = gt.objects(frame)
        total_objects += len(objs)
        for name, region in regions.items():
            if region.area and any(region.contains_point(*o.rect.center) for o in objs):
                counts[name] += 1
    empty = n == 0 or total_objects == 0
    probs = {name: (counts[name] / n if n and not empty else 0.0) for name in regions}
    return {"frames": n, "objects": total_objects, "empty": empty, "probabilities": probs, "counts": counts}
