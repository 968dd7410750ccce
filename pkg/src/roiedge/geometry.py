"""Integer rectangles in (x, y, w, h) form."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class Rect:
    x: int
    y: int
    w: int
    h: int

    @property
    def x1(self) -> int:
        return self.x + self.w

    @property
    def y1(self) -> int:
        return self.y + self.h

    @property
    def area(self) -> int:
        return max(0, self.w) * max(0, self.h)

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @classmethod
    def from_corners(cls, x0, y0, x1, y1) -> "Rect":
        return cls(int(x0), int(y0), int(x1 - x0), int(y1 - y0))

    def as_list(self) -> list[int]:
        return [self.x, self.y, self.w, self.h]

    def contains_point(self, px: float, py: float) -> bool:
        return self.x <= px < self.x1 and self.y <= py < self.y1

    def contains(self, other: "Rect") -> bool:
        return self.x <= other.x and self.y <= other.y and other.x1 <= self.x1 and other.y1 <= self.y1

    def intersect(self, other: "Rect") -> "Rect":
        x0, y0 = max(self.x, other.x), max(self.y, other.y)
        x1, y1 = min(self.x1, other.x1), min(self.y1, other.y1)
        if x1 <= x0 or y1 <= y0:
            return Rect(x0, y0, 0, 0)
        return Rect.from_corners(x0, y0, x1, y1)

    def union(self, other: "Rect") -> "Rect":
        return Rect.from_corners(
            min(self.x, other.x), min(self.y, other.y), max(self.x1, other.x1), max(self.y1, other.y1)
        )

    def dilate(self, pad: int) -> "Rect":
        return Rect(self.x - pad, self.y - pad, self.w + 2 * pad, self.h + 2 * pad)


def iou(a: Rect, b: Rect) -> float:
    inter = a.intersect(b).area
    if inter == 0:
        return 0.0
    return inter / (a.area + b.area - inter)
