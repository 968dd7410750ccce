"""Deterministic edge detector stand-in, IoU matching and F1 scoring."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import FormatError, ParameterError
from .geometry import Rect, iou
from .policy import AccuracyProfile, RateSet

__all__ = [
    "GtObject", "GroundTruth", "Detection", "OracleModel", "oracle_detect", "iou",
    "match_counts", "f1_score", "load_ground_truth", "save_ground_truth",
]


@dataclass(frozen=True)
class GtObject:
    class_id: int
    rect: Rect
    object_id: int = -1


@dataclass
class GroundTruth:
    num_frames: int
    frames: dict[int, list[GtObject]] = field(default_factory=dict)

    def objects(self, frame: int) -> list[GtObject]:
        return self.frames.get(frame, [])

    def add(self, frame: int, class_id: int, rect: Rect) -> GtObject:
        oid = sum(len(v) for v in self.frames.values())
        obj = GtObject(class_id, rect, oid)
        self.frames.setdefault(frame, []).append(obj)
        self.num_frames = max(self.num_frames, frame + 1)
        return obj

    def total_objects(self) -> int:
        return sum(len(v) for v in self.frames.values())


def load_ground_truth(path, num_frames: int | None = None, frame_size: tuple[int, int] | None = None) -> GroundTruth:
    gt = GroundTruth(num_frames or 0)
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                frame = int(rec["frame"])
                rect = Rect(int(rec["x"]), int(rec["y"]), int(rec["w"]), int(rec["h"]))
                cls = int(rec["class"])
            except (ValueError, KeyError, TypeError) as exc:
                raise FormatError(f"{path}:{lineno}: bad ground-truth record ({exc})") from exc
            if frame < 0 or rect.w <= 0 or rect.h <= 0:
                raise FormatError(f"{path}:{lineno}: negative frame or empty box")
            if frame_size is not None and not Rect(0, 0, *frame_size).contains(rect):
                raise FormatError(f"{path}:{lineno}: box {rect.as_list()} leaves the {frame_size} frame")
            gt.add(frame, cls, rect)
    if num_frames is not None:
        gt.num_frames = num_frames
    return gt


def save_ground_truth(gt: GroundTruth, path) -> None:
    with open(path, "w") as fh:
        for frame in sorted(gt.frames):
            for o in gt.frames[frame]:
                r = o.rect
                fh.write(json.dumps({"frame": frame, "class": o.class_id, "x": r.x, "y": r.y, "w": r.w, "h": r.h}) + "\n")


@dataclass(frozen=True)
class Detection:
    class_id: int
    rect: Rect
    confidence: float
    object_id: int = -1


@dataclass(frozen=True)
class OracleModel:
    s_min: float = 12.0
    coverage: float = 0.5
    rates: RateSet = RateSet()
    accuracy: AccuracyProfile = AccuracyProfile()

    def confidence(self, roi: Rect, r: float) -> float:
        # profile value at the largest configured rate not above r
        k = 0
        for i, rate in enumerate(self.rates.rates):
            if rate <= r + 1e-12:
                k = i
        return self.accuracy.accuracy(roi, k)


def oracle_detect(roi, r: float, objects: list[GtObject], model: OracleModel = OracleModel()) -> list[Detection]:
    """Objects whose centre and >= ``coverage`` of area fall in ``roi`` and whose
    shorter side, scaled by ``r``, reaches ``s_min`` pixels."""
    if not 0.0 < r <= 1.0:
        raise ParameterError(f"rate must lie in (0, 1], got {r}")
    rect = roi if isinstance(roi, Rect) else roi.rect
    conf = model.confidence(rect, r)
    out = []
    for o in objects:
        if not rect.contains_point(*o.rect.center):
            continue
        inter = o.rect.intersect(rect)
        if inter.area < model.coverage * o.rect.area:
            continue
        if min(o.rect.w, o.rect.h) * r < model.s_min:
            continue
        out.append(Detection(o.class_id, inter, conf, o.object_id))
    return out


def match_counts(dets: list[Detection], objects: list[GtObject], iou_threshold: float = 0.5) -> tuple[int, int, int]:
    """Greedy one-to-one matching by descending confidence; returns (tp, fp, fn)."""
    order = sorted(range(len(dets)), key=lambda i: -dets[i].confidence)
    matched = [False] * len(objects)
    tp = 0
    for i in order:
        d = dets[i]
        best_j, best_iou = -1, iou_threshold
        for j, o in enumerate(objects):
            if matched[j] or o.class_id != d.class_id:
                continue
            v = iou(d.rect, o.rect)
            if v >= best_iou and (best_j < 0 or v > best_iou):
                best_j, best_iou = j, v
        if best_j >= 0:
            matched[best_j] = True
            tp += 1
    return tp, len(dets) - tp, len(objects) - tp


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def f1_score(dets: list[Detection], objects: list[GtObject], iou_threshold: float = 0.5) -> tuple[float, float, float]:
    return prf(*match_counts(dets, objects, iou_threshold))
