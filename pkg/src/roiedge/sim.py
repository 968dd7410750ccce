"""Frame-stepped vehicle-to-edge simulation."""
from __future__ import annotations

import bisect
import csv
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .cam import ClassWeights, class_activation, load_class_weights
from .config import RunConfig
from .errors import ConfigError, FormatError, ParameterError, RangeError
from .oracle import Detection, GroundTruth, OracleModel, load_ground_truth, match_counts, oracle_detect, prf
from .partition import crop_feature, make_crops, make_layout
from .policy import FrequencyController, brute_force_opt, hill_climb, pixels, uniform_assignment
from .protocol import BoxMessage, ResultMessage
from .roi import RoiBox, extract_part_boxes, select_valid
from .scenario import render_frame
from .tensor import get_extractor, read_ppm


# ---------------------------------------------------------------------------
# traces


@dataclass(frozen=True)
class BandwidthTrace:
    times: tuple[float, ...]
    bps: tuple[float, ...]

    def __post_init__(self):
        if not self.times or len(self.times) != len(self.bps):
            raise ParameterError("bandwidth trace needs matching, non-empty time and rate lists")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ParameterError("trace times must be strictly increasing")
        if any(v < 0 for v in self.bps):
            raise ParameterError("bandwidth must be non-negative")

    @classmethod
    def constant(cls, bps: float) -> "BandwidthTrace":
        return cls((0.0,), (float(bps),))


@dataclass(frozen=True)
class EdgeResourceTrace:
    times: tuple[float, ...]
    g_max: tuple[float, ...]
    base_latency_ms: tuple[float, ...]

    def __post_init__(self):
        if not self.times or not len(self.times) == len(self.g_max) == len(self.base_latency_ms):
            raise ParameterError("edge trace needs matching, non-empty columns")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ParameterError("trace times must be strictly increasing")
        if any(v < 0 for v in (*self.g_max, *self.base_latency_ms)):
            raise ParameterError("edge trace values must be non-negative")

    @classmethod
    def constant(cls, g_max: float, base_latency_ms: float) -> "EdgeResourceTrace":
        return cls((0.0,), (float(g_max),), (float(base_latency_ms),))


def _step_index(times, t: float) -> int:
    if t < times[0]:
        raise RangeError(f"time {t} precedes trace start {times[0]}")
    return bisect.bisect_right(times, t) - 1


def bandwidth_at(trace: BandwidthTrace, t: float) -> float:
    return trace.bps[_step_index(trace.times, t)]


def edge_at(trace: EdgeResourceTrace, t: float) -> tuple[float, float]:
    i = _step_index(trace.times, t)
    return trace.g_max[i], trace.base_latency_ms[i]


def _read_jsonl(path, keys):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                rows.append(tuple(float(rec[k]) for k in keys))
            except (ValueError, KeyError, TypeError) as exc:
                raise FormatError(f"{path}:{lineno}: bad trace record ({exc})") from exc
    if not rows:
        raise FormatError(f"{path}: empty trace")
    return rows


def load_bandwidth_trace(path) -> BandwidthTrace:
    rows = _read_jsonl(path, ("t", "bps"))
    return BandwidthTrace(tuple(r[0] for r in rows), tuple(r[1] for r in rows))


def load_edge_trace(path) -> EdgeResourceTrace:
    rows = _read_jsonl(path, ("t", "g_max", "base_latency_ms"))
    return EdgeResourceTrace(tuple(r[0] for r in rows), tuple(r[1] for r in rows), tuple(r[2] for r in rows))


# ---------------------------------------------------------------------------
# channel


def transmit(nbytes: float, bps: float, loss_rate: float, seed: int, frame: int = 0, box: int = 0) -> tuple[float, bool]:
    """Serialization latency in ms and whether the box survives the seeded loss draw."""
    if bps <= 0:
        return math.inf, False
    latency = nbytes * 8.0 / bps * 1000.0
    if loss_rate <= 0.0:
        return latency, True
    draw = np.random.default_rng([seed, frame, box]).random()
    return latency, bool(draw >= loss_rate)


# ---------------------------------------------------------------------------
# edge endpoints


class InProcessEdge:
    """Edge agent answering box messages from ground truth through the oracle."""

    def __init__(self, gt: GroundTruth, model: OracleModel):
        self.gt = gt
        self.model = model

    def infer(self, msg: BoxMessage) -> ResultMessage:
        dets = oracle_detect(msg.rect, msg.rate, self.gt.objects(msg.frame), self.model)
        return ResultMessage(msg.frame, msg.part, tuple(dets))

    def close(self):
        pass


# ---------------------------------------------------------------------------
# scenario binding


@dataclass
class Scenario:
    """A validated config with its ground truth, traces and weights loaded."""

    config: RunConfig
    gt: GroundTruth
    bandwidth: BandwidthTrace
    edge: EdgeResourceTrace
    weights: ClassWeights
    _features: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "Scenario":
        s = cfg.scenario
        try:
            gt_path = cfg.resolve(cfg.io.ground_truth)
            gt = load_ground_truth(gt_path, s.frames, (s.width, s.height)) if gt_path else GroundTruth(s.frames)
            bw_path, edge_path = cfg.resolve(cfg.io.bandwidth), cfg.resolve(cfg.io.edge)
            bw = load_bandwidth_trace(bw_path) if bw_path else BandwidthTrace.constant(cfg.link.bandwidth_bps)
            edge = load_edge_trace(edge_path) if edge_path else EdgeResourceTrace.constant(cfg.link.g_max, cfg.link.base_latency_ms)
            w_path = cfg.resolve(cfg.io.class_weights)
            if w_path is None:
                raise ConfigError("io.class_weights is required (see `roiedge gen-scenario`)")
            weights = load_class_weights(w_path)
        except (OSError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if weights.channels != cfg.extractor.channels:
            raise ConfigError(f"class weights have {weights.channels} channels, extractor produces {cfg.extractor.channels}")
        if weights.num_classes < s.num_classes:
            raise ConfigError(f"class weights cover {weights.num_classes} classes, scenario has {s.num_classes}")
        if bw.times[0] > 0 or edge.times[0] > 0:
            raise ConfigError("traces must start at t <= 0")
        return cls(cfg, gt, bw, edge, weights)

    def frame_image(self, frame: int):
        cfg = self.config
        frames_dir = cfg.resolve(cfg.io.frames_dir)
        if frames_dir:
            return read_ppm(os.path.join(frames_dir, f"{frame:05d}.ppm"))
        return render_frame(self.gt.objects(frame), cfg.scenario.width, cfg.scenario.height)

    def features(self, frame: int):
        fm = self._features.get(frame)
        if fm is None:
            fm = get_extractor(self.config.extractor_config())(self.frame_image(frame))
            self._features[frame] = fm
        return fm


# ---------------------------------------------------------------------------
# reports


@dataclass
class FrameReport:
    frame: int
    time_s: float
    bandwidth_bps: float
    budget_bytes: float
    g_max: float
    offloaded_parts: list[int]
    frequencies: dict[int, int]
    boxes: list[dict]
    dropped_boxes: int
    bytes_sent: float
    tx_latency_ms: float
    inference_latency_ms: float
    latency_ms: float
    detections: list[dict]
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    utility: float
    feasible: bool

    def to_json(self) -> str:
        d = dict(self.__dict__)
        d["frequencies"] = {str(k): v for k, v in sorted(self.frequencies.items())}
        return json.dumps(d, sort_keys=True, separators=(",", ":"))


@dataclass
class SimResult:
    reports: list[FrameReport]
    summary: dict

    def reports_jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.reports)

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frame", "bytes", "f1", "utility", "latency_ms"])
        for r in self.reports:
            w.writerow([r.frame, repr(r.bytes_sent), repr(r.f1), repr(r.utility), repr(r.latency_ms)])
        return buf.getvalue()

    def write(self, out_dir, config: RunConfig | None = None) -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "reports.jsonl"), "w") as fh:
            fh.write(self.reports_jsonl())
        with open(os.path.join(out_dir, "summary.csv"), "w") as fh:
            fh.write(self.summary_csv())
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(self.summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if config is not None:
            eff = RunConfig.from_dict(config.to_dict(), config.base_dir)
            for key in ("ground_truth", "bandwidth", "edge", "class_weights", "frames_dir"):
                val = getattr(eff.io, key)
                if val is not None:
                    setattr(eff.io, key, os.path.abspath(eff.resolve(val)))
            eff.save(os.path.join(out_dir, "config.json"))


def _dedupe(dets: list[Detection]) -> list[Detection]:
    """Keep one detection per ground-truth object: the largest box, then the most confident."""
    best: dict[int, Detection] = {}
    out = []
    for d in dets:
        if d.object_id < 0:
            out.append(d)
            continue
        cur = best.get(d.object_id)
        if cur is None or (d.rect.area, d.confidence) > (cur.rect.area, cur.confidence):
            best[d.object_id] = d
    return out + [best[k] for k in sorted(best)]


# ---------------------------------------------------------------------------
# main loop


def extract_boxes(scn: Scenario, frame: int, parts) -> list[RoiBox]:
    """Device-side RoI extraction for the given parts of one frame, before validity selection."""
    cfg = scn.config
    fm = scn.features(frame)
    layout = make_layout(cfg.scenario.width, cfg.scenario.height, cfg.layout.top_fraction, cfg.layout.center_fraction)
    classes = cfg.cam.target_classes if cfg.cam.target_classes is not None else range(cfg.scenario.num_classes)
    roi_cfg = cfg.roi_config()
    boxes: list[RoiBox] = []
    for crop in make_crops(layout, fm.stride, cfg.layout.include_top):
        if crop.part not in parts:
            continue
        amap = class_activation(crop_feature(fm, crop), scn.weights, classes, cfg.cam.aggregate, crop.part)
        boxes.extend(extract_part_boxes(amap, crop, fm.stride, roi_cfg))
    return boxes


def _solve(boxes, cfg: RunConfig, budget_bytes: float, budget_gpu: float, seed: int):
    pc = cfg.policy_config()
    if cfg.policy.rate_override is not None:
        return boxes, uniform_assignment(boxes, cfg.policy.rate_override, pc, budget_bytes, budget_gpu), 0
    boxes = list(boxes)
    dropped = 0
    # shed the lightest boxes until the all-minimum assignment fits
    while boxes and not uniform_assignment(boxes, pc.rates.r_min, pc, budget_bytes, budget_gpu).feasible:
        boxes.pop()
        dropped += 1
    if cfg.policy.solver == "brute_force":
        assignment = brute_force_opt(boxes, pc, budget_bytes, budget_gpu)
    else:
        assignment = hill_climb(boxes, pc, budget_bytes, budget_gpu, seed=seed)
    return boxes, assignment, dropped


def run_simulation(scn: Scenario, edge=None) -> SimResult:
    cfg = scn.config
    s = cfg.scenario
    pc = cfg.policy_config()
    edge = edge or InProcessEdge(scn.gt, cfg.oracle_model())
    parts = (1, 2, 3, 4, 5) if cfg.layout.include_top else (3, 4, 5)
    ctrl = FrequencyController(parts, cfg.frequency.init_fre, cfg.frequency.interval, cfg.frequency.floor)
    reports: list[FrameReport] = []
    for frame in range(s.frames):
        t = frame / s.fps
        bps = bandwidth_at(scn.bandwidth, t)
        g_max, base_ms = edge_at(scn.edge, t)
        budget = bps / s.fps / 8.0
        if cfg.frequency.enabled:
            active = [k for k in parts if ctrl.should_offload(k, frame, s.fps)]
        else:
            active = list(parts)
        candidates = select_valid(extract_boxes(scn, frame, active), cfg.roi_config().validity)
        boxes, assignment, dropped = _solve(candidates, cfg, budget, g_max, seed=cfg.seed * 1_000_003 + frame)

        box_rows, raw_dets = [], []
        found = dict.fromkeys(active, False)
        sent = tx_ms = inf_ms = 0.0
        for i, (box, rate) in enumerate(zip(boxes, assignment.rates)):
            nbytes = pc.size.nbytes(box, rate)
            latency, delivered = transmit(nbytes, bps, cfg.link.loss_rate, cfg.seed, frame, i)
            sent += nbytes
            tx_ms += latency
            n_det = 0
            if delivered:
                msg = BoxMessage(frame, box.part, box.rect, rate, int(math.ceil(nbytes)))
                result = edge.infer(msg)
                n_det = len(result.detections)
                raw_dets.extend(result.detections)
                inf_ms += base_ms + pc.cost.latency(pixels(box, rate))
                if n_det:
                    found[box.part] = True
            box_rows.append({
                "part": box.part, "rect": box.rect.as_list(), "rate": rate, "bytes": nbytes,
                "delivered": delivered, "heat_mass": box.heat_mass, "mean_heat": box.mean_heat, "detections": n_det,
            })
        if cfg.frequency.enabled:
            for k in active:
                ctrl.step(k, found[k])

        dets = _dedupe(raw_dets)
        objects = scn.gt.objects(frame)
        tp, fp, fn = match_counts(dets, objects, cfg.oracle.iou_threshold)
        precision, recall, f1 = prf(tp, fp, fn)
        reports.append(FrameReport(
            frame=frame, time_s=t, bandwidth_bps=bps, budget_bytes=budget, g_max=g_max,
            offloaded_parts=active, frequencies=dict(ctrl.fre), boxes=box_rows, dropped_boxes=dropped,
            bytes_sent=sent, tx_latency_ms=tx_ms, inference_latency_ms=inf_ms, latency_ms=tx_ms + inf_ms,
            detections=[{"class": d.class_id, "rect": d.rect.as_list(), "confidence": d.confidence} for d in dets],
            tp=tp, fp=fp, fn=fn, precision=precision, recall=recall, f1=f1,
            utility=assignment.utility, feasible=assignment.feasible,
        ))
    return SimResult(reports, summarize(reports, cfg))


def summarize(reports: list[FrameReport], cfg: RunConfig) -> dict:
    s = cfg.scenario
    frame_bytes = cfg.policy_config().size.frame_bytes(s.width, s.height)
    n = len(reports)
    scored = [r for r in reports if r.tp + r.fp + r.fn > 0]
    tp = sum(r.tp for r in reports)
    fp = sum(r.fp for r in reports)
    fn = sum(r.fn for r in reports)
    gp, gr, gf = prf(tp, fp, fn)
    total = math.fsum(r.bytes_sent for r in reports)
    full = frame_bytes * n
    ratio = total / full if full else 0.0

    def mean(xs):
        xs = list(xs)
        return math.fsum(xs) / len(xs) if xs else 0.0

    return {
        "frames": n,
        "scored_frames": len(scored),
        "mean_f1": mean(r.f1 for r in scored),
        "mean_precision": mean(r.precision for r in scored),
        "mean_recall": mean(r.recall for r in scored),
        "global_precision": gp,
        "global_recall": gr,
        "global_f1": gf,
        "total_bytes": total,
        "mean_bytes": total / n if n else 0.0,
        "full_frame_bytes": frame_bytes,
        "bytes_ratio": ratio,
        "compression_ratio": 1.0 - ratio,
        "mean_utility": mean(r.utility for r in reports),
        "mean_latency_ms": mean(r.latency_ms for r in reports),
        "boxes_sent": sum(len(r.boxes) for r in reports),
        "boxes_lost": sum(1 for r in reports for b in r.boxes if not b["delivered"]),
        "boxes_dropped": sum(r.dropped_boxes for r in reports),
    }
