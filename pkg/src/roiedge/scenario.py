"""Synthetic driving scenarios: planted objects, rendered frames, traces, calibrated class weights."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .cam import ClassWeights, fit_class_weights
from .errors import ParameterError
from .geometry import Rect
from .oracle import GroundTruth
from .tensor import ExtractorConfig, Image, get_extractor

# (fill, trim) colours per class
CLASS_COLORS = (
    ((200, 40, 40), (60, 20, 20)),
    ((230, 200, 40), (90, 70, 10)),
    ((40, 90, 220), (230, 230, 230)),
    ((40, 170, 60), (10, 50, 20)),
)
BACKGROUND = (112, 112, 112)

# Per-profile knobs: share of frames with an object in the top band, live tracks per frame.
DENSITY_PROFILES = {
    "road": {"top_share": 0.01, "tracks": 2.0},
    "city-overpass": {"top_share": 0.19531, "tracks": 2.5},
    "sparse": {"top_share": 0.0, "tracks": 1.0},
    "empty": {"top_share": 0.0, "tracks": 0.0},
}


@dataclass(frozen=True)
class ScenarioParams:
    frames: int = 60
    width: int = 1280
    height: int = 720
    fps: int = 30
    density: str = "road"
    num_classes: int = 3
    min_size: int = 24
    max_size: int = 120
    top_fraction: float = 0.5

    def __post_init__(self):
        if self.density not in DENSITY_PROFILES:
            raise ParameterError(f"unknown density profile {self.density!r}; pick one of {sorted(DENSITY_PROFILES)}")
        if self.frames < 1 or self.fps < 1:
            raise ParameterError("frames and fps must be positive")
        if not 1 <= self.num_classes <= len(CLASS_COLORS):
            raise ParameterError(f"num_classes must lie in [1, {len(CLASS_COLORS)}]")


def render_frame(objects, width: int, height: int, background=BACKGROUND) -> Image:
    """Flat background with each object drawn as a coloured block with a trim band."""
    px = np.empty((height, width, 3), dtype=np.uint8)
    px[:] = background
    for o in objects:
        fill, trim = CLASS_COLORS[o.class_id % len(CLASS_COLORS)]
        r = o.rect
        px[r.y : r.y1, r.x : r.x1] = fill
        band = max(1, r.h // 4)
        inset = max(1, r.w // 6)
        px[r.y + band : r.y + 2 * band, r.x + inset : r.x1 - inset] = trim
    return Image(px)


def _overlaps(a: Rect, others, margin: int = 8) -> bool:
    grown = a.dilate(margin)
    return any(grown.intersect(b).area for b in others)


def _track(rng, params: ScenarioParams, band: Rect, occupied, start: int, life: int):
    """One straight-moving object clamped to ``band``; ``None`` when it would collide."""
    w = int(rng.integers(params.min_size, params.max_size + 1))
    h = int(rng.integers(params.min_size, int(params.max_size * 0.8) + 1))
    w, h = min(w, band.w), min(h, band.h)
    # centre-weighted horizontal placement
    cx = band.x + band.w * float(np.clip(rng.normal(0.5, 0.2), 0.05, 0.95))
    cy = band.y + band.h * float(rng.uniform(0.15, 0.85))
    vx, vy = float(rng.uniform(-6, 6)), float(rng.uniform(-1.5, 1.5))
    cls = int(rng.integers(params.num_classes))
    path = {}
    for f in range(start, min(params.frames, start + life)):
        if f < 0:
            continue
        t = f - start
        x = int(round(cx + vx * t - w / 2))
        y = int(round(cy + vy * t - h / 2))
        x = min(max(band.x, x), band.x1 - w)
        y = min(max(band.y, y), band.y1 - h)
        r = Rect(x, y, w, h)
        if _overlaps(r, occupied.get(f, ())):
            return None
        path[f] = r
    return cls, path


def generate_ground_truth(params: ScenarioParams, seed: int) -> GroundTruth:
    rng = np.random.default_rng(seed)
    prof = DENSITY_PROFILES[params.density]
    top_h = int(math.floor(params.height * params.top_fraction + 0.5))
    bottom = Rect(0, top_h, params.width, params.height - top_h)
    top = Rect(0, 0, params.width, top_h)
    occupied: dict[int, list[Rect]] = {}
    placed: list[tuple[int, int, Rect]] = []

    def commit(cls, path):
        for f, r in path.items():
            occupied.setdefault(f, []).append(r)
            placed.append((f, cls, r))

    # bottom-band tracks: expected ``tracks`` objects alive per frame
    mean_life = 20
    n_tracks = int(round(prof["tracks"] * params.frames / mean_life))
    for _ in range(n_tracks):
        for _attempt in range(20):
            life = int(rng.integers(8, 2 * mean_life - 7))
            start = int(rng.integers(-life // 2, params.frames))
            tr = _track(rng, params, bottom, occupied, start, life)
            if tr is not None and tr[1]:
                commit(*tr)
                break

    # top-band objects live for exactly one frame so the frame share is exact
    n_top = int(math.floor(prof["top_share"] * params.frames + 0.5))
    for f in sorted(rng.choice(params.frames, size=n_top, replace=False).tolist()) if n_top else []:
        for _attempt in range(50):
            tr = _track(rng, params, Rect(top.x, top.y, top.w, max(1, top.h - 1)), occupied, f, 1)
            if tr is not None and tr[1]:
                # keep the centre strictly inside the top band
                r = tr[1][f]
                if r.center[1] < top_h:
                    commit(*tr)
                    break

    gt = GroundTruth(params.frames)
    for f, cls, r in sorted(placed, key=lambda p: (p[0], p[2].y, p[2].x)):
        gt.add(f, cls, r)
    return gt


def generate_bandwidth_trace(duration_s: float, seed: int, low_mbps=8.0, high_mbps=60.0, step_s=0.25):
    rng = np.random.default_rng(seed)
    n = max(1, int(math.ceil(duration_s / step_s)))
    return [(round(i * step_s, 6), float(round(rng.uniform(low_mbps, high_mbps), 3)) * 1e6) for i in range(n)]


def generate_edge_trace(duration_s: float, seed: int, step_s=0.5):
    rng = np.random.default_rng(seed)
    n = max(1, int(math.ceil(duration_s / step_s)))
    return [
        (round(i * step_s, 6), float(round(rng.uniform(0.004, 0.04), 5)), float(round(rng.uniform(5.0, 15.0), 3)))
        for i in range(n)
    ]


def coverage_targets(objects, num_classes: int, width: int, height: int, stride: int) -> np.ndarray:
    """Per-class share of each feature cell covered by objects, shape (K, H', W')."""
    gh, gw = -(-height // stride), -(-width // stride)
    occ = np.zeros((num_classes, gh * stride, gw * stride), dtype=np.float32)
    for o in objects:
        r = o.rect
        occ[o.class_id, r.y : r.y1, r.x : r.x1] = 1.0
    return occ.reshape(num_classes, gh, stride, gw, stride).mean(axis=(2, 4))


def calibrate_class_weights(
    params: ScenarioParams, extractor: ExtractorConfig, seed: int, frames: int = 24, ridge: float = 1e-3
) -> ClassWeights:
    """Fit CAM class weights on frames drawn independently of the evaluation frames."""
    train = ScenarioParams(**{**params.__dict__, "frames": frames, "density": "city-overpass"})
    gt = generate_ground_truth(train, seed)
    ext = get_extractor(extractor)
    feats, targets = [], []
    for f in range(frames):
        objs = gt.objects(f)
        feats.append(ext(render_frame(objs, params.width, params.height)))
        targets.append(coverage_targets(objs, params.num_classes, params.width, params.height, ext.stride))
    return fit_class_weights(feats, targets, ridge)


def write_trace(rows, path, keys) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(dict(zip(keys, row))) + "\n")


def write_bundle(out_dir, params: ScenarioParams, seed: int, extractor: ExtractorConfig | None = None, frames: bool = False):
    """Write config.json, ground truth, traces, calibrated class weights and optional PPM frames."""
    import os

    from .cam import save_class_weights
    from .config import RunConfig
    from .oracle import save_ground_truth
    from .tensor import write_ppm

    extractor = extractor or ExtractorConfig()
    os.makedirs(out_dir, exist_ok=True)
    gt = generate_ground_truth(params, seed)
    duration = params.frames / params.fps
    save_ground_truth(gt, os.path.join(out_dir, "ground_truth.jsonl"))
    write_trace(generate_bandwidth_trace(duration, seed + 1), os.path.join(out_dir, "bandwidth.jsonl"), ("t", "bps"))
    write_trace(generate_edge_trace(duration, seed + 2), os.path.join(out_dir, "edge.jsonl"), ("t", "g_max", "base_latency_ms"))
    weights = calibrate_class_weights(params, extractor, seed + 3)
    save_class_weights(weights, os.path.join(out_dir, "class_weights.tnsr"))
    cfg = RunConfig()
    cfg.seed = seed
    cfg.scenario.frames, cfg.scenario.fps = params.frames, params.fps
    cfg.scenario.width, cfg.scenario.height = params.width, params.height
    cfg.scenario.num_classes = params.num_classes
    cfg.extractor.channels = extractor.channels
    cfg.extractor.hidden = list(extractor.hidden)
    cfg.extractor.strides = list(extractor.strides)
    cfg.extractor.seed = extractor.seed
    cfg.layout.top_fraction = params.top_fraction
    cfg.io.ground_truth = "ground_truth.jsonl"
    cfg.io.bandwidth = "bandwidth.jsonl"
    cfg.io.edge = "edge.jsonl"
    cfg.io.class_weights = "class_weights.tnsr"
    if frames:
        fdir = os.path.join(out_dir, "frames")
        os.makedirs(fdir, exist_ok=True)
        for f in range(params.frames):
            write_ppm(render_frame(gt.objects(f), params.width, params.height), os.path.join(fdir, f"{f:05d}.ppm"))
        cfg.io.frames_dir = "frames"
    cfg.save(os.path.join(out_dir, "config.json"))
    return gt
