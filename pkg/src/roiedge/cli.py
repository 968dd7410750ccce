"""Command-line entry point: ``roiedge <subcommand>``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from .config import RunConfig
from .errors import RoiEdgeError
from .partition import make_layout, occupancy_stats
from .roi import select_valid
from .scenario import DENSITY_PROFILES, ScenarioParams, write_bundle
from .sim import Scenario, extract_boxes, run_simulation

log = logging.getLogger("roiedge")


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if getattr(args, "set", None):
        cfg = cfg.with_overrides(args.set)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _covered_fraction(boxes, width, height) -> float:
    mask = np.zeros((height, width), dtype=bool)
    for b in boxes:
        r = b.rect
        mask[r.y : r.y1, r.x : r.x1] = True
    return float(mask.mean())


def cmd_extract(args) -> int:
    from .cam import load_class_weights
    from .sim import Scenario
    from .tensor import FeatureMap, get_extractor, load_tensor, read_image

    cfg = _load_config(args)
    for path in (args.image, args.tensor):
        if path and not os.path.exists(path):
            raise RoiEdgeError(f"input file not found: {path}")
    scn = Scenario.from_config(cfg)
    if args.image:
        img = read_image(args.image)
        cfg.scenario.width, cfg.scenario.height = img.width, img.height
        scn._features[args.frame] = get_extractor(cfg.extractor_config())(img)
    elif args.tensor:
        stride = cfg.extractor_config().stride
        scn._features[args.frame] = FeatureMap(load_tensor(args.tensor), stride)
    parts = (1, 2, 3, 4, 5) if cfg.layout.include_top else (3, 4, 5)
    boxes = select_valid(extract_boxes(scn, args.frame, parts), cfg.roi_config().validity)
    lines = [
        json.dumps({
            "part": b.part, "x": b.rect.x, "y": b.rect.y, "w": b.rect.w, "h": b.rect.h,
            "heat_mass": b.heat_mass, "mean_heat": b.mean_heat, "cells": b.cells,
        }, sort_keys=True)
        for b in boxes
    ]
    out = args.out or "boxes.jsonl"
    with open(out, "w") as fh:
        fh.write("".join(line + "\n" for line in lines))
    frac = _covered_fraction(boxes, cfg.scenario.width, cfg.scenario.height)
    print(f"{len(boxes)} boxes, covered area {frac:.4%} -> {out}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    if args.sweep:
        return _sweep(cfg, args.out, args.bandwidths)
    scn = Scenario.from_config(cfg)
    res = run_simulation(scn)
    out = args.out or "run"
    res.write(out, cfg)
    s = res.summary
    print(
        f"{s['frames']} frames: mean F1 {s['mean_f1']:.4f}, bytes ratio {s['bytes_ratio']:.4%}, "
        f"mean utility {s['mean_utility']:.4f} -> {out}"
    )
    return 0


def sweep_rows(cfg: RunConfig, bandwidths_mbps, out_dir: str | None = None) -> list[dict]:
    """Re-run the scenario at each constant bandwidth; frames are featurized once."""
    base = Scenario.from_config(cfg)
    rows = []
    for mbps in bandwidths_mbps:
        run_cfg = cfg.with_overrides([f"link.bandwidth_bps={float(mbps) * 1e6!r}"])
        run_cfg.io.bandwidth = None
        scn = Scenario.from_config(run_cfg)
        scn._features = base._features
        res = run_simulation(scn)
        if out_dir:
            res.write(os.path.join(out_dir, f"bw_{float(mbps):g}mbps"), run_cfg)
        s = res.summary
        rows.append({
            "bandwidth_mbps": float(mbps), "mean_f1": s["mean_f1"], "mean_bytes": s["mean_bytes"],
            "mean_utility": s["mean_utility"], "bytes_ratio": s["bytes_ratio"],
        })
    return rows


def _sweep(cfg: RunConfig, out: str | None, bandwidths: str | None) -> int:
    mbps = [float(x) for x in bandwidths.split(",")] if bandwidths else cfg.sweep.bandwidths_mbps
    out = out or "sweep"
    os.makedirs(out, exist_ok=True)
    rows = sweep_rows(cfg, mbps, out)
    with open(os.path.join(out, "sweep.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) for k, v in row.items()})
    for row in rows:
        print(f"{row['bandwidth_mbps']:>7g} Mbps  F1 {row['mean_f1']:.4f}  bytes {row['mean_bytes']:.1f}  utility {row['mean_utility']:.4f}")
    return 0


def cmd_sweep(args) -> int:
    return _sweep(_load_config(args), args.out, args.bandwidths)


def cmd_gen_scenario(args) -> int:
    params = ScenarioParams(
        frames=args.frames, width=args.width, height=args.height, fps=args.fps,
        density=args.density, num_classes=args.classes,
    )
    out = args.out or "scenario"
    gt = write_bundle(out, params, args.seed, frames=args.frames_ppm)
    print(f"{gt.total_objects()} objects over {params.frames} frames -> {out}")
    return 0


def cmd_stats(args) -> int:
    from .oracle import load_ground_truth

    cfg = _load_config(args)
    s = cfg.scenario
    path = args.ground_truth or cfg.resolve(cfg.io.ground_truth)
    if not path:
        raise RoiEdgeError("no ground truth given (use --ground-truth or io.ground_truth)")
    gt = load_ground_truth(path, s.frames, (s.width, s.height))
    layout = make_layout(s.width, s.height, cfg.layout.top_fraction, cfg.layout.center_fraction)
    stats = occupancy_stats(gt, layout)
    if args.json:
        print(json.dumps(stats, indent=2, sort_keys=True))
        return 0
    print(f"frames {stats['frames']}, objects {stats['objects']}" + ("  (empty ground truth)" if stats["empty"] else ""))
    labels = {"top": "P1 u P2", "center_top": "P5 n (P1 u P2)"}
    for key, p in stats["probabilities"].items():
        print(f"{labels.get(key, key):<16} {100 * p:8.3f} %")
    return 0


def cmd_serve_edge(args) -> int:
    from .oracle import GroundTruth, load_ground_truth
    from .sim import InProcessEdge
    from .transport import EdgeServer

    cfg = _load_config(args)
    s = cfg.scenario
    gt_path = cfg.resolve(cfg.io.ground_truth)
    gt = load_ground_truth(gt_path, s.frames, (s.width, s.height)) if gt_path else GroundTruth(s.frames)
    with EdgeServer((args.host, args.port), InProcessEdge(gt, cfg.oracle_model())) as server:
        host, port = server.server_address[:2]
        print(f"edge listening on {host}:{port}", flush=True)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
    return 0


def cmd_run_device(args) -> int:
    from .transport import SocketEdge

    cfg = _load_config(args)
    scn = Scenario.from_config(cfg)
    with SocketEdge(args.host, args.port) as edge:
        res = run_simulation(scn, edge=edge)
    out = args.out or "run"
    res.write(out, cfg)
    print(f"{res.summary['frames']} frames via {args.host}:{args.port}: mean F1 {res.summary['mean_f1']:.4f} -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roiedge", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help="run-config JSON file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a dotted config key")
        sp.add_argument("--out", help="output file or directory")
        if seed:
            sp.add_argument("--seed", type=int)

    sp = sub.add_parser("extract", help="extract valid RoI boxes from one frame")
    common(sp)
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--image", help="PPM (P6) or PNG frame")
    src.add_argument("--tensor", help="feature tensor file (C, H, W)")
    sp.add_argument("--frame", type=int, default=0, help="scenario frame to render when no input is given")
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("simulate", help="run the device-edge simulation")
    common(sp)
    sp.add_argument("--sweep", action="store_true", help="re-run over constant bandwidths")
    sp.add_argument("--bandwidths", help="comma-separated Mbps list for --sweep")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="bandwidth sweep: (bandwidth, mean F1, mean bytes) rows")
    common(sp)
    sp.add_argument("--bandwidths", help="comma-separated Mbps list")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("gen-scenario", help="write a synthetic scenario bundle")
    sp.add_argument("--out", help="bundle directory")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--frames", type=int, default=60)
    sp.add_argument("--width", type=int, default=1280)
    sp.add_argument("--height", type=int, default=720)
    sp.add_argument("--fps", type=int, default=30)
    sp.add_argument("--classes", type=int, default=3)
    sp.add_argument("--density", choices=sorted(DENSITY_PROFILES), default="road")
    sp.add_argument("--frames-ppm", action="store_true", help="also write rendered frames as PPM")
    sp.set_defaults(func=cmd_gen_scenario)

    sp = sub.add_parser("stats", help="object occupancy per layout region")
    common(sp, seed=False)
    sp.add_argument("--ground-truth", help="ground-truth JSONL (defaults to io.ground_truth)")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("serve-edge", help="run the edge agent as a TCP server")
    common(sp)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=7070)
    sp.set_defaults(func=cmd_serve_edge)

    sp = sub.add_parser("run-device", help="run the device side against a serve-edge process")
    common(sp)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=7070)
    sp.set_defaults(func=cmd_run_device)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (RoiEdgeError, OSError) as exc:
        print(f"roiedge: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
