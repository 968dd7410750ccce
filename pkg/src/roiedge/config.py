"""Run configuration: one JSON file per experiment, strict keys, dotted overrides."""
from __future__ import annotations

import dataclasses
import json
import os
import typing
from dataclasses import dataclass, field

from .cam import AGGREGATE  # noqa: F401  (re-exported for callers building configs)
from .errors import ConfigError
from .oracle import OracleModel
from .policy import AccuracyProfile, CostProfile, PolicyConfig, RateSet, SizeModel
from .roi import RoiConfig, ValidityPolicy
from .tensor import ExtractorConfig


@dataclass
class ScenarioSection:
    frames: int = 60
    fps: int = 30
    width: int = 1280
    height: int = 720
    num_classes: int = 3


@dataclass
class ExtractorSection:
    channels: int = 64
    hidden: list[int] = field(default_factory=lambda: [16, 32])
    strides: list[int] = field(default_factory=lambda: [4, 4, 2])
    seed: int = 0


@dataclass
class LayoutSection:
    top_fraction: float = 0.5
    center_fraction: float = 0.5
    include_top: bool = False


@dataclass
class CamSection:
    target_classes: list[int] | None = None
    aggregate: str = "max"


@dataclass
class RoiSection:
    sigma_m: float = 0.5
    pad: int = 8
    merge_iou: float = 0.2
    min_area: int = 32 * 32
    sigma_v: float = 0.55
    max_boxes: int | None = 6


@dataclass
class PolicySection:
    omega: float = 0.1
    rates: list[float] = field(default_factory=lambda: [0.25, 0.5, 0.75, 1.0])
    accuracy: dict[str, list[float]] | None = None
    small_max_area: int = 96 * 96
    large_min_area: int = 768 * 768
    latency_ms: float = 10.0
    gpu_gamma: float = 0.05
    p_ref: int = 640 * 640
    w_latency: float = 0.5
    w_gpu: float = 0.5
    latency_norm_ms: float = 10.0
    gpu_norm: float = 0.05
    kappa: float = 0.1
    starts: int = 32
    enum_cap: int = 10**6
    solver: str = "hill_climb"
    rate_override: float | None = None


@dataclass
class OracleSection:
    s_min: float = 12.0
    coverage: float = 0.5
    iou_threshold: float = 0.5


@dataclass
class LinkSection:
    loss_rate: float = 0.0
    bandwidth_bps: float = 20e6
    g_max: float = 1.0
    base_latency_ms: float = 10.0


@dataclass
class FrequencySection:
    enabled: bool = True
    init_fre: int = 30
    interval: int = 5
    floor: int = 1


@dataclass
class IoSection:
    ground_truth: str | None = None
    bandwidth: str | None = None
    edge: str | None = None
    class_weights: str | None = None
    frames_dir: str | None = None


@dataclass
class SweepSection:
    bandwidths_mbps: list[float] = field(default_factory=lambda: [100, 90, 80, 70, 60, 50, 40, 30, 20, 10])


@dataclass
class RunConfig:
    seed: int = 0
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    extractor: ExtractorSection = field(default_factory=ExtractorSection)
    layout: LayoutSection = field(default_factory=LayoutSection)
    cam: CamSection = field(default_factory=CamSection)
    roi: RoiSection = field(default_factory=RoiSection)
    policy: PolicySection = field(default_factory=PolicySection)
    oracle: OracleSection = field(default_factory=OracleSection)
    link: LinkSection = field(default_factory=LinkSection)
    frequency: FrequencySection = field(default_factory=FrequencySection)
    io: IoSection = field(default_factory=IoSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    base_dir: str = field(default=".", metadata={"serialize": False})

    # -- construction -------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict, base_dir: str = ".") -> "RunConfig":
        cfg = _build(cls, data, "")
        cfg.base_dir = base_dir
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data, os.path.dirname(os.path.abspath(path)))

    def to_dict(self) -> dict:
        return _dump(self)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def with_overrides(self, assignments: list[str]) -> "RunConfig":
        data = self.to_dict()
        for item in assignments:
            key, sep, raw = item.partition("=")
            if not sep:
                raise ConfigError(f"override {item!r} is not key=value")
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            node = data
            parts = key.split(".")
            for p in parts[:-1]:
                if not isinstance(node.get(p), dict):
                    raise ConfigError(f"unknown config section in {key!r}")
                node = node[p]
            if parts[-1] not in node:
                raise ConfigError(f"unknown config key {key!r}")
            node[parts[-1]] = value
        return RunConfig.from_dict(data, self.base_dir)

    def resolve(self, rel: str | None) -> str | None:
        if rel is None:
            return None
        return rel if os.path.isabs(rel) else os.path.join(self.base_dir, rel)

    # -- validation and typed views -----------------------------------------

    def validate(self) -> None:
        s = self.scenario
        if s.frames < 0 or s.fps <= 0 or s.width < 1 or s.height < 1 or s.num_classes < 1:
            raise ConfigError("scenario needs frames >= 0, fps > 0, positive size and classes")
        if not 0.0 <= self.link.loss_rate <= 1.0:
            raise ConfigError("link.loss_rate must lie in [0, 1]")
        if self.policy.solver not in ("hill_climb", "brute_force"):
            raise ConfigError(f"unknown policy.solver {self.policy.solver!r}")
        if self.cam.aggregate not in ("max", "sum"):
            raise ConfigError(f"unknown cam.aggregate {self.cam.aggregate!r}")
        try:
            pc = self.policy_config()
            self.roi_config()
            self.layout_check()
            ExtractorConfig(**self.extractor_kwargs())
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.policy.rate_override is not None:
            try:
                pc.rates.index(self.policy.rate_override)
            except ValueError as exc:
                raise ConfigError(f"policy.rate_override: {exc}") from exc
        if self.cam.target_classes is not None:
            bad = [k for k in self.cam.target_classes if not 0 <= k < s.num_classes]
            if bad or not self.cam.target_classes:
                raise ConfigError(f"cam.target_classes must be non-empty ids below {s.num_classes}")

    def layout_check(self) -> None:
        from .partition import make_layout

        make_layout(self.scenario.width, self.scenario.height, self.layout.top_fraction, self.layout.center_fraction)

    def extractor_kwargs(self) -> dict:
        e = self.extractor
        if len(e.hidden) != 2 or len(e.strides) != 3:
            raise ConfigError("extractor.hidden needs 2 widths and extractor.strides 3 strides")
        return {"channels": e.channels, "hidden": tuple(e.hidden), "strides": tuple(e.strides), "seed": e.seed}

    def extractor_config(self) -> ExtractorConfig:
        return ExtractorConfig(**self.extractor_kwargs())

    def roi_config(self) -> RoiConfig:
        r = self.roi
        return RoiConfig(r.sigma_m, r.pad, r.merge_iou, ValidityPolicy(r.min_area, r.sigma_v, r.max_boxes))

    def policy_config(self) -> PolicyConfig:
        p = self.policy
        rates = RateSet(tuple(p.rates))
        if p.accuracy is None:
            acc = AccuracyProfile(small_max_area=p.small_max_area, large_min_area=p.large_min_area)
        else:
            acc = AccuracyProfile({k: tuple(v) for k, v in p.accuracy.items()}, p.small_max_area, p.large_min_area)
        cost = CostProfile(p.latency_ms, p.gpu_gamma, p.p_ref, p.w_latency, p.w_gpu, p.latency_norm_ms, p.gpu_norm)
        return PolicyConfig(p.omega, rates, acc, cost, SizeModel(p.kappa), p.starts, p.enum_cap)

    def oracle_model(self) -> OracleModel:
        pc = self.policy_config()
        return OracleModel(self.oracle.s_min, self.oracle.coverage, pc.rates, pc.accuracy)


def _hints(cls):
    return typing.get_type_hints(cls)


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section {path or '<root>'} must be an object")
    hints = _hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.metadata.get("serialize", True)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {path or '<root>'}: {', '.join(unknown)}")
    kwargs = {}
    for name in names & set(data):
        value = data[name]
        hint = hints[name]
        if dataclasses.is_dataclass(hint):
            kwargs[name] = _build(hint, value, f"{path}.{name}".lstrip("."))
        else:
            kwargs[name] = value
    return cls(**kwargs)


def _dump(obj) -> dict:
    out = {}
    for f in dataclasses.fields(obj):
        if not f.metadata.get("serialize", True):
            continue
        v = getattr(obj, f.name)
        out[f.name] = _dump(v) if dataclasses.is_dataclass(v) else v
    return out
