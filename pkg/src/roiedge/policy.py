"""Per-box down-sampling rate assignment and per-part transmission frequency control."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError, SizeError
from .geometry import Rect
from .kernels import hill_climb_local
from .tensor import scaled_len

SIZE_CLASSES = ("small", "medium", "large")


def _rect(box) -> Rect:
    return box if isinstance(box, Rect) else box.rect


@dataclass(frozen=True)
class RateSet:
    rates: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        if not rates:
            raise ParameterError("rate set is empty")
        if rates[0] <= 0.0:
            raise ParameterError("minimum rate must be positive")
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise ParameterError(f"rates must be strictly ascending: {rates}")
        if rates[-1] != 1.0:
            raise ParameterError("the largest rate must be 1.0")
        object.__setattr__(self, "rates", rates)

    @property
    def r_min(self) -> float:
        return self.rates[0]

    def index(self, r: float) -> int:
        try:
            return self.rates.index(float(r))
        except ValueError:
            raise ParameterError(f"rate {r} is not in {self.rates}") from None

    def __len__(self):
        return len(self.rates)


def _default_accuracy() -> dict[str, tuple[float, ...]]:
    medium = (0.60, 0.80, 0.90, 0.95)
    return {
        "small": tuple(round(max(0.0, a - 0.1), 10) for a in medium),
        "medium": medium,
        "large": tuple(round(min(1.0, a + 0.03), 10) for a in medium),
    }


@dataclass(frozen=True)
class AccuracyProfile:
    """Expected accuracy per rate for each box-size class (area in frame pixels)."""

    table: dict[str, tuple[float, ...]] = field(default_factory=_default_accuracy)
    small_max_area: int = 96 * 96
    large_min_area: int = 768 * 768

    def validate(self, rates: RateSet) -> None:
        for cls in SIZE_CLASSES:
            vals = self.table.get(cls)
            if vals is None or len(vals) != len(rates):
                raise ParameterError(f"accuracy profile '{cls}' needs {len(rates)} values")
            if any(not 0.0 <= v <= 1.0 for v in vals):
                raise ParameterError(f"accuracy profile '{cls}' has values outside [0, 1]")
            if any(b < a for a, b in zip(vals, vals[1:])):
                raise ParameterError(f"accuracy profile '{cls}' must be non-decreasing in rate")

    def size_class(self, box) -> str:
        area = _rect(box).area
        if area < self.small_max_area:
            return "small"
        if area >= self.large_min_area:
            return "large"
        return "medium"

    def accuracy(self, box, rate_index: int) -> float:
        return float(self.table[self.size_class(box)][rate_index])


@dataclass(frozen=True)
class CostProfile:
    """Latency and GPU share both scale with resampled pixels relative to ``p_ref``."""

    latency_ms: float = 10.0
    gpu_gamma: float = 0.05
    p_ref: int = 640 * 640
    w_latency: float = 0.5
    w_gpu: float = 0.5
    latency_norm_ms: float = 10.0
    gpu_norm: float = 0.05

    def latency(self, pixels: int) -> float:
        return self.latency_ms * pixels / self.p_ref

    def gpu(self, pixels: int) -> float:
        return self.gpu_gamma * pixels / self.p_ref

    def cost(self, pixels: int) -> float:
        return self.w_latency * self.latency(pixels) / self.latency_norm_ms + self.w_gpu * self.gpu(pixels) / self.gpu_norm


@dataclass(frozen=True)
class SizeModel:
    kappa: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.kappa <= 1.0:
            raise ParameterError("encoding factor kappa must lie in (0, 1]")

    def nbytes(self, box, r: float) -> float:
        rect = _rect(box)
        return scaled_len(rect.w, r) * scaled_len(rect.h, r) * 3 * self.kappa

    def frame_bytes(self, width: int, height: int) -> float:
        return width * height * 3 * self.kappa


def pixels(box, r: float) -> int:
    rect = _rect(box)
    return scaled_len(rect.w, r) * scaled_len(rect.h, r)


@dataclass(frozen=True)
class PolicyConfig:
    omega: float = 0.1
    rates: RateSet = RateSet()
    accuracy: AccuracyProfile = AccuracyProfile()
    cost: CostProfile = CostProfile()
    size: SizeModel = SizeModel()
    starts: int = 32
    enum_cap: int = 10**6

    def __post_init__(self):
        if self.omega < 0:
            raise ParameterError("omega must be non-negative")
        if self.starts < 2:
            raise ParameterError("hill climbing needs at least the two deterministic starts")
        self.accuracy.validate(self.rates)


@dataclass(frozen=True)
class RateAssignment:
    rates: tuple[float, ...]
    utility: float
    total_bytes: float
    total_gpu: float
    feasible: bool


@dataclass(frozen=True, eq=False)
class Tables:
    """Per-box, per-rate lookup tables, each of shape (N, R)."""

    acc: np.ndarray
    cost: np.ndarray
    nbytes: np.ndarray
    gpu: np.ndarray


def build_tables(boxes, config: PolicyConfig) -> Tables:
    n, r = len(boxes), len(config.rates)
    acc, cost, nb, gp = (np.zeros((n, r)) for _ in range(4))
    for i, b in enumerate(boxes):
        for k, rate in enumerate(config.rates.rates):
            px = pixels(b, rate)
            acc[i, k] = config.accuracy.accuracy(b, k)
            cost[i, k] = config.cost.cost(px)
            nb[i, k] = config.size.nbytes(b, rate)
            gp[i, k] = config.cost.gpu(px)
    return Tables(acc, cost, nb, gp)


def _evaluate(t: Tables, idx, omega: float) -> tuple[float, float, float]:
    sa = sc = sb = sg = 0.0
    for i, k in enumerate(idx):
        sa += t.acc[i, k]
        sc += t.cost[i, k]
        sb += t.nbytes[i, k]
        sg += t.gpu[i, k]
    return float(sa - omega * sc), float(sb), float(sg)


def _indices(boxes, rates, config: PolicyConfig) -> list[int]:
    if len(rates) != len(boxes):
        raise ShapeError(f"{len(rates)} rates for {len(boxes)} boxes")
    return [config.rates.index(r) for r in rates]


def utility(boxes, rates, config: PolicyConfig = PolicyConfig()) -> float:
    """Sum of per-box accuracy minus omega times summed resource cost."""
    idx = _indices(boxes, rates, config)
    return _evaluate(build_tables(boxes, config), idx, config.omega)[0]


def feasible(boxes, rates, budget_bytes: float, budget_gpu: float, config: PolicyConfig = PolicyConfig()) -> bool:
    idx = _indices(boxes, rates, config)
    if any(r < config.rates.r_min for r in rates):
        return False
    _, sb, sg = _evaluate(build_tables(boxes, config), idx, config.omega)
    return sb <= budget_bytes and sg <= budget_gpu


def _assignment(t: Tables, idx, config: PolicyConfig, budget_bytes, budget_gpu) -> RateAssignment:
    u, sb, sg = _evaluate(t, idx, config.omega)
    rates = tuple(config.rates.rates[k] for k in idx)
    return RateAssignment(rates, u, sb, sg, bool(sb <= budget_bytes and sg <= budget_gpu))


def _infeasible() -> RateAssignment:
    return RateAssignment((), 0.0, 0.0, 0.0, False)


def _better(cand: tuple, best: tuple | None) -> bool:
    """Tie order: higher utility, then fewer bytes, then lexicographically smaller rates."""
    if best is None:
        return True
    (u1, b1, i1), (u2, b2, i2) = cand, best
    if u1 != u2:
        return u1 > u2
    if b1 != b2:
        return b1 < b2
    return tuple(i1) < tuple(i2)


def brute_force_opt(boxes, config: PolicyConfig, budget_bytes: float, budget_gpu: float) -> RateAssignment:
    """Exhaustive search over every rate vector; the reference for ``hill_climb``."""
    n, r = len(boxes), len(config.rates)
    if r**n > config.enum_cap:
        raise SizeError(f"{r}^{n} assignments exceed the enumeration cap {config.enum_cap}")
    if n == 0:
        return RateAssignment((), 0.0, 0.0, 0.0, True)
    t = build_tables(boxes, config)
    best = None
    for idx in itertools.product(range(r), repeat=n):
        u, sb, sg = _evaluate(t, idx, config.omega)
        if sb > budget_bytes or sg > budget_gpu:
            continue
        if _better((u, sb, idx), best):
            best = (u, sb, idx)
    if best is None:
        return _infeasible()
    return _assignment(t, best[2], config, budget_bytes, budget_gpu)


def _fits(t: Tables, idx, budget_bytes, budget_gpu) -> bool:
    _, sb, sg = _evaluate(t, idx, 0.0)
    return sb <= budget_bytes and sg <= budget_gpu


def _repair(t: Tables, idx: list[int], omega: float, budget_bytes: float, budget_gpu: float) -> list[int]:
    """Step boxes down until the budgets hold, each time giving up the least
    utility per unit of normalized load released."""
    idx = list(idx)
    bb = budget_bytes if budget_bytes > 0 else 1.0
    gg = budget_gpu if budget_gpu > 0 else 1.0
    while not _fits(t, idx, budget_bytes, budget_gpu):
        best_i, best_ratio = -1, 0.0
        for i, k in enumerate(idx):
            if k == 0:
                continue
            freed = (t.nbytes[i, k] - t.nbytes[i, k - 1]) / bb + (t.gpu[i, k] - t.gpu[i, k - 1]) / gg
            lost = (t.acc[i, k] - t.acc[i, k - 1]) - omega * (t.cost[i, k] - t.cost[i, k - 1])
            ratio = lost / freed if freed > 0 else float("inf")
            if best_i < 0 or ratio < best_ratio:
                best_i, best_ratio = i, ratio
        if best_i < 0:
            break
        idx[best_i] -= 1
    return idx


def hill_climb(
    boxes, config: PolicyConfig, budget_bytes: float, budget_gpu: float, starts: int | None = None, seed: int = 0
) -> RateAssignment:
    """Multi-start first-improvement hill climbing over the discrete rate grid.

    Starts: all-minimum, all-maximum repaired downward to feasibility, and
    ``starts - 2`` seeded random points repaired the same way.
    """
    n, r = len(boxes), len(config.rates)
    if n == 0:
        return RateAssignment((), 0.0, 0.0, 0.0, True)
    starts = config.starts if starts is None else starts
    t = build_tables(boxes, config)
    lowest = [0] * n
    if not _fits(t, lowest, budget_bytes, budget_gpu):
        return _infeasible()
    rng = np.random.default_rng(seed)
    points = [lowest, _repair(t, [r - 1] * n, config.omega, budget_bytes, budget_gpu)]
    for _ in range(max(0, starts - 2)):
        points.append(_repair(t, rng.integers(0, r, n).tolist(), config.omega, budget_bytes, budget_gpu))
    best = None
    for p in points:
        local = hill_climb_local(t.acc, t.cost, t.nbytes, t.gpu, config.omega, budget_bytes, budget_gpu, p)
        local = [int(k) for k in local]
        u, sb, _ = _evaluate(t, local, config.omega)
        if _better((u, sb, local), best):
            best = (u, sb, local)
    return _assignment(t, best[2], config, budget_bytes, budget_gpu)


def uniform_assignment(boxes, rate: float, config: PolicyConfig, budget_bytes=float("inf"), budget_gpu=float("inf")) -> RateAssignment:
    t = build_tables(boxes, config)
    k = config.rates.index(rate)
    return _assignment(t, [k] * len(boxes), config, budget_bytes, budget_gpu)


# ---------------------------------------------------------------------------
# transmission frequency


INIT_FRE = 30
FRE_INTERVAL = 5
MIN_FRE = 1


@dataclass
class FrequencyController:
    """Per-part offload frequency in frames per second.

    A miss lowers the part's frequency by ``interval`` down to ``floor``; any
    detection restores ``init_fre``.
    """

    parts: tuple[int, ...] = (3, 4, 5)
    init_fre: int = INIT_FRE
    interval: int = FRE_INTERVAL
    floor: int = MIN_FRE
    fre: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        for k in self.parts:
            self.fre.setdefault(k, self.init_fre)

    def step(self, part: int, detections_found: bool) -> int:
        if part not in self.fre:
            raise ParameterError(f"part {part} is not controlled")
        if detections_found:
            self.fre[part] = self.init_fre
        else:
            self.fre[part] = max(self.floor, self.fre[part] - self.interval)
        return self.fre[part]

    def should_offload(self, part: int, frame_index: int, fps: int = 30) -> bool:
        fre = self.fre[part]
        stride = max(1, int(fps / fre + 0.5))
        return frame_index % stride == 0


def frequency_step(ctrl: FrequencyController, part: int, detections_found: bool) -> int:
    return ctrl.step(part, detections_found)


def should_offload(ctrl: FrequencyController, part: int, frame_index: int, fps: int = 30) -> bool:
    return ctrl.should_offload(part, frame_index, fps)
