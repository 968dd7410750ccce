"""Class activation maps over (cropped) feature maps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ParameterError, ShapeError
from .tensor import FeatureMap, Tensor, load_tensor, save_tensor

AGGREGATE = "aggregate"


@dataclass(frozen=True, eq=False)
class ClassWeights:
    """K x C matrix; row i holds the per-channel weights of class i."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=np.float32)
        if m.ndim != 2:
            raise ShapeError(f"class weights must be 2-D (K, C), got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InputError("class weights contain non-finite values")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def num_classes(self) -> int:
        return self.matrix.shape[0]

    @property
    def channels(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def random(cls, num_classes: int, channels: int, seed: int = 0) -> "ClassWeights":
        rng = np.random.default_rng(seed)
        return cls(rng.standard_normal((num_classes, channels)).astype(np.float32))

    def to_tensor(self) -> Tensor:
        return Tensor(self.matrix[:, :, None])

    @classmethod
    def from_tensor(cls, t: Tensor) -> "ClassWeights":
        k, c, one = t.shape
        if one != 1:
            raise ShapeError(f"class-weight tensor must have shape (K, C, 1), got {t.shape}")
        return cls(t.data[:, :, 0])


def save_class_weights(w: ClassWeights, path) -> None:
    save_tensor(w.to_tensor(), path)


def load_class_weights(path) -> ClassWeights:
    return ClassWeights.from_tensor(load_tensor(path))


@dataclass(frozen=True, eq=False)
class ActivationMap:
    values: np.ndarray
    class_id: int | str = AGGREGATE
    crop_id: int | None = None

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise ShapeError(f"activation map must be 2-D, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InputError("activation map contains non-finite values")
        v = np.array(v, dtype=np.float32)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]


def global_pool(f: FeatureMap) -> np.ndarray:
    """Per-channel spatial mean, accumulated in float64."""
    c, h, w = f.tensor.shape
    if c == 0 or h == 0 or w == 0:
        raise InputError("cannot pool an empty feature map")
    return f.tensor.data.astype(np.float64).mean(axis=(1, 2))


def compute_cam(f: FeatureMap, w: ClassWeights, class_id: int, crop_id: int | None = None) -> ActivationMap:
    """M(x, y) = sum_c w[class, c] * F_c(x, y).

    Channels are accumulated one at a time in channel order, so every pixel
    sees the same summation sequence regardless of where the map was cropped.
    """
    if f.channels != w.channels:
        raise ShapeError(f"feature map has {f.channels} channels, class weights expect {w.channels}")
    if not 0 <= class_id < w.num_classes:
        raise ParameterError(f"class id {class_id} outside [0, {w.num_classes})")
    row = w.matrix[class_id]
    data = f.tensor.data
    acc = np.zeros(data.shape[1:], dtype=np.float32)
    for c in range(f.channels):
        acc += row[c] * data[c]
    return ActivationMap(acc, class_id, crop_id)


def aggregate_classes(maps: list[ActivationMap], mode: str = "max") -> ActivationMap:
    if not maps:
        raise InputError("need at least one activation map")
    shape = maps[0].shape
    for m in maps[1:]:
        if m.shape != shape:
            raise ShapeError(f"activation maps differ in shape: {shape} vs {m.shape}")
    if len(maps) == 1:
        return ActivationMap(maps[0].values, maps[0].class_id, maps[0].crop_id)
    stack = np.stack([m.values for m in maps])
    if mode == "max":
        vals = stack.max(axis=0)
    elif mode == "sum":
        vals = stack.sum(axis=0, dtype=np.float32)
    else:
        raise ParameterError(f"unknown aggregation mode {mode!r}")
    return ActivationMap(vals, AGGREGATE, maps[0].crop_id)


def normalize_map(m: ActivationMap) -> ActivationMap:
    v = m.values.astype(np.float64)
    lo, hi = v.min(), v.max()
    if hi == lo:
        out = np.zeros_like(v)
    else:
        out = np.clip((v - lo) / (hi - lo), 0.0, 1.0)
    return ActivationMap(out.astype(np.float32), m.class_id, m.crop_id)


def class_activation(f: FeatureMap, w: ClassWeights, classes, mode: str = "max", crop_id=None) -> ActivationMap:
    """Aggregate-then-normalize CAM for a set of target classes."""
    maps = [compute_cam(f, w, int(k), crop_id) for k in classes]
    return normalize_map(aggregate_classes(maps, mode))


def fit_class_weights(features: list[FeatureMap], targets: list[np.ndarray], ridge: float = 1e-3) -> ClassWeights:
    """Ridge-regress per-cell class coverage onto feature channels, without intercept.

    ``targets[j]`` has shape (K, H, W) matching ``features[j]``'s spatial grid.
    No intercept is fitted because the CAM itself has none; background cells
    (target 0) then map to values near zero for every class.
    """
    if not features or len(features) != len(targets):
        raise InputError("need matching, non-empty feature and target lists")
    xs, ys = [], []
    for f, t in zip(features, targets):
        c, h, w = f.tensor.shape
        if t.shape[1:] != (h, w):
            raise ShapeError(f"target grid {t.shape[1:]} does not match features {(h, w)}")
        xs.append(f.tensor.data.reshape(c, -1).T.astype(np.float64))
        ys.append(t.reshape(t.shape[0], -1).T.astype(np.float64))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    scale = np.sqrt((x**2).mean(axis=0))
    scale[scale == 0] = 1.0
    xs_ = x / scale
    gram = xs_.T @ xs_ + ridge * len(x) * np.eye(x.shape[1])
    beta = np.linalg.solve(gram, xs_.T @ y) / scale[:, None]
    return ClassWeights(beta.T.astype(np.float32))
