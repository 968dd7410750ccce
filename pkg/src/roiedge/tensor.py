"""Tensor container, tensor file format, synthetic feature extractor, image resampling."""
from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, InputError, ParameterError, ShapeError

MAGIC = b"ROITNSR1"
_HEADER = struct.Struct("<8sIII")


def scaled_len(n: int, r: float) -> int:
    """ceil(n * r), robust to products like 10 * 0.3 landing just above an integer."""
    return max(1, math.ceil(round(n * r, 9)))


@dataclass(frozen=True, eq=False)
class Tensor:
    """C x H x W float32 tensor stored row-major."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ShapeError(f"tensor must be 3-D (C, H, W), got shape {arr.shape}")
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        if not np.all(np.isfinite(arr)):
            raise InputError("tensor contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.shape == other.shape and self.data.tobytes() == other.data.tobytes()

    def __hash__(self):
        return hash((self.shape, self.data.tobytes()))


@dataclass(frozen=True)
class FeatureMap:
    tensor: Tensor
    stride: int = 32

    def __post_init__(self):
        if self.stride < 1:
            raise ParameterError("stride must be >= 1")

    @property
    def channels(self) -> int:
        return self.tensor.shape[0]

    @property
    def height(self) -> int:
        return self.tensor.shape[1]

    @property
    def width(self) -> int:
        return self.tensor.shape[2]


@dataclass(frozen=True, eq=False)
class Image:
    """RGB8 image; ``pixels`` has shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ShapeError(f"image must be (H, W, 3), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ShapeError("image must be non-empty")
        px = np.ascontiguousarray(px, dtype=np.uint8)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))


# ---------------------------------------------------------------------------
# tensor files


def tensor_to_bytes(t: Tensor) -> bytes:
    c, h, w = t.shape
    return _HEADER.pack(MAGIC, c, h, w) + t.data.astype("<f4", copy=False).tobytes()


def tensor_from_bytes(buf: bytes) -> Tensor:
    if len(buf) < _HEADER.size:
        raise FormatError(f"tensor header truncated: {len(buf)} < {_HEADER.size} bytes")
    magic, c, h, w = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    expected = c * h * w * 4
    payload = buf[_HEADER.size:]
    if len(payload) != expected:
        raise FormatError(f"payload length {len(payload)} does not match shape ({c},{h},{w}) -> {expected}")
    arr = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(c, h, w)
    if not np.all(np.isfinite(arr)):
        raise FormatError("tensor payload contains non-finite values")
    return Tensor(arr)


def save_tensor(t: Tensor, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(tensor_to_bytes(t))


def load_tensor(path: str | os.PathLike) -> Tensor:
    with open(path, "rb") as fh:
        return tensor_from_bytes(fh.read())


# ---------------------------------------------------------------------------
# PPM images


def write_ppm(img: Image, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(f"P6\n{img.width} {img.height}\n255\n".encode("ascii"))
        fh.write(img.pixels.tobytes())


def _ppm_tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    tokens: list[bytes] = []
    pos = 0
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos : pos + 1] == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("PPM header truncated")
        tokens.append(buf[start:pos])
    return tokens, pos + 1  # single whitespace byte ends the header


def read_ppm(path: str | os.PathLike) -> Image:
    with open(path, "rb") as fh:
        buf = fh.read()
    tokens, offset = _ppm_tokens(buf, 4)
    if tokens[0] != b"P6":
        raise FormatError(f"{path}: only binary PPM (P6) is supported")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise FormatError(f"{path}: bad PPM header") from exc
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PPM is supported")
    body = buf[offset : offset + 3 * w * h]
    if len(body) != 3 * w * h:
        raise FormatError(f"{path}: pixel data truncated")
    return Image(np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3))


def read_image(path: str | os.PathLike) -> Image:
    p = os.fspath(path)
    if p.lower().endswith(".png"):
        try:
            from PIL import Image as PILImage
        except ImportError as exc:  # pragma: no cover - optional
            raise FormatError("PNG input needs Pillow installed") from exc
        with PILImage.open(p) as im:
            return Image(np.asarray(im.convert("RGB")))
    return read_ppm(p)


# ---------------------------------------------------------------------------
# synthetic feature extractor


def _conv3x3(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, stride: int) -> np.ndarray:
    """3x3 convolution with replicate padding; output cell (i, j) is centred on input (i*s, j*s).

    Every output value accumulates taps in the same order, so results do not
    depend on where a cell sits and spatially constant input stays exactly
    constant.
    """
    from .kernels import conv3x3_padded

    _, h, w = x.shape
    oh, ow = -(-h // stride), -(-w // stride)
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)), mode="edge")
    return conv3x3_padded(padded, weight, bias, stride, oh, ow)


@dataclass(frozen=True)
class ExtractorConfig:
    channels: int = 64
    hidden: tuple[int, int] = (16, 32)
    strides: tuple[int, int, int] = (4, 4, 2)
    seed: int = 0

    @property
    def stride(self) -> int:
        return self.strides[0] * self.strides[1] * self.strides[2]


@dataclass(frozen=True, eq=False)
class SyntheticExtractor:
    """Three 3x3 conv + ReLU layers with seeded He-normal weights."""

    config: ExtractorConfig = field(default_factory=ExtractorConfig)
    layers: tuple = field(init=False, repr=False)

    def __post_init__(self):
        cfg = self.config
        if len(cfg.strides) != 3 or min(cfg.strides) < 1:
            raise ParameterError("extractor needs three positive layer strides")
        rng = np.random.default_rng(cfg.seed)
        widths = [3, *cfg.hidden, cfg.channels]
        layers = []
        for c_in, c_out, s in zip(widths[:-1], widths[1:], cfg.strides):
            std = math.sqrt(2.0 / (9 * c_in))
            weight = (rng.standard_normal((c_out, c_in, 3, 3)) * std).astype(np.float32)
            bias = (rng.standard_normal(c_out) * 0.1).astype(np.float32)
            layers.append((weight, bias, s))
        object.__setattr__(self, "layers", tuple(layers))

    @property
    def stride(self) -> int:
        return self.config.stride

    def __call__(self, img: Image) -> FeatureMap:
        if img.width < self.stride or img.height < self.stride:
            raise InputError(f"image {img.width}x{img.height} is smaller than stride {self.stride}")
        x = img.pixels.transpose(2, 0, 1).astype(np.float32) / np.float32(255.0)
        for weight, bias, s in self.layers:
            x = np.maximum(_conv3x3(x, weight, bias, s), np.float32(0.0))
        return FeatureMap(Tensor(x), self.stride)


_EXTRACTORS: dict[ExtractorConfig, SyntheticExtractor] = {}


def get_extractor(config: ExtractorConfig) -> SyntheticExtractor:
    ext = _EXTRACTORS.get(config)
    if ext is None:
        ext = _EXTRACTORS[config] = SyntheticExtractor(config)
    return ext


def extract_features(img: Image, extractor_seed: int, channels: int = 64) -> FeatureMap:
    return get_extractor(ExtractorConfig(channels=channels, seed=extractor_seed))(img)


# ---------------------------------------------------------------------------
# resampling


def _area_weights(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic (n_out, n_in) matrix of fractional overlaps."""
    scale = n_in / n_out
    wts = np.zeros((n_out, n_in), dtype=np.float64)
    for j in range(n_out):
        lo, hi = j * scale, (j + 1) * scale
        first, last = int(math.floor(lo)), min(n_in, int(math.ceil(hi)))
        for k in range(first, last):
            wts[j, k] = min(hi, k + 1) - max(lo, k)
        wts[j] /= wts[j].sum()
    return wts


def downsample_image(img: Image, r: float) -> Image:
    if not (0.0 < r <= 1.0):
        raise ParameterError(f"down-sampling rate must lie in (0, 1], got {r}")
    if r == 1.0:
        return Image(img.pixels.copy())
    ow, oh = scaled_len(img.width, r), scaled_len(img.height, r)
    wy = _area_weights(img.height, oh)
    wx = _area_weights(img.width, ow)
    px = img.pixels.astype(np.float64)
    out = np.einsum("yh,hwc,xw->yxc", wy, px, wx, optimize=True)
    return Image(np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8))
