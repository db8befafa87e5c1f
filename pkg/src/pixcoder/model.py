"""Convolutional vision model mapping standardized GUI images to score vectors.

Everything here is plain numpy: 3x3 same-padded convolutions computed as a
patch matrix times a weight matrix, 2x2 max pooling, dense layers and a
per-bit logistic (or region-wise softmax) output. Activations are NHWC.
"""
from __future__ import annotations

import csv
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

log = logging.getLogger(__name__)

_OFFSETS = [(di, dj) for di in range(3) for dj in range(3)]
SUPPORTED_SIZES = (64, 128, 256)


class ShapeMismatch(ValueError):
    pass


class DivergenceError(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


class Conv3x3:
    """3x3 convolution, stride 1, zero padding 1."""

    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator, dtype, input_grad=True):
        bound = np.sqrt(6.0 / (9 * c_in))
        self.W = rng.uniform(-bound, bound, size=(9 * c_in, c_out)).astype(dtype)
        self.b = np.zeros(c_out, dtype=dtype)
        self.input_grad = input_grad
        self._cache = None

    def params(self):
        return [self.W, self.b]

    def forward(self, x, train=False):
        n, h, w, c = x.shape
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
        # (n, h, w, c, 3, 3) view -> rows ordered (di, dj, channel) like _OFFSETS
        windows = sliding_window_view(xp, (3, 3), axis=(1, 2)).transpose(0, 1, 2, 4, 5, 3)
        cols = np.ascontiguousarray(windows).reshape(n * h * w, 9 * c)
        out = cols @ self.W
        out += self.b
        if train:
            self._cache = (cols, x.shape)
        return out.reshape(n, h, w, -1)

    def backward(self, dout):
        cols, (n, h, w, c) = self._cache
        self._cache = None
        d2 = dout.reshape(-1, dout.shape[-1])
        grads = [cols.T @ d2, d2.sum(axis=0)]
        if not self.input_grad:
            return None, grads
        dcols = (d2 @ self.W.T).reshape(n, h, w, 9, c)
        dxp = np.zeros((n, h + 2, w + 2, c), dtype=dout.dtype)
        for k, (di, dj) in enumerate(_OFFSETS):
            dxp[:, di:di + h, dj:dj + w, :] += dcols[:, :, :, k, :]
        return dxp[:, 1:-1, 1:-1, :], grads


class ReLU:
    def __init__(self):
        self._mask = None

    def params(self):
        return []

    def forward(self, x, train=False):
        mask = x > 0
        if train:
            self._mask = mask
        return x * mask

    def backward(self, dout):
        mask, self._mask = self._mask, None
        return dout * mask, []


class MaxPool2:
    def __init__(self):
        self._cache = None

    def params(self):
        return []

    def forward(self, x, train=False):
        n, h, w, c = x.shape
        if h % 2 or w % 2:
            raise ShapeMismatch(f"max pooling needs even spatial dims, got {h}x{w}")
        windows = x.reshape(n, h // 2, 2, w // 2, 2, c).transpose(0, 1, 3, 5, 2, 4)
        windows = windows.reshape(n, h // 2, w // 2, c, 4)
        idx = windows.argmax(axis=-1)
        if train:
            self._cache = (idx, x.shape)
        return np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]

    def backward(self, dout):
        idx, (n, h, w, c) = self._cache
        self._cache = None
        dwin = np.zeros(idx.shape + (4,), dtype=dout.dtype)
        np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
        dx = dwin.reshape(n, h // 2, w // 2, c, 2, 2).transpose(0, 1, 4, 2, 5, 3)
        return dx.reshape(n, h, w, c), []


class Flatten:
    def __init__(self):
        self._shape = None

    def params(self):
        return []

    def forward(self, x, train=False):
        if train:
            self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._shape), []


class Dense:
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, dtype):
        bound = np.sqrt(6.0 / n_in)
        self.W = rng.uniform(-bound, bound, size=(n_in, n_out)).astype(dtype)
        self.b = np.zeros(n_out, dtype=dtype)
        self._x = None

    def params(self):
        return [self.W, self.b]

    def forward(self, x, train=False):
        if train:
            self._x = x
        return x @ self.W + self.b

    def backward(self, dout):
        x, self._x = self._x, None
        return dout @ self.W.T, [x.T @ dout, dout.sum(axis=0)]


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _softplus(z):
    return np.logaddexp(0, z)


@dataclass
class VisionModel:
    layers: list
    image_size: int
    output_width: int
    output: str = "logistic"
    # (start, stop, allow_empty) per region, only used by the region-softmax head
    regions: tuple = ()
    threshold: float = 0.5
    layout_id: str = ""
    widths: tuple = (32, 64, 128)
    fc_width: int = 1024

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params()]

    @property
    def dtype(self):
        return self.params()[0].dtype

    def logits(self, images, train=False):
        x = np.asarray(images, dtype=self.dtype)
        if x.ndim != 4 or x.shape[1:] != (self.image_size, self.image_size, 3):
            raise ShapeMismatch(
                f"expected (N, {self.image_size}, {self.image_size}, 3) input, got {x.shape}"
            )
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return x

    def scores(self, logits):
        if self.output == "logistic":
            return _sigmoid(logits)
        out = np.empty_like(logits)
        for start, stop, allow_empty in self.regions:
            z = logits[:, start:stop]
            if allow_empty:
                z = np.concatenate([z, np.zeros((len(z), 1), z.dtype)], axis=1)
            z = z - z.max(axis=1, keepdims=True)
            p = np.exp(z)
            p /= p.sum(axis=1, keepdims=True)
            out[:, start:stop] = p[:, :stop - start]
        return out

    def forward(self, images, batch_size=64):
        """Score vectors in [0, 1] for a batch of standardized images (N, S, S, 3)."""
        images = np.asarray(images)
        if images.ndim == 3:
            return self.forward(images[None], batch_size)[0]
        chunks = [
            self.scores(self.logits(images[i:i + batch_size]))
            for i in range(0, len(images), batch_size)
        ]
        if not chunks:
            return np.zeros((0, self.output_width), dtype=self.dtype)
        return np.concatenate(chunks)

    def _loss_and_dlogits(self, z, y):
        n = len(z)
        if self.output == "logistic":
            loss = float((_softplus(z) - y * z).sum() / n)
            return loss, (_sigmoid(z) - y) / n
        loss = 0.0
        dz = np.zeros_like(z)
        for start, stop, allow_empty in self.regions:
            zr = z[:, start:stop]
            yr = y[:, start:stop]
            if allow_empty:
                zr = np.concatenate([zr, np.zeros((n, 1), z.dtype)], axis=1)
                yr = np.concatenate([yr, 1 - yr.sum(axis=1, keepdims=True)], axis=1)
            m = zr.max(axis=1, keepdims=True)
            lse = m[:, 0] + np.log(np.exp(zr - m).sum(axis=1))
            loss += float((lse - (yr * zr).sum(axis=1)).sum() / n)
            p = np.exp(zr - lse[:, None])
            dz[:, start:stop] = ((p - yr) / n)[:, :stop - start]
        return loss, dz

    def loss_and_grad(self, images, labels):
        """Mean per-sample loss and gradients aligned with ``params()``."""
        z = self.logits(images, train=True)
        y = np.asarray(labels, dtype=z.dtype)
        loss, d = self._loss_and_dlogits(z, y)
        grads: list = []
        for layer in reversed(self.layers):
            d, g = layer.backward(d)
            grads[:0] = g
        return loss, grads

    def loss(self, images, labels) -> float:
        z = self.logits(images)
        return self._loss_and_dlogits(z, np.asarray(labels, dtype=z.dtype))[0]


def build_model(
    layout_width: int,
    image_size: int = 64,
    seed: int = 0,
    *,
    widths: Sequence[int] = (32, 64, 128),
    fc_width: int = 1024,
    output: str = "logistic",
    regions: Sequence[tuple[int, int, bool]] = (),
    dtype=np.float32,
    check_size: bool = True,
    layout_id: str = "",
) -> VisionModel:
    """Three stages of (conv3x3, relu) x2 + maxpool, then dense-relu and the output layer.

    Weights are He-uniform (bound sqrt(6 / fan_in)), biases zero.
    """
    if check_size and image_size not in SUPPORTED_SIZES:
        raise ValueError(f"image_size must be one of {SUPPORTED_SIZES}, got {image_size}")
    if output not in ("logistic", "region-softmax"):
        raise ValueError(f"unknown output head {output!r}")
    if output == "region-softmax" and not regions:
        raise ValueError("region-softmax output needs region spans")
    rng = np.random.default_rng(seed)
    layers: list = []
    c_in = 3
    for stage, width in enumerate(widths):
        layers += [
            Conv3x3(c_in, width, rng, dtype, input_grad=stage > 0),
            ReLU(),
            Conv3x3(width, width, rng, dtype),
            ReLU(),
            MaxPool2(),
        ]
        c_in = width
    side = image_size // 2 ** len(widths)
    layers += [
        Flatten(),
        Dense(side * side * c_in, fc_width, rng, dtype),
        ReLU(),
        Dense(fc_width, layout_width, rng, dtype),
    ]
    return VisionModel(
        layers=layers,
        image_size=image_size,
        output_width=layout_width,
        output=output,
        regions=tuple((int(a), int(b), bool(e)) for a, b, e in regions),
        layout_id=layout_id,
        widths=tuple(widths),
        fc_width=fc_width,
    )


@dataclass(frozen=True)
class CalibRecord:
    epoch: int
    min_one: float  # smallest score among target-1 bits
    max_zero: float  # largest score among target-0 bits
    # full calibration scores split by target, kept for the overlapping case
    ones: np.ndarray | None = field(default=None, repr=False, compare=False)
    zeros: np.ndarray | None = field(default=None, repr=False, compare=False)

    def candidates(self) -> tuple[np.ndarray, np.ndarray]:
        ones = self.ones if self.ones is not None else np.array([self.min_one])
        zeros = self.zeros if self.zeros is not None else np.array([self.max_zero])
        return np.asarray(ones, dtype=np.float64), np.asarray(zeros, dtype=np.float64)


@dataclass
class TrainConfig:
    lr: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 32
    seed: int = 0
    calib_size: int = 128
    on_epoch: Callable[[dict], None] | None = None


@dataclass
class TrainResult:
    model: VisionModel
    records: list[CalibRecord]
    history: list[dict] = field(default_factory=list)


def calib_record(model: VisionModel, images, labels, epoch: int) -> CalibRecord:
    scores = model.forward(images)
    labels = np.asarray(labels).astype(bool)
    ones = scores[labels]
    zeros = scores[~labels]
    return CalibRecord(
        epoch=epoch,
        min_one=float(ones.min()) if ones.size else 1.0,
        max_zero=float(zeros.max()) if zeros.size else 0.0,
        ones=ones.astype(np.float64),
        zeros=zeros.astype(np.float64),
    )


def train(model: VisionModel, images, labels, epochs: int, config: TrainConfig | None = None) -> TrainResult:
    """Mini-batch SGD with momentum.

    Every epoch past the halfway mark appends a CalibRecord measured on
    ``config.calib_size`` training samples re-drawn with a per-epoch seed.
    The model is updated in place and also returned.
    """
    config = config or TrainConfig()
    images = np.asarray(images)
    labels = np.asarray(labels)
    if labels.shape != (len(images), model.output_width):
        raise ShapeMismatch(f"labels shape {labels.shape} does not match model width {model.output_width}")
    params = model.params()
    velocity = [np.zeros_like(p) for p in params]
    records: list[CalibRecord] = []
    history: list[dict] = []
    n = len(images)
    for epoch in range(1, epochs + 1):
        order = np.random.default_rng([config.seed, epoch]).permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = np.sort(order[start:start + config.batch_size])
            loss, grads = model.loss_and_grad(images[idx], labels[idx])
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}")
            total += loss * len(idx)
            for p, v, g in zip(params, velocity, grads):
                v *= config.momentum
                v -= config.lr * g
                p += v
        row = {"epoch": epoch, "loss": total / n, "calib_m0": None, "calib_m1": None}
        if epoch > epochs / 2:
            pick = np.random.default_rng([config.seed, epoch, 1]).choice(
                n, size=min(config.calib_size, n), replace=False
            )
            pick.sort()
            rec = calib_record(model, images[pick], labels[pick], epoch)
            records.append(rec)
            row["calib_m0"], row["calib_m1"] = rec.max_zero, rec.min_one
        history.append(row)
        log.info("epoch %d loss %.5f", epoch, row["loss"])
        if config.on_epoch:
            config.on_epoch(row)
    if records:
        model.threshold = calibrate_threshold(records)
    return TrainResult(model=model, records=records, history=history)


def calibrate_threshold(records: Iterable[CalibRecord]) -> float:
    """Midpoint of the separating interval, or the recorded score with fewest errors.

    When the largest target-0 score is below the smallest target-1 score the
    midpoint separates everything. Otherwise every recorded score is a
    candidate; a target-1 score is misclassified when it does not exceed the
    threshold, a target-0 score when it does. Ties go to the smaller candidate.
    """
    records = list(records)
    if not records:
        raise ValueError("at least one calibration record is required")
    m1 = min(r.min_one for r in records)
    m0 = max(r.max_zero for r in records)
    if m0 < m1:
        # clamped only when the midpoint underflows to 0 or rounds up to 1
        return float(np.clip((m0 + m1) / 2, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0)))
    ones = np.sort(np.concatenate([r.candidates()[0] for r in records]))
    zeros = np.sort(np.concatenate([r.candidates()[1] for r in records]))
    candidates = np.unique(np.concatenate([ones, zeros]))
    errors = np.searchsorted(ones, candidates, side="right") + (
        len(zeros) - np.searchsorted(zeros, candidates, side="right")
    )
    k = int(np.argmin(errors))
    best = float(candidates[k])
    # keep the threshold inside (0, 1); halfway to the next candidate classifies identically
    if best <= 0.0:
        above = candidates[candidates > 0.0]
        return float(above[0] / 2) if above.size else 0.5
    if best >= 1.0:
        return float(np.nextafter(1.0, 0.0))
    return best


def write_training_log(history: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "loss", "calib_m0", "calib_m1"])
        writer.writeheader()
        for row in history:
            writer.writerow({k: "" if v is None else v for k, v in row.items()})


# Checkpoint container, all integers little-endian:
#   magic b"PXCM", u32 version
#   u32 len + utf-8 layout id, u32 len + utf-8 output head name
#   u32 image size, u32 output width, u32 fc width, u32 n stages, u32 stage widths...
#   f64 threshold
#   u32 region count, then (u32 start, u32 stop, u8 allow_empty) per region
#   u32 tensor count, per tensor: u32 ndim, u32 dims..., float32 data
MAGIC = b"PXCM"
VERSION = 1


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def save_checkpoint(model: VisionModel, path) -> None:
    parts = [MAGIC, struct.pack("<I", VERSION), _pack_str(model.layout_id), _pack_str(model.output)]
    parts.append(struct.pack("<IIII", model.image_size, model.output_width, model.fc_width, len(model.widths)))
    parts.append(struct.pack(f"<{len(model.widths)}I", *model.widths))
    parts.append(struct.pack("<d", model.threshold))
    parts.append(struct.pack("<I", len(model.regions)))
    for start, stop, allow_empty in model.regions:
        parts.append(struct.pack("<IIB", start, stop, int(allow_empty)))
    params = model.params()
    parts.append(struct.pack("<I", len(params)))
    for p in params:
        parts.append(struct.pack(f"<I{p.ndim}I", p.ndim, *p.shape))
        parts.append(np.ascontiguousarray(p, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise CheckpointError("truncated checkpoint")
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out

    def string(self):
        (n,) = self.take("<I")
        raw = self.data[self.pos:self.pos + n]
        self.pos += n
        return raw.decode("utf-8")


def load_checkpoint(path) -> VisionModel:
    r = _Reader(Path(path).read_bytes())
    if r.data[:4] != MAGIC:
        raise CheckpointError(f"{path} is not a model checkpoint")
    r.pos = 4
    (version,) = r.take("<I")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    layout_id = r.string()
    output = r.string()
    image_size, width, fc_width, n_stages = r.take("<IIII")
    widths = r.take(f"<{n_stages}I")
    (threshold,) = r.take("<d")
    (n_regions,) = r.take("<I")
    regions = [r.take("<IIB") for _ in range(n_regions)]
    model = build_model(
        width, image_size, 0, widths=widths, fc_width=fc_width, output=output,
        regions=regions, check_size=False, layout_id=layout_id,
    )
    model.threshold = threshold
    (n_tensors,) = r.take("<I")
    params = model.params()
    if n_tensors != len(params):
        raise CheckpointError("tensor count does not match architecture")
    for p in params:
        (ndim,) = r.take("<I")
        shape = r.take(f"<{ndim}I")
        if tuple(shape) != p.shape:
            raise CheckpointError(f"tensor shape {shape} does not match {p.shape}")
        count = int(np.prod(shape))
        if r.pos + 4 * count > len(r.data):
            raise CheckpointError("truncated checkpoint")
        p[...] = np.frombuffer(r.data, dtype="<f4", count=count, offset=r.pos).reshape(shape)
        r.pos += 4 * count
    return model
