"""End-to-end image -> DSL -> code pipeline, evaluation and reporting."""
from __future__ import annotations

import configparser
import csv
import io
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .codec import VectorLayout, decode, layout_for, sample_tree
from .codegen import compile_tree
from .dsl import DslSyntaxError, DslTree, parse, serialize
from .model import TrainConfig, TrainResult, VisionModel, build_model, train
from .render import standardize_image
from .standardize import standardize_vector
from .stm import similarity


class ConfigError(ValueError):
    pass


class CheckpointMismatch(ValueError):
    pass


@dataclass
class RunConfig:
    platform: str = "ios"
    image_size: int = 64
    epochs: int = 12
    batch_size: int = 32
    lr: float = 1e-3
    momentum: float = 0.9
    threshold: float | None = None
    seed: int = 0
    data_seed: int = 0
    calib_size: int = 128
    output: str = "logistic"
    n_train: int = 1500
    n_test: int = 250

    def __post_init__(self):
        self.check()

    def check(self):
        if self.threshold is not None and not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold override must lie in (0, 1), got {self.threshold}")
        if self.platform not in ("web", "ios", "android"):
            raise ConfigError(f"unknown platform {self.platform!r}")
        if self.image_size not in (64, 128, 256):
            raise ConfigError(f"image_size must be 64, 128 or 256, got {self.image_size}")
        if self.epochs < 1 or self.batch_size < 1 or self.lr <= 0:
            raise ConfigError("epochs, batch_size and lr must be positive")
        if self.output not in ("logistic", "region-softmax"):
            raise ConfigError(f"unknown output head {self.output!r}")

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        """Read ``key = value`` lines (``#`` comments allowed); ``overrides`` win."""
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        try:
            parser.read_string("[run]\n" + Path(path).read_text())
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        values = dict(parser["run"])
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, raw, types[key])
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)

    def train_config(self, **extra) -> TrainConfig:
        return TrainConfig(
            lr=self.lr, momentum=self.momentum, batch_size=self.batch_size,
            seed=self.seed, calib_size=self.calib_size, **extra,
        )


def _coerce(key, raw: str, typ: str):
    raw = raw.strip()
    try:
        if "int" in typ:
            return int(raw)
        if "float" in typ:
            return None if raw.lower() in ("", "none") else float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def build_for_layout(layout: VectorLayout, config: RunConfig) -> VisionModel:
    return build_model(
        layout.width,
        config.image_size,
        config.seed,
        output=config.output,
        regions=layout.region_spans() if config.output == "region-softmax" else (),
        layout_id=layout.layout_id,
    )


def train_pipeline(images, labels, layout: VectorLayout, config: RunConfig, **train_extra) -> TrainResult:
    model = build_for_layout(layout, config)
    return train(model, images, labels, config.epochs, config.train_config(**train_extra))


def check_layout(model: VisionModel, layout: VectorLayout) -> None:
    if model.layout_id and model.layout_id != layout.layout_id:
        raise CheckpointMismatch(f"checkpoint is for layout {model.layout_id!r}, not {layout.layout_id!r}")
    if model.output_width != layout.width:
        raise CheckpointMismatch(f"checkpoint outputs {model.output_width} bits, layout has {layout.width}")


def scores_to_tree(scores, layout: VectorLayout, threshold: float) -> DslTree:
    return decode(standardize_vector(scores, threshold, layout), layout)


@dataclass
class InferResult:
    tree: DslTree
    dsl: str
    code: str
    bits: np.ndarray
    scores: np.ndarray


def infer(image, model: VisionModel, layout: VectorLayout, *, threshold: float | None = None, target: str = "html") -> InferResult:
    """Image (any size, uint8 or [0, 1] floats) to DSL text and compiled source."""
    check_layout(model, layout)
    threshold = model.threshold if threshold is None else threshold
    scores = model.forward(standardize_image(image, model.image_size))
    bits = standardize_vector(scores, threshold, layout)
    tree = decode(bits, layout)
    return InferResult(tree, serialize(tree), compile_tree(tree, target), bits, scores)


@dataclass
class EvalReport:
    system: str
    platform: str
    similarities: list[float]
    syntax_errors: int = 0
    model_id: str = ""
    threshold: float | None = None

    @property
    def mean(self) -> float:
        return float(np.mean(self.similarities)) if self.similarities else 0.0

    def to_json(self) -> str:
        data = asdict(self)
        data["mean"] = self.mean
        return json.dumps(data, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        data = json.loads(text)
        data.pop("mean", None)
        return cls(**data)


def evaluate_texts(predicted: Iterable[str], targets: Sequence[DslTree], *, system="pixcoder", platform="", model_id="", threshold=None) -> EvalReport:
    """Score generated DSL texts; any that fail to parse count as similarity 0."""
    sims = []
    errors = 0
    for text, target in zip(predicted, targets, strict=True):
        try:
            tree = parse(text)
        except DslSyntaxError:
            errors += 1
            sims.append(0.0)
            continue
        sims.append(similarity(tree, target))
    return EvalReport(system, platform, sims, errors, model_id, threshold)


def evaluate_scores(scores, targets: Sequence[DslTree], layout: VectorLayout, threshold: float, **meta) -> EvalReport:
    texts = [serialize(scores_to_tree(s, layout, threshold)) for s in scores]
    return evaluate_texts(texts, targets, platform=layout.platform, threshold=threshold, **meta)


def evaluate(model: VisionModel, images, targets: Sequence[DslTree], layout: VectorLayout, threshold: float | None = None) -> EvalReport:
    """``images`` are already standardized to the model's input size."""
    check_layout(model, layout)
    threshold = model.threshold if threshold is None else threshold
    return evaluate_scores(model.forward(images), targets, layout, threshold, model_id=model.layout_id)


def baseline_generate(layout: VectorLayout, seed: int) -> DslTree:
    """A random grammar-valid tree drawn like the synthetic datasets."""
    return sample_tree(layout, np.random.default_rng(seed))


def baseline_report(layout: VectorLayout, targets: Sequence[DslTree], seed: int = 0) -> EvalReport:
    texts = [serialize(baseline_generate(layout, int(s)))
             for s in np.random.SeedSequence(seed).generate_state(len(targets))]
    return evaluate_texts(texts, targets, system="baseline", platform=layout.platform)


def default_sweep_thresholds() -> list[float]:
    return [1e-4, 3e-4, 1e-3, 3e-3, 0.01, 0.03, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9]


def threshold_sweep(scores, targets, layout: VectorLayout, thresholds: Iterable[float]) -> list[tuple[float, float]]:
    return [(t, evaluate_scores(scores, targets, layout, t).mean) for t in thresholds]


# --- reporting ----------------------------------------------------------------

PLATFORM_ORDER = ("web", "ios", "android")
_COLUMN = {"web": "web-based UI", "ios": "iOS UI", "android": "Android UI"}
REPORT_FIELDS = ["system", "platform", "mean_similarity", "n", "syntax_errors", "threshold"]


@dataclass
class ReportTable:
    systems: list[str]
    platforms: list[str]
    cells: dict = field(default_factory=dict)  # (system, platform) -> row dict

    def text(self) -> str:
        header = ["Model"] + [_COLUMN.get(p, p) for p in self.platforms]
        body = []
        for s in self.systems:
            row = [s]
            for p in self.platforms:
                cell = self.cells.get((s, p))
                row.append(f"{100 * cell['mean_similarity']:.3f}%" if cell else "-")
            body.append(row)
        widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
        fmt = lambda r: " | ".join(c.ljust(w) for c, w in zip(r, widths))  # noqa: E731
        return "\n".join([fmt(header), "-+-".join("-" * w for w in widths)] + [fmt(r) for r in body]) + "\n"

    def csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=REPORT_FIELDS, lineterminator="\n")
        writer.writeheader()
        for s in self.systems:
            for p in self.platforms:
                if (s, p) in self.cells:
                    writer.writerow(self.cells[(s, p)])
        return buf.getvalue()


def report(reports: Iterable[EvalReport]) -> ReportTable:
    """Systems as rows (baseline first), platforms as columns."""
    cells = {}
    for r in reports:
        cells[(r.system, r.platform)] = {
            "system": r.system,
            "platform": r.platform,
            "mean_similarity": r.mean,
            "n": len(r.similarities),
            "syntax_errors": r.syntax_errors,
            "threshold": "" if r.threshold is None else r.threshold,
        }
    return _table(cells)


def _table(cells) -> ReportTable:
    systems = sorted({s for s, _ in cells}, key=lambda s: (s != "baseline", s))
    present = {p for _, p in cells}
    platforms = [p for p in PLATFORM_ORDER if p in present] + sorted(present - set(PLATFORM_ORDER))
    return ReportTable(systems, platforms, cells)


def read_report_csv(text: str) -> ReportTable:
    cells = {}
    for row in csv.DictReader(io.StringIO(text)):
        row["mean_similarity"] = float(row["mean_similarity"])
        row["n"] = int(row["n"])
        row["syntax_errors"] = int(row["syntax_errors"])
        row["threshold"] = float(row["threshold"]) if row["threshold"] else ""
        cells[(row["system"], row["platform"])] = row
    return _table(cells)


def write_sweep_csv(rows: Iterable[tuple], path, header: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def layout_of(platform: str) -> VectorLayout:
    return layout_for(platform, True)
