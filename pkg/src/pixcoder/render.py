"""Synthetic GUI screenshots rendered from layout trees, plus image standardization.

Canvas geometry: the stack takes the top 80% of the canvas, split evenly into
one slot per possible row; the footer takes the bottom 20%. Controls in a
block are packed left to right with equal gaps. Per-sample jitter (text
width, hue, knob positions) stays inside each control's bounding box.
"""
from __future__ import annotations

import colorsys
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .codec import VectorLayout, encode, layout_for, parse_layout_id, sample_tree
from .dsl import DslTree, parse, serialize, split_tree

STACK_FRACTION = 0.8
SIDE_MARGIN = 0.04
MIN_GAP = 0.02


class LayoutOverflow(ValueError):
    pass


# control width as a fraction of the usable row width
NOMINAL_WIDTH = {
    "label": 0.20, "btn": 0.18, "switch": 0.12, "slider": 0.30, "img": 0.14,
    "check": 0.08, "radio": 0.08,
    "title": 0.20, "text": 0.24, "btn-green": 0.14, "btn-orange": 0.14, "btn-red": 0.14,
    "btn-active": 0.16, "btn-inactive": 0.16,
    "btn-home": 0.14, "btn-search": 0.14, "btn-contact": 0.14, "btn-download": 0.14,
    "btn-dashboard": 0.14, "btn-notifications": 0.14,
}

# hue in degrees, motif name
_STYLE = {
    "label": (220, "text"),
    "title": (220, "title"),
    "text": (0, "lines"),
    "btn": (200, "button"),
    "switch": (120, "switch"),
    "slider": (30, "slider"),
    "img": (290, "picture"),
    "check": (60, "check"),
    "radio": (330, "radio"),
    "btn-green": (120, "button"),
    "btn-orange": (30, "button"),
    "btn-red": (355, "button"),
    "btn-active": (210, "button"),
    "btn-inactive": (210, "outline"),
    "btn-home": (10, "house"),
    "btn-search": (90, "ring"),
    "btn-contact": (170, "person"),
    "btn-download": (250, "arrow"),
    "btn-dashboard": (90, "grid"),
    "btn-notifications": (300, "bell"),
}


def _hsv(hue_deg, s, v):
    r, g, b = colorsys.hsv_to_rgb((hue_deg % 360) / 360.0, s, v)
    return int(round(r * 255)), int(round(g * 255)), int(round(b * 255))


@dataclass(frozen=True)
class RenderTheme:
    rows: int = 8
    background: tuple = (250, 250, 250)
    footer_background: tuple = (228, 228, 232)
    hues: dict = field(default_factory=lambda: {k: h for k, (h, _) in _STYLE.items()})
    motifs: dict = field(default_factory=lambda: {k: m for k, (_, m) in _STYLE.items()})
    text_jitter: float = 0.30
    hue_jitter: float = 10.0
    # "text" tokens get darker ink so they read as text, not as filled widgets
    saturation: float = 0.75
    value: float = 0.80

    def color(self, token: str, hue_offset: float = 0.0):
        if self.motifs[token] in ("text", "title", "lines"):
            return _hsv(self.hues[token] + hue_offset, 0.5, 0.35)
        return _hsv(self.hues[token] + hue_offset, self.saturation, self.value)

    def without_jitter(self) -> "RenderTheme":
        return replace(self, text_jitter=0.0, hue_jitter=0.0)


def default_theme(platform: str | VectorLayout = "ios") -> RenderTheme:
    layout = platform if isinstance(platform, VectorLayout) else layout_for(platform)
    return RenderTheme(rows=layout.max_rows)


def _pack(tokens, x0, x1):
    """Left/right pixel edges of each control, or LayoutOverflow."""
    widths = [NOMINAL_WIDTH[t] for t in tokens]
    gap = (1.0 - sum(widths)) / (len(widths) + 1)
    if gap < MIN_GAP:
        raise LayoutOverflow(f"controls {' '.join(tokens)} need {sum(widths):.2f} of the row width")
    span = x1 - x0
    out = []
    pos = gap
    for w in widths:
        out.append((x0 + pos * span, x0 + (pos + w) * span))
        pos += w + gap
    return out


def _draw_control(draw: ImageDraw.ImageDraw, token, box, theme: RenderTheme, rng):
    x0, y0, x1, y1 = box
    w, h = x1 - x0, y1 - y0
    hue_off = rng.uniform(-theme.hue_jitter, theme.hue_jitter)
    fill_frac = 1.0 - rng.uniform(0.0, theme.text_jitter)
    knob = rng.uniform(0.2, 0.8)
    color = theme.color(token, hue_off)
    light = (255, 255, 255)
    motif = theme.motifs[token]
    cy = (y0 + y1) / 2
    if motif == "text":
        draw.rectangle([x0, cy - h * 0.2, x0 + w * fill_frac, cy + h * 0.2], fill=color)
    elif motif == "title":
        draw.rectangle([x0, y0 + h * 0.1, x0 + w * fill_frac, y1 - h * 0.1], fill=color)
    elif motif == "lines":
        for frac, off in ((1.0, -0.25), (fill_frac, 0.15)):
            draw.rectangle([x0, cy + h * off, x0 + w * frac, cy + h * (off + 0.14)], fill=color)
    elif motif == "button":
        draw.rounded_rectangle([x0, y0, x1, y1], radius=max(1, h * 0.25), fill=color)
        inner = w * 0.7 * fill_frac
        draw.rectangle([x0 + (w - inner) / 2, cy - h * 0.1, x0 + (w + inner) / 2, cy + h * 0.1], fill=light)
    elif motif == "outline":
        draw.rounded_rectangle([x0, y0, x1, y1], radius=max(1, h * 0.25), outline=color, width=max(1, int(h * 0.15)))
    elif motif == "switch":
        draw.rounded_rectangle([x0, y0 + h * 0.1, x1, y1 - h * 0.1], radius=h * 0.4, fill=color)
        r = h * 0.32
        draw.ellipse([x1 - 2.2 * r, cy - r, x1 - 0.2 * r, cy + r], fill=light)
    elif motif == "slider":
        draw.rectangle([x0, cy - h * 0.08, x1, cy + h * 0.08], fill=color)
        kx = x0 + w * knob
        r = h * 0.3
        draw.ellipse([kx - r, cy - r, kx + r, cy + r], fill=color)
    elif motif == "picture":
        draw.rectangle([x0, y0, x1, y1], fill=color)
        draw.line([x0, y0, x1, y1], fill=light, width=max(1, int(h * 0.08)))
        draw.line([x0, y1, x1, y0], fill=light, width=max(1, int(h * 0.08)))
    elif motif == "check":
        s = min(w, h)
        draw.rectangle([x0, cy - s / 2, x0 + s, cy + s / 2], outline=color, width=max(1, int(s * 0.15)))
        draw.line([x0 + s * 0.2, cy, x0 + s * 0.45, cy + s * 0.3, x0 + s * 0.85, cy - s * 0.3], fill=color, width=max(1, int(s * 0.12)))
    elif motif == "radio":
        s = min(w, h)
        draw.ellipse([x0, cy - s / 2, x0 + s, cy + s / 2], outline=color, width=max(1, int(s * 0.15)))
        draw.ellipse([x0 + s * 0.3, cy - s * 0.2, x0 + s * 0.7, cy + s * 0.2], fill=color)
    else:
        _draw_icon(draw, motif, box, color)


def _draw_icon(draw, motif, box, color):
    x0, y0, x1, y1 = box
    w, h = x1 - x0, y1 - y0
    s = min(w, h)
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    l, t, r, b = cx - s / 2, cy - s / 2, cx + s / 2, cy + s / 2
    if motif == "house":
        draw.polygon([(l, cy), (cx, t), (r, cy)], fill=color)
        draw.rectangle([l + s * 0.2, cy, r - s * 0.2, b], fill=color)
    elif motif == "ring":
        draw.ellipse([l, t, r - s * 0.2, b - s * 0.2], outline=color, width=max(1, int(s * 0.14)))
        draw.line([r - s * 0.3, b - s * 0.3, r, b], fill=color, width=max(1, int(s * 0.14)))
    elif motif == "person":
        draw.ellipse([cx - s * 0.22, t, cx + s * 0.22, t + s * 0.44], fill=color)
        draw.pieslice([l, cy, r, b + s * 0.5], 180, 360, fill=color)
    elif motif == "arrow":
        draw.rectangle([cx - s * 0.12, t, cx + s * 0.12, cy], fill=color)
        draw.polygon([(l + s * 0.1, cy), (r - s * 0.1, cy), (cx, b)], fill=color)
    elif motif == "grid":
        g = s * 0.42
        for dx in (0, s - g):
            for dy in (0, s - g):
                draw.rectangle([l + dx, t + dy, l + dx + g, t + dy + g], fill=color)
    elif motif == "bell":
        draw.polygon([(cx, t), (r, b - s * 0.2), (l, b - s * 0.2)], fill=color)
        draw.ellipse([cx - s * 0.12, b - s * 0.24, cx + s * 0.12, b], fill=color)
    else:
        raise ValueError(f"unknown motif {motif!r}")


def block_boxes(theme: RenderTheme, size: tuple[int, int]) -> dict:
    """Pixel box (x0, y0, x1, y1) of every row slot (keys 0..rows-1) and the footer."""
    width, height = size
    row_h = STACK_FRACTION * height / theme.rows
    boxes = {i: (0, i * row_h, width, (i + 1) * row_h) for i in range(theme.rows)}
    boxes["footer"] = (0, STACK_FRACTION * height, width, height)
    return boxes


def render(tree: DslTree, theme: RenderTheme, seed: int, size: tuple[int, int] = (256, 256)) -> np.ndarray:
    """Render to an (H, W, 3) uint8 array; deterministic in (tree, theme, seed, size)."""
    width, height = size
    rows, footer = split_tree(tree)
    if len(rows) > theme.rows:
        raise LayoutOverflow(f"{len(rows)} rows but the theme has {theme.rows} slots")
    img = Image.new("RGB", (width, height), theme.background)
    draw = ImageDraw.Draw(img)
    boxes = block_boxes(theme, size)
    blocks = [(i, boxes[i], r) for i, r in enumerate(rows)] + [(theme.rows, boxes["footer"], footer)]
    fx0, fy0, fx1, fy1 = boxes["footer"]
    draw.rectangle([fx0, fy0, fx1 - 1, fy1 - 1], fill=theme.footer_background)
    for block_index, (bx0, by0, bx1, by1), tokens in blocks:
        bh = by1 - by0
        if block_index < theme.rows:
            draw.line([bx0 + width * SIDE_MARGIN, by1 - 1, bx1 - width * SIDE_MARGIN, by1 - 1], fill=(215, 215, 215))
            cy0, cy1 = by0 + bh * 0.2, by1 - bh * 0.2
        else:
            cy0, cy1 = by0 + bh * 0.25, by1 - bh * 0.25
        spans = _pack(tokens, bx0 + width * SIDE_MARGIN, bx1 - width * SIDE_MARGIN)
        for slot, (token, (x0, x1)) in enumerate(zip(tokens, spans)):
            rng = np.random.default_rng([seed, block_index, slot])
            _draw_control(draw, token, (x0, cy0, x1, cy1), theme, rng)
    return np.asarray(img, dtype=np.uint8)


def standardize_image(img, size: int = 256) -> np.ndarray:
    """Resize to ``size`` x ``size`` with bilinear resampling and scale into [0, 1].

    Integer inputs are read as 0..255; float inputs are assumed to be in [0, 1]
    already and are clipped. Returns float32 (size, size, 3).
    """
    arr = np.asarray(img)
    if np.issubdtype(arr.dtype, np.integer) or arr.dtype == bool:
        arr = arr.astype(np.float32) / (1.0 if arr.dtype == bool else 255.0)
    arr = np.clip(arr.astype(np.float32), 0.0, 1.0)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    elif arr.shape[2] == 4:
        arr = arr[:, :, :3]
    elif arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    if arr.shape[:2] == (size, size):
        return arr.copy()
    channels = [
        np.asarray(Image.fromarray(arr[:, :, c], mode="F").resize((size, size), Image.BILINEAR))
        for c in range(3)
    ]
    return np.clip(np.stack(channels, axis=2), 0.0, 1.0).astype(np.float32)


def load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


# --- datasets -----------------------------------------------------------------

@dataclass
class Sample:
    tree: DslTree
    bits: np.ndarray
    seed: int
    split: str
    index: int


@dataclass
class Dataset:
    layout: VectorLayout
    train: list[Sample]
    test: list[Sample]
    theme: RenderTheme
    canvas: tuple[int, int] = (256, 256)

    def arrays(self, split: str, image_size: int = 64) -> tuple[np.ndarray, np.ndarray]:
        samples = self.train if split == "train" else self.test
        return sample_arrays(samples, self.theme, image_size, self.canvas)


def sample_arrays(samples, theme, image_size, canvas=(256, 256)):
    images = np.empty((len(samples), image_size, image_size, 3), dtype=np.float32)
    for i, s in enumerate(samples):
        images[i] = standardize_image(render(s.tree, theme, s.seed, canvas), image_size)
    labels = np.stack([s.bits for s in samples]) if samples else np.zeros((0, 0), np.uint8)
    return images, labels


def _derive_seed(*entropy) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


def gen_dataset(
    n_train: int,
    n_test: int,
    platform: str | VectorLayout = "ios",
    seed: int = 0,
    *,
    theme: RenderTheme | None = None,
    canvas: tuple[int, int] = (256, 256),
    max_attempts: int = 50,
) -> Dataset:
    """Sample trees for a train and a test split; images are rendered on demand.

    Test trees are redrawn (up to ``max_attempts`` times) until they do not
    occur in the training split.
    """
    if n_train < 1 or n_test < 1:
        raise ValueError("both splits need at least one sample")
    layout = platform if isinstance(platform, VectorLayout) else layout_for(platform)
    theme = theme or default_theme(layout)

    def draw(split_id, i, attempt=0):
        s = _derive_seed(seed, split_id, i, attempt)
        return s, sample_tree(layout, np.random.default_rng(s))

    train = []
    for i in range(n_train):
        s, tree = draw(0, i)
        train.append(Sample(tree, encode(tree, layout), s, "train", i))
    seen = {serialize(s.tree) for s in train}
    test = []
    for i in range(n_test):
        for attempt in range(max_attempts):
            s, tree = draw(1, i, attempt)
            if serialize(tree) not in seen:
                break
        test.append(Sample(tree, encode(tree, layout), s, "test", i))
    return Dataset(layout, train, test, theme, canvas)


def bit_string(bits) -> str:
    return "".join(str(int(b)) for b in bits)


def write_dataset(dataset: Dataset, out_dir) -> dict[str, Path]:
    """Write PNGs plus ``train.jsonl`` / ``test.jsonl`` manifests and ``layout.json``.

    Manifest lines: {"image", "dsl", "bits", "layout", "seed", "split"}; image
    paths are relative to the manifest's directory.
    """
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "layout.json").write_text(dataset.layout.to_json())
    paths = {}
    for split, samples in (("train", dataset.train), ("test", dataset.test)):
        manifest = out / f"{split}.jsonl"
        with open(manifest, "w") as fh:
            for s in samples:
                rel = f"images/{split}_{s.index:05d}.png"
                Image.fromarray(render(s.tree, dataset.theme, s.seed, dataset.canvas)).save(out / rel)
                fh.write(json.dumps({
                    "image": rel,
                    "dsl": serialize(s.tree),
                    "bits": bit_string(s.bits),
                    "layout": dataset.layout.layout_id,
                    "seed": s.seed,
                    "split": split,
                }) + "\n")
        paths[split] = manifest
    return paths


@dataclass
class ManifestEntry:
    image: Path
    tree: DslTree
    bits: np.ndarray
    layout_id: str
    seed: int | None
    split: str


def read_manifest(path) -> list[ManifestEntry]:
    path = Path(path)
    entries = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            tree = parse(rec["dsl"])
            if "bits" in rec:
                bits = np.array([int(c) for c in rec["bits"]], dtype=np.uint8)
            else:
                bits = encode(tree, parse_layout_id(rec["layout"]))
            entries.append(ManifestEntry(
                image=path.parent / rec["image"],
                tree=tree,
                bits=bits,
                layout_id=rec["layout"],
                seed=rec.get("seed"),
                split=rec.get("split", ""),
            ))
    return entries


def manifest_arrays(entries, image_size: int) -> tuple[np.ndarray, np.ndarray]:
    images = np.empty((len(entries), image_size, image_size, 3), dtype=np.float32)
    for i, e in enumerate(entries):
        images[i] = standardize_image(load_image(e.image), image_size)
    return images, np.stack([e.bits for e in entries])
