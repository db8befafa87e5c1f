"""Fixed-width one-hot style vectors for layout trees.

A layout splits the vector into disjoint regions. Each region belongs to a
block (a row slot or the footer) and holds one bit per admissible pattern;
a valid vector has at most one bit set per region. Rows are packed from the
top and an absent row is an all-zero region. The footer is never empty.

Bit vectors are plain ``numpy.uint8`` arrays.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import cached_property, lru_cache
from math import prod
from typing import Iterator

import numpy as np

from .dsl import DslTree, Grammar, make_tree, split_tree, validate
from .platforms import PlatformSpec, get_platform


class UnencodableTree(ValueError):
    pass


class InvalidVector(ValueError):
    def __init__(self, violations):
        super().__init__("; ".join(str(v) for v in violations))
        self.violations = violations


class CapacityError(RuntimeError):
    pass


@dataclass(frozen=True)
class Region:
    block: str  # "row" or "footer"
    row: int | None  # 0-based row slot, None for the footer
    slot: int  # control position inside the block; always 0 when pruned
    start: int
    patterns: tuple[tuple[str, ...], ...]

    @property
    def width(self) -> int:
        return len(self.patterns)

    @property
    def stop(self) -> int:
        return self.start + len(self.patterns)

    @property
    def name(self) -> str:
        base = "footer" if self.block == "footer" else f"row{self.row + 1}"
        return base if self.slot == 0 else f"{base}.{self.slot + 1}"


@dataclass(frozen=True)
class VectorLayout:
    platform: str
    pruned: bool
    regions: tuple[Region, ...]
    min_rows: int = 1
    grammar: Grammar | None = None

    @property
    def width(self) -> int:
        return self.regions[-1].stop if self.regions else 0

    @cached_property
    def _starts(self) -> np.ndarray:
        return np.array([r.start for r in self.regions], dtype=np.intp)

    @property
    def layout_id(self) -> str:
        return f"{self.platform}-{'pruned' if self.pruned else 'unpruned'}"

    @cached_property
    def row_blocks(self) -> list[tuple[Region, ...]]:
        rows: dict[int, list[Region]] = {}
        for r in self.regions:
            if r.block == "row":
                rows.setdefault(r.row, []).append(r)
        return [tuple(rows[i]) for i in sorted(rows)]

    @cached_property
    def footer_block(self) -> tuple[Region, ...]:
        return tuple(r for r in self.regions if r.block == "footer")

    @property
    def max_rows(self) -> int:
        return len(self.row_blocks)

    def region_spans(self) -> list[tuple[int, int, bool]]:
        """(start, stop, may_be_empty) per region, as used by a region-softmax head."""
        out = []
        for r in self.regions:
            # a footer's first position must always hold something
            may_be_empty = not (r.block == "footer" and r.slot == 0)
            out.append((r.start, r.stop, may_be_empty))
        return out

    def to_dict(self) -> dict:
        return {
            "layout_id": self.layout_id,
            "platform": self.platform,
            "pruned": self.pruned,
            "width": self.width,
            "min_rows": self.min_rows,
            "regions": [
                {
                    "block": r.block,
                    "row": r.row,
                    "slot": r.slot,
                    "start": r.start,
                    "patterns": [list(p) for p in r.patterns],
                }
                for r in self.regions
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "VectorLayout":
        regions = tuple(
            Region(
                block=r["block"],
                row=r["row"],
                slot=r["slot"],
                start=r["start"],
                patterns=tuple(tuple(p) for p in r["patterns"]),
            )
            for r in data["regions"]
        )
        layout = _assemble(data["platform"], data["pruned"], regions, data.get("min_rows", 1), None)
        if layout.width != data["width"]:
            raise ValueError(f"layout width {layout.width} disagrees with declared {data['width']}")
        try:
            spec = get_platform(data["platform"])
        except ValueError:
            return layout
        return _assemble(layout.platform, layout.pruned, layout.regions, layout.min_rows, spec.grammar(layout.pruned))

    @classmethod
    def from_json(cls, text: str) -> "VectorLayout":
        return cls.from_dict(json.loads(text))


def _assemble(platform, pruned, regions, min_rows, grammar) -> VectorLayout:
    pos = 0
    for r in regions:
        if r.start != pos:
            raise ValueError(f"region {r} does not start at bit {pos}")
        pos = r.stop
    return VectorLayout(platform, pruned, tuple(regions), min_rows, grammar)


def build_layout(
    platform: str,
    row_patterns,
    footer_patterns,
    max_rows: int,
    *,
    row_slots: int = 1,
    footer_slots: int = 1,
    min_rows: int = 1,
    pruned: bool = True,
    grammar: Grammar | None = None,
) -> VectorLayout:
    """Lay out ``max_rows`` row blocks then the footer block, each with the given slot counts."""
    row_patterns = tuple(tuple(p) for p in row_patterns)
    footer_patterns = tuple(tuple(p) for p in footer_patterns)
    regions = []
    pos = 0
    for row in range(max_rows):
        for slot in range(row_slots):
            regions.append(Region("row", row, slot, pos, row_patterns))
            pos += len(row_patterns)
    for slot in range(footer_slots):
        regions.append(Region("footer", None, slot, pos, footer_patterns))
        pos += len(footer_patterns)
    return _assemble(platform, pruned, tuple(regions), min_rows, grammar)


def _layout_from_spec(spec: PlatformSpec, pruned: bool) -> VectorLayout:
    if pruned:
        return build_layout(
            spec.name, spec.row_patterns, spec.footer_patterns, spec.max_rows,
            min_rows=spec.min_rows, grammar=spec.grammar(True),
        )
    return build_layout(
        spec.name,
        [(t,) for t in spec.row_tokens],
        [(t,) for t in spec.footer_tokens],
        spec.max_rows,
        row_slots=spec.row_slots,
        footer_slots=spec.footer_slots,
        min_rows=spec.min_rows,
        pruned=False,
        grammar=spec.grammar(False),
    )


@lru_cache(maxsize=None)
def layout_for(platform: str, pruned: bool = True) -> VectorLayout:
    return _layout_from_spec(get_platform(platform), pruned)


def parse_layout_id(layout_id: str) -> VectorLayout:
    platform, _, kind = layout_id.partition("-")
    if kind not in ("pruned", "unpruned"):
        raise ValueError(f"bad layout id {layout_id!r}")
    return layout_for(platform, kind == "pruned")


# --- encoding ---------------------------------------------------------------

def _split_content(content: tuple[str, ...], regions: tuple[Region, ...]) -> list[int] | None:
    """Pattern index per leading region so the patterns concatenate to ``content``."""
    if not content:
        return []
    if not regions:
        return None
    for idx, pat in enumerate(regions[0].patterns):
        if content[:len(pat)] == pat:
            rest = _split_content(content[len(pat):], regions[1:])
            if rest is not None:
                return [idx] + rest
    return None


def encode(tree: DslTree, layout: VectorLayout) -> np.ndarray:
    if layout.grammar is not None:
        problems = validate(tree, layout.grammar)
        if problems:
            raise UnencodableTree("; ".join(map(str, problems)))
    try:
        rows, footer = split_tree(tree)
    except ValueError as exc:
        raise UnencodableTree(f"tree does not have the body/stack/footer shape: {exc}") from None
    blocks = layout.row_blocks
    if len(rows) > len(blocks):
        raise UnencodableTree(f"{len(rows)} rows but the layout has {len(blocks)} row slots")
    if len(rows) < layout.min_rows:
        raise UnencodableTree(f"{len(rows)} rows, layout needs at least {layout.min_rows}")
    bits = np.zeros(layout.width, dtype=np.uint8)
    for content, regions in itertools.chain(zip(rows, blocks), [(footer, layout.footer_block)]):
        if not content:
            raise UnencodableTree("empty block")
        picks = _split_content(content, regions)
        if picks is None:
            raise UnencodableTree(f"block {' '.join(content)!r} is not in the pattern table")
        for region, idx in zip(regions, picks):
            bits[region.start + idx] = 1
    return bits


# --- validity ---------------------------------------------------------------

@dataclass(frozen=True)
class CodecViolation:
    kind: str  # "conflict" | "gap" | "empty-footer" | "too-few-rows" | "width"
    where: str
    message: str

    def __str__(self):
        return f"{self.kind} at {self.where}: {self.message}"


def is_valid(bits, layout: VectorLayout) -> tuple[bool, list[CodecViolation]]:
    bits = np.asarray(bits)
    if bits.shape != (layout.width,):
        v = CodecViolation("width", "vector", f"expected {layout.width} bits, got shape {bits.shape}")
        return False, [v]
    out: list[CodecViolation] = []
    nonbinary = (bits != 0) & (bits != 1)
    counts = np.add.reduceat((bits != 0).astype(np.int64), layout._starts).tolist()
    bad = np.add.reduceat(nonbinary.astype(np.int64), layout._starts).tolist() if nonbinary.any() else None
    occupancy = {}
    for i, r in enumerate(layout.regions):
        occupancy[r.start] = counts[i] > 0
        if bad is not None and bad[i]:
            out.append(CodecViolation("conflict", r.name, "bits must be 0 or 1"))
        elif counts[i] > 1:
            out.append(CodecViolation("conflict", r.name, f"{counts[i]} patterns set"))

    def block_gaps(regions, label):
        occ = [occupancy[r.start] for r in regions]
        for i in range(1, len(occ)):
            if occ[i] and not occ[i - 1]:
                out.append(CodecViolation("gap", label, f"position {i + 1} set after an empty position"))
                break
        return any(occ)

    occupied_rows = [block_gaps(regions, f"row{i + 1}") for i, regions in enumerate(layout.row_blocks)]
    for i in range(1, len(occupied_rows)):
        if occupied_rows[i] and not occupied_rows[i - 1]:
            out.append(CodecViolation("gap", f"row{i}", f"empty row between occupied rows (row{i + 1} set)"))
    if sum(occupied_rows) < layout.min_rows:
        out.append(CodecViolation("too-few-rows", "stack", f"{sum(occupied_rows)} rows occupied"))
    if not block_gaps(layout.footer_block, "footer"):
        out.append(CodecViolation("empty-footer", "footer", "footer has no pattern"))
    return not out, out


def _block_content(hot: set, regions) -> tuple[str, ...]:
    content: tuple[str, ...] = ()
    for r in regions:
        idx = next((i for i in range(r.width) if r.start + i in hot), None)
        if idx is None:
            break
        content += r.patterns[idx]
    return content


def decode(bits, layout: VectorLayout) -> DslTree:
    ok, violations = is_valid(bits, layout)
    if not ok:
        raise InvalidVector(violations)
    hot = set(np.flatnonzero(np.asarray(bits)).tolist())
    rows = []
    for regions in layout.row_blocks:
        content = _block_content(hot, regions)
        if not content:
            break
        rows.append(content)
    return make_tree(rows, _block_content(hot, layout.footer_block))


# --- enumeration ------------------------------------------------------------

def _block_count(regions) -> int:
    """Non-empty prefix fillings of a block."""
    return sum(prod(r.width for r in regions[:k]) for k in range(1, len(regions) + 1))


def count_valid(layout: VectorLayout) -> int:
    row_counts = [_block_count(b) for b in layout.row_blocks]
    stacks = sum(prod(row_counts[:n]) for n in range(max(layout.min_rows, 1), len(row_counts) + 1))
    if layout.min_rows == 0:
        stacks += 1
    return stacks * _block_count(layout.footer_block)


def _block_choices(regions):
    for k in range(1, len(regions) + 1):
        for picks in itertools.product(*(range(r.width) for r in regions[:k])):
            yield [r.start + p for r, p in zip(regions, picks)]


def enumerate_valid(layout: VectorLayout, limit: int | None = None, cap: int = 1_000_000):
    """(exact count, iterator over valid vectors).

    Asking for a full iteration (``limit=None``) of more than ``cap`` vectors
    raises CapacityError; pass ``limit`` to take only the first vectors.
    """
    count = count_valid(layout)
    if limit is None and count > cap:
        raise CapacityError(f"{count} valid vectors exceed the iteration cap of {cap}")

    def generate() -> Iterator[np.ndarray]:
        blocks = layout.row_blocks
        footer = list(_block_choices(layout.footer_block))
        for n in range(layout.min_rows, len(blocks) + 1):
            per_row = [list(_block_choices(b)) for b in blocks[:n]]
            for rows in itertools.product(*per_row):
                for f in footer:
                    bits = np.zeros(layout.width, dtype=np.uint8)
                    for on in rows:
                        bits[on] = 1
                    bits[f] = 1
                    yield bits

    it = generate()
    return count, (itertools.islice(it, limit) if limit is not None else it)


# --- sampling ---------------------------------------------------------------

def _sample_block(regions, rng) -> tuple[str, ...]:
    k = int(rng.integers(1, len(regions) + 1))
    content: tuple[str, ...] = ()
    for r in regions[:k]:
        content += r.patterns[int(rng.integers(r.width))]
    return content


def sample_tree(layout: VectorLayout, rng: np.random.Generator) -> DslTree:
    """Row count uniform over the admissible range, then each block uniform over its fillings."""
    blocks = layout.row_blocks
    n = int(rng.integers(layout.min_rows, len(blocks) + 1))
    rows = [_sample_block(b, rng) for b in blocks[:n]]
    return make_tree(rows, _sample_block(layout.footer_block, rng))
