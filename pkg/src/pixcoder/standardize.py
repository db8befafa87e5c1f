"""Turn raw model scores into a valid one-hot layout vector."""
from __future__ import annotations

import numpy as np

from .codec import Region, VectorLayout


def binarize(scores, threshold: float) -> np.ndarray:
    """Bit is 1 iff its score is strictly above ``threshold``."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    return (np.asarray(scores) > threshold).astype(np.uint8)


def _keep_best(bits, scores, region: Region) -> None:
    span = slice(region.start, region.stop)
    on = np.flatnonzero(bits[span])
    if len(on) > 1:
        # argmax returns the first maximum, so ties go to the lower bit
        keep = on[np.argmax(scores[span][on])]
        bits[span] = 0
        bits[region.start + keep] = 1


def _compact(bits, groups: list[list[Region]]) -> None:
    """Move occupied groups up over empty ones, preserving their order."""
    contents = [[bits[r.start:r.stop].copy() for r in g] for g in groups]
    occupied = [c for c in contents if any(x.any() for x in c)]
    empty = [[np.zeros_like(x) for x in c] for c in contents[len(occupied):]]
    for group, content in zip(groups, occupied + empty):
        for r, x in zip(group, content):
            bits[r.start:r.stop] = x


def _fill_best(bits, scores, regions: list[Region], target: Region) -> None:
    """Set ``target`` to the single highest-scoring pattern found in ``regions``."""
    best = max(
        ((scores[r.start + i], -(r.start + i), i) for r in regions for i in range(r.width)),
    )
    bits[target.start:target.stop] = 0
    bits[target.start + best[2]] = 1


def resolve(raw, scores, layout: VectorLayout) -> np.ndarray:
    """Repair a thresholded vector so that it decodes.

    1. A region with several bits set keeps only its highest-scoring bit.
    2. Empty positions inside a block and empty rows between occupied rows are
       closed up by moving later content forward.
    3. An empty footer gets its best-scoring pattern.
    4. With too few rows, row one gets the best-scoring row pattern overall.
    """
    bits = np.array(raw, dtype=np.uint8, copy=True)
    scores = np.asarray(scores, dtype=np.float64)
    if bits.shape != (layout.width,) or scores.shape != (layout.width,):
        raise ValueError(f"expected vectors of width {layout.width}")
    for region in layout.regions:
        _keep_best(bits, scores, region)

    rows = [list(b) for b in layout.row_blocks]
    footer = list(layout.footer_block)
    for block in rows + [footer]:
        _compact(bits, [[r] for r in block])
    _compact(bits, rows)

    if not bits[footer[0].start:footer[0].stop].any():
        _fill_best(bits, scores, footer, footer[0])
    occupied = sum(bool(bits[b[0].start:b[0].stop].any()) for b in rows)
    if occupied < layout.min_rows:
        # only reachable with zero rows when min_rows is 1
        all_row_regions = [r for b in rows for r in b]
        _fill_best(bits, scores, all_row_regions, rows[occupied][0])
    return bits


def standardize_vector(scores, threshold: float, layout: VectorLayout) -> np.ndarray:
    return resolve(binarize(scores, threshold), scores, layout)
