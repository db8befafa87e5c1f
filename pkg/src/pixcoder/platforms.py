"""Per-platform token alphabets and pruned pattern tables.

All three platforms share the tree shape ``body { stack { row* } footer }``.
A pruned layout gives every row slot one region holding the admissible row
patterns, plus one footer region. An unpruned layout gives every control
position its own region with one bit per control type.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, permutations

from .dsl import Grammar


@dataclass(frozen=True)
class PlatformSpec:
    name: str
    row_tokens: tuple[str, ...]
    footer_tokens: tuple[str, ...]
    row_patterns: tuple[tuple[str, ...], ...]
    footer_patterns: tuple[tuple[str, ...], ...]
    max_rows: int = 8
    min_rows: int = 1
    # control positions per block in the unpruned layout
    row_slots: int = 4
    footer_slots: int = 4
    pruned_arity: tuple[int, int] = (2, 4)
    framed: tuple = ()

    def grammar(self, pruned: bool = True) -> Grammar:
        if pruned:
            arity = self.pruned_arity
            framed = dict(self.framed)
        else:
            arity = (1, self.row_slots)
            framed = {}
        return Grammar(
            platform=self.name,
            row_tokens=self.row_tokens,
            footer_tokens=self.footer_tokens,
            rows=(self.min_rows, self.max_rows),
            row_arity=arity,
            footer_arity=arity if pruned else (1, self.footer_slots),
            framed=framed,
        )


_IOS_FOOTER = ("btn-home", "btn-search", "btn-contact", "btn-download")

IOS = PlatformSpec(
    name="ios",
    row_tokens=("label", "btn", "switch", "slider", "img"),
    footer_tokens=_IOS_FOOTER,
    row_patterns=(
        ("label", "btn"),
        ("label", "switch"),
        ("img", "label"),
        ("btn", "btn"),
        ("img", "label", "btn"),
        ("label", "slider", "label"),
        ("img", "label", "slider", "label"),
    ),
    # any two distinct buttons in either order, or three in canonical order
    footer_patterns=tuple(permutations(_IOS_FOOTER, 2)) + tuple(combinations(_IOS_FOOTER, 3)),
    framed=(("slider", ("label", "label")),),
)

_ANDROID_FOOTER = ("btn-home", "btn-dashboard", "btn-notifications", "btn-search")

ANDROID = PlatformSpec(
    name="android",
    row_tokens=("label", "btn", "check", "radio", "switch", "slider", "img"),
    footer_tokens=_ANDROID_FOOTER,
    row_patterns=(
        ("label", "btn"),
        ("check", "label"),
        ("radio", "label"),
        ("label", "switch"),
        ("img", "label"),
        ("label", "slider", "label"),
        ("img", "label", "btn"),
        ("check", "label", "switch"),
        ("radio", "label", "radio", "label"),
    ),
    # every subset of two or more buttons, canonical order
    footer_patterns=tuple(c for k in (2, 3, 4) for c in combinations(_ANDROID_FOOTER, k)),
    framed=(("slider", ("label", "label")),),
)


def _nav_bars():
    out = []
    for n in (2, 3, 4):
        for active in range(n):
            out.append(tuple("btn-active" if i == active else "btn-inactive" for i in range(n)))
    return tuple(out)


WEB = PlatformSpec(
    name="web",
    row_tokens=("title", "text", "btn-green", "btn-orange", "btn-red"),
    footer_tokens=("btn-active", "btn-inactive"),
    row_patterns=(
        ("title", "text"),
        ("text", "btn-green"),
        ("title", "text", "btn-orange"),
        ("text", "text", "btn-red"),
        ("title", "btn-green", "btn-red", "text"),
    ),
    # navigation bar of 2..4 buttons with exactly one active
    footer_patterns=_nav_bars(),
    max_rows=6,
)

PLATFORMS: dict[str, PlatformSpec] = {p.name: p for p in (WEB, IOS, ANDROID)}


def get_platform(name: str) -> PlatformSpec:
    try:
        return PLATFORMS[name]
    except KeyError:
        raise ValueError(f"unknown platform {name!r}; choose from {sorted(PLATFORMS)}") from None
