"""Static template compiler from layout trees to front-end source.

Each target maps every token to an ``open``/``close`` snippet pair and an
optional ``text`` placed between them for leaves. A node compiles to::

    open
    <children, one per line>      (or text, for leaves)
    close

with no depth-dependent indentation, so a subtree's output appears verbatim
inside its parent's output. Template sets round-trip through JSON::

    {"target": "html", "preamble": "...", "postamble": "...",
     "tokens": {"row": {"open": "...", "close": "...", "text": ""}, ...}}
"""
from __future__ import annotations

import json
import xml.parsers.expat
from dataclasses import dataclass
from html.parser import HTMLParser

from .dsl import DslTree, default_alphabet

TARGETS = ("html", "android-xml", "ios-storyboard")
EXTENSIONS = {"html": ".html", "android-xml": ".xml", "ios-storyboard": ".storyboard"}


class MissingTemplate(KeyError):
    pass


@dataclass(frozen=True)
class Snippet:
    open: str
    close: str
    text: str = ""


@dataclass(frozen=True)
class TargetTemplateSet:
    target: str
    preamble: str
    postamble: str
    tokens: dict

    def to_json(self) -> str:
        return json.dumps(
            {
                "target": self.target,
                "preamble": self.preamble,
                "postamble": self.postamble,
                "tokens": {k: vars(v) for k, v in sorted(self.tokens.items())},
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "TargetTemplateSet":
        data = json.loads(text)
        return cls(
            target=data["target"],
            preamble=data["preamble"],
            postamble=data["postamble"],
            tokens={k: Snippet(**v) for k, v in data["tokens"].items()},
        )


# -- html --------------------------------------------------------------------

_HTML_PRE = """<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<meta name="viewport" content="width=device-width, initial-scale=1">
<link rel="stylesheet" href="https://cdn.jsdelivr.net/npm/bootstrap@5.3.3/dist/css/bootstrap.min.css">
<title>Generated layout</title>
</head>"""
_HTML_POST = "</html>"


def _html_tokens() -> dict:
    def div(cls):
        return Snippet(f'<div class="{cls}">', "</div>")

    def leaf(tag, cls, text):
        return Snippet(f'<{tag} class="{cls}">', f"</{tag}>", text)

    out = {
        "body": Snippet("<body>", "</body>"),
        "stack": div("container py-3"),
        "row": div("row align-items-center border-bottom py-2"),
        "footer": Snippet('<footer class="navbar fixed-bottom bg-light"><nav class="nav w-100 justify-content-around">', "</nav></footer>"),
        "label": leaf("span", "col form-label", "Label"),
        "btn": leaf("button", "col btn btn-primary", "Button"),
        "switch": Snippet('<div class="col form-check form-switch"><input class="form-check-input" type="checkbox" role="switch">', "</div>"),
        "slider": Snippet('<div class="col"><input type="range" class="form-range">', "</div>"),
        "img": Snippet('<div class="col"><img class="img-thumbnail" src="placeholder.png" alt="">', "</div>"),
        "check": Snippet('<div class="col form-check"><input class="form-check-input" type="checkbox">', "</div>"),
        "radio": Snippet('<div class="col form-check"><input class="form-check-input" type="radio">', "</div>"),
        "title": leaf("h4", "col", "Title"),
        "text": leaf("p", "col", "Lorem ipsum dolor sit amet"),
        "btn-green": leaf("button", "col btn btn-success", "Confirm"),
        "btn-orange": leaf("button", "col btn btn-warning", "Warning"),
        "btn-red": leaf("button", "col btn btn-danger", "Delete"),
        "btn-active": leaf("a", "nav-link active", "Home"),
        "btn-inactive": leaf("a", "nav-link", "Link"),
    }
    for name in ("home", "search", "contact", "download", "dashboard", "notifications"):
        out[f"btn-{name}"] = leaf("a", f"nav-link icon-{name}", name.capitalize())
    return out


# -- android -----------------------------------------------------------------

def _android_tokens() -> dict:
    def widget(cls, extra=""):
        return Snippet(f'<{cls} android:layout_width="wrap_content" android:layout_height="wrap_content"{extra}>', f"</{cls}>")

    out = {
        "body": Snippet(
            '<LinearLayout xmlns:android="http://schemas.android.com/apk/res/android" '
            'android:layout_width="match_parent" android:layout_height="match_parent" android:orientation="vertical">',
            "</LinearLayout>",
        ),
        "stack": Snippet('<LinearLayout android:layout_width="match_parent" android:layout_height="0dp" android:layout_weight="1" android:orientation="vertical">', "</LinearLayout>"),
        "row": Snippet('<LinearLayout android:layout_width="match_parent" android:layout_height="wrap_content" android:orientation="horizontal">', "</LinearLayout>"),
        "footer": Snippet('<LinearLayout android:layout_width="match_parent" android:layout_height="wrap_content" android:orientation="horizontal">', "</LinearLayout>"),
        "label": widget("TextView", ' android:text="Label"'),
        "btn": widget("Button", ' android:text="Button"'),
        "switch": widget("Switch"),
        "slider": widget("SeekBar"),
        "img": widget("ImageView"),
        "check": widget("CheckBox"),
        "radio": widget("RadioButton"),
        "title": widget("TextView", ' android:textAppearance="?android:attr/textAppearanceLarge"'),
        "text": widget("TextView"),
    }
    for tok in ("btn-green", "btn-orange", "btn-red", "btn-active", "btn-inactive"):
        out[tok] = widget("Button", f' android:tag="{tok}"')
    for name in ("home", "search", "contact", "download", "dashboard", "notifications"):
        out[f"btn-{name}"] = widget("ImageButton", f' android:contentDescription="{name}"')
    return out


# -- ios ---------------------------------------------------------------------

def _ios_tokens() -> dict:
    def view(tag, extra=""):
        return Snippet(f"<{tag}{extra}>", f"</{tag}>")

    out = {
        "body": view("view", ' key="view" contentMode="scaleToFill"'),
        "stack": view("stackView", ' axis="vertical" distribution="fillEqually"'),
        "row": view("stackView", ' axis="horizontal" distribution="equalSpacing"'),
        "footer": view("tabBar", ' contentMode="scaleToFill"'),
        "label": view("label", ' text="Label"'),
        "btn": view("button", ' buttonType="system"'),
        "switch": view("switch", ' on="YES"'),
        "slider": view("slider", ' value="0.5" minValue="0" maxValue="1"'),
        "img": view("imageView", ' image="placeholder"'),
        "check": view("button", ' buttonType="custom" title="check"'),
        "radio": view("button", ' buttonType="custom" title="radio"'),
        "title": view("label", ' text="Title"'),
        "text": view("textView", ' text="Lorem ipsum"'),
    }
    for tok in ("btn-green", "btn-orange", "btn-red", "btn-active", "btn-inactive"):
        out[tok] = view("button", f' title="{tok}"')
    for name in ("home", "search", "contact", "download", "dashboard", "notifications"):
        out[f"btn-{name}"] = view("tabBarItem", f' title="{name.capitalize()}"')
    return out


_IOS_PRE = """<?xml version="1.0" encoding="UTF-8"?>
<document type="com.apple.InterfaceBuilder3.CocoaTouch.Storyboard.XIB" version="3.0">
<scenes>
<scene sceneID="main">
<objects>
<viewController id="root">"""
_IOS_POST = """</viewController>
</objects>
</scene>
</scenes>
</document>"""


def default_templates(target: str) -> TargetTemplateSet:
    if target == "html":
        return TargetTemplateSet("html", _HTML_PRE, _HTML_POST, _html_tokens())
    if target == "android-xml":
        return TargetTemplateSet("android-xml", '<?xml version="1.0" encoding="utf-8"?>', "", _android_tokens())
    if target == "ios-storyboard":
        return TargetTemplateSet("ios-storyboard", _IOS_PRE, _IOS_POST, _ios_tokens())
    raise ValueError(f"unknown target {target!r}; choose from {TARGETS}")


def compile_fragment(tree: DslTree, templates: TargetTemplateSet) -> str:
    lines: list[str] = []

    def emit(t: DslTree):
        try:
            snip = templates.tokens[t.label]
        except KeyError:
            raise MissingTemplate(f"no {templates.target} template for token {t.label!r}") from None
        if t.children:
            lines.append(snip.open)
            for c in t.children:
                emit(c)
            lines.append(snip.close)
        else:
            lines.append(f"{snip.open}{snip.text}{snip.close}")

    emit(tree)
    return "\n".join(lines)


def compile_tree(tree: DslTree, target: str | TargetTemplateSet = "html") -> str:
    templates = target if isinstance(target, TargetTemplateSet) else default_templates(target)
    parts = [templates.preamble, compile_fragment(tree, templates), templates.postamble]
    return "\n".join(p for p in parts if p) + "\n"


_VOID = {"area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "source", "track", "wbr"}


class _TagBalance(HTMLParser):
    def __init__(self):
        super().__init__()
        self.open: list[tuple[str, tuple]] = []
        self.defects: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag not in _VOID:
            self.open.append((tag, self.getpos()))

    def handle_startendtag(self, tag, attrs):
        pass

    def handle_endtag(self, tag):
        if tag in _VOID:
            return
        if not self.open:
            self.defects.append(f"line {self.getpos()[0]}: stray </{tag}>")
        elif self.open[-1][0] != tag:
            want, pos = self.open[-1]
            self.defects.append(f"line {self.getpos()[0]}: </{tag}> closes <{want}> opened on line {pos[0]}")
            self.open.pop()
        else:
            self.open.pop()


def check_wellformed(source: str, target: str) -> list[str]:
    """Structural defects in compiled output; an empty list means well formed."""
    if target == "html":
        parser = _TagBalance()
        parser.feed(source)
        parser.close()
        return parser.defects + [f"line {pos[0]}: <{tag}> never closed" for tag, pos in parser.open]
    if target in ("android-xml", "ios-storyboard"):
        p = xml.parsers.expat.ParserCreate()
        try:
            p.Parse(source, True)
        except xml.parsers.expat.ExpatError as exc:
            return [str(exc)]
        return []
    raise ValueError(f"unknown target {target!r}")


def missing_tokens(templates: TargetTemplateSet) -> set[str]:
    return set(default_alphabet()) - set(templates.tokens)
