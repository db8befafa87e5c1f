import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pixcoder.codec import layout_for, sample_tree
from pixcoder.codegen import (
    TARGETS,
    MissingTemplate,
    Snippet,
    TargetTemplateSet,
    check_wellformed,
    compile_fragment,
    compile_tree,
    default_templates,
    missing_tokens,
)
from pixcoder.dsl import DslTree, make_tree, parse, serialize
from pixcoder.platforms import PLATFORMS


def test_single_token_snippet():
    t = default_templates("html")
    s = t.tokens["btn-home"]
    out = compile_tree(DslTree("btn-home"), "html")
    assert out == f"{t.preamble}\n{s.open}{s.text}{s.close}\n{t.postamble}\n"


def test_html_document_shape():
    tree = parse("""
        body {
          stack {
            row { label btn }
            row { label switch }
          }
          footer { btn-home btn-search }
        }""")
    out = compile_tree(tree, "html")
    assert out.startswith("<!DOCTYPE html>")
    assert out.rstrip().endswith("</html>")
    assert out.count('<div class="row') == 2
    assert out.count("btn btn-primary") == 1
    assert out.count("form-switch") == 1
    assert out.count("<footer") == 1 and out.count("nav-link") == 2
    assert out.index("form-label") < out.index("btn-primary") < out.index("form-switch") < out.index("<footer")
    assert check_wellformed(out, "html") == []


def test_golden_fragment_is_byte_stable():
    tree = make_tree([("label", "btn")], ("btn-home", "btn-search"))
    assert compile_fragment(tree, default_templates("html")) == (
        "<body>\n"
        '<div class="container py-3">\n'
        '<div class="row align-items-center border-bottom py-2">\n'
        '<span class="col form-label">Label</span>\n'
        '<button class="col btn btn-primary">Button</button>\n'
        "</div>\n"
        "</div>\n"
        '<footer class="navbar fixed-bottom bg-light"><nav class="nav w-100 justify-content-around">\n'
        '<a class="nav-link icon-home">Home</a>\n'
        '<a class="nav-link icon-search">Search</a>\n'
        "</nav></footer>\n"
        "</body>"
    )


@pytest.mark.parametrize("target", TARGETS)
def test_templates_cover_alphabet(target):
    assert missing_tokens(default_templates(target)) == set()


@pytest.mark.parametrize("target", TARGETS)
def test_parse_round_trip_compiles_identically(target):
    rng = np.random.default_rng(11)
    for platform in PLATFORMS:
        layout = layout_for(platform)
        for _ in range(50):
            t = sample_tree(layout, rng)
            assert compile_tree(parse(serialize(t)), target) == compile_tree(t, target)


@pytest.mark.parametrize("target", TARGETS)
def test_random_trees_are_wellformed(target):
    rng = np.random.default_rng(5)
    platforms = sorted(PLATFORMS)
    for i in range(1000):
        layout = layout_for(platforms[i % 3], pruned=bool(i % 2))
        out = compile_tree(sample_tree(layout, rng), target)
        assert check_wellformed(out, target) == []


@pytest.mark.parametrize("target", TARGETS)
def test_dropped_close_tag_is_reported(target):
    out = compile_tree(make_tree([("label", "btn")], ("btn-home", "btn-search")), target)
    lines = out.split("\n")
    close = next(i for i, line in enumerate(lines) if line.startswith("</") and i > 3)
    corrupted = "\n".join(lines[:close] + lines[close + 1:])
    assert check_wellformed(corrupted, target)


def test_unknown_target():
    with pytest.raises(ValueError):
        compile_tree(DslTree("btn"), "qt")
    with pytest.raises(ValueError):
        check_wellformed("", "qt")


def test_missing_template():
    partial = TargetTemplateSet("html", "", "", {"body": Snippet("<body>", "</body>")})
    with pytest.raises(MissingTemplate):
        compile_tree(parse("body { btn }"), partial)
    assert "btn" in missing_tokens(partial)


@pytest.mark.parametrize("target", TARGETS)
def test_template_json_round_trip(target):
    t = default_templates(target)
    again = TargetTemplateSet.from_json(t.to_json())
    assert again == t


_tokens = st.sampled_from(["row", "stack", "label", "btn", "slider", "img", "btn-home", "title"])
_trees = st.recursive(
    _tokens.map(DslTree),
    lambda kids: st.builds(DslTree, _tokens, st.lists(kids, min_size=1, max_size=3).map(tuple)),
    max_leaves=10,
)


@given(_trees)
@settings(max_examples=200, deadline=None)
def test_subtree_output_is_contiguous(tree):
    templates = default_templates("html")
    whole = compile_fragment(tree, templates)
    for sub in tree:
        assert compile_fragment(sub, templates) in whole
    # and the parent output is exactly open, children, close
    if tree.children:
        snip = templates.tokens[tree.label]
        parts = [snip.open] + [compile_fragment(c, templates) for c in tree.children] + [snip.close]
        assert whole == "\n".join(parts)


@given(_trees)
@settings(max_examples=100, deadline=None)
def test_compile_is_deterministic(tree):
    assert compile_tree(tree, "ios-storyboard") == compile_tree(tree, "ios-storyboard")
