"""The ten acceptance criteria, each at its stated tolerance.

Every test records one pass/fail line that conftest prints in the terminal
summary. Criterion 7 trains three full models (about 12 minutes each on one
core); set PIXCODER_ACCEPTANCE_CACHE to a directory to reuse checkpoints
across runs.
"""
import os
import time
from pathlib import Path

import numpy as np
import pytest

from pixcoder import pipeline
from pixcoder.codec import decode, encode, layout_for, sample_tree
from pixcoder.dsl import validate
from pixcoder.model import CalibRecord, calibrate_threshold, load_checkpoint, save_checkpoint
from pixcoder.render import gen_dataset
from pixcoder.standardize import binarize, resolve
from pixcoder.stm import brute_force_stm, similarity, stm

from conftest import ACCEPTANCE, all_trees, gradient_check, random_label_tree

PLATFORMS = ("web", "ios", "android")
FLOORS = {"web": 0.95, "ios": 0.93, "android": 0.93}


def record(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
    assert passed, detail


def test_criterion_01_codec_bijection():
    start = time.perf_counter()
    failures = 0
    for platform in PLATFORMS:
        layout = layout_for(platform)
        rng = np.random.default_rng([1, PLATFORMS.index(platform)])
        for _ in range(10_000):
            t = sample_tree(layout, rng)
            if decode(encode(t, layout), layout) != t:
                failures += 1
    elapsed = time.perf_counter() - start
    record(1, failures == 0 and elapsed < 10,
           f"{failures} failures over 3 x 10000 trees in {elapsed:.1f}s (limit 10s)")


def test_criterion_02_layout_widths():
    pruned, unpruned = layout_for("ios", True).width, layout_for("ios", False).width
    record(2, (pruned, unpruned) == (72, 176), f"iOS pruned {pruned} bits, unpruned {unpruned} bits")


def test_criterion_03_stm_oracle():
    start = time.perf_counter()
    trees = all_trees(5, "abc")
    # one pair per class of label renamings; both functions only compare labels for equality
    groups = {}
    for t in trees:
        groups.setdefault(_first_seen(t), []).append(t)
    exhaustive = mismatches = 0
    for o1, g1 in groups.items():
        for o2, g2 in groups.items():
            merged = o1 + tuple(x for x in o2 if x not in o1)
            if merged != ("a", "b", "c")[:len(merged)]:
                continue
            for t1 in g1:
                for t2 in g2:
                    exhaustive += 1
                    mismatches += stm(t1, t2) != brute_force_stm(t1, t2)
    rng = np.random.default_rng(3)
    for _ in range(1000):
        t1 = random_label_tree(rng, "abc", 8)
        t2 = random_label_tree(rng, "abc", 8)
        mismatches += stm(t1, t2) != brute_force_stm(t1, t2)
    elapsed = time.perf_counter() - start
    record(3, mismatches == 0 and elapsed < 60,
           f"{mismatches} mismatches over {exhaustive} exhaustive + 1000 random pairs in {elapsed:.1f}s (limit 60s)")


def _first_seen(t):
    seen = []
    for n in t:
        if n.label not in seen:
            seen.append(n.label)
    return tuple(seen)


def test_criterion_04_stm_identities():
    rng = np.random.default_rng(4)
    bad = 0
    for _ in range(10_000):
        t1 = random_label_tree(rng, "abc", 10)
        t2 = random_label_tree(rng, "abc", 10)
        bad += similarity(t1, t1) != 1.0 or similarity(t1, t2) != similarity(t2, t1)
    record(4, bad == 0, f"{bad} violations over 10000 random pairs")


def test_criterion_05_gradient_check():
    start = time.perf_counter()
    worst = max(gradient_check(seed) for seed in range(5))
    elapsed = time.perf_counter() - start
    record(5, worst < 1e-3 and elapsed < 60,
           f"max relative error {worst:.2e} over 5 seeds (limit 1e-3) in {elapsed:.1f}s")


def test_criterion_06_threshold_calibration():
    rng = np.random.default_rng(6)
    worst_mid = 0.0
    bad_overlap = 0
    for _ in range(500):
        gap_lo = rng.uniform(0.0, 0.9)
        gap_hi = rng.uniform(gap_lo + 1e-6, 1.0)
        recs = []
        for epoch in range(int(rng.integers(1, 6))):
            ones = rng.uniform(gap_hi, 1.0, size=int(rng.integers(1, 20)))
            zeros = rng.uniform(0.0, gap_lo, size=int(rng.integers(1, 20)))
            recs.append(CalibRecord(epoch, ones.min(), zeros.max(), ones=ones, zeros=zeros))
        m1 = min(r.min_one for r in recs)
        m0 = max(r.max_zero for r in recs)
        worst_mid = max(worst_mid, abs(calibrate_threshold(recs) - (m0 + m1) / 2))

        recs = []
        for epoch in range(int(rng.integers(1, 6))):
            ones = rng.uniform(0.2, 1.0, size=int(rng.integers(1, 20)))
            zeros = rng.uniform(0.0, 0.8, size=int(rng.integers(1, 20)))
            recs.append(CalibRecord(epoch, ones.min(), zeros.max(), ones=ones, zeros=zeros))
        all_ones = np.concatenate([r.ones for r in recs])
        all_zeros = np.concatenate([r.zeros for r in recs])

        def errors(t):
            return int((all_ones <= t).sum() + (all_zeros > t).sum())

        brute = min(errors(c) for c in np.concatenate([all_ones, all_zeros]))
        bad_overlap += errors(calibrate_threshold(recs)) != brute
    record(6, worst_mid <= 1e-12 and bad_overlap == 0,
           f"midpoint deviation {worst_mid:.1e} (limit 1e-12); {bad_overlap}/500 overlapping cases off the brute-force minimum")


# --- end to end ---------------------------------------------------------------

@pytest.fixture(scope="module")
def trained():
    """Per platform: test scores, targets, layout, calibrated threshold, training time."""
    cache = os.environ.get("PIXCODER_ACCEPTANCE_CACHE")
    out = {}
    for platform in PLATFORMS:
        start = time.perf_counter()
        cfg = pipeline.RunConfig(platform=platform)
        ds = gen_dataset(cfg.n_train, cfg.n_test, platform, cfg.data_seed)
        layout = ds.layout
        ckpt = Path(cache) / f"{platform}.pxcm" if cache else None
        if ckpt and ckpt.exists():
            model = load_checkpoint(ckpt)
            train_images = None
        else:
            train_images, labels = ds.arrays("train", cfg.image_size)
            model = pipeline.train_pipeline(train_images, labels, layout, cfg).model
            if ckpt:
                ckpt.parent.mkdir(parents=True, exist_ok=True)
                save_checkpoint(model, ckpt)
        test_images, _ = ds.arrays("test", cfg.image_size)
        scores = model.forward(test_images)
        out[platform] = {
            "ds": ds,
            "model": model,
            "layout": layout,
            "scores": scores,
            "targets": [s.tree for s in ds.test],
            "train_images": train_images,
            "seconds": time.perf_counter() - start,
        }
    return out


@pytest.mark.slow
def test_criterion_07_end_to_end(trained):
    lines = []
    ok = True
    total = 0.0
    for platform in PLATFORMS:
        run = trained[platform]
        rep = pipeline.evaluate_scores(run["scores"], run["targets"], run["layout"], run["model"].threshold)
        run["report"] = rep
        passed = rep.mean >= FLOORS[platform] and rep.syntax_errors == 0 and len(rep.similarities) == 250
        ok &= passed
        total += run["seconds"]
        lines.append(f"{platform} {rep.mean:.4f} (floor {FLOORS[platform]}, {rep.syntax_errors} syntax errors, "
                     f"threshold {run['model'].threshold:.3g})")
    cores = os.cpu_count()
    record(7, ok, "; ".join(lines) + f"; {total / 60:.1f} min on {cores} core(s)")


@pytest.mark.slow
def test_criterion_08_baseline_gap(trained):
    lines = []
    ok = True
    for platform in PLATFORMS:
        run = trained[platform]
        ours = pipeline.evaluate_scores(run["scores"], run["targets"], run["layout"], run["model"].threshold).mean
        base = pipeline.baseline_report(run["layout"], run["targets"], seed=8).mean
        ok &= ours - base >= 0.20
        lines.append(f"{platform} baseline {base:.4f} vs {ours:.4f} (gap {100 * (ours - base):.1f} points)")
    record(8, ok, "; ".join(lines))


@pytest.mark.slow
def test_criterion_09_threshold_sweep(trained):
    # judged on the iOS model; the other platforms are reported alongside
    lines = []
    verdict = {}
    for platform in PLATFORMS:
        run = trained[platform]
        grid = pipeline.threshold_sweep(run["scores"], run["targets"], run["layout"], pipeline.default_sweep_thresholds())
        best_t, best = max(grid[1:-1], key=lambda row: row[1])
        low = dict(grid)[1e-4]
        high = dict(grid)[0.9]
        verdict[platform] = best > low and best > high
        lines.append(f"{platform} 1e-4: {low:.4f}, {best_t:g}: {best:.4f}, 0.9: {high:.4f}")
    record(9, verdict["ios"], "; ".join(lines))


def test_criterion_10_standardizer_totality():
    rng = np.random.default_rng(10)
    failures = 0
    n = 100_000
    layouts = [layout_for(p) for p in PLATFORMS]
    for i in range(n):
        layout = layouts[i % 3]
        # vary density so sparse, dense and empty binarizations all occur
        scores = rng.uniform(size=layout.width) ** rng.uniform(0.2, 8.0)
        threshold = rng.uniform(1e-4, 0.999)
        try:
            tree = decode(resolve(binarize(scores, threshold), scores, layout), layout)
            failures += bool(validate(tree, layout.grammar))
        except Exception:
            failures += 1
    record(10, failures == 0, f"{failures} failures over {n} random score vectors")


@pytest.mark.slow
def test_trained_region_argmax_matches_labels(trained):
    # occupied regions on training images: argmax inside the region picks the labelled pattern
    hits = total = 0
    for platform in PLATFORMS:
        run = trained[platform]
        images = run["train_images"]
        if images is None:
            pytest.skip("checkpoints came from the cache; training images were not rendered")
        scores = run["model"].forward(images)
        labels = np.stack([s.bits for s in run["ds"].train])
        for r in run["layout"].regions:
            span = labels[:, r.start:r.stop]
            occupied = span.any(axis=1)
            hits += int((scores[occupied, r.start:r.stop].argmax(axis=1) == span[occupied].argmax(axis=1)).sum())
            total += int(occupied.sum())
    assert hits / total >= 0.99, f"{hits}/{total}"


@pytest.mark.slow
def test_trained_pipeline_recovers_exact_trees(trained):
    # the rendered held-out tree comes back verbatim for at least 95% of samples
    rates = {}
    for platform in PLATFORMS:
        run = trained[platform]
        rep = pipeline.evaluate_scores(run["scores"], run["targets"], run["layout"], run["model"].threshold)
        rates[platform] = float(np.mean([s == 1.0 for s in rep.similarities]))
    print("exact recovery:", rates)
    assert all(r >= 0.95 for r in rates.values()), rates
