"""Command line interface: ``pixcoder <command> --help`` for details."""
from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from . import pipeline
from .codec import CapacityError, count_valid, decode, enumerate_valid, layout_for, parse_layout_id
from .codegen import TARGETS
from .dsl import serialize
from .model import CheckpointError, load_checkpoint, save_checkpoint, write_training_log
from .render import gen_dataset, load_image, manifest_arrays, read_manifest, write_dataset

EXIT_CONFIG = 2
EXIT_MISMATCH = 3


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _config(config_path, **overrides) -> pipeline.RunConfig:
    try:
        if config_path:
            return pipeline.RunConfig.from_file(config_path, **overrides)
        return pipeline.RunConfig(**{k: v for k, v in overrides.items() if v is not None})
    except (pipeline.ConfigError, TypeError) as exc:
        _fail(str(exc), EXIT_CONFIG)


def _load_model(path, layout=None):
    try:
        model = load_checkpoint(path)
    except (OSError, CheckpointError) as exc:
        _fail(f"cannot load checkpoint {path}: {exc}", EXIT_MISMATCH)
    if layout is None:
        try:
            layout = parse_layout_id(model.layout_id)
        except ValueError as exc:
            _fail(str(exc), EXIT_MISMATCH)
    try:
        pipeline.check_layout(model, layout)
    except pipeline.CheckpointMismatch as exc:
        _fail(str(exc), EXIT_MISMATCH)
    return model, layout


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log training progress.")
def main(verbose):
    """Screenshot-to-code pipeline: synthetic data, training, inference, evaluation."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")


@main.command("gen-data")
@click.option("--platform", type=click.Choice(["web", "ios", "android"]), default="ios", show_default=True)
@click.option("--n-train", type=int, default=1500, show_default=True)
@click.option("--n-test", type=int, default=250, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--canvas", type=int, default=256, show_default=True, help="Rendered image side in pixels.")
@click.option("--out", type=click.Path(file_okay=False), required=True)
def gen_data(platform, n_train, n_test, seed, canvas, out):
    """Render a synthetic train/test dataset with JSON-lines manifests."""
    if n_train < 1 or n_test < 1:
        _fail("--n-train and --n-test must be at least 1", EXIT_CONFIG)
    ds = gen_dataset(n_train, n_test, platform, seed, canvas=(canvas, canvas))
    paths = write_dataset(ds, out)
    click.echo(f"wrote {n_train} train / {n_test} test samples: {paths['train']} {paths['test']}")


@main.command()
@click.option("--data", type=click.Path(exists=True, file_okay=False), required=True, help="Directory from gen-data.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Checkpoint path.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--epochs", type=int)
@click.option("--batch-size", type=int)
@click.option("--lr", type=float)
@click.option("--seed", type=int)
@click.option("--image-size", type=int)
@click.option("--output", type=click.Choice(["logistic", "region-softmax"]))
@click.option("--threshold", type=float, help="Store this threshold instead of the calibrated one.")
@click.option("--train-sizes", help="Comma list, e.g. 250,500,1000,1500: train one model per size and write a sweep CSV.")
def train(data, out, config_path, epochs, batch_size, lr, seed, image_size, output, threshold, train_sizes):
    """Train the vision model and calibrate its threshold."""
    data = Path(data)
    entries = read_manifest(data / "train.jsonl")
    layout = parse_layout_id(entries[0].layout_id)
    cfg = _config(
        config_path, platform=layout.platform, epochs=epochs, batch_size=batch_size, lr=lr,
        seed=seed, image_size=image_size, output=output, threshold=threshold,
    )
    images, labels = manifest_arrays(entries, cfg.image_size)
    out = Path(out)
    if train_sizes:
        try:
            sizes = [int(s) for s in train_sizes.split(",")]
        except ValueError:
            _fail(f"bad --train-sizes {train_sizes!r}", EXIT_CONFIG)
        test = read_manifest(data / "test.jsonl")
        test_images, _ = manifest_arrays(test, cfg.image_size)
        rows = []
        for n in sizes:
            result = pipeline.train_pipeline(images[:n], labels[:n], layout, cfg)
            thr = cfg.threshold if cfg.threshold is not None else result.model.threshold
            rep = pipeline.evaluate(result.model, test_images, [e.tree for e in test], layout, thr)
            rows.append((n, rep.mean))
            click.echo(f"train size {n}: mean similarity {rep.mean:.4f}")
        sweep = out.with_suffix(".sizes.csv")
        pipeline.write_sweep_csv(rows, sweep, ["train_size", "mean_similarity"])
        click.echo(f"wrote {sweep}")
        return
    result = pipeline.train_pipeline(images, labels, layout, cfg)
    if cfg.threshold is not None:
        result.model.threshold = cfg.threshold
    save_checkpoint(result.model, out)
    write_training_log(result.history, out.with_suffix(".log.csv"))
    click.echo(f"saved {out} (threshold {result.model.threshold:.6g})")


@main.command("eval")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--threshold", type=float, help="Override the checkpoint's calibrated threshold.")
@click.option("--sweep", is_flag=True, help="Also evaluate a grid of thresholds.")
@click.option("--out", type=click.Path(dir_okay=False), help="Write the report as JSON.")
def eval_cmd(model_path, manifest, threshold, sweep, out):
    """Mean STM similarity of generated DSL against the manifest's targets."""
    if threshold is not None and not 0 < threshold < 1:
        _fail("--threshold must lie in (0, 1)", EXIT_CONFIG)
    entries = read_manifest(manifest)
    model, layout = _load_model(model_path, parse_layout_id(entries[0].layout_id))
    images, _ = manifest_arrays(entries, model.image_size)
    targets = [e.tree for e in entries]
    scores = model.forward(images)
    thr = model.threshold if threshold is None else threshold
    rep = pipeline.evaluate_scores(scores, targets, layout, thr, model_id=Path(model_path).name)
    click.echo(f"{layout.platform}: mean similarity {rep.mean:.5f} over {len(targets)} samples, "
               f"{rep.syntax_errors} syntax errors, threshold {thr:.6g}")
    if out:
        Path(out).write_text(rep.to_json())
    if sweep:
        rows = pipeline.threshold_sweep(scores, targets, layout, pipeline.default_sweep_thresholds())
        for t, m in rows:
            click.echo(f"  threshold {t:<8g} {m:.5f}")
        if out:
            pipeline.write_sweep_csv(rows, Path(out).with_suffix(".sweep.csv"), ["threshold", "mean_similarity"])


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--image", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--layout", "layout_id", help="Expected layout id, e.g. ios-pruned.")
@click.option("--target", type=click.Choice(TARGETS), default="html", show_default=True)
@click.option("--threshold", type=float)
@click.option("--out", type=click.Path(dir_okay=False), help="Write compiled code here (DSL goes next to it as .gui).")
def infer(model_path, image, layout_id, target, threshold, out):
    """Generate DSL and front-end code for one screenshot."""
    layout = None
    if layout_id:
        try:
            layout = parse_layout_id(layout_id)
        except ValueError as exc:
            _fail(str(exc), EXIT_CONFIG)
    model, layout = _load_model(model_path, layout)
    if threshold is not None and not 0 < threshold < 1:
        _fail("--threshold must lie in (0, 1)", EXIT_CONFIG)
    result = pipeline.infer(load_image(image), model, layout, threshold=threshold, target=target)
    if out:
        out = Path(out)
        out.write_text(result.code)
        out.with_suffix(".gui").write_text(result.dsl + "\n")
        click.echo(f"wrote {out} and {out.with_suffix('.gui')}")
    else:
        click.echo(result.dsl)
        click.echo()
        click.echo(result.code, nl=False)


@main.command()
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
def baseline(manifest, seed, out):
    """Score random grammar-valid DSLs against the manifest's targets."""
    entries = read_manifest(manifest)
    layout = parse_layout_id(entries[0].layout_id)
    rep = pipeline.baseline_report(layout, [e.tree for e in entries], seed)
    click.echo(f"{layout.platform}: baseline mean similarity {rep.mean:.5f}")
    if out:
        Path(out).write_text(rep.to_json())


@main.command()
@click.argument("reports", nargs=-1, type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False))
def report(reports, csv_path):
    """Tabulate eval/baseline JSON reports: systems by platforms."""
    table = pipeline.report(pipeline.EvalReport.from_json(Path(p).read_text()) for p in reports)
    click.echo(table.text(), nl=False)
    if csv_path:
        Path(csv_path).write_text(table.csv())


@main.command("enumerate")
@click.option("--platform", type=click.Choice(["web", "ios", "android"]), default="ios", show_default=True)
@click.option("--unpruned", is_flag=True)
@click.option("--list", "n_list", type=int, default=0, help="Print the first N valid vectors as DSL.")
@click.option("--json", "as_json", is_flag=True, help="Print the layout descriptor.")
def enumerate_cmd(platform, unpruned, n_list, as_json):
    """Vector width and number of valid layouts."""
    layout = layout_for(platform, not unpruned)
    if as_json:
        click.echo(layout.to_json())
        return
    count = count_valid(layout)
    click.echo(f"{layout.layout_id}: {layout.width} bits, {count} valid vectors ({float(count):.3g})")
    if n_list:
        try:
            _, it = enumerate_valid(layout, limit=n_list)
        except CapacityError as exc:
            _fail(str(exc), EXIT_CONFIG)
        for bits in it:
            click.echo("".join(map(str, bits)))
            click.echo(serialize(decode(bits, layout)))


if __name__ == "__main__":
    main()
