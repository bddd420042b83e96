"""Command-line entry points around the library.

Every randomized subcommand takes (or defaults) a seed and prints it, so
runs are reproducible from the console output alone.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

import click

from .codec import decode_tokens, encode_song
from .config import load_config
from .controls import Calibration, DEFAULT_CALIBRATION, compute_control_set
from .masking import mask_cells
from .metrics import evaluate_corpus, region_notes, render_table, sample_eval_regions
from .midi_io import parse_midi, quantize, write_midi
from .model import (
    ModelConfig,
    Seq2SeqTransformer,
    TrainConfig,
    fit,
    load_checkpoint,
    save_checkpoint,
)
from .pipeline import build_dataset, filter_songs, load_shard
from .sampler import sample_infill
from .tension import bar_tensions

__all__ = ["cli", "main"]


def _fail(message: str) -> "click.ClickException":
    return click.ClickException(message)


def _load_song(path: str):
    try:
        song = quantize(parse_midi(Path(path).read_bytes()))
    except Exception as error:  # noqa: BLE001 - single-line CLI error
        raise _fail(str(error)) from None
    return song


def _calibration(path: str | None) -> Calibration:
    return Calibration.load(path) if path else DEFAULT_CALIBRATION


@click.group()
def cli() -> None:
    """Controllable multi-track MIDI infilling toolkit."""


@cli.command()
@click.argument("midi", type=click.Path(exists=True, dir_okay=False))
@click.option("--controls/--no-controls", "with_controls", default=False)
@click.option("--calibration", type=click.Path(exists=True), default=None)
@click.option("--json", "as_json", is_flag=True)
def tokenize(midi: str, with_controls: bool, calibration: str | None, as_json: bool) -> None:
    """Print a MIDI file's token sequence."""
    cal = _calibration(calibration)
    song = _load_song(midi)
    controls = compute_control_set(song, cal) if with_controls else None
    seq = encode_song(song, controls, cal)
    if as_json:
        click.echo(json.dumps({"tokens": list(seq.tokens), "with_controls": with_controls}))
    else:
        click.echo(seq.to_text())


@cli.command()
@click.argument("midi", type=click.Path(exists=True, dir_okay=False))
@click.option("--calibration", type=click.Path(exists=True), default=None)
def controls(midi: str, calibration: str | None) -> None:
    """Print a MIDI file's control set as JSON."""
    cal = _calibration(calibration)
    song = _load_song(midi)
    click.echo(json.dumps(compute_control_set(song, cal).to_dict(), indent=2))


@cli.command()
@click.argument("midi", type=click.Path(exists=True, dir_okay=False))
def tension(midi: str) -> None:
    """Print per-bar (tensile strain, cloud diameter) as JSON lines."""
    song = _load_song(midi)
    for bar, measure in enumerate(bar_tensions(song)):
        click.echo(
            json.dumps(
                {
                    "bar": bar,
                    "tensile_strain": measure.tensile_strain,
                    "cloud_diameter": measure.cloud_diameter,
                    "notes": measure.note_count,
                }
            )
        )


@cli.group()
def dataset() -> None:
    """Dataset construction commands."""


@dataset.command("build")
@click.argument("midi_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--calibration", type=click.Path(exists=True), default=None)
def dataset_build(midi_dir: str, out: str, seed: int, calibration: str | None) -> None:
    """Filter, window, augment, tokenize, and split a MIDI folder."""
    click.echo(f"seed: {seed}")
    paths = sorted(str(p) for p in Path(midi_dir).glob("**/*.mid"))
    paths += sorted(str(p) for p in Path(midi_dir).glob("**/*.midi"))
    if not paths:
        raise _fail(f"no .mid files under {midi_dir}")
    result = filter_songs(paths)
    for path, reason in result.rejected:
        click.echo(f"rejected {path}: {reason}", err=True)
    if not result.accepted:
        raise _fail("no songs passed the melody+bass filter")
    manifest = build_dataset(result.accepted, out, seed, _calibration(calibration))
    click.echo(f"accepted {len(result.accepted)} songs, rejected {len(result.rejected)}")
    click.echo(json.dumps(manifest["counts"], indent=2, sort_keys=True))
    click.echo(f"manifest: {Path(out) / 'manifest.json'}")


@cli.command()
@click.option("--stage", type=click.Choice(["pretrain", "finetune"]), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
def train(stage: str, config_path: str) -> None:
    """Train a model stage on a built dataset."""
    config = load_config(config_path)
    if not config.dataset_dir:
        raise _fail("config needs dataset_dir")
    train_config = TrainConfig(**config.train)
    click.echo(f"seed: {train_config.seed}")
    variant = "with_controls" if config.with_controls else "without_controls"
    shard_path = Path(config.dataset_dir) / f"train_{variant}.jsonl"
    if not shard_path.exists():
        raise _fail(f"missing shard {shard_path}")
    examples = load_shard(shard_path)
    wanted_mode = (lambda m: m == "pretrain_span") if stage == "pretrain" else (
        lambda m: m != "pretrain_span"
    )
    examples = [e for e in examples if wanted_mode(e.mode)]
    if not examples:
        raise _fail(f"no {stage} examples in {shard_path}")

    if config.checkpoint and Path(config.checkpoint).exists():
        model, _ = load_checkpoint(Path(config.checkpoint).read_bytes())
    else:
        model = Seq2SeqTransformer(ModelConfig(**config.model))
    log_path = Path(config.dataset_dir) / f"{stage}_{variant}_log.jsonl"
    with open(log_path, "w") as log_stream:
        losses = fit(model, examples, train_config, stage, log_stream=log_stream)
    out = config.output_checkpoint or config.checkpoint or "model.ckpt"
    Path(out).write_bytes(save_checkpoint(model))
    click.echo(f"steps: {len(losses)}  final loss: {losses[-1]:.4f}")
    click.echo(f"checkpoint: {out}")
    click.echo(f"log: {log_path}")


@cli.command("eval")
@click.option("--checkpoint", type=click.Path(exists=True), default=None)
@click.option("--testset", "testset_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--n", "count", default=1000, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--generator", type=click.Choice(["model", "identity"]), default="model")
@click.option("--temperature", default=1.0, show_default=True, type=float)
@click.option("--json", "as_json", is_flag=True)
def eval_command(
    checkpoint: str | None,
    testset_dir: str,
    count: int,
    seed: int,
    generator: str,
    temperature: float,
    as_json: bool,
) -> None:
    """Infill masked tracks/bars over a testset and report the metrics."""
    click.echo(f"seed: {seed}", err=as_json)
    paths = sorted(Path(testset_dir).glob("**/*.mid"))
    if not paths:
        raise _fail(f"no .mid files under {testset_dir}")
    if generator == "model":
        if not checkpoint:
            raise _fail("--checkpoint is required with --generator model")
        model, _ = load_checkpoint(Path(checkpoint).read_bytes())
    else:
        model = None

    rng = random.Random(seed)
    pairs = []
    for index in range(count):
        path = paths[index % len(paths)]
        try:
            song = quantize(parse_midi(path.read_bytes()))
            seq = encode_song(song, compute_control_set(song))
        except Exception as error:  # noqa: BLE001
            click.echo(f"skipped {path}: {error}", err=True)
            continue
        for category, masked, cells in sample_eval_regions(seq, rng):
            original = region_notes(seq, cells)
            if model is None:
                generated = original
            else:
                result = sample_infill(
                    model, masked, temperature=temperature, rng_seed=rng.randrange(2**31)
                )
                generated = region_notes(result.tokens, cells)
            pairs.append((generated, original, category))
    report = evaluate_corpus(pairs)
    if as_json:
        click.echo(report.to_json())
    else:
        click.echo(render_table(report))


@cli.command()
@click.argument("midi", type=click.Path(exists=True, dir_okay=False))
@click.option("--bar", "bars", multiple=True, type=int, help="bar index to regenerate")
@click.option("--track", "tracks", multiple=True, type=int, help="track index to regenerate")
@click.option("--set", "overrides", multiple=True, help="control override, e.g. density=8")
@click.option("--checkpoint", type=click.Path(exists=True), default=None)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--temperature", default=1.0, show_default=True, type=float)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.option("--json", "as_json", is_flag=True)
def infill(
    midi: str,
    bars: tuple[int, ...],
    tracks: tuple[int, ...],
    overrides: tuple[str, ...],
    checkpoint: str | None,
    seed: int,
    temperature: float,
    out_path: str | None,
    as_json: bool,
) -> None:
    """Regenerate the selected (bar, track) cells of a MIDI file.

    Cells are the cross product of --bar and --track. Track overrides
    (density/occupation/polyphony) apply to every selected track, bar
    overrides (strain/diameter) to every selected bar.
    """
    click.echo(f"seed: {seed}", err=as_json)
    song = _load_song(midi)
    if not bars or not tracks:
        raise _fail("need at least one --bar and one --track")
    seq = encode_song(song, compute_control_set(song))

    track_overrides: dict[int, dict[str, int]] = {}
    bar_overrides: dict[int, dict[str, int]] = {}
    for item in overrides:
        key, _, value = item.partition("=")
        if not value or not value.lstrip("-").isdigit():
            raise _fail(f"bad --set {item!r}; expected name=integer")
        if key in ("density", "occupation", "polyphony"):
            for track in tracks:
                track_overrides.setdefault(track, {})[key] = int(value)
        elif key in ("strain", "diameter"):
            for bar in bars:
                bar_overrides.setdefault(bar, {})[key] = int(value)
        else:
            raise _fail(f"unknown control {key!r}")

    from .service import apply_control_overrides

    try:
        seq = apply_control_overrides(seq, track_overrides, bar_overrides)
        masked = mask_cells(seq, [(b, t) for b in bars for t in tracks])
    except ValueError as error:
        raise _fail(str(error)) from None

    if checkpoint:
        model, _ = load_checkpoint(Path(checkpoint).read_bytes())
    else:
        import torch

        torch.manual_seed(0)
        model = Seq2SeqTransformer(ModelConfig.toy())
        click.echo("no checkpoint given: sampling from a fresh toy model", err=True)
    result = sample_infill(model, masked, temperature=temperature, rng_seed=seed)
    if out_path:
        Path(out_path).write_bytes(write_midi(decode_tokens(result.tokens)))
    if as_json:
        click.echo(
            json.dumps(
                {
                    "seed": seed,
                    "tokens": list(result.tokens.tokens),
                    "truncated": result.truncated,
                    "out": out_path,
                }
            )
        )
    else:
        click.echo(result.tokens.to_text())


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def serve(config_path: str | None) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    config = load_config(config_path)
    uvicorn.run(create_app(config), host=config.host, port=config.port)


def main() -> None:
    try:
        cli(standalone_mode=False)
    except click.ClickException as error:
        error.show()
        sys.exit(error.exit_code)
    except click.exceptions.Abort:
        sys.exit(130)
    except click.exceptions.Exit as error:
        sys.exit(error.exit_code)


if __name__ == "__main__":
    main()
