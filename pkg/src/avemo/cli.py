"""Command-line entry point.

Subcommands cover the whole pipeline: synthetic data, preprocessing,
base-LM warm-up, the three training stages (with objective and modality
ablations), evaluation, and serving. Every command writes its resolved
configuration next to its outputs and exits 0 on success, 2 on config
errors, 3 on data errors, 4 on runtime failures.
"""

from __future__ import annotations

import concurrent.futures
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import click

from avemo.config import resolve_config
from avemo.core.manifest import validate_manifest
from avemo.core.vocab import EmotionVocabulary
from avemo.errors import AvemoError, ConfigError

log = logging.getLogger("avemo")

PROFILES = ("tiny", "default")


def _system_config(profile: str, overrides: dict):
    from avemo.config import deep_merge
    from avemo.system import SystemConfig

    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    base = SystemConfig.tiny() if profile == "tiny" else SystemConfig()
    if overrides:
        return SystemConfig.from_dict(deep_merge(base.to_dict(), overrides))
    return base


def run_command(fn):
    """Map package errors to exit codes with a one-line diagnosis."""

    def wrapper(*args, **kwargs):
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
        try:
            return fn(*args, **kwargs)
        except AvemoError as exc:
            click.echo(f"error ({type(exc).__name__}): {exc}", err=True)
            sys.exit(exc.exit_code)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@click.group(context_settings={"auto_envvar_prefix": "AVEMO"})
def main():
    """Emotion-aware audio-visual dialogue toolkit."""


@main.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dialogues", type=int, default=8, show_default=True)
@click.option("--rounds", type=int, default=2, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--split", type=click.Choice(["train", "valid", "test"]), default="train", show_default=True)
@run_command
def synth(seed, dialogues, rounds, out, split):
    """Generate a deterministic synthetic audio-visual dialogue corpus."""
    from avemo.preprocessing import generate_synthetic_corpus

    manifest = generate_synthetic_corpus(out, seed, dialogues, rounds, split=split)
    resolved = resolve_config(
        {"seed": seed, "dialogues": dialogues, "rounds": rounds, "split": split}
    )
    resolved.save(out / "resolved_config.json")
    click.echo(f"wrote {len(manifest.records)} dialogues under {out}")


@main.command()
@click.option("--manifest", "manifest_path", type=click.Path(path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--workers", type=int, default=4, show_default=True)
@run_command
def preprocess(manifest_path, out, workers):
    """Warm the feature cache for every utterance in a manifest."""
    from avemo.preprocessing import FeatureCache, preprocess_utterance

    manifest = validate_manifest(manifest_path)
    cache = FeatureCache(out)
    turns = [t for rec in manifest.records for t in rec.user_turns()]
    done = 0
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        futures = [pool.submit(preprocess_utterance, t, manifest.base_dir, cache) for t in turns]
        for f in concurrent.futures.as_completed(futures):
            f.result()
            done += 1
    report = {"utterances": done, "cache_dir": str(out)}
    (out / "preprocess_report.json").write_text(json.dumps(report, indent=2))
    click.echo(f"cached features for {done} utterances")


@main.command()
@click.option("--manifest", "manifest_path", type=click.Path(path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--profile", type=click.Choice(PROFILES), default="tiny", show_default=True)
@click.option("--steps", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--peak-lr", type=float, default=None)
@click.option("--seed", type=int, default=None)
@run_command
def pretrain(manifest_path, out, config_path, profile, steps, batch_size, peak_lr, seed):
    """Warm up the builtin decoder as a plain text LM (stands in for a
    pretrained chat model, which this repo does not ship)."""
    from avemo.system import DialogueSystem
    from avemo.training import OptimizerConfig, PretrainConfig, pretrain_lm

    resolved = resolve_config(
        {
            "profile": profile,
            "system": {},
            "pretrain": {"max_steps": 300, "batch_size": 16, "seed": 0},
            "optimizer": {"peak_lr": 3e-3, "warmup_steps": 20},
        },
        config_path,
        flags={
            "profile": profile,
            "pretrain": {
                k: v for k, v in {"max_steps": steps, "batch_size": batch_size, "seed": seed}.items()
            },
            "optimizer": {k: v for k, v in {"peak_lr": peak_lr}.items()},
        },
    )
    manifest = validate_manifest(manifest_path)
    system = DialogueSystem(_system_config(resolved.data["profile"], resolved.section("system")))
    cfg = PretrainConfig(
        max_steps=resolved.section("pretrain").get("max_steps") or 300,
        batch_size=resolved.section("pretrain").get("batch_size") or 16,
        optimizer=OptimizerConfig(**{k: v for k, v in resolved.section("optimizer").items() if v is not None}),
        seed=resolved.section("pretrain").get("seed") or 0,
    )
    losses = pretrain_lm(system, manifest, cfg, out_dir=out, log_path=out / "pretrain_log.jsonl")
    resolved.save(out / "resolved_config.json")
    click.echo(f"pretrained decoder for {len(losses)} steps, final loss {losses[-1]:.4f}")


@main.command()
@click.option("--stage", type=click.Choice(["1", "2", "3"]), required=True)
@click.option("--manifest", "manifest_path", type=click.Path(path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--resume", type=click.Path(path_type=Path), default=None, help="checkpoint to continue from")
@click.option("--profile", type=click.Choice(PROFILES), default="tiny", show_default=True)
@click.option(
    "--ablate-objectives",
    type=str,
    default=None,
    help="comma list, e.g. 'asr' for ASR-only stage 1 or 'emr' for EMR-only stage 2",
)
@click.option(
    "--ablate-modality",
    type=str,
    default=None,
    help="comma list from {audio, video, text}; default audio,video",
)
@click.option("--steps", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--peak-lr", type=float, default=None)
@click.option("--seed", type=int, default=None)
@run_command
def train(stage, manifest_path, out, config_path, resume, profile, ablate_objectives, ablate_modality,
          steps, batch_size, peak_lr, seed):
    """Run one training stage, writing a checkpoint and a metrics log."""
    from avemo.system import DialogueSystem, load_checkpoint
    from avemo.training import OptimizerConfig, StageConfig, train_stage

    stage = int(stage)
    defaults = {
        "profile": profile,
        "system": {},
        "train": {"max_steps": 300, "batch_size": 8, "eval_every": 50, "seed": 0},
        "optimizer": {"peak_lr": 3e-3, "warmup_steps": 20},
    }
    resolved = resolve_config(
        defaults,
        config_path,
        flags={
            "profile": profile,
            "train": {
                k: v
                for k, v in {"max_steps": steps, "batch_size": batch_size, "seed": seed}.items()
            },
            "optimizer": {k: v for k, v in {"peak_lr": peak_lr}.items()},
        },
    )
    manifest = validate_manifest(manifest_path)
    if resume:
        system, info = load_checkpoint(resume)
        click.echo(f"resumed from {resume} (stage {info['provenance'].get('stage')})")
    else:
        system = DialogueSystem(_system_config(resolved.data["profile"], resolved.section("system")))
        if stage == 3:
            click.echo(
                "warning: no stage-1/2 checkpoint supplied; proceeding with randomly "
                "initialized encoders",
                err=True,
            )

    objectives = tuple(ablate_objectives.split(",")) if ablate_objectives else ()
    modalities = tuple(ablate_modality.split(",")) if ablate_modality else ("audio", "video")
    train_section = resolved.section("train")
    cfg = StageConfig(
        stage=stage,
        objectives=objectives,
        optimizer=OptimizerConfig(**{k: v for k, v in resolved.section("optimizer").items() if v is not None}),
        batch_size=train_section.get("batch_size") or 8,
        max_steps=train_section.get("max_steps") or 300,
        eval_every=train_section.get("eval_every") or 50,
        modalities=modalities,
        seed=train_section.get("seed") or 0,
    )
    result = train_stage(
        system, cfg, manifest, out_dir=out, log_path=Path(out) / "train_log.jsonl"
    )
    resolved.save(Path(out) / "resolved_config.json")
    click.echo(f"stage {stage} done: {result.steps} steps, final loss {result.final_loss:.4f}")


@main.command("eval")
@click.option("--checkpoint", type=click.Path(path_type=Path), required=True)
@click.option("--manifest", "manifest_path", type=click.Path(path_type=Path), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--turns-per-dialogue", type=int, default=4, show_default=True)
@click.option("--ablate-modality", type=str, default=None)
@click.option("--max-new", type=int, default=96, show_default=True)
@run_command
def eval_cmd(checkpoint, manifest_path, seed, out, turns_per_dialogue, ablate_modality, max_new):
    """Evaluate a checkpoint on a manifest; writes a metric report."""
    from avemo.evaluation.harness import EvalConfig, evaluate_corpus
    from avemo.system import load_checkpoint

    system, _ = load_checkpoint(checkpoint)
    manifest = validate_manifest(manifest_path)
    modalities = tuple(ablate_modality.split(",")) if ablate_modality else ("audio", "video")
    cfg = EvalConfig(turns_per_dialogue=turns_per_dialogue, seed=seed, modalities=modalities, max_new=max_new)
    report = evaluate_corpus(system, manifest, cfg)
    report.save(out)
    resolve_config({"seed": seed, "turns_per_dialogue": turns_per_dialogue}).save(
        Path(out).with_suffix(".config.json")
    )
    click.echo(report.table_row())


@main.command()
@click.option("--checkpoint", type=click.Path(path_type=Path), required=True)
@click.option("--port", type=int, default=8731, show_default=True)
@click.option("--host", type=str, default="127.0.0.1", show_default=True)
@click.option("--reserve", type=int, default=256, show_default=True)
@click.option("--auth-token", type=str, default=None)
@click.option("--snapshot-dir", type=click.Path(path_type=Path), default=None)
@run_command
def serve(checkpoint, port, host, reserve, auth_token, snapshot_dir):
    """Serve the dialogue HTTP API over a loaded checkpoint."""
    import uvicorn

    from avemo.service.app import create_app

    app = create_app(
        checkpoint_path=checkpoint, reserve=reserve, auth_token=auth_token, snapshot_dir=snapshot_dir
    )
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
