"""Command-line entry point for exposure-fairness studies.

Commands: ``toy`` (metric regression gate on the constructed toy
systems), ``evaluate`` (metric reports for run files / checkpoints over
a beta grid), ``sweep`` (trade-off curves + AUC), ``correlate`` (Kendall
correlation matrices per user attribute), ``train`` (fairness-aware MF
training). Exit codes: 0 success, 1 acceptance mismatch, 2 config error,
3 data error.

Every flag can also come from a JSON config file (``--config``); explicit
flags override file values.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import study as study_mod
from .analysis import paired_t_test
from .data import build_group_maps, load_movielens, load_run_file, split
from .errors import ConfigError, DataError
from .metrics import METRICS
from .study import StudyConfig, config_hash
from .toys import EXPECTED, TOY_SYSTEMS, toy_table
from .trainer import (
    MFModel,
    TrainerConfig,
    load_checkpoint,
    ndcg_at_k,
    save_checkpoint,
    train,
)

EXIT_MISMATCH = 1
EXIT_CONFIG = 2
EXIT_DATA = 3


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_config_file(path) -> dict:
    if not path:
        return {}
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return payload


def _merge(file_cfg: dict, defaults: dict, **flags) -> dict:
    """Flag values override file values override defaults (None = not given)."""
    out = dict(defaults)
    for key, value in file_cfg.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = value
    for key, value in flags.items():
        if value is not None and value != ():
            out[key] = list(value) if isinstance(value, tuple) else value
    return out


def _guarded(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(EXIT_CONFIG, str(exc))
        except DataError as exc:
            _fail(EXIT_DATA, str(exc))

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@click.group()
def main():
    """Audit ranking policies for joint exposure fairness; train against it."""


@main.command()
def toy():
    """Check the six constructed toy systems against their known metric table."""
    computed, expected, worst = toy_table()
    header = "system  " + "  ".join(f"{m}-F" for m in METRICS)
    click.echo(header)
    for name in TOY_SYSTEMS:
        row = "  ".join(f"{computed[name][m]:.4f}" for m in METRICS)
        click.echo(f"{name}       {row}")
    if worst > 1e-9:
        for name in TOY_SYSTEMS:
            for m in METRICS:
                got, want = computed[name][m], expected[name][m]
                if abs(got - want) > 1e-9:
                    click.echo(f"MISMATCH {name} {m}-F: got {got!r}, want {want!r}")
        sys.exit(EXIT_MISMATCH)
    click.echo(f"all {len(TOY_SYSTEMS) * len(METRICS)} values match (max err {worst:.1e})")


def _study_options(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="JSON config file mirroring the flags."),
        click.option("--dataset", default=None, help="Dataset directory."),
        click.option("--variant", type=click.Choice(["ml100k", "ml1m"]), default=None),
        click.option("--run", "runs", multiple=True, type=click.Path(),
                     help="Run file (repeatable)."),
        click.option("--checkpoint", "checkpoints", multiple=True, type=click.Path(),
                     help="Trained model checkpoint (repeatable)."),
        click.option("--beta", "betas", multiple=True, type=float),
        click.option("--gamma", type=float, default=None),
        click.option("--samples", type=int, default=None),
        click.option("--topk", type=int, default=None),
        click.option("--groups-item", default=None),
        click.option("--min-rating", type=int, default=None),
        click.option("--seed", type=int, default=None),
        click.option("--out", default=None),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _build_study(config_path, groups_user, **flags) -> StudyConfig:
    defaults = StudyConfig().to_dict()
    merged = _merge(_load_config_file(config_path), defaults, **flags)
    if groups_user is not None:
        merged["groups_user"] = groups_user
    cfg = StudyConfig(**merged)
    if not cfg.runs and not cfg.checkpoints:
        raise ConfigError("no systems to evaluate: give --run or --checkpoint")
    if not cfg.betas:
        raise ConfigError("empty beta grid")
    for path in list(cfg.runs) + list(cfg.checkpoints):
        if not Path(path).exists():
            raise ConfigError(f"referenced path does not exist: {path}")
    return cfg


def _load_study_inputs(cfg: StudyConfig):
    bundle = split(load_movielens(cfg.dataset, cfg.variant), cfg.seed)
    scores = {}
    for path in cfg.runs:
        scores[Path(path).stem] = load_run_file(path, bundle.catalog)
    for path in cfg.checkpoints:
        model, _ = load_checkpoint(path)
        if model.user_vecs.shape[0] != bundle.catalog.n_users:
            raise DataError(f"{path}: checkpoint does not match dataset dimensions")
        scores[Path(path).stem] = model.scores()
    return bundle, scores


@main.command()
@_study_options
@click.option("--groups-user", default=None)
@_guarded
def evaluate(config_path, groups_user, **flags):
    """Metric reports for each (system, beta) over the study grid."""
    cfg = _build_study(config_path, groups_user, **flags)
    chash = config_hash(cfg.to_dict())
    bundle, scores = _load_study_inputs(cfg)
    instances = study_mod.evaluate_study(bundle, scores, cfg)
    path = study_mod.write_metrics_csv(instances, cfg.out, chash)
    click.echo(f"wrote {path} ({len(instances)} instances, config {chash})")


@main.command()
@_study_options
@click.option("--groups-user", default=None)
@click.option("--svg", is_flag=True, help="Also render SVG trade-off curves.")
@_guarded
def sweep(config_path, groups_user, svg, **flags):
    """Disparity-relevance trade-off curves and their AUC per system."""
    cfg = _build_study(config_path, groups_user, **flags)
    chash = config_hash(cfg.to_dict())
    bundle, scores = _load_study_inputs(cfg)
    instances = study_mod.evaluate_study(bundle, scores, cfg)
    study_mod.write_metrics_csv(instances, cfg.out, chash)
    study_mod.write_tradeoff_csvs(instances, cfg.out, chash)
    path = study_mod.write_auc_csv(instances, cfg.out, chash)
    if svg:
        from .analysis import build_tradeoff_curves
        from .svg import line_chart

        for metric, curves in build_tradeoff_curves(instances).items():
            line_chart(
                Path(cfg.out) / f"tradeoff_{metric}.svg",
                {c.label: c.points for c in curves},
                f"{metric} disparity vs relevance",
                "disparity (normalized)",
                "relevance (normalized)",
            )
    click.echo(f"wrote {path} (config {chash})")


@main.command()
@_study_options
@click.option("--groups-user", "group_attrs", multiple=True,
              help="User attribute (repeatable; default gender and age).")
@click.option("--svg", is_flag=True, help="Also render SVG heatmaps.")
@_guarded
def correlate(config_path, group_attrs, svg, **flags):
    """Kendall correlation between metric orderings, per user attribute."""
    cfg = _build_study(config_path, None, **flags)
    chash = config_hash(cfg.to_dict())
    attrs = list(group_attrs) or ["gender", "age"]
    bundle, scores = _load_study_inputs(cfg)
    for attr in attrs:
        instances = study_mod.evaluate_study(bundle, scores, cfg, user_attr=attr)
        if len(instances) < 2:
            raise ConfigError("correlation needs at least two system instances")
        path = study_mod.write_correlation_csv(instances, cfg.out, attr, chash)
        if svg:
            from .analysis import correlation_matrix
            from .study import correlation_fields
            from .svg import heatmap

            fields = correlation_fields()
            heatmap(
                Path(cfg.out) / f"correlation_{attr}.svg",
                correlation_matrix(instances, fields),
                fields,
                f"Kendall tau ({attr})",
            )
        click.echo(f"wrote {path}")


@main.command(name="train")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--dataset", default=None)
@click.option("--variant", type=click.Choice(["ml100k", "ml1m"]), default=None)
@click.option("--alpha", type=float, default=None, help="Fairness weight in the loss.")
@click.option("--tau", type=float, default=None)
@click.option("--gamma", type=float, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--batch", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--samples", type=int, default=None, help="Rank samples per step.")
@click.option("--dim", type=int, default=None)
@click.option("--l2", type=float, default=None)
@click.option("--groups-user", default=None)
@click.option("--groups-item", default=None)
@click.option("--min-rating", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", default=None)
@click.option("--baseline-trace", type=click.Path(), default=None,
              help="trace.csv of an alpha=0 run for the paired t-test.")
@_guarded
def train_cmd(config_path, baseline_trace, **flags):
    """Train the matrix-factorization recommender against II-F + alpha GG-F."""
    defaults = {
        "dataset": None, "variant": "ml100k", "alpha": 0.0, "tau": 0.1,
        "gamma": 0.8, "lr": 1e-3, "batch": 32, "epochs": 20, "samples": 100,
        "dim": 64, "l2": 1e-4, "groups_user": "gender", "groups_item": "genre",
        "min_rating": 1, "seed": 0, "out": "out",
    }
    cfg = _merge(_load_config_file(config_path), defaults, **flags)
    tcfg = TrainerConfig(
        alpha=cfg["alpha"], tau=cfg["tau"], gamma=cfg["gamma"],
        learning_rate=cfg["lr"], batch_size=cfg["batch"], epochs=cfg["epochs"],
        n_rank_samples=cfg["samples"], l2=cfg["l2"], embedding_dim=cfg["dim"],
        seed=cfg["seed"], min_rating=cfg["min_rating"],
    )
    chash = config_hash({**cfg, "trainer": tcfg.fingerprint()})

    bundle = split(load_movielens(cfg["dataset"], cfg["variant"]), cfg["seed"])
    user_groups = build_group_maps(bundle, cfg["groups_user"])
    item_groups = build_group_maps(bundle, cfg["groups_item"])
    model = MFModel.init(
        bundle.catalog.n_users, bundle.catalog.n_items, tcfg.embedding_dim, tcfg.seed
    )
    result = train(model, bundle, tcfg, user_groups, item_groups)

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "model.ckpt", result.model, tcfg)
    with open(out / "trace.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config_hash={chash}\n")
        fh.write("epoch,loss,II-F,GG-F,NDCG@50\n")
        for row in result.trace:
            fh.write(
                f"{row.epoch},{row.loss:.10g},{row.ii_val:.10g},"
                f"{row.gg_val:.10g},{row.ndcg_val:.10g}\n"
            )

    labels_test = bundle.relevance_matrix("test", tcfg.min_rating)
    final_ndcg = ndcg_at_k(
        result.model.scores(), labels_test, tcfg.ndcg_k,
        exclude=bundle.interaction_mask_matrix("train", "val"),
    )
    last = result.trace[-1]
    summary = {
        "config_hash": chash,
        "best_epoch": result.best_epoch,
        "final": {"II-F": last.ii_val, "GG-F": last.gg_val,
                  "NDCG@50_val": last.ndcg_val, "NDCG@50_test": final_ndcg},
    }
    if baseline_trace:
        base = _read_trace(baseline_trace)
        ours = {"GG-F": [r.gg_val for r in result.trace],
                "NDCG@50": [r.ndcg_val for r in result.trace]}
        tests = {}
        for key, values in ours.items():
            if len(base[key]) != len(values):
                raise ConfigError("baseline trace has a different epoch count")
            t, p = paired_t_test(values, base[key])
            tests[key] = {"t": t, "p": p}
        summary["vs_baseline"] = tests
    (out / "train_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    click.echo(json.dumps(summary["final"], sort_keys=True))
    click.echo(f"wrote {out / 'model.ckpt'} and {out / 'trace.csv'} (config {chash})")


def _read_trace(path) -> dict:
    epochs, loss, ii, gg, ndcg = [], [], [], [], []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read trace {path}: {exc}") from exc
    for line in lines:
        if line.startswith("#") or line.startswith("epoch"):
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise DataError(f"{path}: malformed trace row {line!r}")
        epochs.append(int(parts[0]))
        loss.append(float(parts[1]))
        ii.append(float(parts[2]))
        gg.append(float(parts[3]))
        ndcg.append(float(parts[4]))
    return {"epoch": epochs, "loss": loss, "II-F": ii, "GG-F": gg, "NDCG@50": ndcg}


if __name__ == "__main__":
    main()
