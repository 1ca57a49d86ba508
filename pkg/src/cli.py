"""Command-line entry point wiring every pipeline stage."""
import logging
import sys
from collections.abc import Sequence
from dataclasses import replace
from pathlib import Path
from typing import Annotated, Any

import click
import numpy as np
import torch
import typer

from evaluation import ResidualThresholdBaseline, StatisticsError, evaluate_scores, score_series
from evaluation.benchmark import BenchmarkSplit, build_split
from evaluation.explain import attention_path_spearman, explain_attack
from evaluation.sweeps import (
    SweepResult,
    ablation_run,
    demand_sweep,
    disable_features,
    f1_interval,
    outage_sweep,
    roughness_sweep,
)
from gat_core import Checkpoint, load_checkpoint, save_checkpoint
from hydrosim import ScadaSeries, generate_series, inject_attack, load_attack_scenario, load_series, save_series
from multiscale import louvain
from network import NetworkGraph, build_benchmark_network, load_network, network_to_dict, save_network
from network.io import validate_network_file
from physics_features import FeatureSettings, FeatureTensor, load_features, save_features
from training import train as train_model
from utils.config import RunConfig, load_run_config
from utils.dtos import Report
from utils.io import write_csv, write_json, write_metadata
from utils.log import configure_logging

logger = logging.getLogger(__name__)

app = typer.Typer(
    name="physics-gat",
    help="Physics-informed graph attention detection of cyber-physical attacks on water networks.",
    no_args_is_help=True,
    add_completion=False,
    pretty_exceptions_enable=False,
)
net_app = typer.Typer(help="Validate and generate network files.", no_args_is_help=True)
app.add_typer(net_app, name="net")

SWEEP_AXES = ("roughness", "outage", "demand", "ablation")
SERIES_NET_HELP = "Network JSON file (network.json of --in by default)"


def _config(ctx: typer.Context) -> RunConfig:
    config = ctx.find_root().obj
    return config if isinstance(config, RunConfig) else RunConfig()


@app.callback()
def configure(
    ctx: typer.Context,
    config: Annotated[Path | None, typer.Option("--config", help="YAML or JSON run configuration")] = None,
    seed: Annotated[int | None, typer.Option("--seed", min=0, help="Master seed")] = None,
    threads: Annotated[int | None, typer.Option("--threads", min=1, help="Torch thread cap")] = None,
    log_level: Annotated[str | None, typer.Option("--log-level", help="DEBUG, INFO, WARNING or ERROR")] = None,
) -> None:
    """Global flags override the config file, which overrides the defaults."""
    run_config = load_run_config(
        config, {"seed": seed, "threads": threads, "log_level": log_level.upper() if log_level else None}
    )
    configure_logging(run_config.log_level)
    if run_config.threads:
        torch.set_num_threads(run_config.threads)
    ctx.obj = run_config


def _required(value: Path | None, default: str | None, flag: str) -> Path:
    if value is not None:
        return value
    if default is not None:
        return Path(default)
    raise click.UsageError(f"Missing option '{flag}' (no default set in the run configuration)")


def _series_network(directory: Path, net: Path | None) -> NetworkGraph:
    """The --net file, or the network.json stored next to a simulated series."""
    if net is not None:
        return load_network(net)
    return load_network(directory / "network.json")


def _report_path(report: Path | None, config: RunConfig) -> Path:
    return _required(report, config.paths.report, "--report")


def _write_report(path: Path, report: Report) -> None:
    write_json(path, report.to_dict())
    write_metadata(path, report.provenance)
    logger.info("Wrote report to %s", path)


def _checkpoint_settings(checkpoint: Checkpoint, config: RunConfig) -> tuple[FeatureSettings, float, int]:
    """Feature settings, alarm threshold and sustain length the checkpoint was trained with."""
    settings = checkpoint.settings
    features = FeatureSettings.from_dict(settings["features"]) if "features" in settings else config.features
    train_settings = settings.get("train", {})
    tau = train_settings.get("tau", config.train.tau)
    return features, tau, train_settings.get("sustain_k", config.train.sustain_k)


def _feature_settings_of(tensor: FeatureTensor) -> FeatureSettings:
    return FeatureSettings(window=tensor.window, eps=tensor.eps, sigma=tensor.sigma, toggles=tensor.toggles)


def _load_all(directories: Sequence[Path]) -> list[ScadaSeries]:
    if not directories:
        raise click.UsageError("At least one '--data' series directory is required")
    return [load_series(d) for d in directories]


@net_app.command("validate")
def net_validate(file: Annotated[Path, typer.Argument(help="Network JSON file")]) -> None:
    """Print the invariant report of a network file; exit 1 when it is invalid."""
    result = validate_network_file(file)
    typer.echo(result.message)
    for error in result.errors or []:
        typer.echo(f"  - {error}")
    if not result.success:
        raise typer.Exit(code=1)


@net_app.command("synth")
def net_synth(
    out: Annotated[Path, typer.Option("--out", help="Network JSON file to write")],
    network_seed: Annotated[int, typer.Option("--network-seed", help="Seed of pipe sizes and demands")] = 7,
) -> None:
    """Write the 30-node benchmark network."""
    g = build_benchmark_network(network_seed)
    save_network(g, out)
    typer.echo(f"Wrote {len(g.nodes)}-node network to {out}")


@app.command()
def simulate(
    ctx: typer.Context,
    out: Annotated[Path, typer.Option("--out", help="Series directory to write")],
    net: Annotated[Path | None, typer.Option("--net", help="Network JSON file")] = None,
    days: Annotated[int, typer.Option("--days", min=1)] = 7,
    noise: Annotated[float, typer.Option("--noise", min=0.0, help="Relative sensor noise σ")] = 0.0,
    seed: Annotated[int | None, typer.Option("--seed", min=0, help="Noise seed (the master seed by default)")] = None,
) -> None:
    """Simulate an attack-free SCADA series."""
    config = _config(ctx)
    g = load_network(_required(net, config.paths.network, "--net"))
    s = generate_series(g, days=days, noise_std=noise, seed=config.seed if seed is None else seed)
    save_series(s, out, network_to_dict(g), config.provenance())
    typer.echo(f"Simulated {s.n_steps} steps on {len(g.nodes)} nodes into {out}")


@app.command()
def attack(
    ctx: typer.Context,
    scenario: Annotated[Path, typer.Option("--scenario", help="YAML or JSON attack scenario")],
    data_in: Annotated[Path, typer.Option("--in", help="Series directory to attack")],
    out: Annotated[Path, typer.Option("--out", help="Series directory to write")],
    net: Annotated[Path | None, typer.Option("--net", help=SERIES_NET_HELP)] = None,
) -> None:
    """Inject every attack of a scenario into a recorded series."""
    config = _config(ctx)
    g = _series_network(data_in, net)
    s = load_series(data_in)
    for spec in load_attack_scenario(scenario):
        s = inject_attack(s, g, spec)
    save_series(s, out, network_to_dict(g), config.provenance())
    typer.echo(f"Injected {len(s.attack_log)} attack(s); {int(s.labels.to_numpy().max(axis=1).sum())} attacked steps")


@app.command()
def featurize(
    ctx: typer.Context,
    data_in: Annotated[Path, typer.Option("--in", help="Series directory")],
    out: Annotated[Path, typer.Option("--out", help="Feature CSV to write")],
    net: Annotated[Path | None, typer.Option("--net", help=SERIES_NET_HELP)] = None,
    window: Annotated[int | None, typer.Option("--window", min=1, help="Temporal window w")] = None,
    ablate: Annotated[str, typer.Option("--ablate", help="Comma-separated: phi_mass, phi_energy, phi, "
                                                         "normalization, interpolation")] = "",
    delta_roughness: Annotated[float, typer.Option("--delta-roughness", help="Relative roughness error δ")] = 0.0,
    demand_error: Annotated[float, typer.Option("--demand-error", help="Relative demand-estimate error")] = 0.0,
) -> None:
    """Assemble the physics-informed feature tensor of a series."""
    config = _config(ctx)
    settings = config.features
    flags = [f for f in ablate.split(",") if f.strip()]
    settings = replace(
        settings,
        window=window or settings.window,
        toggles=disable_features(settings.toggles, flags),
    )
    tensor = settings.assemble(load_series(data_in), _series_network(data_in, net), delta_roughness, demand_error)
    save_features(tensor, out, config.provenance())
    typer.echo(f"Wrote features of {tensor.n_steps} steps x {len(tensor.node_ids)} nodes to {out}")


@app.command()
def train(
    ctx: typer.Context,
    features: Annotated[list[Path], typer.Option("--features", help="Training feature CSV (repeatable)")],
    out: Annotated[Path | None, typer.Option("--out", help="Checkpoint to write")] = None,
    val: Annotated[list[Path] | None, typer.Option("--val", help="Validation feature CSV (repeatable)")] = None,
    net: Annotated[Path | None, typer.Option("--net", help="Network JSON file")] = None,
    history: Annotated[Path | None, typer.Option("--history", help="Training history CSV")] = None,
    clustering_out: Annotated[Path | None, typer.Option("--clustering", help="Clustering JSON to write")] = None,
) -> None:
    """Train the detector and write the best-validation checkpoint."""
    config = _config(ctx)
    out = _required(out, config.paths.checkpoint, "--out")
    train_sets = [load_features(f) for f in features]
    val_sets = [load_features(f) for f in val or []]
    g = load_network(_required(net, config.paths.network, "--net"))
    clustering = louvain(g, seed=config.seed)
    result = train_model(train_sets, val_sets, g, config.model, config.train, clustering, history)
    settings: dict[str, Any] = {
        "features": _feature_settings_of(train_sets[0]).to_dict(),
        "train": config.train.to_dict(),
        "best_epoch": result.best_epoch,
        "best_f1": result.best_f1,
    }
    save_checkpoint(result.model, out, settings, config.provenance())
    if clustering_out is not None:
        write_json(clustering_out, clustering.to_dict())
    typer.echo(f"Best validation F1 {result.best_f1:.3f} at epoch {result.best_epoch}; checkpoint {out}")


@app.command()
def detect(
    ctx: typer.Context,
    data: Annotated[Path, typer.Option("--data", help="Series directory")],
    out: Annotated[Path, typer.Option("--out", help="Score CSV to write")],
    checkpoint: Annotated[Path | None, typer.Option("--checkpoint", help="Model checkpoint")] = None,
    tau: Annotated[float | None, typer.Option("--tau", help="Alarm threshold (the trained one by default)")] = None,
) -> None:
    """Score every step of a series and write the plot-ready score CSV."""
    config = _config(ctx)
    ckpt = load_checkpoint(_required(checkpoint, config.paths.checkpoint, "--checkpoint"))
    settings, trained_tau, _ = _checkpoint_settings(ckpt, config)
    scores = score_series(ckpt.model, settings.assemble(load_series(data), ckpt.model.graph))
    frame = scores.to_frame()
    threshold = trained_tau if tau is None else tau
    frame["alarm"] = np.repeat(np.nan_to_num(scores.final, nan=0.0).max(axis=1) > threshold, len(scores.node_ids))
    write_csv(out, frame, index=False)
    write_metadata(out, config.provenance(), tau=threshold)
    typer.echo(f"Scored {scores.n_steps - scores.first_scored} steps; alarms at {int(frame['alarm'].sum())} rows")


@app.command()
def evaluate(
    ctx: typer.Context,
    data: Annotated[list[Path], typer.Option("--data", help="Attacked series directory (repeatable)")],
    checkpoint: Annotated[Path | None, typer.Option("--checkpoint", help="Model checkpoint")] = None,
    report: Annotated[Path | None, typer.Option("--report", help="Report JSON to write")] = None,
    tau: Annotated[float | None, typer.Option("--tau")] = None,
    sustain: Annotated[int | None, typer.Option("--sustain", min=1)] = None,
) -> None:
    """Network-level F1, time-to-detection, bootstrap interval and attention/path agreement."""
    config = _config(ctx)
    ckpt = load_checkpoint(_required(checkpoint, config.paths.checkpoint, "--checkpoint"))
    settings, trained_tau, trained_sustain = _checkpoint_settings(ckpt, config)
    tau = trained_tau if tau is None else tau
    sustain = trained_sustain if sustain is None else sustain
    model = ckpt.model
    tensors = [settings.assemble(s, model.graph) for s in _load_all(data)]
    scored = [score_series(model, t) for t in tensors]
    metrics = evaluate_scores(scored, tau, sustain)
    try:
        ci = f1_interval(scored, tau, config.sweep.n_resamples, config.seed).to_dict()
    except StatisticsError as e:
        logger.warning("No F1 confidence interval: %s", e)
        ci = None
    rhos = []
    for scores, tensor in zip(scored, tensors):
        try:
            rhos.append(attention_path_spearman(scores, model.graph, tensor.attack_log))
        except StatisticsError as e:
            logger.debug("No attention/path correlation: %s", e)
    _write_report(_report_path(report, config), Report(
        metrics=metrics.to_dict(),
        ci=ci,
        spearman_rho=float(np.mean(rhos)) if rhos else None,
        provenance=config.provenance(),
    ))
    ttd = "n/a" if metrics.ttd_hours is None else f"{metrics.ttd_hours:.2f} h"
    typer.echo(f"F1 {metrics.f1:.3f} (precision {metrics.precision:.3f}, recall {metrics.recall:.3f}); TTD {ttd}")


def _sweep_report(result: SweepResult, config: RunConfig) -> Report:
    reference = result.point(result.reference)
    return Report(
        metrics=reference.metrics.to_dict(),
        ci=reference.ci.to_dict() if reference.ci else None,
        sweep_points=[p.to_dict() for p in result.points],
        cohens_d=result.cohens_d,
        spearman_rho=result.spearman_rho,
        provenance=config.provenance(),
    )


def _ablation_split(
    config: RunConfig, net: Path | None, train_dirs: list[Path], val_dirs: list[Path], data: list[Path]
) -> BenchmarkSplit:
    """The given train/val/test series, or the benchmark split when no training series are given."""
    g = load_network(net) if net else None
    if not train_dirs:
        return build_split(g, seed=config.seed)
    if g is None:
        g = _series_network(train_dirs[0], None)
    return BenchmarkSplit(
        g=g, train=_load_all(train_dirs), val=[load_series(d) for d in val_dirs], test=_load_all(data), seed=config.seed
    )


@app.command()
def sweep(
    ctx: typer.Context,
    axis: Annotated[str, typer.Option("--axis", help="roughness, outage, demand or ablation")],
    data: Annotated[list[Path] | None, typer.Option("--data", help="Test series directory (repeatable)")] = None,
    checkpoint: Annotated[Path | None, typer.Option("--checkpoint", help="Model checkpoint")] = None,
    report: Annotated[Path | None, typer.Option("--report", help="Report JSON to write")] = None,
    calibrate: Annotated[list[Path] | None, typer.Option(
        "--calibrate", help="Series calibrating the residual-threshold baseline (the test series by default)"
    )] = None,
    train_dirs: Annotated[list[Path] | None, typer.Option("--train", help="Ablation training series")] = None,
    val_dirs: Annotated[list[Path] | None, typer.Option("--val", help="Ablation validation series")] = None,
    net: Annotated[Path | None, typer.Option("--net", help="Network JSON file for ablations")] = None,
) -> None:
    """Robustness sweep over one axis, or retrain every ablation variant."""
    if axis not in SWEEP_AXES:
        raise click.BadParameter(f"Unknown sweep axis '{axis}'. Use {', '.join(SWEEP_AXES)}.", param_hint="--axis")
    config = _config(ctx)
    sweep_cfg = config.sweep
    if axis == "ablation":
        split = _ablation_split(config, net, train_dirs or [], val_dirs or [], data or [])
        result = ablation_run(
            split, config.features, config.model, config.train,
            list(sweep_cfg.ablation_variants) or None, sweep_cfg.n_resamples, config.seed,
        )
    else:
        ckpt = load_checkpoint(_required(checkpoint, config.paths.checkpoint, "--checkpoint"))
        settings, tau, sustain = _checkpoint_settings(ckpt, config)
        model, g = ckpt.model, ckpt.model.graph
        series = _load_all(data or [])
        if axis == "outage":
            result = outage_sweep(
                model, series, g, settings, sweep_cfg.outage_fractions, sweep_cfg.outage_seeds,
                tau, sustain, sweep_cfg.n_resamples, config.seed,
            )
        else:
            reference = [settings.assemble(s, g) for s in (_load_all(calibrate) if calibrate else series)]
            baseline = ResidualThresholdBaseline.calibrate(reference, sweep_cfg.false_alarm_rate)
            run_sweep = roughness_sweep if axis == "roughness" else demand_sweep
            levels = sweep_cfg.roughness_deltas if axis == "roughness" else sweep_cfg.demand_errors
            result = run_sweep(model, series, g, settings, levels, baseline, tau, sustain,
                               sweep_cfg.n_resamples, config.seed)
    _write_report(_report_path(report, config), _sweep_report(result, config))
    for point in result.points:
        typer.echo(f"{result.axis}={point.setting}: F1 {point.metrics.f1:.3f}")


@app.command()
def explain(
    ctx: typer.Context,
    data: Annotated[Path, typer.Option("--data", help="Attacked series directory")],
    attack_id: Annotated[str, typer.Option("--attack", help="Attack id from the series' attack log")],
    out: Annotated[Path, typer.Option("--out", help="Directory for the explanation CSVs")],
    checkpoint: Annotated[Path | None, typer.Option("--checkpoint", help="Model checkpoint")] = None,
    steps: Annotated[int, typer.Option("--steps", min=1, help="Integrated-gradient path steps")] = 50,
    samples: Annotated[int, typer.Option("--samples", min=1, help="Attacked steps attributed")] = 24,
) -> None:
    """Attention-edge, attribution, dominant-violation and score CSVs for one attack."""
    config = _config(ctx)
    ckpt = load_checkpoint(_required(checkpoint, config.paths.checkpoint, "--checkpoint"))
    settings, tau, sustain = _checkpoint_settings(ckpt, config)
    tensor = settings.assemble(load_series(data), ckpt.model.graph)
    explanation = explain_attack(ckpt.model, tensor, attack_id, out, steps=steps, max_samples=samples)
    metrics = evaluate_scores([score_series(ckpt.model, tensor)], tau, sustain)
    _write_report(out / "report.json", Report(
        metrics=metrics.to_dict(),
        spearman_rho=explanation.spearman_rho,
        ig_shares=explanation.shares,
        provenance=config.provenance(),
    ))
    shares = ", ".join(f"{group} {share:.1f}%" for group, share in explanation.shares.items())
    typer.echo(f"Explained {attack_id}: {shares}")


USER_ERRORS = (ValueError, KeyError, FileNotFoundError)


def run(argv: Sequence[str] | None = None) -> int:
    """Run one command; 0 on success, 1 on a usage or validation error, 2 on an internal error."""
    try:
        result = app(args=list(argv) if argv is not None else None, standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except USER_ERRORS as e:
        logger.error("%s", e.args[0] if isinstance(e, KeyError) and e.args else e)
        return 1
    except Exception:
        logger.exception("Internal error")
        return 2
    return result if isinstance(result, int) else 0


def main() -> None:
    """Entry point for the physics-gat CLI."""
    sys.exit(run())


if __name__ == "__main__":
    main()
