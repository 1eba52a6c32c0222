# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""bitfit-lab: pretrain, fine-tune and analyze bias-only fine-tuning experiments

    bitfit-lab --config experiment.toml --out lab-output pretrain
    bitfit-lab --config experiment.toml finetune --regimes bitfit,full,frozen
    bitfit-lab --config experiment.toml analyze

Exit codes: 0 success, 2 configuration error, 3 training or runtime error, 4 missing artifact.
"""
import functools
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, TypeVar

import click

from bitfit_lab import __version__
from bitfit_lab.analysis.bias_change import bias_change, mean_bias_change
from bitfit_lab.analysis.fractions import param_fraction_report, reference_configs, write_fraction_csv
from bitfit_lab.analysis.generalization import generalization_gap
from bitfit_lab.analysis.heatmap import heatmap_export
from bitfit_lab.analysis.sweep import SweepResult, render_sweep_svg, size_sweep, write_sweep_csv
from bitfit_lab.encoder.model import build_layout
from bitfit_lab.exceptions import BitFitLabError
from bitfit_lab.params.checkpoint import (
    apply_task_delta,
    export_task_delta,
    load_checkpoint,
    load_task_delta,
    save_checkpoint,
    save_task_delta,
)
from bitfit_lab.params.exceptions import CheckpointMismatchError, CorruptCheckpointError, SelectorParseError
from bitfit_lab.params.selectors import Selector, resolve
from bitfit_lab.params.store import ParameterStore, ParamSnapshot, check_compatible
from bitfit_lab.tasks.datasets import TaskDataset, gen_task
from bitfit_lab.tasks.grammar import gen_corpus
from bitfit_lab.training.pretrain import pretrain_mlm
from bitfit_lab.training.results import RunResult
from bitfit_lab.training.trainer import random_base, train_task

from .artifacts import (
    RANDOM_BASE_CHECKPOINT,
    OutputLayout,
    read_json,
    record_invocation,
    require,
    write_json,
    write_table,
)
from .config import (
    EXAMPLE_CONFIG,
    EXIT_CONFIG_ERROR,
    ExperimentConfig,
    TaskSpec,
    default_settings_path,
    get_configuration_or_quit,
)
from .exceptions import ConfigurationError, MissingArtifactError

logger = logging.getLogger("bitfit_lab")

EXIT_RUNTIME_ERROR = 3
EXIT_MISSING_ARTIFACT = 4
HELDOUT_SEED_OFFSET = 10_000
DEFAULT_OUTPUT_DIR = "lab-output"

T = TypeVar("T")


def setup_logging(level: str):
    """Attach one console handler to the package logger"""
    if not any(getattr(h, "_bitfit_lab", False) for h in logger.handlers):
        hdr = logging.StreamHandler()
        hdr.setFormatter(logging.Formatter("[%(asctime)s] %(levelname)s: %(message)s"))
        hdr._bitfit_lab = True  # type: ignore[attr-defined]
        logger.addHandler(hdr)
    logger.setLevel(getattr(logging, level))


def handle_errors(func):
    """Turn domain errors into exit codes"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except MissingArtifactError as e:
            logger.critical("%s", e)
            sys.exit(EXIT_MISSING_ARTIFACT)
        except (ConfigurationError, SelectorParseError, CheckpointMismatchError) as e:
            logger.critical("Configuration error: %s", e)
            sys.exit(EXIT_CONFIG_ERROR)
        except (BitFitLabError, FloatingPointError, OSError) as e:
            logger.critical("%s failed: %s", func.__name__, e)
            sys.exit(EXIT_RUNTIME_ERROR)

    return wrapper


@click.group()
@click.version_option(__version__, prog_name="bitfit-lab")
@click.option("--log-level", default="INFO", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]))
@click.option(
    "--config",
    "settings_path",
    required=False,
    type=click.Path(dir_okay=False),
    help='Path of the experiment file, by default "bitfit-lab.toml" in current directory',
)
@click.option(
    "--out",
    "output_dir",
    required=False,
    envvar="BITFIT_LAB_OUTPUT_DIR",
    type=click.Path(file_okay=False),
    help="Output directory, overrides the config's output_dir",
)
@click.pass_context
def main(ctx, log_level, settings_path, output_dir):
    setup_logging(log_level)
    ctx.ensure_object(dict)
    ctx.obj["settings_path"] = settings_path or default_settings_path()
    ctx.obj["output_dir"] = output_dir


def _load(ctx) -> ExperimentConfig:
    return get_configuration_or_quit(ctx.obj["settings_path"])


def _layout(ctx, config: ExperimentConfig) -> OutputLayout:
    root = ctx.obj["output_dir"] or config.output_dir or DEFAULT_OUTPUT_DIR
    return OutputLayout.create(root)


@main.command()
@click.pass_context
@handle_errors
def pretrain(ctx):
    """Pretrain the encoder with masked-token prediction and save the checkpoint"""
    config = _load(ctx)
    layout = _layout(ctx, config)
    cfg = config.pretrain
    corpus = gen_corpus(config.grammar, cfg.corpus_size, cfg.seed)
    heldout = gen_corpus(config.grammar, cfg.heldout_size, cfg.seed + HELDOUT_SEED_OFFSET)

    result = pretrain_mlm(config.model, corpus, cfg, heldout=heldout)
    metadata = {"kind": "pretrained", "steps": str(cfg.steps)}
    path = save_checkpoint(result.snapshot, layout.pretrained, metadata=metadata)
    write_json(result.to_json(), layout.runs / "pretrain_log.json")
    record_invocation(layout, "pretrain", config=ctx.obj["settings_path"])
    logger.info("pretrained checkpoint written to %s", path)


def _base_snapshot(config: ExperimentConfig, layout: OutputLayout, checkpoint: Optional[str], scratch: bool):
    """Encoder parameters fine-tuning starts from, and the checkpoint path they live at"""
    if scratch:
        snap = random_base(config.model, seed=config.pretrain.seed)
        path = save_checkpoint(snap, layout.checkpoints / RANDOM_BASE_CHECKPOINT, metadata={"kind": "random_base"})
        return snap, path
    path = Path(checkpoint) if checkpoint else layout.pretrained
    require(path, "pretrained checkpoint, run the pretrain command first")
    snap = _read_checkpoint(path)
    check_compatible(build_layout(config.model, mlm=True), snap.layout)
    return snap, path


def _build_task(config: ExperimentConfig, spec: TaskSpec) -> TaskDataset:
    return gen_task(config.grammar, spec.kind, spec.n_train, spec.n_dev, spec.seed)


def _parse_regimes(regimes: Optional[str]) -> Optional[List[str]]:
    if not regimes:
        return None
    return [r.strip() for r in regimes.split(",") if r.strip()]


def _save_deltas(layout: OutputLayout, run: RunResult, selector: Selector, base: ParamSnapshot):
    for seed, state in run.final_states.items():
        store = ParameterStore.from_snapshot(state)
        delta = export_task_delta(store, resolve(selector, store), base_digest=base.digest())
        save_task_delta(delta, layout.delta_path(run.task, run.selector, seed))


@main.command()
@click.option("--checkpoint", required=False, type=click.Path(dir_okay=False), help="Base checkpoint manifest")
@click.option("--from-scratch", is_flag=True, help="Start from random initialisation instead of a checkpoint")
@click.option("--regimes", required=False, help="Comma separated regimes, overrides the config")
@click.option("--seed-offset", default=0, type=click.IntRange(min=0), help="Shift every training seed")
@click.pass_context
@handle_errors
def finetune(ctx, checkpoint, from_scratch, regimes, seed_offset):
    """Fine-tune every task under every regime and write the regime table"""
    config = _load(ctx)
    layout = _layout(ctx, config)
    base, base_path = _base_snapshot(config, layout, checkpoint, from_scratch)
    selectors = config.selectors(_parse_regimes(regimes))

    runs: Dict[str, Dict[str, RunResult]] = {}
    for spec in config.tasks:
        dataset = _build_task(config, spec)
        for selector in selectors:
            cfg = config.train.model_copy(update={"selector": selector, "metric": spec.metric})
            run = train_task(config.model, base, dataset, cfg.with_seed_offset(seed_offset), task_name=spec.name)
            data = run.to_json()
            data["base_checkpoint"] = _relative(base_path, layout)
            write_json(data, layout.run_path(spec.name, run.selector))
            _save_deltas(layout, run, selector, base)
            runs.setdefault(selector.to_text(), {})[spec.name] = run

    path = _write_regime_table(layout, config, selectors, runs)
    record_invocation(layout, "finetune", config=ctx.obj["settings_path"], seed_offset=seed_offset)
    logger.info("regime table written to %s", path)


def _relative(path: Path, layout: OutputLayout) -> str:
    try:
        return str(path.relative_to(layout.root))
    except ValueError:
        return str(path)


def _write_regime_table(
    layout: OutputLayout, config: ExperimentConfig, selectors: List[Selector], runs: Dict[str, Dict[str, RunResult]]
) -> Path:
    """One row per regime: %Param then mean ± std per task, in config order"""
    task_names = [t.name for t in config.tasks]
    header = ["regime", "selector", "param_percent"]
    for name in task_names:
        header += [f"{name}_mean", f"{name}_std", f"{name}_n"]
    rows = []
    for selector in selectors:
        by_task = runs[selector.to_text()]
        first = by_task[task_names[0]]
        row = [selector.display_name, selector.to_text(), first.param_count.format_percent(2)]
        for name in task_names:
            summary = by_task[name].aggregate()
            row += [repr(summary.mean), repr(summary.std), summary.n]
        rows.append(row)
    return write_table(layout.tables / "regimes.csv", "regimes/v1", header, rows)


def _run_base(layout: OutputLayout, data: dict, cache: Dict[str, ParamSnapshot]) -> ParamSnapshot:
    path = Path(data.get("base_checkpoint") or layout.pretrained)
    if not path.is_absolute():
        path = layout.root / path
    key = str(path)
    if key not in cache:
        require(path, "base checkpoint of a fine-tuning run")
        cache[key] = _read_checkpoint(path)
    return cache[key]


def _read_checkpoint(path: Path) -> ParamSnapshot:
    try:
        return load_checkpoint(path)
    except CorruptCheckpointError as e:
        raise MissingArtifactError(f"unreadable checkpoint {path}: {e}")


def _read_artifact(path: Path, what: str, parse: Callable[[dict], T]) -> Tuple[dict, T]:
    """Raw JSON of an artifact written by an earlier command, and its parsed form"""
    try:
        data = read_json(path, what)
        return data, parse(data)
    except (AttributeError, KeyError, TypeError, ValueError) as e:
        raise MissingArtifactError(f"unreadable {what} {path}: {e!r}")


@main.command()
@click.pass_context
@handle_errors
def analyze(ctx):
    """Bias-change heatmaps, generalization gaps and the size-sweep curve of finished runs"""
    config = _load(ctx)
    layout = _layout(ctx, config)
    bases: Dict[str, ParamSnapshot] = {}
    gap_rows = []
    run_files = layout.run_files()
    if not run_files:
        raise MissingArtifactError(f"no fine-tuning run in {layout.runs}, run the finetune command first")

    for run_path in run_files:
        data, run = _read_artifact(run_path, "run file", RunResult.from_json)
        base = _run_base(layout, data, bases)
        reports = []
        for record in run.best_records:
            delta_path = require(layout.delta_path(run.task, run.selector, record.seed), "task delta")
            try:
                delta = load_task_delta(delta_path)
            except CorruptCheckpointError as e:
                raise MissingArtifactError(f"unreadable task delta {delta_path}: {e}")
            final = apply_task_delta(base, delta)
            reports.append(bias_change(base, final))
        report = mean_bias_change(reports)
        stem = run_path.stem
        heatmap_export(
            report,
            layout.tables / f"bias_change__{stem}.csv",
            layout.figures / f"bias_change__{stem}.svg",
            title=f"{run.task}: {run.selector_name}",
        )

        gap = generalization_gap(run)
        gap_rows.append([run.task, run.selector_name, repr(gap.summary.mean), repr(gap.summary.std), gap.summary.n])

    write_table(
        layout.tables / "generalization_gap.csv",
        "generalization_gap/v1",
        ["task", "regime", "gap_mean", "gap_std", "n"],
        gap_rows,
    )

    sweep_path = layout.runs / "sweep.json"
    if sweep_path.exists():
        _, sweep = _read_artifact(sweep_path, "size sweep", SweepResult.from_json)
        write_sweep_csv(sweep, layout.tables / "size_sweep.csv")
        render_sweep_svg(sweep, layout.figures / "size_sweep.svg")
    else:
        logger.info("no size sweep found at %s, run the sweep command to add the curve", sweep_path)
    record_invocation(layout, "analyze", config=ctx.obj["settings_path"])


@main.command()
@click.option("--checkpoint", required=False, type=click.Path(dir_okay=False), help="Base checkpoint manifest")
@click.option("--from-scratch", is_flag=True, help="Start from random initialisation instead of a checkpoint")
@click.option("--seed-offset", default=0, type=click.IntRange(min=0), help="Shift every training seed")
@click.pass_context
@handle_errors
def sweep(ctx, checkpoint, from_scratch, seed_offset):
    """Fine-tune BitFit and full fine-tuning on growing nested train subsets"""
    config = _load(ctx)
    layout = _layout(ctx, config)
    base, _ = _base_snapshot(config, layout, checkpoint, from_scratch)
    spec = config.get_task(config.sweep.task)
    cfg = config.train.model_copy(update={"metric": spec.metric}).with_seed_offset(seed_offset)
    result = size_sweep(
        config.model,
        base,
        _build_task(config, spec),
        config.sweep_sizes(),
        cfg,
        methods=config.sweep.methods,
        subset_seed=config.sweep.subset_seed,
        task_name=spec.name,
    )
    write_json(result.to_json(), layout.runs / "sweep.json")
    record_invocation(layout, "sweep", config=ctx.obj["settings_path"], seed_offset=seed_offset)


@main.command()
@click.option("--include-config", is_flag=True, help="Also count the experiment's own model")
@click.option("--regimes", required=False, help="Comma separated regimes, overrides the default table rows")
@click.pass_context
@handle_errors
def fractions(ctx, include_config, regimes):
    """Trainable-parameter percentages of BERT-base/large shaped encoders per regime"""
    configs = reference_configs()
    output_dir = ctx.obj["output_dir"]
    if include_config:
        config = _load(ctx)
        configs["experiment"] = config.model
        output_dir = output_dir or config.output_dir
    kwargs = {"selectors": _parse_regimes(regimes)} if regimes else {}
    rows = param_fraction_report(configs, **kwargs)
    for row in rows:
        click.echo(f"{row.config:<12} {row.selector:<14} {row.percent:>8}  ({row.count.trainable}/{row.count.total})")

    layout = OutputLayout.create(output_dir or DEFAULT_OUTPUT_DIR)
    write_fraction_csv(rows, layout.tables / "param_fractions.csv")


@main.command("example-config")
def example_config():
    """Print an annotated example experiment file"""
    logger.info(f"current version: {__version__}")
    logger.info("Example config file:")
    click.echo(EXAMPLE_CONFIG)


if __name__ == "__main__":
    main()
