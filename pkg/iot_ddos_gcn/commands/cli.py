from typing import List, Optional, Tuple
import dataclasses
import functools
import logging
import time
from multiprocessing import Pool
from pathlib import Path

import click
import pandas as pd
from tqdm import tqdm

import iot_ddos_gcn
from iot_ddos_gcn.aggregation import aggregate_groups, write_report
from iot_ddos_gcn.experiment import (
    METRICS_FILE, SCENARIO_INDEX, Cell, ConfigError, ExperimentConfig, enumerate_cells, group_dir,
    load_config, load_group_data, make_group, make_scenarios, parse_cell_selector, run_cell,
    write_cell_outputs, write_group,
)
from iot_ddos_gcn.manifest import STATUS_OK, RunManifest, config_hash


logger = logging.getLogger(__name__)


DATA_DIR = 'data'
CELLS_DIR = 'cells'
REPORT_FILE = 'metrics.csv'
LOG_FILE = 'run.log'


class ConfigFailure(click.ClickException):
    exit_code = 2


class RunFailure(click.ClickException):
    exit_code = 3


def setup_filelogger(logfile: Path):
    root_logger = logging.getLogger()
    for handler in root_logger.handlers:
        if isinstance(handler, logging.FileHandler) and Path(handler.baseFilename) == logfile.resolve():
            return handler

    fhandler = logging.FileHandler(filename=logfile, mode='a')
    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    fhandler.setFormatter(formatter)
    fhandler.setLevel(logging.DEBUG)
    root_logger.addHandler(fhandler)
    return fhandler


def _prepare(config_path: Path, out_dir: Path, seed: Optional[int]) -> Tuple[ExperimentConfig, RunManifest]:
    out_dir.mkdir(parents=True, exist_ok=True)
    setup_filelogger(out_dir / LOG_FILE)
    config = load_config(config_path, seed=seed)
    manifest = RunManifest.load_or_create(out_dir, config_hash(config), config.seed)
    return config, manifest


def _generate_groups(config: ExperimentConfig, out_dir: Path, manifest: RunManifest,
                     only_missing: bool = False) -> List[Path]:
    data_dir = out_dir / DATA_DIR
    paths = []
    for group_index in tqdm(range(config.groups.count), desc='groups'):
        if only_missing and (group_dir(data_dir, group_index) / SCENARIO_INDEX).exists():
            continue
        group = make_group(config, group_index)
        scenarios = make_scenarios(config, group)
        paths.extend(write_group(group, scenarios, data_dir))
    load_group_data.cache_clear()
    for path in paths:
        manifest.add_artifact(out_dir, path)
    return paths


def generate(config_path: Path, out_dir: Path, seed: Optional[int] = None) -> List[Path]:
    """
    Synthesizes every group's benign and attack datasets under out_dir/data

    Parameters
    ----------
    config_path: YAML experiment config
    out_dir: run directory
    seed: master seed override

    Returns
    -------
    written dataset paths
    """
    config, manifest = _prepare(config_path, out_dir, seed)
    logger.info(f"Generating {config.groups.count} group(s) into {out_dir / DATA_DIR}")
    tic = time.perf_counter()

    paths = _generate_groups(config, out_dir, manifest)

    toc = time.perf_counter()
    manifest.timings['generate'] = toc - tic
    manifest.write(out_dir)
    logger.info(f'Generate Elapsed Time: {toc - tic}')
    return paths


def train_cell(
        config_path: Path,
        out_dir: Path,
        cell_selector: str,
        seed: Optional[int] = None,
        learning_rate: Optional[float] = None,
        epochs: Optional[int] = None,
        dump_snapshots: bool = False) -> List[Path]:
    """
    Trains one cell and writes its checkpoint, history and per-k test metrics

    Parameters
    ----------
    config_path: YAML experiment config
    out_dir: run directory holding the generated data
    cell_selector: `group=G,topology=KIND,edge_mode=MODE,l=L[,n=N]`
    seed: master seed override
    learning_rate: overrides training.learning_rate
    epochs: overrides training.epochs
    dump_snapshots: also write the test snapshots as a plain-text dump

    Returns
    -------
    written paths
    """
    config, manifest = _prepare(config_path, out_dir, seed)
    cell = parse_cell_selector(config, cell_selector)

    overrides = {}
    if learning_rate is not None:
        overrides['learning_rate'] = learning_rate
    if epochs is not None:
        overrides['epochs'] = epochs
    if overrides:
        logger.info(f"Training overrides: {overrides}")
        config = dataclasses.replace(config, training=dataclasses.replace(config.training, **overrides))

    cells_dir = out_dir / CELLS_DIR
    dump_path = None
    if dump_snapshots:
        (cells_dir / cell.cell_id).mkdir(parents=True, exist_ok=True)
        dump_path = cells_dir / cell.cell_id / 'test_snapshots.txt'

    result = run_cell(config, cell, out_dir / DATA_DIR, dump_path=dump_path, progress=True)
    paths = write_cell_outputs(result, cells_dir)
    if dump_path is not None:
        paths.append(dump_path)

    for path in paths:
        manifest.add_artifact(out_dir, path)
    manifest.cells[cell.cell_id] = STATUS_OK
    manifest.timings[cell.cell_id] = result.elapsed
    manifest.write(out_dir)
    return paths


def _run_cell_job(cell: Cell, config: ExperimentConfig, out_dir: Path) -> Tuple[Cell, str, float]:
    """Runs one cell in a worker; failures are reported, not raised"""
    tic = time.perf_counter()
    try:
        result = run_cell(config, cell, out_dir / DATA_DIR)
        write_cell_outputs(result, out_dir / CELLS_DIR)
        status = STATUS_OK
    except Exception as e:
        logger.exception(f"Cell {cell.cell_id} failed")
        status = f"failed: {type(e).__name__}: {e}"
    return cell, status, time.perf_counter() - tic


def collect_cell_metrics(cells_dir: Path, cells: Optional[List[Cell]] = None) -> pd.DataFrame:
    """Concatenates per-cell metrics files in sorted cell order"""
    if cells is None:
        paths = sorted(cells_dir.glob(f"*/{METRICS_FILE}"))
    else:
        paths = [cells_dir / cell.cell_id / METRICS_FILE for cell in sorted(cells)]
    frames = [pd.read_csv(path) for path in paths if path.exists()]
    if not frames:
        raise FileNotFoundError(f"no cell metrics under {cells_dir}; run `train` or `sweep` first")
    return pd.concat(frames, ignore_index=True)


def _write_report(out_dir: Path, per_group: pd.DataFrame, manifest: RunManifest) -> Path:
    report_path = out_dir / REPORT_FILE
    write_report(aggregate_groups(per_group), report_path)
    manifest.add_artifact(out_dir, report_path)
    return report_path


def sweep(config_path: Path, out_dir: Path, seed: Optional[int] = None, jobs: int = 1) -> Path:
    """
    Runs every cell of the config's grids and aggregates across groups

    Cells run in parallel over `jobs` processes; outputs are collected in
    sorted cell order so the report does not depend on scheduling.

    Parameters
    ----------
    config_path: YAML experiment config
    out_dir: run directory; groups without generated data are generated first
    seed: master seed override
    jobs: worker processes

    Returns
    -------
    path of the aggregated metrics file
    """
    config, manifest = _prepare(config_path, out_dir, seed)
    if config.groups.count < 2:
        raise ConfigError('groups.count', "a sweep aggregates over groups and needs at least 2")
    tic = time.perf_counter()
    generated = _generate_groups(config, out_dir, manifest, only_missing=True)
    if generated:
        logger.info(f"Generated {len(generated)} missing dataset file(s) before sweeping")
    cells = enumerate_cells(config)
    logger.info(f"Sweeping {len(cells)} cells with {jobs} job(s)")

    job = functools.partial(_run_cell_job, config=config, out_dir=out_dir)
    if jobs > 1:
        with Pool(jobs) as pool:
            results = list(tqdm(pool.imap_unordered(job, cells), total=len(cells), desc='cells'))
    else:
        results = [job(cell) for cell in tqdm(cells, desc='cells')]

    for cell, status, elapsed in sorted(results, key=lambda r: r[0]):
        manifest.cells[cell.cell_id] = status
        manifest.timings[cell.cell_id] = elapsed
        if status == STATUS_OK:
            for path in sorted((out_dir / CELLS_DIR / cell.cell_id).iterdir()):
                manifest.add_artifact(out_dir, path)

    manifest.write(out_dir)

    failed = manifest.failed_cells()
    ok_cells = [cell for cell, status, _ in results if status == STATUS_OK]
    report_path = None
    if ok_cells:
        try:
            report_path = _write_report(out_dir, collect_cell_metrics(out_dir / CELLS_DIR, ok_cells), manifest)
        except ValueError as e:
            if not failed:
                raise
            logger.error(f"No report written: {e}")
    toc = time.perf_counter()
    manifest.timings['sweep'] = toc - tic
    manifest.write(out_dir)
    logger.info(f'Sweep Elapsed Time: {toc - tic}')

    if failed:
        raise RuntimeError(f"{len(failed)} cell(s) failed: {', '.join(failed)}")
    return report_path


def report(out_dir: Path, config_path: Optional[Path] = None, seed: Optional[int] = None) -> Path:
    """Re-aggregates the metrics of every finished cell under out_dir/cells"""
    if config_path is not None:
        _, manifest = _prepare(config_path, out_dir, seed)
    else:
        setup_filelogger(out_dir / LOG_FILE)
        manifest = RunManifest.load(out_dir)
    report_path = _write_report(out_dir, collect_cell_metrics(out_dir / CELLS_DIR), manifest)
    manifest.write(out_dir)
    logger.info(f"Wrote {report_path}")
    return report_path


def _handle_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ConfigError as e:
            raise ConfigFailure(str(e)) from e
        except (ValueError, FloatingPointError, FileNotFoundError, RuntimeError) as e:
            raise RunFailure(str(e)) from e
    return wrapper


config_option = click.option(
    "-c", "--config", "config_path",
    help="YAML experiment config",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
)
out_option = click.option(
    "-o", "--out", "out_dir",
    help="run directory; nothing is written outside it",
    type=click.Path(file_okay=False, path_type=Path),
    required=True,
)
seed_option = click.option(
    "-s", "--seed", "seed",
    help="override the config's master seed",
    type=click.IntRange(min=0),
    default=None,
)


@click.group()
@click.version_option(iot_ddos_gcn.__version__)
def cli():
    """Synthetic IoT DDoS traffic, graph snapshots and GCN detection experiments"""


@cli.command("generate")
@config_option
@out_option
@seed_option
@_handle_errors
def generate_cmd(*args, **kwargs):
    paths = generate(*args, **kwargs)
    click.echo(f"wrote {len(paths)} files")


@cli.command("train")
@config_option
@out_option
@seed_option
@click.option(
    "--cell", "cell_selector",
    help="group=G,topology=KIND,edge_mode=MODE,l=L[,n=N]",
    required=True,
)
@click.option("--lr", "learning_rate", help="override the learning rate", type=float, default=None)
@click.option("--epochs", "epochs", help="override the epoch count", type=click.IntRange(min=1), default=None)
@click.option(
    "--dump-snapshots", "dump_snapshots",
    help="write the test snapshots as plain text next to the cell outputs",
    is_flag=True,
)
@_handle_errors
def train_cmd(*args, **kwargs):
    paths = train_cell(*args, **kwargs)
    for path in paths:
        click.echo(str(path))


@cli.command("sweep")
@config_option
@out_option
@seed_option
@click.option(
    "-j", "--jobs", "jobs",
    help="number of cells to run in parallel",
    type=click.IntRange(min=1),
    default=1,
)
@_handle_errors
def sweep_cmd(*args, **kwargs):
    report_path = sweep(*args, **kwargs)
    click.echo(str(report_path))


@cli.command("report")
@out_option
@click.option(
    "-c", "--config", "config_path",
    help="YAML experiment config (optional when a manifest exists)",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
)
@seed_option
@_handle_errors
def report_cmd(*args, **kwargs):
    report_path = report(*args, **kwargs)
    click.echo(str(report_path))


if __name__ == "__main__":
    cli()
