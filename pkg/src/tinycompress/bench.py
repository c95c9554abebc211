"""Train one detector per fault, run every compression pipeline on it, and tabulate the results."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import modelfmt
from .compress import apply_pipeline, reconstruct
from .config import RunConfig, derive_seed
from .data import BinaryTask, Dataset, load_csv, make_binary_task, synth_te
from .nn import DenseModel, accuracy, init_model, train

log = logging.getLogger(__name__)

_INIT, _TRAIN, _SPLIT, _COMPRESS = 1, 2, 3, 4


@dataclass
class ReportRow:
    fault: int
    pipeline: str
    baseline_size: int
    baseline_acc: float
    compressed_size: int
    compressed_acc: float
    compressed_rate: float
    acc_change: float
    ok: bool = True
    error: str = ""


@dataclass
class PipelineStats:
    pipeline: str
    n: int
    n_failed: int
    mean_rate: float
    var_rate: float
    std_rate: float
    mean_acc_change: float
    var_acc_change: float
    std_acc_change: float
    mean_compressed_acc: float


@dataclass
class GridReport:
    rows: list[ReportRow]
    pipelines: list[str]
    faults: list[int]
    config: dict = field(default_factory=dict)
    baseline_history: dict = field(default_factory=dict)
    elapsed_s: float = 0.0

    @property
    def complete(self) -> bool:
        return all(r.ok for r in self.rows) and len(self.rows) == len(self.pipelines) * len(self.faults)

    def rows_for(self, pipeline: str) -> list[ReportRow]:
        return [r for r in self.rows if r.pipeline == pipeline]

    def stats(self, pipeline: str) -> PipelineStats:
        """Means plus population variance and standard deviation over successful cells."""
        rows = self.rows_for(pipeline)
        good = [r for r in rows if r.ok]
        rate = np.array([r.compressed_rate for r in good], dtype=np.float64)
        change = np.array([r.acc_change for r in good], dtype=np.float64)
        acc = np.array([r.compressed_acc for r in good], dtype=np.float64)
        nan = float("nan")
        return PipelineStats(
            pipeline, len(good), len(rows) - len(good),
            float(rate.mean()) if good else nan, float(rate.var()) if good else nan,
            float(rate.std()) if good else nan, float(change.mean()) if good else nan,
            float(change.var()) if good else nan, float(change.std()) if good else nan,
            float(acc.mean()) if good else nan,
        )

    def aggregates(self) -> dict[str, PipelineStats]:
        return {p: self.stats(p) for p in self.pipelines}


def metrics_from_values(baseline_size, baseline_acc, compressed_size, compressed_acc):
    """``(compressed_rate, acc_change)`` in percent / percentage points, unrounded."""
    rate = 100.0 * (1.0 - compressed_size / baseline_size)
    return rate, compressed_acc - baseline_acc


def compute_metrics(baseline: DenseModel, compressed, task: BinaryTask, pipeline: str = "",
                    baseline_size=None, baseline_acc=None) -> ReportRow:
    """Measure both models on the task's test split and derive rate and accuracy change."""
    if baseline_size is None:
        baseline_size = modelfmt.size_bytes(baseline)
    if baseline_acc is None:
        baseline_acc = accuracy(baseline, *task.test)
    size = modelfmt.size_bytes(compressed)
    acc = accuracy(reconstruct(compressed), *task.test)
    rate, change = metrics_from_values(baseline_size, baseline_acc, size, acc)
    return ReportRow(task.target_fault, pipeline or getattr(compressed, "stages", ""),
                     baseline_size, baseline_acc, size, acc, rate, change)


def load_dataset(cfg: RunConfig) -> Dataset:
    d = cfg.data
    if d.source == "csv":
        return load_csv(d.path)
    return synth_te(cfg.seed, d.samples_per_fault, faults=sorted(set(d.faults) | {0}))


def make_task(cfg: RunConfig, ds: Dataset, fault: int) -> BinaryTask:
    """The fault's binary task exactly as the grid builds it."""
    return make_binary_task(ds, fault, derive_seed(cfg.seed, fault, _SPLIT),
                            cfg.data.test_fraction, cfg.data.negatives)


def train_baseline(cfg: RunConfig, task: BinaryTask) -> tuple[DenseModel, list[float]]:
    fault = task.target_fault
    model = init_model(cfg.arch, derive_seed(cfg.seed, fault, _INIT))
    return train(model, *task.train, cfg.train_config(derive_seed(cfg.seed, fault, _TRAIN)))


def compress_for(cfg: RunConfig, base: DenseModel, task: BinaryTask, pipeline: str):
    ccfg = cfg.compression_config(derive_seed(cfg.seed, task.target_fault, _COMPRESS))
    return apply_pipeline(base, pipeline, ccfg, data=task.train)


def _baseline(cfg: RunConfig, task: BinaryTask, fault: int) -> tuple[DenseModel, list[float]]:
    cache = None
    if cfg.cache_dir:
        key = cfg.digest("seed", "data", "arch", "train")
        cache = Path(cfg.cache_dir) / key / f"baseline_f{fault:02d}.tcmp"
        if cache.exists():
            log.info("fault %d: baseline from cache %s", fault, cache)
            return modelfmt.load(cache), []
    model, history = train_baseline(cfg, task)
    if cache is not None:
        cache.parent.mkdir(parents=True, exist_ok=True)
        modelfmt.save(model, cache)
    return model, history


def run_fault(cfg: RunConfig, ds: Dataset, fault: int) -> tuple[list[ReportRow], list[float]]:
    """Baseline plus every configured pipeline for one fault. Failures become flagged rows."""
    try:
        task = make_task(cfg, ds, fault)
        base, history = _baseline(cfg, task, fault)
        base_size = modelfmt.size_bytes(base)
        base_acc = accuracy(base, *task.test)
    except Exception as e:  # noqa: BLE001 - the grid records failures instead of aborting
        log.exception("fault %d: baseline failed", fault)
        return [ReportRow(fault, p, 0, float("nan"), 0, float("nan"), float("nan"), float("nan"),
                          ok=False, error=f"baseline: {e}") for p in cfg.pipelines], []

    rows = []
    for p in cfg.pipelines:
        try:
            cm = compress_for(cfg, base, task, p)
            rows.append(compute_metrics(base, cm, task, p, base_size, base_acc))
        except Exception as e:  # noqa: BLE001
            log.exception("fault %d, pipeline %s failed", fault, p)
            rows.append(ReportRow(fault, p, base_size, base_acc, 0, float("nan"), float("nan"),
                                  float("nan"), ok=False, error=str(e)))
        log.info("fault %d %-3s rate %.1f%% acc %.1f -> %.1f", fault, p, rows[-1].compressed_rate,
                 base_acc, rows[-1].compressed_acc)
    return rows, history


def _run_fault_job(args):
    cfg_dict, ds, fault = args
    from .config import config_from_dict
    return run_fault(config_from_dict(cfg_dict), ds, fault)


def run_grid(cfg: RunConfig, dataset: Dataset | None = None) -> GridReport:
    """All configured pipelines on all configured faults; rows ordered by (fault, pipeline)."""
    t0 = time.perf_counter()
    cfg.validate()
    ds = dataset if dataset is not None else load_dataset(cfg)
    faults = list(cfg.data.faults)
    if cfg.workers > 1:
        jobs = [(cfg.to_dict(), ds, f) for f in faults]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_fault_job, jobs))
    else:
        results = [run_fault(cfg, ds, f) for f in faults]
    order = {p: i for i, p in enumerate(cfg.pipelines)}
    rows = sorted((r for rs, _ in results for r in rs), key=lambda r: (faults.index(r.fault), order[r.pipeline]))
    return GridReport(rows, list(cfg.pipelines), faults, cfg.to_dict(),
                      {f: h for f, (_, h) in zip(faults, results)}, time.perf_counter() - t0)


def report_to_dict(report: GridReport) -> dict:
    return {
        "complete": report.complete,
        "elapsed_s": report.elapsed_s,
        "rows": [asdict(r) for r in report.rows],
        "aggregates": {p: asdict(s) for p, s in report.aggregates().items()},
        "config": report.config,
    }
