"""The full benchmark: 18 fault detectors times 7 compression pipelines.

Runs the default configuration (about two minutes on one core), writes CSV,
markdown and SVG reports under runs/demo, and prints the per-pipeline means.
Pass ``--quick`` for a five-fault version that takes a few seconds; its training
sets are small, so its accuracy columns are only a smoke check.

    python demos/04_desk_grid.py [--quick]
"""
import sys

from tinycompress import bench, report
from tinycompress.config import config_from_dict

overrides = {"output_dir": "runs/demo", "cache_dir": "runs/cache"}
if "--quick" in sys.argv:
    overrides["data"] = {"samples_per_fault": 120, "faults": [0, 1, 6, 11, 14]}
    overrides["train"] = {"epochs": 10}
    overrides["cluster"] = {"finetune_epochs": 5}
cfg = config_from_dict(overrides)

rep = bench.run_grid(cfg)
paths = report.emit_report(rep, cfg.output_dir)
print(f"{len(rep.faults)} faults x {len(rep.pipelines)} pipelines in {rep.elapsed_s:.0f}s; "
      f"{len(paths)} report files in {cfg.output_dir}\n")

stats = rep.aggregates()
print(f"{'pipeline':>8} {'mean rate %':>12} {'std':>6} {'mean acc chg':>13} {'std':>6}")
for p, s in stats.items():
    print(f"{p:>8} {s.mean_rate:12.2f} {s.std_rate:6.2f} {s.mean_acc_change:13.2f} {s.std_acc_change:6.2f}")

best_single = max(stats[p].mean_rate for p in ("P", "C", "Q"))
print(f"\nbest single stage {best_single:.1f}%; all three stages {stats['PCQ'].mean_rate:.1f}%")
worst = min(rep.rows_for("PCQ"), key=lambda r: r.compressed_acc / r.baseline_acc)
print(f"worst PCQ detector: fault {worst.fault}, "
      f"{worst.baseline_acc:.1f}% -> {worst.compressed_acc:.1f}%")
