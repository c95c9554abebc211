"""Write a :class:`~tinycompress.bench.GridReport` as CSV, markdown tables and an SVG summary.

Output is a pure function of the report, so identical reports give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path

from .bench import GridReport

TABLE_HEADER = [
    "Fault", "ANN Size (bytes)", "ANN Acc (%)", "Compressed Size (bytes)", "Compressed Acc (%)",
    "Compressed Rate (%)", "Acc Change (%)", "Status",
]
SUMMARY_HEADER = [
    "pipeline", "n_faults", "n_failed", "mean_rate", "var_rate", "std_rate",
    "mean_acc_change", "var_acc_change", "std_acc_change", "mean_compressed_acc",
]
PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
           "#7f7f7f", "#bcbd22", "#17becf"]


def _num(x) -> str:
    return "" if isinstance(x, float) and math.isnan(x) else repr(x)


def _r1(x) -> str:
    return "n/a" if isinstance(x, float) and math.isnan(x) else f"{x:.1f}"


def pipeline_csv(report: GridReport, pipeline: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_HEADER)
    for r in report.rows_for(pipeline):
        w.writerow([r.fault, r.baseline_size, _num(r.baseline_acc), r.compressed_size,
                    _num(r.compressed_acc), _num(r.compressed_rate), _num(r.acc_change),
                    "ok" if r.ok else f"failed: {r.error}"])
    return buf.getvalue()


def pipeline_markdown(report: GridReport, pipeline: str) -> str:
    s = report.stats(pipeline)
    lines = [
        f"### Pipeline {pipeline}",
        "",
        "| " + " | ".join(TABLE_HEADER) + " |",
        "|" + "|".join(["---"] + ["---:"] * 6 + [":---:"]) + "|",
    ]
    for r in report.rows_for(pipeline):
        status = "ok" if r.ok else "failed"
        lines.append(f"| {r.fault} | {r.baseline_size} | {_r1(r.baseline_acc)} | {r.compressed_size} | "
                     f"{_r1(r.compressed_acc)} | {_r1(r.compressed_rate)} | {_r1(r.acc_change)} | {status} |")
    lines.append(f"| Average |  |  |  |  | {_r1(s.mean_rate)} | {_r1(s.mean_acc_change)} |  |")
    lines += ["", f"Population variance: rate {s.var_rate:.3f}, accuracy change {s.var_acc_change:.3f}; "
                  f"standard deviation: rate {s.std_rate:.3f}, accuracy change {s.std_acc_change:.3f}."]
    if s.n_failed:
        lines.append(f"\n**{s.n_failed} cell(s) failed; averages cover the remaining {s.n}.**")
    return "\n".join(lines) + "\n"


def summary_csv(report: GridReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for p, s in report.aggregates().items():
        w.writerow([p, s.n, s.n_failed] + [_num(getattr(s, k)) for k in SUMMARY_HEADER[3:]])
    return buf.getvalue()


def summary_svg(report: GridReport) -> str:
    """Two panels: compressed rate per fault for every pipeline, and mean accuracy per pipeline."""
    W, H, pad = 960, 420, 50
    pw = (W - 3 * pad) / 2
    ph = H - 2 * pad
    faults = report.faults
    stats = report.aggregates()
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<style>text{font-family:sans-serif;font-size:11px}</style>',
        f'<text x="{pad}" y="20">Compressed rate (%) per fault</text>',
        f'<text x="{2 * pad + pw:.1f}" y="20">Mean compressed accuracy (%) per pipeline</text>',
    ]

    def frame(x0):
        out.append(f'<rect x="{x0:.1f}" y="{pad}" width="{pw:.1f}" height="{ph}" fill="none" stroke="#444"/>')
        for v in range(0, 101, 20):
            y = pad + ph * (1 - v / 100)
            out.append(f'<text x="{x0 - 6:.1f}" y="{y + 4:.1f}" text-anchor="end">{v}</text>')

    frame(pad)
    for i, f in enumerate(faults):
        x = pad + pw * (i + 0.5) / max(len(faults), 1)
        out.append(f'<text x="{x:.1f}" y="{pad + ph + 14}" text-anchor="middle">{f}</text>')
    for j, p in enumerate(report.pipelines):
        color = PALETTE[j % len(PALETTE)]
        pts = []
        for r in report.rows_for(p):
            if r.ok and math.isfinite(r.compressed_rate):
                i = faults.index(r.fault)
                x = pad + pw * (i + 0.5) / len(faults)
                y = pad + ph * (1 - min(max(r.compressed_rate, 0.0), 100.0) / 100)
                pts.append(f"{x:.1f},{y:.1f}")
        out.append(f'<g class="series" data-pipeline="{p}" stroke="{color}" fill="{color}">')
        if pts:
            out.append(f'<polyline points="{" ".join(pts)}" fill="none"/>')
            out += [f'<circle cx="{pt.split(",")[0]}" cy="{pt.split(",")[1]}" r="2.5"/>' for pt in pts]
        out.append("</g>")
        ly = pad + 14 * j + 10
        out.append(f'<text x="{pad + pw - 40:.1f}" y="{ly}" fill="{color}">{p}</text>')

    x0 = 2 * pad + pw
    frame(x0)
    bw = pw / max(len(report.pipelines), 1)
    for j, p in enumerate(report.pipelines):
        acc = stats[p].mean_compressed_acc
        h = 0.0 if not math.isfinite(acc) else ph * acc / 100
        x = x0 + bw * j + bw * 0.15
        out.append(f'<rect class="bar" data-pipeline="{p}" x="{x:.1f}" y="{pad + ph - h:.1f}" '
                   f'width="{bw * 0.7:.1f}" height="{h:.1f}" fill="{PALETTE[j % len(PALETTE)]}"/>')
        out.append(f'<text x="{x + bw * 0.35:.1f}" y="{pad + ph + 14}" text-anchor="middle">{p}</text>')
        out.append(f'<text x="{x + bw * 0.35:.1f}" y="{pad + ph - h - 4:.1f}" text-anchor="middle">{_r1(acc)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(report: GridReport, out_dir, formats=("csv", "markdown", "svg")) -> list[Path]:
    """Write ``report_<pipeline>.csv|.md``, ``summary.csv`` and ``summary.svg``; return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, text):
        path = out / name
        path.write_text(text, encoding="utf-8", newline="\n")
        written.append(path)

    for p in report.pipelines:
        if "csv" in formats:
            put(f"report_{p}.csv", pipeline_csv(report, p))
        if "markdown" in formats:
            put(f"report_{p}.md", pipeline_markdown(report, p))
    if "csv" in formats:
        put("summary.csv", summary_csv(report))
    if "svg" in formats:
        put("summary.svg", summary_svg(report))
    return written
