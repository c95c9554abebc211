"""``tinycompress`` command line: synth, train, compress, eval, grid, inspect.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Every command writes the fully resolved configuration to ``config.json`` in its
output directory so the run can be replayed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench, modelfmt, report
from .compress import CompressedModel, normalize_pipeline, reconstruct
from .config import ConfigError, RunConfig, config_from_dict
from .data import ParseError, TaskError, synth_te, write_csv
from .nn import accuracy

log = logging.getLogger("tinycompress")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- configuration ------------------------------------------------------------------------


def _set_path(raw: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = raw
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{dotted}: {k!r} is not a section")
    node[keys[-1]] = value


def _parse_override(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise UsageError(f"--set expects KEY=VALUE, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value  # bare strings need no quoting


# flag name -> dotted config key
_FLAG_KEYS = {
    "seed": "seed",
    "per_fault": "data.samples_per_fault",
    "data": "data.path",
    "out_dir": "output_dir",
    "workers": "workers",
    "cache_dir": "cache_dir",
}


def resolve_config(args) -> RunConfig:
    """Config file, then ``--set`` overrides, then dedicated flags (highest precedence)."""
    raw: dict = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read config {args.config}: {e.strerror}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"{args.config}: not valid JSON ({e})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{args.config}: top level must be an object")
    for text in args.set or []:
        _set_path(raw, *_parse_override(text))
    for flag, key in _FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            _set_path(raw, key, value)
    if getattr(args, "data", None):
        _set_path(raw, "data.source", "csv")
    return config_from_dict(raw)


def _echo_config(cfg: RunConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(cfg.to_json(), encoding="utf-8")


def _task(cfg: RunConfig, fault: int):
    if fault not in cfg.data.faults:
        raise ConfigError(f"--fault {fault} is not among data.faults {cfg.data.faults}")
    ds = bench.load_dataset(cfg)
    return bench.make_task(cfg, ds, fault)


# -- commands -----------------------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = resolve_config(args)
    out = Path(args.out) if args.out else Path(cfg.output_dir) / "dataset.csv"
    faults = sorted(set(cfg.data.faults) | {0})
    ds = synth_te(cfg.seed, cfg.data.samples_per_fault, faults=faults)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(ds, out)
    _echo_config(cfg, out.parent)
    print(f"wrote {len(ds)} samples ({len(faults)} faults x {cfg.data.samples_per_fault}) to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    task = _task(cfg, args.fault)
    model, history = bench.train_baseline(cfg, task)
    out = Path(args.out) if args.out else Path(cfg.output_dir) / f"baseline_f{args.fault:02d}.tcmp"
    out.parent.mkdir(parents=True, exist_ok=True)
    size = modelfmt.save(model, out)
    _echo_config(cfg, out.parent)
    (out.parent / f"{out.stem}.history.json").write_text(json.dumps(history) + "\n")
    print(f"fault {args.fault}: trained {len(history)} epochs, final loss "
          f"{history[-1] if history else float('nan'):.4f}")
    print(f"test accuracy {accuracy(model, *task.test):.1f}%, {size} bytes -> {out}")
    return EXIT_OK


def cmd_compress(args) -> int:
    cfg = resolve_config(args)
    try:
        pipeline = normalize_pipeline(args.pipeline)
    except ValueError as e:
        raise ConfigError(f"--pipeline: {e}") from None
    base = modelfmt.load(args.model)
    if isinstance(base, CompressedModel):
        raise ConfigError(f"{args.model} is already compressed; compress starts from a dense model")
    task = _task(cfg, args.fault)
    cm = bench.compress_for(cfg, base, task, pipeline)
    row = bench.compute_metrics(base, cm, task, pipeline)
    out = Path(args.out) if args.out else Path(cfg.output_dir) / f"f{args.fault:02d}_{pipeline}.tcmp"
    out.parent.mkdir(parents=True, exist_ok=True)
    modelfmt.save(cm, out)
    _echo_config(cfg, out.parent)
    print(f"pipeline {pipeline}: {row.baseline_size} -> {row.compressed_size} bytes "
          f"(rate {row.compressed_rate:.1f}%)")
    print(f"accuracy {row.baseline_acc:.1f}% -> {row.compressed_acc:.1f}% "
          f"(change {row.acc_change:+.1f}) -> {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    model = modelfmt.load(args.model)
    dense = reconstruct(model) if isinstance(model, CompressedModel) else model
    task = _task(cfg, args.fault)
    x, y = task.train if args.split == "train" else task.test
    acc = accuracy(dense, x, y)
    result = {"model": str(args.model), "fault": args.fault, "split": args.split,
              "samples": int(len(y)), "accuracy": acc, "size_bytes": modelfmt.size_bytes(model)}
    out_dir = Path(cfg.output_dir)
    _echo_config(cfg, out_dir)
    (out_dir / "eval.json").write_text(json.dumps(result, indent=2) + "\n")
    print(f"{args.split} accuracy {acc:.2f}% on {len(y)} samples")
    return EXIT_OK


def cmd_grid(args) -> int:
    cfg = resolve_config(args)
    out_dir = Path(cfg.output_dir)
    _echo_config(cfg, out_dir)
    rep = bench.run_grid(cfg)
    report.emit_report(rep, out_dir)
    (out_dir / "report.json").write_text(json.dumps(bench.report_to_dict(rep), indent=2) + "\n")
    print(f"{len(rep.faults)} faults x {len(rep.pipelines)} pipelines in {rep.elapsed_s:.1f}s -> {out_dir}")
    print(f"{'pipeline':>8} {'rate %':>8} {'acc chg':>8} {'failed':>6}")
    for p, s in rep.aggregates().items():
        print(f"{p:>8} {s.mean_rate:8.1f} {s.mean_acc_change:8.2f} {s.n_failed:6d}")
    return EXIT_OK if rep.complete else EXIT_RUNTIME


def cmd_inspect(args) -> int:
    data = Path(args.model).read_bytes()
    model = modelfmt.decode(data)
    arch = "-".join(str(a) for a in model.arch)
    kind = f"compressed ({model.stages or 'no stages'})" if isinstance(model, CompressedModel) else "dense"
    print(f"{args.model}: {len(data)} bytes, arch {arch}, {kind}")
    print(f"{'layer':>5} {'shape':>9} {'kind':<26} {'nonzeros':>9} {'codebook':>8} {'bits':>4} {'bytes':>8}")
    total = 0
    for r in modelfmt.describe(model):
        total += r.record_bytes
        print(f"{r.index:>5} {r.shape[0]:>4}x{r.shape[1]:<4} {r.kind:<26} {r.nonzeros:>9} "
              f"{r.codebook or '-':>8} {r.bits:>4} {r.record_bytes:>8}")
    print(f"layer records {total} bytes, header and checksum {len(data) - total} bytes")
    return EXIT_OK


# -- entry point --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tinycompress", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, data=True):
        sp.add_argument("--config", help="JSON run configuration (see docs/CONFIG.md)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key, e.g. --set cluster.clusters_per_layer=64")
        sp.add_argument("--seed", type=int, help="master seed (default: config, then $TINYCOMPRESS_SEED, then 0)")
        sp.add_argument("--out-dir", help="output directory (config key output_dir)")
        if data:
            sp.add_argument("--data", help="CSV dataset to use instead of the synthetic generator")
            sp.add_argument("--per-fault", type=int, help="synthetic samples per fault")
        return sp

    sp = common(sub.add_parser("synth", help="write the synthetic dataset as CSV"))
    sp.set_defaults(func=cmd_synth)
    sp.add_argument("--out", help="CSV path (default <out-dir>/dataset.csv)")

    sp = common(sub.add_parser("train", help="train one baseline detector"))
    sp.set_defaults(func=cmd_train)
    sp.add_argument("--fault", type=int, required=True)
    sp.add_argument("--out", help="model path (default <out-dir>/baseline_fNN.tcmp)")

    sp = common(sub.add_parser("compress", help="compress a dense model file"))
    sp.set_defaults(func=cmd_compress)
    sp.add_argument("model")
    sp.add_argument("--pipeline", required=True, help="subset of P, C, Q, e.g. pcq")
    sp.add_argument("--fault", type=int, required=True, help="task supplying fine-tuning and test data")
    sp.add_argument("--out")

    sp = common(sub.add_parser("eval", help="accuracy of a model file on a fault's task"))
    sp.set_defaults(func=cmd_eval)
    sp.add_argument("model")
    sp.add_argument("--fault", type=int, required=True)
    sp.add_argument("--split", choices=["train", "test"], default="test")

    sp = common(sub.add_parser("grid", help="every pipeline on every fault, with reports"))
    sp.set_defaults(func=cmd_grid)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--cache-dir", help="reuse baselines stored here")

    sp = sub.add_parser("inspect", help="per-layer storage breakdown of a model file")
    sp.set_defaults(func=cmd_inspect)
    sp.add_argument("model")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (modelfmt.ModelFormatError, ParseError, TaskError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
