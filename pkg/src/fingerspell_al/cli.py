"""Command-line entry point: ``fingerspell-al {run,plot,gap-chart,validate-config}``."""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

import yaml

from . import __version__
from .config import ConfigError, dump_config, parse_config, with_seeds
from .data import CorpusError
from .engine import ExperimentError, load_corpus, per_class_gap_report, pretrain, run_experiment
from .nn import TrainHistory, WeightFileError, load_params, save_params
from .report import ReportError, render_gap_chart, render_learning_curves
from .results import ResultFileError, read_result_json, write_result_csv, write_result_json

log = logging.getLogger("fingerspell_al")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_manifest(path: Path, manifest: dict) -> None:
    path.write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")


def run_dir_for(cfg, out_root) -> Path:
    return Path(out_root) / f"{cfg.name}-{cfg.config_hash()[:12]}"


def cmd_run(
    config_path,
    out_root,
    force: bool = False,
    seed_override: Optional[List[int]] = None,
    strict_ingest: bool = False,
) -> int:
    try:
        cfg = parse_config(config_path)
        if seed_override:
            cfg = with_seeds(cfg, seed_override)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out = run_dir_for(cfg, out_root)
    if out.exists() and any(out.iterdir()):
        if not force:
            print(f"error: {out} already holds results; pass --force to overwrite", file=sys.stderr)
            return EXIT_FAIL
        shutil.rmtree(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "resolved_config.yaml").write_text(dump_config(cfg), encoding="utf-8")
        manifest = {
            "config_path": str(config_path),
            "output_dir": str(out),
            "config_hash": cfg.config_hash(),
            "engine_version": __version__,
            "started": _now(),
            "finished": None,
            "status": "running",
        }
        _write_manifest(out / "manifest.json", manifest)

        corpus = load_corpus(cfg.corpus, strict=strict_ingest)
        pretrained = None
        pretrain_steps = None
        if cfg.pretrain is not None:
            if cfg.pretrain.weights is not None:
                pretrained = load_params(cfg.pretrain.weights, expected_arch=cfg.arch)
                pretrain_steps = 0
            else:
                history = TrainHistory()
                source = load_corpus(cfg.pretrain.corpus, strict=strict_ingest)
                params = pretrain(cfg, source, history)
                save_params(params, out / "pretrained.alfw")
                # AL rounds start from the file, as a separate process would
                pretrained = load_params(out / "pretrained.alfw", expected_arch=cfg.arch)
                pretrain_steps = history.steps

        result = run_experiment(cfg, corpus, pretrained=pretrained)
        result.pretrain_steps = pretrain_steps
        write_result_json(result, out / "result.json")
        write_result_csv(result, out / "result.csv")
        render_learning_curves([result], out / "learning_curve.svg")
    except (CorpusError, ExperimentError, WeightFileError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        manifest["status"] = "failed"
        manifest["error"] = str(exc)
        manifest["finished"] = _now()
        _write_manifest(out / "manifest.json", manifest)
        return EXIT_FAIL

    manifest.update(
        status="complete",
        finished=_now(),
        wall_clock={
            str(run.seed): [round(r.wall_clock, 3) for r in run.rounds] for run in result.runs
        },
        outputs=["resolved_config.yaml", "result.json", "result.csv", "learning_curve.svg"]
        + (["pretrained.alfw"] if (out / "pretrained.alfw").exists() else []),
    )
    _write_manifest(out / "manifest.json", manifest)
    print(out)
    return EXIT_OK


def cmd_plot(result_paths, out_svg, title: Optional[str] = None) -> int:
    try:
        results = [read_result_json(p) for p in result_paths]
        render_learning_curves(results, out_svg, title)
    except (ResultFileError, ReportError, ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def load_shared_letters(path) -> dict:
    """YAML mapping ``target -> source -> [letters]``."""
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict):
        raise ReportError(f"{path}: expected a mapping of target -> source -> letters")
    out = {}
    for target, sources in data.items():
        if not isinstance(sources, dict):
            raise ReportError(f"{path}: entry for {target!r} must map source corpora to letter lists")
        out[str(target)] = {}
        for source, letters in sources.items():
            if isinstance(letters, str):
                letters = list(letters)
            out[str(target)][str(source)] = [str(c) for c in letters]
    return out


def cmd_gap_chart(result_paths, t: int, shared_path, out_svg) -> int:
    try:
        results = [read_result_json(p) for p in result_paths]
        shared = load_shared_letters(shared_path) if shared_path else {}
        report = per_class_gap_report(results, t, shared)
        render_gap_chart(report, out_svg)
    except (ResultFileError, ReportError, ExperimentError, ConfigError, OSError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_validate_config(config_path) -> int:
    try:
        cfg = parse_config(config_path)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    sys.stdout.write(dump_config(cfg))
    return EXIT_OK


def _seed_list(text: str) -> List[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not seeds or any(s < 0 for s in seeds):
        raise argparse.ArgumentTypeError("seeds must be non-negative integers")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fingerspell-al", description="Active learning experiments for fingerspelling corpora.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log every AL round")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an AL experiment from a YAML config")
    p.add_argument("config")
    p.add_argument("-o", "--out", default="runs", help="parent directory for the run folder")
    p.add_argument("--force", action="store_true", help="overwrite an existing run folder")
    p.add_argument("--seed-override", type=_seed_list, help="comma-separated seeds replacing the config's")
    p.add_argument("--strict-ingest", action="store_true", help="fail on unknown letters or unreadable images")

    p = sub.add_parser("plot", help="learning curves from result JSON files")
    p.add_argument("results", nargs="+")
    p.add_argument("-o", "--out", required=True, help="output SVG path")
    p.add_argument("--title")

    p = sub.add_parser("gap-chart", help="per-letter accuracy and gaps at one round")
    p.add_argument("results", nargs="+")
    p.add_argument("-t", "--round", type=int, required=True)
    p.add_argument("--shared", help="YAML file: target -> source -> shared letters")
    p.add_argument("-o", "--out", required=True, help="output SVG path")

    p = sub.add_parser("validate-config", help="print the fully resolved config")
    p.add_argument("config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "run":
        return cmd_run(args.config, args.out, args.force, args.seed_override, args.strict_ingest)
    if args.command == "plot":
        return cmd_plot(args.results, args.out, args.title)
    if args.command == "gap-chart":
        return cmd_gap_chart(args.results, args.round, args.shared, args.out)
    return cmd_validate_config(args.config)


if __name__ == "__main__":
    sys.exit(main())
