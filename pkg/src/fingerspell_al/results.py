"""Result files: versioned JSON document and flat per-round CSV.

Neither file carries timestamps or timings, so both are byte-identical across
reruns of one config; wall-clock numbers go to the run manifest instead.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, List

from .config import config_from_dict, to_dict
from .engine import ExperimentResult, RoundRecord, SeedRun

SCHEMA_VERSION = 1


class ResultFileError(ValueError):
    pass


def result_to_dict(result: ExperimentResult) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "engine_version": result.engine_version,
        "config": to_dict(result.config),
        "corpus": {"name": result.corpus_name, "alphabet": list(result.alphabet)},
        "pretrain_steps": result.pretrain_steps,
        "runs": [
            {
                "seed": run.seed,
                "truncated": run.truncated,
                "test_corpus_index": list(run.test_corpus_index),
                "labeled_corpus_index": list(run.labeled_corpus_index),
                "rounds": [
                    {
                        "round": r.round,
                        "labeled_count": r.labeled_count,
                        "test_accuracy": r.test_accuracy,
                        "per_class_accuracy": {k: r.per_class_accuracy[k] for k in result.alphabet},
                        "selected": list(r.selected),
                    }
                    for r in run.rounds
                ],
            }
            for run in result.runs
        ],
    }


def result_from_dict(d: Dict[str, Any]) -> ExperimentResult:
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ResultFileError(f"result schema version {version!r}, expected {SCHEMA_VERSION}")
    try:
        runs = [
            SeedRun(
                seed=run["seed"],
                truncated=run["truncated"],
                test_corpus_index=run["test_corpus_index"],
                labeled_corpus_index=run["labeled_corpus_index"],
                rounds=[
                    RoundRecord(
                        round=r["round"],
                        labeled_count=r["labeled_count"],
                        test_accuracy=r["test_accuracy"],
                        per_class_accuracy=dict(r["per_class_accuracy"]),
                        selected=list(r["selected"]),
                    )
                    for r in run["rounds"]
                ],
            )
            for run in d["runs"]
        ]
        return ExperimentResult(
            config=config_from_dict(d["config"]),
            corpus_name=d["corpus"]["name"],
            alphabet=list(d["corpus"]["alphabet"]),
            runs=runs,
            pretrain_steps=d["pretrain_steps"],
            engine_version=d["engine_version"],
        )
    except (KeyError, TypeError) as exc:
        raise ResultFileError(f"malformed result document: {exc!r}") from exc


def dumps_result(result: ExperimentResult) -> str:
    return json.dumps(result_to_dict(result), indent=1, sort_keys=False) + "\n"


def write_result_json(result: ExperimentResult, path) -> None:
    Path(path).write_text(dumps_result(result), encoding="utf-8")


def read_result_json(path) -> ExperimentResult:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ResultFileError(f"{path}: not JSON ({exc})") from exc
    return result_from_dict(data)


def csv_rows(result: ExperimentResult) -> List[List[str]]:
    header = ["seed", "round", "labeled_count", "test_accuracy", *result.alphabet]
    rows = [header]
    for run in result.runs:
        for r in run.rounds:
            per = [
                "" if r.per_class_accuracy.get(a) is None else repr(r.per_class_accuracy[a])
                for a in result.alphabet
            ]
            rows.append([str(run.seed), str(r.round), str(r.labeled_count), repr(r.test_accuracy), *per])
    return rows


def dumps_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(csv_rows(result))
    return buf.getvalue()


def write_result_csv(result: ExperimentResult, path) -> None:
    Path(path).write_text(dumps_csv(result), encoding="utf-8")
