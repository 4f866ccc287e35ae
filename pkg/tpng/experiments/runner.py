"""Replica fan-out and report assembly."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Dict, Iterable, List, Optional

import pandas as pd

import tpng
from tpng.core import config
from tpng.model.schemas import Criterion, ExperimentReport, Provenance
from tpng.sampling.streams import RngStreams

logger = logging.getLogger("tpng.experiments")

ReplicaFn = Callable[[int, RngStreams], Optional[Dict[str, Any]]]


def _call(args):
    fn, k, streams = args
    return fn(k, streams.replica(k))


def run_replicas(fn: ReplicaFn, n: int, streams: RngStreams, workers: Optional[int] = None) -> List[Optional[dict]]:
    """Run ``fn(k, streams.replica(k))`` for k in range(n), results in replica order.

    ``fn`` must be a module-level callable so it pickles into worker processes.
    A replica returning None is counted as excluded by the caller.
    """
    workers = config.WORKERS if workers is None else workers
    jobs = [(fn, k, streams) for k in range(n)]
    if workers <= 1 or n <= 1:
        return [_call(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_call, jobs, chunksize=max(1, n // (4 * workers))))


def split_excluded(rows: Iterable[Optional[dict]]) -> tuple[pd.DataFrame, int]:
    rows = list(rows)
    kept = [r for r in rows if r is not None]
    return pd.DataFrame(kept), len(rows) - len(kept)


def params_digest(params: dict) -> str:
    payload = json.dumps(params, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def finish_report(
    experiment: str,
    params: dict,
    criteria: List[Criterion],
    replicas: int,
    excluded: int,
    seed: int,
    started: float,
    table: Optional[pd.DataFrame] = None,
    power_ok: bool = True,
    diagnostics: Optional[dict] = None,
) -> ExperimentReport:
    """Attach provenance and decide the verdict.

    fail: more than ``MAX_EXCLUSION_RATE`` of the replicas were excluded
    (recorded as an ``exclusion-rate`` criterion); inconclusive: the power
    guard failed; otherwise fail if some criterion failed and pass if none did.
    """
    exclusion_rate = excluded / replicas if replicas else 0.0
    if exclusion_rate > config.MAX_EXCLUSION_RATE:
        criteria = [*criteria, Criterion(
            name="exclusion-rate",
            estimate=exclusion_rate,
            target=config.MAX_EXCLUSION_RATE,
            passed=False,
            note=f"{excluded} of {replicas} replicas excluded",
        )]
        verdict = "fail"
    elif not power_ok:
        verdict = "inconclusive"
    elif all(c.passed for c in criteria):
        verdict = "pass"
    else:
        verdict = "fail"
    report = ExperimentReport(
        experiment=experiment,
        params=params,
        criteria=criteria,
        replicas=replicas,
        excluded=excluded,
        runtime_s=round(time.perf_counter() - started, 3),
        verdict=verdict,
        provenance=Provenance(seed=seed, params_digest=params_digest(params), version=tpng.__version__),
        diagnostics={"exclusion_rate": exclusion_rate, **(diagnostics or {})},
    )
    if table is not None:
        report.attach_table(table)
    logger.info(json.dumps({
        "event": "experiment_finished",
        "experiment": experiment,
        "verdict": verdict,
        "replicas": replicas,
        "excluded": excluded,
        "runtime_s": report.runtime_s,
    }))
    return report


def log_exclusion(experiment: str, replica: int, reason: str) -> None:
    logger.info(json.dumps({"event": "replica_excluded", "experiment": experiment, "replica": replica, "reason": reason}))
