"""
Command-line entry point.

    python -m tpng simulate --t 0.5 --width 100 --height 100 --source-rate 1 --sink-rate 2 --seed 42
    python -m tpng couple --source-rate 0.8 --sink-rate 2.5 --psi-source-rate 1.2 --psi-sink-rate 0
    python -m tpng triple --lam 1 --eps 0.25 --t 0.5 --width 30 --height 30
    python -m tpng experiment lln-height --config lln.toml
    python -m tpng render out/diagram.json
    python -m tpng oracle-check --replicas 1000

Exit codes: 0 ok or pass, 1 usage/config/schema/IO error, 2 experiment fail,
3 experiment inconclusive.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from tpng.cli.config import RunConfig, load_run_config
from tpng.cli.render import render
from tpng.cli.serialization import dumps_diagram, dumps_layer, dumps_report, load_any, write_table, write_text
from tpng.core import config
from tpng.core.errors import ConfigError, TpngError
from tpng.experiments.suites import run_experiment
from tpng.logging_config import setup_logging
from tpng.model.diagram import diagram_summary
from tpng.model.schemas import ExperimentReport
from tpng.sampling.streams import RngStreams, log_streams
from tpng.services.coupling import couple_pair
from tpng.services.sweep import build_diagram
from tpng.services.triple import export_trace, occupancy_audit, triple_run

logger = logging.getLogger("tpng.cli")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAIL = 2
EXIT_INCONCLUSIVE = 3
VERDICT_EXIT = {"pass": EXIT_OK, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}

# argparse dest -> dotted RunConfig key
FLAG_KEYS = {
    "seed": "seed",
    "replicas": "replicas",
    "workers": "workers",
    "out": "out",
    "t": "model.t",
    "width": "model.width",
    "height": "model.height",
    "source_rate": "model.source_rate",
    "sink_rate": "model.sink_rate",
    "bulk_intensity": "model.bulk_intensity",
    "psi_source_rate": "couple.source_rate",
    "psi_sink_rate": "couple.sink_rate",
    "lam": "triple.lam",
    "eps": "triple.eps",
    "experiment": "experiment",
    "input": "input",
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--seed", help="master seed, decimal or 0x-hex")
    p.add_argument("--out", help="output path")
    p.add_argument("--workers", type=int, help="worker processes for replicas")
    p.add_argument("--replicas", type=int)


def _model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--t", type=float, help="crossing probability in [0, 1)")
    p.add_argument("--width", type=float)
    p.add_argument("--height", type=float)
    p.add_argument("--source-rate", type=float)
    p.add_argument("--sink-rate", type=float)
    p.add_argument("--bulk-intensity", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tpng", description="t-PNG simulator and verification lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample one diagram")
    _common(p)
    _model_flags(p)

    p = sub.add_parser("couple", help="sample a coupled pair and its second-class layer")
    _common(p)
    _model_flags(p)
    p.add_argument("--psi-source-rate", type=float, help="upper source rate (>= lower)")
    p.add_argument("--psi-sink-rate", type=float, help="upper sink rate (<= lower)")

    p = sub.add_parser("triple", help="triple coupling with indicator-chain trace")
    _common(p)
    _model_flags(p)
    p.add_argument("--lam", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--no-blocking", action="store_true", help="skip the blocking-measure chain U")

    p = sub.add_parser("experiment", help="run a named Monte-Carlo experiment")
    _common(p)
    p.add_argument("experiment", help="experiment name")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="experiment parameter; VALUE is parsed as JSON when possible")

    p = sub.add_parser("render", help="draw a diagram or layer document as SVG")
    _common(p)
    p.add_argument("input", help="diagram or layer JSON document")
    p.add_argument("--title")

    p = sub.add_parser("oracle-check", help="t = 0 height against the longest chain")
    _common(p)
    p.add_argument("--width", type=float)
    p.add_argument("--height", type=float)
    p.add_argument("--queries", type=int, default=20)
    return parser


def _parse_params(items: List[str]) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError("params", f"expected KEY=VALUE, got {item!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _flags(args: argparse.Namespace) -> Dict[str, Any]:
    flags = {dotted: getattr(args, dest, None) for dest, dotted in FLAG_KEYS.items()}
    if getattr(args, "no_blocking", False):
        flags["triple.blocking"] = False
    params = _parse_params(getattr(args, "param", []))
    for key, value in params.items():
        flags[f"params.{key}"] = value
    return flags


def _out(cfg: RunConfig, default_name: str) -> Path:
    return Path(cfg.out) if cfg.out else Path(config.OUTPUT_DIR) / default_name


def _print(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def cmd_simulate(cfg: RunConfig) -> int:
    streams = RngStreams.from_seed(cfg.seed)
    log_streams(streams, "simulate")
    d = build_diagram(cfg.model_params, streams)
    path = write_text(_out(cfg, "diagram.json"), dumps_diagram(d))
    _print({"file": str(path), **diagram_summary(d)})
    return EXIT_OK


def cmd_couple(cfg: RunConfig) -> int:
    phi = cfg.model_params
    psi = phi.with_boundary(
        phi.source_rate if cfg.couple.source_rate is None else cfg.couple.source_rate,
        phi.sink_rate if cfg.couple.sink_rate is None else cfg.couple.sink_rate,
    )
    streams = RngStreams.from_seed(cfg.seed)
    log_streams(streams, "couple")
    _, layer = couple_pair(phi, psi, streams)
    path = write_text(_out(cfg, "layer.json"), dumps_layer(layer))
    _print({
        "file": str(path),
        "particles": len(layer.paths),
        "swaps": len(layer.swaps),
        "lower": diagram_summary(layer.base),
        "upper": diagram_summary(layer.psi),
        **{f"layer_{k}": v for k, v in layer.stats.items()},
    })
    return EXIT_OK


def cmd_triple(cfg: RunConfig) -> int:
    m = cfg.model
    params = cfg.model_params
    run = triple_run(
        cfg.triple.lam, cfg.triple.eps, m.t, params.box, cfg.seed,
        with_blocking=cfg.triple.blocking, bulk_intensity=m.bulk_intensity,
    )
    json_path = _out(cfg, "triple.json")
    csv_path = write_table(json_path.with_suffix(".csv"), export_trace(run))
    problems = occupancy_audit(run)
    summary = {
        "lam": run.lam,
        "eps": run.eps,
        "t": run.t,
        "seed": cfg.seed,
        "meetings": len(run.trace),
        "eta_particles": len(run.carriers),
        "window": list(run.v_final.window),
        "x0_final": run.trace[-1].x0 if run.trace else None,
        "occupancy_problems": problems,
        "trace": str(csv_path),
    }
    write_text(json_path, json.dumps(summary, sort_keys=True, separators=(",", ":")) + "\n")
    _print({"file": str(json_path), **summary})
    return EXIT_OK if not problems else EXIT_FAIL


def _write_report(cfg: RunConfig, report: ExperimentReport, default_name: str) -> int:
    path = write_text(_out(cfg, default_name), dumps_report(report))
    if report.table is not None:
        write_table(path.with_suffix(".csv"), report.table)
    _print({
        "file": str(path),
        "experiment": report.experiment,
        "verdict": report.verdict,
        "criteria": {c.name: c.passed for c in report.criteria},
    })
    return VERDICT_EXIT[report.verdict]


def cmd_experiment(cfg: RunConfig) -> int:
    report = run_experiment(cfg.experiment, cfg.params, replicas=cfg.replicas, seed=cfg.seed, workers=cfg.workers)
    return _write_report(cfg, report, f"{cfg.experiment}.json")


def cmd_render(cfg: RunConfig, title: Optional[str] = None) -> int:
    document = load_any(cfg.input)
    out = Path(cfg.out) if cfg.out else Path(cfg.input).with_suffix(".svg")
    path = render(document, out, title=title)
    _print({"file": str(path)})
    return EXIT_OK


def cmd_oracle_check(cfg: RunConfig, queries: int) -> int:
    params = {"box": {"width": cfg.model.width, "height": cfg.model.height}, "queries": queries, **cfg.params}
    report = run_experiment("oracle", params, replicas=cfg.replicas, seed=cfg.seed, workers=cfg.workers)
    return _write_report(cfg, report, "oracle.json")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging()
    try:
        cfg = load_run_config(args.command, _flags(args), args.config)
        logger.info(json.dumps({"event": "command_started", "command": cfg.command, "seed": cfg.seed}))
        if cfg.command == "simulate":
            return cmd_simulate(cfg)
        if cfg.command == "couple":
            return cmd_couple(cfg)
        if cfg.command == "triple":
            return cmd_triple(cfg)
        if cfg.command == "experiment":
            return cmd_experiment(cfg)
        if cfg.command == "render":
            return cmd_render(cfg, args.title)
        return cmd_oracle_check(cfg, args.queries)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (TpngError, OSError, ValueError) as exc:
        logger.error(json.dumps({"event": "command_failed", "command": args.command, "error": str(exc)}))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
