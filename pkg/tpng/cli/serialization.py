"""Canonical JSON documents and CSV tables.

Documents are written with sorted keys and no insignificant whitespace, so
serialize -> deserialize -> serialize reproduces the same bytes.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Union

import pandas as pd
from pydantic import ValidationError

from tpng.core.errors import SchemaMismatch
from tpng.model.diagram import Diagram, canonical_json, diagram_digest, from_document, to_document
from tpng.model.schemas import (
    DIAGRAM_SCHEMA,
    LAYER_SCHEMA,
    REPORT_SCHEMA,
    DiagramDocument,
    ExperimentReport,
    LayerDocument,
    PathRecord,
    SwapRecord,
)
from tpng.services.coupling import ScpLayer

logger = logging.getLogger("tpng.cli")


def _dump(model) -> str:
    return canonical_json(model.model_dump(mode="json", by_alias=True)) + "\n"


def dumps_diagram(d: Diagram) -> str:
    return _dump(to_document(d))


def layer_document(layer: ScpLayer) -> LayerDocument:
    return LayerDocument(
        base_digest=diagram_digest(layer.base),
        base=to_document(layer.base),
        psi=to_document(layer.psi),
        extra_sources=list(layer.extra_sources),
        dropped_sinks=list(layer.dropped_sinks),
        paths=[
            PathRecord(label=p.label, points=[tuple(q) for q in p.points], terminus=p.terminus)
            for p in layer.paths
        ],
        swaps=[
            SwapRecord(sigma=s.sigma, lower=s.lower, upper=s.upper, x=s.point.x, y=s.point.y)
            for s in sorted(layer.swaps, key=lambda s: s.sigma)
        ],
    )


def dumps_layer(layer: ScpLayer) -> str:
    return _dump(layer_document(layer))


def dumps_report(report: ExperimentReport) -> str:
    return _dump(report)


def _parse(text: str, expected: str) -> dict:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"not a JSON document: {exc}") from exc
    tag = payload.get("schema") if isinstance(payload, dict) else None
    if tag != expected:
        raise SchemaMismatch(f"expected schema {expected!r}, found {tag!r}")
    return payload


def loads_diagram(text: str) -> Diagram:
    payload = _parse(text, DIAGRAM_SCHEMA)
    try:
        return from_document(DiagramDocument.model_validate(payload))
    except ValidationError as exc:
        raise SchemaMismatch(f"invalid diagram document: {exc.errors()[0]['msg']}") from exc


@dataclass(frozen=True)
class LoadedLayer:
    base: Diagram
    psi: Diagram
    paths: List[PathRecord]
    swaps: List[SwapRecord]
    document: LayerDocument


def loads_layer(text: str) -> LoadedLayer:
    payload = _parse(text, LAYER_SCHEMA)
    try:
        doc = LayerDocument.model_validate(payload)
    except ValidationError as exc:
        raise SchemaMismatch(f"invalid layer document: {exc.errors()[0]['msg']}") from exc
    base = from_document(doc.base)
    digest = diagram_digest(base)
    if digest != doc.base_digest:
        raise SchemaMismatch(f"base diagram digest {digest[:12]} does not match {doc.base_digest[:12]}")
    return LoadedLayer(base=base, psi=from_document(doc.psi), paths=doc.paths, swaps=doc.swaps, document=doc)


def loads_report(text: str) -> ExperimentReport:
    payload = _parse(text, REPORT_SCHEMA)
    try:
        return ExperimentReport.model_validate(payload)
    except ValidationError as exc:
        raise SchemaMismatch(f"invalid report: {exc.errors()[0]['msg']}") from exc


def load_any(path: Union[str, Path]) -> Union[Diagram, LoadedLayer]:
    """Read a diagram or a layer document, dispatching on its schema tag."""
    text = Path(path).read_text()
    try:
        tag = json.loads(text).get("schema")
    except (json.JSONDecodeError, AttributeError) as exc:
        raise SchemaMismatch(f"{path} is not a tpng document") from exc
    if tag == LAYER_SCHEMA:
        return loads_layer(text)
    if tag == DIAGRAM_SCHEMA:
        return loads_diagram(text)
    raise SchemaMismatch(f"{path} carries schema {tag!r}; expected a diagram or a layer")


def write_text(path: Union[str, Path], text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    logger.debug(json.dumps({"event": "file_written", "path": str(path), "bytes": len(text)}))
    return path


def write_table(path: Union[str, Path], table: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False)
    logger.debug(json.dumps({"event": "file_written", "path": str(path), "rows": len(table)}))
    return path
