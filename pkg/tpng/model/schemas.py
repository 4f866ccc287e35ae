"""Validated parameter models and the JSON documents the CLI reads and writes.

Schema tags are fixed strings; a reader refuses any document whose tag differs.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

DIAGRAM_SCHEMA = "tpng-diagram/1"
LAYER_SCHEMA = "tpng-layer/1"
REPORT_SCHEMA = "tpng-report/1"


def _finite(v: float) -> float:
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


class Box(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    width: float = Field(gt=0)
    height: float = Field(gt=0)

    @field_validator("width", "height")
    @classmethod
    def finite_extent(cls, v):
        return _finite(v)

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.width and 0.0 <= y <= self.height

    def reflected(self) -> "Box":
        return Box(width=self.height, height=self.width)


class BoundarySpec(BaseModel):
    """Boundary nucleation rates: sources on the bottom edge, sinks on the left edge."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    source_rate: float = Field(0.0, ge=0)
    sink_rate: float = Field(0.0, ge=0)

    @field_validator("source_rate", "sink_rate")
    @classmethod
    def finite_rate(cls, v):
        return _finite(v)

    @classmethod
    def stationary(cls, lam: float, t: float) -> "BoundarySpec":
        if lam <= 0:
            raise ValueError("stationary boundary needs lam > 0")
        return cls(source_rate=lam, sink_rate=1.0 / (lam * (1.0 - t)))

    @classmethod
    def one_sided(cls, lam: float) -> "BoundarySpec":
        return cls(source_rate=lam, sink_rate=0.0)


class ModelParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    t: float = Field(ge=0, lt=1)
    source_rate: float = Field(0.0, ge=0)
    sink_rate: float = Field(0.0, ge=0)
    bulk_intensity: float = Field(1.0, ge=0)
    box: Box
    seed: int = Field(0, ge=0, lt=2**64)

    @field_validator("source_rate", "sink_rate", "bulk_intensity")
    @classmethod
    def finite_rate(cls, v):
        return _finite(v)

    @property
    def boundary(self) -> BoundarySpec:
        return BoundarySpec(source_rate=self.source_rate, sink_rate=self.sink_rate)

    @classmethod
    def stationary(cls, lam: float, t: float, box: Box, seed: int = 0, bulk_intensity: float = 1.0) -> "ModelParams":
        b = BoundarySpec.stationary(lam, t)
        return cls(t=t, source_rate=b.source_rate, sink_rate=b.sink_rate,
                   bulk_intensity=bulk_intensity, box=box, seed=seed)

    def with_boundary(self, source_rate: float, sink_rate: float) -> "ModelParams":
        return self.model_copy(update={"source_rate": source_rate, "sink_rate": sink_rate})

    def digest(self) -> str:
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


# --- wire documents -------------------------------------------------------

class VertexRecord(BaseModel):
    x: float
    y: float
    kind: Literal["corner", "crossing", "nucleation", "scp-swap"]


class DiagramDocument(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_tag: Literal["tpng-diagram/1"] = Field(DIAGRAM_SCHEMA, alias="schema")
    width: float
    height: float
    t: float
    verticals: List[Tuple[float, float, float, int]]
    horizontals: List[Tuple[float, float, float, int]]
    vertices: List[VertexRecord]
    sources: List[float]
    sinks: List[float]
    bulk: List[Tuple[float, float]]
    exits_top: int
    exits_right: int


class PathRecord(BaseModel):
    label: int
    points: List[Tuple[float, float]]
    terminus: Literal["top", "right"]


class SwapRecord(BaseModel):
    sigma: float
    lower: int
    upper: int
    x: float
    y: float


class LayerDocument(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_tag: Literal["tpng-layer/1"] = Field(LAYER_SCHEMA, alias="schema")
    base_digest: str
    base: DiagramDocument
    psi: DiagramDocument
    extra_sources: List[float]
    dropped_sinks: List[float]
    paths: List[PathRecord]
    swaps: List[SwapRecord]


# --- experiment reports ---------------------------------------------------

class Criterion(BaseModel):
    """One named acceptance check inside a report."""

    name: str
    estimate: Optional[float] = None
    target: Optional[float] = None
    tolerance: Optional[float] = None
    statistic: Optional[float] = None
    p_value: Optional[float] = None
    passed: bool
    note: str = ""


class Provenance(BaseModel):
    seed: int
    params_digest: str
    version: str


class ExperimentReport(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_tag: Literal["tpng-report/1"] = Field(REPORT_SCHEMA, alias="schema")
    experiment: str
    params: dict
    criteria: List[Criterion]
    replicas: int
    excluded: int = 0
    runtime_s: float = 0.0
    verdict: Literal["pass", "fail", "inconclusive"]
    provenance: Provenance
    diagnostics: dict = Field(default_factory=dict)
    # per-replica rows, written to CSV next to the JSON report
    _table: Any = PrivateAttr(default=None)

    @property
    def table(self):
        return self._table

    def attach_table(self, table) -> "ExperimentReport":
        self._table = table
        return self

    @model_validator(mode="after")
    def verdict_traceable(self):
        if self.verdict == "fail" and all(c.passed for c in self.criteria):
            raise ValueError("a failing verdict must name a failing criterion")
        return self
