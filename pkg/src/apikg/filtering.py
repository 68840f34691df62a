"""Association-rule validation of type triples, pattern ``(ET1, ET2) -> RT``.

All ratios are kept as :class:`fractions.Fraction` so threshold comparisons are
exact; floats only appear in reports.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable

from .errors import ConfigError, EmptyKG
from .model import KGSchema, KnowledgeGraph, TypeTriple

COUNT_MODES = ("occurrence", "distinct")


@dataclass(frozen=True)
class Thresholds:
    support_min: float = 0.005
    confidence_min: float = 0.02
    lift_min: float = 1.0

    def __post_init__(self):
        for name in ("support_min", "confidence_min", "lift_min"):
            value = getattr(self, name)
            if math.isnan(value) or value < 0:
                raise ConfigError(f"threshold {name} must be non-negative, got {value}")


DEFAULT_THRESHOLDS = Thresholds()


@dataclass(frozen=True)
class AssociationMetrics:
    occurrence_count: int
    total_count: int
    support: Fraction
    confidence: Fraction
    lift: Fraction


def _counted_type_triples(kg: KnowledgeGraph, count_mode: str) -> list[TypeTriple]:
    if count_mode not in COUNT_MODES:
        raise ConfigError(f"count mode must be one of {COUNT_MODES}, got {count_mode!r}")
    typed = [t for t in kg.triples if t.type_triple is not None]
    if count_mode == "distinct":
        seen: dict[tuple, TypeTriple] = {}
        for t in typed:
            seen.setdefault((*t.fact_key(), t.type_triple), t.type_triple)
        return list(seen.values())
    return [t.type_triple for t in typed]


def compute_metrics(kg: KnowledgeGraph, count_mode: str = "occurrence") -> dict[TypeTriple, AssociationMetrics]:
    """Support, confidence and lift for every type triple occurring in ``kg``.

    ``count_mode="occurrence"`` counts every (fact, source text) instance;
    ``"distinct"`` counts each fact once no matter how many texts state it.
    """
    observed = _counted_type_triples(kg, count_mode)
    total = len(observed)
    if total == 0:
        raise EmptyKG("cannot compute association metrics over a KG without typed triples")
    per_triple = Counter(observed)
    per_pair = Counter((t.head_type, t.tail_type) for t in observed)
    per_relation = Counter(t.relation_type for t in observed)

    metrics = {}
    for tt, n in per_triple.items():
        support = Fraction(n, total)
        confidence = support / Fraction(per_pair[tt.head_type, tt.tail_type], total)
        lift = confidence / Fraction(per_relation[tt.relation_type], total)
        metrics[tt] = AssociationMetrics(n, total, support, confidence, lift)
    return metrics


def _exceeds(value: Fraction, threshold: float, inclusive: bool) -> bool:
    if math.isinf(threshold):
        return False
    # repr() round-trips the decimal the user typed, so 0.005 means exactly 1/200
    bound = Fraction(repr(float(threshold)))
    return value >= bound if inclusive else value > bound


def passes(m: AssociationMetrics, thresholds: Thresholds, inclusive: bool = False) -> bool:
    return (
        _exceeds(m.support, thresholds.support_min, inclusive)
        and _exceeds(m.confidence, thresholds.confidence_min, inclusive)
        and _exceeds(m.lift, thresholds.lift_min, inclusive)
    )


def update_schema(
    schema: KGSchema,
    metrics: dict[TypeTriple, AssociationMetrics],
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
    inclusive: bool = False,
) -> KGSchema:
    kept = [t for t in schema.type_triples if t in metrics and passes(metrics[t], thresholds, inclusive)]
    return KGSchema(list(schema.entity_types), list(schema.relation_types), kept, validated=True)


def update_kg(kg: KnowledgeGraph, validated: KGSchema) -> KnowledgeGraph:
    if not validated.validated:
        raise ValueError("update_kg needs a validated schema")
    allowed = set(validated.type_triples)
    triples = [t for t in kg.triples if t.type_triple in allowed]
    referenced = {e.normalized for t in triples for e in (t.head, t.tail)}
    entities = {k: v for k, v in kg.entities.items() if k in referenced}
    return KnowledgeGraph(entities, triples, kg.schema_digest)


def metrics_report(
    metrics: dict[TypeTriple, AssociationMetrics], thresholds: Thresholds, inclusive: bool = False
) -> list[dict]:
    rows = []
    for tt in sorted(metrics):
        m = metrics[tt]
        rows.append(
            {
                "type_triple": list(tt),
                "count": m.occurrence_count,
                "support": float(m.support),
                "confidence": float(m.confidence),
                "lift": float(m.lift),
                "kept": passes(m, thresholds, inclusive),
            }
        )
    return rows


def write_metrics_report(rows: Iterable[dict], path: str | Path) -> None:
    Path(path).write_text(json.dumps(list(rows), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


@dataclass
class FilterResult:
    schema: KGSchema
    kg: KnowledgeGraph
    report: list[dict]


def filter_kg(
    schema: KGSchema,
    kg: KnowledgeGraph,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
    inclusive: bool = False,
    count_mode: str = "occurrence",
) -> FilterResult:
    """Single pass: metrics on the unreliable KG, then schema update, then KG update."""
    if not any(t.type_triple is not None for t in kg.triples):
        validated = KGSchema(list(schema.entity_types), list(schema.relation_types), [], validated=True)
        return FilterResult(validated, update_kg(kg, validated), [])
    metrics = compute_metrics(kg, count_mode)
    validated = update_schema(schema, metrics, thresholds, inclusive)
    return FilterResult(validated, update_kg(kg, validated), metrics_report(metrics, thresholds, inclusive))

