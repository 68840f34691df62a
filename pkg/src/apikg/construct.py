"""Schema-guided extraction over the target corpus and assembly of the unreliable KG."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import Corpus, TextUnit
from .errors import MalformedOutput, UnknownType
from .explore import dedup_entities, format_pairs, match_pair_triples, pair_entities, parallel_map
from .llm import UnitRunner, parse_fields, parse_list_output
from .model import Entity, FusedType, InstanceTriple, KGSchema, KnowledgeGraph, TypedEntity, TypeTriple

log = logging.getLogger(__name__)

SCHEMA_ENTITY_EXTRACTION = "schema_entity_extraction"
SCHEMA_RELATION_EXTRACTION = "schema_relation_extraction"


def format_types(types: Sequence[FusedType]) -> str:
    return "\n".join(f"{t.name}: {t.definition}" for t in types)


def _resolve_type(label: str, names: Sequence[str], strict: bool, what: str) -> str | None:
    lookup = {n.lower(): n for n in names}
    name = lookup.get(label.strip().lower())
    if name is None:
        if strict:
            raise UnknownType(label)
        log.warning("dropping %s with out-of-schema type %r", what, label)
    return name


def schema_guided_extract_entities(runner: UnitRunner, unit: TextUnit, schema: KGSchema) -> list[TypedEntity]:
    names = schema.entity_type_names

    def parse(raw: str) -> list[TypedEntity]:
        out = []
        for surface, label in parse_list_output(raw, "mapping").items():
            if not isinstance(label, str):
                raise MalformedOutput(f"entity {surface!r} has more than one type", raw)
            name = _resolve_type(label, names, runner.strict, f"entity {surface!r} in {unit.id}")
            if name is not None:
                out.append(TypedEntity(Entity(surface), name))
        seen: set[str] = set()
        deduped = []
        for te in out:
            if te.entity.normalized not in seen:
                seen.add(te.entity.normalized)
                deduped.append(te)
        return deduped

    return runner.run(
        SCHEMA_ENTITY_EXTRACTION,
        {"text": unit.content, "entity_types": format_types(schema.entity_types)},
        parse,
        unit.id,
    )


def schema_guided_extract_relations(
    runner: UnitRunner, unit: TextUnit, pairs: Sequence[tuple[TypedEntity, TypedEntity]], schema: KGSchema
) -> list[InstanceTriple]:
    if not pairs:
        return []
    type_of = {te.entity.normalized: te.entity_type for pair in pairs for te in pair}
    entity_pairs = [(a.entity, b.entity) for a, b in pairs]
    names = schema.relation_type_names

    def parse(raw: str) -> list[InstanceTriple]:
        out = []
        for _, head, phrase, tail, row in match_pair_triples(parse_fields(raw, 4), entity_pairs, unit.id):
            rtype = _resolve_type(row[3], names, runner.strict, f"relation {' | '.join(row)} in {unit.id}")
            if rtype is None:
                continue
            tt = TypeTriple(type_of[head.normalized], rtype, type_of[tail.normalized])
            out.append(InstanceTriple(head, phrase, tail, unit.id, rtype, tt))
        return out

    return runner.run(
        SCHEMA_RELATION_EXTRACTION,
        {
            "text": unit.content,
            "pairs": format_pairs(entity_pairs),
            "relation_types": format_types(schema.relation_types),
        },
        parse,
        unit.id,
    )


@dataclass
class TextExtraction:
    source_id: str
    entities: list[TypedEntity] = field(default_factory=list)
    triples: list[InstanceTriple] = field(default_factory=list)


def construct_text(runner: UnitRunner, unit: TextUnit, schema: KGSchema) -> TextExtraction:
    typed = schema_guided_extract_entities(runner, unit, schema)
    pairs = pair_entities(typed)
    return TextExtraction(unit.id, typed, schema_guided_extract_relations(runner, unit, pairs, schema))


def _triple_order(t: InstanceTriple):
    return (t.source_id, t.head.normalized, t.relation_phrase, t.tail.normalized, t.relation_type or "")


def collect(results: Iterable[TextExtraction], schema_digest: str = "") -> KnowledgeGraph:
    """Merge per-text extractions into one graph.

    Texts are folded in ``source_id`` order so the first-seen type of an entity
    does not depend on the order results arrive in.
    """
    ordered = sorted(results, key=lambda r: r.source_id)
    entities: dict[str, TypedEntity] = {}
    for res in ordered:
        for te in res.entities:
            key = te.entity.normalized
            known = entities.get(key)
            if known is None:
                entities[key] = te
            elif known.entity_type != te.entity_type:
                log.warning(
                    "entity %r typed %r in %s but already %r; keeping the first",
                    te.entity.surface, te.entity_type, res.source_id, known.entity_type,
                )

    triples: dict[tuple, InstanceTriple] = {}
    for res in ordered:
        for t in sorted(res.triples, key=_triple_order):
            head, tail = entities.get(t.head.normalized), entities.get(t.tail.normalized)
            if head is None or tail is None:
                log.warning("dropping triple with an untyped endpoint: %s", t.serialize())
                continue
            tt = t.type_triple
            if tt is None or tt.head_type != head.entity_type or tt.tail_type != tail.entity_type:
                log.warning("type mismatch, dropping %s (%s) in %s", t.serialize(), tt, t.source_id)
                continue
            triples.setdefault(t.dedup_key(), t)

    return KnowledgeGraph(
        dict(sorted(entities.items())),
        sorted(triples.values(), key=_triple_order),
        schema_digest,
    )


def construct(runner: UnitRunner, corpus: Corpus, schema: KGSchema, workers: int = 1) -> KnowledgeGraph:
    if schema.validated:
        log.warning("constructing against an already validated schema")
    results = parallel_map(lambda u: construct_text(runner, u, schema), list(corpus), workers)
    return collect(results, schema.digest())
