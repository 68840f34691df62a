"""Bottom-up schema induction over seed texts.

Per text: extract entities, pair them, extract relations, label entity types;
relation types are the lower-cased relation phrases. After every text is done
the low-dimensional types are fused into abstract ones, and the fused
vocabularies are fully connected into candidate type triples.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TypeVar

from .corpus import Corpus, TextUnit
from .errors import CoverageGap, EmptyVocabulary, MalformedOutput
from .llm import UnitRunner, parse_fields, parse_fusion_output, parse_list_output
from .model import (
    ENTITY_KIND,
    RELATION_KIND,
    Entity,
    FusedType,
    InstanceTriple,
    KGSchema,
    LowDimType,
    TypeTriple,
)

log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

ENTITY_EXTRACTION = "entity_extraction"
RELATION_EXTRACTION = "relation_extraction"
ENTITY_TYPE_LABELING = "entity_type_labeling"
ENTITY_TYPE_FUSION = "entity_type_fusion"
RELATION_TYPE_FUSION = "relation_type_fusion"

Pair = tuple[Entity, Entity]


def parallel_map(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> list[R]:
    """Order-preserving map, threaded when ``workers > 1``."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def dedup_entities(entities: Iterable[Entity]) -> list[Entity]:
    seen: set[str] = set()
    out = []
    for e in entities:
        if e.normalized not in seen:
            seen.add(e.normalized)
            out.append(e)
    return out


def format_entities(entities: Sequence[Entity]) -> str:
    return "\n".join(e.surface for e in entities)


def format_pairs(pairs: Sequence[Pair]) -> str:
    return "\n".join(f"{a.surface} | {b.surface}" for a, b in pairs)


def _parse_entities(raw: str) -> list[Entity]:
    return dedup_entities(Entity(item) for item in parse_list_output(raw) if item.strip())


def extract_entities(runner: UnitRunner, unit: TextUnit) -> list[Entity]:
    return runner.run(ENTITY_EXTRACTION, {"text": unit.content}, _parse_entities, unit.id)


def pair_entities(entities: Sequence[Entity]) -> list[Pair]:
    return list(itertools.combinations(entities, 2))


def match_pair_triples(
    rows: Iterable[Sequence[str]], pairs: Sequence[Pair], source_id: str
) -> list[tuple[Pair, Entity, str, Entity, Sequence[str]]]:
    """Resolve ``head | relation | tail ...`` rows against the offered pairs.

    Rows naming entities outside the pairs, or a second relation for an already
    answered pair, are dropped. Returns ``(pair, head, phrase, tail, row)``.
    """
    by_key: dict[frozenset[str], Pair] = {}
    for a, b in pairs:
        by_key.setdefault(frozenset((a.normalized, b.normalized)), (a, b))
    used: set[frozenset[str]] = set()
    out = []
    for row in rows:
        head_s, phrase, tail_s = row[0], row[1], row[2]
        head, tail = Entity(head_s), Entity(tail_s)
        key = frozenset((head.normalized, tail.normalized))
        if len(key) != 2 or key not in by_key:
            log.warning("%s: dropping relation outside the offered pairs: %s", source_id, " | ".join(row))
            continue
        if key in used:
            log.warning("%s: dropping extra relation for an answered pair: %s", source_id, " | ".join(row))
            continue
        used.add(key)
        a, b = by_key[key]
        # keep the surfaces the entity extractor produced
        if head.normalized == a.normalized:
            head, tail = a, b
        else:
            head, tail = b, a
        out.append(((a, b), head, phrase, tail, row))
    return out


def extract_relations(runner: UnitRunner, unit: TextUnit, pairs: Sequence[Pair]) -> list[InstanceTriple]:
    if not pairs:
        return []

    def parse(raw: str) -> list[InstanceTriple]:
        matched = match_pair_triples(parse_fields(raw, 3), pairs, unit.id)
        return [InstanceTriple(h, phrase, t, unit.id) for _, h, phrase, t, _ in matched]

    return runner.run(
        RELATION_EXTRACTION, {"text": unit.content, "pairs": format_pairs(pairs)}, parse, unit.id
    )


def label_entity_types(
    runner: UnitRunner, unit: TextUnit, entities: Sequence[Entity]
) -> dict[Entity, LowDimType]:
    if not entities:
        return {}

    def parse(raw: str) -> dict[Entity, LowDimType]:
        mapping = parse_list_output(raw, "mapping")
        by_norm = {Entity(k).normalized: v for k, v in mapping.items()}
        labels: dict[Entity, LowDimType] = {}
        for e in entities:
            label = by_norm.get(e.normalized)
            if label is None:
                raise MalformedOutput(f"no entity type for {e.surface!r}", raw)
            if not isinstance(label, str):
                raise MalformedOutput(f"entity {e.surface!r} has more than one type", raw)
            labels[e] = LowDimType(label.strip().lower(), ENTITY_KIND)
        extra = set(by_norm) - {e.normalized for e in entities}
        if extra:
            log.warning("%s: ignoring labels for unknown entities %s", unit.id, sorted(extra))
        return labels

    return runner.run(
        ENTITY_TYPE_LABELING, {"text": unit.content, "entities": format_entities(entities)}, parse, unit.id
    )


def label_relation_types(triples: Iterable[InstanceTriple]) -> dict[InstanceTriple, LowDimType]:
    return {t: LowDimType(t.relation_phrase.strip().lower(), RELATION_KIND) for t in triples}


def _fuse(runner: UnitRunner, unit: str, kind: str, low_dim: Iterable[LowDimType | str]) -> list[FusedType]:
    names = sorted({(x.name if isinstance(x, LowDimType) else x).strip().lower() for x in low_dim})
    if not names:
        return []
    wanted = set(names)

    def parse(raw: str) -> list[FusedType]:
        groups: dict[str, tuple[list[str], str]] = {}
        assigned: set[str] = set()
        for name, members, definition in parse_fusion_output(raw):
            name = name.lower()
            kept = []
            for m in (m.lower() for m in members):
                if m not in wanted:
                    log.warning("%s: dropping invented member %r of %r", unit, m, name)
                elif m in assigned:
                    log.warning("%s: %r already fused elsewhere; ignoring under %r", unit, m, name)
                else:
                    assigned.add(m)
                    kept.append(m)
            if name in groups:
                groups[name][0].extend(kept)
            elif kept:
                groups[name] = (kept, definition)
        missing = wanted - assigned
        if missing:
            if runner.strict:
                raise CoverageGap(missing)
            log.warning("%s: %s", unit, CoverageGap(missing))
            for m in sorted(missing):
                if m in groups:
                    groups[m][0].append(m)
                else:
                    groups[m] = ([m], f"Items of the specific type '{m}'.")
        return [FusedType(n, kind, d, frozenset(ms)) for n, (ms, d) in groups.items()]

    return runner.run(unit, {"types": "\n".join(names)}, parse)


def fuse_entity_types(runner: UnitRunner, low_dim: Iterable[LowDimType | str]) -> list[FusedType]:
    return _fuse(runner, ENTITY_TYPE_FUSION, ENTITY_KIND, low_dim)


def fuse_relation_types(runner: UnitRunner, low_dim: Iterable[LowDimType | str]) -> list[FusedType]:
    return _fuse(runner, RELATION_TYPE_FUSION, RELATION_KIND, low_dim)


def generate_full_schema(entity_types: Sequence[FusedType], relation_types: Sequence[FusedType]) -> KGSchema:
    if not entity_types or not relation_types:
        raise EmptyVocabulary(
            f"cannot connect {len(entity_types)} entity types with {len(relation_types)} relation types"
        )
    for label, types in (("entity", entity_types), ("relation", relation_types)):
        names = [t.name for t in types]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate {label} type names: {names}")
    triples = [
        TypeTriple(h.name, r.name, t.name)
        for h in entity_types
        for r in relation_types
        for t in entity_types
    ]
    return KGSchema(list(entity_types), list(relation_types), triples, validated=False)


@dataclass
class SeedFacts:
    unit: TextUnit
    entities: list[Entity]
    triples: list[InstanceTriple]
    entity_labels: dict[Entity, LowDimType]
    relation_labels: dict[InstanceTriple, LowDimType]


def explore_text(runner: UnitRunner, unit: TextUnit) -> SeedFacts:
    entities = extract_entities(runner, unit)
    triples = extract_relations(runner, unit, pair_entities(entities))
    labels = label_entity_types(runner, unit, entities)
    return SeedFacts(unit, entities, triples, labels, label_relation_types(triples))


@dataclass
class ExploreResult:
    schema: KGSchema
    facts: list[SeedFacts]


def explore(runner: UnitRunner, seeds: Corpus, workers: int = 1) -> ExploreResult:
    facts = parallel_map(lambda u: explore_text(runner, u), list(seeds), workers)
    entity_low = {lt for f in facts for lt in f.entity_labels.values()}
    relation_low = {lt for f in facts for lt in f.relation_labels.values()}
    entity_types = fuse_entity_types(runner, entity_low)
    relation_types = fuse_relation_types(runner, relation_low)
    return ExploreResult(generate_full_schema(entity_types, relation_types), facts)
