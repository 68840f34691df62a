"""Domain types shared by the explore, construct and filter stages, with JSON codecs."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, NamedTuple

ENTITY_KIND = "entity-type"
RELATION_KIND = "relation-type"


def normalize_surface(surface: str) -> str:
    """Comparison key for an entity mention: trimmed, one trailing ``()`` removed.

    Case is preserved so ``List`` and ``list`` stay distinct.
    """
    s = surface.strip()
    if s.endswith("()"):
        s = s[:-2].rstrip()
    return s


@dataclass(frozen=True)
class Entity:
    surface: str

    def __post_init__(self):
        if not self.surface.strip():
            raise ValueError("entity surface must be non-empty")

    @property
    def normalized(self) -> str:
        return normalize_surface(self.surface)


class TypeTriple(NamedTuple):
    head_type: str
    relation_type: str
    tail_type: str

    def key(self) -> str:
        return f"{self.head_type}|{self.relation_type}|{self.tail_type}"

    @classmethod
    def from_key(cls, key: str) -> "TypeTriple":
        parts = key.split("|")
        if len(parts) != 3:
            raise ValueError(f"type triple key must have three '|'-separated parts: {key!r}")
        return cls(*(p.strip() for p in parts))


@dataclass(frozen=True)
class InstanceTriple:
    head: Entity
    relation_phrase: str
    tail: Entity
    source_id: str
    relation_type: str | None = None
    type_triple: TypeTriple | None = None

    def __post_init__(self):
        if not self.relation_phrase.strip():
            raise ValueError("relation phrase must be non-empty")
        if self.head.normalized == self.tail.normalized:
            raise ValueError(f"self-referencing triple on {self.head.surface!r}")

    def fact_key(self) -> tuple[str, str, str]:
        return (self.head.normalized, self.relation_phrase, self.tail.normalized)

    def dedup_key(self) -> tuple[str, str, str, str]:
        return (*self.fact_key(), self.source_id)

    def serialize(self) -> str:
        return f"{self.head.surface} {self.relation_phrase} {self.tail.surface}"


@dataclass(frozen=True)
class LowDimType:
    name: str
    kind: str

    def __post_init__(self):
        if not self.name or self.name != self.name.lower():
            raise ValueError(f"low-dimensional type names must be non-empty lower case: {self.name!r}")
        if self.kind not in (ENTITY_KIND, RELATION_KIND):
            raise ValueError(f"unknown type kind {self.kind!r}")


@dataclass(frozen=True)
class FusedType:
    name: str
    kind: str
    definition: str
    members: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(self.members))
        if not self.name:
            raise ValueError("fused type name must be non-empty")
        if not self.members:
            raise ValueError(f"fused type {self.name!r} has no members")
        if not self.definition.strip():
            raise ValueError(f"fused type {self.name!r} has no definition")

    def to_json(self) -> dict[str, Any]:
        return {"name": self.name, "definition": self.definition, "members": sorted(self.members)}

    @classmethod
    def from_json(cls, obj: dict[str, Any], kind: str) -> "FusedType":
        return cls(obj["name"], kind, obj["definition"], frozenset(obj["members"]))


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def digest_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class KGSchema:
    entity_types: list[FusedType]
    relation_types: list[FusedType]
    type_triples: list[TypeTriple]
    validated: bool = False

    @property
    def entity_type_names(self) -> list[str]:
        return [t.name for t in self.entity_types]

    @property
    def relation_type_names(self) -> list[str]:
        return [t.name for t in self.relation_types]

    def to_json(self) -> dict[str, Any]:
        return {
            "entity_types": [t.to_json() for t in self.entity_types],
            "relation_types": [t.to_json() for t in self.relation_types],
            "type_triples": [list(t) for t in self.type_triples],
            "validated": self.validated,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "KGSchema":
        ets = [FusedType.from_json(o, ENTITY_KIND) for o in obj["entity_types"]]
        rts = [FusedType.from_json(o, RELATION_KIND) for o in obj["relation_types"]]
        triples = [TypeTriple(*t) for t in obj["type_triples"]]
        schema = cls(ets, rts, triples, bool(obj.get("validated", False)))
        schema.check()
        return schema

    def check(self) -> None:
        en, rn = set(self.entity_type_names), set(self.relation_type_names)
        for t in self.type_triples:
            if t.head_type not in en or t.tail_type not in en or t.relation_type not in rn:
                raise ValueError(f"type triple {t} references a type outside the schema vocabulary")

    def dumps(self) -> str:
        return _dump(self.to_json())

    def digest(self) -> str:
        return digest_text(self.dumps())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "KGSchema":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class TypedEntity:
    entity: Entity
    entity_type: str


@dataclass
class KnowledgeGraph:
    entities: dict[str, TypedEntity] = field(default_factory=dict)
    triples: list[InstanceTriple] = field(default_factory=list)
    schema_digest: str = ""

    def entity_type_of(self, surface: str) -> str | None:
        te = self.entities.get(normalize_surface(surface))
        return te.entity_type if te else None

    def to_json(self) -> dict[str, Any]:
        return {
            "schema_digest": self.schema_digest,
            "entities": [
                {"surface": te.entity.surface, "normalized": key, "type": te.entity_type}
                for key, te in self.entities.items()
            ],
            "triples": [
                {
                    "head": t.head.surface,
                    "relation": t.relation_phrase,
                    "tail": t.tail.surface,
                    "relation_type": t.relation_type,
                    "type_triple": list(t.type_triple) if t.type_triple else None,
                    "source_id": t.source_id,
                }
                for t in self.triples
            ],
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "KnowledgeGraph":
        entities = {}
        for e in obj.get("entities", []):
            ent = Entity(e["surface"])
            entities[ent.normalized] = TypedEntity(ent, e["type"])
        triples = [
            InstanceTriple(
                Entity(t["head"]),
                t["relation"],
                Entity(t["tail"]),
                t["source_id"],
                t.get("relation_type"),
                TypeTriple(*t["type_triple"]) if t.get("type_triple") else None,
            )
            for t in obj.get("triples", [])
        ]
        return cls(entities, triples, obj.get("schema_digest", ""))

    def dumps(self) -> str:
        return _dump(self.to_json())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "KnowledgeGraph":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def type_triple_keys(triples: Iterable[TypeTriple]) -> list[str]:
    return [t.key() for t in triples]
