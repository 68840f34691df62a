"""The default fused vocabulary: 4 entity types and 13 relation types with definitions."""

from __future__ import annotations

import json
from importlib import resources

from .model import ENTITY_KIND, RELATION_KIND, FusedType


def _load() -> dict:
    return json.loads(resources.files("apikg").joinpath("data/default_vocabulary.json").read_text("utf-8"))


def default_entity_types() -> list[FusedType]:
    return [FusedType.from_json(o, ENTITY_KIND) for o in _load()["entity_types"]]


def default_relation_types() -> list[FusedType]:
    return [FusedType.from_json(o, RELATION_KIND) for o in _load()["relation_types"]]
