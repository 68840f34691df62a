from __future__ import annotations

import json
from pathlib import Path

import pytest

from apikg.model import Entity, InstanceTriple, KnowledgeGraph, TypedEntity, TypeTriple

DATA = Path(__file__).parent / "data"


def make_kg(type_triples, relation_phrase="relates to") -> KnowledgeGraph:
    """One instance triple per entry, each with its own fresh pair of entities."""
    entities, triples = {}, []
    for i, tt in enumerate(type_triples):
        tt = TypeTriple(*tt)
        head, tail = Entity(f"H{i}"), Entity(f"T{i}")
        entities[head.normalized] = TypedEntity(head, tt.head_type)
        entities[tail.normalized] = TypedEntity(tail, tt.tail_type)
        triples.append(InstanceTriple(head, relation_phrase, tail, f"s{i}", tt.relation_type, tt))
    return KnowledgeGraph(entities, triples)


# (class, containment, method) x4, (class, access, method) x2,
# (method, dependency, method) x3, (method, equivalence, method) x1
TEN_TRIPLE_LAYOUT = (
    [("class", "containment", "method")] * 4
    + [("class", "access", "method")] * 2
    + [("method", "dependency", "method")] * 3
    + [("method", "equivalence", "method")]
)


@pytest.fixture
def ten_triple_kg() -> KnowledgeGraph:
    return make_kg(TEN_TRIPLE_LAYOUT)


@pytest.fixture
def hand_scored():
    return json.loads((DATA / "eval_hand_scored.json").read_text(encoding="utf-8"))


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(criterion): one acceptance criterion")


_acceptance_results: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    criterion = report.user_properties and dict(report.user_properties).get("acceptance")
    if criterion:
        _acceptance_results.append(("PASS" if report.passed else "FAIL", criterion))


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_setup(item):
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        item.user_properties.append(("acceptance", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for status, criterion in _acceptance_results:
        terminalreporter.write_line(f"{status}  {criterion}")
