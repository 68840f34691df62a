from fractions import Fraction

import pytest

from apikg.errors import ConfigError, EmptyKG
from apikg.filtering import Thresholds, compute_metrics, filter_kg, metrics_report, update_kg, update_schema
from apikg.model import KGSchema, KnowledgeGraph, TypeTriple

from conftest import make_kg
from test_acceptance import schema_for


def test_ten_triple_example_keeps_all_four(ten_triple_kg):
    metrics = compute_metrics(ten_triple_kg)
    assert metrics[("class", "access", "method")].lift == Fraction(5, 3)
    assert metrics[("method", "dependency", "method")].lift == Fraction(5, 2)
    assert metrics[("method", "equivalence", "method")].lift == Fraction(5, 2)
    result = filter_kg(schema_for(ten_triple_kg), ten_triple_kg)
    assert len(result.schema.type_triples) == 4
    assert result.schema.validated


def test_distinct_mode_counts_each_fact_once():
    kg = make_kg([("class", "dependency", "method")] * 3 + [("class", "access", "method")])
    # the same fact repeated in three texts
    for i in range(1, 3):
        kg.triples[i] = type(kg.triples[0])(
            kg.triples[0].head, kg.triples[0].relation_phrase, kg.triples[0].tail, f"s{i}",
            kg.triples[0].relation_type, kg.triples[0].type_triple,
        )
    occ = compute_metrics(kg)[("class", "dependency", "method")]
    distinct = compute_metrics(kg, "distinct")[("class", "dependency", "method")]
    assert occ.support == Fraction(3, 4)
    assert distinct.support == Fraction(1, 2)
    with pytest.raises(ConfigError):
        compute_metrics(kg, "bogus")


def test_threshold_decimal_is_exact():
    # support is exactly 1/200; strict comparison must reject it, inclusive accept it
    kg = make_kg([("class", "dependency", "method")] + [("method", "access", "class")] * 199)
    m = compute_metrics(kg)[("class", "dependency", "method")]
    assert m.support == Fraction(1, 200)
    th = Thresholds(0.005, 0.0, 0.0)
    rows = {tuple(r["type_triple"]): r["kept"] for r in metrics_report(compute_metrics(kg), th)}
    assert rows[("class", "dependency", "method")] is False
    rows = {tuple(r["type_triple"]): r["kept"] for r in metrics_report(compute_metrics(kg), th, inclusive=True)}
    assert rows[("class", "dependency", "method")] is True


def test_extreme_thresholds(ten_triple_kg):
    schema = schema_for(ten_triple_kg)
    everything = filter_kg(schema, ten_triple_kg, Thresholds(0, 0, 0), inclusive=True)
    assert set(everything.schema.type_triples) == set(schema.type_triples)
    assert len(everything.kg.triples) == 10
    nothing = filter_kg(schema, ten_triple_kg, Thresholds(float("inf"), 0, 0), inclusive=True)
    assert nothing.schema.type_triples == [] and nothing.kg.entities == {}


def test_schema_triples_without_instances_are_dropped(ten_triple_kg):
    schema = schema_for(ten_triple_kg)
    extra = KGSchema(schema.entity_types, schema.relation_types, schema.type_triples + [TypeTriple("method", "access", "class")])
    validated = update_schema(extra, compute_metrics(ten_triple_kg), Thresholds(0, 0, 0), inclusive=True)
    assert TypeTriple("method", "access", "class") not in validated.type_triples


def test_update_kg_needs_validated_schema(ten_triple_kg):
    with pytest.raises(ValueError):
        update_kg(ten_triple_kg, schema_for(ten_triple_kg))


def test_negative_and_nan_thresholds_rejected():
    with pytest.raises(ConfigError):
        Thresholds(-0.1, 0, 0)
    with pytest.raises(ConfigError):
        Thresholds(0, float("nan"), 0)


def test_empty_kg():
    with pytest.raises(EmptyKG):
        compute_metrics(KnowledgeGraph())
    schema = schema_for(make_kg([("a", "r", "b")]))
    result = filter_kg(schema, KnowledgeGraph())
    assert result.schema.validated and result.schema.type_triples == [] and result.report == []


def test_report_rows_sorted_with_floats(ten_triple_kg):
    rows = metrics_report(compute_metrics(ten_triple_kg), Thresholds())
    assert [r["type_triple"] for r in rows] == sorted(r["type_triple"] for r in rows)
    first = rows[0]
    assert set(first) == {"type_triple", "count", "support", "confidence", "lift", "kept"}
