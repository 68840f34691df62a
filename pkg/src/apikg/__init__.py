"""Automated API knowledge-graph construction: explore a schema, construct, filter."""

__version__ = "0.1.0"
