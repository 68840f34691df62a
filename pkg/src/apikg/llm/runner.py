"""Invoke an AI unit: render its template, call the provider, parse, repair once."""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Mapping, TypeVar

from ..errors import ConfigError, MalformedOutput
from ..model import digest_text
from .providers import Provider, ProviderRequest
from .templates import PromptTemplate, render

log = logging.getLogger(__name__)

T = TypeVar("T")


class Tracer:
    """Collects one record per unit invocation; callers decide the final order."""

    def __init__(self):
        self._records: list[dict] = []
        self._lock = threading.Lock()

    def record(self, unit: str, source_id: str | None, prompt: str, output: str) -> None:
        with self._lock:
            self._records.append(
                {"unit": unit, "source_id": source_id, "input_digest": digest_text(prompt), "output": output}
            )

    @property
    def records(self) -> list[dict]:
        return list(self._records)


@dataclass
class UnitRunner:
    provider: Provider
    templates: Mapping[str, PromptTemplate]
    strict: bool = False
    tracer: Tracer | None = None
    repairs: int = field(default=0, init=False)

    def template(self, unit: str) -> PromptTemplate:
        try:
            return self.templates[unit]
        except KeyError:
            raise ConfigError(f"no prompt template for unit {unit!r}") from None

    def run(
        self,
        unit: str,
        bindings: Mapping[str, str],
        parse: Callable[[str], T],
        source_id: str | None = None,
    ) -> T:
        template = self.template(unit)
        prompt = render(template, bindings)
        raw = self._call(unit, prompt, source_id)
        try:
            return parse(raw)
        except MalformedOutput as first:
            log.warning("unit %s returned malformed output (%s); retrying with repair note", unit, first)
            self.repairs += 1
            prompt = render(template, bindings, repair=True)
            raw = self._call(unit, prompt, source_id)
            return parse(raw)

    def _call(self, unit: str, prompt: str, source_id: str | None) -> str:
        response = self.provider.complete(ProviderRequest.for_unit(unit, prompt))
        if self.tracer is not None:
            self.tracer.record(unit, source_id, prompt, response.raw_text)
        return response.raw_text
