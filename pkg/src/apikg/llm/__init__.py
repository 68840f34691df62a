from .parsing import parse_fields, parse_fusion_output, parse_list_output
from .providers import (
    API_KEY_ENV,
    CallbackProvider,
    FixtureProvider,
    HttpProvider,
    Provider,
    ProviderRequest,
    ProviderResponse,
    RecordingProvider,
    RequestBudget,
    max_tokens_for,
    prompt_hash,
)
from .runner import Tracer, UnitRunner
from .templates import Example, PromptTemplate, Slot, Term, load_template, load_templates, render

__all__ = [
    "API_KEY_ENV",
    "CallbackProvider",
    "Example",
    "FixtureProvider",
    "HttpProvider",
    "PromptTemplate",
    "Provider",
    "ProviderRequest",
    "ProviderResponse",
    "RecordingProvider",
    "RequestBudget",
    "Slot",
    "Term",
    "Tracer",
    "UnitRunner",
    "load_template",
    "load_templates",
    "max_tokens_for",
    "parse_fields",
    "parse_fusion_output",
    "parse_list_output",
    "prompt_hash",
    "render",
]
