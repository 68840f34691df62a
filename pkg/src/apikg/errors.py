"""Exception hierarchy shared by every stage.

Each family carries the CLI exit code it maps to.
"""

from __future__ import annotations


class ApiKGError(Exception):
    exit_code = 1


class ConfigError(ApiKGError):
    exit_code = 2


class ProviderError(ApiKGError):
    exit_code = 3


class DataError(ApiKGError):
    exit_code = 4


class ProviderUnavailable(ProviderError):
    pass


class FixtureMiss(ProviderError):
    def __init__(self, unit: str, prompt_hash: str):
        super().__init__(f"no recorded response for unit={unit!r} prompt_hash={prompt_hash}")
        self.unit = unit
        self.prompt_hash = prompt_hash


class BudgetExceeded(ProviderError):
    def __init__(self, budget: int):
        super().__init__(f"provider request budget of {budget} exhausted")
        self.budget = budget


class MissingBinding(ConfigError):
    def __init__(self, slot: str):
        super().__init__(f"no binding for slot {slot!r}")
        self.slot = slot


class UnknownSlot(ConfigError):
    def __init__(self, slot: str):
        super().__init__(f"binding for undeclared slot {slot!r}")
        self.slot = slot


class TemplateError(ConfigError):
    pass


class MalformedOutput(DataError):
    def __init__(self, message: str, raw: str = ""):
        excerpt = raw if len(raw) <= 200 else raw[:200] + "..."
        super().__init__(f"{message}: {excerpt!r}" if raw else message)
        self.raw = raw


class CorpusError(DataError):
    pass


class CoverageGap(DataError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__(f"fusion output does not cover: {', '.join(self.missing)}")


class UnknownType(DataError):
    def __init__(self, label: str):
        super().__init__(f"label {label!r} is not a schema type")
        self.label = label


class EmptyVocabulary(DataError):
    pass


class TypeMismatch(DataError):
    pass


class EmptyKG(DataError):
    pass


class MissingAnnotation(DataError):
    pass
