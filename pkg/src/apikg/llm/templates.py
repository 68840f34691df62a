"""Structured prompt templates (@Persona / @ContextControl / @Instruction).

Templates are stored as YAML documents in ``<unit>.prompt`` files. Input
slots are referenced from commands and rules as ``{{name}}``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import yaml

from ..errors import MissingBinding, TemplateError, UnknownSlot

SLOT_RE = re.compile(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\}")

REPAIR_INSTRUCTION = (
    "Your previous answer did not follow the required format. "
    "Reply again using exactly the output format shown in @Example, with no other text."
)

_INDENT = "    "


@dataclass(frozen=True)
class Term:
    term: str
    definition: str


@dataclass(frozen=True)
class Slot:
    name: str
    description: str = ""


@dataclass(frozen=True)
class Example:
    input: str
    output: str


@dataclass(frozen=True)
class PromptTemplate:
    unit: str
    description: str
    terminology: tuple[Term, ...] = ()
    context_rules: tuple[str, ...] = ()
    input_variables: tuple[Slot, ...] = ()
    commands: tuple[str, ...] = ()
    output_variable: str = "output"
    rules: tuple[str, ...] = ()
    examples: tuple[Example, ...] = field(default=())

    def __post_init__(self):
        if not self.commands:
            raise TemplateError(f"template {self.unit!r} needs at least one command")
        if not self.examples:
            raise TemplateError(f"template {self.unit!r} needs at least one example")
        declared = self.slot_names
        if len(set(declared)) != len(declared):
            raise TemplateError(f"template {self.unit!r} declares a slot twice")
        referenced = self.referenced_slots()
        undeclared = referenced - set(declared)
        if undeclared:
            raise TemplateError(
                f"template {self.unit!r} references undeclared slots: {sorted(undeclared)}"
            )
        unused = set(declared) - referenced
        if unused:
            raise TemplateError(f"template {self.unit!r} never references slots: {sorted(unused)}")

    @property
    def slot_names(self) -> list[str]:
        return [s.name for s in self.input_variables]

    def referenced_slots(self) -> set[str]:
        found: set[str] = set()
        for line in (*self.commands, *self.rules):
            found.update(SLOT_RE.findall(line))
        return found

    @classmethod
    def from_dict(cls, unit: str, data: Mapping) -> "PromptTemplate":
        try:
            persona = data.get("persona") or {}
            context = data.get("context_control") or {}
            instr = data["instruction"]
            return cls(
                unit=unit,
                description=str(persona.get("description", "")).strip(),
                terminology=tuple(Term(t["term"], t["definition"]) for t in persona.get("terminology") or ()),
                context_rules=tuple(context.get("rules") or ()),
                input_variables=tuple(
                    Slot(v["name"], v.get("description", "")) if isinstance(v, Mapping) else Slot(str(v))
                    for v in instr.get("input_variables") or ()
                ),
                commands=tuple(instr.get("commands") or ()),
                output_variable=str(instr.get("output_variable", "output")),
                rules=tuple(instr.get("rules") or ()),
                examples=tuple(
                    Example(str(e["input"]).rstrip("\n"), str(e["output"]).rstrip("\n"))
                    for e in instr.get("examples") or ()
                ),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise TemplateError(f"template {unit!r} is malformed: {exc}") from exc


def load_template(path: str | Path) -> PromptTemplate:
    path = Path(path)
    unit = path.name[: -len(".prompt")] if path.name.endswith(".prompt") else path.stem
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise TemplateError(f"{path}: {exc}") from exc
    if not isinstance(data, Mapping):
        raise TemplateError(f"{path}: expected a mapping at top level")
    return PromptTemplate.from_dict(unit, data)


def load_templates(directory: str | Path) -> dict[str, PromptTemplate]:
    directory = Path(directory)
    if not directory.is_dir():
        raise TemplateError(f"template directory {directory} does not exist")
    return {t.unit: t for t in (load_template(p) for p in sorted(directory.glob("*.prompt")))}


def _block(name: str, lines: list[str], depth: int) -> list[str]:
    pad = _INDENT * depth
    out = [f"{pad}@{name} {{"]
    for line in lines:
        for sub in line.split("\n"):
            out.append(f"{pad}{_INDENT}{sub}" if sub else "")
    out.append(f"{pad}}}")
    return out


def _substitute(text: str, bindings: Mapping[str, str]) -> str:
    return SLOT_RE.sub(lambda m: bindings[m.group(1)], text)


def render(template: PromptTemplate, bindings: Mapping[str, str], *, repair: bool = False) -> str:
    declared = set(template.slot_names)
    for name in bindings:
        if name not in declared:
            raise UnknownSlot(name)
    for name in template.slot_names:
        if name not in bindings:
            raise MissingBinding(name)

    persona: list[str] = []
    persona += _block("Description", [template.description], 1)
    if template.terminology:
        persona += _block("Terminology", [f"@Term {t.term}: {t.definition}" for t in template.terminology], 1)

    instruction: list[str] = []
    instruction += _block(
        "InputVariable",
        [f"{s.name}: {s.description}" if s.description else s.name for s in template.input_variables],
        1,
    )
    instruction += _block(
        "Commands",
        [f"@Command {i}. {_substitute(c, bindings)}" for i, c in enumerate(template.commands, 1)],
        1,
    )
    instruction += _block("OutputVariable", [template.output_variable], 1)
    if template.rules:
        instruction += _block("Rules", [f"@Rule {_substitute(r, bindings)}" for r in template.rules], 1)
    for i, ex in enumerate(template.examples, 1):
        instruction += _block(f"Example {i}", [f"@Input:\n{ex.input}", f"@Output:\n{ex.output}"], 1)

    lines = ["@Persona {", *persona, "}"]
    if template.context_rules:
        lines += _block("ContextControl", [f"@Rule {r}" for r in template.context_rules], 0)
    lines += ["@Instruction {", *instruction, "}"]
    if repair:
        lines.append(REPAIR_INSTRUCTION)
    return "\n".join(lines) + "\n"
