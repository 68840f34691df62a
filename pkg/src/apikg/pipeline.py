"""Stage orchestration: explore -> construct -> filter -> eval, resumable by content digest.

Stages talk only through files in the output directory. Each stage writes a
manifest under ``.stages/`` recording the digests of its inputs and outputs; a
stage is skipped when its inputs are unchanged and its outputs are intact.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Callable

import yaml

from . import construct as construct_mod
from . import explore as explore_mod
from .corpus import filter_corpus, read_corpus
from .errors import ConfigError
from .evaluation import (
    DEFAULT_EVAL_THRESHOLDS,
    GoldSet,
    HttpEmbedder,
    LexicalEmbedder,
    SentenceTransformerEmbedder,
    load_annotations,
    score,
    type_triple_accuracy,
)
from .filtering import COUNT_MODES, Thresholds, filter_kg, write_metrics_report
from .llm import FixtureProvider, HttpProvider, RequestBudget, Tracer, UnitRunner, load_templates
from .llm.providers import API_KEY_ENV
from .model import KGSchema, KnowledgeGraph

log = logging.getLogger(__name__)

STAGES = ("explore", "construct", "filter", "eval")

SCHEMA_FILE = "schema.json"
KG_UNRELIABLE_FILE = "kg_unreliable.json"
SCHEMA_VALIDATED_FILE = "schema_validated.json"
KG_RELIABLE_FILE = "kg_reliable.json"
METRICS_FILE = "metrics.json"
EVAL_JSON_FILE = "eval_report.json"
EVAL_TEXT_FILE = "eval_report.txt"
EXPLORE_TRACE_FILE = "explore_trace.jsonl"
CONSTRUCT_TRACE_FILE = "construct_trace.jsonl"
MANIFEST_DIR = ".stages"

EXPLORE_UNITS = (
    explore_mod.ENTITY_EXTRACTION,
    explore_mod.RELATION_EXTRACTION,
    explore_mod.ENTITY_TYPE_LABELING,
    explore_mod.ENTITY_TYPE_FUSION,
    explore_mod.RELATION_TYPE_FUSION,
)
CONSTRUCT_UNITS = (construct_mod.SCHEMA_ENTITY_EXTRACTION, construct_mod.SCHEMA_RELATION_EXTRACTION)


def default_template_dir() -> Path:
    return Path(str(resources.files("apikg").joinpath("templates")))


@dataclass
class ProviderSettings:
    mode: str = "fixture"
    fixtures: Path | None = None
    endpoint: str | None = None
    model: str = "gpt-4o"
    max_in_flight: int = 4
    budget: int | None = None
    timeout: float = 60.0
    max_attempts: int = 3


@dataclass
class EmbedderSettings:
    kind: str = "lexical"
    model: str | None = None
    endpoint: str | None = None
    relation_only: bool = False


@dataclass
class PipelineConfig:
    out_dir: Path = Path("out")
    seed_corpus: Path | None = None
    target_corpus: Path | None = None
    gold: Path | None = None
    annotations: Path | None = None
    template_dir: Path = field(default_factory=default_template_dir)
    provider: ProviderSettings = field(default_factory=ProviderSettings)
    thresholds: Thresholds = field(default_factory=Thresholds)
    inclusive: bool = False
    count_mode: str = "occurrence"
    eval_thresholds: tuple[float, ...] = DEFAULT_EVAL_THRESHOLDS
    embedder: EmbedderSettings = field(default_factory=EmbedderSettings)
    trace: bool = False
    strict: bool = False

    def validate(self) -> None:
        if self.provider.mode not in ("fixture", "http"):
            raise ConfigError(f"provider mode must be 'fixture' or 'http', got {self.provider.mode!r}")
        if self.provider.mode == "fixture" and self.provider.fixtures is None:
            raise ConfigError("fixture mode needs provider.fixtures")
        if self.provider.mode == "http" and not self.provider.endpoint:
            raise ConfigError("http mode needs provider.endpoint")
        if self.provider.max_in_flight < 1:
            raise ConfigError("provider.max_in_flight must be at least 1")
        if self.provider.budget is not None and self.provider.budget < 0:
            raise ConfigError("provider.budget must be non-negative")
        if self.count_mode not in COUNT_MODES:
            raise ConfigError(f"count_mode must be one of {COUNT_MODES}")
        for t in self.eval_thresholds:
            if not 0 < t <= 1:
                raise ConfigError(f"eval thresholds must lie in (0, 1], got {t}")
        if self.embedder.kind not in ("lexical", "sentence-transformers", "http"):
            raise ConfigError(f"unknown embedder kind {self.embedder.kind!r}")
        for label, path in (
            ("seed corpus", self.seed_corpus),
            ("target corpus", self.target_corpus),
            ("gold file", self.gold),
            ("annotation file", self.annotations),
            ("fixture file", self.provider.fixtures),
        ):
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{label} {path} does not exist")
        if not Path(self.template_dir).is_dir():
            raise ConfigError(f"template directory {self.template_dir} does not exist")


def load_config(path: str | Path | None, overrides: dict | None = None) -> PipelineConfig:
    """Build a config from a YAML file (paths relative to it) plus flag overrides.

    ``overrides`` uses the same nested keys as the file; values that are
    ``None`` are ignored so unset flags never mask the file.
    """
    raw: dict = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must be a mapping")
        base = path.parent
    _merge(raw, overrides or {})

    def p(value, rel_to=base):
        return None if value is None else (Path(rel_to) / Path(value)).resolve()

    known = {
        "out_dir", "seed_corpus", "target_corpus", "gold", "annotations", "template_dir",
        "provider", "thresholds", "inclusive", "count_mode", "eval_thresholds", "embedder",
        "trace", "strict",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        prov = dict(raw.get("provider") or {})
        if "fixtures" in prov:
            prov["fixtures"] = p(prov["fixtures"])
        th = raw.get("thresholds") or {}
        cfg = PipelineConfig(
            out_dir=p(raw.get("out_dir", "out")),
            seed_corpus=p(raw.get("seed_corpus")),
            target_corpus=p(raw.get("target_corpus")),
            gold=p(raw.get("gold")),
            annotations=p(raw.get("annotations")),
            template_dir=p(raw["template_dir"]) if raw.get("template_dir") else default_template_dir(),
            provider=ProviderSettings(**prov),
            thresholds=Thresholds(
                float(th.get("support", 0.005)), float(th.get("confidence", 0.02)), float(th.get("lift", 1.0))
            ),
            inclusive=bool(raw.get("inclusive", False)),
            count_mode=str(raw.get("count_mode", "occurrence")),
            eval_thresholds=tuple(float(x) for x in raw.get("eval_thresholds", DEFAULT_EVAL_THRESHOLDS)),
            embedder=EmbedderSettings(**(raw.get("embedder") or {})),
            trace=bool(raw.get("trace", False)),
            strict=bool(raw.get("strict", False)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    cfg.validate()
    return cfg


def _merge(dst: dict, src: dict) -> None:
    for k, v in src.items():
        if v is None:
            continue
        if isinstance(v, dict):
            node = dst.get(k)
            if not isinstance(node, dict):
                node = dst[k] = {}
            _merge(node, v)
        else:
            dst[k] = v


def file_digest(path: Path | None) -> str | None:
    if path is None:
        return None
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _value_digest(value) -> str:
    return hashlib.sha256(json.dumps(value, sort_keys=True, default=str).encode()).hexdigest()


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class StageArtifact:
    stage: str
    input_digests: dict[str, str | None]
    outputs: dict[str, str]
    timestamp: str

    def save(self, out_dir: Path) -> None:
        write_atomic(out_dir / MANIFEST_DIR / f"{self.stage}.json", json.dumps(asdict(self), indent=2) + "\n")

    @classmethod
    def load(cls, out_dir: Path, stage: str) -> "StageArtifact | None":
        path = out_dir / MANIFEST_DIR / f"{stage}.json"
        if not path.is_file():
            return None
        try:
            return cls(**json.loads(path.read_text(encoding="utf-8")))
        except (ValueError, TypeError):
            return None

    def is_current(self, out_dir: Path, input_digests: dict) -> bool:
        if self.input_digests != input_digests:
            return False
        for name, digest in self.outputs.items():
            path = out_dir / name
            if not path.is_file() or file_digest(path) != digest:
                return False
        return True


class Pipeline:
    """Runs stages against one config; one provider and one request budget per instance."""

    def __init__(self, config: PipelineConfig, provider=None):
        self.config = config
        self.out = Path(config.out_dir)
        self.budget = RequestBudget(config.provider.budget)
        self._provider = provider
        self._templates = None
        self.executed: list[str] = []
        self.skipped: list[str] = []

    # -- shared resources -------------------------------------------------

    @property
    def provider(self):
        if self._provider is None:
            ps = self.config.provider
            if ps.mode == "fixture":
                self._provider = FixtureProvider.from_file(ps.fixtures, self.budget)
            else:
                self._provider = HttpProvider(
                    ps.endpoint,
                    ps.model,
                    api_key=os.environ.get(API_KEY_ENV),
                    timeout=ps.timeout,
                    max_attempts=ps.max_attempts,
                    max_in_flight=ps.max_in_flight,
                    budget=self.budget,
                )
        return self._provider

    @property
    def templates(self):
        if self._templates is None:
            self._templates = load_templates(self.config.template_dir)
        return self._templates

    def _runner(self, tracer: Tracer | None) -> UnitRunner:
        return UnitRunner(self.provider, self.templates, strict=self.config.strict, tracer=tracer)

    def _provider_identity(self) -> dict:
        ps = self.config.provider
        if ps.mode == "fixture":
            return {"mode": "fixture", "fixtures": file_digest(ps.fixtures)}
        return {"mode": "http", "endpoint": ps.endpoint, "model": ps.model}

    def _template_digest(self, units) -> str:
        d = Path(self.config.template_dir)
        return _value_digest({u: file_digest(d / f"{u}.prompt") if (d / f"{u}.prompt").is_file() else None for u in units})

    # -- stage machinery --------------------------------------------------

    def _stage(self, name: str, inputs: dict, produce: Callable[[], dict[str, str]], force: bool = False) -> bool:
        manifest = StageArtifact.load(self.out, name)
        if not force and manifest is not None and manifest.is_current(self.out, inputs):
            log.info("stage %s up to date, skipping", name)
            self.skipped.append(name)
            return False
        log.info("running stage %s", name)
        outputs = produce()
        for fname, text in outputs.items():
            write_atomic(self.out / fname, text)
        StageArtifact(
            name,
            inputs,
            {fname: file_digest(self.out / fname) for fname in outputs},
            datetime.now(timezone.utc).isoformat(timespec="seconds"),
        ).save(self.out)
        self.executed.append(name)
        return True

    def _require(self, fname: str, stage: str) -> Path:
        path = self.out / fname
        if not path.is_file():
            raise ConfigError(f"{path} is missing; run the {stage} stage first")
        return path

    @staticmethod
    def _trace_text(tracer: Tracer, units, source_order: list[str]) -> str:
        pos = {sid: i for i, sid in enumerate(source_order)}
        records = sorted(
            tracer.records,
            key=lambda r: (
                units.index(r["unit"]) if r["unit"] in units else len(units),
                pos.get(r["source_id"], len(pos)),
                r["input_digest"],
            ),
        )
        return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)

    # -- stages -----------------------------------------------------------

    def explore(self, force: bool = False) -> bool:
        cfg = self.config
        if cfg.seed_corpus is None:
            raise ConfigError("no seed corpus configured")
        inputs = {
            "seed_corpus": file_digest(cfg.seed_corpus),
            "templates": self._template_digest(EXPLORE_UNITS),
            "provider": _value_digest(self._provider_identity()),
            "options": _value_digest({"strict": cfg.strict, "trace": cfg.trace}),
        }

        def produce():
            seeds = read_corpus(cfg.seed_corpus)
            tracer = Tracer() if cfg.trace else None
            result = explore_mod.explore(self._runner(tracer), seeds, cfg.provider.max_in_flight)
            outputs = {SCHEMA_FILE: result.schema.dumps()}
            if tracer is not None:
                outputs[EXPLORE_TRACE_FILE] = self._trace_text(tracer, EXPLORE_UNITS, seeds.ids())
            return outputs

        return self._stage("explore", inputs, produce, force)

    def construct(self, force: bool = False) -> bool:
        cfg = self.config
        if cfg.target_corpus is None:
            raise ConfigError("no target corpus configured")
        schema_path = self._require(SCHEMA_FILE, "explore")
        inputs = {
            "target_corpus": file_digest(cfg.target_corpus),
            "schema": file_digest(schema_path),
            "templates": self._template_digest(CONSTRUCT_UNITS),
            "provider": _value_digest(self._provider_identity()),
            "options": _value_digest({"strict": cfg.strict, "trace": cfg.trace}),
        }

        def produce():
            schema = KGSchema.load(schema_path)
            corpus = read_corpus(cfg.target_corpus)
            kept = filter_corpus(corpus)
            log.info("corpus filter kept %d of %d texts", len(kept), len(corpus))
            tracer = Tracer() if cfg.trace else None
            kg = construct_mod.construct(self._runner(tracer), kept, schema, cfg.provider.max_in_flight)
            outputs = {KG_UNRELIABLE_FILE: kg.dumps()}
            if tracer is not None:
                outputs[CONSTRUCT_TRACE_FILE] = self._trace_text(tracer, CONSTRUCT_UNITS, kept.ids())
            return outputs

        return self._stage("construct", inputs, produce, force)

    def filter(self, force: bool = False) -> bool:
        cfg = self.config
        schema_path = self._require(SCHEMA_FILE, "explore")
        kg_path = self._require(KG_UNRELIABLE_FILE, "construct")
        inputs = {
            "schema": file_digest(schema_path),
            "kg": file_digest(kg_path),
            "options": _value_digest(
                {"thresholds": asdict(cfg.thresholds), "inclusive": cfg.inclusive, "count_mode": cfg.count_mode}
            ),
        }

        def produce():
            schema = KGSchema.load(schema_path)
            result = filter_kg(schema, KnowledgeGraph.load(kg_path), cfg.thresholds, cfg.inclusive, cfg.count_mode)
            return {
                SCHEMA_VALIDATED_FILE: result.schema.dumps(),
                KG_RELIABLE_FILE: result.kg.dumps(),
                METRICS_FILE: json.dumps(result.report, indent=2, ensure_ascii=False) + "\n",
            }

        return self._stage("filter", inputs, produce, force)

    def _embedder(self):
        es = self.config.embedder
        if es.kind == "lexical":
            return LexicalEmbedder()
        if es.kind == "sentence-transformers":
            return SentenceTransformerEmbedder(es.model) if es.model else SentenceTransformerEmbedder()
        if not es.endpoint or not es.model:
            raise ConfigError("http embedder needs embedder.endpoint and embedder.model")
        return HttpEmbedder(es.endpoint, es.model, api_key=os.environ.get(API_KEY_ENV))

    def eval(self, force: bool = False) -> bool:
        cfg = self.config
        if cfg.gold is None:
            raise ConfigError("no gold file configured; eval needs one")
        if not Path(cfg.gold).is_file():
            raise ConfigError(f"gold file {cfg.gold} does not exist")
        kg_path = self._require(KG_RELIABLE_FILE, "filter")
        schema_path = self._require(SCHEMA_VALIDATED_FILE, "filter")
        inputs = {
            "kg": file_digest(kg_path),
            "schema": file_digest(schema_path),
            "gold": file_digest(cfg.gold),
            "annotations": file_digest(cfg.annotations),
            "options": _value_digest(
                {"thresholds": list(cfg.eval_thresholds), "embedder": asdict(cfg.embedder)}
            ),
        }

        def produce():
            report = score(
                KnowledgeGraph.load(kg_path),
                GoldSet.load(cfg.gold),
                cfg.eval_thresholds,
                self._embedder(),
                cfg.embedder.relation_only,
            )
            if cfg.annotations is not None:
                schema = KGSchema.load(schema_path)
                report.type_triple_accuracy = type_triple_accuracy(
                    schema.type_triples, load_annotations(cfg.annotations)
                )
            return {
                EVAL_JSON_FILE: json.dumps(report.to_json(), indent=2, ensure_ascii=False) + "\n",
                EVAL_TEXT_FILE: report.summary(),
            }

        return self._stage("eval", inputs, produce, force)

    def run(self) -> list[str]:
        self.explore()
        self.construct()
        self.filter()
        if self.config.gold is not None:
            self.eval()
        return list(self.executed)


def cmd_explore(config: PipelineConfig, provider=None) -> Path:
    Pipeline(config, provider).explore()
    return Path(config.out_dir) / SCHEMA_FILE


def cmd_construct(config: PipelineConfig, provider=None) -> Path:
    Pipeline(config, provider).construct()
    return Path(config.out_dir) / KG_UNRELIABLE_FILE


def cmd_filter(config: PipelineConfig) -> tuple[Path, Path, Path]:
    Pipeline(config).filter()
    out = Path(config.out_dir)
    return out / SCHEMA_VALIDATED_FILE, out / KG_RELIABLE_FILE, out / METRICS_FILE


def cmd_eval(config: PipelineConfig) -> Path:
    Pipeline(config).eval()
    return Path(config.out_dir) / EVAL_JSON_FILE


def cmd_run(config: PipelineConfig, provider=None) -> Pipeline:
    pipe = Pipeline(config, provider)
    pipe.run()
    return pipe
