import json
import shutil

import pytest

from apikg.errors import BudgetExceeded, ConfigError
from apikg.fixtures import running_example_config, running_example_dir
from apikg.llm import FixtureProvider
from apikg.pipeline import (
    KG_RELIABLE_FILE,
    METRICS_FILE,
    SCHEMA_FILE,
    Pipeline,
    StageArtifact,
    load_config,
)


@pytest.fixture
def fixture_file():
    return running_example_dir() / "responses.json"


def test_resume_makes_no_provider_calls(tmp_path, fixture_file):
    first = FixtureProvider.from_file(fixture_file)
    Pipeline(running_example_config(tmp_path), first).run()
    assert first.calls > 0

    second = FixtureProvider.from_file(fixture_file)
    pipe = Pipeline(running_example_config(tmp_path), second)
    pipe.run()
    assert second.calls == 0
    assert pipe.executed == [] and pipe.skipped == ["explore", "construct", "filter", "eval"]


def test_deleting_filter_output_reruns_only_filter(tmp_path, fixture_file):
    Pipeline(running_example_config(tmp_path)).run()
    before = (tmp_path / KG_RELIABLE_FILE).read_bytes()
    (tmp_path / KG_RELIABLE_FILE).unlink()
    provider = FixtureProvider.from_file(fixture_file)
    pipe = Pipeline(running_example_config(tmp_path), provider)
    pipe.run()
    assert pipe.executed == ["filter"]
    assert provider.calls == 0
    assert (tmp_path / KG_RELIABLE_FILE).read_bytes() == before


def test_threshold_change_reruns_filter_and_eval(tmp_path):
    Pipeline(running_example_config(tmp_path)).run()
    pipe = Pipeline(running_example_config(tmp_path, thresholds={"lift": 0.5}))
    pipe.run()
    assert pipe.executed == ["filter", "eval"]
    rows = json.loads((tmp_path / METRICS_FILE).read_text())
    assert all(r["kept"] for r in rows)


def test_force_reruns(tmp_path):
    Pipeline(running_example_config(tmp_path)).run()
    pipe = Pipeline(running_example_config(tmp_path))
    pipe.explore(force=True)
    assert pipe.executed == ["explore"]


def test_manifest_records_digests(tmp_path):
    Pipeline(running_example_config(tmp_path)).explore()
    manifest = StageArtifact.load(tmp_path, "explore")
    assert SCHEMA_FILE in manifest.outputs and "seed_corpus" in manifest.input_digests
    assert (tmp_path / ".stages" / "explore.json").is_file()


def test_budget_aborts_run(tmp_path):
    with pytest.raises(BudgetExceeded):
        Pipeline(running_example_config(tmp_path, provider={"budget": 3})).run()
    assert not (tmp_path / SCHEMA_FILE).exists()


def test_two_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    Pipeline(running_example_config(a)).run()
    Pipeline(running_example_config(b)).run()
    names = sorted(p.name for p in a.iterdir() if p.is_file())
    assert names == sorted(p.name for p in b.iterdir() if p.is_file())
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_stages_require_predecessors(tmp_path):
    with pytest.raises(ConfigError, match="explore"):
        Pipeline(running_example_config(tmp_path)).construct()


def test_eval_without_gold_is_config_error(tmp_path):
    cfg = running_example_config(tmp_path)
    cfg.gold = None
    with pytest.raises(ConfigError):
        Pipeline(cfg).eval()


def test_config_rejects_unknown_keys_and_bad_values(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("colour: blue\n")
    with pytest.raises(ConfigError, match="colour"):
        load_config(path)
    path.write_text("provider: {mode: carrier-pigeon}\n")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("eval_thresholds: [0.0]\nprovider: {mode: fixture, fixtures: r.json}\n")
    (tmp_path / "r.json").write_text("[]")
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_paths_relative_to_file(tmp_path):
    shutil.copytree(running_example_dir(), tmp_path / "ex", ignore=shutil.ignore_patterns("out", "golden"))
    cfg = load_config(tmp_path / "ex" / "config.yaml")
    assert cfg.seed_corpus == (tmp_path / "ex" / "corpus" / "seed.jsonl").resolve()
    assert cfg.out_dir == (tmp_path / "ex" / "out").resolve()
