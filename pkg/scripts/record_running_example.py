"""Regenerate responses.json and golden/ for the running-example fixture.

The answers below are written by hand. Each prompt is routed to its answer by
unit name and by which corpus text it embeds; the exchange is recorded under
the prompt's hash, then the pipeline is replayed from the recording to produce
the golden artifacts.

    python scripts/record_running_example.py
"""

from __future__ import annotations

import re
import shutil
import tempfile
from pathlib import Path

from apikg.corpus import read_corpus
from apikg.fixtures import GOLDEN_FILES, running_example_config, running_example_dir
from apikg.llm import CallbackProvider, RecordingProvider
from apikg.llm.templates import REPAIR_INSTRUCTION
from apikg.pipeline import Pipeline

PER_TEXT = {
    ("entity_extraction", "s1"): "Collections.sort()\nArrays.asList()",
    ("relation_extraction", "s1"): "Collections.sort() | relies on | Arrays.asList()",
    ("entity_type_labeling", "s1"): "Collections.sort(): static method\nArrays.asList(): static method",
    ("entity_extraction", "s2"): "Arrays\nCollections",
    ("relation_extraction", "s2"): "Arrays | outperforms | Collections",
    ("entity_type_labeling", "s2"): "Arrays: utility class\nCollections: utility class",
    ("entity_extraction", "s3"): "HashMap\nHashtable",
    ("relation_extraction", "s3"): "HashMap | is similar to | Hashtable",
    ("entity_type_labeling", "s3"): "HashMap: concrete class\nHashtable: concrete class",
    ("entity_extraction", "s4"): "Iterator.remove()\nIterator.next()",
    ("relation_extraction", "s4"): "Iterator.remove() | depends on | Iterator.next()",
    # first answer ignores the format; the repair retry gets the second one
    ("entity_type_labeling", "s4"): "Both of these are instance methods of Iterator.",
    ("entity_type_labeling", "s4", "repair"): "Iterator.remove(): instance method\nIterator.next(): instance method",
    ("entity_extraction", "s5"): "StringBuilder\nStringBuffer",
    ("relation_extraction", "s5"): "StringBuilder | is preferred over | StringBuffer",
    ("entity_type_labeling", "s5"): "StringBuilder: concrete class\nStringBuffer: thread-safe class",
    ("schema_entity_extraction", "t1"): "Collections.sort: method\nArrayList.asList: method",
    ("schema_relation_extraction", "t1"): "Collections.sort | relies on | ArrayList.asList | dependency",
    ("schema_entity_extraction", "t2"): "ArrayList: class\nVector: class",
    ("schema_relation_extraction", "t2"): "ArrayList | is similar to | Vector | equivalence",
    ("schema_entity_extraction", "t3"): "ArrayList: class\nCollections.reverse: method\nArrayDeque: class",
    ("schema_relation_extraction", "t3"): (
        "ArrayList | similar to | Collections.reverse | equivalence\n"
        "ArrayDeque | outperforms | Collections.reverse | preference"
    ),
}

GLOBAL = {
    "entity_type_fusion": (
        "class: [concrete class, thread-safe class, utility class] | A named type that defines state and "
        "behaviour and is used through its instances or its static members.\n"
        "method: [instance method, static method] | A named operation exposed by a class or by its instances."
    ),
    "relation_type_fusion": (
        "dependency: [depends on, relies on] | The head needs the tail in order to do its work.\n"
        "preference: [is preferred over, outperforms] | The head is the better choice over the tail for some "
        "goal, such as speed, safety or convenience.\n"
        "equivalence: [is similar to] | The head and the tail do the same job, or nearly the same job."
    ),
}


def main() -> None:
    root = running_example_dir()
    texts = {}
    for name in ("seed.jsonl", "target.jsonl"):
        texts.update({u.id: u.content for u in read_corpus(root / "corpus" / name)})

    def answer(request):
        unit, prompt = request.unit_name, request.rendered_prompt
        if unit in GLOBAL:
            return GLOBAL[unit]
        # examples may quote corpus sentences, so only look at the bound text
        bound = re.search(r"Read the following text: (.*)", prompt).group(1)
        sources = [sid for sid, text in texts.items() if bound.startswith(text)]
        if len(sources) != 1:
            raise RuntimeError(f"{unit}: cannot tell which text the prompt is about ({sources})")
        key = (unit, sources[0])
        if REPAIR_INSTRUCTION in prompt:
            key = (*key, "repair")
        return PER_TEXT[key]

    recorder = RecordingProvider(CallbackProvider(answer))
    with tempfile.TemporaryDirectory() as tmp:
        Pipeline(running_example_config(tmp), recorder).run()
    recorder.dump(root / "responses.json")

    with tempfile.TemporaryDirectory() as tmp:
        Pipeline(running_example_config(tmp)).run()
        golden = root / "golden"
        golden.mkdir(exist_ok=True)
        for name in GOLDEN_FILES:
            shutil.copyfile(Path(tmp) / name, golden / name)
    print(f"wrote {len(recorder.records)} responses and {len(GOLDEN_FILES)} golden files under {root}")


if __name__ == "__main__":
    main()
