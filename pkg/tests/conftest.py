import sys

import pytest

from dstforge import shipped_schema
from dstforge.corpus import Dialogue, TurnAnnotation, Utterance
from dstforge.schema import DialogueState, ValueInstance
from dstforge.synth import SynthSpec, generate


def example_state() -> DialogueState:
    head = ValueInstance("head feels painful", {"extent": "sometimes", "if_exists": "true"})
    return DialogueState(intents={"describe"}, fields={"symptom": [head], "disease": []})


def example_dialogue() -> Dialogue:
    turns = [
        Utterance("patient", "I feel uncomfortable."),
        Utterance("doctor", "What's wrong with you?"),
        Utterance("patient", "My head sometimes feels painful."),
    ]
    return Dialogue("example", turns, {2: TurnAnnotation({"describe"}, example_state())})


@pytest.fixture(scope="session")
def schema_en():
    return shipped_schema("en")


@pytest.fixture(scope="session")
def schema_zh():
    return shipped_schema("zh")


@pytest.fixture
def example():
    return example_dialogue()


@pytest.fixture(scope="session")
def synth_zh(schema_zh):
    return generate(SynthSpec(dialogues=20, seed=3), schema_zh)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
