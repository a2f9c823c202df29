import json
from pathlib import Path

import pytest

from kgdedup.index import build_index
from kgdedup.kg import parse_ntriples
from kgdedup.schema import extract_domain_spec

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

EVENT_TYPE = "http://schema.org/Event"
EVENT_SHAPE = "https://example.org/ds/event"
E1234 = "https://dzt.example/entity/1234"
E5678 = "https://dzt.example/entity/5678"


@pytest.fixture(scope="session")
def events_text():
    return (FIXTURES / "events.nt").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def shape_text():
    return (FIXTURES / "event_shape.nt").read_text(encoding="utf-8")


@pytest.fixture()
def events_graph(events_text):
    return parse_ntriples(events_text)


@pytest.fixture()
def shape_graph(shape_text):
    return parse_ntriples(shape_text)


@pytest.fixture()
def event_spec(shape_graph):
    return extract_domain_spec(shape_graph, EVENT_SHAPE, depth=1)


@pytest.fixture()
def event_index(events_graph, event_spec):
    return build_index(events_graph, event_spec)
