from __future__ import annotations

import pytest

from flipfeed.demo import default_pack_data
from flipfeed.harness import Harness, HarnessConfig
from flipfeed.packs import ingest_pack
from flipfeed.store import Store

from helpers import MockChatServer, tiny_pack_data


@pytest.fixture(scope="session")
def harness():
    h = Harness(HarnessConfig())
    yield h
    h.close()


@pytest.fixture(scope="session")
def fixture_pack(harness):
    """The bundled 3-problem, 30-program pack, compiled and verified once."""
    return ingest_pack(default_pack_data(), harness)


@pytest.fixture(scope="session")
def tiny_pack(harness):
    return ingest_pack(tiny_pack_data(), harness)


@pytest.fixture
def store(tmp_path):
    s = Store(tmp_path / "store.jsonl")
    yield s
    s.close()


@pytest.fixture
def chat_server():
    """Factory for mock chat-completion servers; all get shut down at teardown."""
    servers: list[MockChatServer] = []

    def make(responder) -> MockChatServer:
        server = MockChatServer(responder)
        servers.append(server)
        return server

    yield make
    for server in servers:
        server.close()
