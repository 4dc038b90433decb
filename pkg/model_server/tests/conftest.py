from pathlib import Path

import pytest

from model_server.backends import NgramBackend

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def corpus_lines():
    return [line for line in (DATA / "corpus.txt").read_text().splitlines()
            if line.strip()]


@pytest.fixture(scope="session")
def backend(corpus_lines):
    return NgramBackend(corpus_lines)


@pytest.fixture()
def client(backend):
    from fastapi.testclient import TestClient

    from model_server.app import create_app

    with TestClient(create_app(backend)) as test_client:
        yield test_client
