import pytest
from fastapi.testclient import TestClient

from groundsight_adapter.config import all_stub_config
from groundsight_adapter.service import create_app


@pytest.fixture
def stub_config():
    return all_stub_config(embed_dim=8, request_timeout=None)


@pytest.fixture
def client(stub_config):
    # context manager keeps one event loop for all requests, so the
    # concurrency semaphore is exercised the same way the server runs it
    with TestClient(create_app(stub_config), raise_server_exceptions=False) as c:
        yield c
