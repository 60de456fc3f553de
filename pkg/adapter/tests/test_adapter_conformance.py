"""Wire-protocol conformance: the service must satisfy the client's schema.

Two angles: replay a committed set of golden requests and validate every
response with the groundsight client-side validator, then run a real
uvicorn server and drive it with the groundsight RemoteBackend client.
"""

import json
import socket
import threading
import time
from pathlib import Path

import pytest
import uvicorn
from fastapi.testclient import TestClient

from groundsight.backends import (
    BackendRequest,
    Op,
    RemoteBackend,
    call_judge,
    response_from_payload,
)
from groundsight.images import ImageRef

from testimages import png_bytes
from groundsight_adapter.config import all_stub_config
from groundsight_adapter.service import create_app

GOLDEN_PATH = Path(__file__).parent / "fixtures" / "golden_requests.json"


def load_goldens():
    with GOLDEN_PATH.open(encoding="utf-8") as fh:
        return json.load(fh)


GOLDENS = load_goldens()


@pytest.fixture(scope="module")
def golden_client():
    config = all_stub_config(embed_dim=GOLDENS["embed_dim"], request_timeout=None)
    with TestClient(create_app(config)) as client:
        yield client


class TestGoldenReplay:
    @pytest.mark.parametrize(
        "entry", GOLDENS["entries"], ids=[e["op"] for e in GOLDENS["entries"]]
    )
    def test_response_matches_golden_and_schema(self, golden_client, entry):
        response = golden_client.post(entry["path"], json=entry["request"])
        assert response.status_code == 200
        payload = response.json()
        assert payload == entry["expected_response"]
        # the exact validator the pipeline client runs on live responses
        response_from_payload(Op(entry["op"]), payload)

    def test_goldens_cover_every_endpoint(self):
        assert sorted(e["op"] for e in GOLDENS["entries"]) == [
            "answer",
            "embed",
            "judge",
            "localize",
            "summarize",
        ]


def free_tcp_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture(scope="module")
def live_server():
    """Real uvicorn server in a daemon thread, torn down after the module."""
    config = all_stub_config(embed_dim=8, request_timeout=None)
    port = free_tcp_port()
    server = uvicorn.Server(
        uvicorn.Config(create_app(config), host="127.0.0.1", port=port, log_level="warning")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10.0
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("server did not start within 10s")
        time.sleep(0.02)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10.0)


@pytest.fixture(scope="module")
def remote(live_server):
    with RemoteBackend(live_server, expected_embed_dim=8) as backend:
        yield backend


def image_ref(name="probe", **png_kwargs) -> ImageRef:
    return ImageRef(image_id=name, data=png_bytes(**png_kwargs))


class TestRemoteBackendEndToEnd:
    def test_answer(self, remote):
        response = remote.call(
            BackendRequest(
                op=Op.ANSWER,
                image=image_ref(),
                system_prompt="You describe images.",
                user_prompt="What is shown?",
            )
        )
        assert response.text.startswith("stub response ")

    def test_localize(self, remote):
        response = remote.call(
            BackendRequest(
                op=Op.LOCALIZE,
                image=image_ref(width=100, height=80),
                text_query="red square",
            )
        )
        assert response.bbox.as_tuple() == (25.0, 20.0, 75.0, 60.0)
        assert response.confidence == 0.9

    def test_embed_dim_checked_by_client(self, remote):
        response = remote.call(BackendRequest(op=Op.EMBED, image=image_ref()))
        assert len(response.embedding) == 8
        norm = sum(x * x for x in response.embedding) ** 0.5
        assert abs(norm - 1.0) <= 1e-5

    def test_embed_stable_across_transport(self, remote):
        a = remote.call(BackendRequest(op=Op.EMBED, image=image_ref()))
        b = remote.call(BackendRequest(op=Op.EMBED, image=image_ref()))
        assert a.embedding == b.embedding

    def test_judge_verdicts(self, remote):
        assert call_judge(remote, "What color?", "red", "The image is red.") is True
        assert call_judge(remote, "What color?", "red", "The image is blue.") is False
