#!/usr/bin/env python3
"""Regenerate the committed golden request/response set for the adapter.

Runs every endpoint of an all-stub service once and records the exact
request and response bodies. The conformance suite replays the requests
and requires byte-identical responses, so regenerate only when the stub
behavior intentionally changes.

Run from the adapter directory:

    python3 scripts/gen_goldens.py
"""

from __future__ import annotations

import base64
import io
import json
from pathlib import Path

from fastapi.testclient import TestClient
from PIL import Image

from groundsight_adapter.config import all_stub_config
from groundsight_adapter.service import create_app

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "golden_requests.json"


def png_b64(width=16, height=12, color=(200, 40, 40)) -> str:
    img = Image.new("RGB", (width, height), color)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def main() -> None:
    image = png_b64()
    requests = [
        {
            "op": "answer",
            "path": "/v1/answer",
            "request": {
                "image_b64": image,
                "system_prompt": "Answer briefly.",
                "user_prompt": "What color is this image?",
            },
        },
        {
            "op": "summarize",
            "path": "/v1/summarize",
            "request": {
                "image_b64": image,
                "system_prompt": "Summarize the region.",
                "user_prompt": "Describe the object of interest.",
            },
        },
        {
            "op": "localize",
            "path": "/v1/localize",
            "request": {"image_b64": image, "text_query": "red square"},
        },
        {
            "op": "embed",
            "path": "/v1/embed",
            "request": {"image_b64": image},
        },
        {
            "op": "judge",
            "path": "/v1/judge",
            "request": {
                "query": "What color is this?",
                "ground_truth": "red",
                "prediction": "The image is red.",
                "system_prompt": "Judge the prediction.",
            },
        },
    ]

    config = all_stub_config(embed_dim=8, request_timeout=None)
    with TestClient(create_app(config)) as client:
        for entry in requests:
            response = client.post(entry["path"], json=entry["request"])
            assert response.status_code == 200, (entry["op"], response.text)
            entry["expected_response"] = response.json()

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({"embed_dim": 8, "entries": requests}, indent=2) + "\n", "utf-8")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
