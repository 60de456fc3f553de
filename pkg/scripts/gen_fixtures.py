#!/usr/bin/env python3
"""Regenerate the committed two-scenario end-to-end fixtures under tests/fixtures.

Produces a tiny corpus (a steamed-bun photo and a mural photo), a scripted
backend covering every call the pipeline strategies make over it, a matching
retrieval index, and golden transcripts for the baseline, crop, and cos
strategies. Everything is deterministic, so reruns are byte-identical and the
files can stay committed.

Run from the repository root:

    python3 scripts/gen_fixtures.py
"""

from __future__ import annotations

import base64
import io
import json
from pathlib import Path

from PIL import Image

from groundsight.backends import ScriptedMock
from groundsight.dataset import load_corpus
from groundsight.pipeline import (
    Strategy,
    StrategyConfig,
    run_corpus,
    write_transcripts,
)
from groundsight.retrieval import IndexEntry, RetrievedEntity, build_index

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"
GOLDEN = FIXTURES / "golden"

BUN_QUERY = "What is the typical filling of this Chinese steamed bun?"
BUN_GT = "The typical filling is pork."
BUN_DIRECT_ANSWER = "The typical filling of this Chinese steamed bun is pork."
BUN_CROP_ANSWER = (
    "The typical filling of this Chinese steamed bun is not blood soup, as the image "
    "shows a steamed bun with a brown filling, not a soup."
)
BUN_SUMMARY = "The typical filling of this Chinese steamed bun is pork."
BUN_CONTEXT_VALUE = "Blood soup."

MURAL_QUERY = "How old was this artist when he started hosting his own show on NBC?"
MURAL_GT = "Nat King Cole was 37 years old."
MURAL_BASELINE_ANSWER = (
    "Nat King Cole was born on March 17, 1919, and he started hosting his own show on "
    "NBC in 1956. Therefore, he was 37 years old when he started hosting his own show "
    "on NBC."
)
MURAL_CROP_ANSWER = "I don't know."
MURAL_SUMMARY = (
    "The object of interest is a mural of Nat King Cole, an American singer and musician."
)
MURAL_COS_ANSWER = (
    "Nat King Cole was 31 years old when he started hosting his own show on NBC, "
    '"The Nat King Cole Show," in 1956.'
)
MURAL_CONTEXT_VALUE = "Levi Strauss & Co. is an American clothing company."

BUN_CROP_ID = "bun#crop-10-10-200-200"
MURAL_CROP_ID = "mural#crop-30-20-250-220"


def flat_png_b64(color: tuple[int, int, int], size=(320, 240)) -> str:
    img = Image.new("RGB", size, color)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def write_corpus() -> Path:
    path = FIXTURES / "tables78_corpus.jsonl"
    rows = [
        {
            "interaction_id": "bun",
            "query": BUN_QUERY,
            "ground_truth": BUN_GT,
            "image_b64": flat_png_b64((200, 160, 110)),
        },
        {
            "interaction_id": "mural",
            "query": MURAL_QUERY,
            "ground_truth": MURAL_GT,
            "image_b64": flat_png_b64((90, 110, 180)),
        },
    ]
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return path


def write_images_listing() -> Path:
    """Listing consumed by the index-building CLI command."""
    path = FIXTURES / "tables78_images.jsonl"
    rows = [
        {
            "image_id": "bun-db",
            "image_b64": flat_png_b64((210, 170, 120)),
            "entities": [
                {"entity_name": "Steamed bun", "attributes": {"typical filling": BUN_CONTEXT_VALUE}}
            ],
        },
        {
            "image_id": "mural-db",
            "image_b64": flat_png_b64((80, 100, 170)),
            "entities": [
                {
                    "entity_name": "Levi Strauss & Co.",
                    "attributes": {"description": MURAL_CONTEXT_VALUE},
                }
            ],
        },
    ]
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return path


def write_script() -> Path:
    path = FIXTURES / "tables78.script"
    script = {
        "defaults": {
            "answer": {"text": "I don't know"},
            "localize": {"bbox": [0, 0, 1, 1], "confidence": 0.0},
            "judge": {"accuracy": False},
        },
        "entries": [
            {
                "op": "localize",
                "image_id": "bun",
                "discriminator": BUN_QUERY[:32],
                "response": {"bbox": [10, 10, 200, 200], "confidence": 0.9},
            },
            {
                "op": "localize",
                "image_id": "mural",
                "discriminator": MURAL_QUERY[:32],
                "response": {"bbox": [30, 20, 250, 220], "confidence": 0.85},
            },
            {"op": "embed", "image_id": BUN_CROP_ID, "discriminator": "", "response": {"embedding": [1, 0, 0, 0]}},
            {"op": "embed", "image_id": MURAL_CROP_ID, "discriminator": "", "response": {"embedding": [0, 1, 0, 0]}},
            {"op": "embed", "image_id": "bun-db", "discriminator": "", "response": {"embedding": [1, 0, 0, 0]}},
            {"op": "embed", "image_id": "mural-db", "discriminator": "", "response": {"embedding": [0, 1, 0, 0]}},
            {
                "op": "answer",
                "image_id": "bun",
                "discriminator": "Context that may be relevant to ",
                "response": {"text": BUN_DIRECT_ANSWER},
            },
            {
                "op": "answer",
                "image_id": "mural",
                "discriminator": "Context that may be relevant to ",
                "response": {"text": MURAL_BASELINE_ANSWER},
            },
            {
                "op": "answer",
                "image_id": BUN_CROP_ID,
                "discriminator": "Context that may be relevant to ",
                "response": {"text": BUN_CROP_ANSWER},
            },
            {
                "op": "answer",
                "image_id": MURAL_CROP_ID,
                "discriminator": "Context that may be relevant to ",
                "response": {"text": MURAL_CROP_ANSWER},
            },
            {
                "op": "summarize",
                "image_id": "bun",
                "discriminator": "Provide a concise summary for ob",
                "response": {"text": BUN_SUMMARY},
            },
            {
                "op": "summarize",
                "image_id": "mural",
                "discriminator": "Provide a concise summary for ob",
                "response": {"text": MURAL_SUMMARY},
            },
            {
                "op": "answer",
                "image_id": "bun",
                "discriminator": ("Region of interest: " + BUN_SUMMARY)[:32],
                "response": {"text": BUN_DIRECT_ANSWER},
            },
            {
                "op": "answer",
                "image_id": "mural",
                "discriminator": ("Region of interest: " + MURAL_SUMMARY)[:32],
                "response": {"text": MURAL_COS_ANSWER},
            },
            {
                "op": "judge",
                "image_id": "",
                "discriminator": BUN_DIRECT_ANSWER,
                "response": {"accuracy": True},
            },
            {
                "op": "judge",
                "image_id": "",
                "discriminator": BUN_CROP_ANSWER,
                "response": {"accuracy": False},
            },
            {
                "op": "judge",
                "image_id": "",
                "discriminator": MURAL_BASELINE_ANSWER,
                "response": {"accuracy": True},
            },
            {
                "op": "judge",
                "image_id": "",
                "discriminator": MURAL_CROP_ANSWER,
                "response": {"accuracy": False},
            },
            {
                "op": "judge",
                "image_id": "",
                "discriminator": MURAL_COS_ANSWER,
                "response": {"accuracy": False},
            },
        ],
    }
    path.write_text(json.dumps(script, indent=2) + "\n", encoding="utf-8")
    return path


def write_index() -> Path:
    path = FIXTURES / "tables78.gsix"
    index = build_index(
        [
            IndexEntry(
                image_id="bun-db",
                embedding=[1, 0, 0, 0],
                entities=(
                    RetrievedEntity(
                        entity_name="Steamed bun",
                        attributes={"typical filling": BUN_CONTEXT_VALUE},
                    ),
                ),
            ),
            IndexEntry(
                image_id="mural-db",
                embedding=[0, 1, 0, 0],
                entities=(
                    RetrievedEntity(
                        entity_name="Levi Strauss & Co.",
                        attributes={"description": MURAL_CONTEXT_VALUE},
                    ),
                ),
            ),
        ]
    )
    index.save(path)
    return path


def generate_goldens(corpus_path: Path, script_path: Path, index_path: Path) -> None:
    from groundsight.retrieval import load_index

    corpus = load_corpus(corpus_path, version_tag="custom")
    index = load_index(index_path)
    by_id = {}
    for strategy, name in (
        (Strategy.BASELINE, "baseline"),
        (Strategy.CROP_SEARCH, "crop"),
        (Strategy.CROP_SEARCH_COS, "cos"),
    ):
        mock = ScriptedMock.from_script(script_path)
        config = StrategyConfig(variant=strategy, tau=0.75, k=3)
        transcripts = run_corpus(corpus, mock, index, config, parallelism=1)
        assert not any(t.failed for t in transcripts), [t.error for t in transcripts]
        write_transcripts(GOLDEN / f"tables78_{name}.jsonl", transcripts)
        by_id[name] = {t.interaction_id: t for t in transcripts}

    # sanity: the scripted scenario must land every pinned string in the
    # right transcript field, or the goldens are worthless
    assert by_id["baseline"]["bun"].answer == BUN_DIRECT_ANSWER
    assert by_id["baseline"]["mural"].answer == MURAL_BASELINE_ANSWER
    assert by_id["baseline"]["bun"].retrieved == ()
    assert by_id["crop"]["bun"].answer == BUN_CROP_ANSWER
    assert BUN_CONTEXT_VALUE in by_id["crop"]["bun"].final_prompt
    assert by_id["crop"]["mural"].answer == MURAL_CROP_ANSWER
    assert MURAL_CONTEXT_VALUE in by_id["crop"]["mural"].final_prompt
    assert by_id["crop"]["bun"].bbox is not None
    assert by_id["cos"]["bun"].roi_summary == BUN_SUMMARY
    assert by_id["cos"]["bun"].answer == BUN_DIRECT_ANSWER
    assert by_id["cos"]["mural"].roi_summary == MURAL_SUMMARY
    assert by_id["cos"]["mural"].answer == MURAL_COS_ANSWER
    assert by_id["cos"]["mural"].final_prompt.startswith("Region of interest: ")


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    GOLDEN.mkdir(parents=True, exist_ok=True)
    corpus_path = write_corpus()
    images_path = write_images_listing()
    script_path = write_script()
    index_path = write_index()
    generate_goldens(corpus_path, script_path, index_path)
    print(f"wrote {corpus_path}")
    print(f"wrote {images_path}")
    print(f"wrote {script_path}")
    print(f"wrote {index_path}")
    print(f"wrote goldens under {GOLDEN}")


if __name__ == "__main__":
    main()
