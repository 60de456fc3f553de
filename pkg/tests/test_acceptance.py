"""Acceptance suite: one test per shipping criterion, one printed line each.

Each test prints "<criterion>: PASS" as its final statement, so a green run
reads as a checklist; a failed criterion shows up as a normal pytest failure
instead of its line.
"""

import json
import random
import time
from pathlib import Path

import numpy as np
import pytest

from testkit import bbox_resp, embed_resp, image_ref, text_resp, verdict_resp
from groundsight.backends import Op, ScriptedMock
from groundsight.dataset import Corpus, QARecord, load_corpus
from groundsight.errors import IndexFormatError
from groundsight.evaluation import Grade, compute_metrics, grade_transcripts
from groundsight.geometry import BBox, iou
from groundsight.pipeline import (
    Strategy,
    StrategyConfig,
    run_corpus,
    write_transcripts,
)
from groundsight.prompts import (
    AGENT_SYSTEM_PROMPT,
    COS_SYSTEM_PROMPT,
    JUDGE_SYSTEM_PROMPT,
    assemble_agent_prompt,
    assemble_cos_prompt,
    prepend_roi_summary,
)
from groundsight.question_policy import QuestionType
from groundsight.retrieval import (
    IndexEntry,
    RetrievedEntity,
    build_index,
    filter_by_threshold,
    format_entities,
    load_index,
)

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = FIXTURES / "golden"

# Published per-strategy grade tallies: (label, n, perfect, missing,
# incorrect, exact) with the four displayed rates they must reproduce.
PUBLISHED_ROWS = [
    ("v1-small-vlm", 1548, 54, 0, 1494, 0, 3.49, 0.00, 96.51, -0.9302),
    ("v1-mid-vlm", 1548, 280, 522, 746, 12, 18.09, 33.72, 48.19, -0.3010),
    ("v1-baseline", 1548, 406, 205, 937, 13, 26.23, 13.24, 60.53, -0.3430),
    ("v1-dehalluc", 1548, 195, 1078, 275, 14, 12.60, 69.64, 17.76, -0.0517),
    ("v2-baseline", 1938, 430, 233, 1275, 9, 22.19, 12.02, 65.79, -0.4360),
    ("v2-localized", 1938, 344, 327, 1267, 3, 17.75, 16.87, 65.38, -0.4763),
    ("v2-localized-summary", 1938, 497, 73, 1368, 16, 25.64, 3.77, 70.59, -0.4494),
    ("v2-dehalluc", 1938, 228, 1339, 371, 13, 11.76, 69.09, 19.14, -0.0738),
    ("v2-full-policy", 1938, 174, 1495, 269, 7, 8.98, 77.14, 13.88, -0.0490),
]


def grades_from_counts(n_perfect, n_missing, n_incorrect, n_exact=0):
    grades = (
        [(QuestionType.OTHER, Grade.PERFECT, False)] * n_perfect
        + [(QuestionType.OTHER, Grade.MISSING, False)] * n_missing
        + [(QuestionType.OTHER, Grade.INCORRECT, False)] * n_incorrect
    )
    for i in range(n_exact):
        grades[i] = (grades[i][0], grades[i][1], True)
    return grades


def test_c1_metrics_oracle():
    start = time.monotonic()
    for label, n, n_p, n_m, n_i, n_e, acc, miss, halluc, truth in PUBLISHED_ROWS:
        assert n_p + n_m + n_i == n, label
        m = compute_metrics(grades_from_counts(n_p, n_m, n_i, n_e))
        assert m.total == n, label
        assert m.accuracy == pytest.approx(acc, abs=0.01), label
        assert m.missing_rate == pytest.approx(miss, abs=0.01), label
        assert m.hallucination_rate == pytest.approx(halluc, abs=0.01), label
        assert m.truthfulness == pytest.approx(truth, abs=0.0005), label
        assert f"{m.exact_acc:.2f}" == f"{100.0 * n_e / n:.2f}", label
    elapsed = time.monotonic() - start
    assert elapsed < 1.0, f"metrics oracle took {elapsed:.2f}s"
    print("\nC1 metrics oracle (9 published rows, <1s): PASS")


def test_c2_rate_identity():
    multisets = [
        grades_from_counts(n_p, n_m, n_i)
        for _, _, n_p, n_m, n_i, *_ in PUBLISHED_ROWS
    ]
    rng = random.Random(7)
    for _ in range(200):
        n_p = rng.randint(0, 200)
        n_m = rng.randint(0, 200)
        n_i = rng.randint(0, 200)
        if n_p + n_m + n_i == 0:
            n_p = 1
        multisets.append(grades_from_counts(n_p, n_m, n_i))
    for grades in multisets:
        m = compute_metrics(grades)
        assert abs(m.accuracy + m.missing_rate + m.hallucination_rate - 100.0) <= 1e-9
        assert abs(m.truthfulness - (m.accuracy - m.hallucination_rate) / 100.0) <= 1e-9
    print("\nC2 rate identity (209 no-acceptable multisets, ±1e-9): PASS")


def _cell_mask(box: tuple[int, int, int, int], grid: int) -> int:
    """Bitmask of the unit cells [x0,x1)x[y0,y1) inside a grid x grid frame."""
    x0, y0, x1, y1 = box
    mask = 0
    width = x1 - x0
    if width <= 0:
        return 0
    row = ((1 << width) - 1) << x0
    for y in range(y0, y1):
        mask |= row << (y * grid)
    return mask


def _oracle_iou(mask_a: int, mask_b: int) -> float:
    inter = (mask_a & mask_b).bit_count()
    union = (mask_a | mask_b).bit_count()
    return inter / union if union else 0.0


def _int_boxes(grid: int):
    return [
        (x0, y0, x1, y1)
        for x0 in range(grid + 1)
        for x1 in range(x0, grid + 1)
        for y0 in range(grid + 1)
        for y1 in range(y0, grid + 1)
    ]


def test_c3_iou_oracle():
    start = time.monotonic()

    # exhaustive over a small frame: every ordered pair of integer boxes
    grid = 6
    boxes = _int_boxes(grid)
    masks = [_cell_mask(b, grid) for b in boxes]
    bboxes = [BBox(*b) for b in boxes]
    n_pairs = 0
    for i in range(len(boxes)):
        for j in range(len(boxes)):
            got = iou(bboxes[i], bboxes[j])
            assert got == _oracle_iou(masks[i], masks[j]), (boxes[i], boxes[j])
            n_pairs += 1
    assert n_pairs == len(boxes) ** 2

    # random sample over the full-size frame
    grid = 16
    rng = random.Random(1234)
    for _ in range(100_000):
        a = rng.randint(0, grid)
        b = rng.randint(a, grid)
        c = rng.randint(0, grid)
        d = rng.randint(c, grid)
        e = rng.randint(0, grid)
        f = rng.randint(e, grid)
        g = rng.randint(0, grid)
        h = rng.randint(g, grid)
        box_a, box_b = (a, c, b, d), (e, g, f, h)
        got = iou(BBox(*box_a), BBox(*box_b))
        assert got == _oracle_iou(_cell_mask(box_a, grid), _cell_mask(box_b, grid))
        assert got == iou(BBox(*box_b), BBox(*box_a))
        assert 0.0 <= got <= 1.0

    elapsed = time.monotonic() - start
    assert elapsed < 30.0, f"iou oracle took {elapsed:.2f}s"
    print(f"\nC3 iou oracle ({n_pairs} exhaustive + 100000 random pairs, exact, <30s): PASS")


def test_c4_retrieval_exactness():
    start = time.monotonic()
    rng = np.random.default_rng(42)
    n, dim = 1000, 64
    vectors = rng.normal(size=(n, dim))
    ids = [f"img{i:04d}" for i in range(n)]
    index = build_index(
        [IndexEntry(image_id=ids[i], embedding=vectors[i], entities=()) for i in range(n)]
    )
    queries = rng.normal(size=(100, dim))

    stored = vectors.astype(np.float32).astype(np.float64)
    norms = np.linalg.norm(stored, axis=1)
    for q in queries:
        q32 = np.asarray(q, dtype=np.float32).astype(np.float64)
        sims = np.clip(stored @ q32 / (norms * np.linalg.norm(q32)), -1.0, 1.0)
        order = sorted(range(n), key=lambda i: (-sims[i], ids[i]))
        for k in (1, 3, 10):
            got = index.search(q, k)
            want = order[:k]
            assert [r.image_id for r in got] == [ids[i] for i in want]
            for r, i in zip(got, want):
                assert abs(r.similarity - sims[i]) <= 1e-6
        full = index.search(q, n)
        kept = filter_by_threshold(full, tau=0.75)
        boundary = next((i for i, r in enumerate(full) if r.similarity < 0.75), len(full))
        assert kept == full[:boundary]

    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"retrieval exactness took {elapsed:.2f}s"
    print("\nC4 retrieval exactness (1000x64, 100 queries, k in {1,3,10}, <10s): PASS")


BUN_DIRECT = "The typical filling of this Chinese steamed bun is pork."
BUN_CROP = (
    "The typical filling of this Chinese steamed bun is not blood soup, as the image "
    "shows a steamed bun with a brown filling, not a soup."
)
MURAL_BASELINE = (
    "Nat King Cole was born on March 17, 1919, and he started hosting his own show on "
    "NBC in 1956. Therefore, he was 37 years old when he started hosting his own show "
    "on NBC."
)
MURAL_COS = (
    "Nat King Cole was 31 years old when he started hosting his own show on NBC, "
    '"The Nat King Cole Show," in 1956.'
)


def test_c5_golden_transcripts(tmp_path):
    corpus = load_corpus(FIXTURES / "tables78_corpus.jsonl")
    index = load_index(FIXTURES / "tables78.gsix")
    outputs = {}
    for strategy, name in (
        (Strategy.BASELINE, "baseline"),
        (Strategy.CROP_SEARCH, "crop"),
        (Strategy.CROP_SEARCH_COS, "cos"),
    ):
        for workers in (1, 8):
            mock = ScriptedMock.from_script(FIXTURES / "tables78.script")
            config = StrategyConfig(variant=strategy, tau=0.75, k=3)
            transcripts = run_corpus(corpus, mock, index, config, parallelism=workers)
            out = tmp_path / f"{name}_{workers}.jsonl"
            write_transcripts(out, transcripts)
            golden = (GOLDEN / f"tables78_{name}.jsonl").read_bytes()
            assert out.read_bytes() == golden, f"{name} parallelism={workers}"
        outputs[name] = {t.interaction_id: t for t in transcripts}

    # misleading-retrieval scenario: grounded run goes wrong, summary run recovers
    assert "Blood soup." in outputs["crop"]["bun"].final_prompt
    assert outputs["crop"]["bun"].answer == BUN_CROP
    assert outputs["cos"]["bun"].answer == BUN_DIRECT
    assert outputs["baseline"]["bun"].answer == BUN_DIRECT
    # unrelated-retrieval scenario: summary run confidently wrong, plain run right
    assert outputs["cos"]["mural"].answer == MURAL_COS
    assert outputs["baseline"]["mural"].answer == MURAL_BASELINE
    assert outputs["crop"]["mural"].answer == "I don't know."
    print("\nC5 golden transcripts (2 scenarios x 3 strategies, parallelism 1 and 8): PASS")


def _abstention_setup():
    who = [f"Who painted artwork number {i}?" for i in range(1, 6)]
    reasoning = [f"Why was building number {i} constructed?" for i in range(6, 11)]
    recognition = [f"What is object number {i}?" for i in range(11, 21)]
    records = []
    for i, query in enumerate(who + reasoning + recognition, start=1):
        records.append(
            QARecord(
                interaction_id=f"q{i:02d}",
                query=query,
                image=image_ref(f"q{i:02d}"),
                ground_truth=f"Truth {i}.",
            )
        )
    corpus = Corpus(records=tuple(records), version_tag="custom")

    table = {}
    judge = {}
    for i in range(1, 21):
        rid = f"q{i:02d}"
        if i <= 10:
            answer = f"Wrong answer {i}."
            judge[answer] = False
        else:
            answer = f"Truth {i}."
            judge[answer] = True
        table[(Op.ANSWER, rid, "Context that may be relevant to ")] = text_resp(answer)
        if i > 10:
            summary = f"Summary {i}"
            table[(Op.SUMMARIZE, rid, "Provide a concise summary for ob")] = text_resp(summary)
            # confidence below the floor: the full image carries on
            table[(Op.LOCALIZE, rid, f"What is object number {i}?"[:32])] = bbox_resp(
                0, 0, 1, 1, 0.0
            )
            table[(Op.EMBED, rid, "")] = embed_resp(1, 0, 0, 0)
            disc = (f"Region of interest: Summary {i}\n" + "Context")[:32]
            table[(Op.ANSWER, rid, disc)] = text_resp(answer)
    for prediction, ok in judge.items():
        table[(Op.JUDGE, "", prediction)] = verdict_resp(ok)

    index = build_index(
        [
            IndexEntry(
                image_id="db",
                embedding=(1.0, 0.0, 0.0, 0.0),
                entities=(RetrievedEntity(entity_name="Catalog entry", attributes={}),),
            )
        ]
    )
    return corpus, table, index


def test_c6_abstention_behavior():
    corpus, table, index = _abstention_setup()

    baseline_mock = ScriptedMock(table=dict(table))
    baseline = run_corpus(
        corpus, baseline_mock, None, StrategyConfig(variant=Strategy.BASELINE), parallelism=1
    )
    records_by_id = {r.interaction_id: r for r in corpus}
    base_metrics = compute_metrics(
        [
            (g.qtype, g.grade, g.exact)
            for g in grade_transcripts(baseline, records_by_id, ScriptedMock(table=dict(table)))
        ]
    )
    assert base_metrics.hallucination_rate == pytest.approx(50.0)

    gs_mock = ScriptedMock(table=dict(table))
    grounded = run_corpus(
        corpus, gs_mock, index, StrategyConfig(variant=Strategy.GROUNDSIGHT), parallelism=1
    )
    assert not any(t.failed for t in grounded), [t.error for t in grounded]
    abstained = [t for t in grounded if t.answer == "I don't know"]
    assert len(abstained) == 10
    assert {t.interaction_id for t in abstained} == {f"q{i:02d}" for i in range(1, 11)}
    for t in abstained:
        assert gs_mock.calls_for(t.interaction_id) == []

    gs_metrics = compute_metrics(
        [
            (g.qtype, g.grade, g.exact)
            for g in grade_transcripts(grounded, records_by_id, ScriptedMock(table=dict(table)))
        ]
    )
    assert gs_metrics.hallucination_rate == pytest.approx(0.0)
    for qtype in (QuestionType.WHO, QuestionType.REASONING):
        assert gs_metrics.by_type[qtype].hallucination_rate == pytest.approx(0.0)
        assert base_metrics.by_type[qtype].hallucination_rate == pytest.approx(100.0)
    print("\nC6 abstention (10/20 abstained, zero backend calls, hallucination 50%->0%): PASS")


def test_c7_prompt_byte_exactness():
    goldens = json.loads((GOLDEN / "prompts.json").read_text(encoding="utf-8"))
    assert AGENT_SYSTEM_PROMPT == goldens["agent_system"]
    assert COS_SYSTEM_PROMPT == goldens["summarizer_system"]
    assert JUDGE_SYSTEM_PROMPT == goldens["judge_system"]

    cases = {c["name"]: c for c in goldens["cases"]}

    case = cases["agent_empty_context"]
    system, user = assemble_agent_prompt(case["search_context"], case["query"])
    assert system == goldens["agent_system"]
    assert user == case["expected_user_prompt"]

    case = cases["agent_with_context"]
    toyota = RetrievedEntity(
        entity_name="Toyota Prius v",
        attributes={
            "alternative names": "Prius alpha, Prius+",
            "production start": "May 2011",
            "production end": "March 2021",
            "body style": "compact MPV",
        },
    )
    rendered = format_entities([toyota]) + "\n"
    assert rendered == case["search_context"]
    _, user = assemble_agent_prompt(rendered, case["query"])
    assert user == case["expected_user_prompt"]

    case = cases["summarizer"]
    system, user = assemble_cos_prompt(case["query"])
    assert system == goldens["summarizer_system"]
    assert user == case["expected_user_prompt"]

    case = cases["roi_prefix"]
    assert prepend_roi_summary(case["base_user_prompt"], case["summary"]) == (
        case["expected_user_prompt"]
    )
    print("\nC7 prompt byte-exactness (3 system prompts, 4 assembly cases): PASS")


def test_c8_index_persistence(tmp_path):
    rng = np.random.default_rng(99)
    entries = [
        IndexEntry(
            image_id=f"img{i:03d}",
            embedding=rng.normal(size=32),
            entities=(RetrievedEntity(entity_name=f"Entity {i}", attributes={"n": str(i)}),),
        )
        for i in range(50)
    ]
    index = build_index(entries)
    path = tmp_path / "round.gsix"
    index.save(path)
    loaded = load_index(path)

    queries = rng.normal(size=(20, 32))
    for q in queries:
        assert loaded.search(q, 10) == index.search(q, 10)
    assert loaded.entities_for("img007") == index.entities_for("img007")

    corrupted = bytearray(path.read_bytes())
    corrupted[0] ^= 0xFF
    bad = tmp_path / "bad.gsix"
    bad.write_bytes(bytes(corrupted))
    with pytest.raises(IndexFormatError):
        load_index(bad)
    print("\nC8 index persistence (50-entry round-trip, corrupted magic rejected): PASS")
