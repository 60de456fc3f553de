"""Command-line front end.

Five subcommands wired through files so stages can run separately:

    ingest    validate a corpus file, write a normalized copy
    index     embed an image-entity listing and write the binary index
    run       execute a strategy over a corpus, write transcripts + manifest
    evaluate  grade transcripts against the corpus, write grades + metrics
    report    render one or more metrics files as a text table

Exit codes: 0 success, 1 data error (one-line diagnostic on stderr),
2 usage error (bad flags, missing input files). All outputs are written
into --out via write-then-rename, and the output directory is only
created once the command has results, so failures leave no partial runs.
"""

from __future__ import annotations

import argparse
import base64
import binascii
import hashlib
import json
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .backends import BackendRequest, Op, RemoteBackend, ScriptedMock
from .dataset import convert_records, load_corpus
from .errors import GroundsightError, ParseError
from .evaluation import (
    compute_metrics,
    grade_transcripts,
    metrics_from_dict,
    metrics_to_dict,
    render_report,
)
from .images import ImageRef
from .pipeline import (
    Strategy,
    StrategyConfig,
    read_transcripts,
    run_corpus,
    write_transcripts,
)
from .question_policy import AbstentionPolicy, DEFAULT_POLICY
from .retrieval import IndexEntry, RetrievedEntity, as_embedding, build_index, load_index

BACKEND_URL_ENV = "GROUNDSIGHT_BACKEND_URL"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _require_file(parser: argparse.ArgumentParser, path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        parser.error(f"{what} not found: {p}")
    return p


def _make_backend(args) -> tuple[object, RemoteBackend | None]:
    """Resolve --mock / --backend-url / environment into a backend.

    Returns (backend, closeable) where closeable is the remote client to
    close after use, or None for mocks.
    """
    if args.mock is not None:
        return ScriptedMock.from_script(args.mock), None
    url = args.backend_url or os.environ.get(BACKEND_URL_ENV)
    if not url:
        raise _UsageError(
            f"a backend is required: pass --mock PATH or --backend-url URL "
            f"(or set {BACKEND_URL_ENV})"
        )
    remote = RemoteBackend(base_url=url, max_connections=max(args.parallelism, 4))
    return remote, remote


class _UsageError(Exception):
    pass


def _add_backend_flags(sub: argparse.ArgumentParser) -> None:
    group = sub.add_mutually_exclusive_group()
    group.add_argument("--backend-url", help=f"adapter service base URL (default ${BACKEND_URL_ENV})")
    group.add_argument("--mock", help="scripted-mock JSON file instead of a live backend")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="groundsight", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("ingest", help="validate a corpus file and write a normalized copy")
    p.add_argument("--corpus", required=True, help="input corpus JSONL")
    p.add_argument("--corpus-version", default="custom", help="version tag; v1/v2 enforce record counts")
    p.add_argument("--convert", action="store_true", help="map common alternative field names first")
    p.add_argument("--out", required=True, help="output directory")

    p = subs.add_parser("index", help="embed an image-entity listing into a search index")
    p.add_argument("--images", required=True, help="image listing JSONL (image_id, image_path|image_b64, entities)")
    _add_backend_flags(p)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")

    p = subs.add_parser("run", help="run a strategy over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--index", help="index file (required for crop/cos/groundsight)")
    p.add_argument("--strategy", choices=[s.value for s in Strategy])
    p.add_argument("--tau", type=float, default=None, help="retrieval similarity threshold (default 0.75)")
    p.add_argument("--k", type=int, default=None, help="retrieval neighbors (default 3)")
    p.add_argument("--conf-floor", type=float, default=None, help="localizer confidence floor (default 0.25)")
    p.add_argument("--policy", default=None, help="comma-separated abstain types (default who,reasoning)")
    _add_backend_flags(p)
    p.add_argument("--config", help="run configuration JSON; flags override its values")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--out", required=True)

    p = subs.add_parser("evaluate", help="grade transcripts against their corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--transcripts", required=True, help="transcripts JSONL from `run`")
    _add_backend_flags(p)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--label", default=None, help="strategy label for the metrics file")
    p.add_argument("--out", required=True)

    p = subs.add_parser("report", help="render metrics files as a table")
    p.add_argument("--metrics", required=True, nargs="+", help="metrics JSON files from `evaluate`")
    p.add_argument("--out", help="output directory (default: print to stdout)")

    return parser


def cmd_ingest(parser: argparse.ArgumentParser, args) -> int:
    corpus_path = _require_file(parser, args.corpus, "corpus")
    if args.convert:
        rows = []
        with corpus_path.open("r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON: {exc}", line_no)
        converted = list(convert_records(rows))
        # Anchor relative image paths to the original corpus location before
        # the records move to a temporary file for validation.
        for row in converted:
            p = row.get("image_path")
            if isinstance(p, str) and not Path(p).is_absolute():
                row["image_path"] = str(corpus_path.parent / p)
        with tempfile.TemporaryDirectory() as tmp_dir:
            tmp_path = Path(tmp_dir) / corpus_path.name
            tmp_path.write_text(
                "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in converted),
                encoding="utf-8",
            )
            corpus = load_corpus(tmp_path, version_tag=args.corpus_version)
    else:
        corpus = load_corpus(corpus_path, version_tag=args.corpus_version)

    lines = []
    for r in corpus:
        row = {
            "interaction_id": r.interaction_id,
            "query": r.query,
            "ground_truth": r.ground_truth,
        }
        if r.image.path is not None:
            row["image_path"] = str(r.image.path)
        else:
            row["image_b64"] = base64.b64encode(r.image.data).decode("ascii")
        if r.question_type is not None:
            row["question_type"] = r.question_type.value
        lines.append(json.dumps(row, ensure_ascii=False))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write_text(out / "corpus.jsonl", "\n".join(lines) + "\n")
    print(f"ingested {len(corpus)} records -> {out / 'corpus.jsonl'}")
    return 0


def _load_image_listing(path: Path) -> list[tuple[str, ImageRef, tuple[RetrievedEntity, ...]]]:
    rows: list[tuple[str, ImageRef, tuple[RetrievedEntity, ...]]] = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc}", line_no)
            if not isinstance(raw, dict) or not isinstance(raw.get("image_id"), str):
                raise ParseError("image listing record needs a string 'image_id'", line_no)
            image_id = raw["image_id"]
            if isinstance(raw.get("image_path"), str):
                img_path = Path(raw["image_path"])
                if not img_path.is_absolute():
                    img_path = path.parent / img_path
                ref = ImageRef(image_id=image_id, path=img_path)
            elif isinstance(raw.get("image_b64"), str):
                try:
                    ref = ImageRef(
                        image_id=image_id,
                        data=base64.b64decode(raw["image_b64"], validate=True),
                    )
                except (binascii.Error, ValueError) as exc:
                    raise ParseError(f"invalid image_b64: {exc}", line_no)
            else:
                raise ParseError("record needs 'image_path' or 'image_b64'", line_no)
            entities = []
            for e in raw.get("entities", []):
                if not isinstance(e, dict) or not isinstance(e.get("entity_name"), str):
                    raise ParseError("entity needs a string 'entity_name'", line_no)
                attrs = e.get("attributes", {})
                if not isinstance(attrs, dict):
                    raise ParseError("entity 'attributes' must be an object", line_no)
                entities.append(
                    RetrievedEntity(
                        entity_name=e["entity_name"],
                        attributes={str(k): str(v) for k, v in attrs.items()},
                    )
                )
            rows.append((image_id, ref, tuple(entities)))
    if not rows:
        raise ParseError("image listing is empty")
    return rows


def cmd_index(parser: argparse.ArgumentParser, args) -> int:
    listing_path = _require_file(parser, args.images, "image listing")
    rows = _load_image_listing(listing_path)
    backend, closeable = _make_backend(args)
    try:
        entries = []
        for image_id, ref, entities in rows:
            response = backend.call(BackendRequest(op=Op.EMBED, image=ref))
            entries.append(
                IndexEntry(
                    image_id=image_id,
                    embedding=as_embedding(response.embedding),
                    entities=entities,
                )
            )
        index = build_index(entries)
    finally:
        if closeable is not None:
            closeable.close()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    index.save(out / "index.gsix")
    print(f"indexed {len(index)} images (dim {index.dim}) -> {out / 'index.gsix'}")
    return 0


def _strategy_config(parser: argparse.ArgumentParser, args) -> StrategyConfig:
    """Merge --config file values with flag overrides (flags win)."""
    file_cfg: dict = {}
    if args.config:
        cfg_path = _require_file(parser, args.config, "config file")
        try:
            file_cfg = json.loads(cfg_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"config file is not valid JSON: {exc}")
        if not isinstance(file_cfg, dict):
            raise ParseError("config file must hold a JSON object")

    strategy_name = args.strategy or file_cfg.get("strategy")
    if not strategy_name:
        raise _UsageError("--strategy is required (or provide it in --config)")
    try:
        variant = Strategy(strategy_name)
    except ValueError:
        raise ParseError(f"unknown strategy {strategy_name!r}")

    tau = args.tau if args.tau is not None else file_cfg.get("tau", 0.75)
    k = args.k if args.k is not None else file_cfg.get("k", 3)
    conf_floor = (
        args.conf_floor if args.conf_floor is not None else file_cfg.get("conf_floor", 0.25)
    )
    policy_names = args.policy if args.policy is not None else file_cfg.get("policy")
    if variant is Strategy.GROUNDSIGHT:
        if policy_names is None:
            policy = DEFAULT_POLICY
        else:
            policy = AbstentionPolicy.from_names(policy_names, abstain_on_empty_context=True)
    else:
        policy = None
    try:
        return StrategyConfig(
            variant=variant,
            tau=float(tau),
            k=int(k),
            localizer_conf_floor=float(conf_floor),
            policy=policy,
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad run configuration: {exc}")


def _config_snapshot(config: StrategyConfig, parallelism: int, backend_desc: str) -> dict:
    return {
        "strategy": config.variant.value,
        "tau": config.tau,
        "k": config.k,
        "conf_floor": config.localizer_conf_floor,
        "policy": sorted(t.value for t in config.policy.abstain_types) if config.policy else None,
        "abstain_on_empty_context": (
            config.policy.abstain_on_empty_context if config.policy else None
        ),
        "final_image": config.final_image,
        "parallelism": parallelism,
        "backend": backend_desc,
    }


def cmd_run(parser: argparse.ArgumentParser, args) -> int:
    corpus_path = _require_file(parser, args.corpus, "corpus")
    config = _strategy_config(parser, args)
    if args.parallelism < 1:
        raise _UsageError("--parallelism must be >= 1")

    index = None
    index_hash = None
    if config.variant is not Strategy.BASELINE:
        if not args.index:
            raise _UsageError(f"strategy {config.variant.value!r} requires --index")
        index_path = _require_file(parser, args.index, "index")
        index = load_index(index_path)
        index_hash = _sha256(index_path)

    corpus = load_corpus(corpus_path)
    backend, closeable = _make_backend(args)
    backend_desc = f"mock:{Path(args.mock).name}" if args.mock else "remote"
    try:
        transcripts = run_corpus(corpus, backend, index, config, parallelism=args.parallelism)
    finally:
        if closeable is not None:
            closeable.close()

    manifest = {
        "config": _config_snapshot(config, args.parallelism, backend_desc),
        "corpus_sha256": _sha256(corpus_path),
        "index_sha256": index_hash,
        "version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_transcripts(out / "transcripts.jsonl", transcripts)
    _atomic_write_text(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    n_failed = sum(1 for t in transcripts if t.failed)
    print(f"ran {len(transcripts)} records ({n_failed} failed) -> {out / 'transcripts.jsonl'}")
    return 0


def cmd_evaluate(parser: argparse.ArgumentParser, args) -> int:
    corpus_path = _require_file(parser, args.corpus, "corpus")
    transcripts_path = _require_file(parser, args.transcripts, "transcripts")
    if args.parallelism < 1:
        raise _UsageError("--parallelism must be >= 1")
    corpus = load_corpus(corpus_path)
    transcripts = read_transcripts(transcripts_path)
    records_by_id = {r.interaction_id: r for r in corpus}
    backend, closeable = _make_backend(args)
    try:
        graded = grade_transcripts(
            transcripts, records_by_id, backend, parallelism=args.parallelism
        )
    finally:
        if closeable is not None:
            closeable.close()

    metrics = compute_metrics([(g.qtype, g.grade, g.exact) for g in graded])
    label = args.label or (transcripts[0].strategy if transcripts else "run")
    grade_lines = [
        json.dumps(
            {
                "interaction_id": g.interaction_id,
                "qtype": g.qtype.value,
                "grade": g.grade.value,
                "exact": g.exact,
                "fallback": g.fallback,
            },
            ensure_ascii=False,
        )
        for g in graded
    ]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write_text(out / "grades.jsonl", "\n".join(grade_lines) + "\n")
    _atomic_write_text(
        out / "metrics.json",
        json.dumps({"strategy": label, **metrics_to_dict(metrics)}, indent=2) + "\n",
    )
    print(f"graded {len(graded)} answers -> {out / 'metrics.json'}")
    print(f"{label}: {metrics.format_row()}")
    return 0


def cmd_report(parser: argparse.ArgumentParser, args) -> int:
    rows = []
    for path_str in args.metrics:
        path = _require_file(parser, path_str, "metrics file")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: not valid JSON: {exc}")
        if not isinstance(raw, dict):
            raise ParseError(f"{path}: metrics file must hold a JSON object")
        label = raw.get("strategy", path.stem)
        rows.append((str(label), metrics_from_dict(raw)))
    text = render_report(rows)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _atomic_write_text(out / "report.txt", text)
        print(f"report -> {out / 'report.txt'}")
    else:
        print(text, end="")
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "index": cmd_index,
    "run": cmd_run,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](parser, args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except GroundsightError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
