"""Start the adapter service from the command line.

    python3 -m groundsight_adapter --all-stub --port 8080

Each endpoint is enabled by naming its model; --all-stub enables every
endpoint with its deterministic stub (useful for integration testing the
client side without real checkpoints).
"""

from __future__ import annotations

import argparse
import sys

from .config import AdapterConfig
from .service import serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="groundsight-adapter", description=__doc__.split("\n")[0])
    parser.add_argument("--answer-model")
    parser.add_argument("--summarize-model")
    parser.add_argument("--localize-model")
    parser.add_argument("--embed-model")
    parser.add_argument("--judge-model")
    parser.add_argument("--all-stub", action="store_true", help="enable every endpoint with its stub")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--port", type=int, default=8080)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--max-concurrent", type=int, default=4)
    parser.add_argument("--embed-dim", type=int, default=64)
    parser.add_argument("--timeout", type=float, default=30.0, help="per-request timeout seconds; 0 disables")
    return parser


def config_from_args(args) -> AdapterConfig:
    fallback = "stub" if args.all_stub else None
    return AdapterConfig(
        answer_model=args.answer_model or fallback,
        summarize_model=args.summarize_model or fallback,
        localize_model=args.localize_model or fallback,
        embed_model=args.embed_model or fallback,
        judge_model=args.judge_model or fallback,
        device=args.device,
        max_concurrent=args.max_concurrent,
        port=args.port,
        embed_dim=args.embed_dim,
        request_timeout=args.timeout if args.timeout > 0 else None,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
    except ValueError as exc:
        parser.error(str(exc))
    serve(config, host=args.host)
    return 0


if __name__ == "__main__":
    sys.exit(main())
