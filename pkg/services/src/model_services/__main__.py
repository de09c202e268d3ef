"""Run the service: python -m model_services --port 8080 [--backend cassette --cassette traffic.jsonl]"""

from __future__ import annotations

import argparse
import logging
import os

import uvicorn

from .app import create_app
from .config import ServiceConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="model-services", description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    parser.add_argument("--backend", choices=("deterministic", "cassette"), default="deterministic")
    parser.add_argument("--cassette", help="cassette JSONL to replay (cassette backend)")
    parser.add_argument("--record", help="JSONL file to append request/response pairs to")
    parser.add_argument("--embedding-model", default="hash-sum-v1")
    parser.add_argument("--dim", type=int, default=256, help="embedding dimension")
    parser.add_argument("--token", default=os.environ.get("MODEL_SERVICES_TOKEN"),
                        help="require this bearer token on POST endpoints")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level="INFO", format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    config = ServiceConfig(
        host=args.host,
        port=args.port,
        backend=args.backend,
        embedding_model_id=args.embedding_model,
        embedding_dim=args.dim,
        cassette_path=args.cassette,
        record_path=args.record,
        bearer_token=args.token,
    )
    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
