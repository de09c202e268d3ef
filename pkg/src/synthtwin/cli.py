"""Command-line entry point.

Subcommands mirror the pipeline stages: `ingest` preprocesses a corpus,
`index` builds the retrieval index, `run` evaluates a single study unit,
`eval` runs a benchmark file, and `invert-debug` inverts one vector for
inspection. Flags override values from an optional JSON config file.

Config schema (all keys optional):
    {
      "mode": "mock" | "live",
      "n": 100, "max_keep": 5, "min_keep": 2, "cos_threshold": 0.8,
      "lambda": 1.0, "steps": 10, "beam_width": 4,
      "parallelism": 1, "mock_dim": 256,
      "embedding_model": "hash-sum-v1",
      "endpoints": {"embed": url, "invert": url, "judge": url, "transform": url}
    }

Live-mode endpoints may also come from SYNTHTWIN_EMBED_ENDPOINT,
SYNTHTWIN_INVERT_ENDPOINT, SYNTHTWIN_JUDGE_ENDPOINT and
SYNTHTWIN_TRANSFORM_ENDPOINT; SYNTHTWIN_API_TOKEN supplies a bearer token.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import CorpusHandle, EventSequence, ingest_corpus, preprocess_corpus
from .embedding import DEFAULT_MOCK_DIM, MOCK_MODEL_ID, EmbeddingVector
from .evaluation import load_copes, run_benchmark, write_report
from .inversion import RegistryInversionProvider, invert
from .pipeline import PipelineConfig, Providers, decide_causality, segment_study_unit, verdict_record
from .retrieval import build_index, load_index, save_index

logger = logging.getLogger(__name__)

ENV_ENDPOINTS = {
    "embed": "SYNTHTWIN_EMBED_ENDPOINT",
    "invert": "SYNTHTWIN_INVERT_ENDPOINT",
    "judge": "SYNTHTWIN_JUDGE_ENDPOINT",
    "transform": "SYNTHTWIN_TRANSFORM_ENDPOINT",
}
ENV_TOKEN = "SYNTHTWIN_API_TOKEN"


@dataclass
class RunConfig:
    """Resolved configuration: file values, then flags, then environment."""

    mode: str = "mock"
    n: int = 100
    max_keep: int = 5
    min_keep: int = 2
    cos_threshold: float = 0.8
    lam: float = 1.0
    steps: int = 10
    beam_width: int = 4
    parallelism: int = 1
    mock_dim: int = DEFAULT_MOCK_DIM
    embedding_model: str = MOCK_MODEL_ID
    endpoints: dict[str, str] = field(default_factory=dict)

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(
            n=self.n,
            max_keep=self.max_keep,
            min_keep=self.min_keep,
            cos_threshold=self.cos_threshold,
            lam=self.lam,
            steps=self.steps,
            beam_width=self.beam_width,
            mode=self.mode,
            endpoints=dict(self.endpoints),
        )

    def providers(self, cache_path: str | None = None) -> Providers:
        if self.mode == "mock":
            return Providers.mock(dim=self.mock_dim, cache_path=cache_path)
        if self.mode == "live":
            missing = {"embed", "invert", "judge"} - set(self.endpoints)
            if missing:
                raise SystemExit(
                    f"live mode needs endpoints for {sorted(missing)}; set them in the "
                    "config file or the SYNTHTWIN_*_ENDPOINT environment variables"
                )
            return Providers.live(
                self.endpoints,
                embedding_model_id=self.embedding_model,
                cache_path=cache_path,
                token=os.environ.get(ENV_TOKEN),
            )
        raise SystemExit(f"unknown mode {self.mode!r}; use 'mock' or 'live'")


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        for key in ("mode", "n", "max_keep", "min_keep", "cos_threshold", "steps", "beam_width",
                    "parallelism", "mock_dim", "embedding_model"):
            if key in raw:
                setattr(cfg, key, raw[key])
        if "lambda" in raw:
            cfg.lam = raw["lambda"]
        if "endpoints" in raw:
            cfg.endpoints.update(raw["endpoints"])
    for key in ("mode", "n", "max_keep", "min_keep", "cos_threshold", "lam", "steps",
                "beam_width", "parallelism"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    for name, env_var in ENV_ENDPOINTS.items():
        if name not in cfg.endpoints and os.environ.get(env_var):
            cfg.endpoints[name] = os.environ[env_var]
    return cfg


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--mode", choices=("mock", "live"), default=None,
                        help="provider mode (default: mock)")
    parser.add_argument("--n", type=int, default=None, help="retrieval size (default: 100)")
    parser.add_argument("--cos-threshold", dest="cos_threshold", type=float, default=None,
                        help="cosine threshold for pretreatment similarity and treatment dissimilarity (default: 0.8)")
    parser.add_argument("--lambda", dest="lam", type=float, default=None,
                        help="ridge regularization strength (default: 1.0)")
    parser.add_argument("--steps", type=int, default=None, help="inversion correction steps (default: 10)")
    parser.add_argument("--beam-width", dest="beam_width", type=int, default=None,
                        help="inversion beam width (default: 4)")
    parser.add_argument("--min-keep", dest="min_keep", type=int, default=None,
                        help="minimum donors required for a verdict (default: 2)")
    parser.add_argument("--max-keep", dest="max_keep", type=int, default=None,
                        help="maximum donors kept for synthesis (default: 5)")
    parser.add_argument("--parallelism", type=int, default=None,
                        help="concurrent pair evaluations (default: 1)")


def _load_corpus(args: argparse.Namespace, run_cfg: RunConfig) -> CorpusHandle:
    corpus = ingest_corpus(args.corpus)
    preprocessed = getattr(args, "preprocessed", None)
    providers_transform = run_cfg.providers(cache_path=None).transform
    preprocess_corpus(corpus, providers_transform, cache_path=preprocessed,
                      max_workers=max(1, run_cfg.parallelism))
    return corpus


def cmd_ingest(args: argparse.Namespace) -> int:
    run_cfg = resolve_config(args)
    corpus = ingest_corpus(args.corpus)
    providers = run_cfg.providers()
    preprocess_corpus(corpus, providers.transform, cache_path=args.out,
                      max_workers=max(1, run_cfg.parallelism))
    print(f"preprocessed {len(corpus)} documents -> {args.out}")
    return 0


def cmd_index(args: argparse.Namespace) -> int:
    run_cfg = resolve_config(args)
    corpus = _load_corpus(args, run_cfg)
    index = build_index(corpus, field_name=args.field)
    save_index(index, args.out)
    print(f"indexed {index.n_docs} documents ({args.field} field) -> {args.out}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    run_cfg = resolve_config(args)
    cfg = run_cfg.pipeline_config()
    providers = run_cfg.providers(cache_path=args.cache)

    study_spec = json.loads(Path(args.study).read_text(encoding="utf-8"))
    events = EventSequence(tuple(study_spec["events"]), source_id=str(study_spec.get("story_id", "study")))
    study = segment_study_unit(events, int(study_spec["treatment_idx"]), transform=providers.transform)

    corpus = _load_corpus(args, run_cfg)
    if args.index and Path(args.index).exists():
        index = load_index(args.index)
    else:
        index = build_index(corpus, field_name="anonymized")
        if args.index:
            save_index(index, args.index)

    verdict = decide_causality(study, corpus, index, cfg, providers)
    record = verdict_record(events.source_id, study.treatment_idx, verdict)
    output = json.dumps(record, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(output + "\n", encoding="utf-8")
    print(output)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    run_cfg = resolve_config(args)
    cfg = run_cfg.pipeline_config()
    providers = run_cfg.providers(cache_path=args.cache)
    dataset = load_copes(args.dataset)

    corpus = index = None
    if args.method == "synthetic_control":
        if not args.corpus:
            raise SystemExit("--corpus is required for the synthetic_control method")
        corpus = _load_corpus(args, run_cfg)
        if args.index and Path(args.index).exists():
            index = load_index(args.index)
        else:
            index = build_index(corpus, field_name="anonymized")
            if args.index:
                save_index(index, args.index)

    report = run_benchmark(
        dataset,
        method=args.method,
        cfg=cfg,
        providers=providers,
        corpus=corpus,
        index=index,
        manifest_path=args.manifest,
        indeterminate_policy=args.indeterminate_policy,
        parallelism=max(1, run_cfg.parallelism),
    )
    write_report(report, args.out, method=args.method, cfg=cfg,
                 indeterminate_policy=args.indeterminate_policy)
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    return 0


def cmd_invert_debug(args: argparse.Namespace) -> int:
    run_cfg = resolve_config(args)
    payload = json.loads(Path(args.vector).read_text(encoding="utf-8"))
    values = payload["vector"] if isinstance(payload, dict) else payload

    if run_cfg.mode == "live":
        providers = run_cfg.providers()
        provider = providers.inverter
        model_id = run_cfg.embedding_model
    else:
        if not args.registry:
            raise SystemExit("mock invert-debug needs --registry (JSONL of {\"text\", \"vector\"})")
        pairs = []
        with Path(args.registry).open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    record = json.loads(line)
                    pairs.append((record["text"], EmbeddingVector(record["vector"], MOCK_MODEL_ID)))
        provider = RegistryInversionProvider(pairs)
        model_id = MOCK_MODEL_ID

    vector = EmbeddingVector(values, model_id)
    text = invert(provider, vector, steps=run_cfg.steps, beam_width=run_cfg.beam_width)
    print(json.dumps({"text": text}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synthtwin",
        description="Event causality identification via synthetic-control twins.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="preprocess a raw corpus into an event-sequence cache")
    p_ingest.add_argument("--corpus", required=True, help="raw corpus JSONL ({'id', 'text'} per line)")
    p_ingest.add_argument("--out", required=True, help="preprocessed cache JSONL to write")
    _add_config_flags(p_ingest)
    p_ingest.set_defaults(func=cmd_ingest)

    p_index = sub.add_parser("index", help="build and save the retrieval index")
    p_index.add_argument("--corpus", required=True)
    p_index.add_argument("--preprocessed", help="preprocessed cache JSONL (reused when present)")
    p_index.add_argument("--field", choices=("raw", "anonymized"), default="anonymized")
    p_index.add_argument("--out", required=True, help="index file to write")
    _add_config_flags(p_index)
    p_index.set_defaults(func=cmd_index)

    p_run = sub.add_parser("run", help="evaluate one study unit")
    p_run.add_argument("--study", required=True,
                       help="JSON file: {'story_id', 'events': [...], 'treatment_idx': int}")
    p_run.add_argument("--corpus", required=True)
    p_run.add_argument("--preprocessed", help="preprocessed cache JSONL (reused when present)")
    p_run.add_argument("--index", help="index file (loaded if present, else built and saved)")
    p_run.add_argument("--cache", help="embedding cache file")
    p_run.add_argument("--out", help="write the verdict record to this file as well")
    _add_config_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="run a benchmark dataset")
    p_eval.add_argument("--dataset", required=True, help="benchmark JSONL (5 events, 4 labels per line)")
    p_eval.add_argument("--method", choices=("synthetic_control", "counterfactual_prompting"),
                        default="synthetic_control")
    p_eval.add_argument("--corpus", help="raw corpus JSONL (required for synthetic_control)")
    p_eval.add_argument("--preprocessed", help="preprocessed cache JSONL (reused when present)")
    p_eval.add_argument("--index", help="index file (loaded if present, else built and saved)")
    p_eval.add_argument("--cache", help="embedding cache file")
    p_eval.add_argument("--manifest", help="per-pair manifest JSONL; enables resuming")
    p_eval.add_argument("--indeterminate-policy", choices=("as_negative", "excluded"),
                        default="as_negative")
    p_eval.add_argument("--out", required=True, help="report JSON to write")
    _add_config_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_invert = sub.add_parser("invert-debug", help="invert one embedding vector to text")
    p_invert.add_argument("--vector", required=True, help="JSON file holding {'vector': [...]} or a bare list")
    p_invert.add_argument("--registry", help="mock registry JSONL of {'text', 'vector'}")
    _add_config_flags(p_invert)
    p_invert.set_defaults(func=cmd_invert_debug)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("SYNTHTWIN_LOG", "WARNING"),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
