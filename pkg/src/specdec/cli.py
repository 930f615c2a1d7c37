"""Command-line entry point: run, sweep, stats, serve-oracle."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .bundled import resolve_corpus_ref
from .decoding import (
    DecodeOptions,
    baseline_decode,
    speculative_decode,
    write_trace,
    _atomic_write,
)
from .metrics import (
    LosslessnessError,
    compute_metrics,
    sweep,
    write_sweep_csv,
)
from .oracle import CostModel, OracleError, OracleSpec, make_oracle
from .server import OracleServer
from .tokenizer import (
    byte_vocab,
    corpus_stats,
    decode as detokenize,
    encode,
    load_vocab,
    train_bpe,
    word_vocab,
)

log = logging.getLogger("specdec.cli")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_LOSSLESSNESS = 2


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    seed: int
    corpus_ref: str
    prompt_tokens: int
    tokenizer_mode: str
    vocab_path: str | None
    bpe_train_size: int | None
    oracle_kind: str
    markov_order: int
    endpoint: str | None
    decode: DecodeOptions
    cost: CostModel
    trace_path: str | None
    report_path: str | None


def load_config(path: str, overrides: argparse.Namespace | None = None) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a JSON object")

    decode_raw = dict(raw.get("decode", {}))
    oracle_raw = dict(raw.get("oracle", {"kind": "replay"}))
    tok_raw = dict(raw.get("tokenizer", {"mode": "byte"}))
    cost_raw = dict(raw.get("cost_model", {}))

    cfg = RunConfig(
        seed=int(raw.get("seed", 0)),
        corpus_ref=raw.get("corpus", ""),
        prompt_tokens=int(raw.get("prompt_tokens", 64)),
        tokenizer_mode=tok_raw.get("mode", "byte"),
        vocab_path=tok_raw.get("vocab_path"),
        bpe_train_size=tok_raw.get("train_size"),
        oracle_kind=oracle_raw.get("kind", "replay"),
        markov_order=int(oracle_raw.get("order", 2)),
        endpoint=oracle_raw.get("endpoint"),
        decode=DecodeOptions(
            n_max=int(decode_raw.get("n_max", 5)),
            k_draft=int(decode_raw.get("k_draft", 7)),
            max_new_tokens=int(decode_raw.get("max_new_tokens", 128)),
            runtime_update=bool(decode_raw.get("runtime_update", True)),
            stop_at_eos=bool(decode_raw.get("stop_at_eos", True)),
            fixed_level_only=bool(decode_raw.get("fixed_level_only", False)),
        ),
        cost=CostModel(
            prefill_per_token=float(cost_raw.get("prefill_per_token", 0.002)),
            verify_base=float(cost_raw.get("verify_base", 1.0)),
            verify_per_token=float(cost_raw.get("verify_per_token", 0.05)),
        ),
        trace_path=raw.get("trace_path"),
        report_path=raw.get("report_path"),
    )
    if not cfg.corpus_ref:
        raise ConfigError(f"config {path} is missing 'corpus'")
    if not cfg.corpus_ref.startswith("bundled:"):
        if not Path(cfg.corpus_ref).exists():
            raise ConfigError(f"corpus file not found: {cfg.corpus_ref}")
    if cfg.vocab_path is not None and not Path(cfg.vocab_path).is_file():
        raise ConfigError(f"vocab file not found: {cfg.vocab_path}")

    if overrides is not None:
        if getattr(overrides, "n", None) is not None:
            cfg.decode.n_max = overrides.n
        if getattr(overrides, "k", None) is not None:
            cfg.decode.k_draft = overrides.k
        if getattr(overrides, "max_new_tokens", None) is not None:
            cfg.decode.max_new_tokens = overrides.max_new_tokens
        if getattr(overrides, "seed", None) is not None:
            cfg.seed = overrides.seed
        if getattr(overrides, "no_runtime_update", False):
            cfg.decode.runtime_update = False
        if getattr(overrides, "fixed_level_only", False):
            cfg.decode.fixed_level_only = True
        if getattr(overrides, "trace", None) is not None:
            cfg.trace_path = overrides.trace
        if getattr(overrides, "report", None) is not None:
            cfg.report_path = overrides.report
    return cfg


def _build_vocab(cfg: RunConfig, corpus: bytes):
    if cfg.vocab_path is not None:
        return load_vocab(cfg.vocab_path)
    if cfg.tokenizer_mode == "byte":
        return byte_vocab()
    if cfg.tokenizer_mode == "whitespace":
        return word_vocab(corpus)
    if cfg.tokenizer_mode == "bpe":
        return train_bpe(corpus, cfg.bpe_train_size or 512)
    raise ConfigError(f"unknown tokenizer mode {cfg.tokenizer_mode!r}")


def _build_run(cfg: RunConfig) -> tuple[list[int], OracleSpec, object]:
    corpus = resolve_corpus_ref(cfg.corpus_ref)
    vocab = _build_vocab(cfg, corpus)
    ids = encode(corpus, vocab, cfg.tokenizer_mode)
    if len(ids) <= cfg.prompt_tokens:
        raise ConfigError(
            f"corpus has only {len(ids)} tokens; prompt_tokens={cfg.prompt_tokens} leaves no target"
        )
    prompt = ids[: cfg.prompt_tokens]
    source = {"corpus": cfg.corpus_ref, "mode": cfg.tokenizer_mode, "prompt_tokens": cfg.prompt_tokens}
    if cfg.oracle_kind == "replay":
        spec = OracleSpec(
            kind="replay",
            prompt=tuple(prompt),
            target=tuple(ids[cfg.prompt_tokens :]),
            eos=vocab.eos,
            source=source,
        )
    elif cfg.oracle_kind == "markov":
        spec = OracleSpec(
            kind="markov",
            corpus=tuple(ids),
            order=cfg.markov_order,
            seed=cfg.seed,
            eos=None,
            source=source,
        )
    elif cfg.oracle_kind == "external":
        if not cfg.endpoint:
            raise ConfigError("external oracle needs an 'endpoint'")
        spec = OracleSpec(kind="external", endpoint=cfg.endpoint, source=source)
    else:
        raise ConfigError(f"unknown oracle kind {cfg.oracle_kind!r}")
    return prompt, spec, vocab


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config, args)
        prompt, spec, vocab = _build_run(cfg)
        base = baseline_decode(make_oracle(spec), prompt, cfg.decode, cfg.cost)
        accel = speculative_decode(make_oracle(spec), prompt, cfg.decode, cfg.cost)
    except (ConfigError, OracleError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        metrics = compute_metrics(accel, base, cfg.cost)
    except LosslessnessError as exc:
        print(f"losslessness violation: {exc}", file=sys.stderr)
        return EXIT_LOSSLESSNESS

    if cfg.trace_path:
        write_trace(cfg.trace_path, accel, spec.to_json(), cfg.cost)
    text = detokenize(accel.output, vocab).decode("utf-8", errors="replace")
    summary = {
        "config": str(args.config),
        "n": cfg.decode.n_max,
        "k": cfg.decode.k_draft,
        "max_new_tokens": cfg.decode.max_new_tokens,
        "runtime_update": cfg.decode.runtime_update,
        "fixed_level_only": cfg.decode.fixed_level_only,
        "output_len": len(accel.output),
        "llm_calls": accel.totals.llm_calls,
        "baseline_llm_calls": base.totals.llm_calls,
        "metrics": metrics.to_json(),
    }
    if cfg.report_path:
        lines = [
            "decode report",
            "=============",
            f"n_max={cfg.decode.n_max} k_draft={cfg.decode.k_draft} "
            f"max_new_tokens={cfg.decode.max_new_tokens}",
            f"runtime_update={cfg.decode.runtime_update} "
            f"fixed_level_only={cfg.decode.fixed_level_only}",
            f"oracle={cfg.oracle_kind} prompt_tokens={len(prompt)}",
            "",
            f"output tokens: {len(accel.output)}",
            f"steps: {metrics.steps}",
            f"alpha (draft hit ratio): {metrics.alpha:.4f}",
            f"mean committed per step: {metrics.mean_committed_per_step:.4f}",
            f"speedup_sim: {metrics.speedup_sim:.4f}",
            f"bound (alpha*K+1): {metrics.theoretical_bound:.4f}",
            "",
            "output text",
            "-----------",
            text,
            "",
        ]
        _atomic_write(cfg.report_path, "\n".join(lines))
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        print(
            f"generated {len(accel.output)} tokens in {metrics.steps} steps | "
            f"alpha={metrics.alpha:.4f} speedup_sim={metrics.speedup_sim:.4f} "
            f"bound={metrics.theoretical_bound:.4f}"
        )
    return EXIT_OK


def _parse_grid(text: str) -> list[int]:
    values: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            values.extend(range(int(lo), int(hi) + 1))
        else:
            values.append(int(part))
    return values


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        n_grid = _parse_grid(args.n_grid)
        k_grid = _parse_grid(args.k_grid)
        if not n_grid or not k_grid:
            print("error: empty sweep grid", file=sys.stderr)
            return EXIT_ERROR
        cfg = load_config(args.config, args)
        prompt, spec, _ = _build_run(cfg)
        table = sweep(
            spec,
            [prompt],
            n_grid,
            k_grid,
            cfg.decode,
            cfg.cost,
            fixed_level_only=cfg.decode.fixed_level_only,
        )
        table.config["seed"] = cfg.seed
        out_csv = Path(args.out)
        sidecar = out_csv.with_suffix(out_csv.suffix + ".config.json")
        write_sweep_csv(table, out_csv, sidecar)
    except (ConfigError, OracleError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.json:
        print(json.dumps({"rows": len(table.rows), "csv": str(out_csv), "sidecar": str(sidecar)}))
    else:
        print(f"wrote {len(table.rows)} rows to {out_csv} (config: {sidecar})")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    try:
        root = Path(args.corpus)
        if args.corpus.startswith("bundled:"):
            files = [args.corpus]
        elif root.is_dir():
            files = [str(f) for f in sorted(root.iterdir()) if f.is_file()]
        elif root.is_file():
            files = [str(root)]
        else:
            print(f"error: corpus not found: {args.corpus}", file=sys.stderr)
            return EXIT_ERROR
        whole = b"".join(resolve_corpus_ref(f) for f in files)
        if args.vocab:
            vocab = load_vocab(args.vocab)
        elif args.mode == "bpe":
            vocab = train_bpe(whole, args.train_size)
        elif args.mode == "whitespace":
            vocab = word_vocab(whole)
        else:
            vocab = byte_vocab()
        rows = []
        for f in files:
            st = corpus_stats(resolve_corpus_ref(f), vocab, args.mode)
            rows.append({"file": f, "words": st.word_count, "tokens": st.token_count, "ratio": st.ratio})
        agg = corpus_stats(whole, vocab, args.mode)
        rows.append({"file": "<aggregate>", "words": agg.word_count, "tokens": agg.token_count, "ratio": agg.ratio})
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.json:
        print(json.dumps(rows, sort_keys=True))
    else:
        for r in rows:
            print(f"{r['file']}: words={r['words']} tokens={r['tokens']} ratio={r['ratio']:.4f}")
    return EXIT_OK


def cmd_serve_oracle(args: argparse.Namespace) -> int:
    try:
        host, _, port = args.listen.rpartition(":")
        if not host or not port.isdigit():
            print(f"error: bad --listen {args.listen!r}; expected HOST:PORT", file=sys.stderr)
            return EXIT_ERROR
        corpus = resolve_corpus_ref(args.corpus)
        vocab = byte_vocab()
        ids = encode(corpus, vocab, "byte")
        if args.kind == "markov":
            spec = OracleSpec(kind="markov", corpus=tuple(ids), order=args.order, seed=args.seed)
        elif args.kind == "replay":
            spec = OracleSpec(
                kind="replay",
                prompt=tuple(ids[: args.prompt_tokens]),
                target=tuple(ids[args.prompt_tokens :]),
                eos=vocab.eos,
            )
        else:
            print(f"error: unknown oracle kind {args.kind!r}", file=sys.stderr)
            return EXIT_ERROR
        server = OracleServer(lambda: make_oracle(spec), host=host, port=int(port))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"serving {args.kind} oracle on {server.address}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specdec",
        description="Lossless n-gram speculative decoding engine and benchmark harness",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="decode once with both loops and report metrics")
    run.add_argument("--config", required=True, help="JSON run config")
    run.add_argument("--n", type=int, help="override n_max")
    run.add_argument("--k", type=int, help="override k_draft")
    run.add_argument("--max-new-tokens", type=int, dest="max_new_tokens")
    run.add_argument("--seed", type=int)
    run.add_argument("--no-runtime-update", action="store_true", dest="no_runtime_update")
    run.add_argument("--fixed-level-only", action="store_true", dest="fixed_level_only")
    run.add_argument("--trace", help="write a JSONL step trace here")
    run.add_argument("--report", help="write a human-readable report here")
    run.add_argument("--json", action="store_true", help="machine-parseable stdout")
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="grid sweep over n and k")
    sw.add_argument("--config", required=True)
    sw.add_argument("--n-grid", required=True, help="e.g. 2-6 or 2,3,5")
    sw.add_argument("--k-grid", required=True, help="e.g. 1-8")
    sw.add_argument("--out", required=True, help="CSV output path")
    sw.add_argument("--seed", type=int)
    sw.add_argument("--max-new-tokens", type=int, dest="max_new_tokens")
    sw.add_argument("--no-runtime-update", action="store_true", dest="no_runtime_update")
    sw.add_argument("--fixed-level-only", action="store_true", dest="fixed_level_only")
    sw.add_argument("--json", action="store_true")
    sw.set_defaults(func=cmd_sweep)

    st = sub.add_parser("stats", help="word/token counts for a corpus")
    st.add_argument("--corpus", required=True, help="file, directory, or bundled:NAME")
    st.add_argument("--mode", default="byte", choices=["byte", "whitespace", "bpe"])
    st.add_argument("--vocab", help="vocab JSON (otherwise built from the corpus)")
    st.add_argument("--train-size", type=int, default=512, dest="train_size")
    st.add_argument("--json", action="store_true")
    st.set_defaults(func=cmd_stats)

    srv = sub.add_parser("serve-oracle", help="serve an oracle over TCP")
    srv.add_argument("--kind", default="markov", choices=["markov", "replay"])
    srv.add_argument("--corpus", required=True)
    srv.add_argument("--order", type=int, default=2)
    srv.add_argument("--seed", type=int, default=0)
    srv.add_argument("--prompt-tokens", type=int, default=64, dest="prompt_tokens")
    srv.add_argument("--listen", default="127.0.0.1:7711")
    srv.set_defaults(func=cmd_serve_oracle)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


def serve_oracle_entry(argv: list[str] | None = None) -> int:
    """Standalone `serve-oracle` console script."""
    args = ["serve-oracle"] + (argv if argv is not None else sys.argv[1:])
    return main(args)


if __name__ == "__main__":
    sys.exit(main())
