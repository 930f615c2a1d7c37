"""Lossless speculative decoding with n-gram drafting.

Candidate tokens are drafted from count tables built over the prompt and
everything generated so far, then verified in one batched call against a
deterministic autoregressive oracle. The accelerated loop emits exactly the
tokens the plain greedy loop would, only in fewer oracle calls.
"""

__version__ = "0.1.0"

from .decoding import (
    DecodeOptions,
    DecodeResult,
    DecodeTotals,
    StepRecord,
    baseline_decode,
    build_draft,
    read_trace,
    speculative_decode,
    verify_step,
    write_trace,
)
from .metrics import (
    LosslessnessError,
    RunMetrics,
    SweepRow,
    SweepTable,
    WallclockReport,
    compute_metrics,
    sim_total_time,
    sweep,
    theoretical_bound,
    wallclock_bench,
    write_sweep_csv,
)
from .ngram import NgramStore, QueryHit
from .oracle import (
    DEFAULT_COST_MODEL,
    CostModel,
    ExternalOracle,
    MarkovOracle,
    OracleConnectError,
    OracleError,
    OracleProtocolError,
    OracleSpec,
    OracleTransportError,
    ReplayOracle,
    make_oracle,
    simulate_cost,
)
from .server import OracleServer
from .tokenizer import (
    CorpusStats,
    Vocab,
    byte_vocab,
    corpus_stats,
    decode,
    encode,
    load_vocab,
    read_corpus,
    save_vocab,
    train_bpe,
    word_vocab,
)

__all__ = [
    "__version__",
    "DecodeOptions",
    "DecodeResult",
    "DecodeTotals",
    "StepRecord",
    "baseline_decode",
    "build_draft",
    "read_trace",
    "speculative_decode",
    "verify_step",
    "write_trace",
    "LosslessnessError",
    "RunMetrics",
    "SweepRow",
    "SweepTable",
    "WallclockReport",
    "compute_metrics",
    "sim_total_time",
    "sweep",
    "theoretical_bound",
    "wallclock_bench",
    "write_sweep_csv",
    "NgramStore",
    "QueryHit",
    "DEFAULT_COST_MODEL",
    "CostModel",
    "ExternalOracle",
    "MarkovOracle",
    "OracleConnectError",
    "OracleError",
    "OracleProtocolError",
    "OracleSpec",
    "OracleTransportError",
    "ReplayOracle",
    "make_oracle",
    "simulate_cost",
    "OracleServer",
    "CorpusStats",
    "Vocab",
    "byte_vocab",
    "corpus_stats",
    "decode",
    "encode",
    "load_vocab",
    "read_corpus",
    "save_vocab",
    "train_bpe",
    "word_vocab",
]
