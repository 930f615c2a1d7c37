"""Deterministic autoregressive model oracles and the latency cost model.

An oracle owns a cache of consumed tokens. `extend(tokens)` consumes the
batch and returns one greedy prediction per consumed position; for the same
total consumed prefix the predictions are identical no matter how the
prefix was chunked into calls. Built-in oracles also support
`truncate_cache(length)` so a decoder can roll back rejected draft tokens
in O(1); oracles without it are rolled back by reset-and-replay.
"""

from __future__ import annotations

import hashlib
import json
import socket
from dataclasses import dataclass, field

__all__ = [
    "OracleError",
    "OracleConnectError",
    "OracleTransportError",
    "OracleProtocolError",
    "CostModel",
    "DEFAULT_COST_MODEL",
    "simulate_cost",
    "ReplayOracle",
    "MarkovOracle",
    "ExternalOracle",
    "OracleSpec",
    "make_oracle",
]


class OracleError(Exception):
    """Base class for oracle failures."""


class OracleConnectError(OracleError):
    """Could not establish a connection to an external oracle."""


class OracleTransportError(OracleError):
    """Connection failed mid-conversation."""


class OracleProtocolError(OracleError):
    """The remote peer violated the wire protocol."""


@dataclass(frozen=True)
class CostModel:
    """Affine per-call latency in abstract time units.

    verify_per_token defaults well below verify_base: batched verification
    of a few extra tokens costs almost the same as a single-token step.
    """

    prefill_per_token: float = 0.002
    verify_base: float = 1.0
    verify_per_token: float = 0.05

    def __post_init__(self) -> None:
        for name in ("prefill_per_token", "verify_base", "verify_per_token"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def to_json(self) -> dict:
        return {
            "prefill_per_token": self.prefill_per_token,
            "verify_base": self.verify_base,
            "verify_per_token": self.verify_per_token,
        }


DEFAULT_COST_MODEL = CostModel()


def simulate_cost(cost_model: CostModel, call_kind: str, batch_len: int) -> float:
    """Simulated latency of one model call over `batch_len` tokens."""
    if batch_len < 1:
        raise ValueError(f"batch_len must be >= 1, got {batch_len}")
    if call_kind == "prefill":
        return cost_model.prefill_per_token * batch_len
    if call_kind == "verify":
        return cost_model.verify_base + cost_model.verify_per_token * batch_len
    raise ValueError(f"unknown call kind {call_kind!r}")


def _check_batch(tokens: list[int]) -> None:
    if not tokens:
        raise ValueError("extend requires at least one token")


class ReplayOracle:
    """Teacher-forcing oracle that reads a fixed script.

    The prediction after consuming c tokens is script[c] where script is
    prompt + target, and eos once the script is exhausted. Predictions
    depend only on the consumed count, never on token values, so a decoder
    fed wrong tokens is pulled back on script and acceptance statistics
    are exactly measurable.
    """

    def __init__(self, prompt: list[int], target: list[int], eos: int) -> None:
        if not target:
            raise ValueError("replay target must be non-empty")
        self._script: list[int] = list(prompt) + list(target)
        self.eos = eos
        self.prompt_len = len(prompt)
        self.vocab_size = max(self._script + [eos]) + 1
        self._consumed = 0

    @property
    def consumed_len(self) -> int:
        return self._consumed

    def extend(self, tokens: list[int]) -> list[int]:
        _check_batch(tokens)
        base = self._consumed
        preds = []
        for j in range(len(tokens)):
            pos = base + j + 1
            preds.append(self._script[pos] if pos < len(self._script) else self.eos)
        self._consumed += len(tokens)
        return preds

    def reset(self) -> None:
        self._consumed = 0

    def truncate_cache(self, length: int) -> None:
        if not (0 <= length <= self._consumed):
            raise ValueError(f"cannot truncate cache of {self._consumed} to {length}")
        self._consumed = length


class MarkovOracle:
    """Greedy fixed-order Markov predictor over a training corpus.

    Ties break to the smallest token id. Contexts never seen in the corpus
    map to a seeded-hash token, so different seeds explore different
    trajectories while staying fully deterministic.
    """

    def __init__(self, corpus: list[int], order: int, seed: int, eos: int | None = None) -> None:
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        if len(corpus) <= order:
            raise ValueError(f"corpus of length {len(corpus)} too short for order {order}")
        self.order = order
        self.seed = seed
        self.eos = eos
        self.vocab_size = max(corpus) + 1
        if eos is not None:
            self.vocab_size = max(self.vocab_size, eos + 1)
        self._seed_key = str(seed).encode("ascii")
        self._consumed: list[int] = []
        counts: dict[tuple[int, ...], dict[int, int]] = {}
        for i in range(len(corpus) - order):
            ctx = tuple(corpus[i : i + order])
            nxt = corpus[i + order]
            row = counts.setdefault(ctx, {})
            row[nxt] = row.get(nxt, 0) + 1
        # precomputed greedy choice per context
        self._best: dict[tuple[int, ...], int] = {
            ctx: max(row.items(), key=lambda kv: (kv[1], -kv[0]))[0] for ctx, row in counts.items()
        }

    @property
    def consumed_len(self) -> int:
        return len(self._consumed)

    def _predict(self) -> int:
        ctx = tuple(self._consumed[-self.order :])
        hit = self._best.get(ctx)
        if hit is not None:
            return hit
        digest = hashlib.blake2b(
            b",".join(b"%d" % t for t in ctx), digest_size=8, key=self._seed_key
        ).digest()
        return int.from_bytes(digest, "big") % self.vocab_size

    def extend(self, tokens: list[int]) -> list[int]:
        _check_batch(tokens)
        preds = []
        for tok in tokens:
            self._consumed.append(tok)
            preds.append(self._predict())
        return preds

    def reset(self) -> None:
        self._consumed.clear()

    def truncate_cache(self, length: int) -> None:
        if not (0 <= length <= len(self._consumed)):
            raise ValueError(f"cannot truncate cache of {len(self._consumed)} to {length}")
        del self._consumed[length:]


class ExternalOracle:
    """Client for the newline-delimited JSON oracle protocol.

    One request in flight per connection. Offers no cache truncation, so
    decoders roll it back via reset-and-replay.
    """

    def __init__(self, endpoint: str, *, timeout: float = 10.0) -> None:
        host, _, port = endpoint.rpartition(":")
        if not host or not port.isdigit():
            raise OracleConnectError(f"bad endpoint {endpoint!r}; expected HOST:PORT")
        try:
            self._sock = socket.create_connection((host, int(port)), timeout=timeout)
        except OSError as exc:
            raise OracleConnectError(f"cannot connect to {endpoint}: {exc}") from exc
        self._file = self._sock.makefile("rwb")
        self.endpoint = endpoint
        self._consumed = 0
        info = self._request({"op": "info"})
        try:
            self.vocab_size = int(info["vocab_size"])
            eos = int(info["eos"])
        except (KeyError, TypeError, ValueError) as exc:
            raise OracleProtocolError(f"bad info reply: {info!r}") from exc
        self.eos = None if eos < 0 else eos

    @property
    def consumed_len(self) -> int:
        return self._consumed

    def _request(self, payload: dict) -> dict:
        try:
            self._file.write(json.dumps(payload).encode("utf-8") + b"\n")
            self._file.flush()
            line = self._file.readline()
        except OSError as exc:
            raise OracleTransportError(
                f"transport failure after {self._consumed} consumed tokens: {exc}"
            ) from exc
        if not line:
            raise OracleTransportError(
                f"server closed the connection after {self._consumed} consumed tokens"
            )
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise OracleProtocolError(f"unparseable reply: {line[:200]!r}") from exc
        if not isinstance(reply, dict) or "ok" not in reply:
            raise OracleProtocolError(f"malformed reply: {reply!r}")
        if not reply["ok"]:
            raise OracleError(f"server error: {reply.get('error', 'unspecified')}")
        return reply

    def extend(self, tokens: list[int]) -> list[int]:
        _check_batch(tokens)
        reply = self._request({"op": "extend", "tokens": list(tokens)})
        preds = reply.get("predictions")
        if not isinstance(preds, list) or len(preds) != len(tokens) or not all(
            isinstance(p, int) for p in preds
        ):
            raise OracleProtocolError(f"bad predictions for batch of {len(tokens)}: {preds!r}")
        self._consumed += len(tokens)
        return preds

    def reset(self) -> None:
        self._request({"op": "reset"})
        self._consumed = 0

    def close(self) -> None:
        try:
            self._file.close()
        finally:
            self._sock.close()


@dataclass(frozen=True)
class OracleSpec:
    """Factory description of an oracle, serializable for traces/sweeps."""

    kind: str  # replay | markov | external
    prompt: tuple[int, ...] | None = None
    target: tuple[int, ...] | None = None
    corpus: tuple[int, ...] | None = None
    order: int | None = None
    seed: int | None = None
    endpoint: str | None = None
    eos: int | None = None
    source: dict | None = field(default=None, compare=False)

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind, "eos": self.eos}
        if self.source is not None:
            out["source"] = self.source
            if self.kind == "replay":
                out["prompt_len"] = len(self.prompt or ())
                out["target_len"] = len(self.target or ())
        elif self.kind == "replay":
            out["prompt"] = list(self.prompt or ())
            out["target"] = list(self.target or ())
        elif self.kind == "markov":
            out["corpus"] = list(self.corpus or ())
        if self.kind == "markov":
            out["order"] = self.order
            out["seed"] = self.seed
        if self.kind == "external":
            out["endpoint"] = self.endpoint
        return out


def make_oracle(spec: OracleSpec):
    """Build a fresh oracle instance from its spec."""
    if spec.kind == "replay":
        if spec.prompt is None or spec.target is None or spec.eos is None:
            raise ValueError("replay spec needs prompt, target, and eos")
        return ReplayOracle(list(spec.prompt), list(spec.target), spec.eos)
    if spec.kind == "markov":
        if spec.corpus is None or spec.order is None or spec.seed is None:
            raise ValueError("markov spec needs corpus, order, and seed")
        return MarkovOracle(list(spec.corpus), spec.order, spec.seed, eos=spec.eos)
    if spec.kind == "external":
        if not spec.endpoint:
            raise ValueError("external spec needs an endpoint")
        return ExternalOracle(spec.endpoint)
    raise ValueError(f"unknown oracle kind {spec.kind!r}")
