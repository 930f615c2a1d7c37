"""Token-level n-gram count tables with highest-order-first fallback lookup.

A store keeps one count table per order in [2, n_max]. Counts are raw window
frequencies over the committed token sequence; queries return the count
argmax (ties: most recently reinforced, then smallest token id). No
smoothing or probability output: only the argmax is ever consumed.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["QueryHit", "NgramStore"]


@dataclass(frozen=True)
class QueryHit:
    token: int
    level: int
    count: int


class NgramStore:
    """Single-owner mutable store; not internally synchronized.

    `committed` always holds every token fed via the constructor or
    `update`. With `runtime_update=False` updates append to `committed`
    but leave all counts frozen at their post-construction state.
    """

    def __init__(
        self,
        token_ids: list[int],
        n_max: int,
        *,
        runtime_update: bool = True,
        max_contexts: int | None = None,
    ) -> None:
        if n_max < 2:
            raise ValueError(f"n_max must be >= 2, got {n_max}")
        if max_contexts is not None and max_contexts < 1:
            raise ValueError("max_contexts must be positive when set")
        self.n_max = n_max
        self.runtime_update = runtime_update
        self.max_contexts = max_contexts
        self.committed: list[int] = []
        self._ordinal = 0
        # per order: context tuple -> {next token -> [count, last ordinal]}
        self._tables: dict[int, dict[tuple[int, ...], dict[int, list[int]]]] = {
            n: {} for n in range(2, n_max + 1)
        }
        # per order: context tuple -> last ordinal that touched it (for eviction)
        self._touch: dict[int, dict[tuple[int, ...], int]] = {n: {} for n in range(2, n_max + 1)}
        for tok in token_ids:
            self.committed.append(tok)
            self._count_windows_at_tail()

    def update(self, token: int) -> None:
        self.committed.append(token)
        if self.runtime_update:
            self._count_windows_at_tail()

    def _count_windows_at_tail(self) -> None:
        length = len(self.committed)
        for n in range(2, self.n_max + 1):
            if length >= n:
                ctx = tuple(self.committed[length - n : length - 1])
                self._bump(n, ctx, self.committed[-1])

    def _bump(self, n: int, ctx: tuple[int, ...], nxt: int) -> None:
        self._ordinal += 1
        table = self._tables[n]
        row = table.get(ctx)
        if row is None:
            row = table[ctx] = {}
            if self.max_contexts is not None and len(table) > self.max_contexts:
                self._evict(n, keep=ctx)
        rec = row.get(nxt)
        if rec is None:
            row[nxt] = [1, self._ordinal]
        else:
            rec[0] += 1
            rec[1] = self._ordinal
        self._touch[n][ctx] = self._ordinal

    def _evict(self, n: int, keep: tuple[int, ...]) -> None:
        touch = self._touch[n]
        victim = min((c for c in self._tables[n] if c != keep), key=lambda c: touch.get(c, 0))
        del self._tables[n][victim]
        touch.pop(victim, None)

    def query(self, context: list[int] | tuple[int, ...], n: int) -> int | None:
        """Count-argmax next token for the last n-1 tokens of `context`, or
        None when that context was never seen at order n."""
        hit = self._query_hit(context, n)
        return None if hit is None else hit.token

    def _query_hit(self, context: list[int] | tuple[int, ...], n: int) -> QueryHit | None:
        if not (2 <= n <= self.n_max):
            raise ValueError(f"query order {n} outside [2, {self.n_max}]")
        if len(context) < n - 1:
            raise ValueError(f"context of length {len(context)} too short for order {n}")
        row = self._tables[n].get(tuple(context[len(context) - (n - 1) :]))
        if not row:
            return None
        best_tok = -1
        best_key: tuple[int, int, int] | None = None
        for tok, (count, ordinal) in row.items():
            key = (count, ordinal, -tok)
            if best_key is None or key > best_key:
                best_key = key
                best_tok = tok
        assert best_key is not None
        return QueryHit(token=best_tok, level=n, count=best_key[0])

    def query_multilevel(
        self, context_tail: list[int] | tuple[int, ...], *, min_level: int = 2
    ) -> QueryHit | None:
        """Try orders n_max down to `min_level`, skipping orders that need
        more history than `context_tail` offers; first hit wins."""
        for n in range(self.n_max, min_level - 1, -1):
            if len(context_tail) >= n - 1:
                hit = self._query_hit(context_tail, n)
                if hit is not None:
                    return hit
        return None

    def count_of(self, n: int, context: list[int] | tuple[int, ...], nxt: int) -> int:
        if not (2 <= n <= self.n_max):
            raise ValueError(f"order {n} outside [2, {self.n_max}]")
        row = self._tables[n].get(tuple(context))
        if not row:
            return 0
        rec = row.get(nxt)
        return rec[0] if rec else 0

    def snapshot(self) -> dict:
        """JSON-friendly dump, entries ordered by (context, next) for
        reproducible diffs."""
        levels = []
        for n in range(2, self.n_max + 1):
            entries = []
            for ctx in sorted(self._tables[n]):
                row = self._tables[n][ctx]
                for nxt in sorted(row):
                    count, ordinal = row[nxt]
                    entries.append(
                        {"context": list(ctx), "next": nxt, "count": count, "ordinal": ordinal}
                    )
            levels.append({"n": n, "entries": entries})
        return {"n_max": self.n_max, "levels": levels}
