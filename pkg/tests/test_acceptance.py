"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete.
"""

import random
import time
from collections import Counter
from contextlib import contextmanager

import pytest

from specdec import (
    CostModel,
    DecodeOptions,
    ExternalOracle,
    MarkovOracle,
    NgramStore,
    OracleSpec,
    OracleServer,
    baseline_decode,
    byte_vocab,
    compute_metrics,
    encode,
    make_oracle,
    speculative_decode,
    sweep,
    theoretical_bound,
)
from specdec.bundled import bundled_bytes

FLAT = CostModel(prefill_per_token=0.0, verify_base=1.0, verify_per_token=0.0)


@contextmanager
def criterion(num: int, title: str):
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE criterion {num} ({title}): FAIL")
        raise
    print(f"\nACCEPTANCE criterion {num} ({title}): PASS")


# ---------------------------------------------------------------- criteria 1+2


@pytest.fixture(scope="module")
def randomized_trials():
    """1000 randomized Markov-oracle trials shared by criteria 1 and 2."""
    rng = random.Random(20260810)
    results = []
    t0 = time.perf_counter()
    for trial in range(1000):
        vocab = rng.randint(16, 64)
        corpus = [rng.randrange(vocab) for _ in range(rng.randint(200, 2000))]
        order = rng.randint(1, 3)
        prompt = [rng.randrange(vocab) for _ in range(rng.randint(4, 64))]
        opts = DecodeOptions(
            n_max=rng.randint(2, 6),
            k_draft=rng.randint(1, 8),
            max_new_tokens=rng.randint(16, 256),
        )
        seed = rng.randrange(1 << 30)
        base = baseline_decode(MarkovOracle(corpus, order, seed), prompt, opts)
        accel = speculative_decode(MarkovOracle(corpus, order, seed), prompt, opts)
        results.append((trial, opts, base, accel))
    elapsed = time.perf_counter() - t0
    return results, elapsed


def test_criterion_1_losslessness(randomized_trials):
    results, elapsed = randomized_trials
    with criterion(1, "losslessness over 1000 randomized trials"):
        assert len(results) == 1000
        for trial, _, base, accel in results:
            assert accel.output == base.output, f"trial {trial} diverged"
        assert elapsed < 60.0, f"trials took {elapsed:.1f}s, budget is 60s"


def test_criterion_2_commit_bound(randomized_trials):
    results, _ = randomized_trials
    with criterion(2, "every step commits between 1 and K+1 tokens"):
        for trial, opts, _, accel in results:
            for step in accel.steps:
                committed = len(step.committed)
                assert 1 <= committed <= opts.k_draft + 1, (
                    f"trial {trial} step {step.step_index} committed {committed}"
                )


# ---------------------------------------------------------------- criterion 3


def test_criterion_3_flat_cost_identity():
    with criterion(3, "flat-cost speedup equals alpha*K + 1"):
        t0 = time.perf_counter()
        period = [10, 11, 12, 13, 14, 15]
        prompt = period * 2
        target = period * 100
        for k in range(1, 9):
            opts = DecodeOptions(n_max=2, k_draft=k, max_new_tokens=(k + 1) * 12)
            spec = OracleSpec(kind="replay", prompt=tuple(prompt), target=tuple(target), eos=999)
            base = baseline_decode(make_oracle(spec), prompt, opts, FLAT)
            accel = speculative_decode(make_oracle(spec), prompt, opts, FLAT)
            # precondition: the draft was never truncated by a query miss
            assert all(len(s.drafted) == k for s in accel.steps)
            m = compute_metrics(accel, base, FLAT)
            assert abs(m.speedup_sim - (m.alpha * k + 1.0)) < 1e-9
        assert time.perf_counter() - t0 < 5.0


# ---------------------------------------------------------------- criterion 4


def test_criterion_4_case_study_arithmetic():
    with criterion(4, "bound arithmetic for alpha=0.2059, K=7"):
        bound = theoretical_bound(0.2059, 7)
        assert bound == pytest.approx(2.4413, abs=0.0005)
        assert 2.19 <= bound


# ---------------------------------------------------------------- criterion 5


def test_criterion_5_count_equivalence():
    with criterion(5, "stored counts equal brute-force recounts"):
        rng = random.Random(555)
        t0 = time.perf_counter()
        for _ in range(200):
            n_max = rng.randint(2, 6)
            vocab = rng.randint(8, 64)
            total_len = rng.randint(50, 10000)
            init_len = rng.randint(0, total_len)
            store = NgramStore(
                [rng.randrange(vocab) for _ in range(init_len)], n_max
            )
            for _ in range(total_len - init_len):
                store.update(rng.randrange(vocab))
            seq = store.committed
            for n in range(2, n_max + 1):
                expected = Counter(
                    (tuple(seq[i : i + n - 1]), seq[i + n - 1])
                    for i in range(len(seq) - n + 1)
                )
                level = next(l for l in store.snapshot()["levels"] if l["n"] == n)
                got = {(tuple(e["context"]), e["next"]): e["count"] for e in level["entries"]}
                assert got == dict(expected)
        elapsed = time.perf_counter() - t0
        assert elapsed < 30.0, f"recounts took {elapsed:.1f}s, budget is 30s"


# ------------------------------------------------------- bundled-corpus setup


def bundled_replay_spec():
    ids = encode(bundled_bytes("repetitive.txt"), byte_vocab(), "byte")
    prompt = ids[:600]
    return OracleSpec(
        kind="replay", prompt=tuple(prompt), target=tuple(ids[600:]), eos=byte_vocab().eos
    )


def run_bundled(n, k, m=1000, runtime_update=True, fixed=False):
    spec = bundled_replay_spec()
    opts = DecodeOptions(
        n_max=n, k_draft=k, max_new_tokens=m,
        runtime_update=runtime_update, fixed_level_only=fixed,
    )
    cm = CostModel()
    base = baseline_decode(make_oracle(spec), list(spec.prompt), opts, cm)
    accel = speculative_decode(make_oracle(spec), list(spec.prompt), opts, cm)
    return accel, compute_metrics(accel, base, cm)


# ---------------------------------------------------------------- criterion 6


def test_criterion_6_multilevel_superiority():
    with criterion(6, "multi-level fallback beats fixed top order"):
        multi, _ = run_bundled(8, 7)
        fixed, _ = run_bundled(8, 7, fixed=True)
        assert multi.totals.proposed_draft_tokens >= fixed.totals.proposed_draft_tokens
        _, m5 = run_bundled(5, 7)
        _, m2 = run_bundled(2, 7)
        assert m5.speedup_sim >= m2.speedup_sim


# ---------------------------------------------------------------- criterion 7


def test_criterion_7_runtime_update_ablation():
    with criterion(7, "runtime updates do not lower the hit ratio"):
        _, live = run_bundled(5, 7)
        _, frozen = run_bundled(5, 7, runtime_update=False)
        assert live.alpha >= frozen.alpha


# ---------------------------------------------------------------- criterion 8


def test_criterion_8_speedup_plateau():
    with criterion(8, "speedup rises in K then plateaus"):
        spec = bundled_replay_spec()
        opts = DecodeOptions(n_max=5, max_new_tokens=1000)
        table = sweep(spec, [list(spec.prompt)], [5], list(range(1, 11)), opts, CostModel())
        speedups = [row.speedup_sim for row in table.rows]
        assert len(speedups) == 10
        k_star = max(range(10), key=lambda i: speedups[i])
        for i in range(k_star):
            assert speedups[i + 1] >= speedups[i] - 1e-9, (
                f"dip before K*={k_star + 1}: {speedups}"
            )
        rise = speedups[5] - speedups[0]  # K=6 vs K=1
        tail = speedups[9] - speedups[5]  # K=10 vs K=6
        assert tail < 0.3 * rise, f"tail {tail:.4f} vs 0.3*rise {0.3 * rise:.4f}"


# ---------------------------------------------------------------- criterion 9


def test_criterion_9_wire_protocol_differential():
    with criterion(9, "served oracle matches in-process oracle"):
        corpus = [i % 13 for i in range(400)]
        server = OracleServer(lambda: MarkovOracle(corpus, order=2, seed=17))
        server.start_background()
        try:
            remote = ExternalOracle(server.address)
            local = MarkovOracle(corpus, order=2, seed=17)
            rng = random.Random(99)
            for script in range(100):
                for _ in range(rng.randint(1, 8)):
                    if rng.random() < 0.2:
                        remote.reset()
                        local.reset()
                    else:
                        batch = [rng.randrange(13) for _ in range(rng.randint(1, 6))]
                        assert remote.extend(batch) == local.extend(batch)
                assert remote.consumed_len == local.consumed_len
            remote.close()
        finally:
            server.shutdown()
