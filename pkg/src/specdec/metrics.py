"""Evaluation metrics: draft hit ratio, simulated and wall-clock speed-up,
the (alpha * K) + 1 acceleration bound, and parameter sweeps over N and K.

Simulated speed-up is pure cost-model arithmetic over decode traces and is
fully deterministic; wall-clock speed-up is informational and reported
separately, never mixed into the simulated numbers.
"""

from __future__ import annotations

import json
import statistics
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from .decoding import (
    DecodeOptions,
    DecodeResult,
    baseline_decode,
    speculative_decode,
    _atomic_write,
)
from .oracle import CostModel, DEFAULT_COST_MODEL, OracleSpec, make_oracle, simulate_cost

__all__ = [
    "LosslessnessError",
    "RunMetrics",
    "SweepRow",
    "SweepTable",
    "WallclockReport",
    "theoretical_bound",
    "sim_total_time",
    "compute_metrics",
    "sweep",
    "write_sweep_csv",
    "wallclock_bench",
]

SWEEP_CSV_HEADER = "n,k,alpha,mean_committed,speedup_sim,bound,steps,output_len"


class LosslessnessError(RuntimeError):
    """Accelerated output diverged from the baseline output. Always a bug."""


def theoretical_bound(alpha: float, k_draft: int) -> float:
    """Upper bound on acceleration from hit ratio alpha at draft length K."""
    return alpha * k_draft + 1.0


@dataclass
class RunMetrics:
    alpha: float
    mean_committed_per_step: float
    speedup_sim: float
    theoretical_bound: float
    steps: int
    output_len: int
    speedup_wallclock: float | None = None

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "mean_committed_per_step": self.mean_committed_per_step,
            "speedup_sim": self.speedup_sim,
            "theoretical_bound": self.theoretical_bound,
            "steps": self.steps,
            "output_len": self.output_len,
            "speedup_wallclock": self.speedup_wallclock,
        }


def sim_total_time(result: DecodeResult, cost_model: CostModel) -> float:
    """Prefill plus one verify cost per step, recomputed from batch lengths
    so any cost model can be applied to an existing trace."""
    total = simulate_cost(cost_model, "prefill", result.prompt_len)
    for step in result.steps:
        if step.verify_batch_len > 0:
            total += simulate_cost(cost_model, "verify", step.verify_batch_len)
    return total


def compute_metrics(
    accelerated: DecodeResult,
    baseline: DecodeResult,
    cost_model: CostModel | None = None,
) -> RunMetrics:
    """Derive run metrics from a matched pair of decode results.

    Raises LosslessnessError if the two outputs differ; a divergence is an
    engine bug, never something to report as a metric.
    """
    cm = cost_model or DEFAULT_COST_MODEL
    if accelerated.output != baseline.output:
        n = next(
            (i for i, (a, b) in enumerate(zip(accelerated.output, baseline.output)) if a != b),
            min(len(accelerated.output), len(baseline.output)),
        )
        raise LosslessnessError(
            f"outputs diverge at position {n}: "
            f"accelerated len {len(accelerated.output)}, baseline len {len(baseline.output)}"
        )
    totals = accelerated.totals
    alpha = (
        totals.accepted_draft_tokens / totals.proposed_draft_tokens
        if totals.proposed_draft_tokens > 0
        else 0.0
    )
    steps = len(accelerated.steps)
    out_len = len(accelerated.output)
    accel_time = sim_total_time(accelerated, cm)
    base_time = sim_total_time(baseline, cm)
    if accel_time > 0:
        speedup = base_time / accel_time
    else:
        speedup = 1.0 if base_time == 0 else float("inf")
    return RunMetrics(
        alpha=alpha,
        mean_committed_per_step=out_len / steps if steps else 0.0,
        speedup_sim=speedup,
        theoretical_bound=theoretical_bound(alpha, accelerated.options.k_draft),
        steps=steps,
        output_len=out_len,
    )


@dataclass
class SweepRow:
    n: int
    k: int
    alpha: float
    mean_committed: float
    speedup_sim: float
    bound: float
    steps: float
    output_len: float
    errors: list[str] = field(default_factory=list)


@dataclass
class SweepTable:
    rows: list[SweepRow]
    config: dict

    def to_csv(self) -> str:
        lines = [SWEEP_CSV_HEADER]
        for r in self.rows:
            lines.append(
                f"{r.n},{r.k},{r.alpha:.10g},{r.mean_committed:.10g},"
                f"{r.speedup_sim:.10g},{r.bound:.10g},{r.steps:.10g},{r.output_len:.10g}"
            )
        return "\n".join(lines) + "\n"


def sweep(
    oracle_spec: OracleSpec,
    prompt_set: list[list[int]],
    n_grid: list[int],
    k_grid: list[int],
    options: DecodeOptions,
    cost_model: CostModel | None = None,
    *,
    fixed_level_only: bool = False,
) -> SweepTable:
    """Run both decoders for every (n, k) grid point and prompt; cell values
    are arithmetic means across prompts. Per-run failures are recorded in
    the row and do not abort the sweep. Rows are ordered n then k ascending;
    cells are independent, so completion order can never change the table.
    """
    if not n_grid or not k_grid:
        raise ValueError("n_grid and k_grid must be non-empty")
    if min(n_grid) < 2:
        raise ValueError("n grid values must be >= 2")
    if min(k_grid) < 1:
        raise ValueError("k grid values must be >= 1")
    if not prompt_set:
        raise ValueError("prompt_set must be non-empty")
    cm = cost_model or DEFAULT_COST_MODEL
    rows: list[SweepRow] = []
    for n in sorted(set(n_grid)):
        for k in sorted(set(k_grid)):
            opts = replace(options, n_max=n, k_draft=k, fixed_level_only=fixed_level_only)
            metrics: list[RunMetrics] = []
            errors: list[str] = []
            for idx, prompt in enumerate(prompt_set):
                try:
                    base = baseline_decode(make_oracle(oracle_spec), list(prompt), opts, cm)
                    accel = speculative_decode(make_oracle(oracle_spec), list(prompt), opts, cm)
                    metrics.append(compute_metrics(accel, base, cm))
                except Exception as exc:  # noqa: BLE001 - recorded per cell
                    errors.append(f"prompt {idx}: {type(exc).__name__}: {exc}")
            def mean(vals: list[float]) -> float:
                return sum(vals) / len(vals) if vals else float("nan")
            rows.append(
                SweepRow(
                    n=n,
                    k=k,
                    alpha=mean([m.alpha for m in metrics]),
                    mean_committed=mean([m.mean_committed_per_step for m in metrics]),
                    speedup_sim=mean([m.speedup_sim for m in metrics]),
                    bound=mean([m.theoretical_bound for m in metrics]),
                    steps=mean([float(m.steps) for m in metrics]),
                    output_len=mean([float(m.output_len) for m in metrics]),
                    errors=errors,
                )
            )
    config = {
        "oracle": oracle_spec.to_json(),
        "cost_model": cm.to_json(),
        "n_grid": sorted(set(n_grid)),
        "k_grid": sorted(set(k_grid)),
        "prompt_lens": [len(p) for p in prompt_set],
        "max_new_tokens": options.max_new_tokens,
        "runtime_update": options.runtime_update,
        "stop_at_eos": options.stop_at_eos,
        "fixed_level_only": fixed_level_only,
        "aggregation": "arithmetic_mean",
    }
    return SweepTable(rows=rows, config=config)


def write_sweep_csv(table: SweepTable, csv_path: str | Path, sidecar_path: str | Path) -> None:
    _atomic_write(csv_path, table.to_csv())
    _atomic_write(sidecar_path, json.dumps(table.config, sort_keys=True, indent=2) + "\n")


class _LatencyInjector:
    """Oracle wrapper that sleeps for the cost-model latency of each call."""

    def __init__(self, inner, cost_model: CostModel, seconds_per_unit: float) -> None:
        self._inner = inner
        self._cm = cost_model
        self._scale = seconds_per_unit
        self._fresh = True

    def extend(self, tokens: list[int]) -> list[int]:
        kind = "prefill" if self._fresh else "verify"
        self._fresh = False
        time.sleep(simulate_cost(self._cm, kind, len(tokens)) * self._scale)
        return self._inner.extend(tokens)

    def reset(self) -> None:
        self._fresh = True
        self._inner.reset()

    def __getattr__(self, name):
        return getattr(self._inner, name)


@dataclass
class WallclockReport:
    metrics: RunMetrics
    baseline_seconds: list[float]
    accelerated_seconds: list[float]
    median_baseline: float
    median_accelerated: float
    relative_spread: float
    timer_warning: bool


def wallclock_bench(
    oracle_spec: OracleSpec,
    prompt: list[int],
    options: DecodeOptions,
    cost_model: CostModel | None = None,
    *,
    repetitions: int = 5,
    warmup: int = 3,
    latency_seconds_per_unit: float | None = None,
    timer_floor: float = 1e-4,
) -> WallclockReport:
    """Median-of-N wall-clock comparison of the two decoders.

    When latency_seconds_per_unit is set, every oracle call sleeps for its
    cost-model latency, so the wall-clock ratio should converge to the
    simulated one. Without injection the result honestly reflects engine
    overhead and may be below 1.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    cm = cost_model or DEFAULT_COST_MODEL

    def fresh():
        oracle = make_oracle(oracle_spec)
        if latency_seconds_per_unit is not None:
            return _LatencyInjector(oracle, cm, latency_seconds_per_unit)
        return oracle

    base_res = baseline_decode(make_oracle(oracle_spec), list(prompt), options, cm)
    accel_res = speculative_decode(make_oracle(oracle_spec), list(prompt), options, cm)
    metrics = compute_metrics(accel_res, base_res, cm)

    for _ in range(warmup):
        baseline_decode(fresh(), list(prompt), options, cm)
        speculative_decode(fresh(), list(prompt), options, cm)
    base_times: list[float] = []
    accel_times: list[float] = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        baseline_decode(fresh(), list(prompt), options, cm)
        base_times.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        speculative_decode(fresh(), list(prompt), options, cm)
        accel_times.append(time.perf_counter() - t0)
    med_base = statistics.median(base_times)
    med_accel = statistics.median(accel_times)
    metrics.speedup_wallclock = med_base / med_accel if med_accel > 0 else float("inf")
    spread = (max(accel_times) - min(accel_times)) / med_accel if med_accel > 0 else float("inf")
    return WallclockReport(
        metrics=metrics,
        baseline_seconds=base_times,
        accelerated_seconds=accel_times,
        median_baseline=med_base,
        median_accelerated=med_accel,
        relative_spread=spread,
        timer_warning=min(med_base, med_accel) < timer_floor,
    )
