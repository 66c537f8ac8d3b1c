"""Advantage-kernel benchmark: timing and oracle agreement on synthetic data.

Generates random batches whose policy-index traces follow the call-and-return
structure (controller decision, then a bounded option run, episodes ending
only on env steps), times the single-pass kernel across a (B, T, num options)
grid, and reports the max absolute difference against the sequential
per-policy reference on each cell.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .vtrace import VtraceInputs, VtraceOutputs, vtrace_parallel, vtrace_reference


def random_conformant_inputs(rng: np.random.Generator, b: int, t: int,
                             num_options: int, *, done_prob: float = 0.08,
                             max_len: int = 8, gamma: float = 0.99,
                             rho_hat: float = 1.0, c_hat: float = 1.0) -> VtraceInputs:
    """Random inputs with a policy-index layout a wrapper rollout could emit.

    ``num_options == 0`` produces a flat single-policy batch with random dones.
    """
    pidx = np.zeros((b, t), dtype=np.int64)
    dones = np.zeros((b, t))
    if num_options == 0:
        num_policies = 1
        dones = (rng.random((b, t)) < done_prob).astype(float)
    else:
        num_policies = num_options + 1
        ctrl = num_options
        for row in range(b):
            i = 0
            while i < t:
                pidx[row, i] = ctrl          # controller decision
                i += 1
                opt = int(rng.integers(num_options))
                run = int(rng.integers(1, max_len + 1))
                for _ in range(run):
                    if i >= t:
                        break
                    pidx[row, i] = opt
                    if rng.random() < done_prob:
                        dones[row, i] = 1.0
                        i += 1
                        break
                    i += 1
    return VtraceInputs(
        ratios=np.exp(rng.normal(0.0, 0.3, size=(b, t))),
        values=rng.normal(0.0, 1.0, size=(b, t)),
        dones=dones,
        rewards=rng.normal(0.0, 1.0, size=(b, t)),
        policy_indices=pidx,
        num_policies=num_policies,
        gamma=gamma, rho_hat=rho_hat, c_hat=c_hat,
    )


@dataclass
class BenchRow:
    batch: int
    horizon: int
    num_options: int
    seconds_per_pass: float
    max_abs_error: float


def bench_vtrace(cells: list[tuple[int, int, int]], repeats: int = 5,
                 seed: int = 0, check_oracle: bool = True) -> list[BenchRow]:
    """Time the kernel on each (B, T, num_options) cell; best of ``repeats``."""
    rng = np.random.default_rng(seed)
    rows = []
    for b, t, n_opt in cells:
        inp = random_conformant_inputs(rng, b, t, n_opt)
        vtrace_parallel(inp)  # warm-up outside the timed region
        best = float("inf")
        out: VtraceOutputs | None = None
        for _ in range(repeats):
            start = time.perf_counter()
            out = vtrace_parallel(inp)
            best = min(best, time.perf_counter() - start)
        err = 0.0
        if check_oracle:
            ref = vtrace_reference(inp)
            err = float(max(np.abs(out.adv - ref.adv).max(),
                            np.abs(out.vs - ref.vs).max()))
        rows.append(BenchRow(batch=b, horizon=t, num_options=n_opt,
                             seconds_per_pass=best, max_abs_error=err))
    return rows


DEFAULT_CELLS = [
    # fixed B*T = 32768 samples, sweeping the option count
    (512, 64, 0), (512, 64, 1), (512, 64, 2), (512, 64, 4), (512, 64, 8),
    # shape sweep at 8 options
    (128, 256, 8), (1024, 32, 8), (2048, 16, 8),
]


def dump_bench_csv(rows: list[BenchRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["batch", "horizon", "num_options", "seconds_per_pass",
                    "samples_per_second", "max_abs_error"])
        for r in rows:
            n = r.batch * r.horizon
            w.writerow([r.batch, r.horizon, r.num_options,
                        f"{r.seconds_per_pass:.6f}",
                        f"{n / r.seconds_per_pass:.0f}" if r.seconds_per_pass > 0 else "inf",
                        f"{r.max_abs_error:.3e}"])
