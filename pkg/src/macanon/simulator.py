"""Monte Carlo measurement of bucket collision rates.

Each trial draws ``m`` unique MACs, generates a fresh salt, buckets every
MAC into ``2**digest_bits`` buckets and counts

* colliding: MACs whose bucket holds two or more MACs (expected ``m * p``
  with ``p`` the overall collision rate), and
* duplicates: ``m`` minus the number of occupied buckets.

Trial seeds are derived from ``(base_seed, round_index)`` alone, so a report
does not depend on how many workers produced it.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Literal, NamedTuple, Optional, Sequence

import numpy as np

from .anonymizer import (
    MAX_DIGEST_BITS,
    AnonymizationPolicy,
    KdfParams,
    Salt,
    anonymize,
    concurrency_for_budget,
)
from .mac import DEFAULT_RANGE, CapacityError, MacRange, sample_values

HashMode = Literal["fast", "kdf"]

_U64 = 0xFFFFFFFFFFFFFFFF
EXPERIMENT_SALT_BITS = 68
TABLE3_BITS = tuple(range(13, 22))
TABLE3_COUNTS = (100, 1_000, 10_000, 100_000)

# Cheap enough to run thousands of hashes per trial on a desktop.
SIMULATION_KDF = KdfParams(memory_cost=8 * 1024, time_cost=1)


def _mix64(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps
    x = x ^ (x >> np.uint64(30))
    x = x * np.uint64(0xBF58476D1CE4E5B9)
    x = x ^ (x >> np.uint64(27))
    x = x * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def fast_buckets(values: np.ndarray, key: Sequence[int], bits: int) -> np.ndarray:
    """Keyed 64-bit mixing hash of each value, truncated to its top ``bits`` bits."""
    if not 1 <= bits <= 64:
        raise ValueError(f"bits must be in 1..64, got {bits}")
    k0, k1 = (np.uint64(k & _U64) for k in key)
    with np.errstate(over="ignore"):
        h = _mix64(np.asarray(values, dtype=np.uint64) ^ k0)
        h = _mix64(h + k1)
    return h >> np.uint64(64 - bits)


def experiment_salt(rng: np.random.Generator) -> bytes:
    """68 random bits, left-padded with zero bits to 9 bytes."""
    raw = bytearray(rng.bytes(9))
    raw[0] &= 0x0F
    return bytes(raw)


class TrialResult(NamedTuple):
    colliding: int
    duplicates: int


def count_collisions(buckets: Iterable[int] | np.ndarray) -> TrialResult:
    arr = np.asarray(list(buckets) if not isinstance(buckets, np.ndarray) else buckets, dtype=np.uint64)
    if arr.size == 0:
        return TrialResult(0, 0)
    _, counts = np.unique(arr, return_counts=True)
    return TrialResult(int(counts[counts >= 2].sum()), int(arr.size - counts.size))


def run_trial(m: int, digest_bits: int, seed: int, hash_mode: HashMode = "fast",
              kdf: Optional[KdfParams] = None, mac_range: MacRange = DEFAULT_RANGE) -> TrialResult:
    if not 1 <= digest_bits <= MAX_DIGEST_BITS:
        raise ValueError(f"digest_bits must be in 1..{MAX_DIGEST_BITS}, got {digest_bits}")
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    rng = np.random.default_rng(seed & _U64)
    macs = sample_values(rng, m, mac_range)
    if hash_mode == "fast":
        key = rng.integers(0, _U64, size=2, dtype=np.uint64, endpoint=True)
        buckets = fast_buckets(macs, (int(key[0]), int(key[1])), digest_bits)
    elif hash_mode == "kdf":
        kdf = kdf or SIMULATION_KDF
        policy = AnonymizationPolicy(kdf, Salt(experiment_salt(rng), allow_short=True), digest_bits)
        buckets = np.fromiter((anonymize(int(v), policy).value for v in macs), dtype=np.uint64, count=m)
    else:
        raise ValueError(f"unknown hash mode {hash_mode!r}")
    return count_collisions(buckets)


def trial_seed(base_seed: int, *path: int) -> int:
    """64-bit seed for the trial at ``path`` below ``base_seed``."""
    ss = np.random.SeedSequence(base_seed & _U64, spawn_key=tuple(path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class TrialConfig:
    m: int
    digest_bits: int
    rounds: int = 100
    base_seed: int = 0
    hash_mode: HashMode = "fast"
    mac_range: MacRange = DEFAULT_RANGE
    kdf: KdfParams = SIMULATION_KDF

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"m must be positive, got {self.m}")
        if self.m > self.mac_range.size:
            raise CapacityError(
                f"cannot draw {self.m} unique addresses from a range of {self.mac_range.size}"
            )
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if not 1 <= self.digest_bits <= MAX_DIGEST_BITS:
            raise ValueError(f"digest_bits must be in 1..{MAX_DIGEST_BITS}")
        if self.hash_mode not in ("fast", "kdf"):
            raise ValueError(f"unknown hash mode {self.hash_mode!r}")


@dataclass(frozen=True)
class ExperimentReport:
    config: TrialConfig
    per_round_colliding: tuple[int, ...]
    per_round_duplicates: tuple[int, ...] = field(repr=False)

    @property
    def median_rate(self) -> float:
        return statistics.median(self.per_round_colliding) / self.config.m

    @property
    def mean_rate(self) -> float:
        return statistics.fmean(self.per_round_colliding) / self.config.m

    @property
    def duplicate_median_rate(self) -> float:
        return statistics.median(self.per_round_duplicates) / self.config.m

    @property
    def mean_rate_sem(self) -> float:
        """Standard error of :attr:`mean_rate` across rounds."""
        if len(self.per_round_colliding) < 2:
            return float("nan")
        rates = [c / self.config.m for c in self.per_round_colliding]
        return statistics.stdev(rates) / len(rates) ** 0.5

    def to_dict(self, include_rounds: bool = False) -> dict:
        d = {
            "n_bits": self.config.digest_bits,
            "m": self.config.m,
            "rounds": self.config.rounds,
            "hash_mode": self.config.hash_mode,
            "base_seed": self.config.base_seed,
            "median_pct": round(100 * self.median_rate, 1),
            "mean_pct": round(100 * self.mean_rate, 3),
            "duplicate_median_pct": round(100 * self.duplicate_median_rate, 1),
        }
        if include_rounds:
            d["per_round_colliding"] = list(self.per_round_colliding)
            d["per_round_duplicates"] = list(self.per_round_duplicates)
        return d


def _trial_job(args: tuple) -> TrialResult:
    return run_trial(*args)


def run_experiment(config: TrialConfig, workers: int = 1,
                   memory_budget_kib: Optional[int] = None) -> ExperimentReport:
    """Run ``config.rounds`` independent trials and aggregate them in round order.

    In kdf mode ``memory_budget_kib`` further caps ``workers``.
    """
    jobs = [
        (config.m, config.digest_bits, trial_seed(config.base_seed, r),
         config.hash_mode, config.kdf, config.mac_range)
        for r in range(config.rounds)
    ]
    if config.hash_mode == "kdf" and memory_budget_kib is not None:
        workers = min(workers, concurrency_for_budget(memory_budget_kib, config.kdf))
    if workers <= 1:
        results = [_trial_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return ExperimentReport(
        config=config,
        per_round_colliding=tuple(r.colliding for r in results),
        per_round_duplicates=tuple(r.duplicates for r in results),
    )


@dataclass(frozen=True)
class Table3:
    """Median collision percentages over a grid of digest widths and MAC counts."""

    bit_widths: tuple[int, ...]
    counts: tuple[int, ...]
    reports: dict[tuple[int, int], ExperimentReport]

    def median_pct(self, bits: int, m: int) -> float:
        return round(100 * self.reports[(bits, m)].median_rate, 1)

    def to_text(self) -> str:
        head = ["n"] + [f"m = {m:,}" for m in self.counts]
        rows = [[f"2^{b}"] + [f"{self.median_pct(b, m):.1f}%" for m in self.counts] for b in self.bit_widths]
        widths = [max(len(r[i]) for r in [head] + rows) for i in range(len(head))]
        return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in [head] + rows) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n_bits", "m", "median_pct", "mean_pct", "duplicate_median_pct"])
        for b in self.bit_widths:
            for m in self.counts:
                d = self.reports[(b, m)].to_dict()
                w.writerow([b, m, f"{d['median_pct']:.1f}", f"{d['mean_pct']:.3f}", f"{d['duplicate_median_pct']:.1f}"])
        return buf.getvalue()

    def to_jsonl(self, include_rounds: bool = False) -> str:
        return "".join(
            json.dumps(self.reports[(b, m)].to_dict(include_rounds)) + "\n"
            for b in self.bit_widths for m in self.counts
        )


def generate_table3(rounds: int = 100, hash_mode: HashMode = "fast", *,
                    bit_widths: Sequence[int] = TABLE3_BITS, counts: Sequence[int] = TABLE3_COUNTS,
                    base_seed: int = 0, workers: int = 1, kdf: KdfParams = SIMULATION_KDF,
                    memory_budget_kib: Optional[int] = None) -> Table3:
    reports = {}
    for b in bit_widths:
        for m in counts:
            config = TrialConfig(m=m, digest_bits=b, rounds=rounds, hash_mode=hash_mode,
                                 base_seed=trial_seed(base_seed, b, m), kdf=kdf)
            reports[(b, m)] = run_experiment(config, workers=workers, memory_budget_kib=memory_budget_kib)
    return Table3(bit_widths=tuple(bit_widths), counts=tuple(counts), reports=reports)
