"""Collision arithmetic for truncated digests.

Two notions of "collision" live here and must not be mixed up:

* the *overall rate* ``p = 1 - (1 - 1/n)**(m - 1)``: the probability that a
  given one of ``m`` messages shares its bucket with at least one other, out
  of ``n`` buckets. ``m * p`` is the expected number of colliding messages.
* the birthday *at-least-one* approximation ``m ~ sqrt(2 n ln(1/(1-p)))``,
  the probability that any collision happens at all.

Digest planning for a tolerable collision rate uses the first, by exact scan.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Literal

Semantics = Literal["overall-rate", "at-least-one"]

TABLE_COUNTS = (100, 1_000, 10_000, 100_000, 1_000_000)
TABLE1_PROBABILITIES = (0.05, 0.25, 0.5, 0.75)
TABLE2_RATES = (0.01, 0.05, 0.5, 0.75)

# Bit counts as originally published, kept for discrepancy reporting.
REFERENCE_TABLE_1 = {
    100: (17, 15, 13, 12),
    1_000: (24, 21, 20, 19),
    10_000: (30, 28, 27, 26),
    100_000: (37, 35, 33, 32),
    1_000_000: (44, 41, 40, 39),
}
REFERENCE_TABLE_2 = {
    100: (14, 9, 8, 7),
    1_000: (17, 15, 11, 10),
    10_000: (20, 18, 14, 13),
    100_000: (24, 21, 33, 18),
    1_000_000: (27, 25, 21, 20),
}

_MAX_PLAN_BITS = 1000


class DomainError(ValueError):
    """Raised for arguments outside a function's mathematical domain."""


def _check_count(name: str, value: int, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise DomainError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {value}")
    return value


def _check_probability(name: str, p: float) -> float:
    if not 0.0 < p < 1.0:
        raise DomainError(f"{name} must lie strictly between 0 and 1, got {p!r}")
    return float(p)


def collision_rate(m: int, n: int) -> float:
    """Probability that a given one of ``m`` messages shares one of ``n`` buckets.

    Evaluated as ``-expm1((m - 1) * log1p(-1/n))`` so that ``n`` up to ``2**48``
    and beyond does not lose ``1/n`` to rounding.
    """
    m = _check_count("m", m)
    n = _check_count("n", n)
    if m == 1:
        return 0.0
    if n == 1:
        return 1.0
    return -math.expm1((m - 1) * math.log1p(-1.0 / n))


@dataclass(frozen=True)
class CollisionPrediction:
    m: int
    n: int
    p: float
    expected: float

    @property
    def C(self) -> float:
        return self.expected


def expected_collisions(m: int, n: int) -> CollisionPrediction:
    """Expected number of messages that land in a shared bucket."""
    p = collision_rate(m, n)
    return CollisionPrediction(m=m, n=n, p=p, expected=p * m)


@dataclass(frozen=True)
class PlanResult:
    """A digest width recommendation.

    ``predicted_rate`` is the overall collision rate at ``(m, n)`` for
    ``overall-rate`` plans and the birthday probability of any collision for
    ``at-least-one`` plans.
    """

    bits: int
    n: int
    predicted_rate: float
    semantics: Semantics


def min_bits_for_rate(m: int, max_rate: float) -> PlanResult:
    """Smallest ``b >= 1`` whose overall collision rate for ``m`` messages is within ``max_rate``."""
    m = _check_count("m", m, minimum=2)
    max_rate = _check_probability("max_rate", max_rate)
    for bits in range(1, _MAX_PLAN_BITS + 1):
        p = collision_rate(m, 1 << bits)
        if p <= max_rate:
            return PlanResult(bits=bits, n=1 << bits, predicted_rate=p, semantics="overall-rate")
    raise DomainError(f"no digest width up to {_MAX_PLAN_BITS} bits reaches rate {max_rate}")


def birthday_m(n: float, p: float) -> float:
    """Approximate message count giving probability ``p`` of at least one collision."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    p = _check_probability("p", p)
    return math.sqrt(-2.0 * n * math.log1p(-p))


def birthday_n(m: float, p: float) -> float:
    """Approximate bucket count keeping the chance of any collision among ``m`` at ``p``."""
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    p = _check_probability("p", p)
    return (m * m / 2.0) / -math.log1p(-p)


def at_least_one_probability(m: int, n: int) -> float:
    """Birthday approximation of P(any collision); inverse of :func:`birthday_n`."""
    return -math.expm1(-(m * m) / (2.0 * n))


def approx_bits_at_least_one(m: int, p: float) -> PlanResult:
    bits = max(1, math.ceil(math.log2(birthday_n(m, p))))
    n = 1 << bits
    return PlanResult(bits=bits, n=n, predicted_rate=at_least_one_probability(m, n), semantics="at-least-one")


def plan(m: int, max_rate: float, semantics: Semantics = "overall-rate") -> PlanResult:
    if semantics == "overall-rate":
        return min_bits_for_rate(m, max_rate)
    if semantics == "at-least-one":
        return approx_bits_at_least_one(m, max_rate)
    raise DomainError(f"unknown semantics {semantics!r}")


def allocated_space_bits(allocated_fraction: float) -> int:
    """Bits needed to enumerate every NIC under the allocated share of OUI prefixes."""
    if not 0.0 < allocated_fraction <= 1.0:
        raise DomainError(f"allocated fraction must be in (0, 1], got {allocated_fraction!r}")
    return math.ceil(math.log2(2**24 * (2**24 * allocated_fraction)))


def coverage_bits(num_prefixes: int) -> int:
    """Bits needed to enumerate every NIC under ``num_prefixes`` OUI prefixes."""
    num_prefixes = _check_count("num_prefixes", num_prefixes)
    if num_prefixes > 2**24:
        raise DomainError(f"at most 2**24 prefixes exist, got {num_prefixes}")
    # exact integer ceil(log2(2**24 * k))
    return 24 + (num_prefixes - 1).bit_length()


def format_pct(rate: float) -> str:
    return f"{100.0 * rate:.1f}%"


@dataclass(frozen=True)
class BitsTable:
    """Grid of digest widths indexed by message count and probability column."""

    which: int
    counts: tuple[int, ...]
    probabilities: tuple[float, ...]
    cells: dict[tuple[int, float], PlanResult]

    def bits(self, m: int, p: float) -> int:
        return self.cells[(m, p)].bits

    def row(self, m: int) -> tuple[int, ...]:
        return tuple(self.bits(m, p) for p in self.probabilities)

    @property
    def reference(self) -> dict[int, tuple[int, ...]]:
        return REFERENCE_TABLE_1 if self.which == 1 else REFERENCE_TABLE_2

    def discrepancies(self) -> list[tuple[int, float, int, int]]:
        """``(m, p, computed, published)`` for every cell that differs from the published grid."""
        out = []
        for m in self.counts:
            published = self.reference.get(m)
            if published is None:
                continue
            for p, ref in zip(self.probabilities, published):
                got = self.bits(m, p)
                if got != ref:
                    out.append((m, p, got, ref))
        return out

    def to_text(self) -> str:
        op = "<~" if self.which == 1 else "<="
        head = ["m"] + [f"p {op} {p:g}" for p in self.probabilities]
        rows = [[f"{m:,}"] + [f"{b} bits" for b in self.row(m)] for m in self.counts]
        widths = [max(len(r[i]) for r in [head] + rows) for i in range(len(head))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [head] + rows]
        for m, p, got, ref in self.discrepancies():
            lines.append(f"note: m={m:,} p={p:g}: computed {got} bits, published {ref} bits")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "p", "bits"])
        for m in self.counts:
            for p in self.probabilities:
                w.writerow([m, f"{p:g}", self.bits(m, p)])
        return buf.getvalue()


def generate_table(which: int) -> BitsTable:
    """Regenerate the at-least-one grid (1) or the exact overall-rate grid (2)."""
    if which == 1:
        probs, fn = TABLE1_PROBABILITIES, approx_bits_at_least_one
    elif which == 2:
        probs, fn = TABLE2_RATES, min_bits_for_rate
    else:
        raise DomainError(f"table must be 1 or 2, got {which!r}")
    cells = {(m, p): fn(m, p) for m in TABLE_COUNTS for p in probs}
    return BitsTable(which=which, counts=TABLE_COUNTS, probabilities=probs, cells=cells)
