"""Keyed memory-hard hashing of MAC addresses into truncated, k-anonymous buckets.

A policy fixes the Argon2 parameters, a static secret salt and the digest
width.  The MAC's six raw big-endian bytes are the KDF password, the salt is
``secret || extra_entropy``, and the top ``digest_bits`` bits of the output
are the bucket.  Identical policies always give identical buckets, so buckets
can be compared across sensors that share a policy.
"""

from __future__ import annotations

import binascii
import os
import secrets
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable, Optional

from argon2.exceptions import HashingError
from argon2.low_level import Type, hash_secret_raw

from .mac import MacAddress, MacLike

SALT_ENV_VAR = "MACANON_SALT"
MIN_SALT_BYTES = 16
MIN_SHORT_SALT_BYTES = 8
MAX_DIGEST_BITS = 64

_ALGORITHMS = {"argon2d": Type.D, "argon2i": Type.I, "argon2id": Type.ID}


class PolicyError(ValueError):
    """Invalid KDF parameters, salt or digest width."""


class ResourceError(RuntimeError):
    """The KDF or the entropy source could not obtain what it needed."""


@dataclass(frozen=True)
class KdfParams:
    algorithm: str = "argon2d"
    memory_cost: int = 64 * 1024  # KiB
    time_cost: int = 3
    parallelism: int = 1
    output_length: int = 32

    def __post_init__(self) -> None:
        if self.algorithm not in _ALGORITHMS:
            raise PolicyError(f"unsupported KDF {self.algorithm!r}; choose from {sorted(_ALGORITHMS)}")
        for name in ("memory_cost", "time_cost", "parallelism"):
            if getattr(self, name) < 1:
                raise PolicyError(f"{name} must be >= 1")
        if self.memory_cost < 8 * self.parallelism:
            raise PolicyError("memory_cost must be at least 8 KiB per lane")
        if self.output_length < 8:
            raise PolicyError("output_length must be at least 8 bytes")


@dataclass(frozen=True)
class Salt:
    """Static secret salt.  ``allow_short`` admits 8..15 byte secrets for experiments."""

    secret: bytes = field(repr=False)
    created_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    rotation_period: Optional[timedelta] = None
    allow_short: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.secret, (bytes, bytearray)):
            raise PolicyError("salt secret must be bytes")
        object.__setattr__(self, "secret", bytes(self.secret))
        minimum = MIN_SHORT_SALT_BYTES if self.allow_short else MIN_SALT_BYTES
        if len(self.secret) < minimum:
            raise PolicyError(f"salt must be at least {minimum} bytes, got {len(self.secret)}")

    @classmethod
    def generate(cls, length: int = MIN_SALT_BYTES, entropy_source: Callable[[int], bytes] = secrets.token_bytes,
                 **kwargs) -> "Salt":
        try:
            secret = entropy_source(length)
        except Exception as exc:
            raise ResourceError(f"entropy source failed: {exc}") from exc
        if not isinstance(secret, (bytes, bytearray)) or len(secret) != length:
            raise ResourceError("entropy source returned the wrong number of bytes")
        return cls(bytes(secret), **kwargs)

    @classmethod
    def from_hex(cls, text: str, **kwargs) -> "Salt":
        try:
            return cls(bytes.fromhex(text.strip()), **kwargs)
        except ValueError as exc:
            if isinstance(exc, PolicyError):
                raise
            raise PolicyError("salt is not valid hex") from None

    @classmethod
    def from_file(cls, path: str | os.PathLike, encoding: str = "auto", **kwargs) -> "Salt":
        """Load a salt file.  ``auto`` treats files that are entirely hex text as hex."""
        data = Path(path).read_bytes()
        if encoding == "raw":
            return cls(data, **kwargs)
        stripped = data.strip()
        if encoding == "hex" or (encoding == "auto" and stripped and len(stripped) % 2 == 0):
            try:
                return cls(binascii.unhexlify(stripped), **kwargs)
            except binascii.Error:
                if encoding == "hex":
                    raise PolicyError(f"salt file {path} is not valid hex") from None
        return cls(data, **kwargs)

    @classmethod
    def from_env(cls, var: str = SALT_ENV_VAR, **kwargs) -> "Salt":
        value = os.environ.get(var)
        if not value:
            raise PolicyError(f"environment variable {var} is not set")
        return cls.from_hex(value, **kwargs)

    def hex(self) -> str:
        return self.secret.hex()


@dataclass(frozen=True)
class AnonymizationPolicy:
    kdf: KdfParams
    salt: Salt
    digest_bits: int
    extra_entropy: bytes = field(default=b"", repr=False)

    def __post_init__(self) -> None:
        if not isinstance(self.digest_bits, int) or isinstance(self.digest_bits, bool):
            raise PolicyError("digest_bits must be an integer")
        if not 1 <= self.digest_bits <= min(MAX_DIGEST_BITS, 8 * self.kdf.output_length):
            raise PolicyError(f"digest_bits must be in 1..{min(MAX_DIGEST_BITS, 8 * self.kdf.output_length)}")
        object.__setattr__(self, "extra_entropy", bytes(self.extra_entropy))

    @property
    def salt_bytes(self) -> bytes:
        return self.salt.secret + self.extra_entropy


@dataclass(frozen=True)
class BucketDigest:
    value: int
    bits: int

    def __post_init__(self) -> None:
        if not 0 <= self.value < (1 << self.bits):
            raise ValueError(f"bucket value {self.value} does not fit in {self.bits} bits")

    def hex(self) -> str:
        """Lowercase hex, zero-padded to ceil(bits/4) digits."""
        return format(self.value, f"0{-(-self.bits // 4)}x")

    def __str__(self) -> str:
        return self.hex()

    def __int__(self) -> int:
        return self.value


def truncate_digest(digest: bytes, bits: int) -> int:
    """Most significant ``bits`` bits of ``digest`` read big-endian."""
    if not 1 <= bits <= MAX_DIGEST_BITS or bits > 8 * len(digest):
        raise ValueError(f"cannot take {bits} bits from a {len(digest)}-byte digest")
    nbytes = -(-bits // 8)
    return int.from_bytes(digest[:nbytes], "big") >> (8 * nbytes - bits)


_gate_lock = threading.Lock()
_gate_limit = os.cpu_count() or 1
_gate = threading.BoundedSemaphore(_gate_limit)


def set_kdf_concurrency(limit: int) -> None:
    """Cap the number of KDF invocations running at once in this process.

    Peak KDF memory is about ``limit * memory_cost`` KiB.
    """
    global _gate, _gate_limit
    if limit < 1:
        raise ValueError("KDF concurrency limit must be >= 1")
    with _gate_lock:
        _gate_limit = limit
        _gate = threading.BoundedSemaphore(limit)


def kdf_concurrency() -> int:
    return _gate_limit


def concurrency_for_budget(memory_budget_kib: int, kdf: KdfParams) -> int:
    """How many KDF calls fit in ``memory_budget_kib`` (at least one)."""
    return max(1, memory_budget_kib // kdf.memory_cost)


def kdf_digest(data: bytes, salt: bytes, kdf: KdfParams) -> bytes:
    gate = _gate
    with gate:
        try:
            return hash_secret_raw(
                data, salt,
                time_cost=kdf.time_cost,
                memory_cost=kdf.memory_cost,
                parallelism=kdf.parallelism,
                hash_len=kdf.output_length,
                type=_ALGORITHMS[kdf.algorithm],
            )
        except MemoryError as exc:
            raise ResourceError(f"not enough memory for a {kdf.memory_cost} KiB KDF call") from exc
        except HashingError as exc:
            if "memory" in str(exc).lower():
                raise ResourceError(f"not enough memory for a {kdf.memory_cost} KiB KDF call") from exc
            raise PolicyError(f"KDF rejected the parameters: {exc}") from exc


def anonymize(mac: MacLike, policy: AnonymizationPolicy) -> BucketDigest:
    """Map ``mac`` to its bucket under ``policy``."""
    if not isinstance(policy, AnonymizationPolicy):
        raise PolicyError("policy must be an AnonymizationPolicy")
    raw = (mac if isinstance(mac, MacAddress) else MacAddress(mac)).to_bytes()
    digest = kdf_digest(raw, policy.salt_bytes, policy.kdf)
    return BucketDigest(truncate_digest(digest, policy.digest_bits), policy.digest_bits)


def anonymize_many(macs: Iterable[MacLike], policy: AnonymizationPolicy, workers: int = 1) -> list[BucketDigest]:
    """Anonymize in input order, hashing on up to ``workers`` threads."""
    if workers <= 1:
        return [anonymize(m, policy) for m in macs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda m: anonymize(m, policy), macs))


def rotate_salt(policy: AnonymizationPolicy,
                entropy_source: Callable[[int], bytes] = secrets.token_bytes) -> AnonymizationPolicy:
    """Fresh secret of the same length; everything else carried over."""
    old = policy.salt
    salt = Salt.generate(
        len(old.secret), entropy_source,
        rotation_period=old.rotation_period, allow_short=old.allow_short,
    )
    return replace(policy, salt=salt)
