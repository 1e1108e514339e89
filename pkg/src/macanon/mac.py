"""48-bit MAC addresses: parsing, formatting, OUI/NIC split and seeded sampling."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

MAC_BITS = 48
MAC_MAX = (1 << MAC_BITS) - 1

_COLON = re.compile(r"^[0-9a-f]{2}(:[0-9a-f]{2}){5}$")
_HYPHEN = re.compile(r"^[0-9a-f]{2}(-[0-9a-f]{2}){5}$")
_DOTTED = re.compile(r"^[0-9a-f]{4}(\.[0-9a-f]{4}){2}$")
_BARE = re.compile(r"^[0-9a-f]{12}$")


class MacParseError(ValueError):
    """Raised when text is not a recognisable MAC address."""


class CapacityError(ValueError):
    """Raised when more unique addresses are requested than a range holds."""


@dataclass(frozen=True, order=True)
class MacAddress:
    value: int

    def __post_init__(self) -> None:
        if not isinstance(self.value, (int, np.integer)) or not 0 <= self.value <= MAC_MAX:
            raise ValueError(f"MAC value out of 48-bit range: {self.value!r}")
        object.__setattr__(self, "value", int(self.value))

    @property
    def oui(self) -> int:
        return self.value >> 24

    @property
    def nic(self) -> int:
        return self.value & 0xFFFFFF

    def to_bytes(self) -> bytes:
        """Six raw big-endian bytes."""
        return self.value.to_bytes(6, "big")

    def __str__(self) -> str:
        return format_mac(self)

    def __int__(self) -> int:
        return self.value


MacLike = Union[MacAddress, int]


def _as_int(mac: MacLike) -> int:
    return mac.value if isinstance(mac, MacAddress) else int(mac)


@dataclass(frozen=True)
class MacRange:
    """Inclusive range of addresses."""

    start: MacAddress
    end: MacAddress

    def __post_init__(self) -> None:
        if self.start.value > self.end.value:
            raise ValueError(f"empty MAC range: {self.start} > {self.end}")

    @property
    def size(self) -> int:
        return self.end.value - self.start.value + 1

    def __contains__(self, mac: MacLike) -> bool:
        return self.start.value <= _as_int(mac) <= self.end.value

    @classmethod
    def parse(cls, text: str) -> "MacRange":
        """Parse ``START..END`` or ``START,END``."""
        for sep in ("..", ","):
            if sep in text:
                lo, hi = text.split(sep, 1)
                return cls(parse_mac(lo), parse_mac(hi))
        raise MacParseError(f"cannot parse MAC range {text!r}; expected START..END")


# Lower half of the Xen virtual NIC prefix 00:16:3e, 2**23 addresses.
DEFAULT_RANGE = MacRange(MacAddress(0x00163E000000), MacAddress(0x00163E7FFFFF))


def parse_mac(text: str) -> MacAddress:
    """Parse colon, hyphen, Cisco-dotted or bare 12-digit hex notation."""
    if not isinstance(text, str):
        raise MacParseError(f"expected a string, got {type(text).__name__}")
    s = text.strip().lower()
    if not (_COLON.match(s) or _HYPHEN.match(s) or _DOTTED.match(s) or _BARE.match(s)):
        raise MacParseError(f"malformed MAC address: {text!r}")
    return MacAddress(int(re.sub(r"[:.\-]", "", s), 16))


def format_mac(mac: MacLike) -> str:
    v = _as_int(mac)
    if not 0 <= v <= MAC_MAX:
        raise ValueError(f"MAC value out of 48-bit range: {v!r}")
    return ":".join(f"{(v >> shift) & 0xFF:02x}" for shift in range(40, -1, -8))


def oui(mac: MacLike) -> int:
    return _as_int(mac) >> 24


def nic(mac: MacLike) -> int:
    return _as_int(mac) & 0xFFFFFF


def sample_values(rng: np.random.Generator, count: int, mac_range: MacRange = DEFAULT_RANGE) -> np.ndarray:
    """Draw ``count`` distinct integer addresses from ``mac_range`` as a uint64 array."""
    if count < 0:
        raise ValueError(f"count must be non-negative, got {count}")
    if count > mac_range.size:
        raise CapacityError(
            f"cannot draw {count} unique addresses from a range of {mac_range.size}"
        )
    offsets = rng.choice(mac_range.size, size=count, replace=False)
    return offsets.astype(np.uint64) + np.uint64(mac_range.start.value)


def sample_unique_macs(count: int, mac_range: MacRange = DEFAULT_RANGE, seed: int = 0) -> list[MacAddress]:
    """Uniformly sample ``count`` distinct addresses without replacement.

    The result depends only on ``(count, mac_range, seed)``.
    """
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)
    return [MacAddress(int(v)) for v in sample_values(rng, count, mac_range)]
