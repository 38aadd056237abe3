"""Alternative reproducible generators: LCG presets and an iterated hash chain."""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Iterator


@dataclass(frozen=True)
class LcgParams:
    a: int
    b: int
    n_modulus: int
    post_shift: int = 0
    name: str = ""

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("multiplier must be positive")
        if self.n_modulus <= 1:
            raise ValueError("modulus must exceed 1")
        if not 0 <= self.post_shift < 64:
            raise ValueError("post_shift must be in [0, 64)")


# Parameters exactly as listed in the source literature.  The VAX-Marsaglia
# multiplier is usually quoted as 69069; 16645 is kept as printed.
LCG_PRESETS = {
    "minstd": LcgParams(16807, 0, 2**31 - 1, name="Standard minimal"),
    "vax-marsaglia": LcgParams(16645, 0, 2**32, name="VAX-Marsaglia"),
    "lavaux-jenssens": LcgParams(31167285, 0, 2**48, name="Lavaux & Jenssens"),
    "haynes": LcgParams(6364136223846793005, 0, 2**64, name="Haynes"),
    "knuth-borland": LcgParams(22695477, 1, 2**32, post_shift=16, name="Knuth/Borland"),
}


def lcg_next(x: int, p: LcgParams) -> int:
    if not 0 <= x < p.n_modulus:
        raise ValueError(f"state {x} outside [0, {p.n_modulus})")
    return (p.a * x + p.b) % p.n_modulus


def lcg_output(x: int, p: LcgParams) -> int:
    return x >> p.post_shift


def lcg_sequence(p: LcgParams, x0: int, count: int) -> list[tuple[int, int]]:
    """``count`` successive ``(state, output)`` pairs after ``x0``."""
    out = []
    x = x0
    for _ in range(count):
        x = lcg_next(x, p)
        out.append((x, lcg_output(x, p)))
    return out


def lcg_period(p: LcgParams, x0: int, limit: int) -> int | None:
    x = lcg_next(x0, p)
    for k in range(1, limit + 1):
        if x == x0:
            return k
        x = lcg_next(x, p)
    return None


# ------------------------------------------------------------------ hash chain

ITERATION_CAP = 10**6
_SIZE_FIELD = 2  # bytes holding |data| at the end of each message


def _fnv1a64(data: bytes) -> bytes:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h.to_bytes(8, "big")


def _std(name: str):
    def digest(data: bytes) -> bytes:
        return hashlib.new(name, data).digest()
    return digest


# "fnv1a64" is a deterministic toy hash for tests and demos.
HASHES = {"fnv1a64": _fnv1a64}
for _name in ("md5", "sha1", "sha256", "sha512", "blake2b"):
    HASHES[_name] = _std(_name)


@dataclass(frozen=True)
class HashChainSpec:
    """An (m, n) hash: m-bit messages in, n-bit values out (n < m)."""

    hash_id: str
    iv: bytes
    padding_seed: int
    out_bits: int = 64

    def __post_init__(self):
        if self.hash_id not in HASHES:
            raise ValueError(f"unknown hash {self.hash_id!r} (have {', '.join(HASHES)})")
        if self.out_bits % 8 or self.out_bits <= 0:
            raise ValueError("out_bits must be a positive multiple of 8")
        digest_bits = 8 * len(HASHES[self.hash_id](b""))
        if self.out_bits > digest_bits:
            raise ValueError(f"{self.hash_id} yields only {digest_bits} bits")
        if 8 * len(self.iv) <= self.out_bits:
            raise ValueError("the IV (m bits) must be wider than the output (n bits)")
        if len(self.iv) < self.out_bits // 8 + _SIZE_FIELD:
            raise ValueError("message too short to hold data and its size field")

    @property
    def in_bytes(self) -> int:
        return len(self.iv)

    @property
    def out_bytes(self) -> int:
        return self.out_bits // 8


@dataclass
class HashChain:
    """Single-consumer iterator over the chain ``H(IV), H^|D|(D), ...``.

    Each message is ``data || padding || |data|``, m bits long, with the
    size as a 2-byte big-endian byte count; the padding bytes are drawn once
    from ``padding_seed``.  When ``d0`` is given the first message is built
    from it in the same layout instead of using the spec's IV.
    """

    spec: HashChainSpec
    d0: bytes | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self._hash = HASHES[self.spec.hash_id]
        self._padding = random.Random(self.spec.padding_seed).randbytes(self.spec.in_bytes)
        self._iv = self.spec.iv if self.d0 is None else self.message(self.d0)
        self._current: bytes | None = None
        self.meta = {"iteration_cap": ITERATION_CAP, "capped": False}

    def _truncate(self, digest: bytes) -> bytes:
        return digest[:self.spec.out_bytes]

    def message(self, data: bytes) -> bytes:
        room = self.spec.in_bytes - _SIZE_FIELD - len(data)
        if room < 0:
            raise ValueError(f"{len(data)} data bytes do not fit an {self.spec.in_bytes}-byte message")
        return data + self._padding[:room] + len(data).to_bytes(_SIZE_FIELD, "big")

    def h(self, data: bytes) -> bytes:
        return self._truncate(self._hash(self.message(data)))

    def __iter__(self) -> Iterator[int]:
        return self

    def __next__(self) -> int:
        if self._current is None:
            self._current = self._truncate(self._hash(self._iv))
        else:
            count = len(self._current)
            if count > ITERATION_CAP:
                count = ITERATION_CAP
                self.meta["capped"] = True
            value = self._current
            for _ in range(count):
                value = self.h(value)
            self._current = value
        return int.from_bytes(self._current, "big")

    def take(self, k: int) -> list[int]:
        return [next(self) for _ in range(k)]


def hash_chain(spec: HashChainSpec, d0: bytes | None = None) -> HashChain:
    return HashChain(spec, d0)
