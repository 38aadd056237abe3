"""Chunk codecs and whole-program protect/reveal.

Concatenated mode packs one instruction (five 32-bit words, 160 bits) into
``ceil(160 / chunk_bits)`` chunks, most significant bits first; the first
chunk carries the remainder and its top bits are zero padding.  With 59-bit
chunks this is 42 + 59 + 59 bits, i.e. ``X1 = M1 >> 10`` and so on.

Direct mode spends one chunk per word: the low 32 bits carry the word and
the high bits are noise.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .cipher import PRESETS, CipherSpec
from .keysearch import KeyPool, attack_keys, brute_force_keys

WORD_BITS = 32
GROUP_WORDS = 5
GROUP_BITS = WORD_BITS * GROUP_WORDS
MASK32 = 0xFFFFFFFF

MAGIC = b"ARMR1"
MODES = {"concat": 0x01, "direct": 0x02}
_MODE_NAMES = {v: k for k, v in MODES.items()}

# live key search stays cheap up to this key size (2**(d1+d2) guesses)
LIVE_SEARCH_MAX_BITS = 40


class PackError(ValueError):
    pass


class PaddingError(PackError):
    """Padding bits of a first chunk are set: wrong key, wrong spec or corruption."""


class MissingPoolError(LookupError):
    def __init__(self, position: int, chunk: int):
        super().__init__(f"no key available for chunk #{position} (0x{chunk:X})")
        self.position = position
        self.chunk = chunk


class BlobFormatError(ValueError):
    pass


def chunks_per_group(chunk_bits: int = 59) -> int:
    return -(-GROUP_BITS // chunk_bits)


def _head_bits(chunk_bits: int) -> int:
    return GROUP_BITS - (chunks_per_group(chunk_bits) - 1) * chunk_bits


def pack_concat(words, chunk_bits: int = 59) -> tuple[int, ...]:
    if len(words) != GROUP_WORDS:
        raise PackError(f"a word group has 5 words, got {len(words)}")
    value = 0
    for w in words:
        if not 0 <= w <= MASK32:
            raise PackError(f"word 0x{w:X} does not fit 32 bits")
        value = (value << WORD_BITS) | w
    q = chunks_per_group(chunk_bits)
    mask = (1 << chunk_bits) - 1
    return tuple((value >> ((q - 1 - j) * chunk_bits)) & mask for j in range(q))


def unpack_concat(chunks, chunk_bits: int = 59) -> tuple[int, int, int, int, int]:
    q = chunks_per_group(chunk_bits)
    if len(chunks) != q:
        raise PackError(f"expected {q} chunks, got {len(chunks)}")
    head = _head_bits(chunk_bits)
    if chunks[0] >> head:
        raise PaddingError(f"first chunk 0x{chunks[0]:X} has nonzero padding above bit {head - 1}")
    value = 0
    for m in chunks:
        if not 0 <= m < 1 << chunk_bits:
            raise PackError(f"chunk 0x{m:X} wider than {chunk_bits} bits")
        value = (value << chunk_bits) | m
    return tuple((value >> (WORD_BITS * (GROUP_WORDS - 1 - i))) & MASK32 for i in range(GROUP_WORDS))


def pack_direct(word: int, noise_seed, chunk_bits: int = 59) -> int:
    if chunk_bits < WORD_BITS:
        raise PackError(f"direct mode needs chunks of at least 32 bits, got {chunk_bits}")
    if not 0 <= word <= MASK32:
        raise PackError(f"word 0x{word:X} does not fit 32 bits")
    noise = random.Random(noise_seed).getrandbits(chunk_bits - WORD_BITS) if chunk_bits > WORD_BITS else 0
    return (noise << WORD_BITS) | word


def unpack_direct(chunk: int) -> int:
    return chunk & MASK32


def program_chunks(words, mode: str, chunk_bits: int = 59, seed=None) -> list[int]:
    """Chunk sequence for a flat word stream (direct-mode noise drawn from ``seed``)."""
    if mode == "concat":
        if len(words) % GROUP_WORDS:
            raise PackError(f"concat mode needs a multiple of 5 words, got {len(words)}")
        out: list[int] = []
        for i in range(0, len(words), GROUP_WORDS):
            out.extend(pack_concat(words[i:i + GROUP_WORDS], chunk_bits))
        return out
    if mode == "direct":
        rng = random.Random(seed)
        return [pack_direct(w, rng.getrandbits(64), chunk_bits) for w in words]
    raise ValueError(f"unknown mode {mode!r}")


def chunks_to_words(chunks, mode: str, chunk_bits: int = 59) -> list[int]:
    if mode == "direct":
        return [unpack_direct(m) for m in chunks]
    q = chunks_per_group(chunk_bits)
    if len(chunks) % q:
        raise PackError(f"concat stream of {len(chunks)} chunks is not a multiple of {q}")
    words: list[int] = []
    for i in range(0, len(chunks), q):
        words.extend(unpack_concat(chunks[i:i + q], chunk_bits))
    return words


@dataclass(frozen=True)
class ProtectedBlob:
    """Key list replacing a program's bytecode; decodable only through the cipher."""

    mode: str
    spec_id: str
    keys: tuple[int, ...]
    profile_seed: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "keys", tuple(int(k) for k in self.keys))
        if any(not 0 <= k < 1 << 64 for k in self.keys):
            raise ValueError("keys are stored in 64 bits")

    @property
    def chunk_count(self) -> int:
        return len(self.keys)

    def to_bytes(self) -> bytes:
        sid = self.spec_id.encode()
        if len(sid) > 255:
            raise BlobFormatError("spec id longer than 255 bytes")
        head = MAGIC + bytes([MODES[self.mode], len(sid)]) + sid + struct.pack(">I", len(self.keys))
        return head + b"".join(struct.pack("<Q", k) for k in self.keys)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ProtectedBlob":
        if not data.startswith(MAGIC):
            raise BlobFormatError("bad magic, not an ARMR1 blob")
        pos = len(MAGIC)
        try:
            mode = _MODE_NAMES[data[pos]]
        except (IndexError, KeyError):
            raise BlobFormatError("bad or missing mode byte") from None
        sid_len = data[pos + 1] if len(data) > pos + 1 else 0
        pos += 2
        sid = data[pos:pos + sid_len].decode()
        pos += sid_len
        if len(data) < pos + 4:
            raise BlobFormatError("truncated header")
        (count,) = struct.unpack(">I", data[pos:pos + 4])
        pos += 4
        if len(data) != pos + 8 * count:
            raise BlobFormatError(f"expected {count} keys, found {(len(data) - pos) / 8:g}")
        keys = struct.unpack(f"<{count}Q", data[pos:])
        return cls(mode, sid, keys)

    def check_shape(self, chunk_bits: int) -> None:
        if self.mode == "concat" and self.chunk_count % chunks_per_group(chunk_bits):
            raise BlobFormatError(
                f"{self.chunk_count} keys is not a whole number of instructions")


KeySource = Mapping[int, KeyPool]


def _live_pool(chunk: int, spec: CipherSpec) -> KeyPool:
    if spec.key_bits <= 21:
        return brute_force_keys(chunk, spec)
    return attack_keys(chunk, spec)


def protect_program(words, mode: str, spec: CipherSpec, pools: KeySource | None = None,
                    seed=None, live_search: bool = False, profile_seed: int | None = None,
                    direct_retries: int = 64) -> ProtectedBlob:
    """Replace every chunk of ``words`` by a key decoding to it.

    ``pools`` maps chunk values to key pools.  With ``live_search`` the
    missing pools are computed on the fly, which is only allowed for
    reduced ciphers.  In direct mode a live search redraws the noise bits
    when a chunk has no preimage.
    """
    if live_search and spec.key_bits > LIVE_SEARCH_MAX_BITS:
        raise ValueError(f"live search disabled for {spec.key_bits}-bit keys; supply pools")
    pools = dict(pools or {})
    rng = random.Random(seed)
    n = spec.chunk_bits
    keys = []
    if mode == "concat":
        chunks = program_chunks(words, "concat", n)
        for pos, m in enumerate(chunks):
            pool = pools.get(m)
            if (pool is None or not len(pool)) and live_search:
                pool = pools[m] = _live_pool(m, spec)
            if pool is None or not len(pool):
                raise MissingPoolError(pos, m)
            keys.append(int(pool.keys[rng.randrange(len(pool))]))
    elif mode == "direct":
        for pos, w in enumerate(words):
            pool = next((p for t, p in pools.items() if unpack_direct(t) == w and len(p)), None)
            tries = 0
            while pool is None and live_search and tries < direct_retries:
                m = pack_direct(w, rng.getrandbits(64), n)
                found = _live_pool(m, spec)
                if len(found):
                    pool = pools[m] = found
                tries += 1
            if pool is None:
                raise MissingPoolError(pos, w)
            keys.append(int(pool.keys[rng.randrange(len(pool))]))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return ProtectedBlob(mode, spec.spec_id, tuple(keys), profile_seed)


def reveal_program(blob: ProtectedBlob, decode: Callable[[int], int],
                   chunk_bits: int | None = None) -> list[int]:
    """Decode every key through ``decode`` (an oracle) and unpack the words.

    All chunks are decoded before anything is unpacked, so a failing oracle
    yields no partial program.
    """
    if chunk_bits is None:
        if blob.spec_id not in PRESETS:
            raise ValueError(f"unknown spec {blob.spec_id!r}; pass chunk_bits")
        chunk_bits = PRESETS[blob.spec_id].chunk_bits
    blob.check_shape(chunk_bits)
    chunks = [decode(k) for k in blob.keys]
    return chunks_to_words(chunks, blob.mode, chunk_bits)


def blob_contains_chunk(blob_bytes: bytes, chunk: int) -> bool:
    """True when ``chunk`` appears as an aligned 8-byte word of the key area."""
    arr = np.frombuffer(blob_bytes[len(blob_bytes) % 8:], dtype="<u8")
    return bool(np.any(arr == np.uint64(chunk)))
