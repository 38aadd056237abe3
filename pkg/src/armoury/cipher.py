"""Three-register LFSR stream cipher with a majority combiner.

The cipher maps a key (the concatenated initial states of three Fibonacci
LFSRs) to a keystream chunk of ``chunk_bits`` bits.  Every operation takes a
:class:`CipherSpec`, so reduced-size ciphers are handled by the same code as
the 59-bit default.

Conventions:

* register state bit 0 is the output bit; the feedback bit (parity of the
  tapped bits) enters at bit ``degree - 1``;
* key bits ``[0, d1)`` load R1, ``[d1, d1 + d2)`` load R2, the rest load R3;
* the first keystream bit becomes the most significant bit of the chunk;
* no warm-up clocking.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence


@dataclass(frozen=True)
class LfsrSpec:
    degree: int
    taps: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "taps", frozenset(self.taps))
        if not 1 <= self.degree <= 63:
            raise ValueError(f"degree must be in [1, 63], got {self.degree}")
        if not self.taps:
            raise ValueError("tap set is empty")
        if 0 not in self.taps:
            raise ValueError("feedback polynomial must have a constant term (tap 0)")
        bad = [t for t in self.taps if not 0 <= t < self.degree]
        if bad:
            raise ValueError(f"tap positions {sorted(bad)} outside [0, {self.degree})")

    @property
    def mask(self) -> int:
        m = 0
        for t in self.taps:
            m |= 1 << t
        return m

    def to_text(self) -> str:
        return f"{self.degree}:" + ",".join(str(t) for t in sorted(self.taps, reverse=True))

    @classmethod
    def from_text(cls, line: str) -> "LfsrSpec":
        try:
            deg, taps = line.split(":", 1)
            return cls(int(deg), frozenset(int(t) for t in taps.split(",") if t.strip()))
        except ValueError as exc:
            raise ValueError(f"bad register line {line!r}: {exc}") from None


@dataclass(frozen=True)
class CipherSpec:
    registers: tuple[LfsrSpec, LfsrSpec, LfsrSpec]
    name: str | None = None

    def __post_init__(self):
        if len(self.registers) != 3:
            raise ValueError("exactly three registers are required")
        object.__setattr__(self, "registers", tuple(self.registers))
        if self.key_bits > 63:
            raise ValueError(f"key_bits={self.key_bits} exceeds 63")

    @property
    def degrees(self) -> tuple[int, int, int]:
        return tuple(r.degree for r in self.registers)

    @property
    def masks(self) -> tuple[int, int, int]:
        return tuple(r.mask for r in self.registers)

    @property
    def key_bits(self) -> int:
        return sum(r.degree for r in self.registers)

    @property
    def chunk_bits(self) -> int:
        return self.key_bits

    @property
    def spec_id(self) -> str:
        if self.name:
            return self.name
        crc = zlib.crc32(self.to_text().encode()) & 0xFFFFFFFF
        return "lfsr-" + "-".join(map(str, self.degrees)) + f"-{crc:08x}"

    def to_text(self) -> str:
        return "".join(r.to_text() + "\n" for r in self.registers)

    @classmethod
    def from_text(cls, text: str, name: str | None = None) -> "CipherSpec":
        lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln]
        if len(lines) != 3:
            raise ValueError(f"spec text must describe 3 registers, found {len(lines)}")
        return cls(tuple(LfsrSpec.from_text(ln) for ln in lines), name=name)

    @classmethod
    def load(cls, path: str | Path) -> "CipherSpec":
        return cls.from_text(Path(path).read_text())


def _spec(name: str, regs: Sequence[tuple[int, Iterable[int]]]) -> CipherSpec:
    return CipherSpec(tuple(LfsrSpec(d, frozenset(t)) for d, t in regs), name=name)


DEFAULT_SPEC = _spec("default-59", [
    (17, [15, 14, 13, 11, 10, 9, 8, 6, 5, 4, 2, 0]),
    (19, [18, 16, 15, 11, 10, 5, 3, 2, 1, 0]),
    (23, [22, 21, 20, 17, 16, 15, 12, 10, 8, 7, 1, 0]),
])

# reduced ciphers built on primitive trinomials/pentanomials
SCALED_234 = _spec("scaled-234", [(2, [1, 0]), (3, [1, 0]), (4, [1, 0])])
SCALED_579 = _spec("scaled-579", [(5, [2, 0]), (7, [1, 0]), (9, [4, 0])])
SCALED_91113 = _spec("scaled-91113", [(9, [4, 0]), (11, [2, 0]), (13, [4, 3, 1, 0])])

PRESETS = {s.name: s for s in (DEFAULT_SPEC, SCALED_234, SCALED_579, SCALED_91113)}


def resolve_spec(name_or_path: str | Path | None) -> CipherSpec:
    """Look up a preset by name, or read a spec file."""
    if name_or_path is None:
        return DEFAULT_SPEC
    if str(name_or_path) in PRESETS:
        return PRESETS[str(name_or_path)]
    path = Path(name_or_path)
    if not path.exists():
        raise ValueError(f"unknown spec {name_or_path!r} (presets: {', '.join(PRESETS)})")
    return CipherSpec.load(path)


def split_key(value: int, spec: CipherSpec) -> tuple[int, int, int]:
    if not 0 <= value < 1 << spec.key_bits:
        raise ValueError(f"key 0x{value:X} wider than {spec.key_bits} bits")
    d1, d2, d3 = spec.degrees
    return (value & ((1 << d1) - 1),
            (value >> d1) & ((1 << d2) - 1),
            value >> (d1 + d2))


def join_key(r1: int, r2: int, r3: int, spec: CipherSpec) -> int:
    d1, d2, d3 = spec.degrees
    for r, d in ((r1, d1), (r2, d2), (r3, d3)):
        if not 0 <= r < 1 << d:
            raise ValueError(f"register state {r} wider than {d} bits")
    return r1 | (r2 << d1) | (r3 << (d1 + d2))


def majority(b1: int, b2: int, b3: int) -> int:
    return (b1 & b2) ^ (b1 & b3) ^ (b2 & b3)


def lfsr_step(state: int, spec: LfsrSpec) -> tuple[int, int]:
    """Clock one register; returns ``(new_state, out_bit)``."""
    out = state & 1
    fb = (state & spec.mask).bit_count() & 1
    return (state >> 1) | (fb << (spec.degree - 1)), out


def sco(key: int, spec: CipherSpec = DEFAULT_SPEC) -> int:
    """Decode one key into its keystream chunk."""
    states = list(split_key(key, spec))
    regs = spec.registers
    chunk = 0
    for _ in range(spec.chunk_bits):
        bits = []
        for i, reg in enumerate(regs):
            states[i], b = lfsr_step(states[i], reg)
            bits.append(b)
        chunk = (chunk << 1) | majority(*bits)
    return chunk


def output_linear_forms(spec: LfsrSpec, n: int) -> list[int]:
    """Row ``t`` (an int bitmask over the initial state) gives output bit ``t``.

    The output at step t is initial-state bit t for t < degree; later bits
    follow the recurrence over the previous rows.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    d = spec.degree
    rows = [1 << i for i in range(min(n, d))]
    for t in range(d, n):
        row = 0
        for tap in spec.taps:
            row ^= rows[t - d + tap]
        rows.append(row)
    return rows


def measure_period(spec: LfsrSpec, seed: int = 1, limit: int | None = None) -> int | None:
    """Steps until ``seed`` recurs, or None if not seen within ``limit``."""
    limit = (1 << spec.degree) if limit is None else limit
    state = seed
    for k in range(1, limit + 1):
        state, _ = lfsr_step(state, spec)
        if state == seed:
            return k
    return None
