"""Five-word bytecode codec, per-generation profiles and the interpreter.

Word layout of one encoded instruction::

    word0 = opcode << 24 | optype1 << 16 | optype2 << 8 | optype3
    word1 = size1 << 16 | size2 << 8 | size3
    word2, word3, word4 = operand values (register operands as context offsets)

Optype bytes: 0x01 integer, 0x00 register or empty (the slot role in the
instruction signature tells them apart).  Unused lanes are always zero.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .ir import REGISTERS, SIGNATURES, COND_ALWAYS, COND_ZERO, Instruction, Kind, Operand, OpType

CONTEXT_SIZE = 256
CELL = 4
MASK32 = 0xFFFFFFFF

_OPTYPE_CODE = {OpType.INTEGER: 0x01, OpType.REGISTER: 0x00, OpType.EMPTY: 0x00}


class VmError(RuntimeError):
    pass


class UnknownOpcode(VmError):
    pass


class FuelExhausted(VmError):
    pass


class BadBytecode(VmError):
    pass


@dataclass(frozen=True)
class GenerationProfile:
    """Opcode bytes and register cell offsets of one generated VM."""

    opcode_map: dict
    register_offsets: dict
    seed: int | None = None

    def __post_init__(self):
        if set(self.opcode_map) != set(Kind):
            raise ValueError("opcode map must cover every instruction kind")
        if len(set(self.opcode_map.values())) != len(self.opcode_map):
            raise ValueError("opcode bytes must be distinct")
        if any(not 0 <= b < 256 for b in self.opcode_map.values()):
            raise ValueError("opcodes are single bytes")
        if set(self.register_offsets) != set(REGISTERS):
            raise ValueError("offset table must cover every register")
        offs = sorted(self.register_offsets.values())
        if offs[0] < 0 or offs[-1] + CELL > CONTEXT_SIZE:
            raise ValueError("register cell outside the context area")
        if any(b - a < CELL for a, b in zip(offs, offs[1:])):
            raise ValueError("register cells overlap")
        object.__setattr__(self, "_by_opcode", {b: k for k, b in self.opcode_map.items()})
        object.__setattr__(self, "_by_offset", {o: r for r, o in self.register_offsets.items()})

    def __hash__(self):
        return hash((tuple(sorted((k.value, v) for k, v in self.opcode_map.items())),
                     tuple(sorted(self.register_offsets.items()))))

    def kind_of(self, opcode: int) -> Kind:
        try:
            return self._by_opcode[opcode]
        except KeyError:
            raise UnknownOpcode(f"opcode 0x{opcode:02X} not in this profile") from None

    def register_at(self, offset: int) -> str:
        try:
            return self._by_offset[offset]
        except KeyError:
            raise BadBytecode(f"no register at context offset 0x{offset:X}") from None

    def describe(self) -> str:
        ops = " ".join(f"{k.value}=0x{b:02X}" for k, b in self.opcode_map.items())
        regs = " ".join(f"{r}=0x{o:02X}" for r, o in self.register_offsets.items())
        return f"{ops} | {regs}"


def new_profile(seed: int) -> GenerationProfile:
    rng = random.Random(seed)
    opcodes = rng.sample(range(256), len(Kind))
    offsets: list[int] = []
    while len(offsets) < len(REGISTERS):
        o = rng.randrange(CONTEXT_SIZE - CELL + 1)
        if all(abs(o - p) >= CELL for p in offsets):
            offsets.append(o)
    return GenerationProfile(dict(zip(Kind, opcodes)), dict(zip(REGISTERS, offsets)), seed)


def encode_instr(ins: Instruction, profile: GenerationProfile) -> tuple[int, int, int, int, int]:
    ops = ins.operands
    w0 = profile.opcode_map[ins.kind] << 24
    w1 = 0
    values = []
    for shift, op in zip((16, 8, 0), ops):
        w0 |= _OPTYPE_CODE[op.optype] << shift
        w1 |= op.size << shift
        if op.optype is OpType.REGISTER:
            values.append(profile.register_offsets[op.payload])
        elif op.optype is OpType.INTEGER:
            values.append(op.payload)
        else:
            values.append(0)
    return (w0, w1, *values)


def decode_instr(words, profile: GenerationProfile) -> Instruction:
    if len(words) != 5:
        raise BadBytecode(f"an instruction is 5 words, got {len(words)}")
    w0, w1, *values = words
    kind = profile.kind_of(w0 >> 24)
    ops = []
    for role, shift, value in zip(SIGNATURES[kind], (16, 8, 0), values):
        code = (w0 >> shift) & 0xFF
        size = (w1 >> shift) & 0xFF
        if role == "-":
            if code or size or value:
                raise BadBytecode(f"{kind.value}: nonzero data in an unused lane")
            ops.append(Operand())
        elif code == 0x01 and role != "dst":
            ops.append(Operand.imm(value, size))
        elif code == 0x00 and role in ("src", "dst"):
            if size != CELL:
                raise BadBytecode(f"{kind.value}: register operand of size {size}")
            ops.append(Operand.reg(profile.register_at(value)))
        else:
            raise BadBytecode(f"{kind.value}: optype 0x{code:02X} invalid for a {role} slot")
    if w1 >> 24:
        raise BadBytecode("nonzero top lane in the size word")
    return Instruction(kind, tuple(ops))


def encode_program(program, profile: GenerationProfile) -> list[int]:
    words = []
    for ins in program:
        words.extend(encode_instr(ins, profile))
    return words


def decode_program(words, profile: GenerationProfile) -> list[Instruction]:
    if len(words) % 5:
        raise BadBytecode(f"word count {len(words)} is not a multiple of 5")
    return [decode_instr(words[i:i + 5], profile) for i in range(0, len(words), 5)]


# ------------------------------------------------------------------ execution


@dataclass
class VmContext:
    area: bytearray = field(default_factory=lambda: bytearray(CONTEXT_SIZE))
    pc: int = 0
    zero_flag: int = 0
    steps: int = 0

    def read(self, offset: int, size: int = CELL) -> int:
        if not 0 <= offset <= CONTEXT_SIZE - size:
            raise VmError(f"read of {size} bytes at 0x{offset:X} outside the context")
        return int.from_bytes(self.area[offset:offset + size], "little")

    def write(self, offset: int, value: int, size: int = CELL) -> None:
        if not 0 <= offset <= CONTEXT_SIZE - size:
            raise VmError(f"write of {size} bytes at 0x{offset:X} outside the context")
        self.area[offset:offset + size] = (value & ((1 << (8 * size)) - 1)).to_bytes(size, "little")

    def registers(self, profile: GenerationProfile) -> dict[str, int]:
        return {r: self.read(o) for r, o in profile.register_offsets.items()}


def _value(ctx: VmContext, word: int, code: int, size: int) -> int:
    if code == 0x01:
        return word & ((1 << (8 * size)) - 1) if size else 0
    return ctx.read(word)


def execute(words, profile: GenerationProfile, fuel: int = 100_000,
            ctx: VmContext | None = None) -> VmContext:
    """Interpret encoded bytecode; works on raw words, as a generated VM would."""
    if fuel <= 0:
        raise ValueError("fuel must be positive")
    if len(words) % 5:
        raise BadBytecode(f"word count {len(words)} is not a multiple of 5")
    ctx = ctx or VmContext()
    n = len(words) // 5
    while ctx.pc < n:
        if ctx.steps >= fuel:
            raise FuelExhausted(f"no HALT within {fuel} steps (pc={ctx.pc})")
        ctx.steps += 1
        w0, w1, v1, v2, v3 = words[5 * ctx.pc:5 * ctx.pc + 5]
        kind = profile.kind_of(w0 >> 24)
        c1, c2 = (w0 >> 16) & 0xFF, (w0 >> 8) & 0xFF
        s1, s2 = (w1 >> 16) & 0xFF, (w1 >> 8) & 0xFF
        nxt = ctx.pc + 1
        if kind is Kind.STR:
            size = s1 or CELL
            ctx.write(v3, _value(ctx, v1, c1, size), size)
        elif kind in (Kind.ADD, Kind.XOR):
            a = _value(ctx, v1, c1, s1)
            b = _value(ctx, v2, c2, s2)
            ctx.write(v3, (a + b) & MASK32 if kind is Kind.ADD else a ^ b)
        elif kind is Kind.CMP:
            ctx.zero_flag = int(_value(ctx, v1, c1, s1) == _value(ctx, v2, c2, s2))
        elif kind is Kind.JCC:
            if v1 == COND_ALWAYS or (v1 == COND_ZERO and ctx.zero_flag):
                if not 0 <= v3 <= n:
                    raise VmError(f"jump target {v3} outside the program")
                nxt = v3
            elif v1 not in (COND_ALWAYS, COND_ZERO):
                raise BadBytecode(f"unknown condition code {v1}")
        elif kind is Kind.HALT:
            break
        ctx.pc = nxt
    return ctx


# ------------------------------------------------------------------ dump files


def format_dump(words, profile_seed: int | None = None) -> str:
    if len(words) % 5:
        raise BadBytecode(f"word count {len(words)} is not a multiple of 5")
    lines = []
    if profile_seed is not None:
        lines.append(f"# profile-seed={profile_seed}")
    for i in range(0, len(words), 5):
        lines.append(" ".join(f"{w:08X}" for w in words[i:i + 5]))
    return "\n".join(lines) + "\n"


def parse_dump(text: str) -> tuple[list[int], int | None]:
    """Return ``(words, profile_seed)``; the seed comes from a header comment."""
    words: list[int] = []
    seed = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line[1:].strip().startswith("profile-seed="):
                seed = int(line.split("=", 1)[1])
            continue
        parts = line.split()
        if len(parts) != 5 or any(len(p) != 8 for p in parts):
            raise BadBytecode(f"dump line {lineno}: expected five 8-hex-digit words")
        try:
            words.extend(int(p, 16) for p in parts)
        except ValueError:
            raise BadBytecode(f"dump line {lineno}: not hexadecimal") from None
    return words, seed


def read_dump(path: str | Path) -> tuple[list[int], int | None]:
    return parse_dump(Path(path).read_text())


def words_to_bytes(words) -> bytes:
    return b"".join((w & MASK32).to_bytes(4, "little") for w in words)
