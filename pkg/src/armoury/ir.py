"""A small REIL-flavoured IR and the toy assembler that produces it."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum


class Kind(Enum):
    STR = "STR"
    ADD = "ADD"
    XOR = "XOR"
    CMP = "CMP"
    JCC = "JCC"
    NOP = "NOP"
    HALT = "HALT"


class OpType(Enum):
    INTEGER = "int"
    REGISTER = "reg"
    EMPTY = "empty"


REGISTERS = ("EAX", "EBX", "ECX", "EDX")

# JCC condition codes (first operand)
COND_ALWAYS = 0x0
COND_ZERO = 0x1

# operand slot roles: "src" = integer or register, "dst" = register,
# "imm" = integer only, "-" = empty
SIGNATURES = {
    Kind.STR: ("src", "-", "dst"),
    Kind.ADD: ("src", "src", "dst"),
    Kind.XOR: ("src", "src", "dst"),
    Kind.CMP: ("src", "src", "-"),
    Kind.JCC: ("imm", "-", "imm"),
    Kind.NOP: ("-", "-", "-"),
    Kind.HALT: ("-", "-", "-"),
}

_ROLE_TYPES = {
    "src": (OpType.INTEGER, OpType.REGISTER),
    "dst": (OpType.REGISTER,),
    "imm": (OpType.INTEGER,),
    "-": (OpType.EMPTY,),
}


@dataclass(frozen=True)
class Operand:
    payload: int | str = 0
    optype: OpType = OpType.EMPTY
    size: int = 0

    @classmethod
    def imm(cls, value: int, size: int = 4) -> "Operand":
        if size not in (1, 2, 4):
            raise ValueError(f"integer size must be 1, 2 or 4 bytes, got {size}")
        if not 0 <= value < 1 << 32:
            raise ValueError(f"integer 0x{value:X} does not fit 32 bits")
        return cls(value, OpType.INTEGER, size)

    @classmethod
    def reg(cls, name: str) -> "Operand":
        if name not in REGISTERS:
            raise ValueError(f"unknown register {name!r}")
        return cls(name, OpType.REGISTER, 4)

    def __str__(self):
        if self.optype is OpType.EMPTY:
            return "_"
        if self.optype is OpType.REGISTER:
            return self.payload
        return f"0x{self.payload:X}/B{self.size}"


EMPTY = Operand()


@dataclass(frozen=True)
class Instruction:
    kind: Kind
    operands: tuple[Operand, Operand, Operand] = (EMPTY, EMPTY, EMPTY)

    def __post_init__(self):
        if len(self.operands) != 3:
            raise ValueError("instructions carry exactly three operand slots")
        for slot, (role, op) in enumerate(zip(SIGNATURES[self.kind], self.operands), 1):
            if op.optype not in _ROLE_TYPES[role]:
                raise ValueError(f"{self.kind.value} operand {slot} cannot be {op.optype.value}")

    def __str__(self):
        return f"{self.kind.value} " + ", ".join(str(o) for o in self.operands)


class AsmError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


_LABEL = re.compile(r"^([A-Za-z_.][\w.]*)\s*:")


def _operand(text: str, lineno: int) -> Operand:
    tok = text.strip().upper()
    if tok in REGISTERS:
        return Operand.reg(tok)
    try:
        value = int(tok, 0)
    except ValueError:
        if re.fullmatch(r"E?[A-Z]{2}", tok):
            raise AsmError(lineno, f"unknown register {text.strip()!r}") from None
        raise AsmError(lineno, f"bad operand {text.strip()!r}") from None
    if not 0 <= value < 1 << 32:
        raise AsmError(lineno, f"immediate {text.strip()} does not fit 32 bits")
    return Operand.imm(value)


def assemble(source: str) -> list[Instruction]:
    """Translate toy x86-style assembly into IR.

    One instruction per line, ``;`` starts a comment, ``label:`` may prefix a
    line.  ``MOV`` becomes ``STR``; ``JZ``/``JMP`` become ``JCC`` with the
    label resolved to an instruction index.
    """
    pending: list[tuple[int, str, list[str]]] = []
    labels: dict[str, int] = {}
    for lineno, raw in enumerate(source.splitlines(), 1):
        line = raw.split(";", 1)[0].strip()
        while (m := _LABEL.match(line)):
            name = m.group(1)
            if name in labels:
                raise AsmError(lineno, f"duplicate label {name!r}")
            labels[name] = len(pending)
            line = line[m.end():].strip()
        if not line:
            continue
        mnem, _, rest = line.partition(" ")
        args = [a.strip() for a in rest.split(",")] if rest.strip() else []
        pending.append((lineno, mnem.upper(), args))

    out = []
    for lineno, mnem, args in pending:
        out.append(_translate(lineno, mnem, args, labels))
    return out


def _expect(args: list[str], n: int, mnem: str, lineno: int) -> None:
    if len(args) != n:
        raise AsmError(lineno, f"{mnem} takes {n} operand(s), got {len(args)}")


def _dest(text: str, lineno: int) -> Operand:
    op = _operand(text, lineno)
    if op.optype is not OpType.REGISTER:
        raise AsmError(lineno, f"destination must be a register, got {text.strip()!r}")
    return op


def _translate(lineno: int, mnem: str, args: list[str], labels: dict[str, int]) -> Instruction:
    if mnem == "MOV":
        _expect(args, 2, mnem, lineno)
        return Instruction(Kind.STR, (_operand(args[1], lineno), EMPTY, _dest(args[0], lineno)))
    if mnem in ("ADD", "XOR"):
        _expect(args, 2, mnem, lineno)
        dst = _dest(args[0], lineno)
        return Instruction(Kind[mnem], (dst, _operand(args[1], lineno), dst))
    if mnem == "CMP":
        _expect(args, 2, mnem, lineno)
        return Instruction(Kind.CMP, (_operand(args[0], lineno), _operand(args[1], lineno), EMPTY))
    if mnem in ("JZ", "JMP"):
        _expect(args, 1, mnem, lineno)
        if args[0] not in labels:
            raise AsmError(lineno, f"undefined label {args[0]!r}")
        cond = COND_ZERO if mnem == "JZ" else COND_ALWAYS
        return Instruction(Kind.JCC, (Operand.imm(cond), EMPTY, Operand.imm(labels[args[0]])))
    if mnem in ("NOP", "HALT"):
        _expect(args, 0, mnem, lineno)
        return Instruction(Kind[mnem])
    raise AsmError(lineno, f"unknown mnemonic {mnem!r}")
