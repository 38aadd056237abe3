"""Key-preimage search: every key whose decoded chunk equals a target.

Two routes are provided.  :func:`brute_force_keys` decodes every key of a
small cipher and is the ground truth.  :func:`attack_keys` guesses the R1
and R2 initial states and solves for R3: whenever R1 and R2 emit the same
bit the majority output is forced, and whenever they differ the output is
R3's bit, which is linear in R3's initial state.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable

import numpy as np

from . import kernels
from .cipher import DEFAULT_SPEC, CipherSpec, join_key, output_linear_forms, split_key
from .entropy import byte_entropy
from .gf2 import Gf2System, InconsistentSystem, gf2_solve

log = logging.getLogger(__name__)

BRUTE_FORCE_MAX_BITS = 26
_BLOCK = 1 << 20


class PoolFormatError(ValueError):
    pass


@dataclass(frozen=True)
class KeyPool:
    """Distinct keys (ascending) that all decode to ``target``.

    ``total`` is the size of the full preimage set when ``keys`` holds only
    a subsample of it (large pools are thinned when written to disk).
    ``complete`` is False when the search stopped early, so that neither
    ``keys`` nor ``total`` covers the whole preimage set.
    """

    target: int
    keys: np.ndarray
    spec_id: str
    total: int | None = None
    complete: bool = True

    def __post_init__(self):
        keys = np.unique(np.asarray(self.keys, dtype=np.int64))
        object.__setattr__(self, "keys", keys)
        if self.total is None:
            object.__setattr__(self, "total", int(keys.size))

    def __len__(self):
        return int(self.keys.size)

    def __iter__(self):
        return (int(k) for k in self.keys)

    def __contains__(self, key):
        i = np.searchsorted(self.keys, key)
        return bool(i < self.keys.size and self.keys[i] == key)

    def key_list(self) -> list[int]:
        return [int(k) for k in self.keys]

    def verify(self, spec: CipherSpec) -> bool:
        """Re-decode every key; True when all hit the target."""
        if not len(self):
            return True
        chunks = kernels.sco_batch(self.keys, spec.degrees, spec.masks, spec.chunk_bits)
        return bool(np.all(chunks == self.target))


@dataclass(frozen=True)
class SearchBudget:
    """A slice of the (r1, r2) guess space, optionally capped in size.

    ``max_keys`` stops the search once that many keys are collected.
    """

    max_guesses: int | None = None
    partition: tuple[int, int] = (0, 1)
    max_keys: int | None = None

    def __post_init__(self):
        index, total = self.partition
        if total < 1 or not 0 <= index < total:
            raise ValueError(f"bad partition {index}/{total}")
        if self.max_guesses is not None and self.max_guesses < 0:
            raise ValueError("max_guesses must be >= 0")
        if self.max_keys is not None and self.max_keys < 1:
            raise ValueError("max_keys must be >= 1")

    def guess_range(self, spec: CipherSpec) -> tuple[int, int]:
        d1, d2, _ = spec.degrees
        space = 1 << (d1 + d2)
        index, total = self.partition
        lo = index * space // total
        hi = (index + 1) * space // total
        if self.max_guesses is not None:
            hi = min(hi, lo + self.max_guesses)
        return lo, hi

    @classmethod
    def containing(cls, key: int, spec: CipherSpec, total: int) -> "SearchBudget":
        """The slice (out of ``total``) holding the guess of ``key``."""
        d1, d2, _ = spec.degrees
        r1, r2, _ = split_key(key, spec)
        g = (r1 << d2) | r2
        space = 1 << (d1 + d2)
        index = g * total // space
        # integer slicing can put g one slice off at the boundaries
        while (index + 1) * space // total <= g:
            index += 1
        while index * space // total > g:
            index -= 1
        return cls(partition=(index, total))


def _check_target(target: int, spec: CipherSpec) -> None:
    if not 0 <= target < 1 << spec.chunk_bits:
        raise ValueError(f"target 0x{target:X} wider than {spec.chunk_bits} bits")


def brute_force_keys(target: int, spec: CipherSpec) -> KeyPool:
    """Decode all 2**key_bits keys and keep those producing ``target``."""
    if spec.key_bits > BRUTE_FORCE_MAX_BITS:
        raise ValueError(
            f"brute force limited to {BRUTE_FORCE_MAX_BITS}-bit keys, spec has {spec.key_bits}")
    _check_target(target, spec)
    found = []
    for lo in range(0, 1 << spec.key_bits, _BLOCK):
        keys = np.arange(lo, min(lo + _BLOCK, 1 << spec.key_bits), dtype=np.int64)
        chunks = kernels.sco_batch(keys, spec.degrees, spec.masks, spec.chunk_bits)
        found.append(keys[chunks == target])
    return KeyPool(target, np.concatenate(found), spec.spec_id)


@lru_cache(maxsize=8)
def _register_tables(spec: CipherSpec):
    n = spec.chunk_bits
    r1, r2, r3 = spec.registers
    seq1 = kernels.register_sequences(r1.degree, r1.mask, n)
    seq2 = kernels.register_sequences(r2.degree, r2.mask, n)
    forms3 = output_linear_forms(r3, n)
    return seq1, seq2, forms3


def _r3_solutions(diff: int, target: int, forms3: list[int], n: int, width: int,
                  limit: int | None = None):
    """Solve R3's initial state from the steps where R1 and R2 differ.

    With ``limit`` only enough of the solution space to reach it is expanded.
    """
    system = Gf2System(width)
    for t in range(n):
        pos = n - 1 - t
        if (diff >> pos) & 1:
            system.add(forms3[t], (target >> pos) & 1)
    try:
        particular, basis = gf2_solve(system)
    except InconsistentSystem:
        return None
    sols = np.array([particular], dtype=np.int64)
    for v in basis:
        if limit is not None and sols.size >= limit:
            break
        sols = np.concatenate([sols, sols ^ np.int64(v)])
    return sols


def attack_keys(target: int, spec: CipherSpec = DEFAULT_SPEC,
                budget: SearchBudget | None = None) -> KeyPool:
    """All keys in the budget's (r1, r2) slice whose chunk equals ``target``."""
    _check_target(target, spec)
    budget = budget or SearchBudget()
    d1, d2, d3 = spec.degrees
    n = spec.chunk_bits
    seq1, seq2, forms3 = _register_tables(spec)
    lo, hi = budget.guess_range(spec)
    survivors = kernels.scan_pairs(seq1, seq2, target, lo, hi, d2)
    log.debug("target 0x%X: %d of %d guesses survive the forced-bit check",
              target, survivors.size, hi - lo)
    found = []
    have = 0
    cap = budget.max_keys
    mask2 = (1 << d2) - 1
    for g in survivors.tolist():
        if cap is not None and have >= cap:
            break
        r1, r2 = g >> d2, g & mask2
        sols = _r3_solutions(int(seq1[r1] ^ seq2[r2]), target, forms3, n, d3,
                             None if cap is None else cap - have)
        if sols is not None:
            found.append(np.int64(r1 | (r2 << d1)) | (sols << np.int64(d1 + d2)))
            have += sols.size
    keys = np.concatenate(found) if found else np.empty(0, dtype=np.int64)
    if cap is not None and have >= cap:
        return KeyPool(target, keys[:cap], spec.spec_id, complete=False)
    return KeyPool(target, keys, spec.spec_id)


def merge_pools(pools: Iterable[KeyPool]) -> KeyPool:
    pools = list(pools)
    if not pools:
        raise ValueError("nothing to merge")
    targets = {p.target for p in pools}
    if len(targets) != 1:
        raise ValueError("pools target different chunks")
    return KeyPool(pools[0].target, np.concatenate([p.keys for p in pools]), pools[0].spec_id,
                   complete=all(p.complete for p in pools))


def key_bytes(value: int) -> bytes:
    return struct.pack("<Q", value)


def filter_keys_entropy(pool: KeyPool, tolerance: float = 0.5) -> KeyPool:
    """Keep keys whose 8-byte image has byte entropy within ``tolerance`` of the target's."""
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    ref = byte_entropy(key_bytes(pool.target))
    keep = [k for k in pool if abs(byte_entropy(key_bytes(k)) - ref) <= tolerance]
    return KeyPool(pool.target, np.array(keep, dtype=np.int64), pool.spec_id)


def find_keys(target: int, spec: CipherSpec, budget: SearchBudget | None = None) -> KeyPool:
    """Route a search: brute force for tiny ciphers, attack otherwise."""
    if budget is None and spec.key_bits <= 16:
        return brute_force_keys(target, spec)
    return attack_keys(target, spec, budget)


# ------------------------------------------------------------------ pool files


def write_pool(pool: KeyPool, path: str | Path, spec: CipherSpec, max_keys: int | None = None) -> int:
    """Write ``y1 y2 y3`` lines; thins evenly to ``max_keys`` lines if given.

    Returns the number of keys written.
    """
    keys = pool.keys
    if max_keys is not None and keys.size > max_keys:
        idx = np.linspace(0, keys.size - 1, max_keys).round().astype(np.int64)
        keys = keys[np.unique(idx)]
    header = f"# spec={pool.spec_id} target=0x{pool.target:X}"
    if not pool.complete:
        header += " partial=1"
    elif pool.total != keys.size:
        header += f" total={pool.total}"
    lines = [header]
    for k in keys.tolist():
        y1, y2, y3 = split_key(k, spec)
        lines.append(f"{y1} {y2} {y3}")
    Path(path).write_text("\n".join(lines) + "\n")
    return int(keys.size)


def _parse_header(line: str) -> dict[str, str]:
    if not line.startswith("#"):
        raise PoolFormatError("missing '# spec=... target=...' header")
    fields = dict(tok.split("=", 1) for tok in line[1:].split() if "=" in tok)
    if "spec" not in fields or "target" not in fields:
        raise PoolFormatError(f"incomplete pool header {line!r}")
    return fields


def iter_pool_file(path: str | Path, spec: CipherSpec):
    """Yield the header fields, then every key value, without loading the file."""
    d1, d2, _ = spec.degrees
    with open(path) as fh:
        fields = _parse_header(fh.readline().strip())
        yield fields
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) != 3:
                raise PoolFormatError(f"{path}:{lineno}: expected 'y1 y2 y3'")
            try:
                y1, y2, y3 = (int(p) for p in parts)
            except ValueError:
                raise PoolFormatError(f"{path}:{lineno}: non-decimal field") from None
            yield join_key(y1, y2, y3, spec)


def read_pool(path: str | Path, spec: CipherSpec) -> KeyPool:
    it = iter_pool_file(path, spec)
    fields = next(it)
    if fields["spec"] != spec.spec_id:
        raise PoolFormatError(f"{path}: pool built for {fields['spec']}, not {spec.spec_id}")
    target = int(fields["target"], 16)
    keys = np.fromiter(it, dtype=np.int64)
    total = int(fields["total"]) if "total" in fields else None
    return KeyPool(target, keys, spec.spec_id, total=total, complete=fields.get("partial") != "1")


def pool_target(path: str | Path) -> int:
    with open(path) as fh:
        return int(_parse_header(fh.readline().strip())["target"], 16)


def verify_pool_file(path: str | Path, spec: CipherSpec) -> bool:
    return read_pool(path, spec).verify(spec)
