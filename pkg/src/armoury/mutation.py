"""Polymorphic variants: per-chunk key pools, variant counting and resampling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cipher import CipherSpec, sco
from .keysearch import KeyPool, iter_pool_file, read_pool, write_pool
from .packer import ProtectedBlob


class CoverageError(LookupError):
    def __init__(self, position: int, detail: str = "no pool"):
        super().__init__(f"chunk #{position}: {detail}")
        self.position = position


@dataclass(frozen=True)
class PoolSet:
    """Key pools by chunk position (positions 0..n-1, all pools nonempty)."""

    entries: tuple[tuple[int, KeyPool], ...]

    def __post_init__(self):
        entries = tuple(sorted(self.entries, key=lambda e: e[0]))
        object.__setattr__(self, "entries", entries)
        positions = [p for p, _ in entries]
        if positions != list(range(len(positions))):
            missing = next(i for i in range(len(positions) + 1) if i not in positions)
            raise CoverageError(missing, "positions must be contiguous from 0")
        for pos, pool in entries:
            if not len(pool):
                raise CoverageError(pos, f"empty pool for target 0x{pool.target:X}")

    @classmethod
    def from_pools(cls, pools) -> "PoolSet":
        return cls(tuple(enumerate(pools)))

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, position: int) -> KeyPool:
        return self.entries[position][1]

    def sizes(self) -> list[int]:
        return [len(p) for _, p in self.entries]

    def targets(self) -> list[int]:
        return [p.target for _, p in self.entries]

    def by_target(self) -> dict[int, KeyPool]:
        out: dict[int, KeyPool] = {}
        for _, pool in self.entries:
            out.setdefault(pool.target, pool)
        return out


def count_from_sizes(sizes) -> tuple[int, float]:
    sizes = [int(s) for s in sizes]
    if not sizes:
        raise ValueError("need at least one pool")
    if any(s < 1 for s in sizes):
        raise ValueError("pool sizes must be positive")
    total = math.prod(sizes)
    return total, math.log2(total)


def count_variants(pools: PoolSet) -> tuple[int, float]:
    """Exact number of distinct key lists, and its log2."""
    return count_from_sizes(pools.sizes())


def _rng(seed) -> np.random.Generator:
    # Philox is counter based: each seed gives an independent, replayable stream
    return np.random.Generator(np.random.Philox(key=int(seed) & ((1 << 128) - 1)))


def sample_variant(pools: PoolSet, seed) -> list[int]:
    rng = _rng(seed)
    return [int(pool.keys[rng.integers(len(pool))]) for _, pool in pools.entries]


def mutate_blob(blob: ProtectedBlob, pools: PoolSet, seed,
                spec: CipherSpec | None = None) -> ProtectedBlob:
    """Resample every key of ``blob`` from its chunk's pool.

    When ``spec`` is given the pools are also checked against the blob (each
    pool must target the chunk its position decodes to).
    """
    for pos in range(blob.chunk_count):
        if pos >= len(pools):
            raise CoverageError(pos)
        if spec is not None:
            want = sco(blob.keys[pos], spec)
            if pools[pos].target != want:
                raise CoverageError(pos, f"pool targets 0x{pools[pos].target:X}, blob needs 0x{want:X}")
    if len(pools) != blob.chunk_count:
        raise CoverageError(blob.chunk_count, "pool set is longer than the blob")
    keys = sample_variant(pools, seed)
    return ProtectedBlob(blob.mode, blob.spec_id, tuple(keys), blob.profile_seed)


# ------------------------------------------------------------------ manifests


def read_manifest(path: str | Path) -> list[tuple[int, Path]]:
    path = Path(path)
    out = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'position <pool-file-path>'")
        pool_path = Path(parts[1])
        if not pool_path.is_absolute():
            pool_path = path.parent / pool_path
        out.append((int(parts[0]), pool_path))
    return out


def load_poolset(manifest: str | Path, spec: CipherSpec) -> PoolSet:
    cache: dict[Path, KeyPool] = {}
    entries = []
    for pos, pool_path in read_manifest(manifest):
        if pool_path not in cache:
            cache[pool_path] = read_pool(pool_path, spec)
        entries.append((pos, cache[pool_path]))
    return PoolSet(tuple(entries))


def write_poolset(pools: PoolSet, directory: str | Path, spec: CipherSpec,
                  max_keys: int | None = None) -> Path:
    """Write one pool file per distinct target plus ``manifest.txt``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [f"# spec={spec.spec_id}"]
    written: set[int] = set()
    for pos, pool in pools.entries:
        name = f"pool_{pool.target:015X}.txt"
        if pool.target not in written:
            write_pool(pool, directory / name, spec, max_keys=max_keys)
            written.add(pool.target)
        lines.append(f"{pos} {name}")
    manifest = directory / "manifest.txt"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def sample_pool_file(path: str | Path, spec: CipherSpec, seed) -> int:
    """One uniformly drawn key from a pool file, streamed (reservoir of one)."""
    rng = _rng(seed)
    it = iter_pool_file(path, spec)
    next(it)
    chosen = None
    for n, key in enumerate(it, 1):
        if rng.integers(n) == 0:
            chosen = key
    if chosen is None:
        raise CoverageError(0, f"{path} holds no keys")
    return chosen


def sample_variant_streamed(manifest: str | Path, spec: CipherSpec, seed) -> list[int]:
    entries = sorted(read_manifest(manifest))
    return [sample_pool_file(p, spec, (int(seed) << 32) ^ pos) for pos, p in entries]
