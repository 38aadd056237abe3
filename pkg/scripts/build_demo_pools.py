"""Rebuild the shipped 59-bit key pools for the demo program.

For every distinct chunk of demo.asm under profile seed 1 the (r1, r2)
guess space is searched slice by slice until MAX_KEYS keys are found or
the space is exhausted.  Pools cut short are marked ``partial=1``.  Output
goes to src/armoury/data/demo_pools/ (pool files plus a position manifest);
existing pool files are kept, so an interrupted run can be resumed.
"""

import sys
import time
from pathlib import Path

from armoury.cipher import DEFAULT_SPEC
from armoury.ir import assemble
from armoury.keysearch import KeyPool, SearchBudget, attack_keys, merge_pools, write_pool
from armoury.packer import program_chunks
from armoury.vm import encode_program, new_profile

PROFILE_SEED = 1
MAX_KEYS = 4096
SLICES = 64

root = Path(__file__).resolve().parents[1] / "src" / "armoury" / "data"
out = root / "demo_pools"
out.mkdir(exist_ok=True)


def collect(target: int) -> KeyPool:
    parts = []
    have = 0
    for i in range(SLICES):
        part = attack_keys(target, DEFAULT_SPEC,
                           SearchBudget(partition=(i, SLICES), max_keys=MAX_KEYS - have))
        parts.append(part)
        have += len(part)
        if have >= MAX_KEYS:
            pool = merge_pools(parts)
            return KeyPool(target, pool.keys, pool.spec_id, complete=False)
    return merge_pools(parts)


prog = assemble((root / "demo.asm").read_text())
chunks = program_chunks(encode_program(prog, new_profile(PROFILE_SEED)), "concat")
manifest = []
for pos, m in enumerate(chunks):
    name = f"pool_{m:015X}.txt"
    path = out / name
    if not path.exists():
        t0 = time.time()
        pool = collect(m)
        write_pool(pool, path, DEFAULT_SPEC)
        state = "partial" if not pool.complete else "complete"
        print(f"chunk #{pos} 0x{m:X}: {len(pool)} keys ({state}) in {time.time() - t0:.0f}s",
              flush=True)
    manifest.append(f"{pos} {name}")
(out / "manifest.txt").write_text(
    f"# spec={DEFAULT_SPEC.spec_id} profile-seed={PROFILE_SEED} program=demo.asm\n"
    + "\n".join(manifest) + "\n")
sys.exit(0)
