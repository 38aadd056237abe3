"""``armoury`` command line.

Exit status: 0 success, 1 data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import secrets
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, _accel
from .altgen import LCG_PRESETS, HASHES, HashChainSpec, hash_chain, lcg_sequence
from .cipher import PRESETS, resolve_spec
from .entropy import DEFAULT_STRIDE, DEFAULT_WINDOW, byte_entropy, sliding_profile
from .ir import assemble
from .keysearch import (KeyPool, SearchBudget, attack_keys, brute_force_keys, merge_pools,
                        read_pool, write_pool)
from .mutation import count_from_sizes, count_variants, load_poolset, mutate_blob
from .oracle import TRANSPORTS, OracleCore, OracleServer, connect
from .packer import MAGIC, LIVE_SEARCH_MAX_BITS, ProtectedBlob, protect_program, reveal_program
from .vm import decode_program, encode_program, execute, format_dump, new_profile, read_dump

log = logging.getLogger("armoury")

PAPER_POOL_SIZES = (314, 2755, 2755, 2755, 8177, 319, 26511, 9863, 3009)


class UsageError(Exception):
    pass


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("ARMOURY_SEED")
    if env:
        return int(env, 0)
    return secrets.randbits(32)


def _header(args, seed, spec_id=None) -> dict:
    head = {"armoury": __version__, "numpy": np.__version__,
            "numba": _numba_version(), "accel": "numba" if _accel.USE_NUMBA else "numpy",
            "seed": seed, "spec": spec_id}
    if not args.json:
        print("# " + " ".join(f"{k}={v}" for k, v in head.items()), file=sys.stderr)
    return head


def _numba_version():
    try:
        import numba
        return numba.__version__
    except ImportError:  # pragma: no cover
        return None


def _emit(args, head: dict, payload: dict, text: str | None = None) -> None:
    if args.json:
        print(json.dumps({"header": head, **payload}, indent=2))
    elif text is not None:
        print(text, end="" if text.endswith("\n") else "\n")


def _hex(v: int) -> str:
    return f"0x{v:X}"


def _parse_int(text: str) -> int:
    return int(text, 0)


def _parse_slice(text: str) -> tuple[int, int]:
    try:
        i, n = (int(x) for x in text.split("/"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"slice must look like i/n, got {text!r}") from None
    if n < 1 or not 0 <= i < n:
        raise argparse.ArgumentTypeError(f"slice index out of range: {text}")
    return i, n


def _spec(args):
    return resolve_spec(getattr(args, "spec", None))


# ------------------------------------------------------------------ commands


def cmd_assemble(args):
    seed = args.profile_seed if args.profile_seed is not None else _seed(args)
    head = _header(args, seed)
    program = assemble(Path(args.source).read_text(encoding="utf-8"))
    profile = new_profile(seed)
    words = encode_program(program, profile)
    dump = format_dump(words, profile_seed=seed)
    if args.output:
        Path(args.output).write_text(dump)
    _emit(args, head, {"instructions": len(program), "words": [_hex(w) for w in words],
                       "profile_seed": seed},
          None if args.output else dump)
    return 0


def _search_one(payload):
    spec_name, target, partition = payload
    spec = resolve_spec(spec_name)
    pool = attack_keys(target, spec, SearchBudget(partition=partition))
    return partition, pool.keys


def cmd_search_keys(args):
    spec = _spec(args)
    seed = _seed(args)
    head = _header(args, seed, spec.spec_id)
    target = args.target
    full_scale = spec.key_bits > LIVE_SEARCH_MAX_BITS
    t0 = time.time()
    if args.brute:
        pool = brute_force_keys(target, spec)
        slices = None
    elif args.slice is not None:
        pool = attack_keys(target, spec, SearchBudget(partition=args.slice))
        slices = [args.slice]
    else:
        if full_scale and not args.i_have_hours:
            raise UsageError(
                f"a full {spec.key_bits}-bit search scans 2**{spec.degrees[0] + spec.degrees[1]} guesses "
                "(minutes to hours per target); pass --i-have-hours "
                "or search one --slice i/n")
        n = args.slices
        ckpt = Path(args.checkpoint_dir) if args.checkpoint_dir else None
        if ckpt:
            ckpt.mkdir(parents=True, exist_ok=True)
        parts: list[KeyPool] = []
        todo = []
        for i in range(n):
            path = ckpt / f"slice-{i:05d}-of-{n:05d}.txt" if ckpt else None
            if path is not None and path.exists():
                parts.append(read_pool(path, spec))
            else:
                todo.append((i, path))
        spec_arg = args.spec if args.spec in PRESETS else str(args.spec)
        workers = args.workers or os.cpu_count() or 1
        jobs = [(spec_arg, target, (i, n)) for i, _ in todo]
        paths = {(i, n): p for i, p in todo}
        results = (ProcessPoolExecutor(workers).map(_search_one, jobs) if workers > 1 and len(jobs) > 1
                   else map(_search_one, jobs))
        for partition, keys in results:
            part = KeyPool(target, keys, spec.spec_id)
            if paths[partition] is not None:
                write_pool(part, paths[partition], spec)
            parts.append(part)
            log.info("slice %d/%d: %d keys", partition[0], n, len(part))
        pool = merge_pools(parts) if parts else KeyPool(target, np.empty(0, np.int64), spec.spec_id)
        slices = [(i, n) for i in range(n)]
    elapsed = time.time() - t0
    if args.output:
        write_pool(pool, args.output, spec, max_keys=args.max_keys)
    summary = {"target": _hex(target), "keys": len(pool), "seconds": round(elapsed, 3),
               "slices": slices, "output": args.output}
    lines = [f"target {_hex(target)}: {len(pool)} keys in {elapsed:.2f}s"]
    if not args.output:
        lines += [_hex(k) for k in pool]
    _emit(args, head, summary, "\n".join(lines))
    return 0


def _load_pools(args, spec):
    if not args.pools:
        return None
    return load_poolset(args.pools, spec)


def cmd_protect(args):
    spec = _spec(args)
    seed = _seed(args)
    head = _header(args, seed, spec.spec_id)
    words, profile_seed = read_dump(args.dump)
    poolset = _load_pools(args, spec)
    pools = poolset.by_target() if poolset else None
    blob = protect_program(words, args.mode, spec, pools=pools, seed=seed,
                           live_search=args.live, profile_seed=profile_seed)
    Path(args.output).write_bytes(blob.to_bytes())
    _emit(args, head, {"mode": blob.mode, "keys": [_hex(k) for k in blob.keys],
                       "profile_seed": profile_seed, "output": args.output},
          f"protected {len(words)} words into {blob.chunk_count} keys -> {args.output}"
          + (f" (profile seed {profile_seed})" if profile_seed is not None else ""))
    return 0


def _oracle_client(args, spec):
    if args.transport == "loopback":
        return connect("loopback", core=OracleCore(spec))
    if not args.addr:
        raise UsageError(f"--addr is required for the {args.transport} transport")
    return connect(args.transport, args.addr)


def _reveal(args, spec) -> list[int]:
    blob = ProtectedBlob.from_bytes(Path(args.blob).read_bytes())
    if blob.spec_id != spec.spec_id:
        raise ValueError(f"blob was made for {blob.spec_id}, not {spec.spec_id}")
    with _oracle_client(args, spec) as client:
        return reveal_program(blob, client.decode, spec.chunk_bits)


def cmd_reveal(args):
    spec = _spec(args)
    head = _header(args, None, spec.spec_id)
    words = _reveal(args, spec)
    dump = format_dump(words, profile_seed=args.profile_seed)
    if args.output:
        Path(args.output).write_text(dump)
    _emit(args, head, {"words": [_hex(w) for w in words]}, None if args.output else dump)
    return 0


def cmd_run(args):
    spec = _spec(args)
    head = _header(args, None, spec.spec_id)
    data = Path(args.program).read_bytes()
    if data.startswith(MAGIC):
        words = _reveal(argparse.Namespace(**{**vars(args), "blob": args.program}), spec)
        profile_seed = args.profile_seed
        source = "oracle"
    else:
        words, dump_seed = read_dump(args.program)
        profile_seed = args.profile_seed if args.profile_seed is not None else dump_seed
        source = "dump"
    if profile_seed is None:
        raise UsageError("the VM profile is unknown; pass --profile-seed")
    profile = new_profile(profile_seed)
    decode_program(words, profile)  # validates before running
    ctx = execute(words, profile, fuel=args.fuel)
    regs = ctx.registers(profile)
    text = "\n".join(f"{r} = 0x{v:08X}" for r, v in regs.items()) + f"\nsteps = {ctx.steps}"
    _emit(args, head, {"source": source, "registers": regs, "steps": ctx.steps,
                       "zero_flag": ctx.zero_flag}, text)
    return 0


def cmd_mutate(args):
    spec = _spec(args)
    seed = _seed(args)
    head = _header(args, seed, spec.spec_id)
    blob = ProtectedBlob.from_bytes(Path(args.blob).read_bytes())
    pools = load_poolset(args.pools, spec)
    new = mutate_blob(blob, pools, seed, spec=spec)
    Path(args.output).write_bytes(new.to_bytes())
    changed = sum(a != b for a, b in zip(blob.keys, new.keys))
    _emit(args, head, {"keys": [_hex(k) for k in new.keys], "changed": changed,
                       "output": args.output},
          f"resampled {changed}/{new.chunk_count} keys -> {args.output}")
    return 0


def cmd_entropy(args):
    head = _header(args, None)
    data = Path(args.file).read_bytes()
    window = min(args.window, len(data))
    prof = sliding_profile(data, window, args.stride)
    payload = {"file": args.file, "entropy": byte_entropy(data), "window": window,
               "stride": args.stride,
               "profile": [{"offset": o, "entropy": h} for o, h in zip(prof.offsets(), prof.values)]}
    if args.against:
        other = Path(args.against).read_bytes()
        payload["against"] = {"file": args.against, "entropy": byte_entropy(other)}
        payload["transec_distance"] = abs(payload["entropy"] - payload["against"]["entropy"])
    _emit(args, head, payload, prof.to_csv())
    return 0


def cmd_count_variants(args):
    head = _header(args, None)
    if args.pools:
        exact, lg = count_variants(load_poolset(args.pools, _spec(args)))
    else:
        sizes = [int(s) for s in args.sizes.split(",")] if args.sizes else list(PAPER_POOL_SIZES)
        exact, lg = count_from_sizes(sizes)
    _emit(args, head, {"variants": str(exact), "log2": lg},
          f"{exact:,}\nlog2 = {lg:.4f}")
    return 0


def cmd_oracle_serve(args):
    spec = _spec(args)
    seed = _seed(args)
    head = _header(args, seed, spec.spec_id)
    pools = _load_pools(args, spec) or ()
    core = OracleCore(spec, pools, seed=seed)
    if args.transport == "loopback":
        raise UsageError("the loopback transport only exists inside one process")
    if not args.addr:
        raise UsageError("--addr is required")
    print(f"oracle serving {spec.spec_id} on {args.transport}:{args.addr}", file=sys.stderr)
    OracleServer(core, args.transport, args.addr).serve_forever()
    return 0


def cmd_lcg(args):
    seed = args.x0
    head = _header(args, seed)
    p = LCG_PRESETS[args.preset]
    seq = lcg_sequence(p, args.x0, args.count)
    _emit(args, head, {"preset": args.preset, "a": p.a, "b": p.b, "modulus": p.n_modulus,
                       "post_shift": p.post_shift, "outputs": [o for _, o in seq],
                       "states": [s for s, _ in seq]},
          "\n".join(str(o) for _, o in seq))
    return 0


def cmd_hashchain(args):
    head = _header(args, args.padding_seed)
    iv = bytes.fromhex(args.iv)
    chain = hash_chain(HashChainSpec(args.hash, iv, args.padding_seed, args.out_bits))
    values = chain.take(args.count)
    width = args.out_bits // 4
    _emit(args, head, {"hash": args.hash, "values": [f"0x{v:0{width}X}" for v in values],
                       "meta": chain.meta},
          "\n".join(f"0x{v:0{width}X}" for v in values))
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--seed", type=_parse_int, help="RNG seed (default: $ARMOURY_SEED or random)")
    common.add_argument("-v", "--verbose", action="store_true")

    spec_opt = argparse.ArgumentParser(add_help=False)
    spec_opt.add_argument("--spec", "--spec-file", dest="spec", default="default-59",
                          help=f"preset ({', '.join(PRESETS)}) or spec file")

    oracle_opt = argparse.ArgumentParser(add_help=False)
    oracle_opt.add_argument("--transport", choices=TRANSPORTS, default="loopback")
    oracle_opt.add_argument("--addr", help="socket path or port, or FIFO path stem")

    p = argparse.ArgumentParser(prog="armoury", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"armoury {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("assemble", parents=[common], help="toy assembly -> bytecode dump")
    s.add_argument("source")
    s.add_argument("-o", "--output")
    s.add_argument("--profile-seed", type=_parse_int)
    s.set_defaults(func=cmd_assemble)

    s = sub.add_parser("search-keys", parents=[common, spec_opt], help="target chunk -> key pool")
    s.add_argument("--target", type=_parse_int, required=True)
    s.add_argument("-o", "--output")
    s.add_argument("--brute", action="store_true", help="exhaustive decoding (small specs)")
    s.add_argument("--slice", type=_parse_slice, help="search only slice i of n")
    s.add_argument("--slices", type=int, default=1, help="split the full search into n slices")
    s.add_argument("--checkpoint-dir", help="keep per-slice results here and resume from them")
    s.add_argument("--workers", type=int)
    s.add_argument("--max-keys", type=int, help="thin the written pool to this many keys")
    s.add_argument("--i-have-hours", action="store_true",
                   help="allow a full-space search on a full-size cipher")
    s.set_defaults(func=cmd_search_keys)

    s = sub.add_parser("protect", parents=[common, spec_opt], help="bytecode dump -> blob")
    s.add_argument("dump")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--mode", choices=("concat", "direct"), default="concat")
    s.add_argument("--pools", help="pool manifest")
    s.add_argument("--live", action="store_true", help="search missing pools (reduced specs only)")
    s.set_defaults(func=cmd_protect)

    s = sub.add_parser("reveal", parents=[common, spec_opt, oracle_opt], help="blob -> bytecode dump")
    s.add_argument("blob")
    s.add_argument("-o", "--output")
    s.add_argument("--profile-seed", type=_parse_int, help="recorded in the dump header")
    s.set_defaults(func=cmd_reveal)

    s = sub.add_parser("run", parents=[common, spec_opt, oracle_opt],
                       help="execute a dump, or a blob through the oracle")
    s.add_argument("program")
    s.add_argument("--profile-seed", type=_parse_int)
    s.add_argument("--fuel", type=int, default=100_000)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("mutate", parents=[common, spec_opt], help="resample a blob's keys")
    s.add_argument("blob")
    s.add_argument("--pools", required=True)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_mutate)

    s = sub.add_parser("entropy", parents=[common], help="entropy profile as CSV")
    s.add_argument("file")
    s.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    s.add_argument("--stride", type=int, default=DEFAULT_STRIDE)
    s.add_argument("--against", help="second file for the TRANSEC distance")
    s.set_defaults(func=cmd_entropy)

    s = sub.add_parser("count-variants", parents=[common, spec_opt], help="size of the variant space")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--sizes", help="comma-separated pool sizes (default: the nine published sizes)")
    g.add_argument("--pools", help="pool manifest")
    s.set_defaults(func=cmd_count_variants)

    s = sub.add_parser("oracle", help="oracle process")
    osub = s.add_subparsers(dest="oracle_command", required=True)
    o = osub.add_parser("serve", parents=[common, spec_opt, oracle_opt])
    o.add_argument("--pools", help="pool manifest served to MUTATE requests")
    o.set_defaults(func=cmd_oracle_serve)

    s = sub.add_parser("lcg", parents=[common], help="LCG preset output")
    s.add_argument("--preset", choices=sorted(LCG_PRESETS), default="minstd")
    s.add_argument("--x0", type=_parse_int, default=1)
    s.add_argument("--count", type=int, default=10)
    s.set_defaults(func=cmd_lcg)

    s = sub.add_parser("hashchain", parents=[common], help="iterated hash chain output")
    s.add_argument("--hash", choices=sorted(HASHES), default="sha256")
    s.add_argument("--iv", default="00" * 32, help="IV as hex (m bits)")
    s.add_argument("--padding-seed", type=_parse_int, default=0)
    s.add_argument("--out-bits", type=int, default=64)
    s.add_argument("--count", type=int, default=5)
    s.set_defaults(func=cmd_hashchain)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"armoury: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, LookupError, OSError, RuntimeError) as exc:
        print(f"armoury: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
