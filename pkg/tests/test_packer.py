import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from armoury.cipher import SCALED_234, SCALED_579, SCALED_91113, sco
from armoury.keysearch import KeyPool, attack_keys
from armoury.oracle import OracleCore, OracleUnavailable, connect
from armoury.packer import (BlobFormatError, MissingPoolError, PackError, PaddingError,
                            ProtectedBlob, blob_contains_chunk, chunks_per_group, pack_concat,
                            pack_direct, program_chunks, protect_program, reveal_program,
                            unpack_concat, unpack_direct)
from armoury.vm import encode_program, new_profile
from armoury.ir import assemble

M32 = 0xFFFFFFFF

SERIES = [
    ((0x2F010000, 0x00040004, 0x3, 0x0, 0x89), (0x0BC04000000, 0x080008000000060, 0x089)),
    ((0x3D010000, 0x00040004, 0x3, 0x0, 0x50), (0x0F404000000, 0x080008000000060, 0x050)),
    ((0x05010000, 0x00040004, 0x3, 0x0, 0x8D), (0x01404000000, 0x080008000000060, 0x08D)),
]


def shift_unpack(m1, m2, m3):
    """Fixed-shift unpacking for 59-bit chunks, written out term by term."""
    x1 = m1 >> 10
    x2 = ((m2 >> 37) | (m1 << 22)) & M32
    x3 = (m2 >> 5) & M32
    x4 = ((m3 >> 32) | (m2 << 27)) & M32
    x5 = m3 & M32
    return x1, x2, x3, x4, x5


@pytest.mark.parametrize("words,chunks", SERIES)
def test_series_golden(words, chunks):
    assert pack_concat(words) == chunks
    assert unpack_concat(chunks) == words
    assert shift_unpack(*chunks) == words


def test_zero_group():
    assert pack_concat((0,) * 5) == (0, 0, 0)


words5 = st.tuples(*[st.integers(0, M32)] * 5)


@given(words5)
def test_concat_roundtrip_and_shift_oracle(words):
    chunks = pack_concat(words)
    assert all(0 <= m < 1 << 59 for m in chunks)
    assert chunks[0] < 1 << 42
    assert unpack_concat(chunks) == words
    assert shift_unpack(*chunks) == words


def test_concat_roundtrip_bulk():
    rng = random.Random(0)
    for _ in range(10_000):
        w = tuple(rng.getrandbits(32) for _ in range(5))
        assert unpack_concat(pack_concat(w)) == w


@pytest.mark.parametrize("bits,q", [(59, 3), (33, 5), (21, 8), (9, 18), (160, 1)])
def test_chunks_per_group(bits, q):
    assert chunks_per_group(bits) == q


@given(words5, st.sampled_from([9, 21, 33, 40]))
def test_concat_generic_widths(words, bits):
    chunks = pack_concat(words, bits)
    assert len(chunks) == chunks_per_group(bits)
    assert unpack_concat(chunks, bits) == words


def test_padding_checked():
    m1, m2, m3 = SERIES[0][1]
    with pytest.raises(PaddingError):
        unpack_concat((m1 | 1 << 50, m2, m3))
    with pytest.raises(PackError):
        pack_concat((1, 2, 3))
    with pytest.raises(PackError):
        pack_concat((1 << 32, 0, 0, 0, 0))


def test_direct_mode():
    m = pack_direct(0x2F010000, noise_seed=1)
    assert m & M32 == 0x2F010000 and m < 1 << 59
    assert unpack_direct(m) == 0x2F010000
    other = pack_direct(0x2F010000, noise_seed=2)
    assert other != m and other & M32 == m & M32
    with pytest.raises(PackError):
        pack_direct(1, 0, chunk_bits=21)


@given(st.integers(0, M32), st.integers())
def test_direct_roundtrip(word, seed):
    assert unpack_direct(pack_direct(word, seed)) == word


# ---------------------------------------------------------------- blobs

def test_blob_bytes_roundtrip():
    blob = ProtectedBlob("concat", "default-59", (1, 2**59 - 1, 0x6AA006000000099))
    data = blob.to_bytes()
    assert data.startswith(b"ARMR1\x01\x0adefault-59\x00\x00\x00\x03")
    back = ProtectedBlob.from_bytes(data)
    assert back.keys == blob.keys and back.mode == "concat" and back.spec_id == "default-59"
    assert blob_contains_chunk(data, 0x6AA006000000099)


def test_blob_format_errors():
    data = ProtectedBlob("direct", "x", (5,)).to_bytes()
    for bad in (b"XXXXX" + data[5:], data[:-1], data[:5] + b"\x09" + data[6:]):
        with pytest.raises(BlobFormatError):
            ProtectedBlob.from_bytes(bad)


def _single_key_pools(words, spec):
    pools = {}
    for m in program_chunks(words, "concat", spec.chunk_bits):
        if m not in pools:
            pools[m] = attack_keys(m, spec)
    return pools


def test_protect_forced_choice():
    spec = SCALED_579
    words = [0, 0, 0, 0, 0]
    chunks = program_chunks(words, "concat", 21)
    keys = {m: KeyPool(m, np.array([0]), spec.spec_id) for m in chunks}
    blob = protect_program(words, "concat", spec, pools=keys, seed=1)
    assert blob.keys == (0,) * len(chunks)


def test_protect_seeds_give_distinct_blobs():
    spec = SCALED_91113
    prog = encode_program(assemble("MOV EAX, 0x3\nHALT"), new_profile(1))
    a = protect_program(prog, "concat", spec, seed=1, live_search=True)
    b = protect_program(prog, "concat", spec, seed=2, live_search=True)
    assert a.keys != b.keys
    core = OracleCore(spec)
    for blob in (a, b):
        assert reveal_program(blob, lambda k: sco(k, spec), spec.chunk_bits) == prog
        with connect("loopback", core=core) as client:
            assert reveal_program(blob, client.decode) == prog


def test_protect_missing_pool():
    with pytest.raises(MissingPoolError) as err:
        protect_program([1, 2, 3, 4, 5], "concat", SCALED_579, pools={})
    assert err.value.position == 0


def test_live_search_refused_at_full_scale():
    from armoury.cipher import DEFAULT_SPEC
    with pytest.raises(ValueError):
        protect_program([0] * 5, "concat", DEFAULT_SPEC, live_search=True)


def test_direct_mode_protect_reveal():
    spec = SCALED_91113
    words = [0x2F010000, 0x00040004, 3, 0, 0x89]
    blob = protect_program(words, "direct", spec, seed=4, live_search=True)
    assert len(blob.keys) == 5
    assert reveal_program(blob, lambda k: sco(k, spec)) == words


def test_reveal_no_partial_output():
    spec = SCALED_91113
    words = [0x2F010000, 0x00040004, 3, 0, 0x89]
    blob = protect_program(words, "concat", spec, seed=4, live_search=True)
    seen = []

    def flaky(key):
        if len(seen) == 2:
            raise OracleUnavailable("down")
        seen.append(key)
        return sco(key, spec)

    with pytest.raises(OracleUnavailable):
        reveal_program(blob, flaky)


def test_reveal_series_1_through_shifts():
    # a blob whose keys decode (through a table) to the series (1) chunks
    words, chunks = SERIES[0]
    table = {10 + i: m for i, m in enumerate(chunks)}
    blob = ProtectedBlob("concat", "default-59", tuple(table))
    assert reveal_program(blob, table.__getitem__) == list(words)


def test_reveal_rejects_ragged_blob():
    blob = ProtectedBlob("concat", "default-59", (1, 2))
    with pytest.raises(BlobFormatError):
        reveal_program(blob, lambda k: 0)


def test_tiny_spec_concat():
    spec = SCALED_234  # 9-bit chunks, 18 per instruction; only 277 of 512 chunks have keys
    words = [0, 0, 0, 0, 0x1B5]
    blob = protect_program(words, "concat", spec, seed=0, live_search=True)
    assert len(blob.keys) == 18
    assert reveal_program(blob, lambda k: sco(k, spec), 9) == words
    with pytest.raises(MissingPoolError):
        protect_program([0x2F010000, 0, 0, 0, 0], "concat", spec, live_search=True)
