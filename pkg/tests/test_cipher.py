import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from armoury import kernels
from armoury.cipher import (DEFAULT_SPEC, PRESETS, SCALED_579, CipherSpec, LfsrSpec, join_key,
                            lfsr_step, majority, measure_period, output_linear_forms, resolve_spec,
                            sco, split_key)
from reference import reference_chunk

DEFAULT_REGS = [(17, [15, 14, 13, 11, 10, 9, 8, 6, 5, 4, 2, 0]),
                (19, [18, 16, 15, 11, 10, 5, 3, 2, 1, 0]),
                (23, [22, 21, 20, 17, 16, 15, 12, 10, 8, 7, 1, 0])]

# frozen from tests/reference.py
FROZEN = {
    0x123456789ABCDEF: 0x7591E86A57965BA,
    0x7953A6F52E6B438: 0x2646FFEF6449C57,
    0x3289938269E0D37: 0x74482150E0A31BC,
    0x062E3FEA6A3A450: 0x45327834B98C462,
}


def regs_of(spec):
    return [(r.degree, sorted(r.taps)) for r in spec.registers]


def test_majority_table():
    for a in (0, 1):
        for b in (0, 1):
            for c in (0, 1):
                assert majority(a, b, c) == int(a + b + c >= 2)


def test_default_spec_shape():
    assert DEFAULT_SPEC.degrees == (17, 19, 23)
    assert DEFAULT_SPEC.key_bits == 59 == DEFAULT_SPEC.chunk_bits
    assert regs_of(DEFAULT_SPEC) == [(d, sorted(t)) for d, t in DEFAULT_REGS]


def test_lfsr_step_zero_is_fixed():
    for reg in DEFAULT_SPEC.registers:
        assert lfsr_step(0, reg) == (0, 0)


def test_lfsr_step_hand_trace():
    r1 = DEFAULT_SPEC.registers[0]
    assert lfsr_step(1, r1) == (1 << 16, 1)


@pytest.mark.parametrize("key,chunk", sorted(FROZEN.items()))
def test_sco_frozen_reference(key, chunk):
    assert sco(key) == chunk


def test_sco_trivial_keys():
    assert sco(0) == 0
    for r1 in (1, 0x1FFFF, 0x12345):
        assert sco(join_key(r1, 0, 0, DEFAULT_SPEC)) == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, (1 << 59) - 1))
def test_sco_matches_reference(key):
    assert sco(key) == reference_chunk(key, DEFAULT_REGS)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(sorted(PRESETS)), st.data())
def test_sco_matches_reference_all_presets(name, data):
    spec = PRESETS[name]
    key = data.draw(st.integers(0, (1 << spec.key_bits) - 1))
    assert sco(key, spec) == reference_chunk(key, regs_of(spec))


@given(st.integers(0, (1 << 59) - 1))
def test_split_join_roundtrip(key):
    assert join_key(*split_key(key, DEFAULT_SPEC), DEFAULT_SPEC) == key


def test_split_key_partition():
    r1, r2, r3 = split_key(join_key(3, 5, 7, DEFAULT_SPEC), DEFAULT_SPEC)
    assert (r1, r2, r3) == (3, 5, 7)
    assert join_key(1, 0, 0, DEFAULT_SPEC) == 1
    assert join_key(0, 1, 0, DEFAULT_SPEC) == 1 << 17
    assert join_key(0, 0, 1, DEFAULT_SPEC) == 1 << 36


def test_linear_forms_unit_rows():
    reg = DEFAULT_SPEC.registers[1]
    rows = output_linear_forms(reg, 3)
    assert rows[0] == 1 and rows[1] == 2


def test_linear_forms_match_simulation():
    rng = random.Random(11)
    for reg in DEFAULT_SPEC.registers + SCALED_579.registers:
        n = 3 * reg.degree
        rows = output_linear_forms(reg, n)
        for _ in range(1000 // 6):
            s0 = rng.getrandbits(reg.degree)
            s = s0
            for t in range(n):
                s, bit = lfsr_step(s, reg)
                assert (rows[t] & s0).bit_count() & 1 == bit


@pytest.mark.parametrize("name", ["scaled-234", "scaled-579", "scaled-91113"])
def test_scaled_registers_are_maximal(name):
    for reg in PRESETS[name].registers:
        assert measure_period(reg) == (1 << reg.degree) - 1


@pytest.mark.parametrize("index,period", [(0, 131071), (1, 524287)])
def test_default_periods(index, period):
    assert measure_period(DEFAULT_SPEC.registers[index]) == period


@pytest.mark.slow
def test_default_r3_period():
    reg = DEFAULT_SPEC.registers[2]
    assert measure_period(reg) == (1 << 23) - 1


def test_spec_text_roundtrip(tmp_path):
    text = DEFAULT_SPEC.to_text()
    again = CipherSpec.from_text(text, name="default-59")
    assert again == DEFAULT_SPEC
    path = tmp_path / "s.spec"
    path.write_text(SCALED_579.to_text())
    loaded = resolve_spec(str(path))
    assert loaded.degrees == (5, 7, 9)
    assert loaded.spec_id != "scaled-579"  # unnamed specs get a content id
    assert loaded.spec_id == resolve_spec(str(path)).spec_id


def test_spec_validation():
    with pytest.raises(ValueError):
        LfsrSpec(5, frozenset({5}))
    with pytest.raises(ValueError):
        CipherSpec.from_text("5:2,0\n7:1,0\n")
    with pytest.raises(ValueError):
        resolve_spec("no-such-preset")


def test_sco_batch_backends_agree():
    rng = np.random.default_rng(5)
    keys = rng.integers(0, 1 << 59, 64, dtype=np.int64)
    spec = DEFAULT_SPEC
    a = kernels.sco_batch_numba(keys, np.array(spec.degrees), np.array(spec.masks, dtype=np.int64), 59)
    b = kernels.sco_batch_numpy(keys, np.array(spec.degrees), np.array(spec.masks, dtype=np.int64), 59)
    assert np.array_equal(a, b)
    assert [int(x) for x in a[:4]] == [sco(int(k)) for k in keys[:4]]
