import pytest
from hypothesis import given, settings, strategies as st

from armoury.gf2 import Gf2System, InconsistentSystem, enumerate_solutions, gf2_solve


def brute_solutions(width, rows):
    return sorted(x for x in range(1 << width)
                  if all((c & x).bit_count() % 2 == r for c, r in rows))


def test_empty_system():
    particular, basis = gf2_solve(Gf2System(3))
    assert particular == 0 and len(basis) == 3
    assert sorted(enumerate_solutions(particular, basis)) == list(range(8))


def test_full_rank():
    s = Gf2System(2)
    s.add(0b01, 1)
    s.add(0b10, 0)
    particular, basis = gf2_solve(s)
    assert (particular, basis) == (1, [])


def test_contradiction():
    s = Gf2System(2)
    s.add(0b01, 1)
    s.add(0b01, 0)
    with pytest.raises(InconsistentSystem):
        gf2_solve(s)


def test_wide_row_rejected():
    with pytest.raises(ValueError):
        Gf2System(2).add(0b100, 1)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 8).flatmap(lambda w: st.tuples(
    st.just(w), st.lists(st.tuples(st.integers(0, (1 << w) - 1), st.integers(0, 1)), max_size=10))))
def test_matches_exhaustive_search(case):
    width, rows = case
    s = Gf2System(width)
    for c, r in rows:
        s.add(c, r)
    expected = brute_solutions(width, rows)
    try:
        particular, basis = gf2_solve(s)
    except InconsistentSystem:
        assert expected == []
        return
    sols = enumerate_solutions(particular, basis)
    assert len(sols) == len(set(sols)) == 1 << len(basis)
    assert sorted(sols) == expected


def test_redundant_rows_keep_rank():
    s = Gf2System(4)
    for c, r in [(0b0011, 1), (0b0110, 0), (0b0101, 1)]:  # third = first ^ second
        s.add(c, r)
    _, basis = gf2_solve(s)
    assert len(basis) == 2
    assert len(enumerate_solutions(0, basis)) == 4
