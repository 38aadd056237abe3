"""Gaussian elimination over GF(2) with rows stored as Python int bitsets."""

from __future__ import annotations

from dataclasses import dataclass, field


class InconsistentSystem(ValueError):
    """The system has no solution."""


@dataclass
class Gf2System:
    width: int
    rows: list[tuple[int, int]] = field(default_factory=list)

    def add(self, coeffs: int, rhs: int) -> None:
        if coeffs >> self.width:
            raise ValueError(f"coefficient vector wider than {self.width} bits")
        self.rows.append((coeffs, rhs & 1))


def gf2_solve(system: Gf2System) -> tuple[int, list[int]]:
    """Return ``(particular, basis)``; the solutions are particular ^ span(basis).

    Raises InconsistentSystem when some row reduces to ``0 = 1``.
    """
    width = system.width
    pivots: dict[int, tuple[int, int]] = {}  # pivot column -> reduced (row, rhs)
    for coeffs, rhs in system.rows:
        for col, (prow, prhs) in pivots.items():
            if (coeffs >> col) & 1:
                coeffs ^= prow
                rhs ^= prhs
        if coeffs == 0:
            if rhs:
                raise InconsistentSystem("0 = 1 after elimination")
            continue
        col = coeffs.bit_length() - 1
        # keep the echelon fully reduced
        for c, (prow, prhs) in list(pivots.items()):
            if (prow >> col) & 1:
                pivots[c] = (prow ^ coeffs, prhs ^ rhs)
        pivots[col] = (coeffs, rhs)

    particular = 0
    for col, (_, rhs) in pivots.items():
        if rhs:
            particular |= 1 << col
    basis = []
    for free in range(width):
        if free in pivots:
            continue
        vec = 1 << free
        for col, (prow, _) in pivots.items():
            if (prow >> free) & 1:
                vec |= 1 << col
        basis.append(vec)
    return particular, basis


def enumerate_solutions(particular: int, basis: list[int]) -> list[int]:
    sols = [particular]
    for v in basis:
        sols += [s ^ v for s in sols]
    return sols
