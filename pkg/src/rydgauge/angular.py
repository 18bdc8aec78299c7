"""Angular-momentum algebra for the ns_{1/2} / np_{3/2} level scheme.

Half-integer quantum numbers are carried internally as doubled integers
(``2j``, ``2m``) so that selection rules are decided by exact integer
comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal

import numpy as np
from numpy.typing import NDArray

Orbital = Literal["s", "p"]

#: total angular momentum (doubled) of each multiplet
TWICE_J: dict[str, int] = {"s": 1, "p": 3}


def twice(x: float | Fraction | int) -> int:
    """Return ``2*x`` as an int, rejecting anything that is not a half-integer."""
    doubled = 2 * x
    n = round(doubled)
    if abs(doubled - n) > 1e-9:
        raise ValueError(f"{x!r} is not an integer or half-integer")
    return int(n)


@dataclass(frozen=True, order=True)
class AtomicState:
    """Single-atom Zeeman state |l m_j>, with ``twice_m`` = 2 m_j."""

    orbital: Orbital
    twice_m: int

    def __post_init__(self) -> None:
        if self.orbital not in TWICE_J:
            raise ValueError(f"unknown orbital {self.orbital!r}")
        tj = TWICE_J[self.orbital]
        if abs(self.twice_m) > tj or (tj - self.twice_m) % 2:
            raise ValueError(f"m = {self.twice_m}/2 not allowed for j = {tj}/2")

    @classmethod
    def of(cls, orbital: Orbital, m: float | Fraction) -> AtomicState:
        return cls(orbital, twice(m))

    @property
    def m(self) -> float:
        return self.twice_m / 2

    def __str__(self) -> str:
        sign = "+" if self.twice_m > 0 else "-"
        return f"{self.orbital}{sign}{abs(self.twice_m)}/2"


def _check(tj: int, tm: int) -> None:
    if tj < 0 or abs(tm) > tj or (tj - tm) % 2:
        raise ValueError(f"invalid angular momentum pair j={tj}/2, m={tm}/2")


def _cg_twice(tj1: int, tm1: int, tj2: int, tm2: int, tJ: int, tM: int) -> float:
    for tj, tm in ((tj1, tm1), (tj2, tm2), (tJ, tM)):
        _check(tj, tm)
    if tM != tm1 + tm2:
        return 0.0
    if tJ > tj1 + tj2 or tJ < abs(tj1 - tj2) or (tj1 + tj2 - tJ) % 2:
        return 0.0

    f = math.factorial
    # every argument below is an integer once the triangle rule holds
    a = (tJ + tj1 - tj2) // 2
    b = (tJ - tj1 + tj2) // 2
    c = (tj1 + tj2 - tJ) // 2
    d = (tj1 + tj2 + tJ) // 2 + 1
    prefactor = Fraction((tJ + 1) * f(a) * f(b) * f(c), f(d))
    prefactor *= (
        f((tJ + tM) // 2) * f((tJ - tM) // 2)
        * f((tj1 - tm1) // 2) * f((tj1 + tm1) // 2)
        * f((tj2 - tm2) // 2) * f((tj2 + tm2) // 2)
    )

    total = Fraction(0)
    for k in range(0, c + 1):
        args = (
            k,
            c - k,
            (tj1 - tm1) // 2 - k,
            (tj2 + tm2) // 2 - k,
            (tJ - tj2 + tm1) // 2 + k,
            (tJ - tj1 - tm2) // 2 + k,
        )
        if min(args) < 0:
            continue
        denom = 1
        for n in args:
            denom *= f(n)
        total += Fraction((-1) ** k, denom)
    if total == 0:
        return 0.0
    sign = 1.0 if total > 0 else -1.0
    # sqrt(prefactor) * |total| evaluated as one square root of an exact rational
    return sign * math.sqrt(prefactor * total * total)


def cg_coefficient(j1, m1, j2, m2, J, M) -> float:
    """Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M> (Condon-Shortley phases).

    Arguments may be ints, floats or Fractions but must be integers or
    half-integers. Returns exactly 0.0 when ``M != m1 + m2`` or the triangle
    rule fails.
    """
    return _cg_twice(twice(j1), twice(m1), twice(j2), twice(m2), twice(J), twice(M))


_SQRT_HALF = 1.0 / math.sqrt(2.0)


def spherical_unit_vector(q: int) -> NDArray[np.complex128]:
    """Spherical basis vector e_q: e_0 = z, e_{+-1} = -+(x +- i y)/sqrt(2)."""
    if q == 0:
        return np.array([0.0, 0.0, 1.0], dtype=complex)
    if q == 1:
        return -_SQRT_HALF * np.array([1.0, 1.0j, 0.0])
    if q == -1:
        return _SQRT_HALF * np.array([1.0, -1.0j, 0.0])
    raise ValueError(f"spherical component q must be -1, 0 or 1, got {q}")


def dipole_element(p_state: AtomicState, s_state: AtomicState) -> NDArray[np.complex128]:
    """Cartesian dipole vector <p m|d|s m'> in units of the scaled reduced element.

    The spherical components d_q = e_q . d obey the Wigner-Eckart theorem,
    <p m|d_q|s m'> = C(1/2 m', 1 q | 3/2 m), and d = sum_q d_q e_q^*. Only
    q = m - m' survives. With this (standard) convention a rotation of the
    geometry by phi about z acts on pair states as exp(-i J_z phi).
    """
    if p_state.orbital != "p" or s_state.orbital != "s":
        raise ValueError("dipole_element expects a (p, s) pair")
    tq = p_state.twice_m - s_state.twice_m
    out = np.zeros(3, dtype=complex)
    if abs(tq) > 2:
        return out
    coeff = _cg_twice(1, s_state.twice_m, 2, tq, 3, p_state.twice_m)
    return coeff * spherical_unit_vector(tq // 2).conj()


def transition_dipole(bra: AtomicState, ket: AtomicState) -> NDArray[np.complex128]:
    """<bra|d|ket> for any pair of single-atom states in the s/p scheme."""
    if bra.orbital == "p" and ket.orbital == "s":
        return dipole_element(bra, ket)
    if bra.orbital == "s" and ket.orbital == "p":
        return dipole_element(ket, bra).conj()
    return np.zeros(3, dtype=complex)
