"""Truncated exponential and logarithm for nilpotent and unipotent matrices."""

from __future__ import annotations

from fractions import Fraction
from math import factorial

from .errors import FactorialNotInvertible, NotNilpotent, NotUnipotent
from .rings import Matrix, RingSpec


def _check_char(spec: RingSpec, m: int) -> None:
    if not spec.rational and spec.p <= m:
        raise FactorialNotInvertible(f"need p > m, got p={spec.p}, m={m}", p=spec.p, m=m)


def _inv_int(spec: RingSpec, k: int):
    return Fraction(1, k) if spec.rational else pow(k, -1, spec.modulus)


def trunc_exp(A: Matrix) -> Matrix:
    """``1 + A + A^2/2 + ... + A^(m-1)/(m-1)!`` for nilpotent ``A``."""
    m = A.rows
    _check_char(A.spec, m)
    powers = [Matrix.identity(A.spec, m)]
    for _ in range(m):
        powers.append(powers[-1] @ A)
    if not powers[m].is_zero():
        raise NotNilpotent("A^m is not zero")
    out = powers[0]
    for k in range(1, m):
        out = out + powers[k] * _inv_int(A.spec, factorial(k))
    return out


def trunc_log(B: Matrix) -> Matrix:
    """``(B-1) - (B-1)^2/2 + ...`` for unipotent ``B``."""
    m = B.rows
    _check_char(B.spec, m)
    X = B - Matrix.identity(B.spec, m)
    powers = [Matrix.identity(B.spec, m)]
    for _ in range(m):
        powers.append(powers[-1] @ X)
    if not powers[m].is_zero():
        raise NotUnipotent("(B-1)^m is not zero")
    out = Matrix.zeros(B.spec, m)
    for k in range(1, m):
        term = powers[k] * _inv_int(B.spec, k)
        out = out + term if k % 2 else out - term
    return out
