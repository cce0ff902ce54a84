import numpy as np
import pytest

from tamelift.centralizers import algebra_membership, group_membership
from tamelift.errors import FactorialNotInvertible, NotInAlgebra, NotInGroup, NotNilpotent, NotUnipotent
from tamelift.explog import trunc_exp, trunc_log
from tamelift.orbits import build_representative, jordan_type
from tamelift.partitions import Partition, enumerate_admissible
from tamelift.rings import Matrix, RingSpec

from _oracles import random_group_element

PRIMES = (7, 11, 17)


def random_nilpotent(rng, m, p):
    U = np.triu(rng.integers(0, p, size=(m, m)), 1)
    C = rng.integers(0, p, size=(m, m))
    k = RingSpec(p)
    Cm = Matrix.from_int(k, C)
    try:
        Ci = Cm.inverse()
    except Exception:
        return Matrix.from_int(k, U), None
    return Cm @ Matrix.from_int(k, U) @ Ci, (Cm, Ci)


def test_examples():
    k = RingSpec(7)
    assert trunc_exp(Matrix.zeros(k, 3)) == Matrix.identity(k, 3)
    E13 = np.zeros((4, 4), dtype=np.int64)
    E13[0, 2] = 1
    T = trunc_exp(Matrix.from_int(k, E13))
    assert T == Matrix.from_int(k, np.eye(4, dtype=np.int64) + E13)
    A = Matrix.from_int(k, [[0, 1, 0], [0, 0, 1], [0, 0, 0]])
    assert trunc_exp(A) == Matrix.from_int(k, [[1, 1, 4], [0, 1, 1], [0, 0, 1]])
    assert trunc_log(Matrix.identity(k, 3)).is_zero()
    L = trunc_log(T)
    assert L == Matrix.from_int(k, E13) and jordan_type(L) == Partition((2, 1, 1))
    assert trunc_log(trunc_exp(A)) == A


def test_errors():
    k = RingSpec(3)
    with pytest.raises(FactorialNotInvertible):
        trunc_exp(Matrix.zeros(k, 3))
    k = RingSpec(7)
    with pytest.raises(NotNilpotent):
        trunc_exp(Matrix.identity(k, 2))
    with pytest.raises(NotUnipotent):
        trunc_log(Matrix.identity(k, 2) * 2)


def test_random_suite():
    rng = np.random.default_rng(11)
    for trial in range(1000):
        p = PRIMES[trial % 3]
        m = int(rng.integers(1, 7))
        k = RingSpec(p)
        A, conj = random_nilpotent(rng, m, p)
        E = trunc_exp(A)
        assert trunc_log(E) == A
        assert trunc_exp(trunc_log(E)) == E
        for q in (2, 3, 29):
            assert trunc_exp(A * q) == E ** q
        assert trunc_exp(-A) == E.inverse()
        if conj is not None:
            C, Ci = conj
            B = Ci @ A @ C
            assert trunc_exp(C @ B @ Ci) == C @ trunc_exp(B) @ Ci
        # characteristic polynomial (x-1)^m: E - 1 is nilpotent
        assert ((E - Matrix.identity(k, m)) ** m).is_zero()


def test_random_suite_over_truncated_ring():
    rng = np.random.default_rng(12)
    spec = RingSpec(7, 2, 2)
    for _ in range(100):
        m = int(rng.integers(1, 6))
        U = np.triu(rng.integers(0, 49, size=(2, m, m)), 1)
        A = Matrix.from_coeffs(spec, U)
        assert trunc_log(trunc_exp(A)) == A
        assert trunc_exp(A * 3) == trunc_exp(A) ** 3


def test_pairing_transfer():
    """A nilpotent lies in the Lie algebra exactly when its exponential lies in the group."""
    rng = np.random.default_rng(13)
    checked = {True: 0, False: 0}
    for p in PRIMES:
        k = RingSpec(p)
        for family, m in [("sp", 2), ("sp", 4), ("sp", 6), ("o", 3), ("o", 4), ("o", 5), ("o", 6)]:
            for sigma in enumerate_admissible(m, family):
                rep = build_representative(sigma, family)
                N = rep.N_over(k)
                for _ in range(3):
                    g = random_group_element(rep, k, rng)
                    U = np.triu(rng.integers(0, p, size=(m, m)), 1)
                    for A in (g @ N @ g.inverse(), Matrix.from_int(k, U)):
                        try:
                            in_alg = algebra_membership(A, rep.frame).is_zero()
                        except NotInAlgebra:
                            in_alg = False
                        try:
                            in_grp = group_membership(trunc_exp(A), rep.frame) == 1
                        except NotInGroup:
                            in_grp = False
                        assert in_alg == in_grp
                        checked[in_alg] += 1
    assert checked[True] > 50 and checked[False] > 50
