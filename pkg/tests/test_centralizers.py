import numpy as np
import pytest

from tamelift.centralizers import (
    algebra_membership,
    centralizer,
    centralizer_algebra,
    component_sections,
    group_membership,
    scaling_element,
)
from tamelift.errors import NotInAlgebra, NotInGroup
from tamelift.orbits import build_representative
from tamelift.partitions import GroupSpec, block_gram, component_order, enumerate_admissible
from tamelift.rings import Matrix, RingElement, RingSpec

Q = RingSpec.rationals()
FAMILIES = ["gl", "sp", "o", "so", "gsp", "go"]
CASES = [(f, s) for f in FAMILIES for m in range(1, 9) if not (f in ("sp", "gsp") and m % 2) for s in enumerate_admissible(m, f)]


def classical_dim(sigma, family):
    """Centralizer dimension from the conjugate partition."""
    sq = sum(c * c for c in sigma.conjugate().parts)
    odd = sum(1 for d in sigma.parts if d % 2)
    base = {"gl": sq, "sp": (sq + odd) // 2, "gsp": (sq + odd) // 2 + 1, "o": (sq - odd) // 2, "so": (sq - odd) // 2, "go": (sq - odd) // 2 + 1}
    return base[family]


def test_membership_examples():
    J = block_gram(4)
    gsp = GroupSpec("gsp", 4, J)
    k = RingSpec(7)
    assert algebra_membership(Matrix.identity(k, 4), gsp) == 2
    E11 = np.zeros((4, 4), dtype=np.int64)
    E11[0, 0] = 1
    with pytest.raises(NotInAlgebra):
        algebra_membership(Matrix.from_int(k, E11), GroupSpec("sp", 4))
    tau = np.eye(4, dtype=np.int64)
    tau[0, 2] = 1
    phi = np.eye(4, dtype=np.int64)
    phi[0, 1] = -1
    phi[3, 2] = 1
    assert group_membership(Matrix.from_int(k, tau), gsp) == 1
    assert group_membership(Matrix.from_int(k, phi), gsp) == 1
    assert group_membership(Matrix.identity(k, 4), gsp) == 1
    with pytest.raises(NotInGroup):
        group_membership(Matrix.from_int(k, np.diag([2, 1, 1, 1])), GroupSpec("sp", 4))


@pytest.mark.parametrize("family,sigma", CASES, ids=str)
def test_centralizer_structure(family, sigma):
    rep = build_representative(sigma, family)
    _, dq = centralizer_algebra(rep, Q)
    for p in (7, 17):
        _, dp = centralizer_algebra(rep, RingSpec(p))
        assert dp == dq
    assert dq == classical_dim(sigma, family)
    data = centralizer(rep, RingSpec(7, 3))
    assert data.negative_weight_rank == 0
    assert data.zero_weight_rank == data.dim_C
    assert data.dim_z == data.dim_C + data.dim_U
    assert (data.t, data.order) == component_order(sigma, family)
    assert len(data.sections) == data.order
    invariants = [inv for _, inv in data.sections]
    assert len(set(invariants)) == len(invariants)
    spec = RingSpec(7, 3)
    N = rep.N_over(spec)
    for g, _ in data.sections:
        assert g @ N == N @ g
        group_membership(g, rep.frame)


def test_section_examples():
    k = RingSpec(7, 3)
    secs = component_sections(build_representative("2+1+1", "sp"), k)
    mats = [np.asarray(g.data[0], dtype=np.int64) % 343 for g, _ in secs]
    assert [inv for _, inv in secs] == [(1,), (-1,)]
    assert np.array_equal(mats[0], np.eye(4)) and np.array_equal(mats[1], np.diag([342, 342, 1, 1]))
    assert len(component_sections(build_representative("1+1+1+1", "sp"), k)) == 1
    assert len(component_sections(build_representative("3", "o"), k)) == 2
    assert len(component_sections(build_representative("3", "so"), k)) == 1
    secs = component_sections(build_representative("3", "o"), k)
    assert secs[1][0] == Matrix.identity(k, 3) * -1


def test_centralizer_dimension_examples():
    assert centralizer_algebra(build_representative("2+1+1", "sp"))[1] == 6
    assert centralizer_algebra(build_representative("1+1+1+1", "sp"))[1] == 10
    assert centralizer_algebra(build_representative("2+1", "gl"))[1] == 5


def test_scaling_element():
    k = RingSpec(7, 3)
    alpha = RingElement.of(k, 3)
    rep = build_representative("2+1+1", "sp")
    S = scaling_element(rep, alpha)
    ainv = alpha.inverse()
    # matrix order is (N v, v, v1, v1'), so weights read (1, -1, 0, 0)
    assert S == Matrix.diag([alpha, ainv, RingElement.of(k, 1), RingElement.of(k, 1)])
    assert scaling_element(rep, RingElement.of(k, 1)) == Matrix.identity(k, 4)
    rng = np.random.default_rng(0)
    for _ in range(100):
        family, sigma = CASES[int(rng.integers(len(CASES)))]
        rep = build_representative(sigma, family)
        S = scaling_element(rep, alpha)
        N = rep.N_over(k)
        assert S @ N @ S.inverse() == N * (alpha * alpha)
