import numpy as np
import pytest

from tamelift.deform import (
    Exhausted,
    FixedSimilitude,
    InvalidRep,
    Lifter,
    MinimallyRamified,
    ObstructionCertificate,
    ParabolicRamified,
    TqRep,
    Unrestricted,
    check_condition,
    conjugate_nilpotent,
    example_residual,
    flag_admits,
    lift_chain,
    lift_step,
    richardson_partition,
    search_unliftable,
    standard_flag,
    standard_flag_types,
    tangent_report,
    validate,
)
from tamelift.centralizers import component_sections, scaling_element
from tamelift.explog import trunc_exp
from tamelift.orbits import build_representative
from tamelift.partitions import GroupSpec, Partition
from tamelift.rings import FirstObstructedDegree, Matrix, RingElement, RingSpec, from_digit

from _oracles import certificate_holds, random_skew, scaled_residuals

P = 7
EPS = [RingSpec(P, 1, n) for n in range(2, 6)]
ZP = [RingSpec(P, 2), RingSpec(P, 3)]


@pytest.fixture(scope="module")
def rbar():
    return example_residual()


@pytest.fixture(scope="module")
def orbit():
    return build_representative("2+1+1", "gsp")


def gl3_rep(ring, q, N):
    d = np.diag([1, pow(q, -1, ring.modulus), pow(q, -2, ring.modulus)])
    return TqRep(ring, GroupSpec("gl", 3), q, Matrix.from_int(ring, d), N)


# --- representations --------------------------------------------------------


def test_validate_examples(rbar):
    assert validate(rbar) == []
    assert rbar.similitude() == 1
    bad = TqRep(rbar.ring, rbar.group, 7, rbar.phi, rbar.N)
    assert any(v["identity"] == "q prime to p" for v in validate(bad))
    swapped = TqRep(rbar.ring, rbar.group, rbar.q, rbar.N + Matrix.identity(rbar.ring, 4), rbar.phi)
    assert validate(swapped)
    with pytest.raises(InvalidRep):
        tangent_report(swapped, Unrestricted())


def test_json_roundtrip(rbar):
    obj = rbar.to_json()
    again = TqRep.from_json(obj)
    assert again.to_json() == obj
    bare = {k: v for k, v in obj.items() if k not in ("family", "m")}
    assert TqRep.from_json(bare).group.family == "gsp"


# --- pure nilpotents --------------------------------------------------------


def test_conjugate_nilpotent_identity():
    rep = build_representative("2+1+1", "sp")
    R = RingSpec(P, 1, 3)
    g = conjugate_nilpotent(rep.N_over(R), rep)
    assert g == Matrix.identity(R, 4)


def test_conjugate_nilpotent_random_conjugates():
    rng = np.random.default_rng(2)
    for family, sigma in [("sp", "2+1+1"), ("sp", "2+2"), ("o", "3+1+1"), ("gl", "2+1")]:
        rep = build_representative(sigma, family)
        for R in (RingSpec(P, 1, 3), RingSpec(P, 3)):
            if rep.gram is None:
                X = rng.integers(0, P, size=(rep.m, rep.m))
            else:
                X = random_skew(rep.gram, P, rng)
            pi = from_digit(R, 1, np.ones((1, 1), dtype=np.int64)).entry(0, 0)
            h = trunc_exp(Matrix.from_int(R, X) * pi)
            N = h @ rep.N_over(R) @ h.inverse()
            g = conjugate_nilpotent(N, rep)
            assert not isinstance(g, FirstObstructedDegree)
            assert g @ rep.N_over(R) == N @ g


def test_conjugate_nilpotent_impure():
    R = RingSpec(P, 1, 2)
    N = Matrix.from_coeffs(R, [[[0, 1, 0], [0, 0, 0], [0, 0, 0]], [[0, 0, 0], [0, 0, 1], [0, 0, 0]]])
    out = conjugate_nilpotent(N, build_representative("2+1", "gl"))
    assert isinstance(out, FirstObstructedDegree)
    assert out.degree == 1 and out.verify()


def test_check_condition_examples(rbar, orbit):
    mr = MinimallyRamified(orbit)
    assert check_condition(rbar, mr)
    assert check_condition(rbar, ParabolicRamified((2,)))
    assert check_condition(rbar, FixedSimilitude(1))
    assert not check_condition(rbar, FixedSimilitude(2))
    R = RingSpec(P, 1, 2)
    N = Matrix.from_coeffs(R, [[[0, 1, 0], [0, 0, 0], [0, 0, 0]], [[0, 0, 0], [0, 0, 1], [0, 0, 0]]])
    rep = gl3_rep(R, 2, N)
    assert validate(rep) == []
    assert check_condition(rep, Unrestricted())
    assert not check_condition(rep, MinimallyRamified(build_representative("2+1", "gl")))


# --- flags --------------------------------------------------------------------


def test_flags_of_gsp4(rbar):
    types = standard_flag_types(rbar.group)
    assert sorted(types) == [(1,), (1, 2), (2,)]
    rich = {dims: richardson_partition(rbar.group, standard_flag(rbar.group.gram, dims)) for dims in types}
    assert rich == {(1,): Partition((2, 2)), (2,): Partition((2, 2)), (1, 2): Partition((4,))}
    assert all(flag_admits(rbar, standard_flag(rbar.group.gram, d)) for d in types)


# --- lifting ------------------------------------------------------------------


def test_minimally_ramified_chain_is_valid(rbar, orbit):
    cond = MinimallyRamified(orbit)
    rng = np.random.default_rng(4)
    for rings in (EPS, ZP):
        chain = lift_chain(rbar, cond, rings, rng)
        assert isinstance(chain, list) and len(chain) == len(rings) + 1
        for rep in chain:
            assert validate(rep) == []
            assert check_condition(rep, cond)
            assert rep.residue().phi == rbar.phi and rep.residue().N == rbar.N


def test_exp_relation_consistency(rbar, orbit):
    rng = np.random.default_rng(6)
    cond = MinimallyRamified(orbit)
    for rep in lift_chain(rbar, cond, EPS, rng) + lift_chain(rbar, cond, ZP, rng):
        T = rep.T
        assert rep.phi @ T @ rep.phi.inverse() == T ** rep.q


def test_torsor_property(rbar, orbit):
    cond = MinimallyRamified(orbit)
    lifter = Lifter(rbar, cond)
    rng = np.random.default_rng(8)
    kernels = set()
    R0, R1 = RingSpec(P, 1, 2), RingSpec(P, 1, 3)
    for _ in range(10):
        base = lift_step(lifter.with_witness(rbar), cond, R0, rng, lifter)
        st = lifter.state_of(base, R1)
        kernels.add(len(lifter.system.prepared.kernel))
        for _ in range(3):
            # each random lift is the particular solution plus a random kernel vector
            rep = lifter.to_rep(lifter.step(st, 2, rng))
            assert validate(rep) == [] and check_condition(rep, cond)
            assert rep.residue(R0).phi == base.phi
    assert len(kernels) == 1


def test_scaling_element_reps_are_valid():
    for family, m in [("sp", 4), ("sp", 6), ("o", 5)]:
        for orbit in {id(o): o for _, o, _ in scaled_residuals(family, m, P)}.values():
            for a in (1, 2, 3):
                R = RingSpec(P, a)
                S = scaling_element(orbit, RingElement.of(R, 3))
                for s, _ in component_sections(orbit, R):
                    rep = TqRep(R, orbit.frame, 9, S @ s, orbit.N_over(R))
                    assert validate(rep) == []
                    assert check_condition(rep, MinimallyRamified(orbit))


def test_parabolic_first_step_is_standard(rbar):
    for dims in [(1,), (2,), (1, 2)]:
        cond = ParabolicRamified(dims)
        out = lift_step(rbar, cond, RingSpec(P, 1, 2))
        assert isinstance(out, TqRep)
        assert validate(out) == [] and check_condition(out, cond)


# --- tangent spaces and searches -------------------------------------------


def test_tangent_reports(rbar, orbit):
    free = tangent_report(rbar, MinimallyRamified(orbit))
    fixed = tangent_report(rbar, MinimallyRamified(orbit, nu=1))
    assert (free.dim_lifting, free.dim_g) == (11, 11)
    assert fixed.dim_lifting == 10
    assert fixed.dim_deformation == fixed.dim_h0_ad0
    unr = tangent_report(rbar, Unrestricted())
    assert unr.dim_lifting >= free.dim_lifting


def test_searches(rbar, orbit):
    out = search_unliftable(rbar, MinimallyRamified(orbit), depth=4)
    assert isinstance(out, Exhausted) and out.classes_tried > 0
    k = rbar.ring
    # with q != 1 mod p the relation forces N = 0 on every lift, so nothing is obstructed
    unram = TqRep(k, rbar.group, 2, Matrix.identity(k, 4), Matrix.zeros(k, 4))
    assert isinstance(search_unliftable(unram, Unrestricted(), depth=3), Exhausted)
    # with q = 1 mod p the relation is commutation, and [A, B] != 0 obstructs at eps^3
    unram = TqRep(k, rbar.group, rbar.q, Matrix.identity(k, 4), Matrix.zeros(k, 4))
    cert = search_unliftable(unram, Unrestricted(), depth=3)
    assert isinstance(cert, ObstructionCertificate) and cert.degree == 2 and certificate_holds(cert.to_json())
    for dims in [(1,), (2,), (1, 2)]:
        cert = search_unliftable(rbar, ParabolicRamified(dims), depth=3)
        assert isinstance(cert, ObstructionCertificate)
        assert cert.degree == 2 and cert.ring == RingSpec(P, 1, 3)
        assert cert.verify() and certificate_holds(cert.to_json())
