import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tamelift.errors import NotPIntegral, UnreachableTarget
from tamelift.rings import (
    FirstObstructedDegree,
    Matrix,
    NoRoot,
    PreparedSystem,
    RingElement,
    RingSpec,
    TruncSolution,
    digit,
    from_digit,
    lower_digits_vanish,
    nullspace_mod_p,
    rank_mod_p,
    residue,
    solve_linear,
    solve_linear_trunc,
    sqrt_unit,
)

RINGS = [RingSpec(7), RingSpec(7, 2), RingSpec(5, 1, 3), RingSpec(3, 2, 2), RingSpec.rationals(7)]


def elements(spec):
    if spec.rational:
        return st.builds(Fraction, st.integers(-50, 50), st.sampled_from([1, 2, 3, 5, 9])).map(
            lambda f: RingElement.of(spec, f)
        )
    return st.lists(st.integers(0, spec.modulus - 1), min_size=spec.n, max_size=spec.n).map(
        lambda c: RingElement.of(spec, c)
    )


def brute_mul(x, y, spec):
    out = [0] * spec.n
    for i in range(spec.n):
        for j in range(spec.n - i):
            out[i + j] += x.value[i] * y.value[j]
    return tuple(c % spec.modulus for c in out)


# --- specs and parsing -----------------------------------------------------


def test_ring_parsing_roundtrip():
    for text, kind in [("p=7", "fp"), ("p=7,a=2", "zpa"), ("p=7,a=1,n=3", "eps"), ("q", "q"), ("q,p=7", "q")]:
        spec = RingSpec.parse(text)
        assert spec.kind == kind
        assert RingSpec.from_json(spec.to_json()) == spec


def test_ring_rejects_bad_input():
    with pytest.raises(ValueError):
        RingSpec(9)
    with pytest.raises(ValueError):
        RingSpec(2)
    with pytest.raises(ValueError):
        RingSpec.parse("p=7,x=2")


def test_eps_one_and_a_one_collapse():
    assert RingSpec(7, 1, 1).is_field
    x = RingElement.of(RingSpec(7, 1, 1), 10)
    assert x == RingElement.of(RingSpec(7), 3)


# --- residues --------------------------------------------------------------


def test_residue_examples():
    assert residue(RingElement.of(RingSpec(7, 2), 36), RingSpec(7)) == 1
    assert residue(RingElement.of(RingSpec(7, 1, 2), [1, 3]), RingSpec(7)) == 1
    assert residue(RingElement.of(RingSpec.rationals(7), Fraction(5, 3)), RingSpec(7)) == 4


def test_residue_errors():
    with pytest.raises(NotPIntegral):
        residue(RingElement.of(RingSpec.rationals(7), Fraction(1, 7)), RingSpec(7))
    with pytest.raises(UnreachableTarget):
        residue(RingElement.of(RingSpec(7), 1), RingSpec(11))
    with pytest.raises(UnreachableTarget):
        residue(RingElement.of(RingSpec(7), 1), RingSpec(7, 2))


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_residue_is_a_ring_homomorphism(data):
    src = data.draw(st.sampled_from([RingSpec(7, 3), RingSpec(5, 2, 3), RingSpec(7, 1, 4)]))
    tgt = RingSpec(src.p, 1, max(1, src.n - 1))
    x, y = data.draw(elements(src)), data.draw(elements(src))
    assert residue(x * y, tgt) == residue(x, tgt) * residue(y, tgt)
    assert residue(x + y, tgt) == residue(x, tgt) + residue(y, tgt)


# --- ring axioms -----------------------------------------------------------


@pytest.mark.parametrize("spec", RINGS, ids=str)
@settings(max_examples=300, deadline=None)
@given(data=st.data())
def test_ring_axioms(spec, data):
    x, y, z = (data.draw(elements(spec)) for _ in range(3))
    assert (x * y) * z == x * (y * z)
    assert x * (y + z) == x * y + x * z
    assert x + y == y + x and x * y == y * x
    assert RingElement.of(spec, x.value) == x


@pytest.mark.parametrize("spec", [s for s in RINGS if not s.rational], ids=str)
@settings(max_examples=200, deadline=None)
@given(data=st.data())
def test_multiplication_matches_schoolbook(spec, data):
    x, y = data.draw(elements(spec)), data.draw(elements(spec))
    assert (x * y).value == brute_mul(x, y, spec)


@pytest.mark.parametrize("spec", RINGS, ids=str)
@settings(max_examples=200, deadline=None)
@given(data=st.data())
def test_unit_inverse(spec, data):
    x = data.draw(elements(spec))
    if x.is_unit():
        assert x * x.inverse() == 1


# --- square roots ----------------------------------------------------------


def test_sqrt_examples():
    assert sqrt_unit(RingElement.of(RingSpec(7), 1)) == 1
    assert sqrt_unit(RingElement.of(RingSpec(17), 2)) == 6
    assert isinstance(sqrt_unit(RingElement.of(RingSpec(7), 3)), NoRoot)


def test_sqrt_agrees_with_exhaustive_squaring():
    for p in [3, 5, 7, 11, 13, 17, 19, 23]:
        squares = {x * x % p for x in range(1, p)}
        for c in range(1, p):
            r = sqrt_unit(RingElement.of(RingSpec(p), c))
            assert isinstance(r, NoRoot) == (c not in squares)


def test_sqrt_lifts_exactly():
    for spec in [RingSpec(17, 3), RingSpec(7, 1, 4), RingSpec(5, 2, 2)]:
        for c0 in range(1, spec.p):
            c = RingElement.of(spec, [c0] + [3] * (spec.n - 1))
            r = sqrt_unit(c)
            if not isinstance(r, NoRoot):
                assert r * r == c


def test_sqrt_of_two_and_minus_one_when_p_is_1_mod_8():
    for p in [17, 41, 73, 89, 97]:
        for c in (2, p - 1):
            r = sqrt_unit(RingElement.of(RingSpec(p), c))
            assert not isinstance(r, NoRoot)


# --- matrices --------------------------------------------------------------


def test_matrix_inverse_over_tower():
    rng = np.random.default_rng(1)
    for spec in [RingSpec(7, 3), RingSpec(5, 1, 3), RingSpec(3, 2, 2)]:
        for _ in range(10):
            coeffs = rng.integers(0, spec.modulus, size=(spec.n, 4, 4))
            coeffs[0] = np.eye(4, dtype=np.int64) + np.triu(coeffs[0] % spec.p, 1)
            M = Matrix.from_coeffs(spec, coeffs)
            assert M @ M.inverse() == Matrix.identity(spec, 4)


def test_matrix_inverse_over_q():
    spec = RingSpec.rationals()
    M = Matrix.from_int(spec, [[2, 1], [1, 1]])
    assert M @ M.inverse() == Matrix.identity(spec, 2)


def test_matrix_json_roundtrip():
    for spec in RINGS:
        M = Matrix.from_int(spec, [[1, 2], [3, 4]])
        assert Matrix.from_json(spec, M.to_json()) == M


def test_digit_helpers():
    spec = RingSpec(7, 2, 2)
    X = np.array([[1, 2], [3, 4]])
    for d in range(spec.length):
        M = from_digit(spec, d, X)
        assert lower_digits_vanish(M, d)
        assert np.array_equal(digit(M, d), X)


# --- field linear algebra --------------------------------------------------


def test_solve_linear_identity_and_rank():
    spec = RingSpec(7)
    b = Matrix.from_int(spec, [[3], [1], [4]])
    out = solve_linear(Matrix.identity(spec, 3), b)
    assert out.solution == b and out.kernel == []
    N1 = Matrix.from_int(spec, [[0, 1, 0], [0, 0, 0], [0, 0, 0]])
    assert solve_linear(N1, Matrix.zeros(spec, 3, 1)).rank == 1


def test_solve_linear_certificate():
    for spec in [RingSpec(7), RingSpec.rationals()]:
        A = Matrix.zeros(spec, 2, 2)
        b = Matrix.from_int(spec, [[0], [1]])
        out = solve_linear(A, b)
        assert not out.solvable
        f = out.certificate
        assert (f @ A).is_zero() and not (f @ b).is_zero()


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_prepared_system_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    p = 3
    A = rng.integers(0, p, size=(3, 3))
    b = rng.integers(0, p, size=3)
    ps = PreparedSystem(A, p)
    x, f = ps.solve(b)
    brute = [v for v in itertools.product(range(p), repeat=3) if np.all((A @ np.array(v) - b) % p == 0)]
    if brute:
        assert x is not None and np.all((A @ x - b) % p == 0)
        assert len(brute) == p ** len(ps.kernel)
    else:
        assert x is None and np.all(f @ A % p == 0) and (f @ b) % p != 0
    assert ps.rank == rank_mod_p(A, p)
    assert len(nullspace_mod_p(A, p)) == 3 - ps.rank


# --- truncated solving -----------------------------------------------------


def test_trunc_examples():
    spec = RingSpec(7, 1, 2)
    eps = Matrix.from_coeffs(spec, [[[0]], [[1]]])
    out = solve_linear_trunc(eps, eps)
    assert isinstance(out, TruncSolution)
    assert eps @ out.solution == eps
    out = solve_linear_trunc(eps, Matrix.identity(spec, 1))
    assert isinstance(out, FirstObstructedDegree) and out.degree == 0 and out.verify()
    spec = RingSpec(7, 2)
    out = solve_linear_trunc(Matrix.from_int(spec, [[7]]), Matrix.from_int(spec, [[14]]))
    assert isinstance(out, TruncSolution)
    assert out.solution == Matrix.from_int(spec, [[2]])
    assert out.kernel and all((Matrix.from_int(spec, [[7]]) @ k).is_zero() for k in out.kernel)


def _all_vectors(spec, n):
    vals = list(itertools.product(range(spec.modulus), repeat=spec.n))
    for combo in itertools.product(vals, repeat=n):
        yield Matrix.from_coeffs(spec, np.array(combo).T.reshape(spec.n, n, 1))


@pytest.mark.parametrize("spec", [RingSpec(3, 1, 2), RingSpec(3, 2), RingSpec(5, 1, 2)], ids=str)
def test_trunc_solvability_matches_brute_force(spec):
    rng = np.random.default_rng(7)
    xs = list(_all_vectors(spec, 2))
    for _ in range(25):
        A = Matrix.from_coeffs(spec, rng.integers(0, spec.modulus, size=(spec.n, 2, 2)))
        A = A * RingElement.of(spec, [0, 1] if spec.n > 1 else spec.p) if rng.random() < 0.5 else A
        b = Matrix.from_coeffs(spec, rng.integers(0, spec.modulus, size=(spec.n, 2, 1)))
        brute = [x for x in xs if A @ x == b]
        out = solve_linear_trunc(A, b)
        if brute:
            assert isinstance(out, TruncSolution) and A @ out.solution == b
        else:
            assert isinstance(out, FirstObstructedDegree) and out.verify()
            # the reported degree is the first one at which the truncation fails
            d = out.degree
            for x in xs:
                assert not lower_digits_vanish(A @ x - b, d + 1) if d + 1 < spec.length else (A @ x != b)
            if d > 0:
                assert any(lower_digits_vanish(A @ x - b, d) for x in xs)
