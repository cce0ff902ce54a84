import itertools

import pytest

from tamelift.errors import InadmissiblePartition, UnequalTotals
from tamelift.partitions import (
    GSP4_RICHARDSON,
    GroupSpec,
    Partition,
    all_partitions,
    component_order,
    dominance_leq,
    enumerate_admissible,
    formula_report,
    is_admissible,
    lowest_weight_dim,
    non_richardson,
    weight_dim,
)


def brute_partitions(m):
    """All partitions of m via compositions, deduplicated."""
    out = set()
    for cuts in itertools.product([0, 1], repeat=m - 1):
        parts, cur = [], 1
        for c in cuts:
            if c:
                parts.append(cur)
                cur = 1
            else:
                cur += 1
        parts.append(cur)
        out.add(tuple(sorted(parts, reverse=True)))
    return out


def brute_admissible(parts, family):
    if family == "gl":
        return True
    bad = 0 if family == "o" else 1
    return all(parts.count(d) % 2 == 0 for d in set(parts) if d % 2 == bad)


def test_admissibility_examples():
    assert is_admissible("2+1+1", "sp")
    assert not is_admissible("2+1+1", "o")
    assert is_admissible("3+3+1", "o")


def test_enumeration_examples():
    assert [str(s) for s in enumerate_admissible(4, "sp")] == ["4", "2+2", "2+1+1", "1+1+1+1"]
    assert [str(s) for s in enumerate_admissible(3, "o")] == ["3", "1+1+1"]
    assert [str(s) for s in enumerate_admissible(2, "gl")] == ["2", "1+1"]


@pytest.mark.parametrize("family", ["sp", "o", "gl"])
def test_enumeration_matches_brute_force(family):
    for m in range(1, 13):
        if family == "sp" and m % 2:
            continue
        expected = {p for p in brute_partitions(m) if brute_admissible(p, family)}
        got = [s.parts for s in enumerate_admissible(m, family)]
        assert len(got) == len(set(got)) and set(got) == expected
        assert got == sorted(got, reverse=True)


def test_weight_examples():
    assert weight_dim("2+2", 1) == weight_dim("2+2", -1) == 2
    assert weight_dim("2+2", 0) == 0
    assert weight_dim("2+1+1", 0) == 2
    assert weight_dim("4", 4) == weight_dim("4", -5) == 0
    assert lowest_weight_dim("2+1+1", -1) == 1 and lowest_weight_dim("2+1+1", 0) == 2
    assert lowest_weight_dim("4", -3) == 1
    assert all(lowest_weight_dim("4", s) == 0 for s in range(-6, 4) if s != -3)
    assert lowest_weight_dim("4", 2) == 0


def test_weight_dims_sum_to_m():
    for m in range(1, 11):
        for sigma in all_partitions(m):
            top = sigma.parts[0]
            total = weight_dim(sigma, 0) + 2 * sum(weight_dim(sigma, s) for s in range(-top, 0))
            assert total == m


def test_component_order_examples():
    assert component_order("2+1+1", "sp") == (1, 2)
    assert component_order("1+1+1+1", "sp") == (0, 1)
    assert component_order("3", "so") == (1, 1)
    with pytest.raises(InadmissiblePartition):
        component_order("3+1", "sp")


def test_component_order_ratio():
    for m in range(1, 9):
        for sigma in enumerate_admissible(m, "o"):
            t, o = component_order(sigma, "o")
            _, so = component_order(sigma, "so")
            if t:
                assert o // so == 2
            else:
                assert o == so == 1


def test_dominance_examples():
    assert dominance_leq("2+1+1", "2+2")
    assert dominance_leq("3+1", "3+1")
    assert not dominance_leq("2+1+1", "1+1+1+1")
    with pytest.raises(UnequalTotals):
        dominance_leq("2", "1")


def test_dominance_is_a_partial_order():
    for m in range(1, 9):
        parts = list(all_partitions(m))
        for a in parts:
            assert dominance_leq(a, a)
            for b in parts:
                if a != b and dominance_leq(a, b):
                    assert not dominance_leq(b, a)
                    for c in parts:
                        if dominance_leq(b, c):
                            assert dominance_leq(a, c)


def test_gsp4_non_richardson():
    assert non_richardson(4, "sp", GSP4_RICHARDSON) == [Partition((2, 1, 1))]


def test_conjugate_partition():
    assert Partition.parse("3+1").conjugate() == Partition((2, 1, 1))
    for sigma in all_partitions(7):
        assert sigma.conjugate().conjugate() == sigma


def test_formula_report_flags_discrepancies():
    rep = formula_report("2+2")
    bad = {r["s"] for r in rep["discrepancies"]}
    assert 0 in bad
    row0 = next(r for r in rep["rows"] if r["s"] == 0)
    assert row0["dim_M_direct"] == 0 and row0["m_s_closed_form"] == 2
    rep = formula_report("2")
    row = next(r for r in rep["rows"] if r["s"] == -1)
    assert row["dim_L_direct"] == 1 and row["l_s_closed_form"] == 0
    assert rep["discrepancies"]


def test_group_spec_validation():
    assert GroupSpec("gsp", 4).lie_dim() == 11
    assert GroupSpec("sp", 4).lie_dim() == 10
    assert GroupSpec("o", 3).lie_dim() == 3
    with pytest.raises(ValueError):
        GroupSpec("sp", 3)
    with pytest.raises(ValueError):
        GroupSpec("sp", 2, [[0, 2], [-2, 0]])
    with pytest.raises(ValueError):
        GroupSpec("o", 2, [[0, 1], [-1, 0]])
