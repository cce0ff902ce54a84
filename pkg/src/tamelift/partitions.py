"""Partitions, classical group families and their combinatorial invariants."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from .errors import InadmissiblePartition, UnequalTotals

FAMILIES = ("gl", "sp", "o", "so", "gsp", "go")


@dataclass(frozen=True, order=True)
class Partition:
    """A weakly decreasing tuple of positive parts."""

    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(x) for x in self.parts)
        if any(x < 1 for x in parts):
            raise ValueError("parts must be positive")
        object.__setattr__(self, "parts", tuple(sorted(parts, reverse=True)))

    @classmethod
    def parse(cls, text: str) -> "Partition":
        return cls(tuple(int(x) for x in text.replace(" ", "").split("+") if x))

    @classmethod
    def of(cls, obj) -> "Partition":
        if isinstance(obj, Partition):
            return obj
        if isinstance(obj, str):
            return cls.parse(obj)
        return cls(tuple(obj))

    @property
    def total(self) -> int:
        return sum(self.parts)

    def multiplicity(self, i: int) -> int:
        return self.parts.count(i)

    def multiplicities(self) -> dict[int, int]:
        return {d: self.parts.count(d) for d in sorted(set(self.parts), reverse=True)}

    def conjugate(self) -> "Partition":
        if not self.parts:
            return self
        return Partition(tuple(sum(1 for d in self.parts if d >= k) for k in range(1, self.parts[0] + 1)))

    def __str__(self) -> str:
        return "+".join(map(str, self.parts))

    def to_json(self) -> list[int]:
        return list(self.parts)


# ---------------------------------------------------------------------------
# Group families
# ---------------------------------------------------------------------------


def antidiag(m: int) -> np.ndarray:
    return np.fliplr(np.eye(m, dtype=np.int64))


def standard_gram(family: str, m: int) -> np.ndarray | None:
    """Antidiagonal standard forms: ``I'_m`` (symmetric) or ``[[0, I'], [-I', 0]]``."""
    kind = base_family(family)
    if kind == "gl":
        return None
    if kind == "o":
        return antidiag(m)
    if m % 2:
        raise ValueError("symplectic forms need even size")
    n = m // 2
    J = np.zeros((m, m), dtype=np.int64)
    J[:n, n:] = antidiag(n)
    J[n:, :n] = -antidiag(n)
    return J


def block_gram(m: int) -> np.ndarray:
    """The alternating form ``[[0, I], [-I, 0]]``."""
    n = m // 2
    J = np.zeros((m, m), dtype=np.int64)
    J[:n, n:] = np.eye(n, dtype=np.int64)
    J[n:, :n] = -np.eye(n, dtype=np.int64)
    return J


def base_family(family: str) -> str:
    """Collapse a family to its Lie type: ``gl``, ``sp`` or ``o``."""
    family = family.lower()
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    return {"gl": "gl", "sp": "sp", "gsp": "sp", "o": "o", "so": "o", "go": "o"}[family]


def family_sign(family: str) -> int | None:
    kind = base_family(family)
    return None if kind == "gl" else (1 if kind == "o" else -1)


def _int_det(M: np.ndarray) -> Fraction:
    A = [[Fraction(int(x)) for x in row] for row in M]
    n = len(A)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if A[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            A[c], A[piv] = A[piv], A[c]
            det = -det
        det *= A[c][c]
        for r in range(c + 1, n):
            f = A[r][c] / A[c][c]
            A[r] = [x - f * y for x, y in zip(A[r], A[c])]
    return det


@dataclass(frozen=True)
class GroupSpec:
    """A classical group family with its (integer) Gram matrix."""

    family: str
    m: int
    gram: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        fam = self.family.lower()
        object.__setattr__(self, "family", fam)
        kind = base_family(fam)
        if kind == "gl":
            object.__setattr__(self, "gram", None)
            return
        if kind == "sp" and self.m % 2:
            raise ValueError("Sp/GSp need even m")
        J = standard_gram(fam, self.m) if self.gram is None else np.asarray(self.gram, dtype=np.int64)
        if J.shape != (self.m, self.m):
            raise ValueError("gram has the wrong size")
        if not np.array_equal(J.T, self.sign * J):
            raise ValueError("gram is not eps-symmetric")
        if abs(_int_det(J)) != 1:
            raise ValueError("gram must have unit determinant")
        J = J.copy()
        J.setflags(write=False)
        object.__setattr__(self, "gram", J)

    @property
    def kind(self) -> str:
        return base_family(self.family)

    @property
    def sign(self) -> int | None:
        return family_sign(self.family)

    @property
    def similitude(self) -> bool:
        return self.family in ("gsp", "go")

    @property
    def special(self) -> bool:
        return self.family == "so"

    def with_gram(self, gram) -> "GroupSpec":
        return GroupSpec(self.family, self.m, gram)

    def lie_dim(self, derived: bool = False) -> int:
        m = self.m
        if self.kind == "gl":
            return m * m
        base = m * (m + 1) // 2 if self.kind == "sp" else m * (m - 1) // 2
        return base + (1 if self.similitude and not derived else 0)

    def to_json(self) -> dict:
        out = {"family": self.family, "m": self.m}
        if self.gram is not None:
            out["gram"] = self.gram.tolist()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "GroupSpec":
        return cls(obj["family"], int(obj["m"]), obj.get("gram"))


# ---------------------------------------------------------------------------
# Admissibility and enumeration
# ---------------------------------------------------------------------------


def is_admissible(sigma, family: str, m: int | None = None) -> bool:
    sigma = Partition.of(sigma)
    if m is not None and sigma.total != m:
        return False
    kind = base_family(family)
    if kind == "gl":
        return True
    bad_parity = 0 if kind == "o" else 1
    return all(n % 2 == 0 for d, n in sigma.multiplicities().items() if d % 2 == bad_parity)


def all_partitions(m: int, largest: int | None = None) -> Iterator[Partition]:
    """All partitions of ``m`` in reverse-lexicographic order."""

    def rec(rest, cap):
        if rest == 0:
            yield ()
            return
        for first in range(min(rest, cap), 0, -1):
            for tail in rec(rest - first, first):
                yield (first,) + tail

    for parts in rec(m, m if largest is None else largest):
        yield Partition(parts)


def enumerate_admissible(m: int, family: str) -> list[Partition]:
    if m < 1:
        raise ValueError("m must be >= 1")
    return [s for s in all_partitions(m) if is_admissible(s, family)]


def _check(sigma, family) -> Partition:
    sigma = Partition.of(sigma)
    if not is_admissible(sigma, family):
        raise InadmissiblePartition(f"{sigma} is not admissible for {family}", partition=str(sigma), family=family)
    return sigma


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------


def weight_dim(sigma, s: int) -> int:
    """Dimension of the weight-``s`` space, counted block by block."""
    sigma = Partition.of(sigma)
    return sum(1 for d in sigma.parts if d - 1 >= abs(s) and (d - 1 - s) % 2 == 0)


def lowest_weight_dim(sigma, s: int) -> int:
    """Number of chains whose lowest weight is ``s`` (zero for ``s > 0``)."""
    if s > 0:
        return 0
    return Partition.of(sigma).multiplicity(1 - s)


def symmetric_weights(sigma, family: str) -> list[int]:
    """Weights ``s <= 0`` with ``L(s) != 0`` whose pairing ``psi_s`` is symmetric."""
    sigma = Partition.of(sigma)
    eps = family_sign(family)
    if eps is None:
        return []
    out = []
    for d in sorted(set(sigma.parts), reverse=True):
        s = 1 - d
        if (-1) ** (s % 2) == eps:
            out.append(s)
    return out


def component_order(sigma, family: str) -> tuple[int, int]:
    """``(t, order)`` for the component group of the nilpotent centralizer."""
    sigma = _check(sigma, family)
    if base_family(family) == "gl":
        return 0, 1
    t = len(symmetric_weights(sigma, family))
    if family.lower() == "so":
        return t, 2 ** (t - 1) if t else 1
    return t, 2**t


def dominance_leq(sigma, tau) -> bool:
    sigma, tau = Partition.of(sigma), Partition.of(tau)
    if sigma.total != tau.total:
        raise UnequalTotals(f"{sigma} and {tau} have different totals", left=sigma.total, right=tau.total)
    a = b = 0
    for i in range(max(len(sigma.parts), len(tau.parts))):
        a += sigma.parts[i] if i < len(sigma.parts) else 0
        b += tau.parts[i] if i < len(tau.parts) else 0
        if a > b:
            return False
    return True


# The Richardson partitions of the four standard parabolics of GSp4 (as a set).
GSP4_RICHARDSON = (Partition((1, 1, 1, 1)), Partition((4,)), Partition((2, 2)))


def non_richardson(m: int, family: str, richardson) -> list[Partition]:
    """Admissible partitions missing from a given Richardson set."""
    rich = {Partition.of(r) for r in richardson}
    return [s for s in enumerate_admissible(m, family) if s not in rich]


# ---------------------------------------------------------------------------
# Closed-form comparison
# ---------------------------------------------------------------------------


def closed_form_m(sigma, s: int) -> int:
    """The count ``#{j : d_j - 1 >= |s|}`` (no parity condition)."""
    return sum(1 for d in Partition.of(sigma).parts if d - 1 >= abs(s))


def closed_form_l(sigma, s: int) -> int:
    return closed_form_m(sigma, s + 1) - closed_form_m(sigma, s)


def formula_report(sigma) -> dict:
    """Compare the closed-form weight counts with direct block counts."""
    sigma = Partition.of(sigma)
    top = sigma.parts[0]
    rows = []
    for s in range(-top, top + 1):
        direct_m, closed_m = weight_dim(sigma, s), closed_form_m(sigma, s)
        row = {"s": s, "dim_M_direct": direct_m, "m_s_closed_form": closed_m}
        if s <= 0:
            row["dim_L_direct"] = lowest_weight_dim(sigma, s)
            row["l_s_closed_form"] = closed_form_l(sigma, s)
        row["agrees"] = direct_m == closed_m and row.get("dim_L_direct") == row.get("l_s_closed_form")
        rows.append(row)
    return {
        "partition": str(sigma),
        "rows": rows,
        "discrepancies": [r for r in rows if not r["agrees"]],
    }
