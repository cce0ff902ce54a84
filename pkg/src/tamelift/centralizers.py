"""Lie algebra and group membership, nilpotent centralizers and component sections."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import linops
from .errors import NotInAlgebra, NotInGroup
from .orbits import OrbitRep
from .partitions import GroupSpec, component_order
from .rings import Matrix, RingElement, RingSpec, nullspace_mod_p, nullspace_q, rref_mod_p


def _unit_entry(J: np.ndarray) -> tuple[int, int]:
    i, j = np.argwhere(np.abs(J) == 1)[0]
    return int(i), int(j)


def _scalar_multiple(S: Matrix, J: Matrix, ij: tuple[int, int]) -> RingElement:
    return S.entry(*ij) / J.entry(*ij)


def _first_mismatch(A: Matrix, B: Matrix) -> list[int]:
    diff = np.argwhere(np.any(A.data != B.data, axis=0))
    return [int(x) for x in diff[0]]


def algebra_membership(X: Matrix, group: GroupSpec) -> RingElement | None:
    """Scalar ``lam`` with ``X^T J + J X = lam J`` (``None`` for GL)."""
    if group.gram is None:
        return None
    J = Matrix.from_int(X.spec, group.gram)
    S = X.T @ J + J @ X
    lam = _scalar_multiple(S, J, _unit_entry(group.gram))
    if S != J * lam:
        raise NotInAlgebra("X^T J + J X is not a multiple of J", entry=_first_mismatch(S, J * lam))
    if not group.similitude and not lam.is_zero():
        raise NotInAlgebra("nonzero multiplier outside a similitude family", multiplier=lam.to_json())
    return lam


def det_mod_p(M: np.ndarray, p: int) -> int:
    A = np.array(M, dtype=np.int64) % p
    n = A.shape[0]
    det = 1
    for c in range(n):
        nz = np.flatnonzero(A[c:, c])
        if nz.size == 0:
            return 0
        r = c + int(nz[0])
        if r != c:
            A[[c, r]] = A[[r, c]]
            det = -det
        det = det * int(A[c, c]) % p
        inv = pow(int(A[c, c]), -1, p)
        for r2 in range(c + 1, n):
            if A[r2, c]:
                A[r2] = (A[r2] - A[r2, c] * inv * A[c]) % p
    return det % p


def group_membership(g: Matrix, group: GroupSpec) -> RingElement | None:
    """Similitude ``mu`` with ``g^T J g = mu J`` (``None`` for GL)."""
    spec = g.spec
    if spec.rational:
        try:
            g.inverse()
        except Exception as exc:
            raise NotInGroup("matrix is singular") from exc
    else:
        if det_mod_p(np.asarray(g.data[0] % spec.p, dtype=np.int64), spec.p) == 0:
            raise NotInGroup("matrix is singular modulo p")
    if group.gram is None:
        return None
    J = Matrix.from_int(spec, group.gram)
    S = g.T @ J @ g
    mu = _scalar_multiple(S, J, _unit_entry(group.gram))
    if not mu.is_unit() or S != J * mu:
        raise NotInGroup("g^T J g is not a unit multiple of J", entry=_first_mismatch(S, J * mu) if mu.is_unit() else None)
    if not group.similitude and mu != 1:
        raise NotInGroup("similitude must be 1", multiplier=mu.to_json())
    if group.special and not spec.rational and det_mod_p(np.asarray(g.data[0], dtype=np.int64), spec.p) != 1:
        raise NotInGroup("determinant is not 1")
    return mu


# ---------------------------------------------------------------------------
# Lie centralizers
# ---------------------------------------------------------------------------


def centralizer_system(N: np.ndarray, group: GroupSpec) -> np.ndarray:
    """Integer matrix whose kernel is ``{(X, lam) : [X, N] = 0, X in g}``."""
    m = N.shape[0]
    comm = linops.commutator(N)
    if group.gram is None:
        return comm
    J = np.asarray(group.gram, dtype=np.int64)
    skew = linops.skew_form(J)
    if group.similitude:
        lam_col = -linops.vec(J).reshape(-1, 1)
        top = np.hstack([comm, np.zeros((m * m, 1), dtype=np.int64)])
        return np.vstack([top, np.hstack([skew, lam_col])])
    return np.vstack([comm, skew])


def centralizer_algebra(rep: OrbitRep, spec: RingSpec | None = None) -> tuple[list[Matrix], int]:
    """Basis and dimension of the Lie centralizer of ``N_sigma`` over Q or F_p."""
    spec = spec or RingSpec.rationals()
    if not spec.is_field:
        raise ValueError("centralizer_algebra needs a field")
    m = rep.m
    A = centralizer_system(rep.N, rep.frame)
    if spec.rational:
        rows = nullspace_q(A)
        basis = [Matrix.from_int(spec, np.array(v[: m * m], dtype=object).reshape(m, m)) for v in rows]
    else:
        rows = nullspace_mod_p(A, spec.p)
        basis = [Matrix.from_int(spec, v[: m * m].reshape(m, m)) for v in rows]
    return basis, len(basis)


def weight_profile(rep: OrbitRep, basis: list[Matrix]) -> dict[str, int]:
    """Ranks of the negative and zero weight parts of a list of matrices."""
    w = np.array(rep.weights)
    shift = w[:, None] - w[None, :]
    if not basis:
        return {"negative": 0, "zero": 0}
    spec = basis[0].spec
    vecs_neg, vecs_zero = [], []
    for X in basis:
        data = X.data[0]
        vecs_neg.append(np.where(shift < 0, data, 0).reshape(-1))
        vecs_zero.append(np.where(shift == 0, data, 0).reshape(-1))

    def rank(vs):
        M = np.array(vs, dtype=object)
        if spec.rational:
            from .rings import rank_q

            return rank_q(M)
        return len(rref_mod_p(M.astype(np.int64), spec.p)[1])

    return {"negative": rank(vecs_neg), "zero": rank(vecs_zero)}


def factor_list(rep: OrbitRep) -> list[tuple[int, str, int]]:
    """``(s, family, dim L(s))`` for each lowest weight ``s`` with ``L(s) != 0``."""
    out = []
    eps = rep.group.sign
    for s, positions in rep.lowest.items():
        l = len(positions)
        if eps is None:
            fam = "GL"
        else:
            fam = "O" if (-1) ** (s % 2) == eps else "Sp"
        out.append((s, fam, l))
    return out


def factor_dim(fam: str, l: int) -> int:
    return {"O": l * (l - 1) // 2, "Sp": l * (l + 1) // 2, "GL": l * l}[fam]


# ---------------------------------------------------------------------------
# Scaling element and sections
# ---------------------------------------------------------------------------


def scaling_element(rep: OrbitRep, alpha: RingElement) -> Matrix:
    """``diag(alpha^s)`` over the representative's basis."""
    return Matrix.diag([alpha ** s for s in rep.weights])


def component_sections(rep: OrbitRep, ring: RingSpec) -> list[tuple[Matrix, tuple[int, ...]]]:
    """One centralizer element per component, with its determinant invariants.

    For each lowest weight with symmetric pairing, the section acts by the
    chosen sign on the whole chain of the first block of that size, giving a
    reflection of ``L(s)``.
    """
    m = rep.m
    if rep.gram is None:
        return [(Matrix.identity(ring, m), ())]
    eps = rep.group.sign
    sym_blocks = []
    seen = set()
    for blk in rep.blocks:
        s = 1 - blk.size
        if not blk.paired and (-1) ** (s % 2) == eps and blk.size not in seen:
            seen.add(blk.size)
            sym_blocks.append(blk)
    out = []
    for signs in itertools.product((1, -1), repeat=len(sym_blocks)):
        diag = np.ones(m, dtype=np.int64)
        det = 1
        for sgn, blk in zip(signs, sym_blocks):
            if sgn == -1:
                diag[blk.offset:blk.offset + blk.dim] = -1
                det *= (-1) ** blk.dim
        if rep.group.special and det != 1:
            continue
        out.append((Matrix.from_int(ring, np.diag(diag)), tuple(signs)))
    return out


@dataclass(frozen=True)
class CentralizerData:
    dim_z: int
    factors: list[tuple[int, str, int]]
    dim_C: int
    dim_U: int
    t: int
    order: int
    sections: list[tuple[Matrix, tuple[int, ...]]]
    negative_weight_rank: int
    zero_weight_rank: int

    def to_json(self) -> dict:
        return {
            "dim_z": self.dim_z,
            "factors": [{"s": s, "family": f, "dim_L": l} for s, f, l in self.factors],
            "dim_C": self.dim_C,
            "dim_U": self.dim_U,
            "t": self.t,
            "order": self.order,
            "negative_weight_rank": self.negative_weight_rank,
            "zero_weight_rank": self.zero_weight_rank,
            "sections": [{"g": g.to_json(), "invariants": list(inv)} for g, inv in self.sections],
        }


def centralizer(rep: OrbitRep, ring: RingSpec) -> CentralizerData:
    """Full centralizer report; Lie data over the residue field, sections over ``ring``."""
    field = ring if ring.is_field else ring.residue_field
    basis, dim_z = centralizer_algebra(rep, field)
    prof = weight_profile(rep, basis)
    factors = factor_list(rep)
    dim_C = sum(factor_dim(f, l) for _, f, l in factors) + (1 if rep.group.similitude else 0)
    t, order = component_order(rep.sigma, rep.group.family)
    sections = component_sections(rep, ring)
    return CentralizerData(dim_z, factors, dim_C, dim_z - dim_C, t, order, sections, prof["negative"], prof["zero"])
