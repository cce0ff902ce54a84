"""Integral nilpotent orbit representatives, Jordan types and Gram normalization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InadmissiblePartition, MissingSquareRoot, NotConjugate, NotNilpotent
from .partitions import GroupSpec, Partition, is_admissible, standard_gram
from .rings import (
    Matrix,
    NoRoot,
    RingElement,
    RingSpec,
    nullspace_mod_p,
    rank_mod_p,
    rank_q,
    residue,
    rref_mod_p,
    sqrt_unit,
)


# ---------------------------------------------------------------------------
# Blocks
# ---------------------------------------------------------------------------


def build_block(d: int, paired: bool = False, eps: int = -1) -> tuple[np.ndarray, np.ndarray]:
    """Nilpotent and Gram matrix of a single chain ``M(d)`` or a paired ``M(d, d)``.

    The chain basis is ``v_1, ..., v_d`` with ``N v_i = v_{i-1}``; the pairing
    is ``(-1)^i`` on ``v_i, v_j`` (or ``v_i, v'_j``) when ``i + j = d + 1``.
    """
    if d < 1:
        raise ValueError("block size must be >= 1")
    Nd = np.zeros((d, d), dtype=np.int64)
    for i in range(1, d):
        Nd[i - 1, i] = 1
    if not paired:
        G = np.zeros((d, d), dtype=np.int64)
        for i in range(1, d + 1):
            G[i - 1, d - i] = (-1) ** i
        return Nd, G
    N = np.zeros((2 * d, 2 * d), dtype=np.int64)
    N[:d, :d] = Nd
    N[d:, d:] = Nd
    G = np.zeros((2 * d, 2 * d), dtype=np.int64)
    for i in range(1, d + 1):
        j = d + 1 - i
        G[i - 1, d + j - 1] = (-1) ** i
        G[d + j - 1, i - 1] = eps * (-1) ** i
    return N, G


@dataclass(frozen=True)
class Label:
    """Basis vector ``N^power v_block`` (``primed`` for the twin chain of a pair)."""

    block: int
    power: int
    primed: bool = False

    def to_json(self) -> list:
        return [self.block, self.power, int(self.primed)]


@dataclass(frozen=True)
class Block:
    size: int
    paired: bool
    offset: int

    @property
    def dim(self) -> int:
        return 2 * self.size if self.paired else self.size


@dataclass(frozen=True, eq=False)
class OrbitRep:
    """The representative ``(N_sigma, phi_sigma)`` with its grading data."""

    group: GroupSpec
    sigma: Partition
    blocks: tuple[Block, ...]
    labels: tuple[Label, ...]
    N: np.ndarray = field(repr=False)
    gram: np.ndarray | None = field(repr=False)
    weights: tuple[int, ...]

    @property
    def m(self) -> int:
        return self.group.m

    @property
    def lowest(self) -> dict[int, list[int]]:
        """Weight ``s`` -> basis positions of chain generators with lowest weight ``s``."""
        out: dict[int, list[int]] = {}
        for pos, lab in enumerate(self.labels):
            if lab.power == 0:
                out.setdefault(self.weights[pos], []).append(pos)
        return dict(sorted(out.items()))

    @property
    def frame(self) -> GroupSpec:
        """The group with the representative's own Gram matrix."""
        return self.group if self.gram is None else self.group.with_gram(self.gram)

    def N_over(self, spec: RingSpec) -> Matrix:
        return Matrix.from_int(spec, self.N)

    def gram_over(self, spec: RingSpec) -> Matrix:
        return Matrix.from_int(spec, self.gram)

    def to_json(self) -> dict:
        return {
            "family": self.group.family,
            "m": self.m,
            "partition": self.sigma.to_json(),
            "blocks": [[b.size, int(b.paired)] for b in self.blocks],
            "labels": [lab.to_json() for lab in self.labels],
            "weights": list(self.weights),
            "lowest": {str(s): v for s, v in self.lowest.items()},
            "N": self.N.tolist(),
            "gram": None if self.gram is None else self.gram.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "OrbitRep":
        rep = build_representative(obj["partition"], obj["family"])
        if "N" in obj and not np.array_equal(np.array(obj["N"]), rep.N):
            raise ValueError("stored N does not match the construction")
        return rep


def _block_layout(sigma: Partition, kind: str) -> list[tuple[int, bool]]:
    layout = []
    for d, n in sigma.multiplicities().items():
        if kind == "gl":
            layout += [(d, False)] * n
        elif (kind == "o") == (d % 2 == 1):
            layout += [(d, False)] * n
        else:
            layout += [(d, True)] * (n // 2)
    return layout


def build_representative(sigma, group) -> OrbitRep:
    """Assemble blocks in descending size; each block is single or paired by family."""
    sigma = Partition.of(sigma)
    if isinstance(group, str):
        group = GroupSpec(group, sigma.total)
    if sigma.total != group.m:
        raise ValueError(f"{sigma} is not a partition of {group.m}")
    if not is_admissible(sigma, group.family):
        raise InadmissiblePartition(f"{sigma} is not admissible for {group.family}", partition=str(sigma), family=group.family)
    kind = group.kind
    eps = group.sign or 1
    m = group.m
    N = np.zeros((m, m), dtype=np.int64)
    G = None if kind == "gl" else np.zeros((m, m), dtype=np.int64)
    blocks, labels, weights = [], [], []
    off = 0
    for idx, (d, paired) in enumerate(_block_layout(sigma, kind)):
        Nb, Gb = build_block(d, paired, eps)
        size = Nb.shape[0]
        N[off:off + size, off:off + size] = Nb
        if G is not None:
            G[off:off + size, off:off + size] = Gb
        blocks.append(Block(d, paired, off))
        for primed in ((False, True) if paired else (False,)):
            for k in range(1, d + 1):
                labels.append(Label(idx, d - k, primed))
                weights.append(2 * (d - k) + 1 - d)
        off += size
    return OrbitRep(group, sigma, tuple(blocks), tuple(labels), N, G, tuple(weights))


# ---------------------------------------------------------------------------
# Jordan types
# ---------------------------------------------------------------------------


def _rank(M: Matrix) -> int:
    if M.spec.rational:
        return rank_q(M.data[0])
    if not M.spec.is_field:
        raise ValueError("jordan_type needs a field (Q or F_p)")
    return rank_mod_p(np.asarray(M.data[0], dtype=np.int64), M.spec.p)


def jordan_type(N: Matrix) -> Partition:
    """Jordan type from ranks: ``#{parts >= k} = rank N^(k-1) - rank N^k``."""
    m = N.rows
    ranks = [m]
    P = Matrix.identity(N.spec, m)
    for _ in range(m):
        P = P @ N
        ranks.append(_rank(P))
    if ranks[-1] != 0:
        raise NotNilpotent("matrix is not nilpotent", rank_of_top_power=ranks[-1])
    counts = [ranks[k - 1] - ranks[k] for k in range(1, m + 1)]
    return Partition(tuple(c for c in counts if c)).conjugate()


def is_pure(N: Matrix, p: int) -> bool:
    """Whether the generic and special fibers share a Jordan type."""
    if not N.spec.rational:
        raise ValueError("is_pure expects a rational matrix")
    return jordan_type(N) == jordan_type(residue(N, RingSpec(p)))


# ---------------------------------------------------------------------------
# Normalization of the pairing
# ---------------------------------------------------------------------------


def _partner_pairs(gram: np.ndarray):
    """Split the monomial Gram matrix into hyperbolic pairs and self-paired vectors."""
    m = gram.shape[0]
    pairs, selfs, seen = [], [], set()
    for i in range(m):
        if i in seen:
            continue
        j = int(np.flatnonzero(gram[i])[0])
        seen.update({i, j})
        if i == j:
            selfs.append((i, int(gram[i, i])))
        else:
            pairs.append((i, j, int(gram[i, j])))
    return pairs, selfs


def normalize_to_standard(rep: OrbitRep, ring: RingSpec) -> Matrix:
    """Change of basis ``C`` with ``C^T gram C`` equal to the standard antidiagonal form."""
    if rep.gram is None:
        return Matrix.identity(ring, rep.m)
    m = rep.m
    pairs, selfs = _partner_pairs(rep.gram)
    cols: list[list[tuple[int, RingElement]]] = []
    if rep.group.kind == "sp":
        first = [[(i, RingElement.of(ring, 1))] for i, _, _ in pairs]
        second = [[(j, RingElement.of(ring, eta))] for _, j, eta in pairs]
        ordered = first + second[::-1]
    else:
        need = set()
        if len(selfs) >= 2:
            need.add(2)
        for k in range(0, len(selfs) - 1, 2):
            (_, eta), (_, eta2) = selfs[k], selfs[k + 1]
            if eta == -1 or -eta2 == -1:
                need.add(-1)
        if len(selfs) % 2 and selfs[-1][1] == -1:
            need.add(-1)
        roots: dict[int, RingElement] = {}
        missing = []
        for c in sorted(need):
            if ring.rational:
                missing.append(c)
                continue
            r = sqrt_unit(RingElement.of(ring, c))
            if isinstance(r, NoRoot):
                missing.append(c)
            else:
                roots[c] = r
        if missing:
            raise MissingSquareRoot(
                "ring lacks " + ", ".join(f"sqrt({c})" for c in missing), missing=missing, ring=ring.to_json()
            )
        one = RingElement.of(ring, 1)

        def sq(x: int) -> RingElement:
            return one if x == 1 else roots[-1]

        first, second = [], []
        for i, j, eta in pairs:
            first.append([(i, one)])
            second.append([(j, RingElement.of(ring, eta))])
        for k in range(0, len(selfs) - 1, 2):
            (v, eta), (w, eta2) = selfs[k], selfs[k + 1]
            inv2 = roots[2].inverse()
            a, b = sq(eta) * inv2, sq(-eta2) * inv2
            first.append([(v, a), (w, -b)])
            second.append([(v, a), (w, b)])
        middle = []
        if len(selfs) % 2:
            v, eta = selfs[-1]
            middle = [[(v, sq(eta))]]
        ordered = first + middle + second[::-1]
    C = np.zeros((ring.n, m, m), dtype=object)
    for col, terms in enumerate(ordered):
        for row, coef in terms:
            if ring.rational:
                C[0, row, col] = coef.value
            else:
                C[:, row, col] = coef.value
    if ring.rational:
        C[C == 0] = 0
        return Matrix.from_int(ring, C[0])
    return Matrix.from_coeffs(ring, C)


def standard_form(rep: OrbitRep) -> np.ndarray | None:
    return standard_gram(rep.group.kind, rep.m)


# ---------------------------------------------------------------------------
# Conjugating a residue nilpotent to the representative
# ---------------------------------------------------------------------------


def _nonresidue(p: int) -> int:
    return next(z for z in range(2, p) if pow(z, (p - 1) // 2, p) == p - 1)


def _is_square(x: int, p: int) -> bool:
    x %= p
    return x != 0 and pow(x, (p - 1) // 2, p) == 1


def _sqrt_mod(x: int, p: int) -> int:
    r = sqrt_unit(RingElement.of(RingSpec(p), x))
    assert not isinstance(r, NoRoot)
    return r.constant()


class _Adapter:
    """Builds a basis adapted to ``(N, J)`` block by block, over F_p."""

    def __init__(self, N: np.ndarray, J: np.ndarray, p: int):
        self.p = p
        self.N = np.asarray(N, dtype=np.int64) % p
        self.J = np.asarray(J, dtype=np.int64) % p
        m = self.N.shape[0]
        self.powers = [np.eye(m, dtype=np.int64)]
        for _ in range(m):
            self.powers.append(self.powers[-1] @ self.N % p)

    def B(self, x, y) -> int:
        return int(x @ self.J @ y % self.p)

    def psi(self, x, y, d) -> np.ndarray:
        """Coefficients of ``sum_k B(x, N^k y) t^(d-1-k)``."""
        return np.array([self.B(x, self.powers[d - 1 - j] @ y) for j in range(d)], dtype=np.int64)

    def act(self, c, v) -> np.ndarray:
        out = np.zeros_like(v)
        for k, ck in enumerate(c):
            if ck:
                out = (out + ck * (self.powers[k] @ v)) % self.p
        return out


def _trunc_mul(a, b, d, p):
    out = np.zeros(d, dtype=np.int64)
    for i in range(d):
        if a[i]:
            out[i:] = (out[i:] + a[i] * b[: d - i]) % p
    return out


def _trunc_inv(a, d, p):
    inv0 = pow(int(a[0]), -1, p)
    out = np.zeros(d, dtype=np.int64)
    out[0] = inv0
    for k in range(1, d):
        s = sum(int(a[j]) * int(out[k - j]) for j in range(1, k + 1))
        out[k] = (-s * inv0) % p
    return out


def _bar(a):
    return np.array([(-1) ** k * x for k, x in enumerate(a)], dtype=np.int64)


def _find_value(G: np.ndarray, target: int, p: int) -> np.ndarray | None:
    """Vector ``c`` with ``c^T G c`` in ``target * squares``, for symmetric nondegenerate ``G``."""
    l = G.shape[0]
    # orthogonal basis by symmetric Gram-Schmidt
    basis = [np.eye(l, dtype=np.int64)[i] for i in range(l)]
    diag_vecs, diag_vals = [], []
    space = basis
    while space:
        val = lambda u, w: int(u @ G @ w % p)
        pick = next((u for u in space if val(u, u)), None)
        if pick is None:
            pair = next(((u, w) for u in space for w in space if val(u, w)), None)
            if pair is None:
                break
            pick = (pair[0] + pair[1]) % p
        a = val(pick, pick)
        diag_vecs.append(pick)
        diag_vals.append(a)
        inv = pow(a, -1, p)
        space = [(u - val(pick, u) * inv * pick) % p for u in space]
        space = [u for u in _independent(space, p)]
    for u, a in zip(diag_vecs, diag_vals):
        if _is_square(a * pow(target, -1, p), p):
            return u
    if len(diag_vecs) >= 2:
        (u1, a1), (u2, a2) = (diag_vecs[0], diag_vals[0]), (diag_vecs[1], diag_vals[1])
        for x in range(p):
            rest = (target - a1 * x * x) * pow(a2, -1, p) % p
            if rest == 0 or _is_square(rest, p):
                y = 0 if rest == 0 else _sqrt_mod(rest, p)
                return (x * u1 + y * u2) % p
    return None


def _independent(vecs, p):
    if not vecs:
        return []
    M = np.array(vecs, dtype=np.int64)
    R, piv = rref_mod_p(M, p)
    return [R[i] for i in range(len(piv))]


def _adapted_basis(N, J, rep: OrbitRep, p: int, mu: int) -> np.ndarray:
    ad = _Adapter(N, J, p)
    m = rep.m
    W = np.eye(m, dtype=np.int64)
    g = np.zeros((m, m), dtype=np.int64)
    for blk in rep.blocks:
        d = blk.size
        Nd1 = ad.powers[d - 1]
        img = Nd1 @ W % p
        _, piv = rref_mod_p(img, p)
        if not piv:
            raise NotConjugate("Jordan types differ", block=d)
        R = W[:, piv]
        target = mu * (-1) ** d % p
        if not blk.paired:
            G = R.T @ ad.J @ Nd1 @ R % p
            c = _find_value(G, target, p)
            if c is None:
                raise NotConjugate("square class mismatch on a lowest-weight space", block=d, mu=mu)
            x = R @ c % p
            for k in range(2, d, 2):
                h = ad.psi(x, x, d)[::-1]  # h[k] = B(x, N^k x)
                j = d - 1 - k
                if h[j]:
                    coef = -h[j] * pow(2 * int(h[d - 1]), -1, p) % p
                    x = (x + coef * (ad.powers[k] @ x)) % p
            h_top = ad.B(x, Nd1 @ x)
            lam = _sqrt_mod(target * pow(h_top, -1, p), p)
            x = lam * x % p
            for k in range(1, d + 1):
                g[:, blk.offset + k - 1] = ad.powers[d - k] @ x % p
        else:
            x = R[:, 0]
            y = next((R[:, i] for i in range(R.shape[1]) if ad.B(x, Nd1 @ R[:, i])), None)
            if y is None:
                raise NotConjugate("degenerate top layer", block=d)
            for _ in range(d + 2):
                y = ad.act(_trunc_inv(ad.psi(x, y, d), d, p), y)
                a = ad.psi(x, x, d)
                if not a.any():
                    break
                e = (-a * pow(2, -1, p)) % p
                x = (x + ad.act(e, y)) % p
            b = ad.psi(y, y, d)
            y = (y + ad.act(b * pow(2, -1, p) % p, x)) % p
            y = target * y % p
            for k in range(1, d + 1):
                g[:, blk.offset + k - 1] = ad.powers[d - k] @ x % p
                g[:, blk.offset + d + k - 1] = ad.powers[d - k] @ y % p
        S = g[:, blk.offset:blk.offset + blk.dim]
        null = nullspace_mod_p(S.T @ ad.J @ W % p, p)
        W = W @ null.T % p if null.size else np.zeros((m, 0), dtype=np.int64)
    return g


def _jordan_basis(N, rep: OrbitRep, p: int) -> np.ndarray:
    N = np.asarray(N, dtype=np.int64) % p
    m = rep.m
    powers = [np.eye(m, dtype=np.int64)]
    for _ in range(m):
        powers.append(powers[-1] @ N % p)
    kernels = [nullspace_mod_p(P, p) for P in powers]
    g = np.zeros((m, m), dtype=np.int64)
    gens: list[tuple[int, np.ndarray]] = []
    for blk in rep.blocks:
        d = blk.size
        span = [v for v in kernels[d - 1]] + [powers[e - d] @ x % p for e, x in gens]
        base_rank = len(_independent(span, p)) if span else 0
        for v in kernels[d]:
            if len(_independent(span + [v], p)) > base_rank:
                gens.append((d, v))
                for k in range(1, d + 1):
                    g[:, blk.offset + k - 1] = powers[d - k] @ v % p
                break
        else:
            raise NotConjugate("Jordan types differ", block=d)
    return g


def find_conjugator(Nbar: Matrix, J, rep: OrbitRep, similitude: bool = False) -> tuple[Matrix, int]:
    """Residue-level ``g`` with ``g N_sigma g^-1 = Nbar`` and ``g^T J g = mu * gram``.

    ``mu = 1`` is tried first; similitude groups may also use a non-square.
    """
    spec = Nbar.spec
    if not spec.is_field or spec.rational:
        raise ValueError("find_conjugator works over F_p")
    p = spec.p
    if jordan_type(Nbar) != rep.sigma:
        raise NotConjugate("Jordan types differ", expected=str(rep.sigma), found=str(jordan_type(Nbar)))
    N = np.asarray(Nbar.data[0], dtype=np.int64)
    if rep.gram is None:
        return Matrix.from_int(spec, _jordan_basis(N, rep, p)), 1
    mus = [1] + ([_nonresidue(p)] if similitude else [])
    last = None
    for mu in mus:
        try:
            g = _adapted_basis(N, J, rep, p, mu)
        except NotConjugate as exc:
            last = exc
            continue
        G = Matrix.from_int(spec, g)
        Jm = Matrix.from_int(spec, J)
        ok = (G @ rep.N_over(spec) == Nbar @ G) and (G.T @ Jm @ G == rep.gram_over(spec) * mu)
        if ok:
            return G, mu
    raise last or NotConjugate("no adapted basis found")
