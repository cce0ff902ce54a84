"""Tame representations over Artinian rings, lifting conditions and obstructions.

A representation of the tame group is a pair ``(Phi, N)`` with
``Phi N Phi^-1 = q N``.  Lifting proceeds one filtration digit at a time
(eps-degree outer, p-degree inner); each digit is a small extension whose
kernel is one copy of the residue field, so every step is a linear system
over F_p.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import linops
from .centralizers import group_membership, algebra_membership
from .errors import DomainError, NotConjugate, NotInAlgebra, NotInGroup, NotNilpotent, NotInvertible
from .explog import trunc_exp
from .orbits import OrbitRep, find_conjugator, jordan_type
from .partitions import GroupSpec, Partition, dominance_leq
from .rings import (
    FirstObstructedDegree,
    Matrix,
    PreparedSystem,
    RingElement,
    RingSpec,
    digit,
    from_digit,
    lower_digits_vanish,
    nullspace_mod_p,
    rref_mod_p,
    scalar_digit,
    scalar_from_digit,
)


class InvalidRep(DomainError):
    code = "InvalidRep"


# ---------------------------------------------------------------------------
# Representations and conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TqRep:
    """``(Phi, N)`` over ``ring``; ``witness`` optionally conjugates ``N_sigma`` to ``N``."""

    ring: RingSpec
    group: GroupSpec
    q: int
    phi: Matrix
    N: Matrix
    witness: Matrix | None = None

    @property
    def m(self) -> int:
        return self.group.m

    @property
    def T(self) -> Matrix:
        return trunc_exp(self.N)

    @property
    def J(self) -> Matrix | None:
        return None if self.group.gram is None else Matrix.from_int(self.ring, self.group.gram)

    def similitude(self) -> RingElement | None:
        return group_membership(self.phi, self.group)

    def residue(self, target: RingSpec | None = None) -> "TqRep":
        target = target or self.ring.residue_field
        w = None if self.witness is None else self.witness.residue(target)
        return TqRep(target, self.group, self.q, self.phi.residue(target), self.N.residue(target), w)

    def lift_to(self, target: RingSpec) -> "TqRep":
        """Canonical coefficient lift (not a valid representation in general)."""
        w = None if self.witness is None else self.witness.lift(target)
        return TqRep(target, self.group, self.q, self.phi.lift(target), self.N.lift(target), w)

    def to_json(self) -> dict:
        out = {
            "ring": self.ring.to_json(),
            "family": self.group.family,
            "m": self.m,
            "q": self.q,
            "gram": None if self.group.gram is None else self.group.gram.tolist(),
            "phi": self.phi.to_json(),
            "nilpotent": self.N.to_json(),
        }
        if self.witness is not None:
            out["witness"] = self.witness.to_json()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "TqRep":
        ring = RingSpec.from_json(obj["ring"])
        phi = Matrix.from_json(ring, obj["phi"])
        gram = obj.get("gram")
        family = obj.get("family")
        if family is None:
            # the similitude families are the most permissive reading of a bare Gram matrix
            if gram is None:
                family = "gl"
            else:
                family = "gsp" if np.array_equal(np.array(gram).T, -np.array(gram)) else "go"
        group = GroupSpec(family, int(obj.get("m", phi.rows)), gram)
        N = Matrix.from_json(ring, obj["nilpotent"])
        w = Matrix.from_json(ring, obj["witness"]) if obj.get("witness") is not None else None
        return cls(ring, group, int(obj["q"]), phi, N, w)


@dataclass(frozen=True)
class LiftCondition:
    """``kind`` is one of unrestricted, fixed-similitude, minimally-ramified, parabolic.

    ``nu`` fixes the similitude of ``Phi`` (``None`` leaves it free); ``orbit``
    is the representative for the minimally ramified condition; ``flag`` lists
    the isotropic dimensions of the standard flag for the parabolic one.
    """

    kind: str = "unrestricted"
    nu: int | None = None
    orbit: OrbitRep | None = field(default=None, compare=False)
    flag: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("unrestricted", "fixed-similitude", "minimally-ramified", "parabolic"):
            raise ValueError(f"unknown condition {self.kind!r}")
        if self.kind == "fixed-similitude" and self.nu is None:
            raise ValueError("fixed-similitude needs nu")
        if self.kind == "minimally-ramified" and self.orbit is None:
            raise ValueError("minimally-ramified needs an orbit representative")

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.nu is not None:
            out["nu"] = self.nu
        if self.orbit is not None:
            out["partition"] = str(self.orbit.sigma)
        if self.kind == "parabolic":
            out["flag"] = list(self.flag)
        return out


def Unrestricted() -> LiftCondition:
    return LiftCondition("unrestricted")


def FixedSimilitude(nu: int) -> LiftCondition:
    return LiftCondition("fixed-similitude", nu=nu)


def MinimallyRamified(orbit: OrbitRep, nu: int | None = None) -> LiftCondition:
    return LiftCondition("minimally-ramified", nu=nu, orbit=orbit)


def ParabolicRamified(flag, nu: int | None = None) -> LiftCondition:
    return LiftCondition("parabolic", nu=nu, flag=tuple(flag))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate(rep: TqRep) -> list[dict]:
    """Every violated identity of a representation (empty when valid)."""
    out: list[dict] = []
    spec = rep.ring
    if not spec.rational and rep.q % spec.p == 0:
        out.append({"identity": "q prime to p", "q": rep.q, "p": spec.p})
    try:
        group_membership(rep.phi, rep.group)
    except (NotInGroup, NotInvertible) as exc:
        out.append({"identity": "Phi in G", "detail": exc.to_json() if isinstance(exc, DomainError) else str(exc)})
    try:
        lam = algebra_membership(rep.N, rep.group)
        if lam is not None and not lam.is_zero():
            out.append({"identity": "N in derived Lie algebra", "multiplier": lam.to_json()})
    except NotInAlgebra as exc:
        out.append({"identity": "N in Lie algebra", "detail": exc.to_json()})
    P = Matrix.identity(spec, rep.m)
    for _ in range(rep.m):
        P = P @ rep.N
    if not P.is_zero():
        out.append({"identity": "N nilpotent"})
    rel = rep.phi @ rep.N - rep.N @ rep.phi * rep.q
    if not rel.is_zero():
        bad = np.argwhere(np.any(rel.data != 0, axis=0))[0]
        out.append({"identity": "Phi N = q N Phi", "entry": [int(x) for x in bad]})
    if not out:
        try:
            group_membership(rep.T, rep.group)
        except DomainError as exc:
            out.append({"identity": "exp(N) in G", "detail": exc.to_json()})
    return out


def _require_valid(rep: TqRep) -> None:
    bad = validate(rep)
    if bad:
        raise InvalidRep("representation violates its invariants", violations=bad)


# ---------------------------------------------------------------------------
# Flags
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Flag:
    """A standard isotropic coordinate flag and its stabilizer/radical patterns."""

    dims: tuple[int, ...]
    levels: tuple[int, ...]

    @property
    def p_mask(self) -> np.ndarray:
        lv = np.array(self.levels)
        return lv[:, None] <= lv[None, :]

    @property
    def n_mask(self) -> np.ndarray:
        lv = np.array(self.levels)
        return lv[:, None] < lv[None, :]

    @property
    def name(self) -> str:
        return flag_name(self.dims)


def flag_name(dims) -> str:
    dims = tuple(dims)
    named = {(): "whole-group", (1,): "klingen", (2,): "siegel", (1, 2): "borel"}
    return named.get(dims, "flag" + "-".join(map(str, dims)))


def standard_flag(J: np.ndarray, dims) -> Flag:
    """Flag spanned by the first ``d`` coordinates for each ``d`` in ``dims``, with perps."""
    J = np.asarray(J, dtype=np.int64)
    m = J.shape[0]
    dims = tuple(sorted(dims))
    chain: list[frozenset] = [frozenset()]
    for d in dims:
        S = frozenset(range(d))
        if any(J[i, j] for i in S for j in S):
            raise ValueError(f"span of the first {d} coordinates is not isotropic")
        chain.append(S)
    perps = []
    for S in chain[1:]:
        perp = frozenset(k for k in range(m) if not any(J[i, k] for i in S))
        if len(perp) != m - len(S):
            raise ValueError("flag is not a coordinate flag for this form")
        perps.append(perp)
    for P in reversed(perps):
        if P != chain[-1]:
            chain.append(P)
    if chain[-1] != frozenset(range(m)):
        chain.append(frozenset(range(m)))
    levels = tuple(min(i for i, S in enumerate(chain) if k in S) for k in range(m))
    return Flag(dims, levels)


def standard_flag_types(group: GroupSpec) -> list[tuple[int, ...]]:
    """All nonempty isotropic dimension sequences for a standard coordinate flag."""
    top = group.m // 2
    out = []
    for r in range(1, top + 1):
        out += list(itertools.combinations(range(1, top + 1), r))
    return sorted(out, key=lambda t: (len(t), t))


def flag_admits(rep: TqRep, flag: Flag) -> bool:
    """Whether ``Phi`` lies in the stabilizer pattern and ``N`` in the radical pattern."""
    out = True
    for M, mask in ((rep.phi, flag.p_mask), (rep.N, flag.n_mask)):
        out &= not np.any(M.data[:, ~mask])
    return bool(out)


def richardson_partition(group: GroupSpec, flag: Flag, p: int = 10007, seed: int = 0, trials: int = 4) -> Partition:
    """Jordan type of a random element of the radical (generic with high probability)."""
    rng = np.random.default_rng(seed)
    m = group.m
    spec = RingSpec(p)
    mask_rows = np.eye(m * m, dtype=np.int64)[~flag.n_mask.reshape(-1)]
    if group.gram is None:
        A = mask_rows
    else:
        A = np.vstack([linops.skew_form(np.asarray(group.gram)), mask_rows])
    basis = nullspace_mod_p(A, p)
    best = Partition((1,) * m)
    for _ in range(trials):
        c = rng.integers(1, p, size=len(basis))
        X = (c @ basis) % p if len(basis) else np.zeros(m * m, dtype=np.int64)
        t = jordan_type(Matrix.from_int(spec, X.reshape(m, m)))
        if dominance_leq(best, t):
            best = t
    return best


# ---------------------------------------------------------------------------
# Linearized lifting systems
# ---------------------------------------------------------------------------


def _inv_mod(M: np.ndarray, p: int) -> np.ndarray:
    from .rings import inverse_mod_p

    out = inverse_mod_p(M, p)
    if out is None:
        raise NotInvertible("singular residue matrix")
    return out


class LinearSystem:
    """The F_p-linear operator governing one digit of lifting at a residue point.

    Unknown blocks: ``A`` (correction of Phi), ``nu`` (of its similitude), then
    either ``B`` (correction of N) or ``Z``/``nu_g`` (correction of the witness
    for the minimally ramified condition).  Equations: Phi in G, the relation
    ``Phi N = q N Phi``, N in the Lie algebra (or the witness in G), and the
    fixed-similitude row if requested.
    """

    def __init__(self, group: GroupSpec, q: int, phibar, Nbar, cond: LiftCondition, p: int, gbar=None):
        self.group, self.cond, self.p = group, cond, p
        m = group.m
        self.m = m
        mm = m * m
        phibar = np.asarray(phibar, dtype=np.int64) % p
        Nbar = np.asarray(Nbar, dtype=np.int64) % p
        qb = q % p
        has_form = group.gram is not None
        self.similitude_free = has_form and group.similitude and cond.nu is None
        self.fixed = has_form and cond.nu is not None
        self.mr = cond.kind == "minimally-ramified"
        self.has_nu = has_form and (group.similitude or cond.nu is not None)
        J = np.asarray(group.gram, dtype=np.int64) if has_form else None
        P = linops.transpose(m)
        if cond.kind == "parabolic":
            flag = standard_flag(J if has_form else np.zeros((m, m)), cond.flag) if has_form else None
            self.a_cols = np.flatnonzero(flag.p_mask.reshape(-1))
            self.b_cols = np.flatnonzero(flag.n_mask.reshape(-1))
        else:
            self.a_cols = np.arange(mm)
            self.b_cols = np.arange(mm)
        # column blocks
        n_a = len(self.a_cols)
        n_nu = 1 if self.has_nu else 0
        if self.mr:
            gbar = np.asarray(gbar, dtype=np.int64) % p
            ginv = _inv_mod(gbar, p)
            self.gbar, self.ginv = gbar, ginv
            n_b = mm
            n_nug = 1 if (has_form and group.similitude) else 0
        else:
            n_b = len(self.b_cols)
            n_nug = 0
        self.sizes = {"A": n_a, "nu": n_nu, "B": n_b, "nu_g": n_nug}
        self.offsets = {}
        off = 0
        for k in ("A", "nu", "B", "nu_g"):
            self.offsets[k] = off
            off += self.sizes[k]
        ncols = off
        rows = []
        # E1: Phi^T J Phi = mu J
        if has_form:
            blockA = left_sel(linops.left(phibar.T @ J) + P @ linops.left(phibar.T @ J.T), self.a_cols)
            row = np.zeros((mm, ncols), dtype=np.int64)
            row[:, :n_a] = blockA
            if n_nu:
                row[:, self.offsets["nu"]] = -linops.vec(J)
            rows.append(("E1", row))
        # E2: Phi N - q N Phi
        row = np.zeros((mm, ncols), dtype=np.int64)
        row[:, :n_a] = left_sel(linops.right(Nbar) - qb * linops.left(Nbar), self.a_cols)
        actB = linops.left(phibar) - qb * linops.right(phibar)
        if self.mr:
            MZ = linops.right(ginv @ Nbar % p) - linops.left(Nbar) @ linops.right(ginv)
            self.MZ = MZ % p
            row[:, self.offsets["B"]:self.offsets["B"] + n_b] = actB @ self.MZ
        else:
            row[:, self.offsets["B"]:self.offsets["B"] + n_b] = left_sel(actB, self.b_cols)
        rows.append(("E2", row))
        if has_form and not self.mr:
            row = np.zeros((mm, ncols), dtype=np.int64)
            row[:, self.offsets["B"]:self.offsets["B"] + n_b] = left_sel(linops.skew_form(J), self.b_cols)
            rows.append(("E3", row))
        if has_form and self.mr:
            phi_s = np.asarray(cond.orbit.gram, dtype=np.int64)
            row = np.zeros((mm, ncols), dtype=np.int64)
            row[:, self.offsets["B"]:self.offsets["B"] + n_b] = linops.left(gbar.T @ J) + P @ linops.left(gbar.T @ J.T)
            if n_nug:
                row[:, self.offsets["nu_g"]] = -linops.vec(phi_s)
            rows.append(("E4", row))
        if self.fixed:
            row = np.zeros((1, ncols), dtype=np.int64)
            row[0, self.offsets["nu"]] = 1
            rows.append(("fix", row))
        self.row_names = [name for name, r in rows for _ in range(r.shape[0])]
        self.L = np.vstack([r for _, r in rows]) % p
        self.ncols = ncols
        self._prepared = None

    @property
    def prepared(self) -> PreparedSystem:
        if self._prepared is None:
            self._prepared = PreparedSystem(self.L, self.p)
        return self._prepared

    def split(self, u: np.ndarray) -> dict[str, np.ndarray]:
        out = {}
        for k in ("A", "nu", "B", "nu_g"):
            out[k] = u[self.offsets[k]:self.offsets[k] + self.sizes[k]]
        return out

    def embed(self, u: np.ndarray) -> dict[str, np.ndarray]:
        """Full ``m x m`` corrections from an unknown vector."""
        mm = self.m * self.m
        parts = self.split(u)
        A = np.zeros(mm, dtype=np.int64)
        A[self.a_cols] = parts["A"]
        out = {"A": A.reshape(self.m, self.m), "nu": int(parts["nu"][0]) if self.sizes["nu"] else 0}
        if self.mr:
            out["Z"] = parts["B"].reshape(self.m, self.m)
            out["nu_g"] = int(parts["nu_g"][0]) if self.sizes["nu_g"] else 0
            out["B"] = (self.MZ @ parts["B"] % self.p).reshape(self.m, self.m)
        else:
            B = np.zeros(mm, dtype=np.int64)
            B[self.b_cols] = parts["B"]
            out["B"] = B.reshape(self.m, self.m)
        return out

    def tangent_projection(self, u: np.ndarray) -> np.ndarray:
        """Coordinates ``(A, B)`` of a solution, for counting distinct lifts."""
        e = self.embed(u)
        return np.concatenate([e["A"].reshape(-1), e["B"].reshape(-1)]) % self.p


def left_sel(M: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return M[:, cols]


# ---------------------------------------------------------------------------
# Lifting state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObstructionCertificate:
    """Evidence that no lift exists at filtration degree ``degree`` of ``ring``.

    ``frames`` holds one entry per frame class tried (a single entry with
    ``frame=None`` when the condition has no frame freedom); each entry
    carries its right-hand side ``b`` and a functional ``f`` with ``f A = 0``
    and ``f b != 0`` over F_p.
    """

    degree: int
    ring: RingSpec
    A: np.ndarray
    frames: tuple
    condition: dict
    start: dict | None = None

    def verify(self) -> bool:
        p = self.ring.p
        A = np.asarray(self.A, dtype=object)
        for fr in self.frames:
            f = np.asarray(fr["f"], dtype=object)
            b = np.asarray(fr["b"], dtype=object)
            if any(int(x) % p for x in f.dot(A)) or int(f.dot(b)) % p == 0:
                return False
        return bool(self.frames)

    def to_json(self) -> dict:
        return {
            "result": "ObstructionCertificate",
            "degree": self.degree,
            "ring": self.ring.to_json(),
            "condition": self.condition,
            "A": [[int(x) for x in row] for row in self.A],
            "frames": [
                {
                    "frame": None if fr["frame"] is None else [np.asarray(Y).tolist() for Y in fr["frame"]],
                    "b": [int(x) for x in fr["b"]],
                    "f": [int(x) for x in fr["f"]],
                }
                for fr in self.frames
            ],
            "start": self.start,
            "verified": self.verify(),
        }


@dataclass
class _State:
    """Mutable working copy over an ambient ring."""

    ring: RingSpec
    phi: Matrix
    mu: RingElement | None
    N: Matrix
    g: Matrix | None = None
    mu_g: RingElement | None = None


def _similitude_of(M: Matrix, J: Matrix | None, ij) -> RingElement | None:
    if J is None:
        return None
    S = M.T @ J @ M
    return S.entry(*ij) / J.entry(*ij)


def _unit_entry(J: np.ndarray):
    i, j = np.argwhere(np.abs(J) == 1)[0]
    return int(i), int(j)


def _residuals(st: _State, sys: LinearSystem, q: int, J: Matrix | None, rep_N: Matrix | None, rep_gram: Matrix | None, nu):
    """Current defects of every equation, as ring matrices/scalars."""
    out = []
    if J is not None:
        out.append(st.phi.T @ J @ st.phi - J * st.mu)
    out.append(st.phi @ st.N - st.N @ st.phi * q)
    if J is not None and not sys.mr:
        out.append(st.N.T @ J + J @ st.N)
    if J is not None and sys.mr:
        out.append(st.g.T @ J @ st.g - rep_gram * st.mu_g)
    if sys.fixed:
        out.append(st.mu - nu)
    return out


def _digit_vector(res, d: int) -> np.ndarray:
    parts = []
    for r in res:
        if isinstance(r, Matrix):
            if not lower_digits_vanish(r, d):
                raise RuntimeError("lower digits of a defect do not vanish")
            parts.append(digit(r, d).reshape(-1))
        else:
            k, l = r.spec.digit_pos(d)
            if any(r.value[:k]) or r.value[k] % r.spec.p**l:
                raise RuntimeError("lower digits of a defect do not vanish")
            parts.append(np.array([scalar_digit(r, d)], dtype=np.int64))
    return np.concatenate(parts)


def _apply(st: _State, sys: LinearSystem, u: np.ndarray, d: int, rep_N: Matrix | None) -> _State:
    e = sys.embed(u)
    R = st.ring
    phi = st.phi + from_digit(R, d, e["A"])
    mu = None if st.mu is None else st.mu + scalar_from_digit(R, d, e["nu"])
    if sys.mr:
        g = st.g + from_digit(R, d, e["Z"])
        mu_g = None if st.mu_g is None else st.mu_g + scalar_from_digit(R, d, e["nu_g"])
        N = g @ rep_N @ g.inverse()
        return _State(R, phi, mu, N, g, mu_g)
    N = st.N + from_digit(R, d, e["B"])
    return _State(R, phi, mu, N)


class Lifter:
    """Digit-by-digit lifting for one residual representation and condition."""

    def __init__(self, rbar: TqRep, cond: LiftCondition):
        if not rbar.ring.is_field or rbar.ring.rational:
            raise ValueError("Lifter expects a representation over F_p")
        self.rbar, self.cond = rbar, cond
        self.p = rbar.ring.p
        self.group = rbar.group
        gbar = None
        if cond.kind == "minimally-ramified":
            gbar = rbar.witness
            if gbar is None:
                gbar, _ = find_conjugator(rbar.N, rbar.group.gram, cond.orbit, rbar.group.similitude)
            self.gbar = gbar
        else:
            self.gbar = None
        self.system = LinearSystem(
            rbar.group, rbar.q, rbar.phi.data[0], rbar.N.data[0], cond, self.p,
            None if gbar is None else gbar.data[0],
        )
        self.ij = None if rbar.group.gram is None else _unit_entry(rbar.group.gram)

    def _context(self, R: RingSpec):
        J = None if self.group.gram is None else Matrix.from_int(R, self.group.gram)
        rep_N = rep_gram = None
        if self.cond.orbit is not None:
            rep_N = self.cond.orbit.N_over(R)
            rep_gram = None if self.cond.orbit.gram is None else self.cond.orbit.gram_over(R)
        nu = None if self.cond.nu is None else RingElement.of(R, self.cond.nu)
        return J, rep_N, rep_gram, nu

    def with_witness(self, rep: TqRep) -> TqRep:
        """``rep`` carrying a witness when the condition needs one."""
        if not self.system.mr or rep.witness is not None:
            return rep
        if rep.ring.is_field:
            w = self.gbar
        else:
            w = conjugate_nilpotent(rep.N, self.cond.orbit, self.group, self.gbar)
            if isinstance(w, FirstObstructedDegree):
                raise NotConjugate("representation is not minimally ramified", degree=w.degree)
        return TqRep(rep.ring, rep.group, rep.q, rep.phi, rep.N, w)

    def state_of(self, rep: TqRep, R: RingSpec) -> _State:
        """Working state for ``rep`` embedded in the ambient ring ``R``."""
        J, rep_N, _, _ = self._context(R)
        src = rep.ring
        phi, N = rep.phi.lift(R), rep.N.lift(R)
        mu = None
        if J is not None:
            mu0 = _similitude_of(rep.phi, Matrix.from_int(src, self.group.gram), self.ij)
            mu = RingElement.of(R, list(mu0.value))
        g = mu_g = None
        if self.system.mr:
            w = self.with_witness(rep).witness
            g = w.lift(R)
            N = g @ rep_N @ g.inverse()
            if J is not None:
                S = w.T @ Matrix.from_int(src, self.group.gram) @ w
                i, j = _unit_entry(self.cond.orbit.gram)
                mg = S.entry(i, j) / self.cond.orbit.gram_over(src).entry(i, j)
                mu_g = RingElement.of(R, list(mg.value))
        return _State(R, phi, mu, N, g, mu_g)

    def to_rep(self, st: _State) -> TqRep:
        return TqRep(st.ring, self.group, self.rbar.q, st.phi, st.N, st.g)

    def step(self, st: _State, d: int, rng=None):
        """Fix digit ``d``; returns the new state or an obstruction certificate."""
        J, rep_N, rep_gram, nu = self._context(st.ring)
        res = _residuals(st, self.system, self.rbar.q, J, rep_N, rep_gram, nu)
        b = (-_digit_vector(res, d)) % self.p
        x, f = self.system.prepared.solve(b)
        if x is None:
            return ObstructionCertificate(
                d, st.ring, self.system.L, ({"frame": None, "b": b, "f": f},), self.cond.to_json()
            )
        if rng is not None and len(self.system.prepared.kernel):
            K = self.system.prepared.kernel
            x = (x + rng.integers(0, self.p, size=len(K)) @ K) % self.p
        return _apply(st, self.system, x, d, rep_N)


def _check_small(src: RingSpec, dst: RingSpec) -> range:
    """Digits added by ``dst -> src``; they must sit at the end of the filtration."""
    if src.rational or dst.rational or src.p != dst.p:
        raise ValueError("rings are not in one tower")
    if dst.a == src.a and dst.n >= src.n:
        return range(src.length, dst.length)
    if dst.n == src.n == 1 and dst.a >= src.a:
        return range(src.length, dst.length)
    raise ValueError(f"{dst} -> {src} is not a supported chain of small extensions")


def lift_step(rep: TqRep, cond: LiftCondition, target: RingSpec, rng=None, lifter: Lifter | None = None):
    """Lift ``rep`` along ``target -> rep.ring``; returns a TqRep or a certificate.

    With ``rng`` the lift is a random point of the affine solution space;
    otherwise the particular solution of the echelon form is used.  For the
    parabolic condition every frame class is tried, so a certificate means no
    lift exists; the lift returned is in standard form.
    """
    digits = _check_small(rep.ring, target)
    if cond.kind == "parabolic":
        std = standard_form(rep, cond)
        if std is None:
            raise InvalidRep("representation does not satisfy the parabolic condition")
        if len(digits) != 1:
            raise ValueError("parabolic lifting handles one filtration digit per step")
        return parabolic_obstruction(std, cond, target, rng=rng)
    lifter = lifter or Lifter(rep.residue(), cond)
    st = lifter.state_of(rep, target)
    for d in digits:
        out = lifter.step(st, d, rng)
        if isinstance(out, ObstructionCertificate):
            return out
        st = out
    return lifter.to_rep(st)


def lift_chain(rbar: TqRep, cond: LiftCondition, rings, rng=None):
    """Lift successively through ``rings``; returns the list of lifts or a certificate."""
    lifter = Lifter(rbar, cond)
    cur = lifter.with_witness(rbar)
    chain = [cur]
    for R in rings:
        out = lift_step(cur, cond, R, rng, lifter)
        if isinstance(out, ObstructionCertificate):
            return out
        chain.append(out)
        cur = out
    return chain


# ---------------------------------------------------------------------------
# Pure nilpotents
# ---------------------------------------------------------------------------


def conjugate_nilpotent(N: Matrix, rep: OrbitRep, group: GroupSpec | None = None, gbar: Matrix | None = None):
    """``g`` with ``g N_sigma g^-1 = N`` over ``N.spec``, or the first obstructed degree.

    ``group`` supplies the ambient Gram matrix (defaults to the representative's);
    the residue-level conjugator is found by an adapted-basis construction
    unless ``gbar`` is given.
    """
    R = N.spec
    p = R.p
    group = group or rep.frame
    k = R.residue_field
    if gbar is None:
        Nbar = N.residue(k)
        if Nbar == rep.N_over(k) and (group.gram is None or np.array_equal(group.gram, rep.gram)):
            gbar = Matrix.identity(k, rep.m)
        else:
            gbar, _ = find_conjugator(Nbar, group.gram, rep, group.similitude)
    cond = MinimallyRamified(rep)
    m = rep.m
    mm = m * m
    g0 = np.asarray(gbar.data[0], dtype=np.int64)
    ginv = _inv_mod(g0, p)
    Nbar_arr = np.asarray(N.residue(k).data[0], dtype=np.int64)
    MZ = (linops.right(ginv @ Nbar_arr % p) - linops.left(Nbar_arr) @ linops.right(ginv)) % p
    has_form = group.gram is not None
    sim = has_form and group.similitude
    blocks = [np.hstack([MZ, np.zeros((mm, 1 if sim else 0), dtype=np.int64)])]
    if has_form:
        J = np.asarray(group.gram, dtype=np.int64)
        P = linops.transpose(m)
        E4 = linops.left(g0.T @ J) + P @ linops.left(g0.T @ J.T)
        if sim:
            E4 = np.hstack([E4, -linops.vec(rep.gram).reshape(-1, 1)])
        blocks.append(E4)
    L = np.vstack(blocks) % p
    ps = PreparedSystem(L, p)
    Jm = None if not has_form else Matrix.from_int(R, group.gram)
    gram_R = None if not has_form else rep.gram_over(R)
    N_sigma = rep.N_over(R)
    g = gbar.lift(R)
    mu_g = None
    if has_form:
        S = gbar.T @ Matrix.from_int(k, group.gram) @ gbar
        i, j = _unit_entry(rep.gram)
        mu_g = RingElement.of(R, list((S.entry(i, j) / rep.gram_over(k).entry(i, j)).value))
    for d in range(1, R.length):
        res = [N - g @ N_sigma @ g.inverse()]
        if has_form:
            res.append(g.T @ Jm @ g - gram_R * mu_g)
        rhs = np.concatenate([digit(res[0], d).reshape(-1)] + ([(-digit(res[1], d)).reshape(-1) % p] if has_form else []))
        x, f = ps.solve(rhs)
        if x is None:
            kk, l = R.digit_pos(d)
            return FirstObstructedDegree(d, kk, l, L, rhs, f, p)
        g = g + from_digit(R, d, x[:mm].reshape(m, m))
        if sim:
            mu_g = mu_g + scalar_from_digit(R, d, int(x[mm]))
    return g


# ---------------------------------------------------------------------------
# Parabolic frames
# ---------------------------------------------------------------------------


class ParabolicFrames:
    """Frame freedom ``g -> g exp(pi Y)`` modulo the standard parabolic."""

    def __init__(self, group: GroupSpec, flag: Flag, p: int):
        self.group, self.flag, self.p = group, flag, p
        m = group.m
        self.m = m
        mm = m * m
        out_p = np.eye(mm, dtype=np.int64)[~flag.p_mask.reshape(-1)]
        if group.gram is None:
            g_basis = np.eye(mm, dtype=np.int64)
            p_basis = nullspace_mod_p(out_p, p)
        else:
            skew = linops.skew_form(np.asarray(group.gram, dtype=np.int64))
            g_basis = nullspace_mod_p(skew, p)
            p_basis = nullspace_mod_p(np.vstack([skew, out_p]), p)
        # complement of the parabolic inside the Lie algebra
        rows = [v for v in p_basis]
        rank = len(rows)
        comp = []
        for v in g_basis:
            trial = rows + [v]
            r = len(rref_mod_p(np.array(trial), p)[1])
            if r > rank:
                rows, rank = trial, r
                comp.append(v)
        self.C = np.array(comp, dtype=np.int64).reshape(len(comp), mm)
        self.out_p = ~flag.p_mask.reshape(-1)
        self.out_n = ~flag.n_mask.reshape(-1)

    def frame_system(self, phibar: np.ndarray, Nbar: np.ndarray) -> np.ndarray:
        """Operator ``c -> (outside parts of [Phi, Y], [N, Y])`` with ``Y = sum c_i C_i``."""
        p = self.p
        adP = (linops.left(phibar) - linops.right(phibar)) % p
        adN = (linops.left(Nbar) - linops.right(Nbar)) % p
        M = np.vstack([adP[self.out_p], adN[self.out_n]])
        return (M @ self.C.T) % p

    def defects(self, phi: Matrix, N: Matrix, d: int) -> np.ndarray:
        a = digit(phi, d).reshape(-1)[self.out_p]
        b = digit(N, d).reshape(-1)[self.out_n]
        return np.concatenate([a, b])

    def in_pattern_below(self, phi: Matrix, N: Matrix, d: int) -> bool:
        """Entries outside the patterns vanish at every digit below ``d``."""
        R = phi.spec
        for M, mask in ((phi, self.out_p), (N, self.out_n)):
            data = M.data.reshape(R.n, -1)[:, mask]
            if d >= R.length:
                if np.any(data):
                    return False
                continue
            k, l = R.digit_pos(d)
            if np.any(data[:k]) or np.any(np.asarray(data[k], dtype=object) % R.p**l):
                return False
        return True


def _conj_exp(phi: Matrix, N: Matrix, Y: np.ndarray, d: int) -> tuple[Matrix, Matrix, Matrix]:
    E = trunc_exp(from_digit(phi.spec, d, Y))
    Ei = E.inverse()
    return Ei @ phi @ E, Ei @ N @ E, E


def enumerate_frames(phi: Matrix, N: Matrix, frames: ParabolicFrames, upto: int, limit: int = 10**5):
    """Yield ``(phi_h, N_h, [Y_1, ...])`` for frame classes making digits ``< upto`` standard.

    Raises ``RuntimeError`` if more than ``limit`` classes would be visited.
    """
    p = frames.p
    m = frames.m
    phibar = np.asarray(phi.data[0] % p, dtype=np.int64)
    Nbar = np.asarray(N.data[0] % p, dtype=np.int64)
    M = frames.frame_system(phibar, Nbar)
    ps = PreparedSystem(M, p) if M.size else None
    count = [0]

    def rec(ph, nh, d, path):
        if d >= upto:
            count[0] += 1
            if count[0] > limit:
                raise RuntimeError("frame enumeration exceeds the limit")
            yield ph, nh, path
            return
        rhs = (-frames.defects(ph, nh, d)) % p
        if ps is None or len(frames.C) == 0:
            if np.any(rhs):
                return
            yield from rec(ph, nh, d + 1, path + [np.zeros((m, m), dtype=np.int64)])
            return
        x, _ = ps.solve(rhs)
        if x is None:
            return
        K = ps.kernel
        for coeffs in itertools.product(range(p), repeat=len(K)):
            c = (x + np.array(coeffs, dtype=np.int64) @ K) % p if len(K) else x
            Y = (c @ frames.C % p).reshape(m, m)
            ph2, nh2, _ = _conj_exp(ph, nh, Y, d)
            yield from rec(ph2, nh2, d + 1, path + [Y])

    yield from rec(phi, N, 1, [])


def check_condition(rep: TqRep, cond: LiftCondition) -> bool:
    """Decide whether ``rep`` satisfies ``cond`` exactly over its ring."""
    _require_valid(rep)
    mu = rep.similitude()
    if cond.nu is not None and (mu is None or mu != RingElement.of(rep.ring, cond.nu)):
        return False
    if cond.kind in ("unrestricted", "fixed-similitude"):
        return True
    if cond.kind == "minimally-ramified":
        try:
            out = conjugate_nilpotent(rep.N, cond.orbit, rep.group)
        except NotConjugate:
            return False
        return not isinstance(out, FirstObstructedDegree)
    return standard_form(rep, cond) is not None


def standard_form(rep: TqRep, cond: LiftCondition) -> TqRep | None:
    """A frame conjugate of ``rep`` in the standard parabolic pattern, if one exists."""
    flag = standard_flag(rep.group.gram, cond.flag)
    if not flag_admits(rep.residue(), flag):
        return None
    if rep.ring.is_field:
        return rep
    frames = ParabolicFrames(rep.group, flag, rep.ring.p)
    for ph, nh, _ in enumerate_frames(rep.phi, rep.N, frames, rep.ring.length):
        if frames.in_pattern_below(ph, nh, rep.ring.length):
            return TqRep(rep.ring, rep.group, rep.q, ph, nh)
    return None


# ---------------------------------------------------------------------------
# Tangent spaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TangentReport:
    dim_lifting: int
    dim_g: int
    dim_h0: int
    dim_h0_ad0: int
    dim_deformation: int

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _h0(rbar: TqRep, derived: bool) -> int:
    p = rbar.ring.p
    m = rbar.m
    phi = np.asarray(rbar.phi.data[0], dtype=np.int64)
    N = np.asarray(rbar.N.data[0], dtype=np.int64)
    rows = [linops.commutator(N), linops.commutator(phi)]
    if rbar.group.gram is not None:
        J = np.asarray(rbar.group.gram, dtype=np.int64)
        skew = linops.skew_form(J)
        if rbar.group.similitude and not derived:
            rows = [np.hstack([r, np.zeros((m * m, 1), dtype=np.int64)]) for r in rows]
            rows.append(np.hstack([skew, -linops.vec(J).reshape(-1, 1)]))
        else:
            rows.append(skew)
    A = np.vstack(rows) % p
    return A.shape[1] - len(rref_mod_p(A, p)[1])


def tangent_report(rbar: TqRep, cond: LiftCondition) -> TangentReport:
    """Dimensions of first-order lifts and of the invariants of the adjoint action."""
    _require_valid(rbar)
    lifter = Lifter(rbar, cond)
    sys = lifter.system
    K = sys.prepared.kernel
    if len(K):
        proj = np.array([sys.tangent_projection(u) for u in K])
        dim_lift = len(rref_mod_p(proj, sys.p)[1])
    else:
        dim_lift = 0
    dim_g = rbar.group.lie_dim()
    h0 = _h0(rbar, derived=False)
    h0_0 = _h0(rbar, derived=True)
    return TangentReport(dim_lift, dim_g, h0, h0_0, dim_lift - dim_g + h0)


def tangent_basis(rbar: TqRep, cond: LiftCondition, lifter: Lifter | None = None) -> tuple[list[TqRep], list[np.ndarray]]:
    """Lifts ``rbar + eps * x`` for a basis ``x`` of first-order solutions modulo coboundaries."""
    lifter = lifter or Lifter(rbar, cond)
    sys = lifter.system
    p = sys.p
    m = rbar.m
    R = RingSpec(p, 1, 2)
    K = sys.prepared.kernel
    # coboundaries: conjugation by exp(eps Y) with Y in the allowed frame algebra
    if rbar.group.gram is None:
        gb = np.eye(m * m, dtype=np.int64)
    else:
        gb = nullspace_mod_p(linops.skew_form(np.asarray(rbar.group.gram)), p)
    if cond.kind == "parabolic":
        flag = standard_flag(rbar.group.gram, cond.flag)
        out_p = np.eye(m * m, dtype=np.int64)[~flag.p_mask.reshape(-1)]
        sk = linops.skew_form(np.asarray(rbar.group.gram)) if rbar.group.gram is not None else np.zeros((0, m * m), dtype=np.int64)
        gb = nullspace_mod_p(np.vstack([sk, out_p]), p)
    phi = np.asarray(rbar.phi.data[0], dtype=np.int64)
    N = np.asarray(rbar.N.data[0], dtype=np.int64)
    cob = []
    for y in gb:
        Y = y.reshape(m, m)
        cob.append(np.concatenate([(phi @ Y - Y @ phi).reshape(-1), (N @ Y - Y @ N).reshape(-1)]) % p)
    rows = list(cob)
    rank = len(rref_mod_p(np.array(rows), p)[1]) if rows else 0
    chosen = []
    for u in K:
        v = sys.tangent_projection(u)
        trial = rows + [v]
        r = len(rref_mod_p(np.array(trial), p)[1])
        if r > rank:
            rows, rank = trial, r
            chosen.append(u)
    st0 = lifter.state_of(rbar, R)
    out = []
    for u in chosen:
        st = _apply(st0, sys, u, 1, None if cond.orbit is None else cond.orbit.N_over(R))
        out.append(lifter.to_rep(st))
    return out, chosen


# ---------------------------------------------------------------------------
# Search for unliftable first-order lifts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Exhausted:
    classes_tried: int
    reason: str = ""

    def to_json(self) -> dict:
        return {"result": "Exhausted", "classes_tried": self.classes_tried, "reason": self.reason}


def parabolic_obstruction(rep: TqRep, cond: LiftCondition, target: RingSpec, frame_limit: int = 10**5, rng=None):
    """Certificate that a standard-form ``rep`` has no parabolic lift to ``target``.

    Every frame class at the digits of ``rep.ring`` is tried; returns either a
    lift (a TqRep in standard form over ``target``) or a certificate listing
    one functional per frame class.
    """
    flag = standard_flag(rep.group.gram, cond.flag)
    p = rep.ring.p
    digits = list(_check_small(rep.ring, target))
    if len(digits) != 1:
        raise ValueError("parabolic_obstruction handles one small extension")
    d = digits[0]
    lifter = Lifter(rep.residue(), cond)
    frames = ParabolicFrames(rep.group, flag, p)
    base = lifter.state_of(rep, target)
    phi, N = base.phi, base.N
    entries = []
    for ph, nh, path in enumerate_frames(phi, N, frames, d, frame_limit):
        st = _State(target, ph, base.mu, nh)
        out = lifter.step(st, d, rng)
        if not isinstance(out, ObstructionCertificate):
            return lifter.to_rep(out)
        fr = out.frames[0]
        entries.append({"frame": [np.asarray(Y) for Y in path], "b": fr["b"], "f": fr["f"]})
    return ObstructionCertificate(d, target, lifter.system.L, tuple(entries), cond.to_json(), rep.to_json())


def _candidates(basis: list, p: int):
    """Deterministic spanning sequence: basis vectors, then pairwise combinations."""
    for i, u in enumerate(basis):
        yield u
    for i, j in itertools.combinations(range(len(basis)), 2):
        for c in range(1, p):
            yield (basis[i] + c * basis[j]) % p


def search_unliftable(rbar: TqRep, cond: LiftCondition, depth: int = 3, max_candidates: int = 2000):
    """Look for a first-order lift satisfying ``cond`` that does not lift to ``eps^depth``."""
    _require_valid(rbar)
    p = rbar.ring.p
    if cond.kind == "parabolic":
        flag = standard_flag(rbar.group.gram, cond.flag)
        if not flag_admits(rbar, flag):
            return Exhausted(0, "flag does not admit the residual representation")
        rich = richardson_partition(rbar.group, flag)
        if not dominance_leq(jordan_type(rbar.N), rich):
            return Exhausted(0, "Jordan type not dominated by the Richardson partition")
    lifter = Lifter(rbar, cond)
    reps, vectors = tangent_basis(rbar, cond, lifter)
    sys = lifter.system
    R1 = RingSpec(p, 1, 2)
    J, rep_N, _, _ = lifter._context(R1)
    st0 = lifter.state_of(rbar, R1)
    tried = 0
    for u in _candidates(vectors, p):
        if tried >= max_candidates:
            break
        tried += 1
        rho = lifter.to_rep(_apply(st0, sys, u, 1, rep_N))
        cur = rho
        for n in range(3, depth + 1):
            target = RingSpec(p, 1, n)
            if cond.kind == "parabolic":
                out = parabolic_obstruction(cur, cond, target)
            else:
                out = lift_step(cur, cond, target, lifter=lifter)
                if isinstance(out, ObstructionCertificate):
                    out = ObstructionCertificate(out.degree, out.ring, out.A, out.frames, out.condition, cur.to_json())
            if isinstance(out, ObstructionCertificate):
                return out
            cur = out
    return Exhausted(tried)


# ---------------------------------------------------------------------------
# Worked example
# ---------------------------------------------------------------------------

PARABOLIC_ASSUMPTION = (
    "parabolic lifts of a standard parabolic are taken to be conjugate, over each "
    "Artinian ring, to the constant standard one; the parabolic condition is decided "
    "by searching frames g with g^-1 rho g in standard form"
)


def example_residual(p: int = 7, q: int = 29) -> TqRep:
    """``Phi = I - E12 + E43``, ``N = E13`` in GSp4 for the form ``[[0, I], [-I, 0]]``."""
    from .partitions import block_gram

    k = RingSpec(p)
    phi = np.eye(4, dtype=np.int64)
    phi[0, 1] = -1
    phi[3, 2] = 1
    N = np.zeros((4, 4), dtype=np.int64)
    N[0, 2] = 1
    return TqRep(k, GroupSpec("gsp", 4, block_gram(4)), q, Matrix.from_int(k, phi), Matrix.from_int(k, N))


def worked_example(depth: int = 3, mr_length: int = 4) -> dict:
    """Certificates for every admitting standard flag and a minimally ramified chain."""
    from .orbits import build_representative

    rbar = example_residual()
    p = rbar.ring.p
    orbit = build_representative("2+1+1", "gsp")
    gbar, mu = find_conjugator(rbar.N, rbar.group.gram, orbit, similitude=True)
    flags = {}
    n_cert = 0
    for dims in [()] + standard_flag_types(rbar.group):
        entry: dict = {"dims": list(dims)}
        if not dims:
            entry.update(applicable=False, reason="the radical of the whole group is trivial")
            flags[flag_name(dims)] = entry
            continue
        flag = standard_flag(rbar.group.gram, dims)
        entry["richardson"] = str(richardson_partition(rbar.group, flag))
        entry["applicable"] = flag_admits(rbar, flag)
        if entry["applicable"]:
            out = search_unliftable(rbar, ParabolicRamified(dims), depth=depth)
            entry["result"] = out.to_json()
            n_cert += isinstance(out, ObstructionCertificate) and out.verify()
        flags[flag_name(dims)] = entry
    cond = MinimallyRamified(orbit)
    chain = lift_chain(rbar, cond, [RingSpec(p, 1, n) for n in range(2, mr_length + 1)])
    mr = {
        "conjugator": gbar.to_json(),
        "conjugator_similitude": mu,
        "tangent_free_similitude": tangent_report(rbar, cond).to_json(),
        "tangent_fixed_similitude": tangent_report(rbar, MinimallyRamified(orbit, nu=1)).to_json(),
        "unliftable_search": search_unliftable(rbar, cond, depth=mr_length).to_json(),
    }
    if isinstance(chain, list):
        mr["chain"] = [r.to_json() for r in chain]
        mr["lifted_to"] = chain[-1].ring.to_json()
        mr["all_valid"] = all(not validate(r) and check_condition(r, cond) for r in chain)
    else:
        mr["chain"] = None
        mr["obstruction"] = chain.to_json()
    return {
        "residual": rbar.to_json(),
        "jordan_type": str(jordan_type(rbar.N)),
        "assumption": PARABOLIC_ASSUMPTION,
        "flags": flags,
        "certificates_verified": int(n_cert),
        "minimally_ramified": mr,
    }
