"""Exact arithmetic in the coefficient-ring tower and linear solving.

Rings are described by :class:`RingSpec`:

* the rationals (optionally remembering a prime ``p`` for p-integrality),
* ``Z/p^a`` (``a = 1`` is the prime field),
* ``(Z/p^a)[eps]/(eps^n)`` truncations.

Finite-ring matrices are stored as integer arrays of shape ``(n, rows, cols)``
holding the eps-coefficients, each reduced into ``[0, p^a)``.  Rational
matrices use object arrays of :class:`fractions.Fraction` with ``n = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, NotInvertible, NotPIntegral, UnreachableTarget


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    i = 2
    while i * i <= p:
        if p % i == 0:
            return False
        i += 1
    return True


def valuation(x: int, p: int, cap: int) -> int:
    """p-adic valuation of ``x`` as an element of Z/p^cap (``cap`` for zero)."""
    x %= p**cap
    if x == 0:
        return cap
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


# ---------------------------------------------------------------------------
# Ring specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RingSpec:
    """A ring in the tower.

    ``rational=True`` means Q; then ``p`` (possibly None) is only used to
    decide p-integrality.  Otherwise the ring is ``(Z/p^a)[eps]/(eps^n)``.
    """

    p: int | None = None
    a: int = 1
    n: int = 1
    rational: bool = False

    def __post_init__(self):
        if self.rational:
            if self.a != 1 or self.n != 1:
                raise ValueError("rationals take no precision parameters")
            if self.p is not None and not is_prime(self.p):
                raise ValueError(f"p={self.p} is not prime")
            return
        if self.p is None or not is_prime(self.p):
            raise ValueError(f"p={self.p} is not prime")
        if self.p == 2:
            raise ValueError("characteristic 2 is not supported")
        if self.a < 1 or self.n < 1:
            raise ValueError("a and n must be >= 1")

    # constructors -----------------------------------------------------
    @classmethod
    def rationals(cls, p: int | None = None) -> "RingSpec":
        return cls(p=p, rational=True)

    @classmethod
    def prime_field(cls, p: int) -> "RingSpec":
        return cls(p=p)

    @classmethod
    def mod_prime_power(cls, p: int, a: int) -> "RingSpec":
        return cls(p=p, a=a)

    @classmethod
    def eps_trunc(cls, base: "RingSpec", n: int) -> "RingSpec":
        if base.rational or base.n != 1:
            raise ValueError("base of an eps-truncation must be Z/p^a")
        return cls(p=base.p, a=base.a, n=n)

    # properties -------------------------------------------------------
    @property
    def kind(self) -> str:
        if self.rational:
            return "q"
        if self.n > 1:
            return "eps"
        return "zpa" if self.a > 1 else "fp"

    @property
    def is_field(self) -> bool:
        return self.rational or (self.a == 1 and self.n == 1)

    @property
    def modulus(self) -> int:
        return self.p**self.a

    @property
    def residue_field(self) -> "RingSpec":
        return RingSpec(p=self.p)

    @property
    def length(self) -> int:
        """Number of digits in the lexicographic (eps outer, p inner) filtration."""
        return self.a * self.n

    def digit_index(self, k: int, l: int) -> int:
        return k * self.a + l

    def digit_pos(self, d: int) -> tuple[int, int]:
        return divmod(d, self.a)

    def __str__(self) -> str:
        if self.rational:
            return "Q" if self.p is None else f"Q(p={self.p})"
        base = f"F_{self.p}" if self.a == 1 else f"Z/{self.p}^{self.a}"
        return base if self.n == 1 else f"{base}[eps]/(eps^{self.n})"

    # JSON -------------------------------------------------------------
    def to_json(self) -> dict:
        if self.rational:
            out = {"kind": "q"}
            if self.p is not None:
                out["p"] = self.p
            return out
        return {"kind": self.kind, "p": self.p, "a": self.a, "n": self.n}

    @classmethod
    def from_json(cls, obj: dict) -> "RingSpec":
        kind = obj.get("kind", "eps")
        if kind in ("q", "rationals"):
            return cls.rationals(obj.get("p"))
        return cls(p=int(obj["p"]), a=int(obj.get("a", 1)), n=int(obj.get("n", 1)))

    @classmethod
    def parse(cls, text: str) -> "RingSpec":
        """Parse the ``p=7,a=1,n=3`` grammar (``q`` or ``q,p=7`` for Q)."""
        fields: dict[str, int] = {}
        rational = False
        for item in filter(None, (s.strip() for s in text.split(","))):
            if item.lower() in ("q", "rationals"):
                rational = True
                continue
            key, sep, val = item.partition("=")
            if not sep or key.strip() not in ("p", "a", "n"):
                raise ValueError(f"bad ring field {item!r}")
            fields[key.strip()] = int(val)
        if rational:
            return cls.rationals(fields.get("p"))
        if "p" not in fields:
            raise ValueError("ring needs p=")
        return cls(p=fields["p"], a=fields.get("a", 1), n=fields.get("n", 1))


def _dtype_for(spec: RingSpec, inner: int = 1):
    if spec.rational:
        return object
    # products of two reduced entries summed `inner * n` times must fit in int64
    bound = spec.modulus**2 * max(inner, 1) * spec.n
    return np.int64 if bound < 2**62 else object


# ---------------------------------------------------------------------------
# Elements
# ---------------------------------------------------------------------------


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(int(x))


def _rational_mod(x: Fraction, p: int, mod: int) -> int:
    if x.denominator % p == 0:
        raise NotPIntegral(f"{x} is not {p}-integral", value=str(x), p=p)
    return x.numerator * pow(x.denominator, -1, mod) % mod


def _poly_mul(x: Sequence[int], y: Sequence[int], n: int, mod: int) -> tuple:
    out = [0] * n
    for i, xi in enumerate(x):
        if xi:
            for j in range(n - i):
                out[i + j] += xi * y[j]
    return tuple(c % mod for c in out)


@dataclass(frozen=True)
class RingElement:
    """An element in canonical form: a reduced Fraction or a coefficient tuple."""

    spec: RingSpec
    value: object

    @classmethod
    def of(cls, spec: RingSpec, x) -> "RingElement":
        """Coerce an int, Fraction, coefficient list or element into ``spec``."""
        if isinstance(x, RingElement):
            return x if x.spec == spec else residue(x, spec)
        if spec.rational:
            return cls(spec, _to_fraction(x))
        mod = spec.modulus
        if isinstance(x, (list, tuple)):
            coeffs = [int(c) % mod for c in x][: spec.n]
            coeffs += [0] * (spec.n - len(coeffs))
            return cls(spec, tuple(coeffs))
        if isinstance(x, (Fraction, str)):
            c = _rational_mod(_to_fraction(x), spec.p, mod)
        else:
            c = int(x) % mod
        return cls(spec, (c,) + (0,) * (spec.n - 1))

    # arithmetic -------------------------------------------------------
    def _coerce(self, other) -> "RingElement":
        return other if isinstance(other, RingElement) else RingElement.of(self.spec, other)

    def __add__(self, other):
        o = self._coerce(other)
        if self.spec.rational:
            return RingElement(self.spec, self.value + o.value)
        m = self.spec.modulus
        return RingElement(self.spec, tuple((x + y) % m for x, y in zip(self.value, o.value)))

    __radd__ = __add__

    def __neg__(self):
        if self.spec.rational:
            return RingElement(self.spec, -self.value)
        m = self.spec.modulus
        return RingElement(self.spec, tuple(-x % m for x in self.value))

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, Matrix):
            return other * self
        o = self._coerce(other)
        if self.spec.rational:
            return RingElement(self.spec, self.value * o.value)
        return RingElement(self.spec, _poly_mul(self.value, o.value, self.spec.n, self.spec.modulus))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out = RingElement.of(self.spec, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def is_zero(self) -> bool:
        if self.spec.rational:
            return self.value == 0
        return not any(self.value)

    def is_unit(self) -> bool:
        if self.spec.rational:
            return self.value != 0
        return self.value[0] % self.spec.p != 0

    def inverse(self) -> "RingElement":
        if not self.is_unit():
            raise NotInvertible(f"{self} is not a unit")
        if self.spec.rational:
            return RingElement(self.spec, 1 / self.value)
        n, mod = self.spec.n, self.spec.modulus
        c0inv = pow(self.value[0], -1, mod)
        # geometric series for the nilpotent eps part
        u = RingElement.of(self.spec, c0inv)
        t = RingElement.of(self.spec, 1) - self * u
        out, term = RingElement.of(self.spec, 1), RingElement.of(self.spec, 1)
        for _ in range(n):
            term = term * t
            out = out + term
        return u * out

    def __truediv__(self, other):
        return self * self._coerce(other).inverse()

    def __eq__(self, other):
        if isinstance(other, RingElement):
            return self.spec == other.spec and self.value == other.value
        try:
            return self == RingElement.of(self.spec, other)
        except (DomainError, ValueError, TypeError):
            return False

    def __hash__(self):
        return hash((self.spec, self.value))

    def constant(self) -> int:
        """Constant coefficient (finite rings only)."""
        return self.value[0]

    def to_json(self):
        if self.spec.rational:
            v = self.value
            return v.numerator if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
        return self.value[0] if self.spec.n == 1 else list(self.value)

    def __repr__(self):
        return f"RingElement({self.to_json()!r} in {self.spec})"


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------


def _conv(A: np.ndarray, B: np.ndarray, spec: RingSpec) -> np.ndarray:
    """Truncated eps-convolution of coefficient stacks."""
    if spec.rational:
        return np.array([A[0] @ B[0]], dtype=object)
    n, mod = spec.n, spec.modulus
    dt = _dtype_for(spec, A.shape[2])
    A = A.astype(dt, copy=False)
    B = B.astype(dt, copy=False)
    out = np.zeros((n, A.shape[1], B.shape[2]), dtype=dt)
    nzA = [i for i in range(n) if A[i].any()]
    nzB = [j for j in range(n) if B[j].any()]
    for i in nzA:
        for j in nzB:
            if i + j < n:
                out[i + j] = (out[i + j] + A[i] @ B[j]) % mod
    return out


@dataclass(frozen=True, eq=False)
class Matrix:
    """A matrix over a :class:`RingSpec` (immutable)."""

    spec: RingSpec
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.data.setflags(write=False)

    # constructors -----------------------------------------------------
    @classmethod
    def _wrap(cls, spec: RingSpec, data: np.ndarray) -> "Matrix":
        if not spec.rational:
            data = data % spec.modulus
            if data.dtype == object and _dtype_for(spec) is np.int64:
                data = data.astype(np.int64)
        return cls(spec, data)

    @classmethod
    def zeros(cls, spec: RingSpec, rows: int, cols: int | None = None) -> "Matrix":
        cols = rows if cols is None else cols
        if spec.rational:
            data = np.empty((1, rows, cols), dtype=object)
            data[...] = Fraction(0)
            return cls(spec, data)
        return cls(spec, np.zeros((spec.n, rows, cols), dtype=_dtype_for(spec)))

    @classmethod
    def identity(cls, spec: RingSpec, m: int) -> "Matrix":
        return cls.from_int(spec, np.eye(m, dtype=np.int64))

    @classmethod
    def from_int(cls, spec: RingSpec, arr) -> "Matrix":
        """Embed an integer (or Fraction) 2-D array as constant entries."""
        arr = np.asarray(arr, dtype=object)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        rows, cols = arr.shape
        if spec.rational:
            data = np.empty((1, rows, cols), dtype=object)
            for i in range(rows):
                for j in range(cols):
                    data[0, i, j] = _to_fraction(arr[i, j])
            return cls(spec, data)
        data = np.zeros((spec.n, rows, cols), dtype=object)
        mod = spec.modulus
        for i in range(rows):
            for j in range(cols):
                x = arr[i, j]
                if isinstance(x, (Fraction, str)):
                    data[0, i, j] = _rational_mod(_to_fraction(x), spec.p, mod)
                else:
                    data[0, i, j] = int(x) % mod
        return cls._wrap(spec, data)

    @classmethod
    def from_coeffs(cls, spec: RingSpec, coeffs) -> "Matrix":
        """Build from an integer array of shape ``(k, rows, cols)``, ``k <= n``."""
        coeffs = np.asarray(coeffs)
        data = np.zeros((spec.n,) + coeffs.shape[1:], dtype=object)
        k = min(spec.n, coeffs.shape[0])
        data[:k] = coeffs[:k].astype(object)
        return cls._wrap(spec, data)

    @classmethod
    def from_rows(cls, spec: RingSpec, rows) -> "Matrix":
        """Build from nested lists whose entries are ints, fractions or coefficient lists."""
        rows = [list(r) for r in rows]
        r = len(rows)
        c = len(rows[0]) if r else 0
        if spec.rational:
            return cls.from_int(spec, np.array(rows, dtype=object).reshape(r, c))
        data = np.zeros((spec.n, r, c), dtype=object)
        for i, row in enumerate(rows):
            if len(row) != c:
                raise ValueError("ragged matrix")
            for j, x in enumerate(row):
                data[:, i, j] = RingElement.of(spec, x).value
        return cls._wrap(spec, data)

    @classmethod
    def diag(cls, entries: Sequence[RingElement]) -> "Matrix":
        spec = entries[0].spec
        m = len(entries)
        out = Matrix.zeros(spec, m).data.copy()
        for i, e in enumerate(entries):
            if spec.rational:
                out[0, i, i] = e.value
            else:
                out[:, i, i] = e.value
        return cls._wrap(spec, out)

    # shape ------------------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]

    @property
    def rows(self) -> int:
        return self.data.shape[1]

    @property
    def cols(self) -> int:
        return self.data.shape[2]

    def coeff(self, k: int = 0) -> np.ndarray:
        """The eps^k coefficient matrix (a copy)."""
        return np.array(self.data[k])

    def entry(self, i: int, j: int) -> RingElement:
        if self.spec.rational:
            return RingElement(self.spec, self.data[0, i, j])
        return RingElement(self.spec, tuple(int(x) for x in self.data[:, i, j]))

    # arithmetic -------------------------------------------------------
    def _check(self, other: "Matrix"):
        if not isinstance(other, Matrix):
            raise TypeError("expected a Matrix")
        if other.spec != self.spec:
            raise ValueError(f"ring mismatch: {self.spec} vs {other.spec}")

    def __add__(self, other: "Matrix") -> "Matrix":
        self._check(other)
        return Matrix._wrap(self.spec, self.data + other.data)

    def __sub__(self, other: "Matrix") -> "Matrix":
        self._check(other)
        return Matrix._wrap(self.spec, self.data - other.data)

    def __neg__(self) -> "Matrix":
        return Matrix._wrap(self.spec, -self.data)

    def __matmul__(self, other: "Matrix") -> "Matrix":
        self._check(other)
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        return Matrix._wrap(self.spec, _conv(self.data, other.data, self.spec))

    def __mul__(self, scalar) -> "Matrix":
        if isinstance(scalar, Matrix):
            raise TypeError("use @ for matrix products")
        s = RingElement.of(self.spec, scalar)
        if self.spec.rational:
            return Matrix(self.spec, self.data * s.value)
        n = self.spec.n
        out = np.zeros(self.data.shape, dtype=object)
        for i, si in enumerate(s.value):
            if si:
                out[i:] += si * self.data[: n - i].astype(object)
        return Matrix._wrap(self.spec, out)

    __rmul__ = __mul__

    @property
    def T(self) -> "Matrix":
        return Matrix(self.spec, np.ascontiguousarray(self.data.transpose(0, 2, 1)))

    def __pow__(self, k: int) -> "Matrix":
        if k < 0:
            return self.inverse() ** (-k)
        out = Matrix.identity(self.spec, self.rows)
        base = self
        while k:
            if k & 1:
                out = out @ base
            base = base @ base
            k >>= 1
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, Matrix) or other.spec != self.spec:
            return False
        return self.shape == other.shape and bool(np.all(self.data == other.data))

    def __hash__(self):
        return hash((self.spec, self.shape, tuple(np.asarray(self.data, dtype=object).ravel().tolist())))

    def is_zero(self) -> bool:
        if self.spec.rational:
            return all(x == 0 for x in self.data.ravel())
        return not self.data.any()

    def block(self, rows: slice, cols: slice) -> "Matrix":
        return Matrix(self.spec, np.array(self.data[:, rows, cols]))

    def inverse(self) -> "Matrix":
        if self.rows != self.cols:
            raise NotInvertible("non-square matrix")
        if self.spec.rational:
            inv = _inverse_q(self.data[0])
            return Matrix(self.spec, inv[None])
        p = self.spec.p
        res = np.asarray(self.data[0] % p, dtype=np.int64)
        X0 = inverse_mod_p(res, p)
        if X0 is None:
            raise NotInvertible("matrix is singular modulo p")
        X = Matrix.from_int(self.spec, X0)
        eye = Matrix.identity(self.spec, self.rows)
        # Newton iteration doubles the precision each round
        for _ in range(self.spec.length + 1):
            E = self @ X
            if E == eye:
                return X
            X = X @ (eye * 2 - E)
        raise AssertionError("Newton inversion did not converge")  # pragma: no cover

    def residue(self, target: RingSpec) -> "Matrix":
        return residue(self, target)

    def lift(self, target: RingSpec) -> "Matrix":
        """Embed into a larger ring of the tower using canonical digit lifts."""
        if self.spec.rational or target.rational or target.p != self.spec.p:
            raise UnreachableTarget(f"cannot lift {self.spec} to {target}")
        if target.a < self.spec.a or target.n < self.spec.n:
            raise UnreachableTarget(f"{target} is smaller than {self.spec}")
        return Matrix.from_coeffs(target, self.data.astype(object))

    # serialization ----------------------------------------------------
    def to_json(self) -> list:
        r, c = self.shape
        return [[self.entry(i, j).to_json() for j in range(c)] for i in range(r)]

    @classmethod
    def from_json(cls, spec: RingSpec, obj) -> "Matrix":
        return cls.from_rows(spec, obj)

    def __repr__(self):
        return f"Matrix({self.to_json()!r} over {self.spec})"


def _inverse_q(A: np.ndarray) -> np.ndarray:
    m = A.shape[0]
    M = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(m)] for i, row in enumerate(A)]
    for c in range(m):
        piv = next((r for r in range(c, m) if M[r][c] != 0), None)
        if piv is None:
            raise NotInvertible("singular rational matrix")
        M[c], M[piv] = M[piv], M[c]
        inv = 1 / M[c][c]
        M[c] = [x * inv for x in M[c]]
        for r in range(m):
            if r != c and M[r][c] != 0:
                f = M[r][c]
                M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    out = np.empty((m, m), dtype=object)
    for i in range(m):
        for j in range(m):
            out[i, j] = M[i][m + j]
    return out


# ---------------------------------------------------------------------------
# Residue maps
# ---------------------------------------------------------------------------


def residue(x, target: RingSpec):
    """Reduce an element or matrix down the tower to ``target``."""
    src = x.spec
    if src == target:
        return x
    if target.rational:
        raise UnreachableTarget(f"cannot map {src} to {target}", source=src.to_json(), target=target.to_json())
    if src.rational:
        if src.p is not None and src.p != target.p:
            raise UnreachableTarget(f"cannot map {src} to {target}", source=src.to_json(), target=target.to_json())
        if isinstance(x, RingElement):
            return RingElement.of(target, x.value)
        return Matrix.from_int(target, x.data[0])
    if src.p != target.p or target.a > src.a or target.n > src.n:
        raise UnreachableTarget(f"cannot map {src} to {target}", source=src.to_json(), target=target.to_json())
    if isinstance(x, RingElement):
        return RingElement.of(target, list(x.value[: target.n]))
    return Matrix.from_coeffs(target, x.data[: target.n])


# ---------------------------------------------------------------------------
# Square roots
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoRoot:
    """Returned (not raised) when a unit has no square root."""

    value: RingElement

    def to_json(self) -> dict:
        return {"result": "NoRoot", "value": self.value.to_json()}


def _tonelli_shanks(c: int, p: int) -> int | None:
    c %= p
    if pow(c, (p - 1) // 2, p) != 1:
        return None
    q, s = p - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while pow(z, (p - 1) // 2, p) != p - 1:
        z += 1
    m, cc, t, r = s, pow(z, q, p), pow(c, q, p), pow(c, (q + 1) // 2, p)
    while t != 1:
        i, t2 = 0, t
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(cc, 1 << (m - i - 1), p)
        m, cc, t, r = i, b * b % p, t * b * b % p, r * b % p
    return min(r, p - r)


def sqrt_unit(c: RingElement) -> RingElement | NoRoot:
    """Square root of a unit in a finite ring of the tower.

    The residue-level root is the smaller representative in ``[0, p)``;
    Newton steps ``r <- (r + c/r)/2`` then lift it exactly.
    """
    spec = c.spec
    if spec.rational:
        raise ValueError("sqrt_unit works over finite rings")
    if not c.is_unit():
        raise NotInvertible("sqrt_unit expects a unit")
    r0 = _tonelli_shanks(c.constant(), spec.p)
    if r0 is None:
        return NoRoot(c)
    r = RingElement.of(spec, r0)
    half = RingElement.of(spec, 2).inverse()
    for _ in range(spec.length + 1):
        if r * r == c:
            return r
        r = (r + c / r) * half
    raise AssertionError("Hensel lifting did not converge")  # pragma: no cover


# ---------------------------------------------------------------------------
# Field linear algebra (numpy over F_p, Fractions over Q)
# ---------------------------------------------------------------------------


def rref_mod_p(M: np.ndarray, p: int, ncols: int | None = None) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over F_p, pivoting only in the first ``ncols`` columns."""
    dt = np.int64 if p < 2**31 else object
    M = np.array(M, dtype=dt) % p
    rows = M.shape[0]
    ncols = M.shape[1] if ncols is None else ncols
    r = 0
    pivots: list[int] = []
    for c in range(ncols):
        if r == rows:
            break
        nz = np.flatnonzero(M[r:, c])
        if nz.size == 0:
            continue
        i = r + int(nz[0])
        if i != r:
            M[[r, i]] = M[[i, r]]
        inv = pow(int(M[r, c]), -1, p)
        M[r] = (M[r] * inv) % p
        col = M[:, c].copy()
        col[r] = 0
        nzr = np.flatnonzero(col)
        if nzr.size:
            M[nzr] = (M[nzr] - np.outer(col[nzr], M[r])) % p
        pivots.append(c)
        r += 1
    return M, pivots


def rank_mod_p(M: np.ndarray, p: int) -> int:
    return len(rref_mod_p(M, p)[1])


def nullspace_mod_p(M: np.ndarray, p: int) -> np.ndarray:
    """Rows form a basis of ``{x : M x = 0}``."""
    M = np.asarray(M)
    cols = M.shape[1]
    R, piv = rref_mod_p(M, p)
    free = [j for j in range(cols) if j not in set(piv)]
    out = np.zeros((len(free), cols), dtype=R.dtype)
    for k, j in enumerate(free):
        out[k, j] = 1
        for i, pc in enumerate(piv):
            out[k, pc] = (-R[i, j]) % p
    return out


def inverse_mod_p(M: np.ndarray, p: int) -> np.ndarray | None:
    m = M.shape[0]
    R, piv = rref_mod_p(np.hstack([np.asarray(M) % p, np.eye(m, dtype=np.int64)]), p, m)
    if len(piv) < m:
        return None
    return R[:, m:]


class PreparedSystem:
    """Row reduction of ``A`` over F_p cached for many right-hand sides.

    Stores ``T`` with ``T @ A = R`` in reduced echelon form, so solving
    ``A x = b`` costs one matrix-vector product.
    """

    def __init__(self, A: np.ndarray, p: int):
        A = np.asarray(A, dtype=np.int64) % p
        self.p = p
        self.A = A
        rows, cols = A.shape
        aug = np.hstack([A, np.eye(rows, dtype=np.int64)])
        R, piv = rref_mod_p(aug, p, cols)
        self.R = R[:, :cols]
        self.T = R[:, cols:]
        self.pivots = piv
        self.rank = len(piv)
        self.cols = cols
        self._kernel = None

    @property
    def kernel(self) -> np.ndarray:
        if self._kernel is None:
            free = [j for j in range(self.cols) if j not in set(self.pivots)]
            out = np.zeros((len(free), self.cols), dtype=np.int64)
            for k, j in enumerate(free):
                out[k, j] = 1
                for i, pc in enumerate(self.pivots):
                    out[k, pc] = (-self.R[i, j]) % self.p
            self._kernel = out
        return self._kernel

    @property
    def cokernel(self) -> np.ndarray:
        """Rows ``f`` with ``f @ A = 0`` spanning the left null space."""
        return self.T[self.rank:]

    def solve(self, b: np.ndarray) -> tuple[np.ndarray | None, np.ndarray | None]:
        """Return ``(x, None)`` or ``(None, f)`` with ``f A = 0`` and ``f b != 0``."""
        p = self.p
        c = (self.T @ (np.asarray(b, dtype=np.int64) % p)) % p
        bad = np.flatnonzero(c[self.rank:])
        if bad.size:
            return None, self.T[self.rank + int(bad[0])].copy()
        x = np.zeros(self.cols, dtype=np.int64)
        for i, pc in enumerate(self.pivots):
            x[pc] = c[i]
        return x, None


def _rref_q(M: list[list[Fraction]], ncols: int) -> tuple[list[list[Fraction]], list[int]]:
    M = [list(r) for r in M]
    rows = len(M)
    r = 0
    pivots = []
    for c in range(ncols):
        if r == rows:
            break
        piv = next((i for i in range(r, rows) if M[i][c] != 0), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = 1 / M[r][c]
        M[r] = [x * inv for x in M[r]]
        for i in range(rows):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [x - f * y for x, y in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
    return M, pivots


def rank_q(M) -> int:
    M = [[Fraction(x) for x in row] for row in np.asarray(M, dtype=object)]
    if not M:
        return 0
    return len(_rref_q(M, len(M[0]))[1])


def nullspace_q(M) -> list[list[Fraction]]:
    M = [[Fraction(x) for x in row] for row in np.asarray(M, dtype=object)]
    cols = len(M[0])
    R, piv = _rref_q(M, cols)
    free = [j for j in range(cols) if j not in set(piv)]
    out = []
    for j in free:
        v = [Fraction(0)] * cols
        v[j] = Fraction(1)
        for i, pc in enumerate(piv):
            v[pc] = -R[i][j]
        out.append(v)
    return out


@dataclass(frozen=True)
class LinearSolution:
    """Outcome of :func:`solve_linear`.

    Exactly one of ``solution`` / ``certificate`` is set.  ``certificate`` is a
    row ``f`` with ``f A = 0`` and ``f b != 0``.
    """

    solution: Matrix | None
    kernel: list[Matrix]
    rank: int
    certificate: Matrix | None = None

    @property
    def solvable(self) -> bool:
        return self.solution is not None


def solve_linear(A: Matrix, b: Matrix) -> LinearSolution:
    """Solve ``A x = b`` over Q or F_p (``b`` a single column)."""
    spec = A.spec
    if not spec.is_field:
        raise ValueError(f"solve_linear needs a field, got {spec}")
    if b.spec != spec or b.rows != A.rows or b.cols != 1:
        raise ValueError("b must be a column over the same ring")
    rows, cols = A.shape
    if spec.rational:
        aug = [
            [Fraction(x) for x in A.data[0, i]] + [Fraction(b.data[0, i, 0])] + [Fraction(int(i == k)) for k in range(rows)]
            for i in range(rows)
        ]
        R, piv = _rref_q(aug, cols) if rows else ([], [])
        rank = len(piv)
        kernel = [Matrix.from_int(spec, np.array(v, dtype=object)) for v in nullspace_q(A.data[0])] if rows else [
            Matrix.from_int(spec, np.eye(cols, dtype=np.int64)[:, j]) for j in range(cols)
        ]
        for i in range(rank, rows):
            if R[i][cols] != 0:
                f = np.array([R[i][cols + 1:]], dtype=object)
                return LinearSolution(None, kernel, rank, Matrix.from_int(spec, f))
        x = [Fraction(0)] * cols
        for i, pc in enumerate(piv):
            x[pc] = R[i][cols]
        return LinearSolution(Matrix.from_int(spec, np.array(x, dtype=object)), kernel, rank)
    p = spec.p
    ps = PreparedSystem(A.data[0], p)
    x, f = ps.solve(b.data[0, :, 0])
    kernel = [Matrix.from_int(spec, v) for v in ps.kernel]
    if x is None:
        return LinearSolution(None, kernel, ps.rank, Matrix.from_int(spec, f.reshape(1, -1)))
    return LinearSolution(Matrix.from_int(spec, x), kernel, ps.rank)


# ---------------------------------------------------------------------------
# Truncated (Artinian) linear solving
# ---------------------------------------------------------------------------


def _smith_chain(M: np.ndarray, p: int, a: int):
    """Diagonalize ``M`` over the chain ring Z/p^a.

    Returns ``(U, V, vals)`` with ``U M V`` diagonal, the i-th diagonal entry
    equal to ``p^vals[i]`` for ``i < len(vals)`` and all other entries zero.
    """
    mod = p**a
    M = np.array(M, dtype=object) % mod
    r, c = M.shape
    U = np.eye(r, dtype=np.int64).astype(object)
    V = np.eye(c, dtype=np.int64).astype(object)
    vals: list[int] = []
    k = 0
    while k < min(r, c):
        best = None
        for i in range(k, r):
            for j in range(k, c):
                if M[i, j]:
                    v = valuation(M[i, j], p, a)
                    if best is None or v < best[0]:
                        best = (v, i, j)
            if best is not None and best[0] == 0:
                break
        if best is None:
            break
        v, i, j = best
        M[[k, i]] = M[[i, k]]
        U[[k, i]] = U[[i, k]]
        M[:, [k, j]] = M[:, [j, k]]
        V[:, [k, j]] = V[:, [j, k]]
        unit_inv = pow(M[k, k] // p**v, -1, mod)
        M[k] = M[k] * unit_inv % mod
        U[k] = U[k] * unit_inv % mod
        for i2 in range(r):
            if i2 != k and M[i2, k]:
                f = M[i2, k] // p**v
                M[i2] = (M[i2] - f * M[k]) % mod
                U[i2] = (U[i2] - f * U[k]) % mod
        for j2 in range(c):
            if j2 != k and M[k, j2]:
                f = M[k, j2] // p**v
                M[:, j2] = (M[:, j2] - f * M[:, k]) % mod
                V[:, j2] = (V[:, j2] - f * V[:, k]) % mod
        vals.append(v)
        k += 1
    return U, V, vals


def _solve_chain(A: np.ndarray, b: np.ndarray, p: int, a: int):
    """Solve over Z/p^a. Returns ``(x, kernel_generators)`` or ``(None, f)``."""
    mod = p**a
    U, V, vals = _smith_chain(A, p, a)
    c = (U.dot(np.array(b, dtype=object) % mod)) % mod
    rank = len(vals)
    for i in range(len(c)):
        vi = vals[i] if i < rank else a
        if valuation(int(c[i]), p, a) < vi:
            return None, (p ** (a - vi) * U[i]) % mod
    y = np.zeros(A.shape[1], dtype=object)
    for i in range(rank):
        y[i] = (int(c[i]) // p ** vals[i]) % mod
    x = V.dot(y) % mod
    gens = [(V[:, i] * p ** (a - vals[i])) % mod for i in range(rank) if vals[i] > 0]
    gens += [V[:, j] % mod for j in range(rank, A.shape[1])]
    return x, gens


def _toeplitz(A: Matrix, k: int) -> np.ndarray:
    """Expanded Z/p^a matrix of ``x -> A x`` on eps-degrees ``< k``."""
    r, c = A.shape
    out = np.zeros((k * r, k * c), dtype=object)
    for i in range(k):
        for j in range(i + 1):
            out[i * r:(i + 1) * r, j * c:(j + 1) * c] = A.data[i - j]
    return out


@dataclass(frozen=True)
class TruncSolution:
    solution: Matrix
    kernel: list[Matrix]


@dataclass(frozen=True)
class FirstObstructedDegree:
    """The lowest filtration degree at which ``A x = b`` has no solution.

    ``degree = eps_degree * a + p_degree`` in the lexicographic filtration.
    ``system`` and ``certificate`` live over Z/p^a on the expanded
    eps-coefficient system; over F_p[eps] this is a field system.
    """

    degree: int
    eps_degree: int
    p_degree: int
    system_A: np.ndarray
    system_b: np.ndarray
    certificate: np.ndarray
    modulus: int

    def verify(self) -> bool:
        f = np.array(self.certificate, dtype=object)
        fa = f.dot(np.array(self.system_A, dtype=object)) % self.modulus
        fb = int(f.dot(np.array(self.system_b, dtype=object))) % self.modulus
        return not any(fa) and fb != 0

    def to_json(self) -> dict:
        return {
            "result": "FirstObstructedDegree",
            "degree": self.degree,
            "eps_degree": self.eps_degree,
            "p_degree": self.p_degree,
            "modulus": self.modulus,
            "A": [[int(x) for x in row] for row in self.system_A],
            "b": [int(x) for x in self.system_b],
            "f": [int(x) for x in self.certificate],
        }


def solve_linear_trunc(A: Matrix, b: Matrix) -> TruncSolution | FirstObstructedDegree:
    """Solve ``A x = b`` over ``(Z/p^a)[eps]/(eps^n)`` degree by degree.

    Degrees run lexicographically (eps-degree outer, p-degree inner).  The
    first degree whose truncated system is inconsistent is reported with a
    left-null certificate.
    """
    spec = A.spec
    if spec.rational:
        raise ValueError("solve_linear_trunc works over finite rings")
    if b.spec != spec or b.rows != A.rows or b.cols != 1:
        raise ValueError("b must be a column over the same ring")
    p, a, n = spec.p, spec.a, spec.n
    mod = spec.modulus
    r, c = A.shape
    for k in range(n):
        T = _toeplitz(A, k + 1)
        rhs = np.concatenate([b.data[i, :, 0].astype(object) for i in range(k + 1)])
        for l in range(a):
            scale = np.ones(len(rhs), dtype=object)
            scale[k * r:] = p ** (a - l - 1)
            Ts = (T * scale[:, None]) % mod
            bs = (rhs * scale) % mod
            x, f = _solve_chain(Ts, bs, p, a)
            if x is None:
                # express the certificate against the unscaled truncated system
                cert = (f * scale) % mod
                return FirstObstructedDegree(
                    spec.digit_index(k, l), k, l, T % mod, rhs % mod, cert, mod
                )
    T = _toeplitz(A, n)
    rhs = np.concatenate([b.data[i, :, 0].astype(object) for i in range(n)])
    x, gens = _solve_chain(T, rhs, p, a)
    sol = Matrix.from_coeffs(spec, np.array(x, dtype=object).reshape(n, c, 1))
    kernel = [Matrix.from_coeffs(spec, np.array(g, dtype=object).reshape(n, c, 1)) for g in gens]
    return TruncSolution(sol, kernel)


# ---------------------------------------------------------------------------
# Filtration digits
# ---------------------------------------------------------------------------


def digit(M: Matrix, d: int) -> np.ndarray:
    """F_p digit of ``M`` at filtration degree ``d``.

    Assumes all lower digits of ``M`` vanish (``M`` lies in the d-th ideal).
    """
    k, l = M.spec.digit_pos(d)
    p = M.spec.p
    return (np.asarray(M.data[k], dtype=object) // p**l % p).astype(np.int64)


def lower_digits_vanish(M: Matrix, d: int) -> bool:
    k, l = M.spec.digit_pos(d)
    p = M.spec.p
    if any(M.data[i].any() for i in range(k)):
        return False
    return not np.any(np.asarray(M.data[k], dtype=object) % p**l)


def from_digit(spec: RingSpec, d: int, X: np.ndarray) -> Matrix:
    """The matrix ``pi_d * X`` where ``pi_d = eps^k p^l``."""
    k, l = spec.digit_pos(d)
    X = np.asarray(X, dtype=object) % spec.p
    data = np.zeros((spec.n,) + X.shape, dtype=object)
    data[k] = X * spec.p**l
    return Matrix._wrap(spec, data)


def scalar_digit(x: RingElement, d: int) -> int:
    k, l = x.spec.digit_pos(d)
    return x.value[k] // x.spec.p**l % x.spec.p


def scalar_from_digit(spec: RingSpec, d: int, c: int) -> RingElement:
    k, l = spec.digit_pos(d)
    coeffs = [0] * spec.n
    coeffs[k] = (c % spec.p) * spec.p**l
    return RingElement.of(spec, coeffs)


def field_array(M: Matrix) -> np.ndarray:
    """Entries of a matrix over F_p as an int64 array."""
    if not M.spec.is_field or M.spec.rational:
        raise ValueError("expected a prime-field matrix")
    return np.asarray(M.data[0], dtype=np.int64)
