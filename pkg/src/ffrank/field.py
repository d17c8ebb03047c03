"""Exact arithmetic in GF(q) for prime and prime-power q.

Elements are plain integers in ``[0, q)``.  For q = p^m with m > 1 an element
packs the coefficients of a polynomial of degree < m in base p, so ``c0 + c1*p
+ c2*p**2 + ...`` stands for ``c0 + c1*x + c2*x**2 + ...`` reduced modulo the
field polynomial.  Multiplication and inversion go through log/antilog tables.

All arithmetic methods on :class:`GF` accept Python ints or integer numpy
arrays (broadcasting applies) and return the same kind.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

MAX_ORDER = 1 << 16

Poly = tuple  # coefficients over GF(p), lowest degree first


class CapExceeded(RuntimeError):
    """A computation would exceed one of the package's enumeration or retry caps."""


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def prime_power(q: int) -> tuple[int, int]:
    """Split q into (p, m) with q = p**m, or raise ValueError."""
    if q < 2:
        raise ValueError(f"q={q} is not a prime power")
    p = next(d for d in range(2, q + 1) if q % d == 0)
    m, rest = 0, q
    while rest % p == 0:
        rest //= p
        m += 1
    if rest != 1:
        raise ValueError(f"q={q} is not a prime power")
    return p, m


def _prime_factors(n: int) -> list[int]:
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


# -- polynomials over GF(p) ----------------------------------------------------

def _trim(a: list[int]) -> list[int]:
    while a and a[-1] == 0:
        a.pop()
    return a


def poly_mod(a: Sequence[int], f: Sequence[int], p: int) -> list[int]:
    a = _trim(list(a))
    f = _trim(list(f))
    if not f:
        raise ZeroDivisionError("polynomial modulus is zero")
    inv_lead = pow(f[-1], p - 2, p)
    while len(a) >= len(f):
        c = a[-1] * inv_lead % p
        shift = len(a) - len(f)
        for i, fc in enumerate(f):
            a[shift + i] = (a[shift + i] - c * fc) % p
        _trim(a)
    return a


def poly_mulmod(a: Sequence[int], b: Sequence[int], f: Sequence[int], p: int) -> list[int]:
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] = (out[i + j] + ai * bj) % p
    return poly_mod(out, f, p)


def poly_powmod(a: Sequence[int], e: int, f: Sequence[int], p: int) -> list[int]:
    result, base = [1], poly_mod(a, f, p)
    while e:
        if e & 1:
            result = poly_mulmod(result, base, f, p)
        base = poly_mulmod(base, base, f, p)
        e >>= 1
    return result


def _monic_polys(deg: int, p: int):
    for c in range(p**deg):
        coeffs = [(c // p**i) % p for i in range(deg)]
        yield coeffs + [1]


def is_irreducible(f: Sequence[int], p: int) -> bool:
    """Trial division by every monic polynomial of degree <= deg(f)/2."""
    f = _trim(list(f))
    deg = len(f) - 1
    if deg < 1:
        return False
    for d in range(1, deg // 2 + 1):
        for g in _monic_polys(d, p):
            if not poly_mod(f, g, p):
                return False
    return True


def _has_full_order(g: Sequence[int], f: Sequence[int], p: int, order: int) -> bool:
    if poly_powmod(g, order, f, p) != [1]:
        return False
    return all(poly_powmod(g, order // ell, f, p) != [1] for ell in _prime_factors(order))


def _int_to_poly(v: int, p: int, m: int) -> list[int]:
    return [(v // p**i) % p for i in range(m)]


def _poly_to_int(c: Sequence[int], p: int) -> int:
    return sum(int(ci) * p**i for i, ci in enumerate(c))


def default_modulus(p: int, m: int) -> Poly:
    """Smallest monic primitive polynomial of degree m (packed-integer order).

    For GF(4), GF(8), GF(16) and GF(256) this coincides with the Conway
    polynomial (x^2+x+1, x^3+x+1, x^4+x+1, x^8+x^4+x^3+x^2+1).
    """
    order = p**m - 1
    for f in _monic_polys(m, p):
        if f[0] == 0:
            continue
        if is_irreducible(f, p) and _has_full_order([0, 1], f, p, order):
            return tuple(f)
    raise RuntimeError(f"no primitive polynomial of degree {m} over GF({p})")


def _coerce_modulus(modulus, p: int, m: int) -> Poly:
    if isinstance(modulus, (int, np.integer)):
        coeffs = []
        v = int(modulus)
        while v:
            coeffs.append(v % p)
            v //= p
    else:
        coeffs = [int(c) % p for c in modulus]
    coeffs = _trim(coeffs)
    if len(coeffs) != m + 1:
        raise ValueError(f"modulus must have degree {m}, got degree {len(coeffs) - 1}")
    if coeffs[-1] != 1:
        inv = pow(coeffs[-1], p - 2, p)
        coeffs = [c * inv % p for c in coeffs]
    return tuple(coeffs)


# -- the field -------------------------------------------------------------------

ArrayLike = Union[int, np.ndarray]


@dataclass(frozen=True, eq=False)
class GF:
    """The finite field GF(p**m).  Build with :func:`make_field`."""

    p: int
    m: int
    modulus: Poly
    exp: np.ndarray = dc_field(repr=False)
    log: np.ndarray = dc_field(repr=False)
    inv_table: np.ndarray = dc_field(repr=False)
    neg_table: np.ndarray = dc_field(repr=False)
    _digits: np.ndarray | None = dc_field(default=None, repr=False)
    _add_table: np.ndarray | None = dc_field(default=None, repr=False)

    @property
    def q(self) -> int:
        return self.p**self.m

    @property
    def is_prime_field(self) -> bool:
        return self.m == 1

    def __eq__(self, other):
        return isinstance(other, GF) and (self.p, self.m, self.modulus) == (
            other.p, other.m, other.modulus)

    def __hash__(self):
        return hash((self.p, self.m, self.modulus))

    def __repr__(self):
        if self.m == 1:
            return f"GF({self.p})"
        return f"GF({self.p}^{self.m}, modulus={self.modulus})"

    def __reduce__(self):
        return (make_field, (self.p, self.m, self.modulus))

    def elements(self) -> np.ndarray:
        return np.arange(self.q, dtype=np.int64)

    def check(self, a: ArrayLike) -> None:
        arr = np.asarray(a)
        if arr.size and (arr.min() < 0 or arr.max() >= self.q):
            raise ValueError(f"values outside [0, {self.q}) for {self!r}")

    # vectorised arithmetic ----------------------------------------------------

    def add(self, a: ArrayLike, b: ArrayLike) -> ArrayLike:
        if self.m == 1:
            out = (np.asarray(a, dtype=np.int64) + b) % self.p
        elif self.p == 2:
            out = np.bitwise_xor(np.asarray(a, dtype=np.int64), b)
        elif self._add_table is not None:
            out = self._add_table[a, b]
        else:
            d = (self._digits[a] + self._digits[b]) % self.p
            out = d @ (self.p ** np.arange(self.m, dtype=np.int64))
        return _unwrap(out, a, b)

    def neg(self, a: ArrayLike) -> ArrayLike:
        return _unwrap(self.neg_table[a], a)

    def sub(self, a: ArrayLike, b: ArrayLike) -> ArrayLike:
        if self.m == 1:
            return _unwrap((np.asarray(a, dtype=np.int64) - b) % self.p, a, b)
        if self.p == 2:
            return self.add(a, b)
        return self.add(a, self.neg(b))

    def mul(self, a: ArrayLike, b: ArrayLike) -> ArrayLike:
        if self.m == 1:
            return _unwrap((np.asarray(a, dtype=np.int64) * b) % self.p, a, b)
        a_ = np.asarray(a, dtype=np.int64)
        b_ = np.asarray(b, dtype=np.int64)
        out = self.exp[self.log[a_] + self.log[b_]]
        out = np.where((a_ == 0) | (b_ == 0), 0, out)
        return _unwrap(out, a, b)

    def inv(self, a: ArrayLike) -> ArrayLike:
        if np.any(np.asarray(a) == 0):
            raise ZeroDivisionError("inverse of zero in a finite field")
        return _unwrap(self.inv_table[a], a)

    def div(self, a: ArrayLike, b: ArrayLike) -> ArrayLike:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        a = int(a)
        if a == 0:
            return 1 if e == 0 else 0
        return int(self.exp[(int(self.log[a]) * e) % (self.q - 1)])

    def matmul(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        """Matrix product over the field (supports leading batch dimensions)."""
        A = np.asarray(A, dtype=np.int64)
        B = np.asarray(B, dtype=np.int64)
        if self.m == 1:
            inner = A.shape[-1]
            if inner * (self.p - 1) ** 2 < 2**52:
                out = np.matmul(A.astype(np.float64), B.astype(np.float64))
                return np.rint(out).astype(np.int64) % self.p
            return _int_matmul_mod(A, B, self.p)
        out = None
        for i in range(A.shape[-1]):
            term = self.mul(A[..., :, i:i + 1], B[..., i:i + 1, :])
            out = term if out is None else self.add(out, term)
        if out is None:
            return np.zeros(A.shape[:-1] + B.shape[-1:], dtype=np.int64)
        return out

    def dot(self, a: np.ndarray, b: np.ndarray, axis: int = -1) -> ArrayLike:
        """Sum over ``axis`` of the elementwise product."""
        prod = self.mul(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64))
        return self.sum(prod, axis=axis)

    def sum(self, a: np.ndarray, axis: int = -1) -> ArrayLike:
        a = np.asarray(a, dtype=np.int64)
        if self.m == 1:
            out = a.sum(axis=axis) % self.p
        elif self.p == 2:
            out = np.bitwise_xor.reduce(a, axis=axis)
        else:
            # digits add a trailing axis, so normalise negative axes first
            d = self._digits[a].sum(axis=axis % a.ndim) % self.p
            out = d @ (self.p ** np.arange(self.m, dtype=np.int64))
        return int(out) if np.ndim(out) == 0 else out


def _int_matmul_mod(A: np.ndarray, B: np.ndarray, p: int) -> np.ndarray:
    out = np.zeros(np.broadcast_shapes(A.shape[:-2], B.shape[:-2]) + (A.shape[-2], B.shape[-1]),
                   dtype=np.int64)
    for i in range(A.shape[-1]):
        out = (out + (A[..., :, i:i + 1] * B[..., i:i + 1, :]) % p) % p
    return out


def _unwrap(out, *inputs):
    if all(isinstance(x, (int, np.integer)) for x in inputs):
        return int(out)
    return out


def make_field(p: int, m: int = 1, modulus=None) -> GF:
    """Build GF(p**m).

    ``modulus`` is an irreducible monic polynomial of degree m, given either as
    coefficients (lowest degree first) or packed as an integer in base p
    (so ``0x11d`` for x^8+x^4+x^3+x^2+1 when p = 2).  When omitted the smallest
    primitive polynomial is used, which makes the choice reproducible.  Equal
    arguments return the same cached object.
    """
    if not is_prime(p):
        raise ValueError(f"characteristic {p} is not prime")
    if m < 1:
        raise ValueError("extension degree must be >= 1")
    if p**m > MAX_ORDER:
        raise ValueError(f"q={p**m} exceeds the supported maximum {MAX_ORDER}")
    if m == 1:
        if modulus is not None:
            _coerce_modulus(modulus, p, 1)
        return _build_field(p, 1, (0, 1))
    mod = default_modulus(p, m) if modulus is None else _coerce_modulus(modulus, p, m)
    if not is_irreducible(mod, p):
        raise ValueError(f"modulus {mod} is reducible over GF({p})")
    return _build_field(p, m, tuple(mod))


@lru_cache(maxsize=None)
def _build_field(p: int, m: int, mod: Poly) -> GF:
    q = p**m
    if m == 1:
        g = 1 if p == 2 else next(
            a for a in range(2, p) if _has_full_order([a], [0, 1], p, p - 1))
        exp = np.empty(2 * (q - 1) + 1, dtype=np.int64)
        v = 1
        for i in range(q - 1):
            exp[i] = v
            v = v * g % p
    else:
        if _has_full_order([0, 1], mod, p, q - 1):
            gen = [0, 1]
        else:
            gen = next(_int_to_poly(c, p, m) for c in range(2, q)
                       if _has_full_order(_int_to_poly(c, p, m), mod, p, q - 1))
        exp = np.empty(2 * (q - 1) + 1, dtype=np.int64)
        if gen == [0, 1]:
            _fill_powers_of_x(exp, mod, p, m)
        else:
            cur = [1]
            for i in range(q - 1):
                exp[i] = _poly_to_int(cur, p)
                cur = poly_mulmod(cur, gen, mod, p)
    exp[q - 1:2 * (q - 1)] = exp[:q - 1]
    exp[2 * (q - 1)] = exp[0]
    log = np.zeros(q, dtype=np.int64)
    log[exp[:q - 1]] = np.arange(q - 1, dtype=np.int64)
    inv_table = np.zeros(q, dtype=np.int64)
    nz = np.arange(1, q)
    inv_table[nz] = exp[(q - 1 - log[nz]) % (q - 1)]

    digits = None
    add_table = None
    if m == 1:
        neg = (-np.arange(q, dtype=np.int64)) % p
    else:
        digits = np.array([_int_to_poly(v, p, m) for v in range(q)], dtype=np.int64)
        pw = p ** np.arange(m, dtype=np.int64)
        neg = ((-digits) % p) @ pw
        if p != 2 and q <= 256:
            add_table = ((digits[:, None, :] + digits[None, :, :]) % p) @ pw
    for arr in (exp, log, inv_table, neg):
        arr.setflags(write=False)
    return GF(p=p, m=m, modulus=mod, exp=exp, log=log, inv_table=inv_table,
              neg_table=neg, _digits=digits, _add_table=add_table)


def _fill_powers_of_x(exp: np.ndarray, mod: Poly, p: int, m: int) -> None:
    q = p**m
    if p == 2:
        packed = _poly_to_int(mod, 2)
        v = 1
        for i in range(q - 1):
            exp[i] = v
            v <<= 1
            if v & q:
                v ^= packed
        return
    low = [(-c) % p for c in mod[:m]]  # x^m = -(lower terms)
    cur = [1] + [0] * (m - 1)
    for i in range(q - 1):
        exp[i] = _poly_to_int(cur, p)
        top = cur[-1]
        cur = [0] + cur[:-1]
        if top:
            cur = [(c + top * l) % p for c, l in zip(cur, low)]


@lru_cache(maxsize=None)
def field_for(q: int) -> GF:
    """Field of order q with the default modulus."""
    p, m = prime_power(q)
    return make_field(p, m)


# -- element wrapper -------------------------------------------------------------

@dataclass(frozen=True)
class Elem:
    """A field element bound to its field; operators check that fields match."""

    field: GF
    value: int

    def __post_init__(self):
        if not 0 <= int(self.value) < self.field.q:
            raise ValueError(f"{self.value} is not an element of {self.field!r}")
        object.__setattr__(self, "value", int(self.value))

    def _other(self, other) -> int:
        if isinstance(other, Elem):
            if other.field != self.field:
                raise ValueError(f"field mismatch: {self.field!r} vs {other.field!r}")
            return other.value
        return int(other) % self.field.q if self.field.m == 1 else int(other)

    def __add__(self, other):
        return Elem(self.field, self.field.add(self.value, self._other(other)))

    def __sub__(self, other):
        return Elem(self.field, self.field.sub(self.value, self._other(other)))

    def __mul__(self, other):
        return Elem(self.field, self.field.mul(self.value, self._other(other)))

    def __truediv__(self, other):
        return Elem(self.field, self.field.div(self.value, self._other(other)))

    def __neg__(self):
        return Elem(self.field, self.field.neg(self.value))

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        return Elem(self.field, self.field.pow(self.value, e))

    __radd__ = __add__
    __rmul__ = __mul__

    def inverse(self) -> "Elem":
        return Elem(self.field, self.field.inv(self.value))

    def __int__(self):
        return self.value

    def __bool__(self):
        return self.value != 0


def ff_add(a: Elem, b: Elem) -> Elem:
    return a + b


def ff_mul(a: Elem, b: Elem) -> Elem:
    return a * b


def ff_inv(a: Elem) -> Elem:
    return a.inverse()
