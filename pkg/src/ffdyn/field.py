"""Arithmetic over F_s and the Laurent-tail field F_s((1/X)).

Conventions used throughout the package: a series is written along descending
powers of X, a = sum_{i >= v} a_i X^(-i), so polynomials occupy indices <= 0.
The least index v with a_v != 0 is the valuation and |a| = s^(-v).  Every
series value carries the window of indices on which its coefficients are
actually known (all indices below ``prec``); operations propagate the tightest
window justified by their inputs, and queries that the window cannot decide
raise ``PrecisionError`` instead of guessing.

Field elements are encoded as integers in [0, s).  For prime fields the code
is the residue itself; for extensions it is the base-p digit expansion in a
root of the stored modulus, with multiplication done through discrete-log
tables.
"""

from __future__ import annotations

import math
import re

import numpy as np

from .errors import FieldError, PrecisionError

_MAX_ORDER = 65536

_FIELD_CACHE: dict[tuple[int, int], "FieldSpec"] = {}


def field_spec(p: int, e: int = 1) -> "FieldSpec":
    """Return a cached FieldSpec for F_(p^e)."""
    key = (p, e)
    if key not in _FIELD_CACHE:
        _FIELD_CACHE[key] = FieldSpec(p, e)
    return _FIELD_CACHE[key]


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def _prime_factors(n: int) -> list[int]:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def _polydiv_mod_p(num: list[int], den: list[int], p: int) -> list[int]:
    """Remainder of num by den over F_p; both ascending, den monic."""
    rem = list(num)
    dd = len(den) - 1
    for k in range(len(rem) - 1, dd - 1, -1):
        c = rem[k] % p
        if c:
            for j in range(dd + 1):
                rem[k - dd + j] = (rem[k - dd + j] - c * den[j]) % p
    return [c % p for c in rem[:dd]]


def _smallest_irreducible(p: int, e: int) -> tuple[int, ...]:
    """Monic irreducible of degree e over F_p with the smallest coefficient code.

    Candidates X^e + sum c_i X^i are ordered by sum c_i p^i and checked by
    trial division against every monic polynomial of degree <= e // 2.
    """
    if e == 1:
        return (0, 1)
    divisors = []
    for d in range(1, e // 2 + 1):
        for code in range(p**d):
            low = [(code // p**i) % p for i in range(d)]
            divisors.append(low + [1])
    for code in range(p**e):
        cand = [(code // p**i) % p for i in range(e)] + [1]
        if all(any(_polydiv_mod_p(cand, den, p)) for den in divisors):
            return tuple(cand)
    raise FieldError(f"no irreducible of degree {e} over F_{p}")  # unreachable


class FieldSpec:
    """Parameters and element arithmetic for F_s, s = p^e.

    Elements are integer codes in [0, s).  Scalar methods take and return
    Python ints; the ``*_arr`` methods operate elementwise on numpy int64
    arrays and are the building blocks for the polynomial and series layers.
    """

    __slots__ = (
        "p",
        "e",
        "s",
        "modulus",
        "_log",
        "_antilog",
        "_add_table",
        "_digits",
        "_powers",
    )

    def __init__(self, p: int, e: int = 1):
        if not _is_prime(p):
            raise FieldError(f"p = {p} is not prime")
        if e < 1:
            raise FieldError(f"extension degree must be >= 1, got {e}")
        s = p**e
        if s > _MAX_ORDER:
            raise FieldError(f"field order {s} exceeds the supported cap {_MAX_ORDER}")
        self.p = p
        self.e = e
        self.s = s
        self.modulus = _smallest_irreducible(p, e)
        if e > 1:
            self._digits = np.array(
                [[(c // p**i) % p for i in range(e)] for c in range(s)],
                dtype=np.int64,
            )
            self._powers = np.array([p**i for i in range(e)], dtype=np.int64)
            self._build_log_tables()
            if s <= 1024:
                d = self._digits
                self._add_table = ((d[:, None, :] + d[None, :, :]) % p @ self._powers)
            else:
                self._add_table = None
        else:
            self._digits = None
            self._powers = None
            self._add_table = None
            self._log = None
            self._antilog = None

    # -- extension bootstrap -------------------------------------------------

    def _mul_code_slow(self, a: int, b: int) -> int:
        """Product of two codes by digit convolution and modulus reduction."""
        p, e = self.p, self.e
        da = [(a // p**i) % p for i in range(e)]
        db = [(b // p**i) % p for i in range(e)]
        conv = [0] * (2 * e - 1)
        for i, x in enumerate(da):
            if x:
                for j, y in enumerate(db):
                    conv[i + j] = (conv[i + j] + x * y) % p
        for k in range(len(conv) - 1, e - 1, -1):
            c = conv[k]
            if c:
                conv[k] = 0
                for j in range(e):
                    conv[k - e + j] = (conv[k - e + j] - c * self.modulus[j]) % p
        return sum(conv[i] * p**i for i in range(e))

    def _pow_code_slow(self, a: int, n: int) -> int:
        out, base = 1, a
        while n:
            if n & 1:
                out = self._mul_code_slow(out, base)
            base = self._mul_code_slow(base, base)
            n >>= 1
        return out

    def _build_log_tables(self) -> None:
        order = self.s - 1
        factors = _prime_factors(order)
        gen = None
        for cand in range(2, self.s):
            if all(self._pow_code_slow(cand, order // f) != 1 for f in factors):
                gen = cand
                break
        if gen is None:
            raise FieldError("no multiplicative generator found")  # unreachable
        antilog = np.empty(order, dtype=np.int64)
        cur = 1
        for i in range(order):
            antilog[i] = cur
            cur = self._mul_code_slow(cur, gen)
        log = np.full(self.s, -1, dtype=np.int64)
        log[antilog] = np.arange(order)
        self._antilog = antilog
        self._log = log

    # -- scalar element ops ----------------------------------------------------

    def check(self, a: int) -> int:
        if not 0 <= a < self.s:
            raise FieldError(f"element code {a} outside [0, {self.s})")
        return int(a)

    def add(self, a: int, b: int) -> int:
        if self.e == 1:
            return (a + b) % self.p
        return int(self.add_arr(np.int64(a), np.int64(b)))

    def neg(self, a: int) -> int:
        if self.e == 1:
            return (-a) % self.p
        return int(self.neg_arr(np.int64(a)))

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def mul(self, a: int, b: int) -> int:
        if self.e == 1:
            return (a * b) % self.p
        if a == 0 or b == 0:
            return 0
        return int(self._antilog[(self._log[a] + self._log[b]) % (self.s - 1)])

    def inv(self, a: int) -> int:
        if a == 0:
            raise FieldError("inverse of zero")
        if self.e == 1:
            return pow(a, self.p - 2, self.p)
        return int(self._antilog[(-self._log[a]) % (self.s - 1)])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow_(self, a: int, n: int) -> int:
        if a == 0:
            if n < 0:
                raise FieldError("inverse of zero")
            return 0 if n else 1
        if self.e == 1:
            return pow(a, n % (self.p - 1), self.p) if self.p > 2 else 1
        k = (self._log[a] * n) % (self.s - 1)
        return int(self._antilog[k])

    # -- vectorized element ops ------------------------------------------------

    def add_arr(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.e == 1:
            return (a + b) % self.p
        if self.p == 2:
            return np.bitwise_xor(a, b)
        if self._add_table is not None:
            return self._add_table[a, b]
        d = (self._digits[a] + self._digits[b]) % self.p
        return d @ self._powers

    def neg_arr(self, a: np.ndarray) -> np.ndarray:
        if self.e == 1:
            return (-a) % self.p
        if self.p == 2:
            return np.asarray(a).copy()
        d = (-self._digits[a]) % self.p
        return d @ self._powers

    def sub_arr(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self.add_arr(a, self.neg_arr(b))

    def mul_arr(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.e == 1:
            return (a * b) % self.p
        a = np.asarray(a)
        b = np.asarray(b)
        out = self._antilog[(self._log[a] + self._log[b]) % (self.s - 1)]
        return np.where((a == 0) | (b == 0), 0, out)

    def scale_arr(self, c: int, a: np.ndarray) -> np.ndarray:
        if c == 0:
            return np.zeros_like(a)
        if c == 1:
            return np.asarray(a).copy()
        if self.e == 1:
            return (c * a) % self.p
        return self.mul_arr(np.int64(c), a)

    def sum_arr(self, a: np.ndarray) -> int:
        """Field sum of a 1-D array of codes."""
        if self.e == 1:
            return int(a.sum() % self.p)
        acc = np.asarray(a)
        while acc.size > 1:
            half = (acc.size + 1) // 2
            left = acc[:half]
            right = np.zeros(half, dtype=np.int64)
            right[: acc.size - half] = acc[half:]
            acc = self.add_arr(left, right)
        return int(acc[0]) if acc.size else 0

    def dot(self, a: np.ndarray, b: np.ndarray) -> int:
        if self.e == 1:
            return int((a.astype(np.int64) @ b.astype(np.int64)) % self.p)
        return self.sum_arr(self.mul_arr(a, b))

    def __repr__(self) -> str:
        return f"FieldSpec(p={self.p}, e={self.e})"

    def __eq__(self, other) -> bool:
        return isinstance(other, FieldSpec) and (self.p, self.e) == (other.p, other.e)

    def __hash__(self) -> int:
        return hash((self.p, self.e))


def _trim_poly(coeffs: np.ndarray) -> np.ndarray:
    nz = np.nonzero(coeffs)[0]
    if nz.size == 0:
        return coeffs[:0]
    return coeffs[: nz[-1] + 1]


class Poly:
    """Polynomial in X over a FieldSpec, coefficients ascending by degree."""

    __slots__ = ("field", "coeffs")

    def __init__(self, field: FieldSpec, coeffs):
        arr = np.array(coeffs, dtype=np.int64).reshape(-1)
        if arr.size and ((arr < 0).any() or (arr >= field.s).any()):
            raise FieldError("coefficient code out of range")
        arr = _trim_poly(arr)
        arr.setflags(write=False)
        self.field = field
        self.coeffs = arr

    @classmethod
    def zero(cls, field: FieldSpec) -> "Poly":
        return cls(field, [])

    @classmethod
    def one(cls, field: FieldSpec) -> "Poly":
        return cls(field, [1])

    @classmethod
    def x_power(cls, field: FieldSpec, d: int, c: int = 1) -> "Poly":
        if d < 0:
            raise FieldError("polynomial powers must be >= 0")
        coeffs = [0] * d + [c]
        return cls(field, coeffs)

    @property
    def degree(self) -> int:
        """Degree; -1 for the zero polynomial."""
        return int(self.coeffs.size) - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs.size == 0

    @property
    def leading(self) -> int:
        if self.is_zero:
            raise FieldError("zero polynomial has no leading coefficient")
        return int(self.coeffs[-1])

    def monic(self) -> "Poly":
        if self.is_zero:
            return self
        c = self.field.inv(self.leading)
        return Poly(self.field, self.field.scale_arr(c, self.coeffs))

    def _binop(self, other: "Poly", fn) -> "Poly":
        n = max(self.coeffs.size, other.coeffs.size)
        a = np.zeros(n, dtype=np.int64)
        b = np.zeros(n, dtype=np.int64)
        a[: self.coeffs.size] = self.coeffs
        b[: other.coeffs.size] = other.coeffs
        return Poly(self.field, fn(a, b))

    def __add__(self, other: "Poly") -> "Poly":
        return self._binop(other, self.field.add_arr)

    def __sub__(self, other: "Poly") -> "Poly":
        return self._binop(other, self.field.sub_arr)

    def __neg__(self) -> "Poly":
        return Poly(self.field, self.field.neg_arr(self.coeffs))

    def __mul__(self, other: "Poly") -> "Poly":
        if self.is_zero or other.is_zero:
            return Poly.zero(self.field)
        fs = self.field
        if fs.e == 1:
            conv = np.convolve(self.coeffs, other.coeffs) % fs.p
            return Poly(fs, conv)
        out = np.zeros(self.coeffs.size + other.coeffs.size - 1, dtype=np.int64)
        for i, c in enumerate(self.coeffs):
            if c:
                seg = fs.mul_arr(np.int64(int(c)), other.coeffs)
                out[i : i + other.coeffs.size] = fs.add_arr(
                    out[i : i + other.coeffs.size], seg
                )
        return Poly(fs, out)

    def scale(self, c: int) -> "Poly":
        return Poly(self.field, self.field.scale_arr(c, self.coeffs))

    def __divmod__(self, other: "Poly") -> tuple["Poly", "Poly"]:
        if other.is_zero:
            raise FieldError("polynomial division by zero")
        fs = self.field
        rem = self.coeffs.astype(np.int64).copy()
        dd = other.degree
        lead_inv = fs.inv(other.leading)
        qsize = max(rem.size - dd, 0)
        q = np.zeros(qsize, dtype=np.int64)
        for k in range(rem.size - 1, dd - 1, -1):
            c = int(rem[k])
            if c:
                f = fs.mul(c, lead_inv)
                q[k - dd] = f
                seg = fs.scale_arr(f, other.coeffs)
                rem[k - dd : k + 1] = fs.sub_arr(rem[k - dd : k + 1], seg)
        return Poly(fs, q), Poly(fs, rem[:dd] if dd else rem[:0])

    def __floordiv__(self, other: "Poly") -> "Poly":
        return divmod(self, other)[0]

    def __mod__(self, other: "Poly") -> "Poly":
        return divmod(self, other)[1]

    def coeff(self, d: int) -> int:
        if 0 <= d < self.coeffs.size:
            return int(self.coeffs[d])
        return 0

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Poly)
            and self.field == other.field
            and np.array_equal(self.coeffs, other.coeffs)
        )

    def __hash__(self) -> int:
        return hash((self.field, tuple(int(c) for c in self.coeffs)))

    def __str__(self) -> str:
        pairs = [(d, int(c)) for d, c in enumerate(self.coeffs) if c]
        return _format_terms(pairs)

    def __repr__(self) -> str:
        return f"Poly({self.field.p}^{self.field.e}: {self})"


def poly_gcd(a: Poly, b: Poly) -> Poly:
    """Monic gcd by the Euclidean algorithm."""
    while not b.is_zero:
        a, b = b, a % b
    return a.monic()


def poly_ext_gcd(a: Poly, b: Poly) -> tuple[Poly, Poly, Poly]:
    """(g, u, v) with u*a + v*b = g, g the monic gcd."""
    fs = a.field
    r0, r1 = a, b
    u0, u1 = Poly.one(fs), Poly.zero(fs)
    v0, v1 = Poly.zero(fs), Poly.one(fs)
    while not r1.is_zero:
        q, r = divmod(r0, r1)
        r0, r1 = r1, r
        u0, u1 = u1, u0 - q * u1
        v0, v1 = v1, v0 - q * v1
    if r0.is_zero:
        return r0, u0, v0
    c = fs.inv(r0.leading)
    return r0.monic(), u0.scale(c), v0.scale(c)


class LaurentSeries:
    """Element of F_s((1/X)) known on a coefficient window.

    ``coeffs[j]`` is the coefficient of X^-(v + j); the array is trimmed so
    that, when nonempty, both ends are nonzero.  ``prec`` is the first index
    whose coefficient is unknown (None when every remaining coefficient is
    known to vanish, i.e. the value is exact).
    """

    __slots__ = ("field", "v", "coeffs", "prec")

    def __init__(self, field: FieldSpec, v: int, coeffs, prec: int | None = None):
        arr = np.array(coeffs, dtype=np.int64).reshape(-1)
        if arr.size and ((arr < 0).any() or (arr >= field.s).any()):
            raise FieldError("coefficient code out of range")
        nz = np.nonzero(arr)[0]
        if nz.size:
            lead, last = int(nz[0]), int(nz[-1])
            arr = arr[lead : last + 1]
            v = v + lead
            if prec is not None and v + arr.size > prec:
                raise PrecisionError(
                    f"coefficients listed up to index {v + arr.size - 1} "
                    f"but window ends at {prec}"
                )
        else:
            arr = arr[:0]
            v = 0
        arr.setflags(write=False)
        self.field = field
        self.v = v
        self.coeffs = arr
        self.prec = prec

    # -- constructors ---------------------------------------------------------

    @classmethod
    def zero(cls, field: FieldSpec) -> "LaurentSeries":
        return cls(field, 0, [], None)

    @classmethod
    def zero_window(cls, field: FieldSpec, prec: int) -> "LaurentSeries":
        return cls(field, 0, [], prec)

    @classmethod
    def one(cls, field: FieldSpec) -> "LaurentSeries":
        return cls(field, 0, [1], None)

    @classmethod
    def x_power(cls, field: FieldSpec, k: int, c: int = 1) -> "LaurentSeries":
        """The monomial c * X^k (exact)."""
        return cls(field, -k, [c], None)

    @classmethod
    def from_poly(cls, poly: Poly) -> "LaurentSeries":
        return cls(poly.field, -poly.degree, poly.coeffs[::-1].copy(), None)

    @classmethod
    def from_pairs(
        cls, field: FieldSpec, pairs: dict[int, int], prec: int | None = None
    ) -> "LaurentSeries":
        if not pairs:
            return cls(field, 0, [], prec)
        lo = min(pairs)
        hi = max(pairs)
        arr = np.zeros(hi - lo + 1, dtype=np.int64)
        for i, c in pairs.items():
            arr[i - lo] = c
        return cls(field, lo, arr, prec)

    # -- structure ------------------------------------------------------------

    @property
    def is_exact(self) -> bool:
        return self.prec is None

    @property
    def is_exact_zero(self) -> bool:
        return self.coeffs.size == 0 and self.prec is None

    @property
    def has_leading_term(self) -> bool:
        return self.coeffs.size > 0

    def valuation(self) -> int | float:
        """Least index with nonzero coefficient; +inf for exact zero."""
        if self.coeffs.size:
            return self.v
        if self.prec is None:
            return math.inf
        raise PrecisionError(
            f"series vanishes through index {self.prec - 1}; valuation indeterminate"
        )

    def abs_value(self) -> float:
        """|a| = s^(-v); 0.0 for exact zero."""
        val = self.valuation()
        if val is math.inf:
            return 0.0
        return float(self.field.s) ** (-val)

    def coeff_at(self, i: int) -> int:
        if self.prec is not None and i >= self.prec:
            raise PrecisionError(f"coefficient at index {i} outside window (< {self.prec})")
        j = i - self.v
        if self.coeffs.size and 0 <= j < self.coeffs.size:
            return int(self.coeffs[j])
        return 0

    def window(self, lo: int, hi: int) -> np.ndarray:
        """Dense coefficients for indices lo..hi-1; must lie in the window."""
        if self.prec is not None and hi > self.prec:
            raise PrecisionError(f"window [{lo}, {hi}) exceeds precision {self.prec}")
        out = np.zeros(hi - lo, dtype=np.int64)
        if self.coeffs.size:
            a = max(lo, self.v)
            b = min(hi, self.v + self.coeffs.size)
            if a < b:
                out[a - lo : b - lo] = self.coeffs[a - self.v : b - self.v]
        return out

    def last_listed_index(self) -> int | None:
        """Index of the deepest stored nonzero coefficient, None if none."""
        if self.coeffs.size == 0:
            return None
        return self.v + self.coeffs.size - 1

    # -- arithmetic -------------------------------------------------------------

    def _require_same_field(self, other: "LaurentSeries") -> None:
        if self.field != other.field:
            raise FieldError("mixed fields in series arithmetic")

    def __add__(self, other: "LaurentSeries") -> "LaurentSeries":
        self._require_same_field(other)
        prec = _min_prec(self.prec, other.prec)
        idx = []
        if self.coeffs.size:
            idx.append((self.v, self.v + self.coeffs.size))
        if other.coeffs.size:
            idx.append((other.v, other.v + other.coeffs.size))
        if not idx:
            return LaurentSeries(self.field, 0, [], prec)
        lo = min(a for a, _ in idx)
        hi = max(b for _, b in idx)
        if prec is not None:
            hi = min(hi, prec)
        if hi <= lo:
            return LaurentSeries(self.field, 0, [], prec)
        a = self.window(lo, hi) if self.coeffs.size else np.zeros(hi - lo, dtype=np.int64)
        b = other.window(lo, hi) if other.coeffs.size else np.zeros(hi - lo, dtype=np.int64)
        return LaurentSeries(self.field, lo, self.field.add_arr(a, b), prec)

    def __neg__(self) -> "LaurentSeries":
        return LaurentSeries(
            self.field, self.v, self.field.neg_arr(self.coeffs), self.prec
        )

    def __sub__(self, other: "LaurentSeries") -> "LaurentSeries":
        return self + (-other)

    def __mul__(self, other: "LaurentSeries") -> "LaurentSeries":
        self._require_same_field(other)
        fs = self.field
        if self.is_exact_zero or other.is_exact_zero:
            return LaurentSeries.zero(fs)
        va = self.v if self.coeffs.size else self.prec
        vb = other.v if other.coeffs.size else other.prec
        pa = _shift_prec(self.prec, vb)
        pb = _shift_prec(other.prec, va)
        prec = _min_prec(pa, pb)
        if self.coeffs.size == 0 or other.coeffs.size == 0:
            return LaurentSeries(fs, 0, [], prec)
        if fs.e == 1:
            conv = np.convolve(self.coeffs, other.coeffs) % fs.p
        else:
            conv = np.zeros(self.coeffs.size + other.coeffs.size - 1, dtype=np.int64)
            for i, c in enumerate(self.coeffs):
                if c:
                    seg = fs.mul_arr(np.int64(int(c)), other.coeffs)
                    conv[i : i + other.coeffs.size] = fs.add_arr(
                        conv[i : i + other.coeffs.size], seg
                    )
        lo = self.v + other.v
        if prec is not None and lo + conv.size > prec:
            conv = conv[: max(prec - lo, 0)]
        return LaurentSeries(fs, lo, conv, prec)

    def scale(self, c: int) -> "LaurentSeries":
        if c == 0:
            return LaurentSeries.zero(self.field) if self.is_exact else LaurentSeries(
                self.field, 0, [], self.prec
            )
        return LaurentSeries(
            self.field, self.v, self.field.scale_arr(c, self.coeffs), self.prec
        )

    def shift(self, k: int) -> "LaurentSeries":
        """Multiply by X^k (indices move down by k)."""
        if self.coeffs.size == 0:
            return LaurentSeries(
                self.field, 0, [], None if self.prec is None else self.prec - k
            )
        return LaurentSeries(
            self.field,
            self.v - k,
            self.coeffs,
            None if self.prec is None else self.prec - k,
        )

    def invert(self, prec: int | None = None) -> "LaurentSeries":
        """Multiplicative inverse.

        The justified output window is prec - 2v for an input known below
        ``prec``.  Exact inputs invert exactly when they are monomials;
        otherwise the (infinite) inverse must be truncated and ``prec`` gives
        the output window.
        """
        if not self.has_leading_term:
            if self.is_exact_zero:
                raise FieldError("inverse of zero")
            raise PrecisionError("cannot invert: leading coefficient indeterminate")
        fs = self.field
        if self.coeffs.size == 1 and self.is_exact:
            return LaurentSeries(fs, -self.v, [fs.inv(int(self.coeffs[0]))], None)
        if self.prec is not None:
            justified = self.prec - 2 * self.v
            out_prec = justified if prec is None else min(prec, justified)
        else:
            if prec is None:
                raise PrecisionError(
                    "inverse of an exact non-monomial series is an infinite tail; "
                    "pass an explicit output precision"
                )
            out_prec = prec
        length = out_prec + self.v
        if length <= 0:
            return LaurentSeries(fs, 0, [], out_prec)
        a = self.coeffs[:length].astype(np.int64)
        c = np.zeros(length, dtype=np.int64)
        a0_inv = fs.inv(int(a[0]))
        c[0] = a0_inv
        for k in range(1, length):
            upto = min(k, a.size - 1)
            acc = fs.dot(a[1 : upto + 1], c[k - 1 :: -1][:upto]) if upto else 0
            c[k] = fs.mul(a0_inv, fs.neg(acc))
        return LaurentSeries(fs, -self.v, c, out_prec)

    def __truediv__(self, other: "LaurentSeries") -> "LaurentSeries":
        return self * other.invert()

    def truncate(self, n: int) -> "LaurentSeries":
        """Forget all coefficients at indices >= n."""
        prec = n if self.prec is None else min(self.prec, n)
        if self.coeffs.size == 0:
            return LaurentSeries(self.field, 0, [], prec)
        keep = max(min(self.coeffs.size, n - self.v), 0)
        return LaurentSeries(self.field, self.v, self.coeffs[:keep], prec)

    def polynomial_part(self) -> tuple[Poly, "LaurentSeries"]:
        """Split into (integer part, fractional tail); needs index 0 in window."""
        if self.prec is not None and self.prec < 1:
            raise PrecisionError("window does not reach index 0")
        poly_c: dict[int, int] = {}
        if self.coeffs.size:
            for j in range(self.coeffs.size):
                i = self.v + j
                if i <= 0 and self.coeffs[j]:
                    poly_c[-i] = int(self.coeffs[j])
        deg = max(poly_c) if poly_c else -1
        arr = np.zeros(deg + 1, dtype=np.int64)
        for d, c in poly_c.items():
            arr[d] = c
        frac = LaurentSeries(
            self.field,
            max(self.v, 1),
            self.window(max(self.v, 1), self.v + self.coeffs.size)
            if self.coeffs.size and self.v + self.coeffs.size > 1
            else [],
            self.prec,
        )
        return Poly(self.field, arr), frac

    # -- comparison -------------------------------------------------------------

    def equals(self, other: "LaurentSeries") -> bool | None:
        """Mathematical equality; None when the windows cannot decide."""
        self._require_same_field(other)
        d = self - other
        if d.coeffs.size:
            return False
        if d.prec is None:
            return True
        return None

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LaurentSeries)
            and self.field == other.field
            and self.v == other.v
            and self.prec == other.prec
            and np.array_equal(self.coeffs, other.coeffs)
        )

    def __hash__(self) -> int:
        return hash(
            (self.field, self.v, self.prec, tuple(int(c) for c in self.coeffs))
        )

    def __str__(self) -> str:
        pairs = [
            (-(self.v + j), int(c)) for j, c in enumerate(self.coeffs) if c
        ]
        body = _format_terms(pairs)
        if self.prec is None:
            return body
        return f"{body} (prec {self.prec})"

    def __repr__(self) -> str:
        return f"LaurentSeries({self})"


def _min_prec(a: int | None, b: int | None) -> int | None:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def _shift_prec(p: int | None, by: int | None) -> int | None:
    if p is None:
        return None
    if by is None:
        return None
    return p + by


# -- text form ------------------------------------------------------------------

def _format_terms(pairs: list[tuple[int, int]]) -> str:
    """Render (exponent, coefficient) terms, descending exponents."""
    if not pairs:
        return "0"
    parts = []
    for exp, c in sorted(pairs, reverse=True):
        if exp == 0:
            parts.append(str(c))
        else:
            base = "X" if exp == 1 else f"X^{exp}"
            parts.append(base if c == 1 else f"{c}*{base}")
    return " + ".join(parts)


_PREC_RE = re.compile(r"\(\s*prec\s+(-?\d+)\s*\)\s*$")
_TERM_RE = re.compile(
    r"^(?:(?P<coeff>\d+)\s*\*?\s*)?(?:(?P<x>X)(?:\^(?P<exp>-?\d+))?)?$"
)


def _split_terms(body: str) -> list[tuple[int, str]]:
    """Split on top-level +/- (a '-' directly after '^' binds to the exponent)."""
    out: list[tuple[int, str]] = []
    sign, cur, seen_any = 1, [], False
    for i, ch in enumerate(body):
        if ch in "+-" and (i == 0 or body[i - 1] != "^"):
            tok = "".join(cur).strip()
            if tok:
                out.append((sign, tok))
            elif seen_any:
                raise ValueError("empty term")
            sign = 1 if ch == "+" else -1
            cur, seen_any = [], True
        else:
            cur.append(ch)
    tok = "".join(cur).strip()
    if tok:
        out.append((sign, tok))
    if not out:
        raise ValueError("empty expression")
    return out


def _parse_terms(field: FieldSpec, body: str) -> dict[int, int]:
    pairs: dict[int, int] = {}
    for sign, tok in _split_terms(body):
        m = _TERM_RE.match(tok)
        if not m or (m.group("coeff") is None and m.group("x") is None):
            raise ValueError(f"cannot parse term {tok!r}")
        c = int(m.group("coeff")) if m.group("coeff") is not None else 1
        if c >= field.s:
            raise FieldError(f"coefficient {c} outside F_{field.s}")
        if m.group("x"):
            exp = int(m.group("exp")) if m.group("exp") is not None else 1
        else:
            exp = 0
        if sign < 0:
            c = field.neg(c)
        pairs[exp] = field.add(pairs.get(exp, 0), c)
    return pairs


def parse_series(field: FieldSpec, text: str) -> LaurentSeries:
    """Parse the series grammar, e.g. '1 + X^-1 + X^-2 (prec 8)'."""
    text = text.strip()
    prec = None
    m = _PREC_RE.search(text)
    if m:
        prec = int(m.group(1))
        text = text[: m.start()].strip()
    pairs = _parse_terms(field, text)
    by_index = {-exp: c for exp, c in pairs.items() if c}
    if prec is not None:
        bad = [i for i in by_index if i >= prec]
        if bad:
            raise PrecisionError(
                f"terms at indices {sorted(bad)} outside the stated window (< {prec})"
            )
    return LaurentSeries.from_pairs(field, by_index, prec)


def parse_poly(field: FieldSpec, text: str) -> Poly:
    """Parse a polynomial in X (nonnegative exponents only)."""
    pairs = _parse_terms(field, text.strip())
    if any(exp < 0 for exp, c in pairs.items() if c):
        raise ValueError("negative exponent in polynomial")
    deg = max((exp for exp, c in pairs.items() if c), default=-1)
    arr = np.zeros(deg + 1, dtype=np.int64)
    for exp, c in pairs.items():
        if c:
            arr[exp] = c
    return Poly(field, arr)
