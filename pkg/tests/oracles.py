"""Independent reference implementations used to check the package.

Everything here is deliberately naive: schoolbook polynomial arithmetic on
Python lists, dict-based series products, literal box enumerations, Fraction
arithmetic for exact identities.  Nothing imports from ffdyn, so agreement
between these and the package is a real cross-check, not a tautology.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

# ---------------------------------------------------------------------------
# F_p polynomials as plain lists, ascending degree, no trailing zeros.


def ptrim(a: list[int]) -> list[int]:
    a = list(a)
    while a and a[-1] == 0:
        a.pop()
    return a


def padd(a: list[int], b: list[int], p: int) -> list[int]:
    n = max(len(a), len(b))
    return ptrim([((a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0)) % p for i in range(n)])


def pneg(a: list[int], p: int) -> list[int]:
    return [(-c) % p for c in a]


def pmul(a: list[int], b: list[int], p: int) -> list[int]:
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] = (out[i + j] + x * y) % p
    return ptrim(out)


def pdivmod(a: list[int], b: list[int], p: int) -> tuple[list[int], list[int]]:
    b = ptrim(b)
    if not b:
        raise ZeroDivisionError
    rem = list(a)
    q = [0] * max(len(a) - len(b) + 1, 0)
    inv = pow(b[-1], p - 2, p)
    for k in range(len(rem) - 1, len(b) - 2, -1):
        c = rem[k] % p
        if c:
            f = (c * inv) % p
            q[k - len(b) + 1] = f
            for j in range(len(b)):
                rem[k - len(b) + 1 + j] = (rem[k - len(b) + 1 + j] - f * b[j]) % p
    return ptrim(q), ptrim(rem[: len(b) - 1])


def pgcd(a: list[int], b: list[int], p: int) -> list[int]:
    a, b = ptrim(a), ptrim(b)
    while b:
        a, b = b, pdivmod(a, b, p)[1]
    if a:
        inv = pow(a[-1], p - 2, p)
        a = [(c * inv) % p for c in a]
    return a


# ---------------------------------------------------------------------------
# Series with finitely many known coefficients, as {index: coeff} plus window.
# Index i carries the coefficient of X^(-i).


def dict_mul(a: dict[int, int], b: dict[int, int], p: int) -> dict[int, int]:
    out: dict[int, int] = {}
    for i, x in a.items():
        for j, y in b.items():
            k = i + j
            out[k] = (out.get(k, 0) + x * y) % p
    return {k: c for k, c in out.items() if c}


def dict_valuation(a: dict[int, int]) -> int | None:
    nz = [i for i, c in a.items() if c]
    return min(nz) if nz else None


# ---------------------------------------------------------------------------
# Brute-force lattice search.  Basis columns are vectors of series dicts;
# candidates q run over all polynomial coefficient vectors with deg < qdeg;
# returns the largest d such that some nonzero combination has valuation >= d
# ... reported as the minimal norm exponent: min over candidates of -valuation.


def brute_min_valuation(
    cols: list[list[dict[int, int]]], p: int, qdeg: int
) -> int:
    """max over nonzero integer vectors q (deg < qdeg) of the valuation of B q.

    Returns the valuation v of the shortest vector (norm s^-v); assumes the
    minimum is attained inside the box, so callers must size qdeg themselves.
    """
    r = len(cols)
    best = None
    coeff_space = list(itertools.product(range(p), repeat=qdeg))
    for qvecs in itertools.product(coeff_space, repeat=r):
        if all(all(c == 0 for c in qc) for qc in qvecs):
            continue
        # combine column by column: vec = sum_j q_j * col_j, coordinatewise
        dim = len(cols[0])
        vec = [dict() for _ in range(dim)]
        for col, qc in zip(cols, qvecs):
            qpoly = {-d: c for d, c in enumerate(qc) if c}
            if not qpoly:
                continue
            for t in range(dim):
                prod = dict_mul(qpoly, col[t], p)
                for k, c in prod.items():
                    vec[t][k] = (vec[t].get(k, 0) + c) % p
        vals = [dict_valuation(coord) for coord in vec]
        vals = [v for v in vals if v is not None]
        if not vals:
            continue
        v = min(vals)
        if best is None or v > best:
            best = v
    if best is None:
        raise AssertionError("box contained no nonzero vector")
    return best


# ---------------------------------------------------------------------------
# Continued fraction of a series by literal Euclid over F_p.
# A is given by coefficients a[0..P] of X^0 .. X^-P; we run Euclid on
# (X^P, N) with N = sum a[i] X^(P-i) and record deg of each remainder.


def cf_denominator_degrees(a: list[int], p: int) -> list[int]:
    P = len(a) - 1
    r0 = [0] * P + [1]
    r1 = ptrim([a[P - d] for d in range(P + 1)])
    degs = [0]
    while r1:
        _, rem = pdivmod(r0, r1, p)
        degs.append(P - (len(r1) - 1))
        r0, r1 = r1, rem
    # degs[k] = D_k = deg q_k, cumulative convergent denominator degrees
    return degs


def sawtooth_delta(degs: list[int], t: int) -> int:
    """min(t - D_k, D_{k+1} - t) for the bracketing rung; D list ascending."""
    import bisect

    k = bisect.bisect_right(degs, t) - 1
    if k + 1 < len(degs):
        return min(t - degs[k], degs[k + 1] - t)
    return t - degs[k]


# ---------------------------------------------------------------------------
# Rate transform scalar oracle: solve log_s psi(s^(a - n r)) = -(a + m r)
# by bisection on plain floats.


def rate_oracle(llog, a: float, m: int, n: int, u0: float, tol: float = 1e-13) -> float:
    def h(r: float) -> float:
        return llog(a - n * r) + a + m * r

    hi = (a - u0) / n
    lo = min(-a / m, hi - 1.0)
    while h(lo) > 0:
        lo -= max(1.0, hi - lo)
        if hi - lo > 1e6:
            raise AssertionError("no bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Affine Weyl length by counting separating hyperplanes, exact Fractions.
# Type A_r inside the sum-zero subspace of Q^(r+1); w is a permutation of
# 0..r acting by (w x)_i = x_{w^{-1}(i)}; the translation lattice is the
# sum-zero integer vectors.  Element t_lam w maps x to w x + lam.


def affine_length_oracle(lam: tuple[int, ...], w: tuple[int, ...]) -> int:
    rp1 = len(lam)
    assert sum(lam) == 0
    base = [Fraction(rp1 - 1 - i, rp1) for i in range(rp1)]
    winv = [0] * rp1
    for i, wi in enumerate(w):
        winv[wi] = i
    moved = [base[winv[i]] + lam[i] for i in range(rp1)]
    total = 0
    for i in range(rp1):
        for j in range(i + 1, rp1):
            x = base[i] - base[j]
            y = moved[i] - moved[j]
            lo, hi = min(x, y), max(x, y)
            # integers strictly between lo and hi
            count = math.ceil(hi) - math.floor(lo) - 1
            if lo.denominator == 1 or hi.denominator == 1:
                raise AssertionError("alcove point landed on a wall")
            total += max(count, 0)
    return total


def dominant_count_oracle(rank: int, ell: int) -> int:
    """Dominant sum-zero integer vectors with sum_{i<j}(lam_i - lam_j) = ell.

    Literal enumeration over a safe coordinate box; for pairing value ell all
    coordinates satisfy |lam_i| <= ell.
    """
    rp1 = rank + 1
    count = 0
    rng = range(-ell, ell + 1)
    for lam in itertools.product(rng, repeat=rp1):
        if sum(lam) != 0:
            continue
        if any(lam[i] < lam[i + 1] for i in range(rp1 - 1)):
            continue
        pairing = sum(lam[i] - lam[j] for i in range(rp1) for j in range(i + 1, rp1))
        if pairing == ell:
            count += 1
    return count


# ---------------------------------------------------------------------------
# Tree-side exact quantities.


def brute_stabilizer_order(q: int, j: int, deg_cap: int) -> int:
    """Count SL2(F_q[X]) matrices with entry degree <= deg_cap stabilizing
    the module O + X^j O inside F_q((1/X))^2.  Literal loop over all entry
    4-tuples; only feasible for tiny q and deg_cap.

    Membership conditions, checked literally on polynomial entries:
    a, d constant; deg b <= j; deg c <= -j (so c = 0 unless j = 0).
    Here they are *not* assumed: every matrix is tested via the lattice
    condition expressed through degrees.
    """
    assert _is_prime_int(q)
    polys = list(itertools.product(range(q), repeat=deg_cap + 1))

    def deg(c):
        d = -1
        for i, x in enumerate(c):
            if x:
                d = i
        return d

    count = 0
    for a, b, c, d in itertools.product(polys, repeat=4):
        det = padd(
            pmul(ptrim(list(a)), ptrim(list(d)), q),
            pneg(pmul(ptrim(list(b)), ptrim(list(c)), q), q),
            q,
        )
        if det != [1]:
            continue
        # g*(u, w) with u in O, w in X^j O stays in O + X^j O iff
        # deg a <= 0, deg b <= j, deg c <= -j, deg d <= 0 (after clearing X^j)
        if deg(a) <= 0 and deg(d) <= 0 and deg(b) <= j and deg(c) <= -j:
            count += 1
    return count


def _is_prime_int(n: int) -> bool:
    return n >= 2 and all(n % d for d in range(2, int(n**0.5) + 1))


def ray_masses(q: int, jmax: int) -> list[Fraction]:
    """Normalized quotient-ray vertex masses mu_j proportional to 1/|Gamma_j|,
    including the exact infinite tail in the normalizer."""
    orders = [q**3 - q] + [(q - 1) * q ** (j + 1) for j in range(1, jmax + 1)]
    weights = [Fraction(1, o) for o in orders]
    # tail past jmax: sum_{j>jmax} 1/((q-1) q^(j+1)) = 1/((q-1)^2 q^(jmax+1))
    tail = Fraction(1, (q - 1) ** 2 * q ** (jmax + 1))
    total = sum(weights) + tail
    return [w / total for w in weights]


def even_vertex_tail(q: int, n: int) -> Fraction:
    """P(Delta >= n) over lattice classes: even-distance vertices at >= 2n,
    normalized over even vertices only.  Closed Fractions, no truncation."""
    # even masses: mu_0 = 1/(q^3-q); mu_{2i} = 1/((q-1) q^(2i+1)), i >= 1
    z = Fraction(1, q**3 - q) + Fraction(1, (q - 1) * q) * Fraction(1, q**2 - 1)
    if n <= 0:
        return Fraction(1)
    tail = Fraction(1, (q - 1) * q ** (2 * n + 1)) * Fraction(q**2, q**2 - 1)
    return tail / z


def xi_closed_form(q: int, t: int) -> Fraction:
    """Spherical decay profile on the diagonal, exact value."""
    if t == 0:
        return Fraction(1)
    return Fraction(2 * t * (q - 1) + q + 1, (q + 1) * q**t)


def excursion_tail(q: int, r: int) -> Fraction:
    """P(excursion max >= r) for the quotient-ray walk, r >= 1."""
    return Fraction(1, q ** (r - 1))
