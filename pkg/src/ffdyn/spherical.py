"""Iwasawa factorization in SL2 of the Laurent field and the spherical
decay profile.

Everything here lives on G = SL2(F_s((1/X))) with maximal compact
K = SL2(O), O = F_s[[1/X]].  The module factors group elements through
the upper-triangular subgroup (``iwasawa``), evaluates the modular
character of that subgroup (``modular_delta_b``), and averages its
inverse square root over K to produce the bi-invariant matrix
coefficient

    Xi(g) = integral over K of Delta_B(p(g k))^(-1/2) dk,

where p projects onto the triangular part along G = K*B.  Concretely
the B-part of g k has diagonal (u, 1/u) with |u| = ||(g k) e_1||, since
the first column of a determinant-one matrix over O has norm one, so
the integrand is the reciprocal norm of the first column of g k.

Two backends evaluate the average.  The exact one sums the integrand
over congruence classes of K at level N (classes of the first column
mod (1/X)^N; the level-N coset sum over K collapses to that column
average because K acts transitively on unimodular columns with fibers
of equal size).  The integrand is locally constant, so once every class
is resolved the level-N and level-(N+1) sums agree exactly and the
common value is certified exact.  The Monte Carlo backend samples K
uniformly at a finite precision and reports a standard error.

``decay_check`` scans Xi on the diagonal one-parameter subgroup
diag(X^t, X^-t) and fits the smallest integer sigma for which
Xi(g_t) <= varsigma * ||g_t||^(-1/sigma) holds with a margin profile
that is not still growing at the end of the range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import CertificationError, FieldError, PrecisionError
from .field import FieldSpec, LaurentSeries
from .streams import stream

Matrix = tuple[tuple[LaurentSeries, LaurentSeries], tuple[LaurentSeries, LaurentSeries]]

# Chunk of congruence classes refined per numpy pass; bounds the size of
# the transient child tensors, not the total work.
_CHUNK = 4096


# -- matrix helpers -----------------------------------------------------------


def as_matrix(g: Sequence[Sequence[LaurentSeries]]) -> Matrix:
    rows = tuple(tuple(row) for row in g)
    if len(rows) != 2 or any(len(row) != 2 for row in rows):
        raise ValueError("expected a 2x2 matrix")
    fs = rows[0][0].field
    for row in rows:
        for entry in row:
            if not isinstance(entry, LaurentSeries):
                raise TypeError("matrix entries must be LaurentSeries")
            if entry.field != fs:
                raise FieldError("mixed fields in matrix")
    return rows


def identity2(fs: FieldSpec) -> Matrix:
    one = LaurentSeries.one(fs)
    zero = LaurentSeries.zero(fs)
    return ((one, zero), (zero, one))


def torus_element(fs: FieldSpec, t: int) -> Matrix:
    """diag(X^t, X^-t), the standard diagonal one-parameter subgroup."""
    zero = LaurentSeries.zero(fs)
    return (
        (LaurentSeries.x_power(fs, t), zero),
        (zero, LaurentSeries.x_power(fs, -t)),
    )


def matmul2(a: Matrix, b: Matrix) -> Matrix:
    return tuple(
        tuple(a[i][0] * b[0][j] + a[i][1] * b[1][j] for j in range(2))
        for i in range(2)
    )


def det2(g: Matrix) -> LaurentSeries:
    return g[0][0] * g[1][1] - g[0][1] * g[1][0]


def mat_inverse2(g: Matrix) -> Matrix:
    """Inverse of a determinant-one 2x2 matrix (the adjugate)."""
    return (
        (g[1][1], -g[0][1]),
        (-g[1][0], g[0][0]),
    )


def _require_det_one(g: Matrix) -> None:
    fs = g[0][0].field
    ok = det2(g).equals(LaurentSeries.one(fs))
    if ok is False:
        raise ValueError("matrix determinant is not 1")
    if ok is None:
        raise PrecisionError("determinant indeterminate at this window")


def _in_o(entry: LaurentSeries) -> bool:
    """Whether the window certifies membership in O (no index < 0 terms)."""
    if entry.coeffs.size:
        return entry.v >= 0
    return True


# -- Iwasawa factorization ----------------------------------------------------


@dataclass(frozen=True)
class IwasawaFactors:
    """g = b * kappa with b upper triangular and kappa in SL2(O).

    ``diag_valuations`` are the series valuations of the diagonal of b
    (coefficient index of the leading term; diag(X^t, X^-t) has
    valuations (-t, t)).  Equalities hold exactly on the declared
    coefficient windows.
    """

    b: Matrix
    kappa: Matrix
    diag_valuations: tuple[int, int]


def _norm_exponent_bound(entry: LaurentSeries) -> int | None:
    """Valuation when visible, else None (window exhausted)."""
    if entry.has_leading_term:
        return entry.v
    return None


def _compare_bottom(c: LaurentSeries, d: LaurentSeries) -> bool:
    """True when |c| <= |d| is certified, False when |c| > |d| is.

    Raises PrecisionError when the windows cannot decide, FieldError
    when the bottom row is identically zero.
    """
    vc = _norm_exponent_bound(c)
    vd = _norm_exponent_bound(d)
    if vc is not None and vd is not None:
        return vc >= vd
    if vc is None:
        if c.is_exact_zero:
            if vd is None and not d.is_exact_zero:
                raise PrecisionError("|d| indeterminate against a zero entry")
            if d.is_exact_zero:
                raise FieldError("bottom row is zero; matrix is singular")
            return True
        # |c| <= s^-prec; decidable when d's leading term is at least as large
        if vd is not None and vd <= c.prec:
            return True
        raise PrecisionError("cannot compare |c| and |d| at this window")
    # vd is None, vc known
    if d.is_exact_zero or (d.prec is not None and vc <= d.prec):
        return False
    raise PrecisionError("cannot compare |c| and |d| at this window")


def _unit_part(entry: LaurentSeries) -> tuple[int, LaurentSeries]:
    """Split entry = X^-v * u with u a unit of O (valuation and unit)."""
    v = entry.valuation()
    return v, entry.shift(v)


def iwasawa(g: Sequence[Sequence[LaurentSeries]], prec: int | None = None) -> IwasawaFactors:
    """Factor g = b * kappa by ultrametric column operations.

    The bottom row (c, d) decides the pivot: when |c| <= |d| an O-multiple
    of the second column clears c; otherwise the columns are swapped first.
    Units on the diagonal of b, and the part of its corner entry divisible
    by the leading diagonal monomial, are folded into kappa whenever the
    needed inverses are representable, so b is normalized towards
    [[X^a, beta], [0, X^-a]] with beta reduced mod X^a * O.

    ``prec`` truncates the input entries first; exact inputs whose
    divisions would produce infinite tails raise PrecisionError asking
    for it.  A matrix already in SL2(O) short-circuits to (identity, g).
    """
    g = as_matrix(g)
    fs = g[0][0].field
    # Validate the determinant before truncation; windowed inputs whose
    # windows cannot certify det = 1 are admitted (they cannot refute it).
    ok = det2(g).equals(LaurentSeries.one(fs))
    if ok is False:
        raise ValueError("matrix determinant is not 1")
    if prec is not None:
        g = tuple(tuple(e.truncate(prec) for e in row) for row in g)

    if all(_in_o(e) for row in g for e in row):
        return IwasawaFactors(b=identity2(fs), kappa=g, diag_valuations=(0, 0))

    # Right-multiplications accumulated into kappa_inv; g * kappa_inv = b_raw.
    work = [list(g[0]), list(g[1])]
    ops: list[Matrix] = []
    c, d = work[1][0], work[1][1]
    if not _compare_bottom(c, d):
        # column swap with determinant 1: (col1, col2) -> (col2, -col1)
        neg_one = LaurentSeries(fs, 0, [fs.neg(1)])
        swap = (
            (LaurentSeries.zero(fs), neg_one),
            (LaurentSeries.one(fs), LaurentSeries.zero(fs)),
        )
        work = [
            [work[0][1], work[0][0] * neg_one],
            [work[1][1], work[1][0] * neg_one],
        ]
        ops.append(swap)
        c, d = work[1][0], work[1][1]
    if not c.is_exact_zero:
        try:
            t = c / d
        except PrecisionError as exc:
            raise PrecisionError(
                "clearing the bottom row needs an infinite expansion; "
                "pass an explicit working precision"
            ) from exc
        neg_t = -t
        shear = (
            (LaurentSeries.one(fs), LaurentSeries.zero(fs)),
            (neg_t, LaurentSeries.one(fs)),
        )
        work = [
            [work[0][0] + neg_t * work[0][1], work[0][1]],
            [work[1][0] + neg_t * work[1][1], work[1][1]],
        ]
        ops.append(shear)

    # g * op_1 * ... * op_k = b_raw, so kappa = op_k^-1 * ... * op_1^-1:
    # invert in original order, accumulating on the left.
    kappa = identity2(fs)
    for op in ops:
        # inverses: swap -> [[0,1],[-1,0]], shear [[1,0],[-t,1]] -> [[1,0],[t,1]]
        if op[0][0].is_exact_zero:
            neg_one = LaurentSeries(fs, 0, [fs.neg(1)])
            inv_op = (
                (LaurentSeries.zero(fs), LaurentSeries.one(fs)),
                (neg_one, LaurentSeries.zero(fs)),
            )
        else:
            inv_op = (
                (LaurentSeries.one(fs), LaurentSeries.zero(fs)),
                (-op[1][0], LaurentSeries.one(fs)),
            )
        kappa = matmul2(inv_op, kappa)

    b11, b12 = work[0][0], work[0][1]
    b22 = work[1][1]
    residual = work[1][0]
    if residual.has_leading_term:
        raise RuntimeError("column operations failed to clear the bottom row")

    # Normalize: fold diagonal units and the O-divisible part of the corner
    # into kappa.  Needs the unit inverses; exact non-constant units would
    # produce infinite tails, in which case b is returned unnormalized.
    try:
        v1, u1 = _unit_part(b11)
        v2, u2 = _unit_part(b22)
        if u1.is_exact and u1.coeffs.size > 1:
            raise PrecisionError("exact non-constant unit")
        if u2.is_exact and u2.coeffs.size > 1:
            raise PrecisionError("exact non-constant unit")
        u1_inv = u1.invert()
        u2_inv = u2.invert()
    except PrecisionError:
        if not (b11.has_leading_term and b22.has_leading_term):
            raise PrecisionError(
                "diagonal valuations indeterminate; increase the working precision"
            ) from None
        b = ((b11, b12), (residual, b22))
        return IwasawaFactors(
            b=b, kappa=kappa, diag_valuations=(b11.valuation(), b22.valuation())
        )

    d1 = LaurentSeries.x_power(fs, -v1)
    d2 = LaurentSeries.x_power(fs, -v2)
    beta = b12 * u2_inv
    # beta mod d1*O: coefficients at index >= v1 belong to d1 * O.
    head_len = max(min(v1 - beta.v, beta.coeffs.size), 0) if beta.coeffs.size else 0
    head = LaurentSeries(fs, beta.v, beta.coeffs[:head_len], beta.prec)
    tail = beta - head
    tau = tail.shift(v1)  # tail / d1, a shift since d1 is a monomial
    m_row1 = (u1, LaurentSeries.zero(fs))
    m_row2 = (LaurentSeries.zero(fs), u2)
    n_mat = ((LaurentSeries.one(fs), tau), (LaurentSeries.zero(fs), LaurentSeries.one(fs)))
    kappa = matmul2(n_mat, matmul2((m_row1, m_row2), kappa))
    b = ((d1, head), (residual, d2))
    for row in kappa:
        for entry in row:
            if entry.has_leading_term and entry.v < 0:
                raise RuntimeError("kappa left O during normalization")
    return IwasawaFactors(b=b, kappa=kappa, diag_valuations=(v1, v2))


def modular_delta_b(u: LaurentSeries) -> float:
    """Modular character of the triangular subgroup at diag(u, 1/u).

    One positive root with multiplicity one, character u^2, so the value
    is |u|^2.
    """
    if not u.has_leading_term:
        if u.is_exact_zero:
            raise FieldError("diagonal entry is zero")
        raise PrecisionError("diagonal entry indeterminate at this window")
    return float(u.field.s) ** (-2 * u.valuation())


# -- exact backend ------------------------------------------------------------


@dataclass(frozen=True)
class XiExact:
    """Certified value of Xi(g) from the congruence-class sum.

    ``depth`` is the first level N whose sum agrees with level N+1
    (at that point every class is resolved, so all deeper levels agree
    as well).  ``classes`` counts evaluated congruence classes.
    """

    value: Fraction
    stabilized: bool
    depth: int
    classes: int


@dataclass(frozen=True)
class XiMonteCarlo:
    value: float
    stderr: float
    samples: int
    precision: int
    seed: int


class _ComponentGeometry:
    """Buffer layout for one coordinate of w = g * (a, c)^T.

    The class tree stores, per congruence class, the dense coefficients
    of both coordinates of w over a window starting at ``base``.  A
    coefficient of a or c appended at depth k adds a shifted copy of the
    corresponding column entry of g, so the buffer grows by one column
    per level.
    """

    def __init__(self, u: LaurentSeries, v: LaurentSeries):
        supports = []
        for e in (u, v):
            if e.has_leading_term:
                supports.append((e.v, e.v + e.coeffs.size - 1))
        if not supports:
            raise ValueError("matrix has a zero row; determinant cannot be 1")
        self.base = min(lo for lo, _ in supports)
        self.hi = max(hi for _, hi in supports)
        self.u = u
        self.v = v

    def length(self, depth: int) -> int:
        return depth - 1 + self.hi - self.base + 1

    def level_row(self, depth: int, entry: LaurentSeries) -> np.ndarray:
        """Dense buffer row for entry * X^-(depth-1)."""
        row = np.zeros(self.length(depth), dtype=np.int64)
        if entry.has_leading_term:
            off = entry.v + depth - 1 - self.base
            row[off : off + entry.coeffs.size] = entry.coeffs
        return row


def _s_power(s: int, exponent: int) -> Fraction:
    return Fraction(s) ** int(exponent)


def _rep_contribution(
    frontier: list[np.ndarray], geoms: list[_ComponentGeometry], s: int, mass: Fraction
) -> Fraction:
    """Sum of mass * integrand at the zero-tail representative per class."""
    if frontier[0].shape[0] == 0:
        return Fraction(0)
    sentinel = 10**9
    exps = []
    for comp, geom in zip(frontier, geoms):
        nz = comp != 0
        found = nz.any(axis=1)
        idx = nz.argmax(axis=1)
        exps.append(np.where(found, geom.base + idx, sentinel))
    rep = np.minimum(exps[0], exps[1])
    if (rep >= sentinel).any():
        raise RuntimeError("representative column maps to zero; matrix singular")
    total = Fraction(0)
    for exp, count in zip(*np.unique(rep, return_counts=True)):
        total += int(count) * _s_power(s, int(exp))
    return mass * total


def xi_exact(g: Sequence[Sequence[LaurentSeries]], depth_cap: int = 48) -> XiExact:
    """Exact Xi(g) by stabilized congruence-class sums.

    Classes are prefixes of the first column (a, c) of k mod (1/X)^N;
    the level-N sum evaluates the integrand at each class representative
    with uniform mass.  Classes whose integrand the window already pins
    down are retired with their exact value; the rest are refined.  The
    value is reported once consecutive level sums agree and no class
    remains unresolved, which certifies every deeper level agrees too.
    """
    g = as_matrix(g)
    fs = g[0][0].field
    for row in g:
        for entry in row:
            if not entry.is_exact:
                raise ValueError("exact backend requires exact matrix entries")
    _require_det_one(g)
    s = fs.s
    geoms = [
        _ComponentGeometry(g[0][0], g[0][1]),
        _ComponentGeometry(g[1][0], g[1][1]),
    ]

    da = np.repeat(np.arange(s, dtype=np.int64), s)
    dc = np.tile(np.arange(s, dtype=np.int64), s)

    stable = Fraction(0)
    classes = 0
    s_prev: Fraction | None = None
    # frontier: per component, (n, L) coefficient buffers; depth 0 = empty prefix
    frontier = [np.zeros((1, 0), dtype=np.int64) for _ in geoms]

    for depth in range(1, depth_cap + 1):
        if depth == 1:
            keep_deltas = slice(1, None)  # drop (0, 0): column must be unimodular
        else:
            keep_deltas = slice(None)
        da_lvl, dc_lvl = da[keep_deltas], dc[keep_deltas]
        n_deltas = da_lvl.size
        mass = Fraction(1, (s * s - 1) * s ** (2 * (depth - 1)))

        level_rows = []
        for geom in geoms:
            u_row = geom.level_row(depth, geom.u)
            v_row = geom.level_row(depth, geom.v)
            grid = fs.add_arr(
                fs.mul_arr(da_lvl[:, None], u_row[None, :]),
                fs.mul_arr(dc_lvl[:, None], v_row[None, :]),
            )
            level_rows.append(grid)

        n_parents = frontier[0].shape[0]
        new_frontier = [
            np.zeros((0, geom.length(depth)), dtype=np.int64) for geom in geoms
        ]
        pending: list[list[np.ndarray]] = [[] for _ in geoms]
        level_stable = Fraction(0)

        for start in range(0, n_parents, _CHUNK):
            stop = min(start + _CHUNK, n_parents)
            children = []
            for comp, geom, grid in zip(frontier, geoms, level_rows):
                chunk = comp[start:stop]
                pad = geom.length(depth) - chunk.shape[1]
                if pad:
                    chunk = np.pad(chunk, ((0, 0), (0, pad)))
                child = fs.add_arr(chunk[:, None, :], grid[None, :, :])
                children.append(child.reshape(-1, geom.length(depth)))
            classes += children[0].shape[0]

            vals = []
            founds = []
            for child, geom in zip(children, geoms):
                nz = child[:, :depth] != 0
                found = nz.any(axis=1)
                idx = nz.argmax(axis=1)
                vals.append(geom.base + idx)
                founds.append(found)
            ceil0 = depth + geoms[0].base
            ceil1 = depth + geoms[1].base
            f0, f1 = founds
            v0, v1 = vals
            both = f0 & f1
            only0 = f0 & ~f1
            only1 = ~f0 & f1
            minval = np.where(both, np.minimum(v0, v1), 0)
            minval = np.where(only0, v0, minval)
            minval = np.where(only1, v1, minval)
            determined = both | (only0 & (v0 <= ceil1)) | (only1 & (v1 <= ceil0))

            det_vals = minval[determined]
            for exp, count in zip(*np.unique(det_vals, return_counts=True)):
                level_stable += int(count) * _s_power(s, int(exp))
            undet = ~determined
            if undet.any():
                for i, child in enumerate(children):
                    pending[i].append(child[undet])

        stable += mass * level_stable
        if pending[0]:
            new_frontier = [np.concatenate(chunks, axis=0) for chunks in pending]
        frontier = new_frontier

        s_depth = stable + _rep_contribution(frontier, geoms, s, mass)
        if s_prev is not None and s_depth == s_prev and frontier[0].shape[0] == 0:
            return XiExact(value=s_depth, stabilized=True, depth=depth - 1, classes=classes)
        s_prev = s_depth

    raise CertificationError(
        f"congruence-class sum did not stabilize by depth {depth_cap}",
        needed_precision=depth_cap + 1,
    )


# -- Monte Carlo backend ------------------------------------------------------


def sample_k(fs: FieldSpec, rng: np.random.Generator, precision: int) -> Matrix:
    """Uniform element of SL2(O) at the given coefficient precision.

    First row uniform among unimodular pairs (rejection on both constant
    terms vanishing), completed to determinant one through the unit
    entry, then the second row is randomized by adding an O-multiple of
    the first (the residual unipotent).
    """
    if precision < 1:
        raise ValueError("precision must be >= 1")
    while True:
        coeffs = rng.integers(0, fs.s, size=(2, precision))
        if coeffs[0, 0] or coeffs[1, 0]:
            break
    a = LaurentSeries(fs, 0, coeffs[0], precision)
    b = LaurentSeries(fs, 0, coeffs[1], precision)
    if coeffs[0, 0]:
        c = LaurentSeries.zero_window(fs, precision)
        d = a.invert()
    else:
        d = LaurentSeries.zero_window(fs, precision)
        c = -b.invert()
    t_coeffs = rng.integers(0, fs.s, size=precision)
    t = LaurentSeries(fs, 0, t_coeffs, precision)
    return ((a, b), (c + t * a, d + t * b))


def _first_column_norm_exponent(g: Matrix, k: Matrix) -> int:
    """Valuation of (g k) e_1, certified against unknown windows."""
    col = (k[0][0], k[1][0])
    known: list[int] = []
    ceilings: list[int] = []
    for i in range(2):
        w = g[i][0] * col[0] + g[i][1] * col[1]
        if w.has_leading_term:
            known.append(w.v)
        elif not w.is_exact_zero:
            ceilings.append(w.prec)
    if not known:
        raise PrecisionError("first-column norm indeterminate; increase precision")
    val = min(known)
    if any(val > ceil for ceil in ceilings):
        raise PrecisionError("first-column norm indeterminate; increase precision")
    return val


def _default_mc_precision(g: Matrix) -> int:
    spread = 0
    for row in g:
        for entry in row:
            if entry.has_leading_term:
                spread = max(
                    spread, abs(entry.v), abs(entry.v + entry.coeffs.size - 1)
                )
    return 2 * spread + 16


def xi_monte_carlo(
    g: Sequence[Sequence[LaurentSeries]],
    samples: int,
    seed: int,
    precision: int | None = None,
    tag: str = "xi-mc",
    trial: int = 0,
) -> XiMonteCarlo:
    """Monte Carlo Xi(g) over uniformly sampled K with a standard error."""
    g = as_matrix(g)
    fs = g[0][0].field
    if samples < 2:
        raise ValueError("need at least 2 samples for a standard error")
    _require_det_one(g)
    if precision is None:
        precision = _default_mc_precision(g)
    rng = stream(seed, tag, trial)
    s = float(fs.s)
    vals = np.empty(samples, dtype=np.float64)
    for i in range(samples):
        k = sample_k(fs, rng, precision)
        vals[i] = s ** _first_column_norm_exponent(g, k)
    value = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(samples))
    return XiMonteCarlo(
        value=value, stderr=stderr, samples=samples, precision=precision, seed=seed
    )


def xi_evaluate(
    g: Sequence[Sequence[LaurentSeries]],
    depth_cap: int = 48,
    samples: int | None = None,
    seed: int = 0,
    precision: int | None = None,
) -> XiExact | XiMonteCarlo:
    """Xi(g) by the certified class sum, or Monte Carlo when ``samples``
    is given."""
    if samples is None:
        return xi_exact(g, depth_cap=depth_cap)
    return xi_monte_carlo(g, samples=samples, seed=seed, precision=precision)


# -- decay profile ------------------------------------------------------------


@dataclass(frozen=True)
class DecayRow:
    t: int
    xi: Fraction
    depth: int
    growth: Fraction  # Xi(g_t) * s^t, the sigma = 1 margin
    xi_mc: float | None
    stderr: float | None


@dataclass(frozen=True)
class DecayFit:
    sigma: int
    varsigma: float
    residuals: tuple[float, ...]
    rejected: tuple[int, ...]  # sigma values with still-growing margins


@dataclass(frozen=True)
class DecayReport:
    s: int
    rows: tuple[DecayRow, ...]
    fit: DecayFit

    def fit_dict(self) -> dict:
        return {
            "sigma": self.fit.sigma,
            "varsigma": self.fit.varsigma,
            "residuals": list(self.fit.residuals),
        }


def _margin_growing(margins: list[float]) -> bool:
    """Whether the margin profile is still climbing at the end of range."""
    tail = margins[-3:]
    return tail[-1] > tail[-2] > tail[-3]


def decay_check(
    fs: FieldSpec,
    t_max: int,
    sigma_max: int = 6,
    depth_cap: int = 64,
    samples: int = 0,
    seed: int = 0,
    precision: int | None = None,
    tag: str = "xi-decay",
) -> DecayReport:
    """Exact Xi on diag(X^t, X^-t) for t <= t_max with the decay fit.

    For each candidate sigma the margins Xi(g_t) * s^(t/sigma) are
    scanned; the smallest sigma whose margins are not strictly
    increasing at the end of the range is accepted, varsigma is the
    largest margin, and the residuals log(varsigma * s^(-t/sigma))
    - log(Xi(g_t)) are all nonnegative by construction.  Margins for
    sigma = 1 (the growth column) are exact fractions.
    """
    if t_max < 3:
        raise ValueError("need t_max >= 3 to judge the margin trend")
    if sigma_max < 1:
        raise ValueError("sigma_max must be >= 1")
    s = fs.s
    rows = []
    for t in range(t_max + 1):
        exact = xi_exact(torus_element(fs, t), depth_cap=depth_cap)
        mc_value = None
        mc_err = None
        if samples:
            mc = xi_monte_carlo(
                torus_element(fs, t),
                samples=samples,
                seed=seed,
                precision=precision,
                tag=tag,
                trial=t,
            )
            mc_value, mc_err = mc.value, mc.stderr
        rows.append(
            DecayRow(
                t=t,
                xi=exact.value,
                depth=exact.depth,
                growth=exact.value * s**t,
                xi_mc=mc_value,
                stderr=mc_err,
            )
        )

    rejected = []
    chosen = None
    for sigma in range(1, sigma_max + 1):
        margins = [float(row.xi) * s ** (row.t / sigma) for row in rows]
        if _margin_growing(margins):
            rejected.append(sigma)
            continue
        chosen = sigma
        break
    if chosen is None:
        raise ValueError(
            f"no sigma <= {sigma_max} has a settled margin profile on t <= {t_max}"
        )
    margins = [float(row.xi) * s ** (row.t / chosen) for row in rows]
    varsigma = max(margins)
    log_s = math.log(s)
    residuals = tuple(
        math.log(varsigma) - (row.t / chosen) * log_s - math.log(float(row.xi))
        for row in rows
    )
    fit = DecayFit(
        sigma=chosen,
        varsigma=varsigma,
        residuals=residuals,
        rejected=tuple(rejected),
    )
    return DecayReport(s=s, rows=tuple(rows), fit=fit)
