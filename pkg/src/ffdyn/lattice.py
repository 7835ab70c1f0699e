"""Z-lattices in F_s((1/X))^r: reduction, depth, short vectors.

A lattice is given by a square basis of series columns.  Internally the basis
is cleared to a polynomial matrix by the scaling X^M (M = deepest coefficient
index any entry needs), reduced to weak Popov form by simple transformations,
and read off through the predictable-degree property: the sorted column
degrees d_j of the reduced matrix give the successive minima s^(d_j - M), and
the depth of the lattice is Delta = M - min_j d_j.

Truncated inputs are handled honestly: dropping coefficients at indices >= N
perturbs any candidate vector built from a coefficient vector q by at most
s^(M-N) * |q|, so a reported value is *certified* exactly when every reduced
column satisfies d_j - deg(U_j) > M - N, with U the tracked unimodular
multiplier.  Uncertified results carry the window that would have sufficed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import CertificationError, EnumerationCapError, FieldError, LatticeError
from .field import FieldSpec, LaurentSeries

_DEFAULT_ENUM_CAP = 200_000


class LatticeBasis:
    """Square basis over F_s((1/X)); entries are LaurentSeries, row-major."""

    __slots__ = ("field", "rank", "entries", "window")

    def __init__(self, field: FieldSpec, entries):
        rows = [list(row) for row in entries]
        r = len(rows)
        if r == 0 or any(len(row) != r for row in rows):
            raise LatticeError("basis must be square and nonempty")
        for row in rows:
            for e in row:
                if not isinstance(e, LaurentSeries):
                    raise LatticeError("entries must be LaurentSeries")
                if e.field != field:
                    raise FieldError("entry field mismatch")
        for j in range(r):
            if all(rows[i][j].coeffs.size == 0 for i in range(r)):
                raise LatticeError(f"column {j} has no known nonzero entry")
        precs = [e.prec for row in rows for e in row if e.prec is not None]
        self.field = field
        self.rank = r
        self.entries = rows
        self.window = min(precs) if precs else None

    @classmethod
    def identity(cls, field: FieldSpec, r: int) -> "LatticeBasis":
        one = LaurentSeries.one(field)
        zero = LaurentSeries.zero(field)
        return cls(field, [[one if i == j else zero for j in range(r)] for i in range(r)])

    def scale_all(self, c: int) -> "LatticeBasis":
        """Basis of X^c * Lambda."""
        return LatticeBasis(
            self.field, [[e.shift(c) for e in row] for row in self.entries]
        )

    def scaling_exponent(self) -> int:
        """Smallest M >= 0 with every known coefficient of X^M * B polynomial."""
        m = 0
        for row in self.entries:
            for e in row:
                if e.prec is not None:
                    m = max(m, e.prec - 1)
                else:
                    last = e.last_listed_index()
                    if last is not None:
                        m = max(m, last)
        return m

    def packed(self, scale: int | None = None) -> tuple[int, np.ndarray]:
        """(M, coefficient array [r, r, L]) of the polynomial matrix X^M * B."""
        M = self.scaling_exponent() if scale is None else scale
        r = self.rank
        degs = []
        for row in self.entries:
            for e in row:
                if e.coeffs.size:
                    degs.append(M - e.v)
        L = max(max(degs, default=0) + 1, 1)
        out = np.zeros((r, r, L), dtype=np.int64)
        for i in range(r):
            for j in range(r):
                e = self.entries[i][j]
                for k in range(e.coeffs.size):
                    d = M - (e.v + k)
                    if d < 0:
                        raise LatticeError(
                            f"entry ({i},{j}) has coefficients below the scaling window"
                        )
                    if e.coeffs[k]:
                        out[i, j, d] = e.coeffs[k]
        return M, out

    def __repr__(self) -> str:
        body = "; ".join(
            ", ".join(str(e) for e in row) for row in self.entries
        )
        return f"LatticeBasis(r={self.rank}: {body})"


@dataclass(frozen=True)
class DeltaValue:
    """Lattice depth with its certification status."""

    value: int
    certified: bool
    needed_precision: int | None = None

    def __float__(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class MinimaProfile:
    exponents: tuple[int, ...]
    certified: bool
    needed_precision: int | None = None


class ReducedBasis:
    """Weak Popov form of a scaled basis plus the transformation applied."""

    __slots__ = (
        "field",
        "rank",
        "scale",
        "window",
        "matrix",
        "transform",
        "degrees",
        "pivots",
    )

    def __init__(self, field, rank, scale, window, matrix, transform, degrees, pivots):
        self.field = field
        self.rank = rank
        self.scale = scale
        self.window = window
        self.matrix = matrix
        self.transform = transform
        self.degrees = tuple(int(d) for d in degrees)
        self.pivots = tuple(int(p) for p in pivots)

    def transform_degrees(self) -> tuple[int, ...]:
        """Max entry degree of each transformation column."""
        out = []
        for j in range(self.rank):
            col = self.transform[:, j, :]
            nz = np.nonzero(col)[1]
            out.append(int(nz.max()) if nz.size else 0)
        return tuple(out)

    def certification(self) -> tuple[bool, int | None]:
        if self.window is None:
            return True, None
        slack = self.scale - self.window
        udegs = self.transform_degrees()
        worst = max(u - d for u, d in zip(udegs, self.degrees))
        if worst < -slack:
            return True, None
        return False, self.scale + worst + 1

    def basis_series(self) -> LatticeBasis:
        """Reduced columns as series (X^-M times the polynomial columns).

        Column j of the output is exact data of the truncated model up to the
        transformation's amplification, so its honest window is
        window - deg(U_j); requires a certified reduction.
        """
        certified, needed = self.certification()
        if not certified:
            raise CertificationError(
                "reduced basis not certified at this window",
                needed_precision=needed,
            )
        udegs = self.transform_degrees()
        rows: list[list[LaurentSeries]] = [[None] * self.rank for _ in range(self.rank)]
        for j in range(self.rank):
            prec = None if self.window is None else self.window - udegs[j]
            for i in range(self.rank):
                coeffs = self.matrix[i, j, ::-1]  # degree L-1..0 -> index M-L+1..M
                L = coeffs.size
                entry = LaurentSeries(self.field, self.scale - L + 1, coeffs, None)
                if prec is not None:
                    entry = entry.truncate(prec)
                rows[i][j] = entry
        return LatticeBasis(self.field, rows)

    def transform_columns(self) -> list[list[LaurentSeries]]:
        """Columns of U as exact polynomial series (coordinates in the input basis)."""
        cols = []
        for j in range(self.rank):
            col = []
            for i in range(self.rank):
                coeffs = self.transform[i, j, ::-1]
                L = coeffs.size
                col.append(LaurentSeries(self.field, -L + 1, coeffs, None))
            cols.append(col)
        return cols


# ---------------------------------------------------------------------------
# packed-array reduction core (shared with the flow module)


def _col_entry_degrees(col: np.ndarray) -> np.ndarray:
    """Entry degrees of one packed column [r, L]; -1 marks zero entries."""
    mask = col != 0
    has = mask.any(axis=1)
    last = col.shape[1] - 1 - np.argmax(mask[:, ::-1], axis=1)
    return np.where(has, last, -1)


def _pivot_of(col: np.ndarray) -> tuple[int, int]:
    """(degree, pivot row) with the lowest row index among maximal degrees."""
    degs = _col_entry_degrees(col)
    d = int(degs.max())
    if d < 0:
        return -1, -1
    return d, int(np.argmax(degs == d))


def _reduce_packed(
    fs: FieldSpec,
    W: np.ndarray,
    U: np.ndarray,
    degrees: np.ndarray,
    pivots: np.ndarray,
    max_steps: int | None = None,
) -> int:
    """Drive (W, U) to weak Popov form in place; returns steps taken.

    ``degrees``/``pivots`` must hold current per-column values on entry and
    are maintained.  Collisions are resolved deterministically: among columns
    sharing the lowest colliding pivot row, the one with larger (degree,
    index) is reduced against the smaller.
    """
    r = W.shape[0]
    if max_steps is None:
        max_steps = int(degrees.clip(min=0).sum()) + r * r + 16
    steps = 0
    while True:
        order = {}
        clash = None
        for j in range(r):
            p = int(pivots[j])
            if p < 0:
                raise LatticeError("columns are linearly dependent")
            if p in order:
                a, b = order[p], j
                ka = (int(degrees[a]), a)
                kb = (int(degrees[b]), b)
                keep, red = (a, b) if ka <= kb else (b, a)
                if clash is None or p < clash[0]:
                    clash = (p, keep, red)
                if ka > kb:
                    order[p] = b
            else:
                order[p] = j
        if clash is None:
            return steps
        _, keep, red = clash
        _simple_transform(fs, W, U, degrees, pivots, keep, red)
        steps += 1
        if steps > max_steps:
            raise LatticeError("reduction did not terminate (singular input?)")


def _simple_transform(fs, W, U, degrees, pivots, keep: int, red: int) -> None:
    row = int(pivots[keep])
    dk, dr = int(degrees[keep]), int(degrees[red])
    e = dr - dk
    c = fs.mul(int(W[row, red, dr]), fs.inv(int(W[row, keep, dk])))
    L = W.shape[2]
    seg = fs.scale_arr(c, W[:, keep, : L - e])
    W[:, red, e:] = fs.sub_arr(W[:, red, e:], seg)
    LU = U.shape[2]
    unz = np.nonzero(U[:, keep, :])[1]
    if unz.size and int(unz.max()) + e >= LU:
        raise LatticeError("transform buffer overflow")  # guarded by caller sizing
    useg = fs.scale_arr(c, U[:, keep, : LU - e])
    U[:, red, e:] = fs.sub_arr(U[:, red, e:], useg)
    degrees[red], pivots[red] = _pivot_of(W[:, red, :])


def _alloc_transform(fs: FieldSpec, r: int, budget: int) -> np.ndarray:
    U = np.zeros((r, r, budget + 1), dtype=np.int64)
    for i in range(r):
        U[i, i, 0] = 1
    return U


def weak_popov(basis: LatticeBasis) -> ReducedBasis:
    """Column reduction to weak Popov form with tracked transformation."""
    fs = basis.field
    M, W = basis.packed()
    r = basis.rank
    W = W.copy()
    degrees = np.empty(r, dtype=np.int64)
    pivots = np.empty(r, dtype=np.int64)
    for j in range(r):
        degrees[j], pivots[j] = _pivot_of(W[:, j, :])
    # U entry degrees stay below 2 * (sum of column degrees) throughout
    budget = 2 * int(degrees.clip(min=0).sum()) + 8
    U = _alloc_transform(fs, r, budget)
    _reduce_packed(fs, W, U, degrees, pivots)
    return ReducedBasis(fs, r, M, basis.window, W, U, degrees, pivots)


def delta(basis: LatticeBasis | ReducedBasis) -> DeltaValue:
    """Depth Delta(Lambda) = -log_s of the first successive minimum."""
    red = basis if isinstance(basis, ReducedBasis) else weak_popov(basis)
    certified, needed = red.certification()
    value = red.scale - min(red.degrees)
    return DeltaValue(int(value), certified, needed)


def successive_minima(basis: LatticeBasis | ReducedBasis) -> MinimaProfile:
    """Sorted exponents e_1 <= ... <= e_r with lambda_i = s^(e_i)."""
    red = basis if isinstance(basis, ReducedBasis) else weak_popov(basis)
    certified, needed = red.certification()
    exps = tuple(sorted(d - red.scale for d in red.degrees))
    return MinimaProfile(exps, certified, needed)


# ---------------------------------------------------------------------------
# short-vector enumeration (independent of the reduction path)


def _poly_det_degree(fs: FieldSpec, P: np.ndarray) -> int:
    """Exact degree of det of a packed polynomial matrix, cofactor expansion."""
    r = P.shape[0]

    def mul_poly(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if not a.any() or not b.any():
            return np.zeros(1, dtype=np.int64)
        if fs.e == 1:
            return np.convolve(a, b) % fs.p
        out = np.zeros(a.size + b.size - 1, dtype=np.int64)
        for i, c in enumerate(a):
            if c:
                out[i : i + b.size] = fs.add_arr(
                    out[i : i + b.size], fs.mul_arr(np.int64(int(c)), b)
                )
        return out

    def det(rows: tuple[int, ...], cols: tuple[int, ...]) -> np.ndarray:
        if len(rows) == 1:
            return P[rows[0], cols[0], :].copy()
        i = rows[0]
        total = np.zeros(1, dtype=np.int64)
        for t, j in enumerate(cols):
            a = P[i, j, :]
            if not a.any():
                continue
            sub = det(rows[1:], cols[:t] + cols[t + 1 :])
            term = mul_poly(a, sub)
            if t % 2:
                term = fs.neg_arr(term)
            n = max(total.size, term.size)
            padded = np.zeros(n, dtype=np.int64)
            padded[: total.size] = total
            padded[: term.size] = fs.add_arr(padded[: term.size], term)
            total = padded
        return total

    d = det(tuple(range(r)), tuple(range(r)))
    nz = np.nonzero(d)[0]
    if nz.size == 0:
        raise LatticeError("singular basis (zero determinant)")
    return int(nz.max())


def _nullspace(fs: FieldSpec, A: np.ndarray) -> np.ndarray:
    """Basis of the right nullspace of A over F_s, rows = basis vectors."""
    m, n = A.shape
    R = A.astype(np.int64).copy()
    pivot_cols = []
    row = 0
    for col in range(n):
        sel = None
        for i in range(row, m):
            if R[i, col]:
                sel = i
                break
        if sel is None:
            continue
        if sel != row:
            R[[row, sel]] = R[[sel, row]]
        inv = fs.inv(int(R[row, col]))
        R[row] = fs.scale_arr(inv, R[row])
        for i in range(m):
            if i != row and R[i, col]:
                R[i] = fs.sub_arr(R[i], fs.scale_arr(int(R[i, col]), R[row]))
        pivot_cols.append(col)
        row += 1
        if row == m:
            break
    free = [c for c in range(n) if c not in pivot_cols]
    basis = np.zeros((len(free), n), dtype=np.int64)
    for k, fc in enumerate(free):
        basis[k, fc] = 1
        for i, pc in enumerate(pivot_cols):
            basis[k, pc] = fs.neg(int(R[i, fc]))
    return basis


def enumerate_short_vectors(
    basis: LatticeBasis, norm_bound: float, cap: int = _DEFAULT_ENUM_CAP
) -> list[tuple[LaurentSeries, ...]]:
    """All nonzero lattice vectors with max-norm <= norm_bound.

    The search box for integer coefficient vectors q is provable: from
    w = B q and Cramer, deg q_j is at most (sum of the r-1 largest column
    degrees of the scaled basis) + deg(w) - deg(det).  Inside the box the
    search is complete; small boxes are walked literally, larger ones are
    resolved as an F_s kernel computation on the coefficient constraints.
    Raises EnumerationCapError when the output would exceed ``cap``.
    """
    fs = basis.field
    r = basis.rank
    if norm_bound <= 0:
        return []
    M, P = basis.packed()
    delta_cap = math.floor(math.log(norm_bound) / math.log(fs.s) + 1e-9) + M
    if basis.window is not None and delta_cap <= M - basis.window:
        raise CertificationError(
            "norm bound below the truncation floor",
            needed_precision=M - delta_cap + 1,
        )
    if delta_cap < 0:
        return []
    col_degs = sorted(
        (int(_col_entry_degrees(P[:, j, :]).max()) for j in range(r)), reverse=True
    )
    det_deg = _poly_det_degree(fs, P)
    qdeg = sum(col_degs[: r - 1]) + delta_cap - det_deg
    if basis.window is not None:
        err_cap = M - basis.window + max(qdeg, 0)
        if err_cap >= 0 and delta_cap <= err_cap:
            raise CertificationError(
                "norm bound below the truncation floor",
                needed_precision=M + max(qdeg, 0) + 1,
            )
    if qdeg < 0:
        return []
    n_unknowns = r * (qdeg + 1)
    box = fs.s**n_unknowns if n_unknowns * math.log(fs.s) < 60 else None
    if box is not None and box <= 4096:
        sols = _enumerate_literal(fs, P, delta_cap, qdeg)
    else:
        sols = _enumerate_kernel(fs, P, delta_cap, qdeg, cap)
    if len(sols) > cap:
        raise EnumerationCapError(
            f"{len(sols)} vectors below the bound exceeds cap {cap}"
        )
    out = []
    for w in sorted(sols):
        vec = tuple(
            LaurentSeries.from_pairs(
                fs,
                {M - d: int(c) for d, c in enumerate(coeffs) if c},
                None if basis.window is None else basis.window,
            )
            for coeffs in w
        )
        out.append(vec)
    return out


def _apply_q(fs, P: np.ndarray, q: np.ndarray) -> np.ndarray:
    """w = (X^M B) q for packed P [r,r,L] and q [r, Q+1]; returns [r, L+Q]."""
    r, _, L = P.shape
    Q = q.shape[1] - 1
    out = np.zeros((r, L + Q), dtype=np.int64)
    for j in range(r):
        for d in range(Q + 1):
            c = int(q[j, d])
            if c:
                seg = fs.scale_arr(c, P[:, j, :])
                out[:, d : d + L] = fs.add_arr(out[:, d : d + L], seg)
    return out


def _enumerate_literal(fs, P, delta_cap, qdeg):
    r = P.shape[0]
    sols = []
    space = list(itertools.product(range(fs.s), repeat=qdeg + 1))
    for combo in itertools.product(space, repeat=r):
        q = np.array(combo, dtype=np.int64)
        if not q.any():
            continue
        w = _apply_q(fs, P, q)
        nz = np.nonzero(w)[1]
        if nz.size and nz.max() <= delta_cap:
            sols.append(tuple(tuple(int(c) for c in row) for row in w))
    return sols


def _enumerate_kernel(fs, P, delta_cap, qdeg, cap):
    r, _, L = P.shape
    hi = L + qdeg  # w degrees run 0 .. hi-1
    n_constraints_per_row = max(hi - 1 - delta_cap, 0)
    n_unknowns = r * (qdeg + 1)
    A = np.zeros((r * n_constraints_per_row, n_unknowns), dtype=np.int64)
    for i in range(r):
        for t_off in range(n_constraints_per_row):
            t = delta_cap + 1 + t_off
            rowidx = i * n_constraints_per_row + t_off
            for j in range(r):
                for d in range(qdeg + 1):
                    k = t - d
                    if 0 <= k < L:
                        A[rowidx, j * (qdeg + 1) + d] = P[i, j, k]
    null = _nullspace(fs, A)
    dim = null.shape[0]
    if dim * math.log(fs.s) > math.log(max(cap, 2)) + 1:
        raise EnumerationCapError(
            f"kernel dimension {dim} gives s^{dim} vectors, beyond cap {cap}"
        )
    sols = []
    for combo in itertools.product(range(fs.s), repeat=dim):
        if not any(combo):
            continue
        qflat = np.zeros(n_unknowns, dtype=np.int64)
        for c, vec in zip(combo, null):
            if c:
                qflat = fs.add_arr(qflat, fs.scale_arr(c, vec))
        if not qflat.any():
            continue
        q = qflat.reshape(r, qdeg + 1)
        w = _apply_q(fs, P, q)
        nz = np.nonzero(w)[1]
        if nz.size and nz.max() <= delta_cap:
            sols.append(tuple(tuple(int(c) for c in row) for row in w))
    return sorted(set(sols))
