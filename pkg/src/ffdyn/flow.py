"""Diagonal flows on unipotent lattices and their excursion statistics.

The model: A is an m x n matrix over O = F_s[[1/X]], u_A the block-unipotent
basis [[I, A], [0, I]], and g_t = diag(X^(nt) I_m, X^(-mt) I_n) the diagonal
flow.  The depth trajectory t -> Delta(g_t u_A Z^r) measures how well A is
approximable; the rate transform links a decay profile psi to the linear
drift r(a) that the trajectory must beat; and the tail table estimates
mu{Delta >= n} together with its geometric decay exponent.

Sampling is by iid uniform coefficients to an explicit window, pushed by a
fixed burn-in time (an equidistribution surrogate, cross-validated in rank 2
against exact masses).  Every reported depth carries its certification
against the input window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from .errors import BracketError, CertificationError, FieldError
from .field import FieldSpec, LaurentSeries
from .lattice import DeltaValue, LatticeBasis, _pivot_of, _reduce_packed
from .streams import stream

DEFAULT_BURN_IN = 8

# an experiment whose expected hit count stays below this is treated as
# convergent: ratio curves are meaningless there and raw counts are reported
DIVERGENCE_FLOOR = 10.0


@dataclass(frozen=True)
class FlowSpec:
    """Block sizes of the expanding/contracting flow on F_s((1/X))^(m+n)."""

    field: FieldSpec
    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("block sizes m, n must be >= 1")

    @property
    def rank(self) -> int:
        return self.m + self.n

    def drift(self, t: int) -> "DriftVector":
        exps = (self.n * t,) * self.m + (-self.m * t,) * self.n
        return DriftVector(exps)


@dataclass(frozen=True)
class DriftVector:
    """Integer diagonal exponents with zero sum: g = diag(X^t1, ..., X^tr)."""

    exponents: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(int(t) for t in self.exponents))
        if sum(self.exponents) != 0:
            raise ValueError("drift exponents must sum to zero")

    @property
    def rank(self) -> int:
        return len(self.exponents)

    def neg_norm(self) -> int:
        """max |t_i| over the non-positive entries."""
        return max((-t for t in self.exponents if t <= 0), default=0)


def unipotent_lattice(A, spec: FlowSpec) -> LatticeBasis:
    """Basis [[I_m, A], [0, I_n]] for A an m x n matrix over O."""
    fs = spec.field
    rows = _as_matrix(A)
    if len(rows) != spec.m or any(len(r) != spec.n for r in rows):
        raise ValueError(f"A must be {spec.m} x {spec.n}")
    for row in rows:
        for a in row:
            if a.field != fs:
                raise FieldError("entry field mismatch")
            if a.coeffs.size and a.v < 0:
                raise ValueError(
                    "entries must lie in O = F_s[[1/X]] (nonnegative order)"
                )
    one, zero = LaurentSeries.one(fs), LaurentSeries.zero(fs)
    m, r = spec.m, spec.rank
    out = []
    for i in range(r):
        line = []
        for j in range(r):
            if j < m:
                line.append(one if i == j else zero)
            elif i < m:
                line.append(rows[i][j - m])
            else:
                line.append(one if i == j else zero)
        out.append(line)
    return LatticeBasis(fs, out)


def _as_matrix(A) -> list[list[LaurentSeries]]:
    if isinstance(A, LaurentSeries):
        return [[A]]
    return [list(r) for r in A]


def flow_apply(
    basis: LatticeBasis, time: "int | DriftVector", spec: FlowSpec | None = None
) -> LatticeBasis:
    """Left-multiply the basis by the diagonal flow element."""
    if isinstance(time, DriftVector):
        drift = time
    else:
        if spec is None:
            raise ValueError("integer time needs a FlowSpec")
        drift = spec.drift(int(time))
    if drift.rank != basis.rank:
        raise ValueError("drift rank does not match basis rank")
    rows = [
        [e.shift(drift.exponents[i]) for e in basis.entries[i]]
        for i in range(basis.rank)
    ]
    return LatticeBasis(basis.field, rows)


# ---------------------------------------------------------------------------
# psi families and the rate transform


class PsiFunction:
    """Non-increasing positive decay profile psi: [x0, inf) -> (0, inf).

    Subclasses work on the log_s scale: ``llog(u) = log_s psi(s^u)`` for
    u >= u0 = log_s x0.  All norms in the model are s-powers, so psi is only
    ever evaluated at s-power arguments.
    """

    label = "psi"

    def __init__(self, s: int, u0: float):
        self.s = int(s)
        self.u0 = float(u0)

    def llog(self, u: float) -> float:
        raise NotImplementedError

    def value(self, x: float) -> float:
        u = math.log(x) / math.log(self.s)
        return float(self.s) ** self.llog(u)

    def x_psi_non_increasing(self, span: float = 80.0, points: int = 400) -> bool:
        """Whether x * psi(x) is non-increasing (needed by product chains)."""
        grid = np.linspace(self.u0, self.u0 + span, points)
        vals = [u + self.llog(u) for u in grid]
        return all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))

    def describe(self) -> str:
        return self.label


class PsiPowerLaw(PsiFunction):
    """psi(x) = s^(-c) * x^(-tau) on [s^u0, inf)."""

    def __init__(self, s: int, c: float = 0.0, tau: float = 1.0, u0: float = 0.0):
        if tau < 0:
            raise ValueError("tau must be >= 0 for a non-increasing profile")
        super().__init__(s, u0)
        self.c = float(c)
        self.tau = float(tau)
        self.label = f"power(c={self.c:g}, tau={self.tau:g})"

    def llog(self, u: float) -> float:
        return -self.c - self.tau * u


class PsiLogPower(PsiFunction):
    """psi(x) = 1 / (x * (log_s x)^sigma) on [s^u0, inf), u0 >= 1."""

    def __init__(self, s: int, sigma: float, u0: float = 1.0):
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        if u0 < 1:
            raise ValueError("u0 must be >= 1 so the log factor is positive")
        super().__init__(s, u0)
        self.sigma = float(sigma)
        self.label = f"logpower(sigma={self.sigma:g})"

    def llog(self, u: float) -> float:
        if u < 1 - 1e-12:
            raise ValueError("outside domain: log_s x < 1")
        return -u - self.sigma * (math.log(max(u, 1.0)) / math.log(self.s))


class PsiTable(PsiFunction):
    """Piecewise-linear log-profile through (u, log_s psi(s^u)) points."""

    def __init__(self, s: int, points):
        pts = sorted((float(u), float(l)) for u, l in points)
        if len(pts) < 2:
            raise ValueError("need at least two table points")
        us = [u for u, _ in pts]
        ls = [l for _, l in pts]
        if any(b <= a for a, b in zip(us, us[1:])):
            raise ValueError("u grid must be strictly increasing")
        if any(b > a + 1e-12 for a, b in zip(ls, ls[1:])):
            raise ValueError("profile must be non-increasing")
        super().__init__(s, us[0])
        self._us = np.array(us)
        self._ls = np.array(ls)
        self.u_max = us[-1]
        self.label = f"table({len(pts)} pts)"

    def llog(self, u: float) -> float:
        if u < self._us[0] - 1e-9 or u > self._us[-1] + 1e-9:
            raise ValueError(f"u = {u} outside the table range")
        return float(np.interp(u, self._us, self._ls))

    def x_psi_non_increasing(self, span: float = 0.0, points: int = 0) -> bool:
        vals = self._us + self._ls
        return bool(np.all(np.diff(vals) <= 1e-12))


@dataclass
class RateFunction:
    """Drift profile r(a) with lam(a) = a - n r(a) and big_l(a) = a + m r(a)."""

    m: int
    n: int
    s: int
    a0: float
    evaluator: object
    source: str = "callable"

    def r(self, a: float) -> float:
        if a < self.a0 - 1e-9:
            raise ValueError(f"a = {a} below the domain start a0 = {self.a0}")
        return float(self.evaluator(a))

    def lam(self, a: float) -> float:
        return a - self.n * self.r(a)

    def big_l(self, a: float) -> float:
        return a + self.m * self.r(a)


def psi_to_rate(psi: PsiFunction, m: int, n: int, tol: float = 1e-12) -> RateFunction:
    """Solve psi(s^(a - n r)) = s^(-(a + m r)) for r as a function of a.

    The residual h(r) = log_s psi(s^(a - n r)) + a + m r is non-decreasing in
    r (psi non-increasing), so bisection applies.  The bracket starts at
    [-a/m, (a - u0)/n]; the upper end keeps the psi argument inside the
    domain and satisfies h >= 0 for every a >= a0, with equality at a0.
    """
    if m < 1 or n < 1:
        raise ValueError("m, n must be >= 1")
    u0 = psi.u0
    a0 = (m * u0 - n * psi.llog(u0)) / (m + n)
    cache: dict[float, float] = {}

    def solve(a: float) -> float:
        got = cache.get(a)
        if got is not None:
            return got

        def h(r: float) -> float:
            return psi.llog(a - n * r) + a + m * r

        hi = (a - u0) / n
        if h(hi) < -tol:
            raise BracketError(f"no root above the domain edge at a = {a}")
        lo = min(-a / m, hi - 1.0)
        grow = 1.0
        while h(lo) > 0:
            lo -= grow
            grow *= 2
            if grow > 2**40:
                raise BracketError(f"bracket expansion failed at a = {a}")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if h(mid) > 0:
                hi = mid
            else:
                lo = mid
            if hi - lo < tol:
                break
        root = 0.5 * (lo + hi)
        cache[a] = root
        return root

    return RateFunction(m, n, psi.s, a0, solve, source=psi.describe())


class _PsiFromRate(PsiFunction):
    """psi(s^u) = s^(-big_l(a)) at the unique a with lam(a) = u."""

    def __init__(self, rate: RateFunction, tol: float):
        super().__init__(rate.s, rate.lam(rate.a0))
        self.rate = rate
        self.tol = tol
        self.label = f"from-rate({rate.source})"

    def llog(self, u: float) -> float:
        rate, tol = self.rate, self.tol
        if u < self.u0 - 1e-9:
            raise ValueError(f"u = {u} below x0")
        lo = rate.a0
        if rate.lam(lo) >= u:
            return -rate.big_l(lo)
        hi = max(lo + 1.0, u + 1.0)
        while rate.lam(hi) < u:
            hi = lo + 2 * (hi - lo)
            if hi - lo > 2**40:
                raise BracketError("lambda does not reach the requested level")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if rate.lam(mid) < u:
                lo = mid
            else:
                hi = mid
            if hi - lo < tol:
                break
        a = 0.5 * (lo + hi)
        return -rate.big_l(a)


def rate_to_psi(rate: RateFunction, tol: float = 1e-12) -> PsiFunction:
    """Invert the rate transform; lam must be strictly increasing."""
    return _PsiFromRate(rate, tol)


# ---------------------------------------------------------------------------
# continued-fraction ladder (m = n = 1 fast path)
#
# For A = sum_{i>=1} a_i X^(-i) known on indices 1..P, Euclid on (X^P, N)
# with N = sum a_i X^(P-i) yields the ladder D_k of cumulative
# convergent-denominator degrees, and
#     Delta(g_t u_A Z^2) = min(t - D_k, D_{k+1} - t)  for  D_k <= t <= D_{k+1}.
# A rung is certified against truncation when D_{k-1} + D_k <= P; past the
# last visible rung the value t - D_last is certified when 2t <= P + 1.


def _cf_ladder_binary(bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    P = int(bits.size)
    packed = np.packbits(bits.astype(np.uint8))
    N = int.from_bytes(packed.tobytes(), "big") >> (8 * packed.size - P)
    r0 = 1 << P
    r1 = N
    D = [0]
    cert = [True]
    while r1:
        d1 = r1.bit_length() - 1
        D.append(P - d1)
        cert.append(D[-2] + D[-1] <= P)
        while r0.bit_length() - 1 >= d1:
            r0 ^= r1 << (r0.bit_length() - 1 - d1)
        r0, r1 = r1, r0
    return np.array(D, dtype=np.int64), np.array(cert, dtype=bool)


def _cf_ladder_generic(
    fs: FieldSpec, coeffs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    P = int(coeffs.size)
    r0 = np.zeros(P + 1, dtype=np.int64)
    r0[P] = 1
    r1 = coeffs[::-1].astype(np.int64).copy()  # coefficient of X^(P-i) at slot P-i
    nz = np.nonzero(r1)[0]
    r1 = r1[: nz.max() + 1] if nz.size else r1[:0]
    D = [0]
    cert = [True]
    while r1.size:
        d1 = r1.size - 1
        D.append(P - d1)
        cert.append(D[-2] + D[-1] <= P)
        inv = fs.inv(int(r1[-1]))
        work = r0
        for d0 in range(work.size - 1, d1 - 1, -1):
            c = int(work[d0])
            if c:
                f = fs.mul(c, inv)
                seg = fs.scale_arr(f, r1)
                work[d0 - d1 : d0 + 1] = fs.sub_arr(work[d0 - d1 : d0 + 1], seg)
        nz = np.nonzero(work)[0]
        r0, r1 = r1, (work[: nz.max() + 1] if nz.size else work[:0]).copy()
    return np.array(D, dtype=np.int64), np.array(cert, dtype=bool)


def _sawtooth_eval(
    D: np.ndarray,
    rung_cert: np.ndarray,
    ts: np.ndarray,
    P: int,
    exact: bool,
) -> tuple[np.ndarray, np.ndarray]:
    k = np.searchsorted(D, ts, side="right") - 1
    left = ts - D[k]
    has_next = k + 1 < D.size
    k_next = np.minimum(k + 1, D.size - 1)
    delta = np.where(has_next, np.minimum(left, D[k_next] - ts), left)
    if exact:
        cert = np.ones(ts.size, dtype=bool)
    else:
        tail_ok = 2 * ts <= P + 1
        cert = rung_cert[k] & np.where(has_next, rung_cert[k_next], tail_ok)
    return delta.astype(np.int64), cert


# ---------------------------------------------------------------------------
# depth trajectories


@dataclass
class TrajectoryResult:
    """Depth along the flow with certification flags, t = 0..T."""

    spec: FlowSpec
    times: np.ndarray
    deltas: np.ndarray
    certified: np.ndarray
    meta: dict = dc_field(default_factory=dict)

    def delta_values(self) -> list[DeltaValue]:
        return [
            DeltaValue(int(d), bool(c))
            for d, c in zip(self.deltas, self.certified)
        ]

    def rows(self):
        for t, d, c in zip(self.times, self.deltas, self.certified):
            yield int(t), int(d), bool(c)


def delta_trajectory(
    A, spec: FlowSpec, T: int, method: str = "auto", strict: bool = True
) -> TrajectoryResult:
    """Depth of g_t u_A Z^r for t = 0..T.

    For m = n = 1 the trajectory is read off the Euclid degree ladder of A
    (best-approximation sawtooth); otherwise the scaled basis is reduced
    incrementally along t.  With strict=True a certification failure raises,
    reporting an estimate of the sufficient input precision.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    entries = _as_matrix(A)
    if method not in ("auto", "cf", "generic"):
        raise ValueError(f"unknown method {method!r}")
    if method == "cf" and not (spec.m == 1 and spec.n == 1):
        raise ValueError("the ladder path needs m = n = 1")
    use_cf = spec.m == 1 and spec.n == 1 and method != "generic"
    if use_cf:
        result = _trajectory_cf(spec, entries[0][0], T)
    else:
        result = _trajectory_generic(spec, entries, T)
    if strict and not result.certified.all():
        bad = int(np.argmin(result.certified))
        raise CertificationError(
            f"trajectory uncertified at t = {int(result.times[bad])}",
            needed_precision=result.meta.get("needed_precision"),
        )
    return result


def _trajectory_cf(spec: FlowSpec, a: LaurentSeries, T: int) -> TrajectoryResult:
    fs = spec.field
    if a.coeffs.size and a.v < 0:
        raise ValueError("entries must lie in O")
    exact = a.prec is None
    if exact:
        last = a.last_listed_index()
        P = max(last if last is not None else 1, 1)
    else:
        P = a.prec - 1
        if P < 1:
            raise CertificationError(
                "window too small for any ladder rung", needed_precision=2
            )
    coeffs = a.window(1, P + 1)
    if fs.p == 2 and fs.e == 1:
        D, cert = _cf_ladder_binary(coeffs)
    else:
        D, cert = _cf_ladder_generic(fs, coeffs)
    ts = np.arange(0, T + 1, dtype=np.int64)
    deltas, certified = _sawtooth_eval(D, cert, ts, P, exact)
    needed = None
    if not certified.all():
        k = np.searchsorted(D, ts, side="right") - 1
        need = 0
        for i in np.nonzero(~certified)[0]:
            ki = int(k[i])
            if ki + 1 < D.size:
                need = max(need, int(D[ki] + D[ki + 1]) + 1)
            else:
                need = max(need, 2 * int(ts[i]))
        needed = need
    return TrajectoryResult(
        spec,
        ts,
        deltas,
        certified,
        meta={"path": "cf", "precision": P, "rungs": D, "needed_precision": needed},
    )


def _trajectory_generic(spec: FlowSpec, entries, T: int) -> TrajectoryResult:
    fs = spec.field
    basis = unipotent_lattice(entries, spec)
    N = basis.window
    m, n, r = spec.m, spec.n, spec.rank
    M = max(basis.scaling_exponent(), m * T)
    L = M + n * T + 1
    _, W0 = basis.packed(scale=M)
    W = np.zeros((r, r, L), dtype=np.int64)
    W[:, :, : W0.shape[2]] = W0
    degrees = np.empty(r, dtype=np.int64)
    pivots = np.empty(r, dtype=np.int64)
    for j in range(r):
        degrees[j], pivots[j] = _pivot_of(W[:, j, :])
    # transform degrees stay well below twice (initial column degrees plus
    # flow stretch); the reducer raises before overflowing the buffer
    budget = 2 * (r * M + 2 * m * n * T) + 16
    U = np.zeros((r, r, budget), dtype=np.int64)
    for i in range(r):
        U[i, i, 0] = 1
    deltas = np.empty(T + 1, dtype=np.int64)
    certflags = np.empty(T + 1, dtype=bool)
    needed = 0

    def record(t: int) -> None:
        nonlocal needed
        deltas[t] = M - int(degrees.min())
        if N is None:
            certflags[t] = True
            return
        anynz = (U != 0).any(axis=0)
        udeg = np.where(
            anynz.any(axis=1),
            U.shape[2] - 1 - np.argmax(anynz[:, ::-1], axis=1),
            0,
        )
        # truncation error of the input sits at packed degree
        # <= M + n t - N + deg U_j; it must stay below every pivot degree
        worst = int((udeg - degrees).max())
        ok = worst < N - M - n * t
        certflags[t] = ok
        if not ok:
            needed = max(needed, M + n * t + worst + 1)

    _reduce_packed(fs, W, U, degrees, pivots)
    record(0)
    for t in range(1, T + 1):
        top = np.roll(W[:m], n, axis=2)
        top[:, :, :n] = 0
        W[:m] = top
        bot = np.roll(W[m:], -m, axis=2)
        bot[:, :, -m:] = 0
        W[m:] = bot
        for j in range(r):
            degrees[j], pivots[j] = _pivot_of(W[:, j, :])
        _reduce_packed(fs, W, U, degrees, pivots)
        record(t)
    ts = np.arange(0, T + 1, dtype=np.int64)
    return TrajectoryResult(
        spec,
        ts,
        deltas,
        certflags,
        meta={
            "path": "generic",
            "scale": M,
            "window": N,
            "needed_precision": needed if needed else None,
        },
    )


# ---------------------------------------------------------------------------
# tail distribution


@dataclass(frozen=True)
class KappaFit:
    kappa: float
    prefactor: float
    thresholds: tuple[int, ...]


class TailTable:
    """Estimates (or exact values) of Phi(n) = mu{Delta >= n}."""

    def __init__(self, s, thresholds, values, hits=None, trials=None, exact=False):
        self.s = int(s)
        self.thresholds = tuple(int(t) for t in thresholds)
        self.values = tuple(values)
        if any(b > a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("tail values must be non-increasing")
        if any(v < 0 or v > 1 for v in self.values):
            raise ValueError("tail values must lie in [0, 1]")
        self.hits = None if hits is None else tuple(int(h) for h in hits)
        self.trials = None if trials is None else int(trials)
        self.exact = bool(exact)

    def phi(self, nthr: int) -> float:
        try:
            return float(self.values[self.thresholds.index(nthr)])
        except ValueError:
            raise ValueError(f"threshold {nthr} not in the table") from None

    def ci(self, nthr: int, z: float = 1.96) -> tuple[float, float]:
        """Wilson score interval for the hit fraction."""
        if self.exact or self.hits is None:
            v = self.phi(nthr)
            return v, v
        i = self.thresholds.index(nthr)
        nt = self.trials
        phat = self.hits[i] / nt
        denom = 1 + z * z / nt
        center = (phat + z * z / (2 * nt)) / denom
        half = z * math.sqrt(phat * (1 - phat) / nt + z * z / (4 * nt * nt)) / denom
        return max(center - half, 0.0), min(center + half, 1.0)

    def kappa_fit(self, min_hits: int = 50) -> KappaFit:
        """Least-squares fit of log_s Phi(n) = log_s C - kappa n over the
        populated thresholds n >= 1 (at least min_hits sample hits each)."""
        xs, ys = [], []
        for i, nthr in enumerate(self.thresholds):
            if nthr < 1:
                continue
            v = float(self.values[i])
            if v <= 0:
                continue
            if not self.exact and self.hits is not None and self.hits[i] < min_hits:
                continue
            xs.append(float(nthr))
            ys.append(math.log(v) / math.log(self.s))
        if len(xs) < 2:
            raise ValueError("not enough populated thresholds for a fit")
        slope, intercept = np.polyfit(np.array(xs), np.array(ys), 1)
        return KappaFit(
            kappa=float(-slope),
            prefactor=float(self.s) ** float(intercept),
            thresholds=tuple(int(x) for x in xs),
        )

    def summary(self) -> dict:
        out = {
            "s": self.s,
            "thresholds": list(self.thresholds),
            "phi": [float(v) for v in self.values],
            "exact": self.exact,
        }
        if self.hits is not None:
            out["hits"] = list(self.hits)
            out["trials"] = self.trials
        try:
            fit = self.kappa_fit()
            out["kappa_fit"] = {"kappa": fit.kappa, "prefactor": fit.prefactor}
        except ValueError:
            pass
        return out


def exact_rank2_tail(s: int, n_max: int = 16) -> TailTable:
    """Exact stationary tail in rank 2: Phi(n) = s^(1 - 2n) for n >= 1.

    This is the mass of the depth-n cusp classes in the rank-2 quotient; the
    tree-geometry tests re-derive it independently from stabilizer orders.
    """
    thresholds = list(range(0, n_max + 1))
    values = [
        Fraction(1) if t < 1 else Fraction(1, s ** (2 * t - 1)) for t in thresholds
    ]
    return TailTable(s, thresholds, values, exact=True)


def sample_matrix(
    fs: FieldSpec, rng: np.random.Generator, m: int, n: int, precision: int
) -> list[list[LaurentSeries]]:
    """iid uniform matrix over O, coefficients known on indices 0..precision-1."""
    out = []
    for _ in range(m):
        row = []
        for _ in range(n):
            coeffs = rng.integers(0, fs.s, size=precision)
            row.append(LaurentSeries(fs, 0, coeffs, precision))
        out.append(row)
    return out


def tail_distribution(
    spec: FlowSpec,
    trials: int,
    seed: int,
    burn_in: int = DEFAULT_BURN_IN,
    precision: int | None = None,
    thresholds=None,
    tag: str = "tail",
) -> TailTable:
    """Empirical tail of Delta(g_burn u_A Z^r) over iid uniform A."""
    if trials < 1:
        raise ValueError("need at least one trial")
    fs = spec.field
    if precision is None:
        precision = 2 * spec.rank * burn_in + 64
    t_arr = np.array([burn_in], dtype=np.int64)
    deltas = np.empty(trials, dtype=np.int64)
    for trial in range(trials):
        rng = stream(seed, tag, trial)
        if spec.m == 1 and spec.n == 1:
            coeffs = rng.integers(0, fs.s, size=precision)
            if fs.p == 2 and fs.e == 1:
                D, cert = _cf_ladder_binary(coeffs)
            else:
                D, cert = _cf_ladder_generic(fs, coeffs)
            d, c = _sawtooth_eval(D, cert, t_arr, precision, False)
            ok, val = bool(c[0]), int(d[0])
        else:
            entries = sample_matrix(fs, rng, spec.m, spec.n, precision)
            traj = delta_trajectory(entries, spec, burn_in, strict=False)
            ok, val = bool(traj.certified[-1]), int(traj.deltas[-1])
        if not ok:
            raise CertificationError(
                f"trial {trial} uncertified at burn-in; raise the precision",
                needed_precision=2 * precision,
            )
        deltas[trial] = val
    if thresholds is None:
        thresholds = list(range(0, int(deltas.max(initial=0)) + 2))
    hits = [int((deltas >= nthr).sum()) for nthr in thresholds]
    values = [h / trials for h in hits]
    return TailTable(fs.s, thresholds, values, hits=hits, trials=trials)


# ---------------------------------------------------------------------------
# Borel-Cantelli experiments


def _event_matrix(
    spec: FlowSpec,
    thr: np.ndarray,
    trials: int,
    seed: int,
    burn_in: int,
    precision: int,
    tag: str,
    threads: int = 1,
) -> np.ndarray:
    """events[trial, t-1] = 1 iff Delta(g_(t+burn_in) u_A Z^r) >= thr[t-1]."""
    fs = spec.field
    T = int(thr.size)

    def one_trial(trial: int) -> np.ndarray:
        rng = stream(seed, tag, trial)
        if spec.m == 1 and spec.n == 1:
            coeffs = rng.integers(0, fs.s, size=precision)
            if fs.p == 2 and fs.e == 1:
                D, cert = _cf_ladder_binary(coeffs)
            else:
                D, cert = _cf_ladder_generic(fs, coeffs)
            ts = np.arange(1, T + 1, dtype=np.int64) + burn_in
            deltas, certf = _sawtooth_eval(D, cert, ts, precision, False)
        else:
            entries = sample_matrix(fs, rng, spec.m, spec.n, precision)
            traj = delta_trajectory(entries, spec, T + burn_in, strict=False)
            deltas = traj.deltas[burn_in + 1 :]
            certf = traj.certified[burn_in + 1 :]
        if not certf.all():
            bad = int(np.argmin(certf)) + 1
            raise CertificationError(
                f"trial {trial} uncertified at t = {bad}; raise the precision",
                needed_precision=2 * precision,
            )
        return (deltas >= thr).astype(np.int8)

    events = np.empty((trials, T), dtype=np.int8)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            for trial, row in enumerate(ex.map(one_trial, range(trials))):
                events[trial] = row
    else:
        for trial in range(trials):
            events[trial] = one_trial(trial)
    return events


def _phi_of_thresholds(table: TailTable, thresholds: np.ndarray) -> np.ndarray:
    known = {t: float(v) for t, v in zip(table.thresholds, table.values)}
    out = np.empty(thresholds.size, dtype=float)
    for i, t in enumerate(thresholds):
        t = int(t)
        if t <= 0:
            out[i] = 1.0
        elif t in known:
            out[i] = known[t]
        else:
            raise ValueError(f"threshold {t} missing from the tail table")
    return out


def _geometric_checkpoints(T: int, count: int) -> np.ndarray:
    return np.unique(
        np.concatenate(
            [
                np.geomspace(1, T, num=min(count, T)).astype(np.int64),
                np.array([T], dtype=np.int64),
            ]
        )
    )


@dataclass
class StrongBCResult:
    """Hit counts of {Delta(g_t x) >= r_t} against the expected sum."""

    spec: FlowSpec
    T: int
    trials: int
    burn_in: int
    thresholds: np.ndarray
    checkpoints: np.ndarray
    expected: np.ndarray
    counts: np.ndarray  # [trials, len(checkpoints)]
    divergent: bool

    @property
    def ratios(self) -> np.ndarray | None:
        if not self.divergent:
            return None
        return self.counts / self.expected[None, :]

    def final_ratio_quantiles(self, qs=(0.25, 0.5, 0.75)) -> dict[float, float]:
        if not self.divergent:
            raise ValueError("ratios are not meaningful in the convergent regime")
        finals = self.ratios[:, -1]
        return {float(q): float(np.quantile(finals, q)) for q in qs}

    def summary(self) -> dict:
        out = {
            "m": self.spec.m,
            "n": self.spec.n,
            "s": self.spec.field.s,
            "T": self.T,
            "trials": self.trials,
            "burn_in": self.burn_in,
            "expected_final": float(self.expected[-1]),
            "divergent": self.divergent,
        }
        if self.divergent:
            out["ratio_quantiles"] = {
                str(q): v for q, v in self.final_ratio_quantiles().items()
            }
        else:
            finals = self.counts[:, -1]
            out["final_counts"] = {
                "min": int(finals.min()),
                "median": float(np.median(finals)),
                "max": int(finals.max()),
            }
        return out


def strong_bc_experiment(
    spec: FlowSpec,
    thresholds,
    trials: int,
    seed: int,
    burn_in: int = DEFAULT_BURN_IN,
    precision: int | None = None,
    phi_table: TailTable | None = None,
    checkpoints: int = 32,
    tag: str = "strong-bc",
    threads: int = 1,
) -> StrongBCResult:
    """Per-trial curves N -> #{t <= N : Delta(g_(t+burn) x) >= r_t} / sum Phi(r_t).

    thresholds holds the ladder r_t for t = 1..T (floats are ceiled).  The
    expected sum uses the exact rank-2 tail when m = n = 1; other block
    shapes need a calibrated phi_table.  When the expected final sum is below
    the divergence floor the result is flagged convergent and counts are
    reported raw.
    """
    thr = np.ceil(np.asarray(thresholds, dtype=float) - 1e-9).astype(np.int64)
    T = int(thr.size)
    if T < 1:
        raise ValueError("need at least one threshold")
    if phi_table is None:
        if spec.m == 1 and spec.n == 1:
            phi_table = exact_rank2_tail(spec.field.s, max(int(thr.max(initial=1)), 1))
        else:
            raise ValueError("pass a phi_table for block shapes other than 1+1")
    phis = _phi_of_thresholds(phi_table, thr)
    expected_full = np.cumsum(phis)
    cps = _geometric_checkpoints(T, checkpoints)
    if precision is None:
        precision = 2 * (T + burn_in) + 96
    events = _event_matrix(spec, thr, trials, seed, burn_in, precision, tag, threads)
    counts = np.cumsum(events, axis=1, dtype=np.int64)[:, cps - 1]
    return StrongBCResult(
        spec=spec,
        T=T,
        trials=trials,
        burn_in=burn_in,
        thresholds=thr,
        checkpoints=cps,
        expected=expected_full[cps - 1],
        counts=counts,
        divergent=bool(expected_full[-1] >= DIVERGENCE_FLOOR),
    )


# ---------------------------------------------------------------------------
# quasi-independence diagnostics


@dataclass
class DiagnosticsReport:
    """Windowed second-moment diagnostics for the event sums S_(M,N).

    c_estimate is the constant in E[S^2] <= (E S)^2 + C E[S] observed over
    the checkpoints; covariance_excess subtracts the pure-Bernoulli variance,
    so values near zero indicate quasi-independent events.
    """

    start: int
    trials: int
    checkpoints: np.ndarray
    sums: np.ndarray
    expectations: np.ndarray
    variances: np.ndarray
    covariance_excess: np.ndarray
    c_estimate: float
    ed_sums: dict[float, float]
    notes: str = ""

    def summary(self) -> dict:
        return {
            "start": self.start,
            "trials": self.trials,
            "c_estimate": self.c_estimate,
            "ed_sums": {str(b): v for b, v in self.ed_sums.items()},
            "notes": self.notes,
        }


def ed_pair_sum(spec: FlowSpec, beta: float, window: int = 64) -> float:
    """sum over t of ||g_t g_u^(-1)||^(-beta), norms taken from the matrices.

    The summand depends only on tau = t - u, so the sup over u is the full
    two-sided sum; the finite window is completed with the exact geometric
    tails.  The diagonal term contributes 1.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    fs = spec.field
    ident = LatticeBasis.identity(fs, spec.rank)
    total = 1.0
    for tau in range(1, window + 1):
        for sgn in (tau, -tau):
            gb = flow_apply(ident, sgn, spec)
            norm = max(
                e.abs_value() for row in gb.entries for e in row if e.coeffs.size
            )
            total += norm**-beta
    qn = float(fs.s) ** (-beta * spec.n)
    qm = float(fs.s) ** (-beta * spec.m)
    tail = qn ** (window + 1) / (1 - qn) + qm ** (window + 1) / (1 - qm)
    return total + tail


def quasi_independence_report(
    spec: FlowSpec,
    thresholds,
    trials: int,
    seed: int,
    window: tuple[int, int] | None = None,
    burn_in: int = DEFAULT_BURN_IN,
    precision: int | None = None,
    phi_table: TailTable | None = None,
    checkpoints: int = 24,
    betas=(0.25, 0.5, 1.0),
    tag: str = "quasi",
) -> DiagnosticsReport:
    """Monte-Carlo pair-correlation diagnostics for the depth events."""
    thr = np.ceil(np.asarray(thresholds, dtype=float) - 1e-9).astype(np.int64)
    T = int(thr.size)
    if T < 1:
        raise ValueError("need at least one threshold")
    lo, hi = window if window is not None else (1, T)
    if not (1 <= lo <= hi <= T):
        raise ValueError("window must satisfy 1 <= M <= N <= T")
    if phi_table is None:
        if spec.m == 1 and spec.n == 1:
            phi_table = exact_rank2_tail(spec.field.s, max(int(thr.max(initial=1)), 1))
        else:
            raise ValueError("pass a phi_table for block shapes other than 1+1")
    phis = _phi_of_thresholds(phi_table, thr)
    if precision is None:
        precision = 2 * (T + burn_in) + 96
    events = _event_matrix(spec, thr, trials, seed, burn_in, precision, tag)
    cum = np.cumsum(events, axis=1, dtype=np.int64)
    base = cum[:, lo - 2] if lo >= 2 else np.zeros(trials, dtype=np.int64)
    cps = lo - 1 + _geometric_checkpoints(hi - lo + 1, checkpoints)
    S = cum[:, cps - 1] - base[:, None]
    mean = S.mean(axis=0)
    mean_sq = (S.astype(float) ** 2).mean(axis=0)
    var = mean_sq - mean**2
    expectations = np.array([phis[lo - 1 : c].sum() for c in cps])
    bernoulli = np.array(
        [(phis[lo - 1 : c] * (1 - phis[lo - 1 : c])).sum() for c in cps]
    )
    excess = var - bernoulli
    with np.errstate(divide="ignore", invalid="ignore"):
        cvals = np.where(expectations > 0, var / expectations, np.nan)
    valid = cvals[~np.isnan(cvals)]
    c_est = float(valid.max()) if valid.size else float("nan")
    eds = {float(b): ed_pair_sum(spec, float(b)) for b in betas}
    return DiagnosticsReport(
        start=lo,
        trials=trials,
        checkpoints=cps,
        sums=mean,
        expectations=expectations,
        variances=var,
        covariance_excess=excess,
        c_estimate=c_est,
        ed_sums=eds,
        notes="pair sums include the diagonal; norms computed from flow matrices",
    )
