"""Tests for type-A cusp-volume combinatorics: rho pairings, dominant
counts, affine lengths, and the tail-to-power-law ratio."""

import itertools
import math
import random

import pytest

import oracles
from ffdyn.errors import EnumerationCapError
from ffdyn.weyl import (
    AffineWeylElement,
    RootSystemSpec,
    affine_length,
    cusp_rows,
    cusp_tail,
    dominant_cocharacters,
    dominant_count,
    fiber_report,
    is_dominant,
    ratio_band,
    rho_pairing,
    translation_element,
)

A1 = RootSystemSpec(1)
A2 = RootSystemSpec(2)
A3 = RootSystemSpec(3)


# ---------------------------------------------------------------------------
# root data and the pairing


def test_root_counts():
    for spec in (A1, A2, A3):
        r = spec.rank
        assert len(spec.positive_roots) == r * (r + 1) // 2
        assert spec.longest_length == r * (r + 1) // 2
        assert spec.weyl_order == math.factorial(r + 1)
    with pytest.raises(ValueError):
        RootSystemSpec(0)


def test_rho_pairing_examples():
    assert rho_pairing((1, -1)) == 2
    assert rho_pairing((1, 0, -1)) == 4
    assert rho_pairing((0, 0, 0)) == 0
    assert rho_pairing((2, 0, -2)) == 8


def test_rho_pairing_matches_root_sum():
    rng = random.Random(0)
    for spec in (A1, A2, A3):
        n = spec.rank + 1
        for _ in range(20):
            lam = [rng.randint(-5, 5) for _ in range(n)]
            direct = sum(lam[i] - lam[j] for i, j in spec.positive_roots)
            assert rho_pairing(lam) == direct


def test_is_dominant():
    assert is_dominant((2, 0, -2))
    assert is_dominant((0, 0))
    assert not is_dominant((0, 1, -1))
    assert not is_dominant((2, 1, -1))


# ---------------------------------------------------------------------------
# dominant counting


def test_dominant_count_rank1_pattern():
    for j in range(7):
        assert dominant_count(2 * j, A1) == 1
        assert dominant_count(2 * j + 1, A1) == 0


def test_dominant_count_rank2_values():
    got = [dominant_count(l, A2) for l in range(13)]
    assert got == [1, 0, 0, 0, 1, 0, 2, 0, 1, 0, 2, 0, 3]


def test_dominant_count_zero_is_one():
    for r in range(1, 5):
        assert dominant_count(0, RootSystemSpec(r)) == 1


def test_dominant_count_matches_brute_force():
    for spec, lmax in [(A1, 14), (A2, 12), (A3, 8)]:
        for l in range(lmax + 1):
            assert dominant_count(l, spec) == oracles.dominant_count_oracle(
                spec.rank, l
            )


def test_dominant_enumeration_consistent():
    for spec in (A2, A3):
        for l in (0, 6, 12, 17):
            lams = list(dominant_cocharacters(l, spec))
            assert len(lams) == dominant_count(l, spec)
            for lam in lams:
                assert is_dominant(lam)
                assert rho_pairing(lam) == l
            assert len(set(lams)) == len(lams)


def test_dominant_count_growth_band():
    # count(l) tracks l^(r-1) on its support; the band is over support only
    # since counts vanish off the even sublattice
    for spec, cap in [(A1, 1.01), (A2, 3.0), (A3, 8.0)]:
        r = spec.rank
        ratios = [
            dominant_count(l, spec) / float(l) ** (r - 1)
            for l in range(10, 61)
            if dominant_count(l, spec) > 0
        ]
        assert ratios
        assert max(ratios) / min(ratios) <= cap


def test_dominant_count_cap():
    with pytest.raises(EnumerationCapError):
        dominant_count(10**8, A3, cap=10**6)
    with pytest.raises(ValueError):
        dominant_count(-1, A2)


# ---------------------------------------------------------------------------
# affine lengths


def test_translation_length_is_rho_pairing():
    for spec in (A1, A2, A3):
        for l in range(0, 61, 6):
            for lam in dominant_cocharacters(l, spec):
                assert affine_length(translation_element(lam)) == l


def test_affine_length_of_finite_elements_counts_inversions():
    for n in (2, 3, 4):
        zero = (0,) * n
        for w in itertools.permutations(range(n)):
            inv = sum(
                1
                for i in range(n)
                for j in range(i + 1, n)
                if w[i] > w[j]
            )
            assert affine_length(AffineWeylElement(w, zero)) == inv


def test_affine_length_matches_hyperplane_oracle():
    rng = random.Random(5)
    for r in (1, 2, 3):
        n = r + 1
        for _ in range(25):
            lam = [rng.randint(-4, 4) for _ in range(n - 1)]
            lam.append(-sum(lam))
            w = list(range(n))
            rng.shuffle(w)
            elem = AffineWeylElement(tuple(w), tuple(lam))
            assert affine_length(elem) == oracles.affine_length_oracle(
                tuple(lam), tuple(w)
            )


def test_affine_element_validation():
    with pytest.raises(ValueError):
        AffineWeylElement((0, 0), (1, -1))
    with pytest.raises(ValueError):
        AffineWeylElement((0, 1, 2), (1, -1))


# ---------------------------------------------------------------------------
# fibers


def test_fiber_report_rank1_exact():
    rep = fiber_report((1, -1), A1)
    assert rep.base_length == 2
    assert sorted(rep.lengths) == [1, 2, 2, 3]
    assert rep.spread == 2 * A1.longest_length
    v = rep.volume_sum(2)
    lo, hi = rep.volume_bounds(2, A1)
    assert lo <= v <= hi


def test_fiber_report_bounds_and_spread():
    for spec, lam in [(A2, (2, 0, -2)), (A2, (3, 0, -3)), (A3, (2, 0, 0, -2))]:
        rep = fiber_report(lam, spec)
        assert len(rep.elements) <= spec.weyl_order**2
        base = rep.base_length
        assert all(abs(l - base) <= 2 * spec.longest_length for l in rep.lengths)
        assert base in rep.lengths
        for q in (2, 3):
            lo, hi = rep.volume_bounds(q, spec)
            assert lo <= rep.volume_sum(q) <= hi


def test_fiber_report_validation():
    with pytest.raises(ValueError):
        fiber_report((0, 1, -1), A2)
    with pytest.raises(ValueError):
        fiber_report((1, -1), A2)


# ---------------------------------------------------------------------------
# cusp tail


def test_cusp_tail_rank1_closed_form():
    for q in (2, 3, 4):
        for T in range(2, 20):
            row = cusp_tail(T, A1, q)
            j0 = (T + 1) // 2
            want = float(q) ** (-2 * j0) * q**2 / (q**2 - 1)
            assert row.tail == pytest.approx(want, rel=1e-11)
            comp = float(q) ** -T * q / (q - 1)
            assert row.comparator == pytest.approx(comp, rel=1e-11)


def test_cusp_tail_monotone_to_zero():
    rows = cusp_rows(A2, 2, 2, 40)
    tails = [r.tail for r in rows]
    assert all(a >= b for a, b in zip(tails, tails[1:]))
    assert tails[-1] < 1e-10
    assert all(r.remainder_bound <= 1e-12 * r.tail for r in rows)


def test_cusp_tail_band_rank1_is_q():
    for q in (2, 3, 4):
        band = ratio_band(cusp_rows(A1, q, 2, 40))
        assert band == pytest.approx(q, rel=1e-9)


def test_cusp_tail_band_rank2_small_q():
    band = ratio_band(cusp_rows(A2, 2, 2, 40))
    assert band <= 4.0


def test_cusp_tail_bands_frozen():
    # honest values; the support of <rho,.> starts at 4 (r=2) resp. 6 (r=3),
    # so small T sits in a dead zone that inflates the band by powers of q
    expected = {
        (2, 3): 5.985,
        (2, 4): 10.809,
        (3, 2): 5.428,
        (3, 3): 13.186,
        (3, 4): 37.173,
    }
    for (r, q), want in expected.items():
        band = ratio_band(cusp_rows(RootSystemSpec(r), q, 2, 40))
        assert band == pytest.approx(want, rel=5e-3)


def test_cusp_tail_validation():
    with pytest.raises(ValueError):
        cusp_tail(0, A2, 2)
    with pytest.raises(ValueError):
        cusp_tail(2, A2, 1)


def test_cusp_tail_row_shape():
    row = cusp_tail(3, A2, 2)
    T, tail, comp, ratio = row.row()
    assert T == 3 and ratio == pytest.approx(tail / comp)


def test_rank1_matches_tree_ray_tail():
    # S(2n) against the even-vertex mass tail of the quotient ray: the two
    # decay with the same exponent, so their ratio is a single constant
    for q in (2, 3, 4):
        ratios = []
        for n in range(1, 11):
            s_val = cusp_tail(2 * n, A1, q).tail
            tree_val = float(oracles.even_vertex_tail(q, n))
            ratios.append(s_val / tree_val)
        assert max(ratios) / min(ratios) == pytest.approx(1.0, abs=1e-9)
