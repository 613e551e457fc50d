import math
import random
from fractions import Fraction
from itertools import product

import pytest
from gmpy2 import mpq
from hypothesis import given, strategies as st

from fibermeasure import systems
from fibermeasure.analysis import (
    AffineSubspace,
    approximation_window,
    ball_mass_bracket,
    counterexample_ratio,
    counterexample_row,
    counterexample_schedule,
    decay_scan,
    doubling_scan,
    dyadic_interval_mass,
    enumerate_ball_bracket,
    plan_fiber,
    slab_mass_upper,
)
from fibermeasure.construction import decay_exponent
from fibermeasure.disintegration import OmegaStream
from fibermeasure.errors import DomainError, InvariantError
from fibermeasure.rational import Q


# -- independent 1-D oracles ------------------------------------------------


def _interval(ifs, w):
    """φ_w([0,1]) from the raw ratio/sign/translation in plain Fractions."""
    lo, hi = Fraction(0), Fraction(1)
    for a in reversed(w):
        m = ifs.map(a)
        k = Fraction(str(m.ratio * m.orthogonal[0][0]))
        t = Fraction(str(m.translation[0]))
        lo, hi = sorted((k * lo + t, k * hi + t))
    return lo, hi


def _window_oracle(plan, fm, x, r):
    ifs = fm.ifs
    x, r = Fraction(str(x)), Fraction(str(r))
    s, R = Fraction(str(ifs.max_ratio)), Fraction(str(ifs.domain_radius))
    D = 0
    while R * s**D > r / 2:
        D += 1
    subsets = [fm.subset_at(j) for j in range(D)]

    def dfs(w):
        lo, hi = _interval(ifs, w)
        if not lo <= x <= hi:
            return None
        if len(w) == D:
            return w
        for a in subsets[len(w)]:
            got = dfs(w + (a,))
            if got is not None:
                return got
        return None

    u = dfs(())
    N2 = next(n for n in range(D + 1) if x - r <= _interval(ifs, u[:n])[0] and _interval(ifs, u[:n])[1] <= x + r)
    meeting = []
    for w in product(*subsets):
        lo, hi = _interval(ifs, w)
        if hi >= x - 2 * r and lo <= x + 2 * r:
            meeting.append(w)
    k = 0
    while all(len(w) > k and w[k] == meeting[0][k] for w in meeting):
        k += 1
    return min(k, N2 - 1), N2


def _cantor_mass(lo, hi, depth=14):
    """μ([lo, hi]) for the middle-thirds Cantor measure, summed over triadic cells (exact for triadic ends)."""
    total = Fraction(0)
    cells = [(Fraction(0), Fraction(1), Fraction(1))]
    for _ in range(depth):
        nxt = []
        for a, b, m in cells:
            if b < lo or a > hi:
                continue
            if lo <= a and b <= hi:
                total += m
                continue
            t = (b - a) / 3
            nxt += [(a, a + t, m / 2), (b - t, b, m / 2)]
        cells = nxt
    return total, total + sum(m for *_, m in cells)


# -- windows -------------------------------------------------------------------


def test_cantor_window_example(cantor_plan):
    fm = plan_fiber(cantor_plan, OmegaStream.constant(cantor_plan.family.labels[0]))
    w = approximation_window(cantor_plan, fm, (0,), mpq(1, 9))
    assert (w.N1, w.N2) == (1, 2)
    with pytest.raises(DomainError):
        approximation_window(cantor_plan, fm, (0,), cantor_plan.c1 / 2)


def test_tri_window_example(tri_plan):
    fm = plan_fiber(tri_plan, OmegaStream.constant(0))
    w = approximation_window(tri_plan, fm, (0,), mpq(1, 32))
    assert (w.N1, w.N2) == _window_oracle(tri_plan, fm, 0, mpq(1, 32))
    assert 0 < w.N2 - w.N1 <= tri_plan.M


@pytest.mark.parametrize("name", ["tri_plan", "cantor_plan", "dyadic_plan"])
def test_windows_match_cover_oracle(name, request):
    plan = request.getfixturevalue(name)
    rng = random.Random(13)
    for t in range(40):
        fm = plan_fiber(plan, OmegaStream.sampled(plan.selector, t))
        r = plan.c1 / 2 / 2 ** rng.randint(1, 4)
        from fibermeasure.analysis import support_point

        x = support_point(fm, r / 8, t)
        w = approximation_window(plan, fm, x, r)
        assert (w.N1, w.N2) == _window_oracle(plan, fm, x[0], r)
        assert 0 < w.N2 - w.N1 <= plan.M


# -- ball brackets ---------------------------------------------------------------


def test_dyadic_half_interval_mass():
    dy = systems.dyadic()
    from fibermeasure.disintegration import SubsetFamily, fiber_measure

    fm = fiber_measure(dy, SubsetFamily.full(dy.alphabet), OmegaStream.constant(0))
    b = ball_mass_bracket(None, fm, (mpq(1, 4),), mpq(1, 4), tol=mpq(1, 10**4))
    assert b.lower <= mpq(2, 5) <= b.upper and b.width <= mpq(1, 10**4)


def test_ball_containing_domain_has_full_mass(tri_plan):
    fm = plan_fiber(tri_plan, OmegaStream.constant(1))
    b = ball_mass_bracket(tri_plan, fm, (mpq(1, 2),), 2, tol=0)
    assert (b.lower, b.upper, b.depth) == (1, 1, 0)


def test_tri_ball_mass_is_scaled_sub_ball(tri_plan):
    # B(0,1/8) ∩ X_ω = φ_0(B(0,1/2) ∩ X_σω), and under ω ≡ 0 only cylinder 0 meets B(0,1/2)
    fm = plan_fiber(tri_plan, OmegaStream.constant(0))
    expected = mpq(3, 5) * mpq(3, 5)
    b = ball_mass_bracket(tri_plan, fm, (0,), mpq(1, 8), tol=mpq(1, 1000), depth_cap=12)
    assert b.lower <= expected <= b.upper and b.width < mpq(1, 1000)
    e = enumerate_ball_bracket(fm, (0,), mpq(1, 8), 12)
    assert e.lower <= expected <= e.upper and e.width < mpq(1, 1000)


points_1d = st.fractions(min_value=-Fraction(1, 4), max_value=Fraction(5, 4), max_denominator=512)
radii = st.fractions(min_value=Fraction(1, 256), max_value=Fraction(1, 2), max_denominator=512)


@given(points_1d, radii, st.integers(0, 6), st.integers(0, 2**32))
def test_adaptive_bracket_equals_exhaustive(x, r, depth, seed):
    from conftest import _TRI_PLAN as plan

    fm = plan_fiber(plan, OmegaStream.sampled(plan.selector, seed))
    a = ball_mass_bracket(plan, fm, (Q(x),), Q(r), depth=depth)
    e = enumerate_ball_bracket(fm, (Q(x),), Q(r), depth)
    # hulls are nested, so refining only edge cells loses nothing
    assert (a.lower, a.upper) == (e.lower, e.upper)


def test_bracket_soundness_depth_plus_two(tri_plan, plane_plan):
    rng = random.Random(2)
    for plan, n in ((tri_plan, 900), (plane_plan, 100)):
        d = plan.ifs.dimension
        for t in range(n):
            fm = plan_fiber(plan, OmegaStream.sampled(plan.selector, t))
            x = tuple(mpq(rng.randint(-64, 1088), 1024) for _ in range(d))
            r = mpq(rng.randint(1, 512), 1024)
            depth = rng.randint(0, 3 if d == 2 else 6)
            b0 = ball_mass_bracket(plan, fm, x, r, depth=depth)
            b2 = ball_mass_bracket(plan, fm, x, r, depth=depth + 2)
            assert b0.lower <= b2.lower <= b2.upper <= b0.upper


def test_cantor_brackets_contain_exact_triadic_masses(cantor_plan):
    # both subsets are the full alphabet, so every fiber is the Cantor measure
    assert all(set(s) == {0, 1} for s in cantor_plan.family.subsets)
    rng = random.Random(4)
    for _ in range(30):
        fm = plan_fiber(cantor_plan, OmegaStream.sampled(cantor_plan.selector, rng.randrange(2**32)))
        x, r = Fraction(rng.randint(0, 81), 81), Fraction(rng.randint(1, 27), 243)
        lo, hi = _cantor_mass(x - r, x + r)
        b = ball_mass_bracket(cantor_plan, fm, (Q(x),), Q(r), depth=12)
        assert b.lower <= Q(hi) and Q(lo) <= b.upper


# -- slabs --------------------------------------------------------------------------


def test_slab_examples(tri_plan):
    fm = plan_fiber(tri_plan, OmegaStream.constant(0))
    s = slab_mass_upper(tri_plan, fm, AffineSubspace.point((mpq(1, 2),)), mpq(1, 16), depth=1)
    assert s.upper == 0
    s = slab_mass_upper(tri_plan, fm, AffineSubspace.point((mpq(1, 2),)), 2, depth=0)
    assert s.upper == 1


def test_plane_slab_along_x_axis(plane_plan):
    cert = decay_exponent(plane_plan)
    eps = mpq(1, 64)
    W = AffineSubspace.line((0, 0), 0)
    for seed in range(5):
        fm = plan_fiber(plane_plan, OmegaStream.sampled(plane_plan.selector, seed))
        s = slab_mass_upper(plane_plan, fm, W, eps, resolution=mpq(1, 4))
        assert float(s.upper) <= cert.C * float(eps) ** cert.alpha


def test_affine_subspace_checks():
    assert AffineSubspace.line((0, 0), mpq(1, 2)).sq_distance((0, 1)) == mpq(9, 25)
    with pytest.raises(InvariantError):
        AffineSubspace((0, 0), ((1, 1),))


# -- scans --------------------------------------------------------------------------


def test_doubling_scan_small(tri_plan):
    scan = doubling_scan(tri_plan, 60, seed=3)
    assert scan.violations == 0 and scan.unconverged == 0
    assert scan.max_ratio <= scan.C1 == 16


def test_doubling_scan_is_deterministic(tri_plan):
    a, b = doubling_scan(tri_plan, 10, seed=8), doubling_scan(tri_plan, 10, seed=8)
    assert a == b


def test_decay_scan_small(tri_plan):
    eps = [mpq(1, 2**k) for k in range(2, 9)]
    scan = decay_scan(tri_plan, eps, 20, seed=1)
    assert scan.violations == 0
    assert scan.slope >= scan.alpha - 0.05
    assert all(v <= 1 for v in scan.sup_ratio)


# -- counterexample -----------------------------------------------------------------


def test_counterexample_n4():
    row = counterexample_row(mpq(2, 5), 4)
    assert row.k == 7 and row.eps == mpq(1, 9)
    p0, p1 = mpq(2, 5), mpq(3, 5)
    assert row.ratio == p0 * p1**6 / (p0 * p1**6 + p1 * p0**3)


def test_counterexample_n10_matches_dyadic_oracle():
    eps, ratio = counterexample_ratio(mpq(2, 5), 10)
    assert eps == mpq(1, 129)
    assert abs(float(ratio) - 0.41777) < 1e-4
    row = counterexample_row(mpq(2, 5), 10)
    lo = mpq(1, 2) - mpq(1, 2**17)
    big = dyadic_interval_mass(mpq(2, 5), lo, mpq(1, 2) + mpq(1, 2**10), 17)
    small = dyadic_interval_mass(mpq(2, 5), lo, mpq(1, 2), 17)
    assert (big, small) == (row.big_mass, row.small_mass)


def test_counterexample_balls_are_the_intervals():
    for n in range(4, 17):
        row = counterexample_row(mpq(2, 5), n)
        assert row.x - row.r == mpq(1, 2) - mpq(1, 2**row.k)
        assert row.x + row.r == mpq(1, 2) + mpq(1, 2**n)
        assert (row.y - row.eps * row.r, row.y + row.eps * row.r) == (row.x - row.r, mpq(1, 2))


def test_counterexample_divergence_window():
    sched = counterexample_schedule(mpq(2, 5), range(4, 17))
    for row in sched.rows:
        assert 0.3 <= row.ratio <= 0.7
        assert row.eps <= 2 * 2 ** (-0.79 * row.n)


@pytest.mark.parametrize("p0", [mpq(1, 2), 0, mpq(3, 5)])
def test_counterexample_domain(p0):
    with pytest.raises(DomainError):
        counterexample_row(p0, 5)


@given(st.integers(2, 30), st.integers(1, 9))
def test_counterexample_mass_formula_general(n, num):
    p0 = mpq(num, 20)
    row = counterexample_row(p0, n)
    p1 = 1 - p0
    assert p1**row.k >= p0**n > p1 ** (row.k + 1)
    assert row.big_mass == row.small_mass + p1 * p0 ** (n - 1)
