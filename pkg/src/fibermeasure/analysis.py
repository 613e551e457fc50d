"""Windows, certified ball and slab masses of μ_ω, scans against plan constants, and the dyadic counterexample.

Mass brackets sum symbolic cylinder masses of ω-compatible cells: cells whose
hull lies inside the region count toward the lower bound, cells whose hull
meets it toward the upper bound.  Neither direction needs the cylinders to
be disjoint, and because hulls are nested a deeper bracket always sits
inside a shallower one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from gmpy2 import mpq

from .construction import DisintegrationPlan, decay_exponent, doubling_bound
from .disintegration import FiberMeasure, OmegaStream, sample_fiber
from .errors import DomainError, InputError, InvariantError, SupportError
from .ifs import CylinderHull
from .rational import ONE, ZERO, Q, dot, floor_log_ratio, norm2, sub
from .words import Word

DEFAULT_DEPTH_CAP = 48
INSIDE, OUTSIDE, EDGE = 1, 0, 2


def plan_fiber(plan: DisintegrationPlan, omega: OmegaStream) -> FiberMeasure:
    """μ_ω for the plan's family; the plan's gaps are the disjointness certificate."""
    return FiberMeasure(plan.ifs, plan.family, plan.selector, plan.weights, omega, True)


# --------------------------------------------------------------------------
# geometry predicates on hulls (all exact)


def _sq_dist(a, b):
    return norm2(sub(a, b))


def _ball_inside_open(h: CylinderHull, x, r) -> bool:
    s = r - h.radius
    return s > 0 and _sq_dist(h.center, x) < s * s


def _ball_meets_closed(h: CylinderHull, x, r) -> bool:
    s = r + h.radius
    return _sq_dist(h.center, x) <= s * s


def _ball_inside_closed(h: CylinderHull, x, r) -> bool:
    s = r - h.radius
    return s >= 0 and _sq_dist(h.center, x) <= s * s


@dataclass(frozen=True)
class AffineSubspace:
    """base + span(basis); the basis rows must be exactly orthonormal rationals."""

    base: tuple
    basis: tuple = ()

    def __post_init__(self):
        base = tuple(Q(v) for v in self.base)
        basis = tuple(tuple(Q(v) for v in row) for row in self.basis)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "basis", basis)
        d = len(base)
        if len(basis) >= d:
            raise InputError("an affine subspace here must be proper (m < d)")
        for i, e in enumerate(basis):
            if len(e) != d:
                raise InputError("basis vectors have the wrong dimension")
            for j, f in enumerate(basis):
                if dot(e, f) != (ONE if i == j else ZERO):
                    raise InvariantError("basis is not orthonormal")

    @property
    def dimension(self) -> int:
        return len(self.basis)

    @classmethod
    def point(cls, p) -> "AffineSubspace":
        return cls(tuple(p), ())

    @classmethod
    def line(cls, base, t) -> "AffineSubspace":
        """Line in the plane with unit direction ((1−t²)/(1+t²), 2t/(1+t²)); t = ∞ is not needed."""
        t = Q(t)
        n = 1 + t * t
        return cls(tuple(base), (((1 - t * t) / n, 2 * t / n),))

    def sq_distance(self, y):
        v = sub(tuple(y), self.base)
        return norm2(v) - sum((dot(e, v) ** 2 for e in self.basis), ZERO)

    def distance(self, y) -> float:
        return math.sqrt(max(0.0, float(self.sq_distance(y))))


def _slab_classify(W: AffineSubspace, eps, h: CylinderHull) -> int:
    d2 = W.sq_distance(h.center)
    hi = eps + h.radius
    if d2 >= hi * hi:
        return OUTSIDE
    lo = eps - h.radius
    if lo > 0 and d2 < lo * lo:
        return INSIDE
    return EDGE


# --------------------------------------------------------------------------
# brackets


@dataclass(frozen=True)
class MassBracket:
    lower: object
    upper: object
    depth: int
    converged: bool
    target: str = "ball"

    @property
    def width(self):
        return self.upper - self.lower


def _refine(
    fm: FiberMeasure,
    classify: Callable[[CylinderHull], int],
    tol,
    rel_tol,
    depth_cap: int,
    depth: int | None,
    target: str,
    edge_radius=None,
) -> MassBracket:
    """Adaptive refinement of the edge cells.

    Stops at ``depth`` if given; otherwise when the edge mass is below ``tol``
    or ``rel_tol`` times the lower bound, or, with ``edge_radius``, once every
    edge hull is that small.
    """
    ifs = fm.ifs
    frontier = [(ifs.root_cell(), ONE)]
    lower = ZERO
    level = 0
    while True:
        kept = []
        for cell, mass in frontier:
            h = ifs.cell_hull(cell)
            c = classify(h)
            if c == INSIDE:
                lower += mass
            elif c == EDGE:
                kept.append((cell, mass, h.radius))
        edge = sum((m for _, m, _ in kept), ZERO)
        upper = lower + edge
        if depth is not None:
            done = level >= depth or not kept
        else:
            done = not kept or (tol is not None and edge <= tol)
            done = done or (rel_tol is not None and lower > 0 and edge <= rel_tol * lower)
            done = done or (edge_radius is not None and max(rr for _, _, rr in kept) <= edge_radius)
        if done:
            return MassBracket(lower, upper, level, True, target)
        if level >= depth_cap:
            return MassBracket(lower, upper, level, False, target)
        label = fm.digit(level)
        table = fm.weights.of(label)
        frontier = [(ifs.child(cell, a), mass * w) for cell, mass, _ in kept for a, w in table.items()]
        level += 1


def ball_mass_bracket(
    plan: DisintegrationPlan | None,
    fm: FiberMeasure,
    x,
    r,
    tol=None,
    rel_tol=None,
    depth_cap: int = DEFAULT_DEPTH_CAP,
    depth: int | None = None,
) -> MassBracket:
    """[lower, upper] ∋ μ_ω(B(x, r)): open-ball interior cells below, closed-ball meeting cells above."""
    x = tuple(Q(v) for v in x)
    r = Q(r)
    if r <= 0:
        raise DomainError("radius must be positive")
    if tol is None and rel_tol is None and depth is None:
        raise InputError("give tol, rel_tol or depth")
    tol = None if tol is None else Q(tol)
    rel_tol = None if rel_tol is None else Q(rel_tol)

    def classify(h):
        if _ball_inside_open(h, x, r):
            return INSIDE
        if not _ball_meets_closed(h, x, r):
            return OUTSIDE
        return EDGE

    return _refine(fm, classify, tol, rel_tol, depth_cap, depth, "ball")


def slab_mass_upper(
    plan: DisintegrationPlan | None,
    fm: FiberMeasure,
    W: AffineSubspace,
    eps,
    ball: tuple | None = None,
    tol=None,
    depth_cap: int = DEFAULT_DEPTH_CAP,
    depth: int | None = None,
    resolution=None,
) -> MassBracket:
    """Bracket on μ_ω(W^(eps) [∩ B(x, r)]); the upper side is the certified quantity.

    ``resolution`` refines until every edge hull has radius ≤ resolution·eps.
    """
    eps = Q(eps)
    if eps <= 0:
        raise DomainError("eps must be positive")
    if ball is not None:
        bx, br = tuple(Q(v) for v in ball[0]), Q(ball[1])

    def classify(h):
        s = _slab_classify(W, eps, h)
        if s == OUTSIDE or ball is None:
            return s
        if not _ball_meets_closed(h, bx, br):
            return OUTSIDE
        if s == INSIDE and _ball_inside_open(h, bx, br):
            return INSIDE
        return EDGE

    edge_radius = None if resolution is None else Q(resolution) * eps
    if tol is None and depth is None and edge_radius is None:
        raise InputError("give tol, depth or resolution")
    return _refine(
        fm, classify, None if tol is None else Q(tol), None, depth_cap, depth, "slab", edge_radius
    )


def enumerate_ball_bracket(fm: FiberMeasure, x, r, depth: int) -> MassBracket:
    """Exhaustive depth-``depth`` classification of every compatible cylinder; the reference oracle."""
    x = tuple(Q(v) for v in x)
    r = Q(r)
    ifs = fm.ifs
    cells = [(ifs.root_cell(), ONE)]
    for j in range(depth):
        table = fm.weights.of(fm.digit(j))
        cells = [(ifs.child(c, a), m * w) for c, m in cells for a, w in table.items()]
    lower = upper = ZERO
    for c, m in cells:
        h = ifs.cell_hull(c)
        if _ball_inside_open(h, x, r):
            lower += m
        if _ball_meets_closed(h, x, r):
            upper += m
    return MassBracket(lower, upper, depth, True, "ball")


# --------------------------------------------------------------------------
# approximation windows


@dataclass(frozen=True)
class ApproximationWindow:
    digits: Word
    N1: int
    N2: int
    depth: int
    N1_certified: int

    @property
    def gap(self) -> int:
        return self.N2 - self.N1


def window_depth(ifs, r) -> int:
    """Smallest D with every depth-D hull radius ≤ r/2."""
    radius, D, s = ifs.domain_radius, 0, ifs.max_ratio
    while radius > r / 2:
        radius *= s
        D += 1
    return D


def itinerary(fm: FiberMeasure, x, depth: int) -> Word:
    """Lexicographically first ω-compatible word of length ``depth`` whose hulls all contain x."""
    ifs = fm.ifs
    x = tuple(Q(v) for v in x)

    def contains(cell):
        return _ball_meets_closed(ifs.cell_hull(cell), x, ZERO)

    stack = [ifs.root_cell()] if contains(ifs.root_cell()) else []
    while stack:
        cell = stack.pop()
        n = len(cell.word)
        if n == depth:
            return cell.word
        kids = [ifs.child(cell, a) for a in fm.subset_at(n)]
        stack.extend(reversed([k for k in kids if contains(k)]))
    raise SupportError("x is not in any ω-compatible hull at the requested depth")


def approximation_window(
    plan: DisintegrationPlan, fm: FiberMeasure, x, r, depth: int | None = None
) -> ApproximationWindow:
    """N₂: first n with hull(u_n) ⊆ B̄(x, r).  N₁: common prefix of the depth-D cells meeting B̄(x, 2r), capped at N₂−1."""
    x = tuple(Q(v) for v in x)
    r = Q(r)
    if not 0 < r < plan.c1 / 2:
        raise DomainError(f"r must lie in (0, c1/2) = (0, {plan.c1 / 2})")
    ifs = fm.ifs
    D = window_depth(ifs, r) if depth is None else depth
    u = itinerary(fm, x, D)

    N2 = None
    cell = ifs.root_cell()
    for n in range(D + 1):
        if n:
            cell = ifs.child(cell, u[n - 1])
        if _ball_inside_closed(ifs.cell_hull(cell), x, r):
            N2 = n
            break
    if N2 is None:
        raise InvariantError("depth too shallow for N2; hull radii exceed r/2")

    prefix = None
    frontier = [ifs.root_cell()]
    for n in range(D):
        frontier = [
            k
            for c in frontier
            for k in (ifs.child(c, a) for a in fm.subset_at(n))
            if _ball_meets_closed(ifs.cell_hull(k), x, 2 * r)
        ]
    for c in frontier:
        w = c.word
        if prefix is None:
            prefix = w
        else:
            k = 0
            while k < len(prefix) and prefix[k] == w[k]:
                k += 1
            prefix = prefix[:k]
    N1_cert = len(prefix)
    return ApproximationWindow(u, min(N1_cert, N2 - 1), N2, D, N1_cert)


# --------------------------------------------------------------------------
# scans


def default_r_grid(plan: DisintegrationPlan, count: int = 4) -> tuple:
    return tuple(plan.c1 / 2 / Q(2) ** j for j in range(1, count + 1))


def support_point(fm: FiberMeasure, tol, seed: int) -> tuple:
    """An exact point φ_u(c₀) for a μ_ω-random word u; lies in every hull along u."""
    return sample_fiber(fm, 1, tol, seed).exact_points()[0]


@dataclass(frozen=True)
class DoublingRow:
    trial: int
    omega_seed: int
    x: tuple
    r: object
    small: MassBracket
    big: MassBracket

    @property
    def ratio_upper(self):
        if self.small.lower == 0:
            return None
        return self.big.upper / self.small.lower

    @property
    def ratio_lower(self):
        return self.big.lower / self.small.upper if self.small.upper else None

    @property
    def converged(self) -> bool:
        return self.small.converged and self.big.converged and self.small.lower > 0


@dataclass(frozen=True)
class DoublingScan:
    rows: tuple
    C1: object
    max_ratio: object
    violations: int
    unconverged: int


def _trial_seeds(seed: int, n: int) -> list:
    rng = np.random.default_rng([seed, 7])
    return [int(s) for s in rng.integers(0, 2**63, size=n)]


def doubling_scan(
    plan: DisintegrationPlan,
    n_trials: int,
    r_grid: Sequence | None = None,
    seed: int = 0,
    rel_tol="1/4",
    depth_cap: int = DEFAULT_DEPTH_CAP,
) -> DoublingScan:
    """Certified upper(μ_ω(B(x,2r))) / lower(μ_ω(B(x,r))) over random (ω, x, r)."""
    grid = [Q(r) for r in (r_grid or default_r_grid(plan))]
    grid = [r for r in grid if 0 < r < plan.c1 / 2]
    if not grid:
        raise DomainError("no radius of the grid lies below c1/2")
    C1 = doubling_bound(plan)
    rows = []
    for t, s in enumerate(_trial_seeds(seed, n_trials)):
        r = grid[s % len(grid)]
        fm = plan_fiber(plan, OmegaStream.sampled(plan.selector, s))
        x = support_point(fm, r / 8, s)
        small = ball_mass_bracket(plan, fm, x, r, rel_tol=rel_tol, depth_cap=depth_cap)
        big = ball_mass_bracket(plan, fm, x, 2 * r, rel_tol=rel_tol, depth_cap=depth_cap)
        rows.append(DoublingRow(t, s, x, r, small, big))
    good = [row for row in rows if row.converged]
    ratios = [row.ratio_upper for row in good]
    max_ratio = max(ratios) if ratios else None
    violations = sum(q > C1 for q in ratios)
    return DoublingScan(tuple(rows), C1, max_ratio, violations, len(rows) - len(good))


@dataclass(frozen=True)
class DecayScan:
    eps: tuple
    sup_ratio: tuple
    slope: float
    alpha: float
    C2: float
    violations: int
    unconverged: int

    @property
    def bounds(self) -> tuple:
        return tuple(self.C2 * float(e) ** self.alpha for e in self.eps)


def _random_subspace(rng, x, d: int) -> AffineSubspace:
    if d == 1:
        return AffineSubspace.point(x)
    if d == 2:
        t = mpq(int(rng.integers(-1000, 1001)), 1000)
        return AffineSubspace.line(x, t)
    raise InputError("random subspaces are implemented for d ≤ 2")


def decay_scan(
    plan: DisintegrationPlan,
    eps_grid: Sequence,
    n_trials: int,
    seed: int = 0,
    r_grid: Sequence | None = None,
    rel_tol="1/8",
    resolution="1/4",
    depth_cap: int = DEFAULT_DEPTH_CAP,
) -> DecayScan:
    """sup over random (ω, x, r, W through x) of upper(μ_ω(W^(εr) ∩ B(x,r))) / lower(μ_ω(B(x,r)))."""
    cert = decay_exponent(plan)
    eps = [Q(e) for e in eps_grid]
    grid = [Q(r) for r in (r_grid or default_r_grid(plan))]
    grid = [r for r in grid if 0 < r < plan.c1 / 2]
    sup = [ZERO] * len(eps)
    unconverged = 0
    for s in _trial_seeds(seed, n_trials):
        rng = np.random.default_rng(s)
        r = grid[s % len(grid)]
        fm = plan_fiber(plan, OmegaStream.sampled(plan.selector, s))
        # x must sit much closer to X_ω than the thinnest slab
        x = support_point(fm, min(eps) * r / 16, s)
        W = _random_subspace(rng, x, plan.ifs.dimension)
        ball = ball_mass_bracket(plan, fm, x, r, rel_tol=rel_tol, depth_cap=depth_cap)
        if ball.lower == 0 or not ball.converged:
            unconverged += 1
            continue
        for k, e in enumerate(eps):
            slab = slab_mass_upper(
                plan, fm, W, e * r, ball=(x, r), resolution=resolution, depth_cap=depth_cap
            )
            if not slab.converged:
                unconverged += 1
            sup[k] = max(sup[k], slab.upper / ball.lower)
    sup_f = [float(v) for v in sup]
    slope = _loglog_slope([float(e) for e in eps], sup_f)
    bounds = [cert.C2 * float(e) ** cert.alpha for e in eps]
    violations = sum(v > b for v, b in zip(sup_f, bounds))
    return DecayScan(tuple(eps), tuple(sup), slope, cert.alpha, cert.C2, violations, unconverged)


def _loglog_slope(xs, ys) -> float:
    pts = [(math.log(a), math.log(b)) for a, b in zip(xs, ys) if a > 0 and b > 0]
    if len(pts) < 2:
        return math.nan
    lx, ly = np.array(pts).T
    return float(np.polyfit(lx, ly, 1)[0])


# --------------------------------------------------------------------------
# the dyadic counterexample


@dataclass(frozen=True)
class CounterexampleRow:
    n: int
    k: int
    x: object
    y: object
    r: object
    eps: object
    big_mass: object
    small_mass: object

    @property
    def ratio(self):
        return self.small_mass / self.big_mass


@dataclass(frozen=True)
class CounterexampleSchedule:
    p0: object
    rows: tuple


def counterexample_row(p0, n: int) -> CounterexampleRow:
    """x_n, y_n, r_n, ε_n and the two interval masses, exactly.

    k = ⌊n log p₀ / log p₁⌋ is the largest k with p₁^k ≥ p₀^n.  The big ball
    B(x_n, r_n) is (1/2 − 2^{−k}, 1/2 + 2^{−n}) and B(y_n, ε_n r_n) is its
    left part (1/2 − 2^{−k}, 1/2).
    """
    p0 = Q(p0)
    if not 0 < p0 < mpq(1, 2):
        raise DomainError("p0 must lie in (0, 1/2)")
    if n < 1:
        raise DomainError("n must be a positive integer")
    p1 = 1 - p0
    k = floor_log_ratio(p0, p1, n)
    half = mpq(1, 2)
    a, b = mpq(1, 2**k), mpq(1, 2**n)
    x = (half - a + half + b) / 2
    y = (half - a + half) / 2
    r = (b + a) / 2
    eps = a / (b + a)
    small = p0 * p1 ** (k - 1)
    big = small + p1 * p0 ** (n - 1)
    return CounterexampleRow(n, k, x, y, r, eps, big, small)


def counterexample_ratio(p0, n: int) -> tuple:
    row = counterexample_row(p0, n)
    return row.eps, row.ratio


def counterexample_schedule(p0, ns: Sequence[int]) -> CounterexampleSchedule:
    return CounterexampleSchedule(Q(p0), tuple(counterexample_row(p0, n) for n in ns))


def dyadic_interval_mass(p0, lo, hi, depth: int):
    """Mass of the open interval (lo, hi) under the (p₀, 1−p₀) Bernoulli measure.

    Sums p₀^{#0} p₁^{#1} over the depth-``depth`` dyadic intervals inside
    [lo, hi]; exact whenever lo and hi are multiples of 2^{−depth}, since the
    measure has no atoms.
    """
    p0 = Q(p0)
    p1 = 1 - p0
    lo, hi = Q(lo), Q(hi)
    scale = 2**depth
    first = math.ceil(lo * scale)
    last = math.floor(hi * scale)
    total = ZERO
    for j in range(max(first, 0), min(last, scale)):
        ones = bin(j).count("1")
        total += p0 ** (depth - ones) * p1**ones
    return total
