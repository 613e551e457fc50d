"""Iterated function systems and certified outer approximations of their cylinders.

Every set decision in the package goes through ball hulls: the cylinder
φ_w(X) is contained in φ_w(B(c₀, R₀)), which for a similarity is the ball
B(φ_w(c₀), R₀·r_w) and for a 1-D conformal map is the image interval.
Hulls are nested (hull(wa) ⊆ hull(w)), so refining never loosens a bracket.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

from .errors import AlphabetError, GeometryError, InputError, InvariantError, RefinementLimitError
from .maps import ConformalIntervalMap, identity_similarity
from .rational import (
    DEFAULT_PRECISION_BITS,
    ONE,
    ZERO,
    Q,
    dist_lower,
    dist_upper,
    matmul,
    matvec,
    norm2,
    sub,
)
from .words import Word, is_prefix, words_of_length

WEIGHT_FLOAT_TOL = Q("1/1000000000000")
DEFAULT_DEPTH_CAP = 24


@dataclass(frozen=True)
class CylinderHull:
    word: Word
    center: tuple
    radius: object

    @property
    def interval(self) -> tuple:
        """(lo, hi) for one-dimensional hulls."""
        (c,) = self.center
        return (c - self.radius, c + self.radius)


@dataclass(frozen=True)
class AttractorCover:
    depth: int
    hulls: tuple

    @property
    def max_radius(self):
        return max((h.radius for h in self.hulls), default=ZERO)


@dataclass(frozen=True)
class Bracket:
    lower: object
    upper: object
    depth: int

    def __iter__(self):
        return iter((self.lower, self.upper))


# --------------------------------------------------------------------------
# attractor bound


def _is_conformal(maps) -> bool:
    return any(isinstance(m, ConformalIntervalMap) for m in maps)


def attractor_bound(maps: Sequence, bits: int = DEFAULT_PRECISION_BITS) -> tuple:
    """A certified invariant ball (c₀, R₀) with φ_a(B(c₀,R₀)) ⊆ B(c₀,R₀) for every map.

    For similarities R₀(c) = max_a |φ_a(c) − c| / (1 − r_a) is invariant for any
    centre c; the centre is picked among the first map's fixed point, the
    centroid of all fixed points and the midpoint of their bounding box.
    For conformal interval maps the Hutchinson operator is iterated on the
    common domain interval, rounding outward.
    """
    maps = tuple(maps)
    if not maps:
        raise InputError("empty IFS")
    if _is_conformal(maps):
        return _conformal_bound(maps, bits)
    fps = [m.fixed_point() for m in maps]
    d = len(fps[0])
    centroid = tuple(sum((p[i] for p in fps), ZERO) / len(fps) for i in range(d))
    box_mid = tuple((min(p[i] for p in fps) + max(p[i] for p in fps)) / 2 for i in range(d))
    best = None
    for c in (box_mid, centroid, fps[0]):
        radius = ZERO
        for m in maps:
            r = m.contraction_upper(bits)
            radius = max(radius, dist_upper(m(c), c, bits) / (1 - r))
        if best is None or radius < best[1]:
            best = (c, radius)
    c0, r0 = best
    for m in maps:
        if dist_upper(m(c0), c0, bits) + m.contraction_upper(bits) * r0 > r0:
            raise GeometryError("invariant ball certification failed")
    return c0, r0


def _conformal_bound(maps, bits):
    lo = max(m.domain[0] for m in maps)
    hi = min(m.domain[1] for m in maps)
    if not lo < hi:
        raise InputError("conformal maps have no common domain")
    grid = Q(1) / (1 << bits)
    for _ in range(200):
        images = [m.image(lo, hi) for m in maps]
        new_lo = max(lo, Q(int((min(a for a, _ in images) / grid).__floor__())) * grid)
        new_hi = min(hi, Q(int((max(b for _, b in images) / grid).__ceil__())) * grid)
        if new_lo == lo and new_hi == hi:
            break
        lo, hi = new_lo, new_hi
    for m in maps:
        a, b = m.image(lo, hi)
        if a < lo or b > hi:
            raise GeometryError("invariant interval certification failed")
    return ((lo + hi) / 2,), (hi - lo) / 2


# --------------------------------------------------------------------------
# cells: composed maps kept in a cheap internal form


class _SimCell:
    __slots__ = ("word", "r", "o", "t", "cu")

    def __init__(self, word, r, o, t, cu):
        self.word = word
        self.r = r
        self.o = o  # None means identity
        self.t = t
        self.cu = cu

    def apply(self, x):
        v = x if self.o is None else matvec(self.o, x)
        return tuple(self.r * a + b for a, b in zip(v, self.t))


class _ConfCell:
    __slots__ = ("word", "m")

    def __init__(self, word, m):
        self.word = word
        self.m = m

    def apply(self, x):
        a, b, c, d = self.m
        return ((a * x[0] + b) / (c * x[0] + d),)


def _is_identity(o) -> bool:
    return all(o[i][j] == (ONE if i == j else ZERO) for i in range(len(o)) for j in range(len(o)))


@dataclass(frozen=True)
class IfsSystem:
    """A finite family of contractions with a probability vector and an invariant ball."""

    maps: tuple
    weights: tuple
    alphabet: tuple = None
    domain_center: tuple = None
    domain_radius: object = None
    precision_bits: int = DEFAULT_PRECISION_BITS
    require_nontrivial: bool = True
    # set by iterate(): invariance of the parent ball passes to compositions
    domain_certified: bool = field(default=False, repr=False, compare=False)
    _index: dict = field(default=None, repr=False, compare=False)
    _fixed_points: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        maps = tuple(self.maps)
        object.__setattr__(self, "maps", maps)
        if not maps:
            raise InputError("an IFS needs at least one map")
        alphabet = tuple(range(len(maps))) if self.alphabet is None else tuple(self.alphabet)
        if len(alphabet) != len(maps) or len(set(alphabet)) != len(alphabet):
            raise AlphabetError("alphabet must list one distinct label per map")
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "_index", {a: i for i, a in enumerate(alphabet)})

        d = maps[0].dimension
        if any(m.dimension != d for m in maps):
            raise InputError("maps have different dimensions")
        if _is_conformal(maps):
            if d != 1:
                raise InputError("conformal maps are supported in dimension 1 only")
            if not all(isinstance(m, ConformalIntervalMap) for m in maps):
                raise InputError("do not mix similarity and conformal maps; express affine maps as conformal")

        had_float = any(isinstance(w, float) for w in self.weights)
        weights = tuple(Q(w) for w in self.weights)
        if len(weights) != len(maps):
            raise InputError("one weight per map is required")
        if any(w <= 0 for w in weights):
            raise InvariantError("weights must be strictly positive")
        total = sum(weights, ZERO)
        if had_float:
            if abs(total - 1) > WEIGHT_FLOAT_TOL:
                raise InvariantError(f"weights sum to {float(total)!r}, not 1")
        elif total != 1:
            raise InvariantError(f"weights sum to {total}, not 1")
        weights = tuple(w / total for w in weights)
        object.__setattr__(self, "weights", weights)

        if self.domain_center is None or self.domain_radius is None:
            c0, r0 = attractor_bound(maps, self.precision_bits)
        else:
            c0 = tuple(Q(v) for v in self.domain_center)
            r0 = Q(self.domain_radius)
            if not self.domain_certified:
                self._certify_domain(c0, r0)
        object.__setattr__(self, "domain_center", c0)
        object.__setattr__(self, "domain_radius", r0)

        fps = tuple(m.fixed_point() for m in maps)
        object.__setattr__(self, "_fixed_points", fps)
        if self.require_nontrivial and len(set(fps)) < 2:
            raise InvariantError("at least two maps must have distinct fixed points")

    def _certify_domain(self, c0, r0):
        bits = self.precision_bits
        for m in self.maps:
            if isinstance(m, ConformalIntervalMap):
                a, b = m.image(c0[0] - r0, c0[0] + r0)
                ok = c0[0] - r0 <= a and b <= c0[0] + r0
            else:
                ok = dist_upper(m(c0), c0, bits) + m.contraction_upper(bits) * r0 <= r0
            if not ok:
                raise GeometryError("supplied domain ball is not invariant")

    # -- basic properties -------------------------------------------------

    @property
    def dimension(self) -> int:
        return self.maps[0].dimension

    @property
    def is_conformal(self) -> bool:
        return isinstance(self.maps[0], ConformalIntervalMap)

    @property
    def _exact_orthogonal(self) -> bool:
        return self.is_conformal or all(m.is_exact_orthogonal for m in self.maps)

    @property
    def fixed_points(self) -> tuple:
        return self._fixed_points

    def weight(self, a):
        return self.weights[self.index(a)]

    def index(self, a) -> int:
        try:
            return self._index[a]
        except (KeyError, TypeError):
            raise AlphabetError(f"unknown digit {a!r}") from None

    def map(self, a):
        return self.maps[self.index(a)]

    def check_word(self, w: Word) -> Word:
        w = tuple(w)
        for a in w:
            self.index(a)
        return w

    @property
    def max_ratio(self):
        return max(m.contraction_upper(self.precision_bits) for m in self.maps)

    @property
    def min_ratio(self):
        return min(m.contraction_lower(self.precision_bits) for m in self.maps)

    # -- cells --------------------------------------------------------------

    def root_cell(self):
        if self.is_conformal:
            return _ConfCell((), (ONE, ZERO, ZERO, ONE))
        d = self.dimension
        return _SimCell((), ONE, None, tuple(ZERO for _ in range(d)), ONE)

    def child(self, cell, a):
        m = self.map(a)
        if self.is_conformal:
            a1, b1, c1, d1 = cell.m
            a2, b2, c2, d2 = m.coefficients
            return _ConfCell(
                cell.word + (a,),
                (a1 * a2 + b1 * c2, a1 * b2 + b1 * d2, c1 * a2 + d1 * c2, c1 * b2 + d1 * d2),
            )
        o_a = None if _is_identity(m.orthogonal) else m.orthogonal
        if cell.o is None:
            o = o_a
            rt = m.translation
        else:
            o = cell.o if o_a is None else matmul(cell.o, o_a)
            rt = matvec(cell.o, m.translation)
        t = tuple(cell.r * x + y for x, y in zip(rt, cell.t))
        return _SimCell(cell.word + (a,), cell.r * m.ratio, o, t, cell.cu * m.contraction_upper(self.precision_bits))

    def cell(self, w: Word):
        c = self.root_cell()
        for a in self.check_word(w):
            c = self.child(c, a)
        return c

    def cell_hull(self, cell) -> CylinderHull:
        c0, r0 = self.domain_center, self.domain_radius
        if self.is_conformal:
            a, b = cell.apply((c0[0] - r0,))[0], cell.apply((c0[0] + r0,))[0]
            lo, hi = min(a, b), max(a, b)
            return CylinderHull(cell.word, ((lo + hi) / 2,), (hi - lo) / 2)
        return CylinderHull(cell.word, cell.apply(c0), r0 * cell.cu)

    def cell_point(self, cell, which: int = 0) -> tuple:
        """Image of the ``which``-th fixed point: a point of φ_w(X) (exact for similarities)."""
        return cell.apply(self._fixed_points[which])

    def cell_derivative_bounds(self, cell) -> tuple:
        """[inf, sup] of the composed map's contraction on the domain ball."""
        if self.is_conformal:
            a, b, c, d = cell.m
            c0, r0 = self.domain_center[0], self.domain_radius
            det = abs(a * d - b * c)
            e1, e2 = abs(c * (c0 - r0) + d), abs(c * (c0 + r0) + d)
            return det / max(e1, e2) ** 2, det / min(e1, e2) ** 2
        lower = cell.r
        if not self._exact_orthogonal:
            lower = ONE
            for x in cell.word:
                lower *= self.map(x).contraction_lower(self.precision_bits)
        return lower, cell.cu

    def point_error(self) -> object:
        """Upper bound on |cell_point − true attractor point| (nonzero only for conformal maps)."""
        if not self.is_conformal:
            return ZERO
        lo, hi = self.maps[0].domain
        return (hi - lo) / (1 << 79)

    def children(self, cell, letters=None):
        return [self.child(cell, a) for a in (self.alphabet if letters is None else letters)]

    # -- iterates -----------------------------------------------------------

    def iterate(self, n: int) -> "IfsSystem":
        """The n-th iterate: letters are words of length n, weights multiply."""
        if n < 1:
            raise InputError("iterate depth must be >= 1")
        labels, maps, weights = [], [], []
        for w in words_of_length(self.alphabet, n):
            labels.append(w)
            maps.append(compose(self, w))
            p = ONE
            for a in w:
                p *= self.weight(a)
            weights.append(p)
        return IfsSystem(
            tuple(maps),
            tuple(weights),
            tuple(labels),
            self.domain_center,
            self.domain_radius,
            self.precision_bits,
            domain_certified=True,
        )


# --------------------------------------------------------------------------
# operations


def compose(ifs: IfsSystem, w: Word):
    """φ_w = φ_{w1} ∘ ⋯ ∘ φ_{wn} as an exact map object."""
    w = ifs.check_word(w)
    if not w:
        if ifs.is_conformal:
            dom = ifs.maps[0].domain
            return ConformalIntervalMap("affine", (1, 0), dom, check=False)
        return identity_similarity(ifs.dimension)
    out = ifs.map(w[0])
    for a in w[1:]:
        out = out.then(ifs.map(a))
    return out


def hull(ifs: IfsSystem, w: Word) -> CylinderHull:
    return ifs.cell_hull(ifs.cell(w))


def cover(ifs: IfsSystem, depth: int, prefix: Word = ()) -> AttractorCover:
    """Hulls of every word of length ``depth`` extending ``prefix``."""
    cells = [ifs.cell(prefix)]
    for _ in range(depth):
        cells = [ifs.child(c, a) for c in cells for a in ifs.alphabet]
    return AttractorCover(depth, tuple(ifs.cell_hull(c) for c in cells))


def hulls_disjoint(h1: CylinderHull, h2: CylinderHull, bits: int = DEFAULT_PRECISION_BITS) -> bool:
    """Certified strict separation of two closed hull balls."""
    s = h1.radius + h2.radius
    if len(h1.center) == 1:
        return abs(h1.center[0] - h2.center[0]) > s
    return norm2(sub(h1.center, h2.center)) > s * s


def hull_gap_lower(h1: CylinderHull, h2: CylinderHull, bits: int = DEFAULT_PRECISION_BITS):
    return dist_lower(h1.center, h2.center, bits) - h1.radius - h2.radius


def set_distance_bracket(
    ifs: IfsSystem,
    w1: Word,
    w2: Word,
    depth: int,
    depth_cap: int = DEFAULT_DEPTH_CAP,
    pair_budget: int = 200_000,
) -> Bracket:
    """[lower, upper] on d(φ_{w1}(X), φ_{w2}(X)) from depth-refined hull covers.

    Pairs of cells whose gap already exceeds the best upper bound are pruned;
    since hulls are nested this does not change the uniform-depth minimum.
    """
    w1, w2 = ifs.check_word(w1), ifs.check_word(w2)
    bits = ifs.precision_bits
    if is_prefix(w1, w2) or is_prefix(w2, w1):
        return Bracket(ZERO, ZERO, depth)
    target = min(depth, depth_cap)
    slack = 2 * ifs.point_error()
    c1, c2 = ifs.cell(w1), ifs.cell(w2)
    pairs = [(c1, c2, None)]
    upper = None
    lower = ZERO
    level = 0
    while True:
        scored = []
        for a, b, inherited in pairs:
            ha, hb = ifs.cell_hull(a), ifs.cell_hull(b)
            gap = hull_gap_lower(ha, hb, bits)
            if inherited is not None and inherited > gap:
                gap = inherited
            u = dist_upper(ifs.cell_point(a), ifs.cell_point(b), bits) + slack
            if upper is None or u < upper:
                upper = u
            scored.append((a, b, gap))
        pairs = [(a, b, g) for a, b, g in scored if g <= upper]
        lower = max(ZERO, min((g for _, _, g in pairs), default=upper))
        if level >= target:
            break
        if len(pairs) * len(ifs.alphabet) ** 2 > pair_budget:
            raise RefinementLimitError(
                f"pair budget exhausted at depth {level}", Bracket(lower, upper, level)
            )
        pairs = [
            (ca, cb, g) for a, b, g in pairs for ca in ifs.children(a) for cb in ifs.children(b)
        ]
        level += 1
    if depth > depth_cap:
        raise RefinementLimitError(f"depth {depth} exceeds cap {depth_cap}", Bracket(lower, upper, level))
    return Bracket(lower, upper, level)


def certify_disjoint(
    ifs: IfsSystem,
    w1: Word,
    w2: Word,
    max_depth: int = 10,
    pair_budget: int = 4096,
):
    """Positive lower bound on d(φ_{w1}(X), φ_{w2}(X)), or None when not certifiable.

    Adaptive: only pairs of cells whose hulls still meet are refined.  Touching
    cylinders never certify, which is the intended conservative behaviour.
    """
    w1, w2 = ifs.check_word(w1), ifs.check_word(w2)
    if is_prefix(w1, w2) or is_prefix(w2, w1):
        return None
    bits = ifs.precision_bits
    pending = [(ifs.cell(w1), ifs.cell(w2), 0)]
    gap = None
    count = 0
    while pending:
        a, b, lvl = pending.pop()
        ha, hb = ifs.cell_hull(a), ifs.cell_hull(b)
        if hulls_disjoint(ha, hb, bits):
            g = hull_gap_lower(ha, hb, bits)
            if g <= 0:
                # separated but the rounded gap is not positive; refine further
                g = None
            if g is not None:
                gap = g if gap is None else min(gap, g)
                continue
        if lvl >= max_depth:
            return None
        count += 1
        if count > pair_budget:
            return None
        # refine the larger cell only
        if ha.radius >= hb.radius:
            pending.extend((ca, b, lvl + 1) for ca in ifs.children(a))
        else:
            pending.extend((a, cb, lvl + 1) for cb in ifs.children(b))
    return gap


def _diam_from_cells(ifs: IfsSystem, cells) -> tuple:
    bits = ifs.precision_bits
    slack = 2 * ifs.point_error()
    points = [ifs.cell_point(c, i) for c in cells for i in range(len(ifs.alphabet))]
    hulls = [ifs.cell_hull(c) for c in cells]
    if ifs.dimension == 1:
        xs = [p[0] for p in points]
        lower = max(xs) - min(xs) - slack
        upper = max(h.center[0] + h.radius for h in hulls) - min(h.center[0] - h.radius for h in hulls)
        return max(ZERO, lower), upper
    lower = ZERO
    for p, q in combinations(points, 2):
        lower = max(lower, dist_lower(p, q, bits))
    upper = ZERO
    for h1, h2 in combinations(hulls, 2):
        upper = max(upper, dist_upper(h1.center, h2.center, bits) + h1.radius + h2.radius)
    if len(hulls) == 1:
        upper = 2 * hulls[0].radius
    return max(ZERO, lower - slack), upper


def diameter_of_attractor(ifs: IfsSystem, depth: int) -> Bracket:
    cells = [ifs.root_cell()]
    for _ in range(depth):
        cells = [ifs.child(c, a) for c in cells for a in ifs.alphabet]
    lo, hi = _diam_from_cells(ifs, cells)
    return Bracket(lo, min(hi, 2 * ifs.domain_radius), depth)


def diam_bracket(ifs: IfsSystem, w: Word, depth: int, depth_cap: int = DEFAULT_DEPTH_CAP) -> Bracket:
    """[lower, upper] on Diam(φ_w(X))."""
    w = ifs.check_word(w)
    if depth > depth_cap:
        raise RefinementLimitError(f"depth {depth} exceeds cap {depth_cap}")
    if not ifs.is_conformal:
        base = diameter_of_attractor(ifs, depth)
        cell = ifs.cell(w)
        lo_ratio, hi_ratio = ifs.cell_derivative_bounds(cell)
        return Bracket(lo_ratio * base.lower, hi_ratio * base.upper, depth)
    cells = [ifs.cell(w)]
    for _ in range(depth):
        cells = [ifs.child(c, a) for c in cells for a in ifs.alphabet]
    lo, hi = _diam_from_cells(ifs, cells)
    root_hull = ifs.cell_hull(ifs.cell(w))
    return Bracket(lo, min(hi, 2 * root_hull.radius), depth)
