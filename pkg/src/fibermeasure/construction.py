"""Certified subset families realising the doubling and decay constructions.

Conformal route (any d=1 system): find N and letters a₁ ≠ a₂ with φ_{a₁^N}(X)
and φ_{a₂^N}(X) disjoint and every length-N cylinder disjoint from one of them;
on the N-th iterate put A_a = {a, partner(a)}.

Affine route (similarities in R^d): on some iterate, find groups of d+1
pairwise separated cylinders whose centres no affine hyperplane approaches
closer than 2ε₀ plus the hull radius, and put A_a = {a} ∪ group(a).

Window bound.  With r below c₁/2, x in an ω-compatible depth-D hull of
radius ≤ r/2, N₂ the first level whose hull fits in B̄(x, r) and N₁ the
common prefix length of the depth-D cells meeting B̄(x, 2r), two distinct
letters of one subset occur at level N₁+1 within 4r of each other, so
c₁·inf|φ'_{u_{N₁}}| ≤ 4r < 8 R₀ sup|φ'_{u_{N₂−1}}|.  Bounded distortion K
then gives s_max^{N₂−N₁−1} > c₁ / (8 R₀ K), hence N₂ − N₁ ≤ M below.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .disintegration import FiberWeights, SelectorDistribution, SubsetFamily, build_selector
from .errors import (
    AffineReducibleError,
    InputError,
    InvariantError,
    PreconditionError,
    SearchFailure,
)
from .ifs import IfsSystem, certify_disjoint, diameter_of_attractor
from .rational import ONE, ZERO, Q, sqrt_lower, sqrt_upper, sub
from .words import power, words_of_length

DEFAULT_MAX_DEPTH = 6


@dataclass(frozen=True)
class SeparatedPair:
    N: int
    a1: object
    a2: object
    partners: tuple  # (letter, partner, certified gap) over the length-N words
    pair_gap: object


@dataclass(frozen=True)
class DisintegrationPlan:
    """A certified family on the N-th iterate with every constant the scans need."""

    base: IfsSystem
    N: int
    ifs: IfsSystem
    family: SubsetFamily
    selector: SelectorDistribution
    weights: FiberWeights
    c1: object
    q_min: object
    q_max: object
    r_min: object
    s_max: object
    distortion: object
    M: int
    mode: str
    gaps: tuple = ()
    prefactor: object = ONE

    @property
    def C1(self):
        return doubling_bound(self)

    @property
    def epsilon0(self):
        return self.c1 / 2

    @property
    def domain_radius(self):
        return self.ifs.domain_radius


@dataclass(frozen=True)
class AffinePlan(DisintegrationPlan):
    eps0: object = None
    groups: tuple = ()
    witnesses: tuple = ()
    avoidance: tuple = ()  # (m, certified lower bound on min_W max_i d(x_i, W))
    assignment: tuple = ()  # (letter, group index)

    @property
    def epsilon0(self):
        return self.eps0


@dataclass(frozen=True)
class DecayCertificate:
    """μ_ω(W^(ε)) ≤ C ε^α and μ_ω(W^(εr) ∩ B(x,r)) ≤ C₂ ε^α μ_ω(B(x,r)) for r < c₁."""

    alpha: float
    route: str
    C: float
    C2: float
    eps0: object
    c2: float = math.nan
    c3: float = math.nan


# --------------------------------------------------------------------------
# conformal route


def find_separated_pair(ifs: IfsSystem, max_depth: int = DEFAULT_MAX_DEPTH) -> SeparatedPair:
    """Smallest N, then the lexicographically first (a₁, a₂), meeting both separation conditions."""
    if len(set(ifs.fixed_points)) < 2:
        raise PreconditionError("the IFS needs two maps with distinct fixed points")
    for N in range(1, max_depth + 1):
        for a1, a2 in itertools.combinations(ifs.alphabet, 2):
            w1, w2 = power((a1,), N), power((a2,), N)
            pair_gap = certify_disjoint(ifs, w1, w2)
            if pair_gap is None:
                continue
            partners = _partners(ifs, N, w1, w2, pair_gap)
            if partners is not None:
                return SeparatedPair(N, a1, a2, partners, pair_gap)
    raise SearchFailure(
        f"no separated pair up to depth {max_depth}; increase the depth or the precision"
    )


def _partners(ifs, N, w1, w2, pair_gap):
    out = []
    for w in words_of_length(ifs.alphabet, N):
        if w == w1:
            out.append((w, w2, pair_gap))
            continue
        if w == w2:
            out.append((w, w1, pair_gap))
            continue
        g1 = certify_disjoint(ifs, w, w1)
        g2 = certify_disjoint(ifs, w, w2)
        if g1 is None and g2 is None:
            return None
        if g2 is not None and (g1 is None or g2 > g1):
            out.append((w, w2, g2))
        else:
            out.append((w, w1, g1))
    return tuple(out)


def _relabel(ifs: IfsSystem, N: int) -> tuple:
    """The iterate and a map from length-N words to its letters (plain letters when N = 1)."""
    if N == 1:
        return ifs, {(a,): a for a in ifs.alphabet}
    it = ifs.iterate(N)
    return it, {w: w for w in it.alphabet}


def distortion_bound(ifs: IfsSystem):
    """K with sup|φ_w'| ≤ K inf|φ_w'| on the domain for every word w (1 for similarities)."""
    if not ifs.is_conformal:
        return ONE
    lip = max(m.log_derivative_lipschitz() for m in ifs.maps)
    if lip == 0:
        return ONE
    s = ifs.max_ratio
    exponent = float(lip * 2 * ifs.domain_radius / (1 - s))
    # float exp is within an ulp; the factor covers it with room to spare
    return Q(math.exp(exponent)) * Q("1000001/1000000")


def window_bound(c1, s_max, domain_radius, distortion) -> int:
    """Smallest M ≥ 1 with s_max^M ≤ c₁ / (8 R₀ K)."""
    if c1 <= 0:
        raise InvariantError("c1 must be positive")
    target = c1 / (8 * domain_radius * distortion)
    M, power_ = 1, s_max
    while power_ > target:
        power_ *= s_max
        M += 1
    return M


def _finish_plan(base, N, ifs, family, gaps, mode, cls=DisintegrationPlan, **extra):
    selector, weights = build_selector(ifs, family)
    q_min, q_max = weights.extremes
    if not (ZERO < q_min <= q_max < ONE):
        raise InvariantError("fiber weights must lie strictly between 0 and 1")
    c1 = min(g for _, g in gaps)
    r_min = ifs.min_ratio
    s_max = ifs.max_ratio
    K = distortion_bound(base)
    M = window_bound(c1, s_max, ifs.domain_radius, K)
    return cls(
        base=base,
        N=N,
        ifs=ifs,
        family=family,
        selector=selector,
        weights=weights,
        c1=c1,
        q_min=q_min,
        q_max=q_max,
        r_min=r_min,
        s_max=s_max,
        distortion=K,
        M=M,
        mode=mode,
        gaps=tuple(gaps),
        **extra,
    )


def build_family_conformal(ifs: IfsSystem, max_depth: int = DEFAULT_MAX_DEPTH) -> DisintegrationPlan:
    if ifs.dimension != 1:
        raise InputError("the conformal construction is one-dimensional; use build_family_affine")
    pair = find_separated_pair(ifs, max_depth)
    it, label = _relabel(ifs, pair.N)
    order = {w: i for i, w in enumerate(words_of_length(ifs.alphabet, pair.N))}
    subsets, gaps = [], []
    for w, partner, gap in pair.partners:
        members = sorted((w, partner), key=order.__getitem__)
        subsets.append(tuple(label[m] for m in members))
        gaps.append(((label[w], label[partner]), gap))
    family = SubsetFamily(tuple(subsets), it.alphabet, it.alphabet)
    return _finish_plan(ifs, pair.N, it, family, gaps, "conformal-1d")


# --------------------------------------------------------------------------
# affine route


def _affine_rank(points) -> int:
    if len(points) < 2:
        return 0
    rows = [list(sub(p, points[0])) for p in points[1:]]
    rank, cols = 0, len(rows[0])
    for col in range(cols):
        piv = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for r in range(len(rows)):
            if r != rank and rows[r][col] != 0:
                f = rows[r][col] / rows[rank][col]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def affine_span_dimension(ifs: IfsSystem) -> int:
    """Dimension of the affine hull of X, by closing the fixed points under the maps."""
    pts = list(dict.fromkeys(ifs.fixed_points))
    rank = _affine_rank(pts)
    while True:
        grown = list(dict.fromkeys(pts + [m(p) for m in ifs.maps for p in pts]))
        new_rank = _affine_rank(grown)
        if new_rank == rank:
            return rank
        # keep a spanning subset to stop the point list from exploding
        pts, rank = _spanning_subset(grown), new_rank


def _spanning_subset(points):
    keep = [points[0]]
    for p in points[1:]:
        if _affine_rank(keep + [p]) > _affine_rank(keep):
            keep.append(p)
    return keep


def avoidance_bounds(points, bits: int = 80) -> tuple:
    """Per m < d, a lower bound on min over affine m-planes W of max_i d(x_i, W).

    Σ_i d(x_i, W)² is at least the sum of the d−m smallest eigenvalues of the
    scatter matrix, so max_i d(x_i, W) ≥ sqrt(that sum / n).
    """
    n, d = len(points), len(points[0])
    mean = tuple(sum((p[i] for p in points), ZERO) / n for i in range(d))
    dev = [sub(p, mean) for p in points]
    S = [[sum((v[i] * v[j] for v in dev), ZERO) for j in range(d)] for i in range(d)]
    trace = sum((S[i][i] for i in range(d)), ZERO)
    if d == 1:
        return ((0, sqrt_lower(trace / n, bits)),)
    if d == 2:
        det = S[0][0] * S[1][1] - S[0][1] * S[1][0]
        disc = trace * trace - 4 * det
        lam_min = max(ZERO, (trace - sqrt_upper(disc, bits)) / 2)
        return ((0, sqrt_lower(trace / n, bits)), (1, sqrt_lower(lam_min / n, bits)))
    eig = np.sort(np.linalg.eigvalsh(np.array([[float(v) for v in row] for row in S])))
    slack = 1e-9 * max(1.0, float(trace))
    out = []
    for m in range(d):
        tail = max(0.0, float(np.sum(eig[: d - m])) - slack * (d - m))
        out.append((m, sqrt_lower(Q(tail) / n, bits)))
    return tuple(out)


def _disjoint_graph(ifs: IfsSystem, letters, words) -> dict:
    gaps = {}
    for i, j in itertools.combinations(range(len(letters)), 2):
        g = certify_disjoint(ifs, words[i], words[j])
        if g is not None:
            gaps[(i, j)] = gaps[(j, i)] = g
    return gaps


def build_family_affine(ifs: IfsSystem, max_depth: int = DEFAULT_MAX_DEPTH) -> DisintegrationPlan:
    """Affine-decay family on the first iterate admitting separated, affinely spread groups."""
    d = ifs.dimension
    if d == 1:
        return build_family_conformal(ifs, max_depth)
    if ifs.is_conformal:
        raise InputError("the affine construction needs similarities")
    if affine_span_dimension(ifs) < d:
        raise AffineReducibleError("the attractor lies in a proper affine subspace")
    bits = ifs.precision_bits
    for N in range(1, max_depth + 1):
        plan = _try_affine(ifs, N, d, bits)
        if plan is not None:
            return plan
    raise SearchFailure(f"no affine witness groups up to depth {max_depth}")


def _try_affine(ifs, N, d, bits):
    words = list(words_of_length(ifs.alphabet, N))
    it, label = _relabel(ifs, N)
    letters = [label[w] for w in words]
    hulls = [it.cell_hull(it.cell((a,))) for a in letters]
    gaps = _disjoint_graph(ifs, letters, words)
    adj = {i: {j for j in range(len(words)) if (i, j) in gaps} for i in range(len(words))}

    candidates = []
    for group in _cliques(adj, d + 1):
        pts = [hulls[i].center for i in group]
        bounds = avoidance_bounds(pts, bits)
        weakest = min(b for _, b in bounds)
        rho = max(hulls[i].radius for i in group)
        margin = weakest - rho
        if margin > 0:
            candidates.append((-margin, group, bounds, rho))
    if not candidates:
        return None
    candidates.sort(key=lambda c: (c[0], c[1]))

    # spread letters over groups so no member sits in many subsets (keeps q_min up)
    used, assignment = {}, []
    load = [0] * len(words)
    for i in range(len(words)):
        options = [c for c in candidates if all(j in adj[i] for j in c[1])]
        if not options:
            return None
        choice = min(options, key=lambda c: (max(load[j] for j in c[1]), c[0], c[1]))
        for j in choice[1]:
            load[j] += 1
        used.setdefault(choice[1], choice)
        assignment.append((letters[i], list(used).index(choice[1])))

    groups = list(used.values())
    eps0 = min(-c[0] for c in groups) / 2
    subsets, fam_gaps = [], []
    for i in range(len(words)):
        g_index = dict(assignment)[letters[i]]
        group = groups[g_index][1]
        members = sorted({i, *group})
        subsets.append(tuple(letters[j] for j in members))
        for a, b in itertools.combinations(members, 2):
            fam_gaps.append(((letters[a], letters[b]), gaps[(a, b)]))
    family = SubsetFamily(tuple(subsets), it.alphabet, it.alphabet)
    avoidance = tuple(
        (m, min(dict(c[2])[m] for c in groups)) for m in range(d)
    )
    return _finish_plan(
        ifs,
        N,
        it,
        family,
        fam_gaps,
        "affine-rd",
        cls=AffinePlan,
        eps0=eps0,
        groups=tuple(tuple(letters[j] for j in c[1]) for c in groups),
        witnesses=tuple(tuple(hulls[j].center for j in c[1]) for c in groups),
        avoidance=avoidance,
        assignment=tuple(assignment),
    )


def _cliques(adj: dict, size: int):
    """All cliques of the given size, as sorted index tuples in lexicographic order."""

    def extend(clique, pool):
        if len(clique) == size:
            yield tuple(clique)
            return
        for v in pool:
            if not clique or v > clique[-1]:
                yield from extend(clique + [v], [u for u in pool if u > v and u in adj[v]])

    yield from extend([], sorted(adj))


# --------------------------------------------------------------------------
# constants


def doubling_bound(plan: DisintegrationPlan):
    """C₁ = q_min^{−M} · prefactor, exact."""
    if plan.M <= 0:
        raise InvariantError("window bound M must be positive")
    return plan.prefactor / plan.q_min**plan.M


def decay_exponent(plan: DisintegrationPlan) -> DecayCertificate:
    """α and the constants of the planar and the ball-relative decay bounds.

    Each level a subset keeps one letter at distance > ε₀ from W, which costs
    at least q_min of the mass while ε grows by at most 1/r_min; hence
    μ_ω(W^(ε)) ≤ (ε/ε₀)^α / (1 − q_min) with α = log(1−q_min)/log r_min.
    Inside B(x, r) the window at radius r/2 rescales ε by at most 4R₀K and
    loses q_min^{−M}.
    """
    q_min, q_max = float(plan.q_min), float(plan.q_max)
    r_min = float(plan.r_min)
    alpha = math.log(1 - q_min) / math.log(r_min)
    eps0 = plan.epsilon0
    C = (1 / float(eps0)) ** alpha / (1 - q_min)
    scale = 4 * float(plan.domain_radius) * float(plan.distortion)
    C2 = float(doubling_bound(plan)) * C * scale**alpha
    if plan.mode == "conformal-1d" and plan.ifs.is_conformal:
        c2 = -1 / math.log(r_min)
        diam = diameter_of_attractor(plan.ifs, 2).lower
        c = float(diam) / float(plan.distortion)
        c3 = -c2 * math.log(c) if c > 0 else math.inf
        alpha_conf = -c2 * math.log(q_max)
        # |A_b| = 2 makes 1 − q_min = q_max, so both routes agree
        return DecayCertificate(alpha_conf, "conformal", C, C2, eps0, c2, c3)
    return DecayCertificate(alpha, "affine", C, C2, eps0)
