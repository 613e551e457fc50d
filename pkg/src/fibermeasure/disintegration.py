"""The random disintegration μ = ∫ μ_ω dP(ω).

A subset family {A_i} of the alphabet induces a selector distribution q on
subset labels and, per label, fiber weights q_a^i on the letters of A_i.  A
fiber measure μ_ω is the pushforward of ∏_n q^{ω_n} under the coding map
restricted to ∏_n A_{ω_n}.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    CompatibilityError,
    FamilyError,
    InputError,
    InvariantError,
    PreconditionError,
)
from .ifs import AttractorCover, IfsSystem, certify_disjoint
from .rational import ONE, ZERO, Q
from .words import Word

BURN_IN = 64
_BLOCK = 4096
_SEED_LIMIT = 1 << 64


@dataclass(frozen=True)
class SubsetFamily:
    """Subsets A_i of the alphabet indexed by ``labels`` (default 0..k-1)."""

    subsets: tuple
    alphabet: tuple
    labels: tuple = None

    def __post_init__(self):
        subsets = tuple(tuple(dict.fromkeys(s)) for s in self.subsets)
        alphabet = tuple(self.alphabet)
        labels = tuple(range(len(subsets))) if self.labels is None else tuple(self.labels)
        if not subsets:
            raise FamilyError("a subset family needs at least one subset")
        if len(labels) != len(subsets) or len(set(labels)) != len(labels):
            raise FamilyError("labels must be distinct, one per subset")
        known = set(alphabet)
        for label, s in zip(labels, subsets):
            if not s:
                raise FamilyError(f"subset {label!r} is empty")
            stray = [a for a in s if a not in known]
            if stray:
                raise FamilyError(f"subset {label!r} has letters outside the alphabet: {stray}")
        covered = set().union(*map(set, subsets))
        missing = [a for a in alphabet if a not in covered]
        if missing:
            raise FamilyError(f"letters not covered by any subset: {missing}")
        object.__setattr__(self, "subsets", subsets)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "labels", labels)

    @property
    def k(self) -> int:
        return len(self.subsets)

    @property
    def by_label(self) -> dict:
        return dict(zip(self.labels, self.subsets))

    def subset(self, label) -> tuple:
        try:
            return self.subsets[self.labels.index(label)]
        except ValueError:
            raise CompatibilityError(f"unknown subset label {label!r}") from None

    @property
    def multiplicity(self) -> dict:
        return {a: sum(a in s for s in self.subsets) for a in self.alphabet}

    @property
    def is_construction_grade(self) -> bool:
        return all(len(s) >= 2 for s in self.subsets)

    @classmethod
    def full(cls, alphabet: Sequence, k: int = 1) -> "SubsetFamily":
        return cls(tuple(tuple(alphabet) for _ in range(k)), tuple(alphabet))


@dataclass(frozen=True)
class SelectorDistribution:
    labels: tuple
    q: tuple

    def prob(self, label):
        return self.q[self.labels.index(label)]

    def as_dict(self) -> dict:
        return dict(zip(self.labels, self.q))


@dataclass(frozen=True)
class FiberWeights:
    """Per label i, the pairs (a, q_a^i) for a in A_i, in subset order."""

    table: tuple

    def of(self, label) -> dict:
        for lab, pairs in self.table:
            if lab == label:
                return dict(pairs)
        raise CompatibilityError(f"unknown subset label {label!r}")

    def weight(self, label, a):
        w = self.of(label)
        if a not in w:
            raise CompatibilityError(f"letter {a!r} is not in subset {label!r}")
        return w[a]

    @property
    def extremes(self) -> tuple:
        values = [w for _, pairs in self.table for _, w in pairs]
        return min(values), max(values)


def _weights_of(p, family: SubsetFamily) -> dict:
    if isinstance(p, IfsSystem):
        return {a: p.weight(a) for a in family.alphabet}
    if isinstance(p, Mapping):
        return {a: Q(p[a]) for a in family.alphabet}
    p = tuple(p)
    if len(p) != len(family.alphabet):
        raise FamilyError("probability vector and alphabet differ in length")
    return {a: Q(v) for a, v in zip(family.alphabet, p)}


def build_selector(p, family: SubsetFamily) -> tuple:
    """q_i = Σ_{a∈A_i} p_a / #{j : a∈A_j} and q_a^i = p_a / (q_i · #{j : a∈A_j})."""
    pa = _weights_of(p, family)
    mult = family.multiplicity
    q = tuple(sum((pa[a] / mult[a] for a in s), ZERO) for s in family.subsets)
    if sum(q, ZERO) != ONE:
        raise InvariantError(f"selector weights sum to {sum(q, ZERO)}, not 1")
    table = []
    for label, s, qi in zip(family.labels, family.subsets, q):
        pairs = tuple((a, pa[a] / (qi * mult[a])) for a in s)
        if sum((w for _, w in pairs), ZERO) != ONE:
            raise InvariantError(f"fiber weights of subset {label!r} do not sum to 1")
        table.append((label, pairs))
    return SelectorDistribution(family.labels, q), FiberWeights(tuple(table))


def selector_consistency(selector: SelectorDistribution, weights: FiberWeights, family: SubsetFamily) -> dict:
    """Σ_{i: a∈A_i} q_i q_a^i for every letter; equals p_a exactly."""
    out = {a: ZERO for a in family.alphabet}
    for label, qi in zip(selector.labels, selector.q):
        for a, w in weights.of(label).items():
            out[a] += qi * w
    return out


# --------------------------------------------------------------------------
# ω streams


@lru_cache(maxsize=256)
def _sampled_block(seed: int, cum: tuple, block: int) -> tuple:
    rng = np.random.default_rng([seed, block])
    u = rng.random(_BLOCK)
    return tuple(np.searchsorted(np.asarray(cum), u, side="right").tolist())


def _cumulative(q) -> tuple:
    c = np.cumsum([float(v) for v in q])
    c[-1] = 1.0
    return tuple(c[:-1].tolist())


@dataclass(frozen=True)
class OmegaStream:
    """ω = (ω_0, ω_1, …) as an explicit prefix followed by a periodic tail or i.i.d. draws.

    Sampled tails are drawn in independent blocks keyed by (seed, block), so any
    digit is reproducible without generating its predecessors.
    """

    prefix: tuple = ()
    period: tuple = ()
    seed: int | None = None
    labels: tuple = ()
    probs: tuple = ()
    offset: int = 0
    _cum: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))
        object.__setattr__(self, "period", tuple(self.period))
        if self.offset < 0:
            raise InputError("negative shift")
        if self.seed is None:
            if not self.period:
                raise InputError("an explicit stream needs a nonempty periodic tail")
        else:
            if not 0 <= self.seed < _SEED_LIMIT:
                raise InputError("seed must be a 64-bit unsigned integer")
            if not self.labels or len(self.labels) != len(self.probs):
                raise InputError("a sampled stream needs labels and their probabilities")
            object.__setattr__(self, "labels", tuple(self.labels))
            object.__setattr__(self, "probs", tuple(Q(v) for v in self.probs))
            object.__setattr__(self, "_cum", _cumulative(self.probs))

    @classmethod
    def explicit(cls, prefix: Sequence = (), period: Sequence = (0,)) -> "OmegaStream":
        return cls(prefix=tuple(prefix), period=tuple(period))

    @classmethod
    def constant(cls, label) -> "OmegaStream":
        return cls(period=(label,))

    @classmethod
    def sampled(cls, selector: SelectorDistribution, seed: int, prefix: Sequence = ()) -> "OmegaStream":
        return cls(prefix=tuple(prefix), seed=seed, labels=selector.labels, probs=selector.q)

    @property
    def mode(self) -> str:
        return "explicit" if self.seed is None else "sampled"

    def digit(self, n: int):
        if n < 0:
            raise IndexError("negative position")
        m = n + self.offset
        if m < len(self.prefix):
            return self.prefix[m]
        m -= len(self.prefix)
        if self.seed is None:
            return self.period[m % len(self.period)]
        block, pos = divmod(m, _BLOCK)
        return self.labels[_sampled_block(self.seed, self._cum, block)[pos]]

    def digits(self, n: int) -> tuple:
        return tuple(self.digit(j) for j in range(n))

    def shift(self, n: int = 1) -> "OmegaStream":
        if n < 0:
            raise InputError("negative shift")
        return replace(self, offset=self.offset + n)


def quantile_prefix(u: float, selector: SelectorDistribution, length: int) -> tuple:
    """First digits of the q-adic expansion of u ∈ [0,1): maps Lebesgue measure to P."""
    q = [float(v) for v in selector.q]
    cum = np.concatenate(([0.0], np.cumsum(q)))
    out = []
    for _ in range(length):
        i = min(int(np.searchsorted(cum, u, side="right")) - 1, len(q) - 1)
        out.append(selector.labels[i])
        u = min(max((u - cum[i]) / q[i], 0.0), np.nextafter(1.0, 0.0))
    return tuple(out)


# --------------------------------------------------------------------------
# fiber measures


@dataclass(frozen=True)
class FiberMeasure:
    """Handle for μ_ω.  ``certified`` records that letters within each subset have disjoint cylinders."""

    ifs: IfsSystem
    family: SubsetFamily
    selector: SelectorDistribution
    weights: FiberWeights
    omega: OmegaStream
    certified: bool = False

    def digit(self, n: int):
        return self.omega.digit(n)

    def shift(self, n: int = 1) -> "FiberMeasure":
        return replace(self, omega=self.omega.shift(n))

    def subset_at(self, n: int) -> tuple:
        return self.family.subset(self.omega.digit(n))

    def is_compatible(self, w: Word) -> bool:
        return all(a in self.subset_at(j) for j, a in enumerate(w))


def certify_family(ifs: IfsSystem, family: SubsetFamily, max_depth: int = 10):
    """Smallest certified gap between distinct same-subset cylinders, or None if some pair fails."""
    gaps = []
    for s in family.subsets:
        for a, b in itertools.combinations(s, 2):
            g = certify_disjoint(ifs, (a,), (b,), max_depth=max_depth)
            if g is None:
                return None
            gaps.append(g)
    return min(gaps) if gaps else None


def fiber_measure(
    ifs: IfsSystem, family: SubsetFamily, omega: OmegaStream, certify: bool = True
) -> FiberMeasure:
    if tuple(family.alphabet) != tuple(ifs.alphabet):
        raise FamilyError("family alphabet differs from the IFS alphabet")
    selector, weights = build_selector(ifs, family)
    ok = certify and family.is_construction_grade and certify_family(ifs, family) is not None
    return FiberMeasure(ifs, family, selector, weights, omega, ok)


def cylinder_mass(fm: FiberMeasure, w: Word, symbolic: bool = False):
    """μ_ω(φ_w(X_{σ^n ω})) = ∏ q_{a_j}^{ω_j}.

    Without a disjointness certificate the product is still available with
    ``symbolic=True``; it is then the m_ω mass of the symbolic cylinder only.
    """
    w = tuple(w)
    mass = ONE
    for j, a in enumerate(w):
        label = fm.digit(j)
        if a not in fm.family.subset(label):
            raise CompatibilityError(f"digit {a!r} at position {j} is not in A_{label}")
        mass *= fm.weights.weight(label, a)
    if w and not fm.certified and not symbolic:
        raise PreconditionError("family lacks a disjointness certificate; pass symbolic=True")
    return mass


def symbolic_mass(fm: FiberMeasure, w: Word):
    return cylinder_mass(fm, w, symbolic=True)


def averaged_cylinder_mass(family: SubsetFamily, selector: SelectorDistribution, weights: FiberWeights, w: Word):
    """Σ over selector prefixes b of length |w| of P([b]) · m_b([w]), by brute force."""
    w = tuple(w)
    total = ZERO
    qs = selector.as_dict()
    tables = {lab: weights.of(lab) for lab in family.labels}
    for b in itertools.product(family.labels, repeat=len(w)):
        term = ONE
        for label, a in zip(b, w):
            wa = tables[label].get(a)
            if wa is None:
                term = ZERO
                break
            term *= qs[label] * wa
        total += term
    return total


def fiber_support_cover(fm: FiberMeasure, depth: int) -> AttractorCover:
    """Hulls of the ω-compatible words of length ``depth``; their union covers X_ω."""
    if depth < 0:
        raise InputError("depth must be >= 0")
    ifs = fm.ifs
    cells = [ifs.root_cell()]
    for j in range(depth):
        letters = fm.subset_at(j)
        cells = [ifs.child(c, a) for c in cells for a in letters]
    return AttractorCover(depth, tuple(ifs.cell_hull(c) for c in cells))


# --------------------------------------------------------------------------
# samplers (floating point; exact replays are available through the words)


class _FloatMaps:
    def __init__(self, ifs: IfsSystem):
        self.conformal = ifs.is_conformal
        if self.conformal:
            self.coef = np.array([[float(v) for v in m.coefficients] for m in ifs.maps])
        else:
            self.lin = np.array(
                [[[float(m.ratio * v) for v in row] for row in m.orthogonal] for m in ifs.maps]
            )
            self.t = np.array([[float(v) for v in m.translation] for m in ifs.maps])
        self.start = np.array([float(v) for v in ifs.domain_center])

    def apply(self, idx: np.ndarray, x: np.ndarray) -> np.ndarray:
        if self.conformal:
            a, b, c, d = (self.coef[idx, j][:, None] for j in range(4))
            return (a * x + b) / (c * x + d)
        return np.einsum("nij,nj->ni", self.lin[idx], x) + self.t[idx]


@dataclass(frozen=True)
class FiberSample:
    """Sampled letter indices (rows are words a_1..a_m) and the float points φ_{a_1…a_m}(c₀)."""

    ifs: IfsSystem
    indices: np.ndarray
    points: np.ndarray

    def __len__(self) -> int:
        return len(self.points)

    @property
    def depth(self) -> int:
        return self.indices.shape[1] if self.indices.ndim == 2 else 0

    def words(self) -> list:
        alphabet = self.ifs.alphabet
        return [tuple(alphabet[i] for i in row) for row in self.indices]

    def exact_points(self) -> list:
        c0 = self.ifs.domain_center
        return [self.ifs.cell(w).apply(c0) for w in self.words()]


def _letter_tables(ifs: IfsSystem, fm: FiberMeasure, labels: Sequence) -> tuple:
    """Per label: letter indices and float cumulative weights, padded to a common width."""
    width = max(len(fm.family.subset(lab)) for lab in labels)
    idx = np.zeros((len(labels), width), dtype=np.int64)
    cum = np.ones((len(labels), width))
    for r, lab in enumerate(labels):
        pairs = list(fm.weights.of(lab).items())
        idx[r, : len(pairs)] = [ifs.index(a) for a, _ in pairs]
        c = np.cumsum([float(w) for _, w in pairs])
        c[-1] = 1.0
        cum[r, : len(pairs)] = c
        idx[r, len(pairs):] = idx[r, len(pairs) - 1]
    return idx, cum


def _draw(rng, idx_table, cum_table, rows: np.ndarray) -> np.ndarray:
    u = rng.random(len(rows))
    pos = (u[:, None] >= cum_table[rows]).sum(axis=1)
    pos = np.minimum(pos, cum_table.shape[1] - 1)
    return idx_table[rows, pos]


def sampling_depth(fm: FiberMeasure, tol) -> int:
    """Smallest m with R₀ ∏_{j<m} max_{a∈A_{ω_j}} Lip(φ_a) < tol."""
    tol = Q(tol)
    if tol <= 0:
        raise InputError("tol must be positive")
    ifs = fm.ifs
    lip = {a: ifs.map(a).contraction_upper(ifs.precision_bits) for a in ifs.alphabet}
    radius, m = ifs.domain_radius, 0
    while not radius < tol:
        radius *= max(lip[a] for a in fm.subset_at(m))
        m += 1
    return m


def sample_fiber(fm: FiberMeasure, n: int, tol, seed: int) -> FiberSample:
    """n independent μ_ω samples, each within ``tol`` of an exact μ_ω-distributed point."""
    ifs = fm.ifs
    m = sampling_depth(fm, tol)
    fmaps = _FloatMaps(ifs)
    x = np.tile(fmaps.start, (n, 1))
    indices = np.zeros((n, m), dtype=np.int64)
    labels = fm.family.labels
    idx_table, cum_table = _letter_tables(ifs, fm, labels)
    rng = np.random.default_rng(seed)
    for j in range(m - 1, -1, -1):
        row = labels.index(fm.digit(j))
        drawn = _draw(rng, idx_table, cum_table, np.full(n, row))
        indices[:, j] = drawn
        x = fmaps.apply(drawn, x)
    return FiberSample(ifs, indices, x)


def chaos_game(ifs: IfsSystem, n: int, seed: int, burn_in: int = BURN_IN) -> np.ndarray:
    """n independent μ samples, each the end of a ``burn_in``-step orbit from c₀."""
    fmaps = _FloatMaps(ifs)
    cum = np.cumsum([float(w) for w in ifs.weights])
    cum[-1] = 1.0
    rng = np.random.default_rng(seed)
    x = np.tile(fmaps.start, (n, 1))
    for _ in range(burn_in):
        idx = np.searchsorted(cum, rng.random(n), side="right")
        x = fmaps.apply(np.minimum(idx, len(cum) - 1), x)
    return x


def sample_mixture(
    ifs: IfsSystem,
    family: SubsetFamily,
    n_omega: int,
    n_points: int,
    seed: int,
    depth: int = BURN_IN,
    stratified: bool = True,
) -> np.ndarray:
    """Samples of ∫ μ_ω dP: n_omega selector streams, n_points in total split evenly among them.

    With ``stratified`` the streams come from u_k = (k + U_k)/n_omega pushed through
    the q-adic expansion, which removes between-fiber sampling noise.
    """
    if n_omega <= 0:
        raise InputError("n_omega must be positive")
    if n_points < n_omega:
        raise InputError("need at least one point per fiber")
    selector, weights = build_selector(ifs, family)
    fm = FiberMeasure(ifs, family, selector, weights, OmegaStream.constant(family.labels[0]))
    labels = family.labels
    rng = np.random.default_rng([seed, 1])
    if stratified:
        us = (np.arange(n_omega) + rng.random(n_omega)) / n_omega
        sel = np.array([[labels.index(b) for b in quantile_prefix(u, selector, depth)] for u in us])
    else:
        cum = np.cumsum([float(v) for v in selector.q])
        cum[-1] = 1.0
        sel = np.minimum(np.searchsorted(cum, rng.random((n_omega, depth)), side="right"), len(labels) - 1)
    owner = np.repeat(np.arange(n_omega), np.diff(np.linspace(0, n_points, n_omega + 1).astype(np.int64)))
    idx_table, cum_table = _letter_tables(ifs, fm, labels)
    fmaps = _FloatMaps(ifs)
    x = np.tile(fmaps.start, (n_points, 1))
    for j in range(depth - 1, -1, -1):
        x = fmaps.apply(_draw(rng, idx_table, cum_table, sel[owner, j]), x)
    return x


@dataclass(frozen=True)
class Residual:
    """Per-cell |μ̂ − ∫μ̂_ω| against 3 pooled binomial standard errors."""

    max_abs_diff: float
    bound: float
    diffs: tuple
    bounds: tuple
    n_cells: int

    @property
    def passed(self) -> bool:
        return all(d <= b for d, b in zip(self.diffs, self.bounds))

    @property
    def violations(self) -> int:
        return sum(d > b for d, b in zip(self.diffs, self.bounds))


def cell_counts(ifs: IfsSystem, points: np.ndarray, n_cells: int) -> np.ndarray:
    """Histogram over n_cells congruent boxes tiling the cube around the domain ball."""
    d = ifs.dimension
    side = round(n_cells ** (1.0 / d))
    if side**d != n_cells:
        raise InputError(f"n_cells={n_cells} is not a perfect {d}-th power")
    lo = np.array([float(c - ifs.domain_radius) for c in ifs.domain_center])
    width = 2 * float(ifs.domain_radius)
    k = np.clip(np.floor((points - lo) / width * side).astype(np.int64), 0, side - 1)
    flat = np.ravel_multi_index(tuple(k.T), (side,) * d)
    return np.bincount(flat, minlength=n_cells)


def disintegration_residual(
    ifs: IfsSystem,
    family: SubsetFamily,
    n_omega: int,
    n_points: int,
    n_cells: int,
    seed: int,
    stratified: bool = True,
) -> Residual:
    if n_omega <= 0:
        raise InputError("n_omega must be positive")
    direct = chaos_game(ifs, n_points, seed)
    mixed = sample_mixture(ifs, family, n_omega, n_points, seed + 1, stratified=stratified)
    c1 = cell_counts(ifs, direct, n_cells)
    c2 = cell_counts(ifs, mixed, n_cells)
    n1, n2 = len(direct), len(mixed)
    diffs = np.abs(c1 / n1 - c2 / n2)
    pooled = (c1 + c2) / (n1 + n2)
    bounds = 3 * np.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    return Residual(
        float(diffs.max()),
        float(bounds.max()),
        tuple(diffs.tolist()),
        tuple(bounds.tolist()),
        n_cells,
    )
