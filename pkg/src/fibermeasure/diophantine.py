"""Finite-horizon Diophantine diagnostics: summability test, Ψ-hits, Dirichlet profiles."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from gmpy2 import mpq

from .disintegration import FiberMeasure, OmegaStream, SubsetFamily, build_selector, sample_fiber
from .errors import DomainError, InputError, InvariantError, ResolutionError
from .ifs import IfsSystem
from .rational import Q

PV_HORIZONS = (10**3, 10**4, 10**5, 10**6)


@dataclass(frozen=True)
class ApproxFunction:
    """Ψ(q) = scale · q^{−τ} (log q)^{−β} (natural log), or a finite decreasing table {q: Ψ(q)}.

    ``exact(q)`` is the threshold used by every hit test: the exact rational
    value when β = 0 and τ is an integer, otherwise the binary float Ψ(q)
    read as a dyadic rational.
    """

    tau: object = 0
    beta: object = 0
    scale: object = 1
    table: tuple = field(default=())

    def __post_init__(self):
        if self.table:
            items = tuple(sorted((int(q), Q(v)) for q, v in dict(self.table).items()))
            if any(b[1] > a[1] for a, b in zip(items, items[1:])):
                raise InvariantError("tabulated Ψ must be decreasing")
            if any(v <= 0 for _, v in items):
                raise InvariantError("Ψ must be positive")
            object.__setattr__(self, "table", items)
        object.__setattr__(self, "tau", Fraction(Q(self.tau)))
        object.__setattr__(self, "beta", Fraction(Q(self.beta)))
        object.__setattr__(self, "scale", Q(self.scale))
        if self.scale <= 0:
            raise InvariantError("Ψ must be positive")
        if not self.table and self.tau < 0:
            raise InvariantError("Ψ must be decreasing (τ ≥ 0)")

    @property
    def form(self) -> str:
        return "tabulated" if self.table else "power-log"

    @property
    def min_q(self) -> int:
        if self.table:
            return self.table[0][0]
        return 1 if self.beta == 0 else 2

    @property
    def max_q(self):
        return self.table[-1][0] if self.table else None

    def __call__(self, q: int) -> float:
        return float(self.exact(q))

    def exact(self, q: int):
        q = int(q)
        if q < self.min_q or (self.max_q is not None and q > self.max_q):
            raise DomainError(f"Ψ is not defined at q={q}")
        if self.table:
            return dict(self.table)[q]
        if self.beta == 0 and self.tau.denominator == 1:
            return self.scale / mpq(q) ** int(self.tau)
        value = float(self.scale) * q ** -float(self.tau) * math.log(q) ** -float(self.beta)
        return mpq(value)


# --------------------------------------------------------------------------
# summability


@dataclass(frozen=True)
class PvResult:
    verdict: str
    exponent: Fraction
    log_power: Fraction
    horizons: tuple
    partial_sums: tuple
    trend: tuple  # decade increment over the 1/(n log n) reference increment

    @property
    def converges(self) -> bool:
        return self.verdict == "Converges"

    @property
    def moves_as_classified(self) -> bool:
        """Converges: trend strictly decreasing.  Diverges: trend non-decreasing."""
        pairs = list(zip(self.trend, self.trend[1:]))
        if self.converges:
            return all(b < a for a, b in pairs)
        return all(b >= a * (1 - 1e-12) for a, b in pairs)


def pv_condition(alpha, d: int, psi: ApproxFunction, horizons: Sequence[int] = PV_HORIZONS) -> PvResult:
    """Classify Σ n^{α(d+1)/d − 1} Ψ(n)^α for the power-log form, with partial sums.

    The summand is n^e (log n)^{−αβ} with e = α(d+1)/d − 1 − ατ; the series
    converges iff e < −1, or e = −1 and αβ > 1.
    """
    a = Fraction(Q(alpha))
    if a <= 0:
        raise DomainError("alpha must be positive")
    if d < 1:
        raise DomainError("d must be a positive integer")
    if psi.form != "power-log":
        raise InputError("the analytic classification needs the power-log form")
    e = a * (d + 1) / d - 1 - a * psi.tau
    lp = a * psi.beta
    verdict = "Converges" if e < -1 or (e == -1 and lp > 1) else "Diverges"

    horizons = tuple(sorted(int(h) for h in horizons))
    n = np.arange(2, horizons[-1] + 1, dtype=np.float64)
    logn = np.log(n)
    term = float(psi.scale) ** float(a) * np.exp(float(e) * logn - float(lp) * np.log(logn))
    ref = 1.0 / (n * logn)
    cs, cr = np.cumsum(term), np.cumsum(ref)
    idx = [h - 2 for h in horizons]
    sums = tuple(float(cs[i]) for i in idx)
    trend = tuple(
        float((cs[j] - cs[i]) / (cr[j] - cr[i])) for i, j in zip(idx, idx[1:])
    )
    return PvResult(verdict, e, lp, horizons, sums, trend)


# --------------------------------------------------------------------------
# hits


@dataclass(frozen=True)
class Hit:
    p: tuple
    q: int
    certain: bool = True


def _ceil(x) -> int:
    return -((-x.numerator) // x.denominator)


def _floor(x) -> int:
    return x.numerator // x.denominator


def _hits_at(x: tuple, q: int, psi_q, radius) -> list:
    """All p with max_i |x_i − p_i/q| ≤ Ψ(q); ``certain`` when the margin exceeds ``radius``."""
    thr = q * psi_q
    ranges = []
    for xi in x:
        qx = q * xi
        lo, hi = _ceil(qx - thr - q * radius), _floor(qx + thr + q * radius)
        cands = []
        for p in range(lo, hi + 1):
            gap = abs(qx - p)
            if gap <= thr + q * radius:
                cands.append((p, gap <= thr - q * radius, gap <= thr))
        ranges.append(cands)
    out = []
    for combo in _product(ranges):
        if all(c[2] for c in combo):
            out.append(Hit(tuple(c[0] for c in combo), q, all(c[1] for c in combo)))
        elif radius > 0:
            out.append(Hit(tuple(c[0] for c in combo), q, False))
    return out


def _product(ranges):
    if not ranges:
        yield ()
        return
    for head in ranges[0]:
        for tail in _product(ranges[1:]):
            yield (head,) + tail


def psi_hits(x, psi: ApproxFunction, Q_max: int, radius=0) -> list:
    """Every (p, q), q ≤ Q_max, with max_i |x_i − p_i/q| ≤ Ψ(q), in exact arithmetic.

    A float prefilter (with generous slack) skips the q that cannot hit; each
    surviving q is decided exactly.  With ``radius`` > 0 the coordinates are
    only known to that accuracy and hits decided by less than it are marked
    uncertain.
    """
    if Q_max < 1:
        raise DomainError("Q must be at least 1")
    x = tuple(Q(v) for v in x)
    radius = Q(radius)
    qs, exact, thr = _thresholds(psi, int(Q_max))
    if len(qs) == 0:
        return []
    slack = 1e-9 + qs * (float(radius) + 1e-12)
    keep = np.ones(len(qs), dtype=bool)
    for xi in x:
        qx = qs * float(xi)
        dist = np.abs(qx - np.round(qx))
        keep &= dist <= thr * (1 + 1e-9) + slack
    hits = []
    for i in np.flatnonzero(keep):
        hits.extend(_hits_at(x, int(qs[i]), exact[i], radius))
    return hits


@lru_cache(maxsize=32)
def _thresholds(psi: ApproxFunction, Q_max: int) -> tuple:
    qs = np.arange(psi.min_q, Q_max + 1)
    exact = [psi.exact(int(q)) for q in qs]
    return qs, exact, np.array([float(v) for v in exact]) * qs


def continued_fraction(x, max_terms: int = 64) -> list:
    """Partial quotients of x (exact; terminates for rationals)."""
    x = Q(x)
    terms = []
    while len(terms) < max_terms:
        a = _floor(x)
        terms.append(a)
        frac = x - a
        if frac == 0:
            break
        x = 1 / frac
    return terms


def convergents(x, q_max: int) -> list:
    """(p_n, q_n) with q_n ≤ q_max."""
    out = []
    pm2, qm2, pm1, qm1 = 0, 1, 1, 0
    for a in continued_fraction(x, 256):
        p, q = a * pm1 + pm2, a * qm1 + qm2
        if q > q_max:
            break
        out.append((p, q))
        pm2, qm2, pm1, qm1 = pm1, qm1, p, q
    return out


def legendre_exceptions(x, hits: Sequence[Hit], psi: ApproxFunction) -> list:
    """Hits with Ψ(q) < 1/(2q²) whose reduced fraction is not a convergent (must be empty)."""
    x = Q(x)
    conv = set()
    qmax = max((h.q for h in hits), default=1)
    for p, q in convergents(x, qmax):
        conv.add((p, q))
    bad = []
    for h in hits:
        if psi.exact(h.q) < mpq(1, 2 * h.q * h.q):
            f = mpq(h.p[0], h.q)
            if (f.numerator, f.denominator) not in conv:
                bad.append(h)
    return bad


# --------------------------------------------------------------------------
# Dirichlet profile


@dataclass(frozen=True)
class DirichletProfile:
    t: tuple
    best: tuple  # exact min_{0<q<t} max_i ‖q x_i‖
    delta: tuple  # t^{1/d} · best
    running_inf: tuple


def _dist_to_int(v):
    f = v - _floor(v)
    return min(f, 1 - f)


def dirichlet_profile(x, t_grid: Sequence[int], max_t: int = 10**6) -> DirichletProfile:
    x = tuple(Q(v) for v in x)
    d = len(x)
    t_grid = [int(t) for t in t_grid]
    if not t_grid or min(t_grid) < 2:
        raise DomainError("horizons must be at least 2")
    if any(b <= a for a, b in zip(t_grid, t_grid[1:])):
        raise DomainError("horizons must increase")
    if t_grid[-1] > max_t:
        raise DomainError(f"horizon {t_grid[-1]} exceeds the guard {max_t}")
    best, out_best, out_delta = None, [], []
    q = 1
    for t in t_grid:
        while q < t:
            v = max(_dist_to_int(q * xi) for xi in x)
            if best is None or v < best:
                best = v
            q += 1
        out_best.append(best)
        out_delta.append(float(t) ** (1.0 / d) * float(best))
    running, inf = [], math.inf
    for v in out_delta:
        inf = min(inf, v)
        running.append(inf)
    return DirichletProfile(tuple(t_grid), tuple(out_best), tuple(out_delta), tuple(running))


# --------------------------------------------------------------------------
# W(Ψ) survival scan


@dataclass(frozen=True)
class SurvivalTable:
    thresholds: tuple
    fractions: tuple
    last_hits: tuple
    accuracy: object


def wpsi_scan(
    source,
    psi: ApproxFunction,
    Q_max: int,
    n_points: int,
    thresholds: Sequence[int],
    seed: int = 0,
    tol=None,
) -> SurvivalTable:
    """Fraction of sampled points whose last Ψ-hit up to Q exceeds each threshold.

    ``source`` is an IfsSystem (sampling μ through the single full subset) or
    a FiberMeasure.  Points are exact rationals within ``tol`` of true
    samples, and tol must stay below Ψ(Q)/10.
    """
    if isinstance(source, IfsSystem):
        fam = SubsetFamily.full(source.alphabet)
        sel, w = build_selector(source, fam)
        fm = FiberMeasure(source, fam, sel, w, OmegaStream.constant(fam.labels[0]))
    elif isinstance(source, FiberMeasure):
        fm = source
    else:
        raise InputError("source must be an IFS or a fiber measure")
    limit = psi.exact(Q_max) / 10
    tol = limit / 2 if tol is None else Q(tol)
    if tol >= limit:
        raise ResolutionError(f"sampling tolerance {float(tol):.3g} is not below Ψ(Q)/10 = {float(limit):.3g}")
    thresholds = tuple(int(t) for t in thresholds)
    if n_points == 0:
        return SurvivalTable(thresholds, tuple(0.0 for _ in thresholds), (), tol)
    points = sample_fiber(fm, n_points, tol, seed).exact_points()
    last = []
    for x in points:
        hits = psi_hits(x, psi, Q_max, radius=tol)
        last.append(max((h.q for h in hits), default=0))
    fractions = tuple(sum(q > t for q in last) / n_points for t in thresholds)
    return SurvivalTable(thresholds, fractions, tuple(last), tol)
