"""Contractions: similarities on R^d and closed-form conformal maps on an interval."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, InvariantError
from .rational import (
    DEFAULT_PRECISION_BITS,
    ONE,
    ZERO,
    Q,
    add,
    identity,
    matmul,
    matvec,
    scale,
    sqrt_lower,
    sqrt_upper,
)

ORTHO_TOL = Q("1/1000000000000")


def _as_matrix(rows, d: int) -> tuple:
    m = tuple(tuple(Q(v) for v in row) for row in rows)
    if len(m) != d or any(len(row) != d for row in m):
        raise InputError(f"orthogonal part must be {d}x{d}")
    return m


def _orthogonality_defect(m: tuple) -> object:
    """max row abs-sum of (M^T M - I); zero iff exactly orthogonal."""
    mtm = matmul(tuple(zip(*m)), m)
    d = len(m)
    worst = ZERO
    for i in range(d):
        s = sum((abs(mtm[i][j] - (ONE if i == j else ZERO)) for j in range(d)), ZERO)
        worst = max(worst, s)
    return worst


@dataclass(frozen=True)
class SimilarityMap:
    """x ↦ ratio · O x + t."""

    ratio: object
    orthogonal: tuple
    translation: tuple

    def __post_init__(self):
        object.__setattr__(self, "ratio", Q(self.ratio))
        t = tuple(Q(v) for v in self.translation)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "orthogonal", _as_matrix(self.orthogonal, len(t)))
        if not ZERO < self.ratio < ONE:
            raise InvariantError(f"similarity ratio {self.ratio} not in (0,1)")
        if _orthogonality_defect(self.orthogonal) > ORTHO_TOL:
            raise InvariantError("orthogonal part is not orthogonal")

    @classmethod
    def line(cls, ratio, translation, flip: bool = False) -> "SimilarityMap":
        return cls(ratio, ((-1 if flip else 1,),), (translation,))

    @classmethod
    def plane(cls, ratio, translation, rotation=None) -> "SimilarityMap":
        rot = rotation if rotation is not None else ((1, 0), (0, 1))
        return cls(ratio, rot, tuple(translation))

    @property
    def dimension(self) -> int:
        return len(self.translation)

    @property
    def kind(self) -> str:
        return "similarity"

    @property
    def is_exact_orthogonal(self) -> bool:
        return _orthogonality_defect(self.orthogonal) == 0

    def __call__(self, x) -> tuple:
        return add(scale(self.ratio, matvec(self.orthogonal, x)), self.translation)

    def then(self, other: "SimilarityMap") -> "SimilarityMap":
        """The composition self ∘ other."""
        return SimilarityMap(
            self.ratio * other.ratio,
            matmul(self.orthogonal, other.orthogonal),
            self(other.translation),
        )

    def contraction_upper(self, bits: int = DEFAULT_PRECISION_BITS):
        defect = _orthogonality_defect(self.orthogonal)
        if defect == 0:
            return self.ratio
        return self.ratio * sqrt_upper(1 + defect, bits)

    def contraction_lower(self, bits: int = DEFAULT_PRECISION_BITS):
        defect = _orthogonality_defect(self.orthogonal)
        if defect == 0:
            return self.ratio
        return self.ratio * sqrt_lower(max(ZERO, 1 - defect), bits)

    def fixed_point(self) -> tuple:
        """Solve (I - rO) x = t exactly."""
        d = self.dimension
        a = [[(ONE if i == j else ZERO) - self.ratio * self.orthogonal[i][j] for j in range(d)] for i in range(d)]
        b = list(self.translation)
        return tuple(_solve(a, b))


def _solve(a: list, b: list) -> list:
    n = len(b)
    a = [row[:] + [b[i]] for i, row in enumerate(a)]
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col] / a[col][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [a[i][n] / a[i][i] for i in range(n)]


def identity_similarity(d: int) -> "_Identity":
    return _Identity(d)


@dataclass(frozen=True)
class _Identity:
    """Composition of the empty word; ratio 1 so it cannot be a SimilarityMap."""

    d: int
    ratio: object = ONE

    @property
    def orthogonal(self):
        return identity(self.d)

    @property
    def translation(self):
        return tuple(ZERO for _ in range(self.d))

    def __call__(self, x):
        return tuple(x)

    def then(self, other):
        return other

    def contraction_upper(self, bits: int = DEFAULT_PRECISION_BITS):
        return ONE

    def contraction_lower(self, bits: int = DEFAULT_PRECISION_BITS):
        return ONE


@dataclass(frozen=True)
class ConformalIntervalMap:
    """x ↦ (a x + b) / (c x + d) restricted to the interval Y = [lo, hi].

    ``family`` is ``"affine"`` (c = 0, d = 1) or ``"moebius"``.  Hölder data
    for |φ'| is supplied by the user and checked on a grid, not proven.
    """

    family: str
    coefficients: tuple
    domain: tuple
    holder_constant: object = ZERO
    holder_exponent: object = ONE
    check: bool = field(default=True, compare=False)

    def __post_init__(self):
        coeffs = tuple(Q(v) for v in self.coefficients)
        if self.family == "affine":
            if len(coeffs) != 2:
                raise InputError("affine map needs (a, b)")
            coeffs = (coeffs[0], coeffs[1], ZERO, ONE)
        elif self.family != "moebius" or len(coeffs) != 4:
            raise InputError(f"unknown conformal family {self.family!r}")
        object.__setattr__(self, "coefficients", coeffs)
        lo, hi = (Q(v) for v in self.domain)
        if not lo < hi:
            raise InputError("empty domain interval")
        object.__setattr__(self, "domain", (lo, hi))
        object.__setattr__(self, "holder_constant", Q(self.holder_constant))
        object.__setattr__(self, "holder_exponent", Q(self.holder_exponent))
        a, b, c, d = coeffs
        if a * d - b * c == 0:
            raise InvariantError("degenerate Möbius map")
        if (c * lo + d) * (c * hi + d) <= 0:
            raise InvariantError("pole inside the domain interval")
        if self.check:
            self._validate()

    def _validate(self):
        lo, hi = self.domain
        _, sup = self.derivative_bounds()
        if not sup < ONE:
            raise InvariantError(f"sup|φ'| = {sup} is not < 1 on the domain")
        img = self.image(lo, hi)
        if img[0] < lo or img[1] > hi:
            raise InvariantError("φ(Y) is not contained in Y")
        if not ZERO < self.holder_exponent <= ONE:
            raise InvariantError("Hölder exponent must lie in (0, 1]")
        if self.holder_constant > 0 or self.family == "moebius":
            self.verify_holder()

    @property
    def dimension(self) -> int:
        return 1

    @property
    def kind(self) -> str:
        return self.family

    def __call__(self, x) -> tuple:
        a, b, c, d = self.coefficients
        v = x[0]
        return ((a * v + b) / (c * v + d),)

    def derivative(self, x):
        a, b, c, d = self.coefficients
        return abs(a * d - b * c) / (c * x + d) ** 2

    def derivative_bounds(self, lo=None, hi=None):
        """Exact [inf|φ'|, sup|φ'|] on [lo, hi] (default: the domain)."""
        lo = self.domain[0] if lo is None else lo
        hi = self.domain[1] if hi is None else hi
        a, b, c, d = self.coefficients
        det = abs(a * d - b * c)
        e1, e2 = abs(c * lo + d), abs(c * hi + d)
        return det / max(e1, e2) ** 2, det / min(e1, e2) ** 2

    def image(self, lo, hi) -> tuple:
        u, v = self((lo,))[0], self((hi,))[0]
        return (min(u, v), max(u, v))

    def then(self, other: "ConformalIntervalMap") -> "ConformalIntervalMap":
        a1, b1, c1, d1 = self.coefficients
        a2, b2, c2, d2 = other.coefficients
        coeffs = (a1 * a2 + b1 * c2, a1 * b2 + b1 * d2, c1 * a2 + d1 * c2, c1 * b2 + d1 * d2)
        family = "affine" if coeffs[2] == 0 and self.family == other.family == "affine" else "moebius"
        if family == "affine":
            coeffs = (coeffs[0] / coeffs[3], coeffs[1] / coeffs[3])
        return ConformalIntervalMap(family, coeffs, self.domain, check=False)

    def contraction_upper(self, bits: int = DEFAULT_PRECISION_BITS):
        return self.derivative_bounds()[1]

    def contraction_lower(self, bits: int = DEFAULT_PRECISION_BITS):
        return self.derivative_bounds()[0]

    def log_derivative_lipschitz(self):
        """Upper bound on |d/dx log|φ'(x)|| = 2|c| / |cx + d| over the domain."""
        a, b, c, d = self.coefficients
        lo, hi = self.domain
        return 2 * abs(c) / min(abs(c * lo + d), abs(c * hi + d))

    def fixed_point(self) -> tuple:
        """A fixed point in the domain, located by bisection to 2**-80 (floats only for display)."""
        lo, hi = self.domain
        g = lambda x: self((x,))[0] - x
        if g(lo) == 0:
            return (lo,)
        for _ in range(80):
            mid = (lo + hi) / 2
            if (g(lo) > 0) == (g(mid) > 0):
                lo = mid
            else:
                hi = mid
        return (lo,)

    def verify_holder(self, n_grid: int = 65) -> float:
        """Largest observed | |φ'(x)| - |φ'(y)| | / |x-y|^α on a grid; raises if above the constant."""
        lo, hi = (float(v) for v in self.domain)
        xs = np.linspace(lo, hi, n_grid)
        a, b, c, d = (float(v) for v in self.coefficients)
        der = abs(a * d - b * c) / (c * xs + d) ** 2
        dx = np.abs(xs[:, None] - xs[None, :])
        dd = np.abs(der[:, None] - der[None, :])
        mask = dx > 0
        alpha = float(self.holder_exponent)
        worst = float(np.max(dd[mask] / dx[mask] ** alpha))
        if worst > float(self.holder_constant) * (1 + 1e-9):
            raise InvariantError(
                f"Hölder check failed: observed {worst:.6g} > constant {float(self.holder_constant):.6g}"
            )
        return worst
