"""Reference implementations used only by the tests; deliberately naive."""
from fractions import Fraction
from itertools import product


def threshold(tau, beta, scale, q):
    """Ψ(q) as a Fraction: exact for β = 0 and integer τ, otherwise the binary float read exactly."""
    tau, beta, scale = Fraction(tau), Fraction(beta), Fraction(scale)
    if beta == 0 and tau.denominator == 1:
        return scale / Fraction(q) ** int(tau)
    import math

    return Fraction(float(scale) * q ** -float(tau) * math.log(q) ** -float(beta))


def brute_hits(x, tau, beta, scale, Q):
    """Every (p, q) with q ≤ Q and max_i |x_i − p_i/q| ≤ Ψ(q): a double loop over q and candidate p."""
    xs = [v if isinstance(v, Fraction) else Fraction(v) for v in x]
    out = set()
    q0 = 1 if Fraction(beta) == 0 else 2
    for q in range(q0, Q + 1):
        t = threshold(tau, beta, scale, q)
        per_coord = []
        for xi in xs:
            # integers only: |q·a − p·b| · t_den ≤ q·b·t_num with xi = a/b, t = t_num/t_den
            a, b = xi.numerator, xi.denominator
            centre = (q * a) // b
            reach = int(q * t) + 2
            per_coord.append(
                [p for p in range(centre - reach, centre + reach + 1)
                 if abs(q * a - p * b) * t.denominator <= q * b * t.numerator]
            )
        for ps in product(*per_coord):
            out.add((tuple(ps), q))
    return out


def dyadic_mass(p0, lo, hi, depth):
    """Bernoulli(p₀, 1−p₀) mass of (lo, hi) as a sum over the closed dyadic intervals of generation ``depth`` inside it."""
    p0 = Fraction(p0)
    p1 = 1 - p0
    total = Fraction(0)
    for j in range(2**depth):
        left, right = Fraction(j, 2**depth), Fraction(j + 1, 2**depth)
        if lo <= left and right <= hi:
            ones = bin(j).count("1")
            total += p0 ** (depth - ones) * p1**ones
    return total
