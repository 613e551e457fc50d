"""Print the dyadic counterexample schedule: ε_n → 0 while the slab keeps a fixed share of the ball."""
import argparse

from gmpy2 import mpq

from fibermeasure.analysis import counterexample_schedule

parser = argparse.ArgumentParser()
parser.add_argument("--p0", default="2/5")
parser.add_argument("--n-max", type=int, default=24)
args = parser.parse_args()

sched = counterexample_schedule(mpq(args.p0), range(2, args.n_max + 1))
print(f"{'n':>3} {'k':>4} {'eps_n':>12} {'ratio_n':>10}")
for row in sched.rows:
    print(f"{row.n:>3} {row.k:>4} {float(row.eps):>12.3e} {float(row.ratio):>10.5f}")
