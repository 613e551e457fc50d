"""Finite-horizon survival of Ψ-approximations for points drawn from a self-similar measure."""
import argparse

from fibermeasure import systems
from fibermeasure.diophantine import ApproxFunction, wpsi_scan

parser = argparse.ArgumentParser()
parser.add_argument("--system", default="dyadic", choices=sorted(systems.SYSTEMS))
parser.add_argument("--Q", type=int, default=10**4)
parser.add_argument("--points", type=int, default=200)
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

thresholds = [10, 100, 1000, args.Q // 2]
ifs = systems.named(args.system)
for tau, beta in [(1, 0), (2, 0), (2, 3), (3, 0)]:
    if ifs.dimension == 2 and tau == 1:
        tau = "3/2"
    table = wpsi_scan(ifs, ApproxFunction(tau=tau, beta=beta), args.Q, args.points, thresholds, seed=args.seed)
    cols = "  ".join(f"q0={t}: {f:.3f}" for t, f in zip(thresholds, table.fractions))
    print(f"tau={tau} beta={beta}: {cols}")
