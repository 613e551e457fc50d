"""Certified doubling ratios against C₁ for each built-in system."""
import argparse
import time

from fibermeasure import analysis, construction, systems

parser = argparse.ArgumentParser()
parser.add_argument("--trials", type=int, default=200)
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

for name, build in systems.SYSTEMS.items():
    ifs = build()
    t = time.perf_counter()
    plan = (construction.build_family_affine if ifs.dimension > 1 else construction.build_family_conformal)(ifs)
    scan = analysis.doubling_scan(plan, args.trials, seed=args.seed)
    print(
        f"{name:>15}: N={plan.N} M={plan.M} C1={float(scan.C1):9.3f} "
        f"max={float(scan.max_ratio):7.3f} violations={scan.violations} "
        f"unconverged={scan.unconverged} ({time.perf_counter() - t:.1f}s)"
    )
