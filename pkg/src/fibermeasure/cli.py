"""Command-line front end: ``fibermeasure <command> [options]``.

Exit status is 0 on success, 1 on bad input and 2 when a certification or
scan check fails.  Reports go to stdout or ``--out`` as JSON (default) or
as the CSV of their tables.
"""
from __future__ import annotations

import argparse
import sys
import time

from . import analysis, construction, diophantine
from .config import ConfigDocument, Numerics, load_config
from .disintegration import OmegaStream, disintegration_residual, sample_fiber, selector_consistency
from .errors import CertificationError, InputError
from .rational import Q
from .report import ReportRecord, Table, cell, digest

COMMANDS = (
    "construct",
    "fiber-sample",
    "disintegration-check",
    "window",
    "ball-mass",
    "slab-decay",
    "doubling",
    "counterexample",
    "pv-condition",
    "psi-hits",
    "dirichlet",
    "wpsi-scan",
)


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; bad input must exit with 1 here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# argument helpers


def _rat(text: str):
    try:
        return Q(text.strip())
    except (TypeError, ValueError, ZeroDivisionError):
        raise InputError(f"not a rational number: {text!r}") from None


def _point(text: str) -> tuple:
    return tuple(_rat(t) for t in text.split(","))


def _rat_list(text: str) -> tuple:
    return tuple(_rat(t) for t in text.split(","))


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise InputError(f"not a list of integers: {text!r}") from None


def _int_range(text: str) -> tuple:
    """"4..16" or "4,5,9"."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        try:
            return tuple(range(int(lo), int(hi) + 1))
        except ValueError:
            raise InputError(f"not an integer range: {text!r}") from None
    return _int_list(text)


def _letter(a) -> str:
    if isinstance(a, tuple):
        return "".join(str(x) for x in a) if all(0 <= x < 10 for x in a) else ".".join(str(x) for x in a)
    return str(a)


def _word(w) -> str:
    return " ".join(_letter(a) for a in w)


def _pt(x) -> str:
    return ",".join(str(cell(v)) for v in x)


# --------------------------------------------------------------------------
# context


def _document(args) -> ConfigDocument:
    if args.config:
        doc = load_config(args.config)
    else:
        doc = ConfigDocument(system=args.system)
    num = doc.numerics
    num = Numerics(
        args.precision if args.precision is not None else num.precision_bits,
        args.depth if args.depth is not None else num.max_depth,
        _rat(args.tol) if args.tol is not None else num.tolerance,
    )
    seed = args.seed if args.seed is not None else doc.seed
    if not 0 <= seed < 2**64:
        raise InputError("seed must be a 64-bit unsigned integer")
    return ConfigDocument(doc.dimension, doc.maps, doc.weights, num, seed, doc.system, doc.system_args)


def _plan(doc: ConfigDocument):
    ifs = doc.build_ifs()
    depth = doc.numerics.max_depth
    if ifs.dimension > 1:
        return construction.build_family_affine(ifs, depth)
    return construction.build_family_conformal(ifs, depth)


def _omega(plan, text: str | None, seed: int) -> OmegaStream:
    """Subset indices "prefix;period" (e.g. "0,1;2"), or a seeded sample when absent."""
    if not text:
        return OmegaStream.sampled(plan.selector, seed)
    labels = plan.family.labels
    pre, _, per = text.partition(";")

    def pick(part):
        out = []
        for i in _int_list(part) if part.strip() else ():
            if not 0 <= i < len(labels):
                raise InputError(f"omega digit {i} is not a subset index below {len(labels)}")
            out.append(labels[i])
        return tuple(out)

    period = pick(per) or (labels[0],)
    return OmegaStream.explicit(pick(pre), period)


def _plan_certificates(plan) -> dict:
    cert = construction.decay_exponent(plan)
    return {
        "N": plan.N,
        "mode": plan.mode,
        "c1": plan.c1,
        "q_min": plan.q_min,
        "q_max": plan.q_max,
        "r_min": plan.r_min,
        "s_max": plan.s_max,
        "distortion": plan.distortion,
        "M": plan.M,
        "C1": plan.C1,
        "epsilon0": plan.epsilon0,
        "alpha": cert.alpha,
        "decay_route": cert.route,
        "C": cert.C,
        "C2": cert.C2,
    }


# --------------------------------------------------------------------------
# commands; each returns (certificates, tables, warnings, failed)


def cmd_construct(args, doc):
    plan = _plan(doc)
    fam_rows = []
    for label, subset, q in zip(plan.family.labels, plan.family.subsets, plan.selector.q):
        weights = plan.weights.of(label)
        fam_rows.append(
            (_letter(label), _word(subset), q, " ".join(f"{_letter(a)}:{cell(w)}" for a, w in weights.items()))
        )
    cons = selector_consistency(plan.selector, plan.weights, plan.family)
    cons_rows = [(_letter(a), plan.ifs.weight(a), v) for a, v in cons.items()]
    failed = any(plan.ifs.weight(a) != v for a, v in cons.items())
    tables = {"family": Table.named("family", fam_rows), "consistency": Table.named("consistency", cons_rows)}
    return _plan_certificates(plan), tables, [], failed


def cmd_fiber_sample(args, doc):
    plan = _plan(doc)
    fm = analysis.plan_fiber(plan, _omega(plan, args.omega, doc.seed))
    s = sample_fiber(fm, args.n, doc.numerics.tolerance, doc.seed)
    words = s.words()
    rows = [(i, _word(w), ",".join(repr(float(v)) for v in p)) for i, (w, p) in enumerate(zip(words, s.points))]
    certs = {"n": args.n, "depth": s.depth, "accuracy": doc.numerics.tolerance}
    return certs, {"samples": Table.named("samples", rows)}, [], False


def cmd_disintegration_check(args, doc):
    plan = _plan(doc)
    res = disintegration_residual(plan.ifs, plan.family, args.fibers, args.points, args.cells, doc.seed)
    cons = selector_consistency(plan.selector, plan.weights, plan.family)
    exact = all(plan.ifs.weight(a) == v for a, v in cons.items())
    rows = [(i, d, b) for i, (d, b) in enumerate(zip(res.diffs, res.bounds))]
    certs = {"exact_identity": exact, "max_abs_diff": res.max_abs_diff, "violations": res.violations}
    return certs, {"cells": Table.named("cells", rows)}, [], not (exact and res.passed)


def cmd_window(args, doc):
    plan = _plan(doc)
    fm = analysis.plan_fiber(plan, _omega(plan, args.omega, doc.seed))
    r = _rat(args.r) if args.r else analysis.default_r_grid(plan)[0]
    x = _point(args.x) if args.x else analysis.support_point(fm, r / 8, doc.seed)
    win = analysis.approximation_window(plan, fm, x, r)
    gap = win.N2 - win.N1
    failed = not 0 < gap <= plan.M
    rows = [(_pt(x), r, win.N1, win.N2, plan.M, gap, _word(win.digits[: win.N2]))]
    certs = {"N1": win.N1, "N2": win.N2, "M": plan.M, "N1_certified": win.N1_certified}
    return certs, {"window": Table.named("window", rows)}, [], failed


def cmd_ball_mass(args, doc):
    plan = _plan(doc)
    fm = analysis.plan_fiber(plan, _omega(plan, args.omega, doc.seed))
    x, r = _point(args.x), _rat(args.r)
    br = analysis.ball_mass_bracket(plan, fm, x, r, tol=doc.numerics.tolerance, depth_cap=args.depth_cap)
    warnings = [] if br.converged else [f"bracket not within tolerance at depth {br.depth}"]
    rows = [(_pt(x), r, br.lower, br.upper, br.depth, br.converged)]
    certs = {"lower": br.lower, "upper": br.upper, "depth": br.depth}
    return certs, {"ball_mass": Table.named("ball_mass", rows)}, warnings, False


def cmd_slab_decay(args, doc):
    plan = _plan(doc)
    eps = _rat_list(args.eps)
    scan = analysis.decay_scan(plan, eps, args.trials, seed=doc.seed)
    rows = list(zip(eps, scan.sup_ratio, scan.bounds))
    slope_ok = scan.slope >= scan.alpha - 0.05
    certs = {
        "alpha": scan.alpha,
        "C2": scan.C2,
        "slope": scan.slope,
        "violations": scan.violations,
        "unconverged": scan.unconverged,
    }
    warnings = [f"{scan.unconverged} trials did not converge"] if scan.unconverged else []
    return certs, {"decay": Table.named("decay", rows)}, warnings, bool(scan.violations) or not slope_ok


def cmd_doubling(args, doc):
    plan = _plan(doc)
    scan = analysis.doubling_scan(plan, args.trials, seed=doc.seed)
    rows = [(r.trial, r.omega_seed, _pt(r.x), r.r, r.ratio_upper, r.converged) for r in scan.rows]
    certs = {"C1": scan.C1, "max_ratio": scan.max_ratio, "violations": scan.violations, "unconverged": scan.unconverged}
    warnings = [f"{scan.unconverged} trials did not converge"] if scan.unconverged else []
    return certs, {"doubling": Table.named("doubling", rows)}, warnings, bool(scan.violations)


def cmd_counterexample(args, doc):
    sched = analysis.counterexample_schedule(_rat(args.p0), _int_range(args.n))
    rows = [(row.n, row.k, row.eps, row.ratio) for row in sched.rows]
    return {"p0": sched.p0}, {"counterexample": Table.named("counterexample", rows)}, [], False


def _psi(args) -> diophantine.ApproxFunction:
    return diophantine.ApproxFunction(_rat(args.tau), _rat(args.beta), _rat(args.scale))


def cmd_pv_condition(args, doc):
    res = diophantine.pv_condition(_rat(args.alpha), args.d, _psi(args))
    trend = (None,) + res.trend
    rows = list(zip(res.horizons, res.partial_sums, trend))
    certs = {"verdict": res.verdict, "exponent": res.exponent, "log_power": res.log_power}
    return certs, {"pv": Table.named("pv", rows)}, [], not res.moves_as_classified


def cmd_psi_hits(args, doc):
    x = _point(args.x)
    psi = _psi(args)
    hits = diophantine.psi_hits(x, psi, args.Q)
    rows = [(h.q, ",".join(str(p) for p in h.p), h.certain) for h in hits]
    failed, warnings = False, []
    if len(x) == 1:
        bad = diophantine.legendre_exceptions(x[0], hits, psi)
        failed = bool(bad)
        warnings = [f"hit q={h.q} is not a convergent" for h in bad]
    return {"count": len(hits)}, {"hits": Table.named("hits", rows)}, warnings, failed


def cmd_dirichlet(args, doc):
    prof = diophantine.dirichlet_profile(_point(args.x), _int_list(args.t))
    rows = list(zip(prof.t, prof.best, prof.delta, prof.running_inf))
    return {}, {"dirichlet": Table.named("dirichlet", rows)}, [], False


def cmd_wpsi_scan(args, doc):
    ifs = doc.build_ifs()
    table = diophantine.wpsi_scan(ifs, _psi(args), args.Q, args.points, _int_list(args.thresholds), seed=doc.seed)
    rows = list(zip(table.thresholds, table.fractions))
    return {"accuracy": table.accuracy, "n_points": args.points}, {"survival": Table.named("survival", rows)}, [], False


HANDLERS = {name: globals()["cmd_" + name.replace("-", "_")] for name in COMMANDS}


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--system", default="tri-overlap", help="built-in system when no --config is given")
    common.add_argument("--seed", type=int)
    common.add_argument("--depth", type=int, help="maximum construction depth")
    common.add_argument("--tol", help="tolerance as a rational, e.g. 1/1000")
    common.add_argument("--precision", type=int, metavar="BITS")
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--timing", action="store_true", help="record wall-clock time in the report")

    p = _Parser(prog="fibermeasure", description="Disintegration certificates for self-conformal measures.")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    cmds = {name: sub.add_parser(name, parents=[common]) for name in COMMANDS}

    for name in ("fiber-sample", "window", "ball-mass"):
        cmds[name].add_argument("--omega", help='subset indices "prefix;period"; sampled from --seed if absent')
    cmds["fiber-sample"].add_argument("--n", type=int, default=100)
    cmds["disintegration-check"].add_argument("--fibers", type=int, default=1000)
    cmds["disintegration-check"].add_argument("--points", type=int, default=10**6)
    cmds["disintegration-check"].add_argument("--cells", type=int, default=16)
    cmds["window"].add_argument("--x")
    cmds["window"].add_argument("--r")
    cmds["ball-mass"].add_argument("--x", required=True)
    cmds["ball-mass"].add_argument("--r", required=True)
    cmds["ball-mass"].add_argument("--depth-cap", type=int, default=analysis.DEFAULT_DEPTH_CAP)
    cmds["slab-decay"].add_argument("--eps", default="1/4,1/8,1/16,1/32,1/64,1/128,1/256")
    cmds["slab-decay"].add_argument("--trials", type=int, default=20)
    cmds["doubling"].add_argument("--trials", type=int, default=100)
    cmds["counterexample"].add_argument("--p0", default="2/5")
    cmds["counterexample"].add_argument("--n", default="4..16")
    for name in ("pv-condition", "psi-hits", "wpsi-scan"):
        cmds[name].add_argument("--tau", default="2")
        cmds[name].add_argument("--beta", default="0")
        cmds[name].add_argument("--scale", default="1")
    cmds["pv-condition"].add_argument("--alpha", required=True)
    cmds["pv-condition"].add_argument("--d", type=int, default=1)
    cmds["psi-hits"].add_argument("--x", required=True)
    cmds["psi-hits"].add_argument("--Q", type=int, default=10**4)
    cmds["dirichlet"].add_argument("--x", required=True)
    cmds["dirichlet"].add_argument("--t", default="10,100,1000,10000")
    cmds["wpsi-scan"].add_argument("--Q", type=int, default=10**4)
    cmds["wpsi-scan"].add_argument("--points", type=int, default=100)
    cmds["wpsi-scan"].add_argument("--thresholds", default="10,100,1000")
    return p


def run(command: str, args, doc: ConfigDocument) -> tuple:
    """Dispatch one command; returns (ReportRecord, failed)."""
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "format", "timing", "config", "command")}
    started = time.perf_counter()
    certs, tables, warnings, failed = HANDLERS[command](args, doc)
    elapsed = time.perf_counter() - started if args.timing else None
    rec = ReportRecord(command, digest(doc.as_dict(), command, flags), certs, tables, tuple(warnings), elapsed)
    return rec, failed


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        doc = _document(args)
        rec, failed = run(args.command, args, doc)
    except InputError as exc:
        print(f"fibermeasure: input error: {exc}", file=sys.stderr)
        return 1
    except CertificationError as exc:
        print(f"fibermeasure: certification failed: {exc}", file=sys.stderr)
        return 2
    text = rec.to_csv() if args.format == "csv" else rec.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if failed:
        print(f"fibermeasure: {args.command} check failed", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
