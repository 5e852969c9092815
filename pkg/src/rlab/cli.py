"""Command line interface: ``rlab <command> ...``.

Exit codes: 0 all checks pass, 2 a check failed, 3 inconclusive.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import io, plotting
from .bounds import SPLIT_THRESHOLD, split_margin
from .cones import splitting_hypotheses
from .constructions import ConstructionError, build, construction_names
from .decomposition import ConjoinedDecomposition, verify_conjoined, verify_suitable
from .experiments import DescentParams, ExperimentConfig, local_min_experiment, shortening_descent
from .metrics import MetricError, measure, ropelength, tube_thickness

OK, FAILED, INCONCLUSIVE = 0, 2, 3


def _out(path, out, tag: str, ext: str) -> Path:
    """``<dir>/<stem><tag><ext>`` next to ``path`` unless ``out`` (a stem) is
    given."""
    base = Path(out) if out else Path(path).with_name(Path(path).stem + tag)
    return base.with_name(base.name + ext)


def _status(checks) -> int:
    if any(c["status"] == "fail" for c in checks):
        return FAILED
    if any(c["status"] == "unknown" for c in checks):
        return INCONCLUSIVE
    return OK


def _print_checks(checks):
    for c in checks:
        extra = f"  ({c['detail']})" if c.get("detail") else ""
        print(f"[{c['status'].upper():7s}] {c['name']}{extra}")


def cmd_list(args) -> int:
    for name in construction_names():
        print(name)
    return OK


def cmd_build(args) -> int:
    link, conj = build(args.id)
    out = Path(args.out or f"{args.id.replace(':', '_').replace(',', '_').replace('=', '')}.json")
    io.save_json(link.to_dict(), out)
    print(f"link written to {out}")
    if conj is not None:
        dpath = out.with_name(out.stem + ".decomp.json")
        io.save_json(conj.to_dict(), dpath)
        print(f"decomposition written to {dpath}")
    if not args.no_figures:
        fig = plotting.plot_link(link, out.with_suffix(".png"), title=link.name)
        print(f"figure written to {fig}")
    print(f"ropelength {ropelength(link).mid:.10f}")
    return OK


def cmd_measure(args) -> int:
    link = io.load_link(args.link)
    rep = measure(link, tol=args.tol, seed=args.seed)
    io.save_json(rep, _out(args.link, args.out, ".measure", ".json"))
    io.write_rows(_out(args.link, args.out, ".measure", ".csv"), ["i", "j", "dist_lo", "dist_hi"],
                  [[p["i"], p["j"], p["dist"]["lo"], p["dist"]["hi"]] for p in rep["pairs"]])
    if not args.no_figures:
        plotting.plot_curvature(link, _out(args.link, args.out, ".measure", "_curvature.png"))
    print(io.dumps({k: v for k, v in rep.items() if k != "pairs"}))
    return OK


def verify_gordian(link, tol: float = 1e-7):
    checks = []
    tr = tube_thickness(link, tol)
    checks.append({"name": "thickness >= 1", "status": "pass" if tr.tau.lo >= 1 - 1e-6 else "fail",
                   "detail": f"tau in [{tr.tau.lo:.9f}, {tr.tau.hi:.9f}]"})
    checks.append({"name": "tube thickness >= 1", "status": "pass" if tr.tau_e.lo >= 1 - 1e-6 else "fail",
                   "detail": f"tau_e in [{tr.tau_e.lo:.9f}, {tr.tau_e.hi:.9f}], limited by {tr.limiting}"})
    rl = ropelength(link)
    m = split_margin(rl.hi)
    checks.append({"name": "ropelength below 8 pi + 6", "status": "pass" if rl.hi < SPLIT_THRESHOLD else "fail",
                   "detail": f"length {rl.mid:.7f}, margin {m.value:.7f} ({100 * m.inputs['relative']:.4f}%)"})
    hyp = splitting_hypotheses(link)
    st = "pass" if hyp["two_transverse"] else ("unknown" if not hyp["resolved"] else "fail")
    checks.append({"name": "two transverse disk intersections", "status": st,
                   "detail": f"{len(hyp['intersections'])} found"})
    if hyp["two_transverse"]:
        checks.append({"name": "split halves link the auxiliary circles",
                       "status": "pass" if hyp["halves_link"] else "fail",
                       "detail": f"linking {hyp['halves_linking']}"})
    return checks, {"ropelength": rl.to_dict(), "margin": m.to_dict(), "thickness": tr.to_dict(),
                    "hypotheses": hyp}


def cmd_verify(args) -> int:
    link = io.load_link(args.link)
    if args.what == "gordian":
        if len(link) != 4:
            print("a four-component link is required", file=sys.stderr)
            return FAILED
        checks, data = verify_gordian(link, args.tol)
    else:
        if not args.decomp:
            print("verify decomp needs a decomposition file", file=sys.stderr)
            return FAILED
        conj = ConjoinedDecomposition.from_dict(io.load_json(args.decomp))
        rc = verify_conjoined(link, conj)
        checks = [dict(c, name=f"conjoined: {c['name']}") for c in rc.checks]
        data = {"conjoined": rc.to_dict()}
        if rc.passed:
            rs = verify_suitable(link, conj)
            checks += [dict(c, name=f"suitable: {c['name']}") for c in rs.checks]
            data["suitable"] = rs.to_dict()
            print(f"suitability margin {rs.data['margin']:.6f}")
    _print_checks(checks)
    io.save_json({"checks": checks, **data}, _out(args.link, args.out, f".verify-{args.what}", ".json"))
    return _status(checks)


def cmd_perturb(args) -> int:
    cfg = ExperimentConfig.from_dict(io.load_json(args.config))
    rep = local_min_experiment(cfg)
    io.save_json(rep.to_dict(), _out(args.config, args.out, ".report", ".json"))
    io.write_rows(_out(args.config, args.out, ".report", ".csv"), ["trial", "length", "thickness", "sup_bound"],
                  [[i, L, t, b] for i, (L, t, b) in enumerate(zip(rep.lengths, rep.thickness, rep.sup_bounds))])
    if not args.no_figures and rep.lengths:
        plotting.plot_lengths(rep.lengths, rep.reference_length, _out(args.config, args.out, ".report", "_lengths.png"))
    below = [L for L in rep.lengths if L < rep.reference_length - 1e-6]
    ineq_bad = [x for x in rep.inequalities if not (x["inequality_holds"] and x["rhs_at_least_base"])]
    print(f"trials {len(rep.lengths)}, min length {rep.min_length:.9f}, reference {rep.reference_length:.9f}, "
          f"min thickness {min(rep.thickness, default=math.nan):.12f}")
    if rep.inequalities:
        print(f"perturbation inequality holds in {len(rep.inequalities) - len(ineq_bad)}/{len(rep.inequalities)} trials")
    if rep.failures:
        print(f"{len(rep.failures)} trials failed: {rep.failures[0]['error']}")
        return INCONCLUSIVE
    return FAILED if below or ineq_bad else OK


def cmd_descend(args) -> int:
    link = io.load_link(args.link)
    params = DescentParams(iterations=args.iters, step=args.step, settle=args.settle,
                           vertices_per_2pi=args.resolution)
    tr = shortening_descent(link, params)
    io.save_json(tr.to_dict(), _out(args.link, args.out, ".descent", ".json"))
    io.write_rows(_out(args.link, args.out, ".descent", ".csv"), ["iteration", "length", "step", "thickness"],
                  [[i, L, s, t] for i, (L, s, t) in enumerate(zip(tr.lengths, [math.nan] + tr.steps, tr.thickness))])
    if not args.no_figures:
        plotting.plot_descent(tr.lengths, _out(args.link, args.out, ".descent", ".png"), tr.settle)
    print(f"length {tr.lengths[0]:.9f} -> {tr.lengths[-1]:.9f}; relative decrease after settling "
          f"{tr.measured_decrease:.3e}; {'stalled' if tr.stalled else 'still decreasing'} ({tr.note})")
    return OK


def cmd_export(args) -> int:
    link = io.load_link(args.link)
    out = _out(args.link, args.out, "", "." + args.fmt)
    if args.fmt == "csv":
        io.export_csv(link, out, args.samples)
    else:
        io.export_obj(link, out, args.samples)
    print(f"written {out}")
    return OK


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rlab", description="Thick-link ropelength laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list", help="list named constructions")
    p.set_defaults(fn=cmd_list)

    p = sub.add_parser("build", help="build a named construction")
    p.add_argument("id")
    p.add_argument("--out")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(fn=cmd_build)

    p = sub.add_parser("measure", help="ropelength, thickness and linking report")
    p.add_argument("link")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(fn=cmd_measure)

    p = sub.add_parser("verify", help="verify a four-component split link or a decomposition")
    p.add_argument("what", choices=["gordian", "decomp"])
    p.add_argument("link")
    p.add_argument("decomp", nargs="?")
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("perturb", help="local-minimum perturbation experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(fn=cmd_perturb)

    p = sub.add_parser("descend", help="constrained shortening descent (empirical)")
    p.add_argument("link")
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--step", type=float, default=0.02)
    p.add_argument("--settle", type=int, default=100)
    p.add_argument("--resolution", type=int, default=64, help="vertices per 2 pi of length")
    p.add_argument("--out")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(fn=cmd_descend)

    p = sub.add_parser("export", help="sample a link to CSV or OBJ")
    p.add_argument("link")
    p.add_argument("--fmt", choices=["csv", "obj"], default="csv")
    p.add_argument("--samples", type=int, default=512)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_export)
    return ap


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConstructionError, MetricError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
