"""Command line interface: ``mwl analyze | simulate | convergence | skewbm | diagnose``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import lab
from .errors import MwlError
from .membrane import gamma_exact
from .model import WalkModel, closed_class_check, is_irreducible
from .skewbm import SkewBM, density, sample_by_excursion_flipping, sample_path, transition_cdf
from .walk import simulate, write_path_csv


def _load(path):
    with open(path) as fh:
        doc = json.load(fh)
    return doc if "model" in doc else {"model": doc}


def _dump(obj, out=None):
    text = json.dumps(lab._jsonable(obj), indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_analyze(args):
    doc = _load(args.config)
    model = WalkModel.from_json(doc["model"])
    analyzer = doc.get("experiment", {}).get("analyzer", {})
    chain = gamma_exact(model, eta_eps=args.eta_eps or analyzer.get("eta_eps", 1e-8),
                        tol=args.tol or analyzer.get("kernel_tol", 1e-12))
    _dump(chain.to_json(), args.out)
    return 0


def cmd_simulate(args):
    model = WalkModel.from_json(_load(args.config)["model"])
    record = "full" if args.csv else args.record
    path, ledger = simulate(model, args.steps, seed=args.seed, stream=args.stream, record=record)
    if args.csv:
        with open(args.csv, "w") as fh:
            write_path_csv(path, fh)
    out = {"seed": args.seed, "stream": args.stream, "final": path.final, **ledger.summary()}
    _dump(out, args.out)
    return 0


def cmd_convergence(args):
    config = lab.ExperimentConfig.from_json(_load(args.config))
    if args.out:
        config.output = args.out
    if args.checks:
        config.checks = args.checks
    if args.seed is not None:
        config.seed = args.seed
    report = lab.run_convergence(config)
    for c in report.criteria:
        status = "N/A " if not c.applicable else ("PASS" if c.passed else "FAIL")
        print(f"{status} {c.name}: value={c.value:.6g} target={c.target:.6g} tol={c.tolerance} {c.note}".rstrip())
    if config.output:
        print(f"report written to {config.output}")
    return 0 if report.passed else 1


def cmd_diagnose(args):
    doc = _load(args.config)
    model = WalkModel.from_json(doc["model"])
    strict = is_irreducible(model)
    closed = closed_class_check(model)
    out = {
        "irreducible": strict.ok,
        "irreducible_witness": strict.witness,
        "single_closed_class": closed.ok,
        "closed_class_witness": closed.witness,
        "search_band": strict.band,
        "sigma2": model.sigma2,
    }
    if closed.ok and "experiment" in doc:
        config = lab.ExperimentConfig.from_json(doc)
        chain = lab.analyze(config)
        out["gamma"] = chain.gamma
        out["diagnostics"] = lab.diagnostics_check(config, lab._gamma(config, chain))
    _dump(out, args.out)
    return 0 if closed.ok else 1


def cmd_skewbm(args):
    bm = SkewBM(args.beta, args.sigma)
    if args.sub == "density":
        print(json.dumps({"t": args.t, "x": args.x, "y": args.y, "density": density(bm, args.t, args.x, args.y)}))
    elif args.sub == "cdf":
        print(json.dumps({"t": args.t, "x": args.x, "y": args.y, "cdf": transition_cdf(bm, args.t, args.x, args.y)}))
    else:
        grid = np.asarray(args.grid, dtype=float)
        if grid[0] != 0.0:
            grid = np.concatenate([[0.0], grid])
        if args.method == "exact":
            paths = sample_path(bm, grid, args.seed, paths=args.paths)
        else:
            paths = sample_by_excursion_flipping(bm, args.n, grid, args.seed, paths=args.paths)
        out = sys.stdout if not args.out else open(args.out, "w")
        try:
            out.write("path_id,time,value\n")
            for i, row in enumerate(paths):
                for t, v in zip(grid, row):
                    out.write(f"{i},{t:.12g},{v:.12g}\n")
        finally:
            if args.out:
                out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mwl", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="exact embedded chain and gamma")
    a.add_argument("config")
    a.add_argument("--eta-eps", type=float)
    a.add_argument("--tol", type=float)
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="simulate one path and print its ledger summary")
    s.add_argument("config")
    s.add_argument("--steps", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--stream", type=int, default=0)
    s.add_argument("--record", choices=["summary", "cycles", "full"], default="summary")
    s.add_argument("--csv", help="write step,position rows to this file")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("convergence", help="run the convergence experiments")
    c.add_argument("config")
    c.add_argument("--out", help="output directory for report.json and statistics.csv")
    c.add_argument("--checks", nargs="+", choices=["marginal", "lln", "sign", "l_ratio", "nu", "diagnostics"])
    c.add_argument("--seed", type=int)
    c.set_defaults(func=cmd_convergence)

    d = sub.add_parser("diagnose", help="irreducibility and martingale diagnostics")
    d.add_argument("config")
    d.add_argument("--out")
    d.set_defaults(func=cmd_diagnose)

    k = sub.add_parser("skewbm", help="skew Brownian motion reference")
    k.add_argument("sub", choices=["density", "cdf", "sample"])
    k.add_argument("--beta", type=float, required=True)
    k.add_argument("--sigma", type=float, default=1.0)
    k.add_argument("--t", type=float, default=1.0)
    k.add_argument("--x", type=float, default=0.0)
    k.add_argument("--y", type=float, default=0.0)
    k.add_argument("--grid", type=float, nargs="+", default=[1.0])
    k.add_argument("--paths", type=int, default=1)
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--method", choices=["exact", "flip"], default="exact")
    k.add_argument("--n", type=int, default=10_000, help="walk scale for --method flip")
    k.add_argument("--out")
    k.set_defaults(func=cmd_skewbm)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (MwlError, OSError, KeyError) as exc:
        print(f"mwl: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
