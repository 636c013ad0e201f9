"""Command line: python -m hlgt {verify,sample,oracle,couple,predict,proptest}.

Shared flags (--config, --seed, --sweeps, --chains, --out, --experiment)
follow the subcommand.  HLGT_THREADS caps the worker threads.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import math
import sys
from typing import List, Optional

import numpy as np


def _shared() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="key = value file with one section per experiment")
    p.add_argument("--experiment", help="section of the config file to use")
    p.add_argument("--seed", type=int)
    p.add_argument("--sweeps", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--out", help="output file (stdout when omitted)")
    return p


def _config(args, default_experiment: str = "main_theorem", **extra):
    from .harness import load_config
    overrides = {"seed": args.seed, "sweeps": args.sweeps, "chains": args.chains, "out": args.out}
    overrides.update(extra)
    return load_config(args.config, args.experiment or default_experiment, overrides)


@contextlib.contextmanager
def _output(path: Optional[str], binary: bool = False):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def cmd_verify(args) -> int:
    if args.experiment:
        from .harness import report_json, run_experiment, write_report_csv
        cfg = _config(args)
        rows = run_experiment(cfg)
        with _output(args.out) as fh:
            if args.out and args.out.endswith(".csv"):
                write_report_csv(rows, fh)
            else:
                fh.write(report_json(rows, {"config": cfg.__dict__, "config_hash": cfg.config_hash()}) + "\n")
        return 0 if all(r.passed is not False for r in rows) else 1
    from .acceptance import BUDGETS, run_all
    only = [int(x) for x in args.only.split(",")] if args.only else None
    results = run_all(only, BUDGETS[args.budget])
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"schema": "hlgt.verify/1", "results": [
                {"number": r.number, "name": r.name, "passed": r.passed, "detail": r.detail,
                 "seconds": r.seconds} for r in results]}, fh, indent=2)
            fh.write("\n")
    return 0 if all(r.passed for r in results) else 1


def cmd_sample(args) -> int:
    from .gibbs import GaugeChain, load_checkpoint, save_checkpoint
    from .spinmodel import SpinChain, load_spin_checkpoint, save_spin_checkpoint
    if not args.out:
        raise SystemExit("sample needs --out for the checkpoint")
    cfg = _config(args)
    p = cfg.params()
    done = 0
    if p.beta_infinite:
        chain = SpinChain(p.box, p.n, p.kappa, cfg.seed, 0, cfg.spin_method)
        if args.resume:
            eta, kappa, seed, done = load_spin_checkpoint(args.resume)
            chain = SpinChain(eta.box, eta.n, kappa, seed, 0, cfg.spin_method)
            chain.eta = eta.vec.copy()
    else:
        initial = None
        seed = cfg.seed
        if args.resume:
            initial, p, seed, done = load_checkpoint(args.resume)
        chain = GaugeChain(p, seed, 0, cfg.method, initial=initial)
    for sweep in range(done, done + cfg.sweeps):
        chain.step(sweep)
    total = done + cfg.sweeps
    if p.beta_infinite:
        eta = chain.state().eta()
        save_spin_checkpoint(args.out, eta, p.kappa, chain.seed, total)
        sigma = chain.state().sigma()
    else:
        sigma = chain.state()
        save_checkpoint(args.out, sigma, p, chain.seed, total)
    if args.form_text:
        with open(args.form_text, "w") as fh:
            fh.write(sigma.to_text())
    edge_mean = float(np.cos(2 * np.pi * sigma.vec / p.n).mean())
    print(json.dumps({"schema": "hlgt.sample/1", "checkpoint": args.out, "sweeps": total, "seed": chain.seed,
                      "n": p.n, "N": p.box.N, "beta": None if math.isinf(p.beta) else p.beta,
                      "kappa": p.kappa, "edge_mean": edge_mean}, sort_keys=True))
    return 0


def _tiny_path(kind: str):
    from .acceptance import corner_path, single_edge
    from .cellcomplex import Chain
    return {"edge": single_edge, "corner": corner_path, "none": lambda: Chain(1)}[kind]()


def cmd_oracle(args) -> int:
    from .cellcomplex import Box
    from .gibbs import INFINITY, LineObservable, Params, exact_expectation
    from .spinmodel import _endpoints, exact_spin_expectation, two_point
    extent = [int(x) for x in args.extent.split(",")]
    box = Box.from_extent(*extent)
    beta = INFINITY if args.beta.lower() in ("inf", "infinity") else float(args.beta)
    p = Params(args.n, None, beta, args.kappa, box)
    gamma = _tiny_path(args.path)
    record = {"schema": "hlgt.oracle/1", "extent": extent, "edges": box.count(1), "n": args.n,
              "beta": args.beta, "kappa": args.kappa, "path": args.path}
    if gamma:
        record["L_gamma"] = exact_expectation(LineObservable(gamma, box, args.n), p, box)
        pts = _endpoints(gamma)
        record["H_kappa"] = exact_spin_expectation(two_point(box, args.n, pts), box, args.n, args.kappa) \
            if pts else 1.0
    with _output(args.out) as fh:
        fh.write(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_couple(args) -> int:
    from dataclasses import replace
    from .cellcomplex import edge
    from .couplings import LGTZ, ZZ, coupling_stream, event_indicators, write_event_log
    from .gibbs import INFINITY
    from .harness import straight_path
    cfg = _config(args, "cluster_events")
    p = cfg.params()
    box = p.box
    gamma = straight_path((-(cfg.l1 // 2), 0, 0, 0), 0, cfg.l1)
    e = box.index(edge((0, 0, 0, 0), 0))
    e0 = None
    if args.kind == ZZ:
        p = replace(p, beta=INFINITY)
        e0 = [box.index(edge((min(4, box.hi[0] - 1), 0, 0, 0), 0))]
    rows = [(cfg.seed, s.provenance[1], event_indicators(s, gamma, e))
            for s in coupling_stream(p, args.kind, cfg.sweeps, cfg.seed, e0, thinning=args.thinning,
                                     burnin=cfg.burnin)]
    with _output(args.out) as fh:
        write_event_log(rows, fh)
    return 0


def cmd_predict(args) -> int:
    from .theory import predict
    record = predict(args.beta, args.kappa, args.support, args.l1, args.l2, args.edge_corr, args.h)
    with _output(args.out) as fh:
        fh.write(json.dumps(record, indent=2, sort_keys=True, default=str) + "\n")
    return 0


def cmd_proptest(args) -> int:
    from .harness import run_property_suite
    scopes = args.scope or ["all"]
    with _output(args.out) as fh:
        return run_property_suite(scopes, args.seed or 0, fh)


def build_parser() -> argparse.ArgumentParser:
    shared = _shared()
    ap = argparse.ArgumentParser(prog="hlgt", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[shared], help="acceptance suite, or one experiment with --experiment")
    v.add_argument("--only", help="comma-separated criterion numbers")
    v.add_argument("--budget", default="desk", choices=("desk", "smoke"))
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sample", parents=[shared], help="run one chain and write a binary checkpoint")
    s.add_argument("--resume", help="checkpoint to continue from")
    s.add_argument("--form-text", help="also write the final edge configuration as form text")
    s.set_defaults(func=cmd_sample)

    o = sub.add_parser("oracle", parents=[shared], help="exact expectations on a tiny box")
    o.add_argument("--extent", default="1,1,1", help="box side lengths, e.g. 1,1,1")
    o.add_argument("--n", type=int, default=2)
    o.add_argument("--beta", default="0.5")
    o.add_argument("--kappa", type=float, default=0.5)
    o.add_argument("--path", default="corner", choices=("edge", "corner", "none"))
    o.set_defaults(func=cmd_oracle)

    c = sub.add_parser("couple", parents=[shared], help="coupling event log as CSV")
    c.add_argument("--kind", default="LGTZ", choices=("LGTZ", "ZZ"))
    c.add_argument("--thinning", type=int, default=10)
    c.set_defaults(func=cmd_couple)

    pr = sub.add_parser("predict", parents=[shared], help="Theta', constants and the error envelope as JSON")
    pr.add_argument("--beta", type=float, required=True)
    pr.add_argument("--kappa", type=float, required=True)
    pr.add_argument("--support", type=int, default=24)
    pr.add_argument("--l1", type=int, default=8)
    pr.add_argument("--l2", type=int, default=8)
    pr.add_argument("--edge-corr", type=float, default=0.0)
    pr.add_argument("--h", type=float, default=None, help="H_kappa(gamma) to form the prediction")
    pr.set_defaults(func=cmd_predict)

    pt = sub.add_parser("proptest", parents=[shared], help="randomized and exhaustive invariants")
    pt.add_argument("--scope", action="append", help="dec, forms, theory, couplings, vortices or all")
    pt.set_defaults(func=cmd_proptest)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return int(args.func(args) or 0)


if __name__ == "__main__":
    sys.exit(main())
