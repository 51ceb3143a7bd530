"""Command line entry point: ``opcalc {verify,replay,shift,dilate,doi}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import campaign, circlefn, shift
from .calculus import Contraction, finite_dilation, power_residuals
from .doi import birman_solomyak_delta
from .linalg import load_matrix, save_matrix, schatten_norm, unitary_eig

log = logging.getLogger("opcalc")


def _verify(args) -> int:
    cfg = campaign.load_config(args.config) if args.config else campaign.CampaignConfig()
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.check:
        cfg.checks = list(args.check)
    if args.out:
        cfg.output_dir = args.out
    if args.trials is not None:
        cfg.trials = args.trials
    code = campaign.run_campaign(cfg, threads=args.threads)
    summary = json.loads((Path(cfg.output_dir) / "summary.json").read_text())
    for name, info in summary["checks"].items():
        if "failed" in info:
            status = "PASS" if info["failed"] == 0 else "FAIL"
            print(f"{status} {name}: {info['rows']} rows, min slack {info['min_slack']}")
        else:
            print(f"INFO {name}: {info['rows']} rows")
    for iid in summary["failures"]:
        print(f"failed instance {iid}; bundle in {Path(cfg.output_dir) / 'repro' / (iid + '.json')}")
    return code


def _replay(args) -> int:
    bundle = json.loads(Path(args.bundle).read_text())
    rows, dev = campaign.replay_bundle(bundle)
    for r in rows:
        print(f"{r['f_id']} p={r['p']} lhs={r['lhs']!r} rhs={r['rhs']!r} pass={r['pass']}")
    print(f"max relative deviation from recorded lhs/rhs: {dev:.3e}")
    return 0 if dev <= 1e-12 else 1


def _shift(args) -> int:
    T0 = Contraction.from_matrix(load_matrix(args.t0))
    T1 = Contraction.from_matrix(load_matrix(args.t1))
    X = load_matrix(args.x) if args.x else np.eye(T0.n)
    eta = shift.eta_recover(T0, T1, X, args.degree, route=args.route)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    shift.save(out / "eta.json", eta)
    re, im = shift.plot_data(eta)
    (out / "eta_re.dat").write_text(re)
    (out / "eta_im.dat").write_text(im)
    print(f"recovered {len(eta.coeffs)} coefficients; L1 norm on grid {eta.l1_norm():.6g}")
    return 0


def _dilate(args) -> int:
    T = Contraction.from_matrix(load_matrix(args.matrix))
    dil = finite_dilation(T, args.degree)
    res = power_residuals(T, dil)
    print(f"size {dil.u.shape[0]}, unitarity residual {dil.unitarity_residual:.3e}, "
          f"max power residual {res.max():.3e}")
    if T.renormalized:
        print("note: input norm exceeded 1 by roundoff and was rescaled")
    if args.out:
        save_matrix(args.out, dil.u)
    return 0 if dil.unitarity_residual <= 1e-10 and res.max() <= 1e-9 else 1


def _doi(args) -> int:
    U, V = load_matrix(args.u), load_matrix(args.v)
    f = circlefn.load(args.f) if args.f else campaign.function(args.zoo)
    delta = birman_solomyak_delta(f, U, V)
    exact = unitary_eig(U).apply(f) - unitary_eig(V).apply(f)
    resid = schatten_norm(delta - exact, 2)
    print(f"||delta - (f(U) - f(V))||_2 = {resid:.3e}")
    if args.out:
        save_matrix(args.out, delta)
    return 0 if resid <= 1e-9 else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="opcalc", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    v = sub.add_parser("verify", help="run a randomized verification campaign")
    v.add_argument("--config", help="JSON campaign config")
    v.add_argument("--seed", type=int)
    v.add_argument("--check", action="append", choices=campaign.CHECKS)
    v.add_argument("--out")
    v.add_argument("--trials", type=int)
    v.add_argument("--threads", type=int, help="defaults to $OPCALC_THREADS or 1")
    v.set_defaults(func=_verify)

    r = sub.add_parser("replay", help="re-evaluate a reproduction bundle")
    r.add_argument("bundle")
    r.set_defaults(func=_replay)

    s = sub.add_parser("shift", help="recover the spectral shift for a pair of contractions")
    s.add_argument("--t0", required=True)
    s.add_argument("--t1", required=True)
    s.add_argument("--x", help="weight matrix (default identity)")
    s.add_argument("-N", "--degree", type=int, default=32)
    s.add_argument("--route", choices=("direct", "dilation"), default="direct")
    s.add_argument("--out", default="shift-out")
    s.set_defaults(func=_shift)

    d = sub.add_parser("dilate", help="build and validate a finite unitary dilation")
    d.add_argument("matrix")
    d.add_argument("-N", "--degree", type=int, default=8)
    d.add_argument("--out")
    d.set_defaults(func=_dilate)

    o = sub.add_parser("doi", help="divided-difference double operator integral of U - V")
    o.add_argument("--u", required=True)
    o.add_argument("--v", required=True)
    g = o.add_mutually_exclusive_group(required=True)
    g.add_argument("--f", help="circle function JSON file")
    g.add_argument("--zoo", help="zoo function id, e.g. z^3 or abs_im_z@J32")
    o.add_argument("--out")
    o.set_defaults(func=_doi)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"opcalc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
