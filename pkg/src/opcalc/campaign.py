"""Randomized verification campaigns.

Every check is a pair ``sample(cfg, rng) -> instance`` and
``evaluate(instance) -> rows``. Instances carry everything ``evaluate``
needs, so a failing instance can be written out and replayed alone.
Trial ``i`` of check ``c`` draws from ``trial_rng(master_seed, index(c), i)``,
which makes reports independent of the thread count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import bounds, circlefn
from .calculus import Contraction
from .circlefn import CircleFunction
from .doi import birman_solomyak_delta, commutator_identity_check
from .generators import gen_contraction, gen_pair_with_gap, gen_psd_pair, gen_unitary, ginibre, trial_rng
from .linalg import INF, matrix_from_json, matrix_to_json, parse_order, schatten_norm, unitary_eig
from .shift import eta_recover, trace_formula_check

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CHECKS = ("series", "strict_pair", "sqrt_lip", "defect", "dilation_diff", "doi_exact",
          "hs_estimate", "trace_formula", "ratio", "blowup")
THEOREM_COLUMNS = ["instance_id", "p", "f_id", "lhs", "rhs", "constant_used", "slack", "pass"]
RATIO_COLUMNS = ["instance_id", "p", "f_id", "delta", "ratio", "mixed_ratio", "envelope",
                 "chain_envelope", "k_p"]
BLOWUP_COLUMNS = ["instance_id", "delta", "f_id", "p", "ratio", "diff_norm", "gap_norm"]

DEFAULT_FUNCTIONS = ("z^1", "z^2", "z^3", "z^-1", "z^-2", "z^5", "re_z", "im_z",
                     "rand_trig_4", "rand_trig_6", "abs_im_z@J16", "sawtooth@J16")
HARD_DIM_CAP = 64
HARD_DEGREE_CAP = 64


@dataclass
class CampaignConfig:
    master_seed: int = 20240601
    trials: int = 100
    dims: list = field(default_factory=lambda: [1, 2, 3, 4, 6])
    p_values: list = field(default_factory=lambda: [1, 1.25, 1.5, 2, 3, 5, "inf"])
    delta_floor: float = 0.05
    function_ids: list = field(default_factory=lambda: list(DEFAULT_FUNCTIONS))
    dilation_degree: int = 8
    checks: list = field(default_factory=lambda: list(CHECKS))
    output_dir: str = "opcalc-out"
    shift_degree: int = 32
    blowup_deltas: list = field(default_factory=lambda: [0.5, 0.2, 0.1, 0.05, 0.01, 0.001])
    blowup_function: str = "abs_im_z@J32"
    blowup_gap: float = 0.1
    dim_cap: int = 16

    def validate(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.dims or any(int(d) < 1 for d in self.dims):
            raise ValueError("dims must be a non-empty list of positive integers")
        if any(int(d) > min(self.dim_cap, HARD_DIM_CAP) for d in self.dims):
            raise ValueError(f"dims exceed the cap {min(self.dim_cap, HARD_DIM_CAP)}")
        if not 0.0 < self.delta_floor < 1.0:
            raise ValueError("delta_floor must lie in (0, 1)")
        for p in self.p_values:
            parse_order(p)
        unknown = [c for c in self.checks if c not in CHECKS]
        if unknown:
            raise ValueError(f"unknown checks: {unknown}")
        if not 1 <= self.dilation_degree <= HARD_DEGREE_CAP:
            raise ValueError("dilation_degree must lie in [1, 64]")
        if not 1 <= self.shift_degree <= HARD_DEGREE_CAP:
            raise ValueError("shift_degree must lie in [1, 64]")
        for fid in self.function_ids:
            f = function(fid)
            if not f.is_trig_poly:
                raise ValueError(f"{fid!r} is sampler-only; use a Jackson truncation like {fid}@J16")
        if any(not 0.0 < d < 1.0 for d in self.blowup_deltas):
            raise ValueError("blowup deltas must lie in (0, 1)")

    @classmethod
    def from_dict(cls, obj: dict) -> CampaignConfig:
        known = set(cls.__dataclass_fields__)
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**obj)


def load_config(path) -> CampaignConfig:
    return CampaignConfig.from_dict(json.loads(Path(path).read_text()))


@lru_cache(maxsize=None)
def function(fid: str) -> CircleFunction:
    return circlefn.resolve(fid)


def fmt_p(p) -> str:
    p = parse_order(p)
    return "inf" if p == INF else repr(p)


def instance_id(cfg_seed: int, check: str, trial: int) -> str:
    digest = hashlib.sha256(f"{cfg_seed}:{check}:{trial}".encode()).hexdigest()[:8]
    return f"{check}-{trial:05d}-{digest}"


def _row(iid, p, f_id, lhs, rhs, constant):
    rep = bounds.BoundReport(lhs, rhs, constant, p)
    return {"instance_id": iid, "p": fmt_p(p), "f_id": f_id, "lhs": float(lhs), "rhs": float(rhs),
            "constant_used": float(constant), "slack": rep.slack, "pass": rep.passed}


def _report_row(iid, f_id, rep: bounds.BoundReport):
    return _row(iid, rep.p, f_id, rep.lhs, rep.rhs, rep.constant_used)


def _residual_row(iid, f_id, residual, tol):
    # identity checks: lhs is the residual, rhs its allowed size
    return {"instance_id": iid, "p": "2.0", "f_id": f_id, "lhs": float(residual), "rhs": float(tol),
            "constant_used": 0.0, "slack": float(tol - residual), "pass": bool(residual <= tol)}


def _pick_dim(cfg, rng) -> int:
    return int(rng.choice(cfg.dims))


def _strict_norm(cfg, rng) -> float:
    return float(rng.uniform(0.0, math.sqrt(1.0 - cfg.delta_floor ** 2)))


# -- samplers and evaluators --------------------------------------------------


def _common(cfg) -> dict:
    return {"f_ids": list(cfg.function_ids), "p_values": [fmt_p(p) for p in cfg.p_values]}


def sample_series(cfg, rng):
    n = _pick_dim(cfg, rng)
    norms = [1.0 if rng.random() < 0.25 else float(rng.uniform()) for _ in range(2)]
    return {**_common(cfg), "T0": gen_contraction(rng, n, norms[0]).mat,
            "T1": gen_contraction(rng, n, norms[1]).mat}


def eval_series(inst, iid):
    T0, T1 = Contraction.from_matrix(inst["T0"]), Contraction.from_matrix(inst["T1"])
    return [_report_row(iid, fid, bounds.series_bound_check(function(fid), T0, T1, p))
            for fid in inst["f_ids"] for p in inst["p_values"]]


def sample_strict_pair(cfg, rng):
    n = _pick_dim(cfg, rng)
    return {**_common(cfg), "T0": gen_contraction(rng, n, float(rng.uniform(0, 0.9))).mat,
            "T1": gen_contraction(rng, n, float(rng.uniform(0, 0.9))).mat}


def eval_strict_pair(inst, iid):
    T0, T1 = Contraction.from_matrix(inst["T0"]), Contraction.from_matrix(inst["T1"])
    return [_report_row(iid, fid, bounds.strict_pair_check(function(fid), T0, T1, p))
            for fid in inst["f_ids"] for p in inst["p_values"]]


def sample_sqrt_lip(cfg, rng):
    n = _pick_dim(cfg, rng)
    delta = float(rng.uniform(max(cfg.delta_floor, 0.1), 0.9))
    A, B = gen_psd_pair(rng, n, delta)
    return {**_common(cfg), "A": A, "B": B, "delta": delta}


def eval_sqrt_lip(inst, iid):
    A, B, delta = inst["A"], inst["B"], inst["delta"]
    rows = [_report_row(iid, "-", bounds.sqrt_lipschitz_check(A, B, delta, p)) for p in inst["p_values"]]
    integral, _ = bounds.exp_integral_diff(A, B, delta)
    rows.append(_residual_row(iid, "quadrature", schatten_norm(integral - (A - B), INF), 1e-8))
    return rows


def _gapped(cfg, rng):
    n = _pick_dim(cfg, rng)
    p = parse_order(cfg.p_values[int(rng.integers(len(cfg.p_values)))])
    pair = gen_pair_with_gap(rng, n, _strict_norm(cfg, rng), float(rng.uniform(0.01, 1.0)), p)
    return pair.T0.mat, pair.T1.mat


def sample_defect(cfg, rng):
    T0, T1 = _gapped(cfg, rng)
    return {**_common(cfg), "T0": T0, "T1": T1}


def eval_defect(inst, iid):
    rows = []
    for p in inst["p_values"]:
        rd, rs = bounds.defect_diff_check(inst["T0"], inst["T1"], p)
        rows.append(_report_row(iid, "D", rd))
        rows.append(_report_row(iid, "D*", rs))
        for key, label in (("gram", "gram"), ("gram_star", "gram*")):
            lhs, rhs = rd.details[key]
            rows.append(_row(iid, p, label, lhs, rhs, 2.0))
    return rows


def sample_dilation_diff(cfg, rng):
    T0, T1 = _gapped(cfg, rng)
    return {**_common(cfg), "T0": T0, "T1": T1, "N": int(rng.integers(1, cfg.dilation_degree + 1))}


def eval_dilation_diff(inst, iid):
    rows = []
    for p in inst["p_values"]:
        rep = bounds.dilation_diff_check(inst["T0"], inst["T1"], inst["N"], p)
        rows.append(_report_row(iid, "u", rep))
        split = rep.details["shift_part"] + rep.details["defect_part"]
        rows.append(_row(iid, p, "split", rep.lhs, split, 1.0))
    return rows


def sample_unitary_triple(cfg, rng):
    n = _pick_dim(cfg, rng)
    return {**_common(cfg), "U": gen_unitary(rng, n), "V": gen_unitary(rng, n), "X": ginibre(rng, n)}


def eval_doi_exact(inst, iid):
    U, V, X = inst["U"], inst["V"], inst["X"]
    decomps = (unitary_eig(U), unitary_eig(V))
    xn = schatten_norm(X, 2)
    rows = []
    for fid in inst["f_ids"]:
        f = function(fid)
        exact = decomps[0].apply(f) - decomps[1].apply(f)
        bs = birman_solomyak_delta(f, U, V, decomps=decomps)
        rows.append(_residual_row(iid, f"bs:{fid}", schatten_norm(bs - exact, 2), 1e-9))
        comm = commutator_identity_check(f, U, V, X, decomps=decomps)
        rows.append(_residual_row(iid, f"comm:{fid}", comm, 1e-9 * (1 + xn)))
    return rows


def eval_hs_estimate(inst, iid):
    U, V = inst["U"], inst["V"]
    E, F = unitary_eig(U), unitary_eig(V)
    gap = schatten_norm(U - V, 2)
    rows = []
    for fid in inst["f_ids"]:
        f = function(fid)
        lhs = schatten_norm(E.apply(f) - F.apply(f), 2)
        lip = f.lip_chordal
        rows.append(_row(iid, 2, fid, lhs, lip * gap * (1 + 1e-8), lip))
    return rows


def sample_trace_formula(cfg, rng):
    n = _pick_dim(cfg, rng)
    return {**_common(cfg), "T0": gen_contraction(rng, n, float(rng.uniform())).mat,
            "T1": gen_contraction(rng, n, float(rng.uniform())).mat, "X": ginibre(rng, n),
            "N": int(cfg.shift_degree)}


def eval_trace_formula(inst, iid):
    T0, T1, X, N = inst["T0"], inst["T1"], inst["X"], inst["N"]
    eta = eta_recover(T0, T1, X, N)
    tol = 1e-9 * (1 + schatten_norm(X, 2))
    return [_residual_row(iid, fid, trace_formula_check(function(fid), T0, T1, X, eta), tol)
            for fid in inst["f_ids"] if function(fid).degree <= N]


def sample_ratio(cfg, rng):
    T0, T1 = _gapped(cfg, rng)
    return {**_common(cfg), "T0": T0, "T1": T1, "N": int(cfg.dilation_degree)}


def eval_ratio(inst, iid):
    """Ratio records (measurement) and the explicit p = 2 chain (theorem rows)."""
    T0, T1 = Contraction.from_matrix(inst["T0"]), Contraction.from_matrix(inst["T1"])
    ratios, chain = [], []
    for fid in inst["f_ids"]:
        f = function(fid)
        if f.lip_arc < 1e-12:
            continue
        N = max(inst["N"], 2 * f.degree + 2)
        for p in inst["p_values"]:
            rec = bounds.lipschitz_ratio(f, T0, T1, p, N, f_id=fid)
            chain_env = bounds.dilation_constant(T0.delta, 2) * f.lip_chordal / f.lip_arc
            ratios.append({"instance_id": iid, "p": fmt_p(p), "f_id": fid, "delta": rec.delta,
                           "ratio": rec.ratio, "mixed_ratio": rec.mixed_ratio,
                           "envelope": rec.envelope, "chain_envelope": chain_env, "k_p": rec.k_p})
        chain.append(_report_row(iid, fid, bounds.chain_check(f, T0, T1)))
    return {"ratio": ratios, "chain": chain}


def sample_blowup(cfg, rng):
    n = _pick_dim(cfg, rng)
    out = {"f_ids": [cfg.blowup_function], "deltas": list(cfg.blowup_deltas), "pairs": []}
    for delta in cfg.blowup_deltas:
        norm0 = math.sqrt(1.0 - delta * delta)
        pair = gen_pair_with_gap(rng, n, norm0, cfg.blowup_gap, 2)
        out["pairs"].append({"T0": pair.T0.mat, "T1": pair.T1.mat})
    return out


def eval_blowup(inst, iid):
    f = function(inst["f_ids"][0])
    rows = []
    for delta, pair in zip(inst["deltas"], inst["pairs"]):
        T0, T1 = pair["T0"], pair["T1"]
        if schatten_norm(T1 - T0, 2) < 1e-12:
            continue
        rec = bounds.lipschitz_ratio(f, T0, T1, 2, f_id=inst["f_ids"][0])
        rows.append({"instance_id": iid, "delta": float(delta), "f_id": rec.f_id, "p": "2.0",
                     "ratio": rec.ratio, "diff_norm": rec.diff_norm, "gap_norm": rec.gap_norm})
    return rows


REGISTRY = {
    "series": (sample_series, eval_series),
    "strict_pair": (sample_strict_pair, eval_strict_pair),
    "sqrt_lip": (sample_sqrt_lip, eval_sqrt_lip),
    "defect": (sample_defect, eval_defect),
    "dilation_diff": (sample_dilation_diff, eval_dilation_diff),
    "doi_exact": (sample_unitary_triple, eval_doi_exact),
    "hs_estimate": (sample_unitary_triple, eval_hs_estimate),
    "trace_formula": (sample_trace_formula, eval_trace_formula),
    "ratio": (sample_ratio, eval_ratio),
    "blowup": (sample_blowup, eval_blowup),
}


def run_trial(cfg: CampaignConfig, check: str, trial: int):
    sample, evaluate = REGISTRY[check]
    rng = trial_rng(cfg.master_seed, CHECKS.index(check), trial)
    inst = sample(cfg, rng)
    iid = instance_id(cfg.master_seed, check, trial)
    return iid, inst, evaluate(inst, iid)


# -- serialization --------------------------------------------------------------


def encode(obj):
    if isinstance(obj, np.ndarray):
        return {"__matrix__": matrix_to_json(obj)}
    if isinstance(obj, dict):
        return {k: encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def decode(obj):
    if isinstance(obj, dict):
        if "__matrix__" in obj:
            return matrix_from_json(obj["__matrix__"])
        return {k: decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [decode(v) for v in obj]
    return obj


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Path, columns, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r[c]) for c in columns])
    path.write_bytes(buf.getvalue().encode())


def make_bundle(cfg: CampaignConfig, check: str, iid: str, inst: dict, rows: list) -> dict:
    return {"schema_version": SCHEMA_VERSION, "check": check, "instance_id": iid,
            "config": asdict(cfg), "instance": encode(inst), "rows": rows}


def replay_bundle(bundle: dict) -> tuple[list, float]:
    """Re-evaluate a bundle; returns the fresh rows and the largest lhs/rhs deviation."""
    check = bundle["check"]
    inst = decode(bundle["instance"])
    rows = REGISTRY[check][1](inst, bundle["instance_id"])
    if isinstance(rows, dict):
        rows = rows["chain"]
    dev = 0.0
    for old, new in zip(bundle["rows"], rows):
        for key in ("lhs", "rhs"):
            a, b = float(old[key]), float(new[key])
            dev = max(dev, abs(a - b) / max(1.0, abs(a)))
    if len(bundle["rows"]) != len(rows):
        dev = math.inf
    return rows, dev


# -- runner -------------------------------------------------------------------


def _threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("OPCALC_THREADS", "1"))
    return max(1, threads)


def _max_by(rows, keyf, valf):
    out = {}
    for r in rows:
        k = keyf(r)
        v = valf(r)
        if k not in out or v > out[k]:
            out[k] = v
    return dict(sorted(out.items()))


def _f_class(fid: str) -> str:
    if "@J" in fid:
        return "jackson"
    return "monomial" if fid.startswith("z^") else "trig"


def run_campaign(cfg: CampaignConfig, threads: int | None = None) -> int:
    """Run the selected checks and write reports; exit code 0 iff no theorem row failed."""
    cfg.validate()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    nthreads = _threads(threads)
    summary = {"schema_version": SCHEMA_VERSION, "master_seed": cfg.master_seed,
               "trials": cfg.trials, "checks": {}}
    failures = []

    with ThreadPoolExecutor(max_workers=nthreads) as pool:
        for check in cfg.checks:
            results = list(pool.map(lambda i, c=check: run_trial(cfg, c, i), range(cfg.trials)))
            log.info("check %s: %d trials", check, len(results))
            if check == "ratio":
                ratio_rows = [r for _, _, res in results for r in res["ratio"]]
                chain_rows = [r for _, _, res in results for r in res["chain"]]
                write_csv(out / "ratio.csv", RATIO_COLUMNS, ratio_rows)
                write_csv(out / "chain.csv", THEOREM_COLUMNS, chain_rows)
                summary["checks"]["ratio"] = {
                    "rows": len(ratio_rows),
                    "max_ratio_by_p": _max_by(ratio_rows, lambda r: r["p"], lambda r: r["ratio"]),
                    "max_ratio_by_p_class": _max_by(
                        ratio_rows, lambda r: f"{r['p']}|{_f_class(r['f_id'])}", lambda r: r["ratio"]),
                    "max_mixed_ratio_by_p": _max_by(ratio_rows, lambda r: r["p"], lambda r: r["mixed_ratio"]),
                    "p2_envelope_exceeded": sum(1 for r in ratio_rows if r["p"] == "2.0"
                                                and r["ratio"] > r["chain_envelope"] * (1 + 1e-9)),
                }
                summary["checks"]["chain"] = _theorem_summary(chain_rows)
                failures += [("ratio", iid, inst, res["chain"])
                             for iid, inst, res in results if any(not r["pass"] for r in res["chain"])]
                continue
            rows = [r for _, _, res in results for r in res]
            if check == "blowup":
                write_csv(out / "blowup.csv", BLOWUP_COLUMNS, rows)
                table = _max_by(rows, lambda r: r["delta"], lambda r: r["ratio"])
                summary["checks"]["blowup"] = {
                    "rows": len(rows), "f_id": cfg.blowup_function,
                    "max_ratio_by_delta": {repr(k): v for k, v in sorted(table.items(), reverse=True)},
                }
                (out / "blowup.dat").write_text(
                    "".join(f"{d!r} {v!r}\n" for d, v in sorted(table.items(), reverse=True)))
                continue
            write_csv(out / f"{check}.csv", THEOREM_COLUMNS, rows)
            summary["checks"][check] = _theorem_summary(rows)
            failures += [(check, iid, inst, res)
                         for iid, inst, res in results if any(not r["pass"] for r in res)]

    summary["failures"] = sorted(iid for _, iid, _, _ in failures)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if failures:
        repro = out / "repro"
        repro.mkdir(exist_ok=True)
        for check, iid, inst, rows in failures:
            log.error("theorem check failed: %s", iid)
            (repro / f"{iid}.json").write_text(json.dumps(make_bundle(cfg, check, iid, inst, rows)))
        return 1
    return 0


def _theorem_summary(rows) -> dict:
    slacks = [r["slack"] for r in rows]
    return {"rows": len(rows), "failed": sum(1 for r in rows if not r["pass"]),
            "min_slack": min(slacks) if slacks else None}
