"""Command-line front end: ``srscan {simulate,tune,run,select}``."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import io as sio
from .gram import GramCapError, precompute_marginals, standardize
from .model import ChainConfig, Dataset, Hyperparameters, ScanMode, ValidationError
from .sampler import SamplerError, run_chain
from .selection import khat_rule, median_model, selection_metrics
from .simulate import SimSpec, simulate, snr_pve
from .tuning import empirical_R, null_rho_bar, recommend_m, theoretical_signal_rho, visit_budget

SUMMARY_SCHEMA = "srscan.summary/1"
MANIFEST_SCHEMA = "srscan.manifest/1"

HYPER_FLAGS = ["lambda1", "a_kappa", "b_kappa", "a_sigma", "b_sigma",
               "alpha_a", "beta_a", "alpha_b", "beta_b", "sigma_prop"]
CONFIG_FLAGS = ["epsilon", "m", "n_iter", "burn_in", "thin", "k_target", "scan_mode",
                "seed", "standardize", "gram_cap"]

log = logging.getLogger("srscan")


class CLIError(Exception):
    pass


def _rho_block(text: str) -> float:
    v = float(text)
    if not 0.0 <= v < 1.0:
        raise argparse.ArgumentTypeError("rho must lie in [0, 1)")
    return v


def _epsilon(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("epsilon must lie in (0,1)")
    return v


def _scan_mode(text: str) -> str:
    return ScanMode(text.replace("-", "_")).value


# -- simulate ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    spec = SimSpec(n=args.n, p=args.p, rho_block=args.rho, block_size=args.block_size,
                   k_true=args.k, sigma2_true=args.sigma2, seed=args.seed)
    t0 = time.perf_counter()
    inst = simulate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = [f"x{j + 1}" for j in range(spec.p)]
    sio.write_matrix_csv(out / "X.csv", inst.X, names)
    sio.write_vector_csv(out / "y.csv", inst.y)
    sio.write_truth_csv(out / "truth.csv", inst.truth)
    snr, pve = snr_pve(spec)
    files = ["X.csv", "y.csv", "truth.csv"]
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "version": __version__,
        "command": "simulate",
        "spec": spec.__dict__,
        "jitter_used": inst.jitter_used,
        "snr": {"empirical": inst.snr, "closed_form": snr},
        "pve": {"empirical": inst.pve, "closed_form": pve},
        "dataset": {"n": spec.n, "p": spec.p, "sha256": sio.dataset_sha256(inst.X, inst.y)},
        "outputs": {f: sio.sha256_file(out / f) for f in files},
        "timing": {"wall_seconds": time.perf_counter() - t0},
    }
    sio.write_json(out / "manifest.json", manifest)
    print(f"wrote {spec.n}x{spec.p} design to {out} (PVE {inst.pve:.3f}, closed form {pve:.3f})")
    return 0


# -- tune --------------------------------------------------------------------

def cmd_tune(args) -> int:
    rho_signal = rho_null = None
    p = args.p
    if args.X is not None:
        if args.y is None:
            raise CLIError("--X requires --y")
        X, _ = sio.read_matrix_csv(args.X)
        data = Dataset(X, sio.read_vector_csv(args.y))
        if args.standardize:
            data = standardize(data)
        stats = precompute_marginals(data)
        p = data.p
        R = empirical_R(stats.rho, args.k0)
    elif args.R is not None:
        R = args.R
    elif args.rho_signal is not None and args.rho_null is not None:
        rho_signal, rho_null = args.rho_signal, args.rho_null
        R = rho_signal / rho_null
    elif args.rho_block is not None and args.n is not None:
        rho_signal, rho_null = theoretical_signal_rho(args.rho_block), null_rho_bar(args.n)
        R = rho_signal / rho_null
    else:
        raise CLIError("need one of: --X/--y, --R, --rho-signal with --rho-null, or --rho-block with --n")
    if p is None:
        raise CLIError("--p is required unless a dataset is given")

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        m_rec = recommend_m(p, args.epsilon, R, args.n_iter, args.visits)
    for w in caught:
        print(f"note: {w.message}", file=sys.stderr)
    m = args.m if args.m is not None else m_rec
    rep = visit_budget(p, args.epsilon, R, args.n_iter, m, rho_signal, rho_null)
    feasible = rep.expected_visits >= args.visits
    lines = []
    if rho_signal is not None:
        lines.append(f"rho_signal        {rho_signal:.4f}")
        lines.append(f"rho_null_bar      {rho_null:.4f}")
    lines += [
        f"R                 {R:.2f}",
        f"c                 {rep.c:.2f}",
        f"p                 {p}",
        f"n_iter            {args.n_iter}",
        f"m                 {m}",
        f"expected visits   {rep.expected_visits:.0f}",
        f"recommended m     {m_rec}",
        f"feasible          {'yes' if feasible else 'no'} (target {args.visits:g})",
    ]
    print("\n".join(lines))
    if args.out:
        payload = dict(rep.__dict__)
        payload.update(recommended_m=m_rec, visit_target=args.visits, feasible=feasible)
        sio.write_json(args.out, payload)
    return 0


# -- run ---------------------------------------------------------------------

def _load_config_file(path) -> dict:
    try:
        cfg = sio.read_json(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise CLIError(f"cannot read config {path}: {exc}") from exc
    flat = dict(cfg)
    flat.update(flat.pop("hyper", {}) or {})
    unknown = set(flat) - set(HYPER_FLAGS) - set(CONFIG_FLAGS)
    if unknown:
        raise CLIError(f"unknown config keys: {sorted(unknown)}")
    if "scan_mode" in flat:
        flat["scan_mode"] = _scan_mode(flat["scan_mode"])
    return flat


def config_from_args(args) -> ChainConfig:
    hyper = Hyperparameters(**{k: getattr(args, k) for k in HYPER_FLAGS})
    kw = {k: getattr(args, k) for k in CONFIG_FLAGS}
    return ChainConfig(hyper=hyper, **kw)


def _run_id(config: ChainConfig, data_hash: str, chain_id: int) -> str:
    blob = json.dumps({"config": config.to_dict(), "data": data_hash, "chain": chain_id}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _one_based(idx) -> list[int]:
    return [int(i) + 1 for i in idx]


def _replicate(job):
    config, data, truth, chain_id, log_every = job
    return run_chain(config, data, truth=truth, chain_id=chain_id, log_every=log_every)


def write_run_outputs(out: Path, res, names, run_id: str, trace: bool) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    s = res.summary
    sio.write_pip_csv(out / "pip.csv", s, names)
    summary = {
        "schema": SUMMARY_SCHEMA,
        "run_id": run_id,
        "manifest": "manifest.json",
        "chain_id": res.chain_id,
        "p": int(s.pip.size),
        "n_kept": s.n_kept,
        "k_hat": s.k_hat,
        "k_star": s.k_star,
        "t_hat": s.t_hat,
        "selected_khat": _one_based(s.selected),
        "selected_khat_names": [names[i] for i in s.selected],
        "selected_median": _one_based(s.median),
        "selected_median_names": [names[i] for i in s.median],
        "sigma2_mean": res.sigma2_mean,
        "counters": res.counters.as_dict(),
    }
    if res.metrics is not None:
        summary["metrics"] = res.metrics
    sio.write_json(out / "summary.json", summary)
    files = ["pip.csv", "summary.json"]
    if trace:
        sio.write_trace_csv(out / "trace.csv", res.trace)
        files.append("trace.csv")
    return files


def cmd_run(args) -> int:
    t0 = time.perf_counter()
    config = config_from_args(args)
    X, names = sio.read_matrix_csv(args.X)
    y = sio.read_vector_csv(args.y)
    data = Dataset(X, y, names)
    names = data.column_names()
    truth = sio.read_truth_csv(args.truth, data.p) if args.truth else None
    t_read = time.perf_counter() - t0
    data_hash = sio.dataset_sha256(data.X, data.y)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    reps = args.replicates
    jobs = [(config, data, truth, cid, args.log_every) for cid in range(reps)]
    if reps > 1 and args.workers > 1:
        with ProcessPoolExecutor(max_workers=min(args.workers, reps)) as pool:
            results = list(pool.map(_replicate, jobs))
    else:
        results = [_replicate(job) for job in jobs]

    outputs = {}
    run_ids = []
    for res in results:
        rid = _run_id(config, data_hash, res.chain_id)
        run_ids.append(rid)
        sub = out if reps == 1 else out / f"rep_{res.chain_id:03d}"
        for f in write_run_outputs(sub, res, names, rid, args.trace):
            rel = (sub / f).relative_to(out).as_posix()
            outputs[rel] = sio.sha256_file(sub / f)
    if reps > 1:
        agg = aggregate_replicates(results)
        sio.write_json(out / "aggregate.json", agg)
        outputs["aggregate.json"] = sio.sha256_file(out / "aggregate.json")

    manifest = {
        "schema": MANIFEST_SCHEMA,
        "version": __version__,
        "command": "run",
        "run_ids": run_ids,
        "config": config.to_dict(),
        "seed": config.seed,
        "chain_ids": list(range(reps)),
        "dataset": {"n": data.n, "p": data.p, "sha256": data_hash,
                    "X": str(args.X), "y": str(args.y),
                    "truth": str(args.truth) if args.truth else None},
        "timing": {"read_seconds": t_read,
                   "chains": [r.timing for r in results],
                   "wall_seconds": time.perf_counter() - t0},
        "outputs": outputs,
    }
    sio.write_json(out / "manifest.json", manifest)
    for res in results:
        s = res.summary
        print(f"chain {res.chain_id}: k_hat={s.k_hat:.2f} k*={s.k_star} "
              f"selected={[names[i] for i in s.selected]} sigma2={res.sigma2_mean:.4g}")
    return 0


def _mean_sd(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return float(v.mean()), sd


def aggregate_replicates(results) -> dict:
    agg = {"replicates": len(results),
           "k_hat": dict(zip(("mean", "sd"), _mean_sd([r.summary.k_hat for r in results])))}
    if all(r.metrics is not None for r in results):
        for rule in ("khat", "median"):
            agg[rule] = {
                key: dict(zip(("mean", "sd"), _mean_sd([r.metrics[rule][key] for r in results])))
                for key in ("tp", "fp", "fn", "sensitivity", "precision")
            }
    return agg


# -- select ------------------------------------------------------------------

def metrics_from_pip(pip: np.ndarray, truth) -> dict:
    _, _, _, sel = khat_rule(pip)
    return {"khat": selection_metrics(sel, truth), "median": selection_metrics(median_model(pip), truth)}


def format_metrics_table(per_rep: list[dict]) -> str:
    header = f"{'rule':<8}{'TP':>12}{'FP':>12}{'FN':>12}{'Sensitivity':>18}{'Precision':>18}"
    rows = [header]
    for rule, label in (("khat", "k-hat"), ("median", "median")):
        cells = []
        for key, fmt in (("tp", "{:.1f} ({:.1f})"), ("fp", "{:.1f} ({:.1f})"), ("fn", "{:.1f} ({:.1f})"),
                         ("sensitivity", "{:.3f} ({:.3f})"), ("precision", "{:.3f} ({:.3f})")):
            m, sd = _mean_sd([getattr(r[rule], key) for r in per_rep])
            cells.append(fmt.format(m, sd))
        rows.append(f"{label:<8}" + "".join(f"{c:>12}" for c in cells[:3]) + "".join(f"{c:>18}" for c in cells[3:]))
    return "\n".join(rows)


def cmd_select(args) -> int:
    if not args.truth or not Path(args.truth).exists():
        raise CLIError(f"truth file not found: {args.truth}")
    per_rep = []
    for path in args.pip:
        df = sio.read_pip_csv(path)
        truth = sio.read_truth_csv(args.truth, len(df))
        per_rep.append(metrics_from_pip(df["pip"].to_numpy(dtype=np.float64), truth))
    print(f"replicates: {len(per_rep)}")
    print(format_metrics_table(per_rep))
    if args.json:
        payload = [{rule: m[rule].__dict__ for rule in m} for m in per_rep]
        sio.write_json(args.json, payload)
    return 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="srscan", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate a block-correlated benchmark instance")
    sp.add_argument("--n", type=int, default=500)
    sp.add_argument("--p", type=int, default=10_000)
    sp.add_argument("--rho", type=_rho_block, default=0.3)
    sp.add_argument("--block-size", type=int, default=20)
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--sigma2", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    tp = sub.add_parser("tune", help="visit-budget calculator for epsilon, m and n_iter")
    tp.add_argument("--p", type=int)
    tp.add_argument("--epsilon", type=_epsilon, default=0.1)
    tp.add_argument("--n-iter", type=int, required=True)
    tp.add_argument("--m", type=int)
    tp.add_argument("--visits", type=float, default=1000.0)
    tp.add_argument("--R", type=float)
    tp.add_argument("--rho-signal", type=float)
    tp.add_argument("--rho-null", type=float)
    tp.add_argument("--rho-block", type=_rho_block)
    tp.add_argument("--n", type=int)
    tp.add_argument("--X")
    tp.add_argument("--y")
    tp.add_argument("--k0", type=int, default=20)
    tp.add_argument("--standardize", action="store_true")
    tp.add_argument("--out")
    tp.set_defaults(func=cmd_tune)

    rp = sub.add_parser("run", help="run the sampler on X.csv / y.csv")
    rp.add_argument("--X", required=True)
    rp.add_argument("--y", required=True)
    rp.add_argument("--truth")
    rp.add_argument("--out", required=True)
    rp.add_argument("--config", help="JSON file with config fields; flags take precedence")
    d = ChainConfig()
    rp.add_argument("--epsilon", type=_epsilon, default=d.epsilon)
    rp.add_argument("--m", type=int, default=d.m)
    rp.add_argument("--n-iter", type=int, default=d.n_iter)
    rp.add_argument("--burn-in", type=int, default=d.burn_in)
    rp.add_argument("--thin", type=int, default=d.thin)
    rp.add_argument("--k-target", type=int, default=d.k_target)
    rp.add_argument("--scan", dest="scan_mode", type=_scan_mode, default=d.scan_mode.value,
                    help="random-scan (default) or full-sweep")
    rp.add_argument("--seed", type=int, default=d.seed)
    rp.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=d.standardize)
    rp.add_argument("--gram-cap", type=int, default=d.gram_cap)
    for name in HYPER_FLAGS:
        rp.add_argument("--" + name.replace("_", "-"), type=float, default=getattr(d.hyper, name))
    rp.add_argument("--trace", action="store_true", help="also write trace.csv")
    rp.add_argument("--replicates", type=int, default=1)
    rp.add_argument("--workers", type=int, default=1)
    rp.add_argument("--log-every", type=int, default=0)
    rp.set_defaults(func=cmd_run)

    sl = sub.add_parser("select", help="selection metrics from pip.csv against truth.csv")
    sl.add_argument("--pip", nargs="+", required=True)
    sl.add_argument("--truth", required=True)
    sl.add_argument("--json")
    sl.set_defaults(func=cmd_select)
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run" and args.config:
        # config file values become defaults, explicit flags still win
        run_parser = parser._subparsers._group_actions[0].choices["run"]
        run_parser.set_defaults(**_load_config_file(args.config))
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except (CLIError, ValidationError, GramCapError, sio.InputError, SamplerError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
