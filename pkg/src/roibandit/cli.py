"""Command-line entry point: ``roibandit {run,baseline,audit,sweep}``."""

from __future__ import annotations

import argparse
import logging
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from roibandit import analysis
from roibandit.baselines import (
    compute_alpha_adversarial,
    compute_alpha_stochastic,
    empirical_distribution,
    safe_policy_adversarial,
    safe_policy_stochastic,
    solve_lp,
)
from roibandit.config import ConfigError, ExperimentConfig, _replace, load_config
from roibandit.dual import make_rates
from roibandit.engine import FRAMEWORK, Trace, run_framework, run_second_price
from roibandit.storage import atomic_write, dumps, read_trace, write_json, write_jsonl, write_trace

log = logging.getLogger("roibandit")

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2
_BASELINES: dict[str, dict] = {}


def _configure_logging() -> None:
    level = os.environ.get("ROIBANDIT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


# ----------------------------------------------------------------------------
# building blocks shared by the subcommands


def baseline_for(cfg: ExperimentConfig, T: int | None = None) -> dict:
    """LP value, alpha and the policies the audits need, cached per config hash."""
    key = cfg.config_hash(T)
    if key in _BASELINES:
        return _BASELINES[key]
    model, rc, grid, cert = cfg.build(T)
    if model.kind == "stochastic":
        lp = solve_lp(model, grid, rc.rho)
        alpha, safe = safe_policy_stochastic(model, grid, rc.rho)
        out = {"adversarial": False, "lp": lp, "alpha": alpha, "alpha_stochastic": alpha, "safe_policy": safe}
    else:
        gbar = empirical_distribution(model)
        lp = solve_lp(gbar, grid, rc.rho)
        alpha, safe = safe_policy_adversarial(model, grid, rc.rho)
        out = {"adversarial": True, "lp": lp, "alpha": alpha, "alpha_adversarial": alpha,
               "alpha_stochastic": compute_alpha_stochastic(gbar, grid, rc.rho), "safe_policy": safe}
    out.update(model=model, run_config=rc, grid=grid, certificate=cert,
               alpha_budget_only=(compute_alpha_adversarial(model, grid, rc.rho, include_roi=False)
                                  if model.kind == "scripted"
                                  else compute_alpha_stochastic(model, grid, rc.rho, include_roi=False)))
    _BASELINES[key] = out
    return out


def baseline_record(base: dict) -> dict:
    rec = {"opt_value": base["lp"].value, "lp": base["lp"].as_record(), "alpha": base["alpha"],
           "alpha_stochastic": base["alpha_stochastic"], "alpha_budget_only": base["alpha_budget_only"],
           "adversarial": base["adversarial"], "bids": list(base["grid"].bids),
           "safe_policy": base["safe_policy"].probs.tolist()}
    if base["adversarial"]:
        rec["alpha_adversarial"] = base["alpha_adversarial"]
    cert = base["certificate"]
    if cert is not None:
        rec["certificate"] = {"k": cert.k, "safe_bid": cert.safe_bid, "alpha_block": cert.alpha,
                              "min_window_budget_margin": cert.min_window_budget_margin,
                              "min_window_roi_margin": cert.min_window_roi_margin}
    return rec


def rates_for(cfg: ExperimentConfig, rc, grid, model):
    if cfg.algorithm == FRAMEWORK:
        return make_rates(rc, grid.m, model.valuations.n)
    return make_rates(rc, 1, model.valuations.n, closed_form=True)


def execute(cfg: ExperimentConfig, seed: int, T: int | None = None) -> Trace:
    model, rc, grid, _ = cfg.build(T)
    if cfg.algorithm == FRAMEWORK:
        return run_framework(model, grid, rc, seed)
    return run_second_price(model, rc, seed)


def summary_record(cfg: ExperimentConfig, trace: Trace, seed: int, T: int | None = None) -> dict:
    base = baseline_for(cfg, T)
    rc, model, grid = base["run_config"], base["model"], base["grid"]
    s = analysis.summarize(trace, base["lp"], base["alpha"], rc, rates_for(cfg, rc, grid, model),
                           adversarial=base["adversarial"])
    rec = s.as_record()
    rec.update(seed=int(seed), config_hash=cfg.config_hash(T), algorithm=cfg.algorithm)
    rec.pop("extra")
    return rec


def _run_one(args) -> dict:
    cfg, seed, T, out_dir = args
    trace = execute(cfg, seed, T)
    write_trace(out_dir / f"trace_seed{seed}.csv", trace, cfg.config_hash(T), seed)
    rec = summary_record(cfg, trace, seed, T)
    write_json(out_dir / f"summary_seed{seed}.json", rec)
    return rec


def _map(jobs: int, fn, items):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _stats(values) -> dict:
    values = [float(v) for v in values]
    return {"mean": statistics.fmean(values), "stdev": statistics.stdev(values) if len(values) > 1 else 0.0}


def aggregate(records: list[dict]) -> dict:
    T = records[0]["T"]
    flags = {}
    for key in ("budget_ok", "mu_bound_ok", "roi_bound_ok", "regret_ok"):
        vals = [r[key] for r in records if r[key] is not None]
        flags[f"{key}_rate"] = sum(vals) / len(vals) if vals else None
    return {
        "T": T, "runs": len(records),
        "regret": _stats(r["regret"] for r in records),
        "regret_per_round": _stats(r["regret"] / T for r in records),
        "roi_violation": _stats(r["roi_violation"] for r in records),
        "roi_violation_per_round": _stats(r["roi_violation"] / T for r in records),
        "mu_max": _stats(r["mu_max"] for r in records),
        "spend": _stats(r["spend"] for r in records),
        "all_budget_ok": all(r["budget_ok"] for r in records),
        **flags,
    }


# ----------------------------------------------------------------------------
# audits


def _grid_index(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(grid, values)
    idx = np.clip(idx, 0, len(grid) - 1)
    if not np.all(np.abs(grid[idx] - values) <= 1e-12):
        raise ValueError("trace contains values that are not on the configured grid")
    return idx


def expected_hash(cfg: ExperimentConfig, T: int) -> str:
    if T != cfg.T and T not in cfg.sweep_T:
        raise ConfigError(f"trace has T={T}, which the config neither runs nor sweeps")
    return cfg.config_hash(T)


def run_audits(cfg: ExperimentConfig, trace: Trace) -> list[analysis.AuditResult]:
    T = trace.T
    base = baseline_for(cfg, T)
    rc, model, grid = base["run_config"], base["model"], base["grid"]
    rates = rates_for(cfg, rc, grid, model)
    alpha = base["alpha"]
    want = cfg.audits
    out: list[analysis.AuditResult] = []
    if trace.v_index is None:
        trace.v_index = _grid_index(trace.v, model.valuations.as_array())
    out.append(analysis.multiplier_range_audit(trace))
    if want["dual_replay"]:
        out.append(analysis.dual_replay_audit(trace, rates))
    if want["mu_growth"]:
        out.append(analysis.mu_growth_audit(trace.mu, trace.h, rates.eta_r))
    if want["budget_lemma"]:
        out.append(analysis.lemma_budget_audit(trace, rates))
    if want["mu_bound"]:
        out.append(analysis.mu_bound_audit(trace, alpha))
    if want["interval_regret"]:
        if cfg.algorithm == FRAMEWORK:
            x_index = trace.x_index if trace.x_index is not None else _grid_index(trace.x, grid.as_array())
            losses = analysis.counterfactual_losses(trace, model, grid)
            sampled = 200 if T > analysis.EXHAUSTIVE_MAX_T else None
            rep = analysis.interval_regret_audit(
                losses, x_index, trace.v_index, sampled=sampled,
                bound=analysis.exp3six_bound_fn(grid.m, T, rc.delta, model.valuations.n))
            out.append(analysis.AuditResult("interval_regret", not rep.exceeded, {
                "max_regret": rep.max_regret, "interval": rep.interval, "M_I": rep.M_I, "bound": rep.bound,
                "ratio": rep.ratio, "max_ratio": rep.max_ratio, "mode": "sampled" if sampled else "exhaustive"}))
        else:
            out.append(analysis.AuditResult("interval_regret", None, {"reason": "closed-form primal"}))
    if want["second_price_optimality"]:
        if cfg.algorithm == FRAMEWORK:
            out.append(analysis.AuditResult("second_price_optimality", None, {"reason": "learned primal"}))
        elif min(trace.tau - 1, T) > 2000:
            out.append(analysis.AuditResult("second_price_optimality", None, {"reason": "more than 2000 rounds"}))
        else:
            out.append(analysis.second_price_optimality_audit(trace, model))
    if want["safe_policy"] or want["optimal_policy"]:
        if alpha <= 0:
            for name in ("safe_policy", "optimal_policy"):
                if want[name]:
                    out.append(analysis.AuditResult(name, None, {"reason": "alpha = 0"}))
        else:
            fp, gp, hp = analysis.policy_gaps(base["safe_policy"], trace, model, grid)
            if want["safe_policy"]:
                rep = analysis.check_delta_safe(trace.lam, trace.mu, gp, hp, alpha, rc.delta)
                out.append(analysis.AuditResult("safe_policy", rep.holds,
                                                {"first_violation": rep.interval, "worst_slack": rep.worst_slack}))
            if want["optimal_policy"]:
                lp = base["lp"]
                if base["adversarial"]:
                    q = alpha / (1 + alpha)
                    pol = base["safe_policy"].mix(lp.policy, q)
                else:
                    q, pol = 1.0, lp.policy
                fo, go, ho = analysis.policy_gaps(pol, trace, model, grid)
                rep = analysis.check_optimal_policy(trace.lam, trace.mu, fo, go, ho, q, lp.value, rc.delta, alpha)
                out.append(analysis.AuditResult("optimal_policy", rep.holds,
                                                {"q": q, "first_violation": rep.interval, **rep.detail}))
    return out


# ----------------------------------------------------------------------------
# subcommands


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.out:
        cfg = _replace(cfg, out_dir=Path(args.out))
    if args.seed is not None:
        cfg = _replace(cfg, seeds=(args.seed,))
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    items = [(cfg, s, None, cfg.out_dir) for s in cfg.seeds]
    records = _map(args.jobs, _run_one, items)
    write_json(cfg.out_dir / "baseline.json", baseline_record(baseline_for(cfg)))
    agg = aggregate(records)
    write_json(cfg.out_dir / "aggregate.json", agg)
    print(dumps(agg), end="")
    if not agg["all_budget_ok"]:
        log.error("budget constraint violated in at least one run")
        return EXIT_FAIL
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg = _load(args)
    rec = baseline_record(baseline_for(cfg))
    rec["config_hash"] = cfg.config_hash()
    write_json(cfg.out_dir / "baseline.json", rec)
    print(dumps(rec), end="")
    return EXIT_OK


def cmd_audit(args) -> int:
    cfg = _load(args)
    trace, header = read_trace(args.trace)
    want = expected_hash(cfg, trace.T)
    if header["config_hash"] != want:
        raise ConfigError(f"trace config hash {header['config_hash'][:12]} does not match config {want[:12]}")
    results = run_audits(cfg, trace)
    rec = {"trace": str(args.trace), "config_hash": want, "checks": [r.as_record() for r in results],
           "all_passed": all(r.passed is not False for r in results)}
    if args.out:
        write_json(Path(args.out) / f"audit_{Path(args.trace).stem}.json", rec)
    print(dumps(rec), end="")
    return EXIT_OK if rec["all_passed"] else EXIT_FAIL


def cmd_sweep(args) -> int:
    cfg = _load(args)
    horizons = cfg.sweep_T or (cfg.T,)
    items = [(cfg, s, T, cfg.out_dir / f"T{T}") for T in horizons for s in cfg.seeds]
    records = _map(args.jobs, _run_one, items)
    write_jsonl(cfg.out_dir / "sweep.jsonl", records)
    rows = [aggregate([r for r in records if r["T"] == T]) for T in horizons]
    cols = ["T", "runs", "regret_mean", "regret_stdev", "regret_per_round_mean", "roi_violation_mean",
            "roi_violation_stdev", "roi_violation_per_round_mean", "mu_max_mean", "all_budget_ok",
            "mu_bound_ok_rate", "roi_bound_ok_rate", "regret_ok_rate"]
    lines = [",".join(cols)]
    for r in rows:
        flat = {"T": r["T"], "runs": r["runs"], "all_budget_ok": int(r["all_budget_ok"])}
        for k in ("regret", "regret_per_round", "roi_violation", "roi_violation_per_round", "mu_max"):
            flat[f"{k}_mean"] = r[k]["mean"]
            flat[f"{k}_stdev"] = r[k]["stdev"]
        for k in ("mu_bound_ok_rate", "roi_bound_ok_rate", "regret_ok_rate"):
            flat[k] = "" if r[k] is None else r[k]
        lines.append(",".join("%.17g" % v if isinstance(v, float) else str(v) for v in (flat[c] for c in cols)))
    atomic_write(cfg.out_dir / "sweep_aggregate.csv", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if all(r["all_budget_ok"] for r in rows) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roibandit", description="Budget- and ROI-constrained bidding simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, jobs=False):
        sp.add_argument("--config", required=True, help="TOML experiment config")
        sp.add_argument("--seed", type=_u64, default=None, help="run only this seed")
        sp.add_argument("--out", default=None, help="output directory (overrides output.dir)")
        if jobs:
            sp.add_argument("--jobs", type=int, default=1, help="worker processes")
        return sp

    common(sub.add_parser("run", help="simulate every seed and write traces and summaries"), True).set_defaults(fn=cmd_run)
    common(sub.add_parser("baseline", help="solve the offline LP and compute alpha")).set_defaults(fn=cmd_baseline)
    a = common(sub.add_parser("audit", help="check a trace against the bounds"))
    a.add_argument("trace", help="trace CSV written by 'run'")
    a.set_defaults(fn=cmd_audit, jobs=1)
    common(sub.add_parser("sweep", help="run every (T, seed) pair of the sweep section"), True).set_defaults(fn=cmd_sweep)
    return p


def _u64(s: str) -> int:
    v = int(s)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"roibandit: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
