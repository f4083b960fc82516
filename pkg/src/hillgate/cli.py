"""Command line entry point: ``hillgate <command> [options]``.

Every command writes ``summary.json`` (a :class:`~hillgate.config.ResultRecord`)
and, where it produces samples, ``chain.csv`` or ``samples.csv`` into the
output directory, together with the resolved ``config.yaml``.  Errors map
to the exit codes of :mod:`hillgate.errors`.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import harris_oracle as ho
from .boundary_sampler import BoundaryMeasureSpec, sample_pi_batch, z_constants
from .chains import entry_subchain
from .config import ExperimentConfig, ResultRecord, parse_config, reference_config
from .errors import HillgateError, InsufficientDataError, UnsupportedOperationError, UsageError
from .estimators import (ams_probability, capacity_estimate, collect_excursions,
                         decomposed_hill, direct_transition_time, hill_statistic)
from .fields import PhasePoint
from .geometry import BoundarySide
from .integrator import RngStream, run_collect_chain

EXIT_CHECK_FAILED = 1


class ChecksFailed(HillgateError):
    exit_code = EXIT_CHECK_FAILED


def _threads(arg) -> int:
    if arg is not None:
        n = arg
    else:
        env = os.environ.get("HILLGATE_THREADS")
        try:
            n = int(env) if env else 1
        except ValueError:
            raise UsageError(f"HILLGATE_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise UsageError("--threads must be >= 1")
    return n


def _load(args) -> ExperimentConfig:
    cfg = parse_config(args.config) if args.config else reference_config()
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.out_dir is not None:
        over["output"] = {"dir": str(args.out_dir)}
    return cfg.replace(**over) if over else cfg


def _out(cfg: ExperimentConfig) -> Path:
    path = cfg.out_dir
    path.mkdir(parents=True, exist_ok=True)
    cfg.dump(path / "config.yaml")
    return path


def _write_rows(path: Path, header: list, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# format_version=1\n")
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _record(cmd: str, cfg: ExperimentConfig, t0: float, **kw) -> ResultRecord:
    return ResultRecord(cmd, cfg.config_hash(), cfg.seed, wall_time=time.perf_counter() - t0, **kw)


# ------------------------------------------------------------------ commands

def cmd_sample_boundary(args, cfg: ExperimentConfig, threads: int) -> ResultRecord:
    t0 = time.perf_counter()
    side = BoundarySide.GAMMA_PLUS if args.side == "plus" else BoundarySide.GAMMA_MINUS
    spec = BoundaryMeasureSpec(cfg.pair, cfg.field, cfg.thermo.beta, side)
    n = args.n or cfg.n_samples
    s = sample_pi_batch(spec, n, args.label, cfg.sampler_params, RngStream(cfg.seed).child(0))
    out = _out(cfg)
    s.to_csv(out / "samples.csv")
    extra = {"n": n, "side": side.value, "label": args.label,
             "fraction_A": float(np.mean(s.labels == 0)),
             "mean_abs_p_dot_n": float(np.mean(np.abs(s.pn)))}
    try:
        zp, zm = z_constants(spec)
        extra.update(z_plus=zp, z_minus=zm)
    except UnsupportedOperationError:
        pass
    return _record("sample-boundary", cfg, t0, extra=extra)


def cmd_simulate_direct(args, cfg: ExperimentConfig, threads: int) -> ResultRecord:
    t0 = time.perf_counter()
    sp = cfg.sim_params
    x0 = PhasePoint(cfg.pair.region_a.center.copy(), np.zeros(cfg.pair.dimension))
    chain = run_collect_chain(x0, cfg.field, cfg.pair, sp, RngStream(cfg.seed).child(0),
                              cfg.n_events, observable=cfg.observable)
    out = _out(cfg)
    chain.to_csv(out / "chain.csv")
    estimates = []
    try:
        estimates.append(direct_transition_time(chain).to_record())
        if cfg.observable is not None:
            estimates.append(direct_transition_time(chain, observable=True).to_record())
    except InsufficientDataError as exc:
        print(f"warning: {exc}", file=sys.stderr)
    entries = entry_subchain(chain)
    if len(entries) >= 2:
        estimates.extend(e.to_record() for e in capacity_estimate(entries))
    counters = {"gamma_zero": chain.meta["gamma_zero"], "steps": chain.meta["steps"],
                "events": len(chain), "entries": len(entries)}
    return _record("simulate-direct", cfg, t0, estimates=estimates, counters=counters,
                   extra={"final_time": float(chain.times[-1])})


def cmd_estimate_hill(args, cfg: ExperimentConfig, threads: int) -> ResultRecord:
    t0 = time.perf_counter()
    ex = collect_excursions(cfg.pair, cfg.field, cfg.sim_params, cfg.sampler_params,
                            RngStream(cfg.seed).child(0), cfg.n_samples,
                            observable=cfg.observable, threads=threads)
    out = _out(cfg)
    _write_rows(out / "samples.csv", ["index", "tau_return", "hit_B", "g_integral", "tau_exit"],
                ((i, ex.tau1[i], int(ex.hit_B[i]), ex.g_integral[i], ex.tau_exit[i])
                 for i in range(len(ex))))
    estimates = [hill_statistic(ex).to_record(), decomposed_hill(ex).to_record()]
    if cfg.observable is not None:
        estimates.append(hill_statistic(ex, "observable").to_record())
    return _record("estimate-hill", cfg, t0, estimates=estimates,
                   counters={"excursions": len(ex), "hits": int(ex.hit_B.sum())})


def cmd_estimate_ams(args, cfg: ExperimentConfig, threads: int) -> ResultRecord:
    t0 = time.perf_counter()
    est, paths = ams_probability(cfg.pair, cfg.field, cfg.sim_params, cfg.sampler_params,
                                 cfg.ams_params, RngStream(cfg.seed).child(0),
                                 observable=cfg.observable, threads=threads)
    out = _out(cfg)
    _write_rows(out / "samples.csv", ["index", "run", "duration", "g_integral"],
                ((i, int(paths.run_index[i]), paths.durations[i], paths.g_integrals[i])
                 for i in range(paths.durations.size)))
    estimates = [est.to_record()]
    if paths.durations.size and np.unique(paths.run_index).size > 1:
        estimates.append(paths.mean_duration().to_record())
    return _record("estimate-ams", cfg, t0, estimates=estimates,
                   counters={"reactive_paths": int(paths.durations.size),
                             "iterations": sum(est.meta["iterations"])})


def cmd_oracle(args, cfg: ExperimentConfig, threads: int) -> ResultRecord:
    t0 = time.perf_counter()
    gen = np.random.default_rng([cfg.seed, 0x0AC1E])
    chains = []
    if args.chain:
        fc = ho.FiniteChain.from_json(args.chain)
        chains.append((fc, gen.exponential(1.0, fc.n)))
    for _ in range(args.random):
        n = int(gen.integers(2, args.max_states + 1))
        fc = ho.random_chain(n, gen)
        chains.append((fc, gen.exponential(1.0, n)))
    if not chains:
        raise UsageError("nothing to check: give --random N and/or --chain FILE")
    rows, worst = [], {"hill": 0.0, "representation": 0.0, "trace_pair": 0.0}
    for i, (fc, g) in enumerate(chains):
        pi = ho.stationary(fc)
        lhs, rhs = ho.hill_lhs(fc, g), ho.hill_rhs(fc, pi, g)
        e_hill = abs(lhs - rhs) / (1 + abs(rhs))
        C = np.nonzero(gen.random(fc.n) < 0.5)[0]
        C = C if C.size else np.array([0])
        rl, rr = ho.representation_check(fc, pi, C, g)
        e_rep = abs(rl - rr) / (1 + abs(rr))
        e_tr = _trace_pair_error(fc)
        worst["hill"] = max(worst["hill"], e_hill)
        worst["representation"] = max(worst["representation"], e_rep)
        worst["trace_pair"] = max(worst["trace_pair"], e_tr)
        rows.append((i, fc.n, lhs, rhs, e_hill, e_rep, e_tr))
    out = _out(cfg)
    _write_rows(out / "samples.csv", ["index", "states", "hill_lhs", "hill_rhs", "hill_error",
                                      "representation_error", "trace_pair_error"], rows)
    passed = all(v <= 1e-10 for v in worst.values())
    rec = _record("oracle", cfg, t0, counters={"chains": len(chains)},
                  extra={"max_error": worst, "tolerance": 1e-10, "passed": passed})
    rec.write(out / "summary.json")
    print(f"oracle: {len(chains)} chains, max errors " +
          ", ".join(f"{k} {v:.2e}" for k, v in worst.items()) + (" PASS" if passed else " FAIL"))
    if not passed:
        raise ChecksFailed("finite-chain identities violated beyond 1e-10")
    return rec


def _trace_pair_error(fc: ho.FiniteChain) -> float:
    """Trace of the pair chain on B x A against the reactive entrance law of A."""
    pc, pairs = ho.pair_chain(fc)
    part = fc.partition
    C = [k for k, (i, j) in enumerate(pairs) if part[i] == 1 and part[j] == 0]
    tr = ho.trace_chain(pc, C)
    w = ho.stationary(tr).weights
    marg = np.zeros(fc.n)
    for k, idx in enumerate(C):
        marg[pairs[idx][1]] += w[k]
    return float(np.max(np.abs(marg - ho.reactive_distributions(fc)[0].weights)))


def cmd_validate(args, cfg: ExperimentConfig, threads: int) -> ResultRecord:
    from .validation import ValidationContext, run_all
    t0 = time.perf_counter()
    scale = 0.05 if args.quick else 1.0
    only = None if not args.only else {int(x) for x in args.only.split(",")}
    ctx = ValidationContext(cfg, scale=scale, threads=threads)
    results = run_all(ctx, only, report=lambda r: print(r.line(), flush=True))
    passed = all(r.passed for r in results)
    out = _out(cfg)
    rec = _record("validate", cfg, t0, extra={"quick": bool(args.quick), "scale": scale,
                                               "passed": passed,
                                               "checks": [r.to_record() for r in results]})
    rec.write(out / "summary.json")
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    if not passed:
        raise ChecksFailed("validation checks failed")
    return rec


COMMANDS = {
    "sample-boundary": cmd_sample_boundary,
    "simulate-direct": cmd_simulate_direct,
    "estimate-hill": cmd_estimate_hill,
    "estimate-ams": cmd_estimate_ams,
    "oracle": cmd_oracle,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML config (default: 1D reference double well)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, help="worker threads (env HILLGATE_THREADS)")
    common.add_argument("--out-dir", type=Path, help="override output.dir")

    p = argparse.ArgumentParser(prog="hillgate", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sb = sub.add_parser("sample-boundary", parents=[common], help="draw entrance/exit law samples")
    sb.add_argument("--side", choices=("minus", "plus"), default="minus")
    sb.add_argument("--label", choices=("A", "B"))
    sb.add_argument("-n", type=int, help="number of draws (default estimator.n_samples)")
    sub.add_parser("simulate-direct", parents=[common], help="one long trajectory, direct estimates")
    sub.add_parser("estimate-hill", parents=[common], help="Hill ratio from entrance-law excursions")
    sub.add_parser("estimate-ams", parents=[common], help="AMS estimate of the hit probability")
    orc = sub.add_parser("oracle", parents=[common], help="exact identities on finite chains")
    orc.add_argument("--random", type=int, default=100, help="number of random chains")
    orc.add_argument("--max-states", type=int, default=8)
    orc.add_argument("--chain", type=Path, help="JSON transition matrix to check as well")
    val = sub.add_parser("validate", parents=[common], help="run the consistency checks")
    val.add_argument("--quick", action="store_true", help="reduced sample sizes")
    val.add_argument("--only", help="comma-separated check numbers")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "max_states", 8) < 2:
            raise UsageError("--max-states must be >= 2")
        threads = _threads(args.threads)
        cfg = _load(args)
        rec = COMMANDS[args.command](args, cfg, threads)
        if args.command not in ("oracle", "validate"):
            rec.write(cfg.out_dir / "summary.json")
            print(rec.to_json())
    except HillgateError as exc:
        print(f"hillgate: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
