"""Command-line experiment runner.

Subcommands share ``--config``, ``--out``, ``--seeds`` and ``--trace``. Run layout::

    <out>/config.yaml                      effective configuration (defaults resolved)
    <out>/seed-<s>/test_jobs.jsonl         test workload (submit times rebased to 0)
    <out>/seed-<s>/<policy>/checkpoint.json, train_log.csv      (train)
    <out>/seed-<s>/<policy>/events.csv, metrics.csv             (simulate)
    <out>/report/{loss,makespan,service_times,metrics}.csv      (report)

Exit codes: 0 success, 2 configuration error, 3 training divergence, 4 gradient
check failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import metrics
from .agents import (HEURISTIC, LEARNED, DivergenceError, HeuristicPolicy, LearnedPolicy, load_agent,
                     log_to_csv, make_agent, save_agent, train)
from .config import ExperimentConfig, ExperimentConfigError
from .environment import local_dim, obs_dim
from .simulator import ConfigError, events_from_csv, events_to_csv, run_policy
from .workload import DagValidationError, TraceParseError, dump_trace, load_trace

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_GRADCHECK = 0, 2, 3, 4
CHECKPOINT_STEP = 10


class CliError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    doc = cfg.to_dict()
    if args.out is not None:
        doc["out"] = args.out
    if args.seeds is not None:
        try:
            doc["seeds"] = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError:
            raise ExperimentConfigError(f"--seeds expects integers like 0,1,2; got {args.seeds!r}") from None
    if args.trace is not None:
        doc["workload"]["trace"] = args.trace
    cfg = ExperimentConfig.from_dict(doc)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.dump(out / "config.yaml")
    return cfg


def _seed_dir(cfg, seed) -> Path:
    d = Path(cfg.out) / f"seed-{seed}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _dims(cluster):
    n_dev = len(cluster.devices)
    n_act = cluster.n_mobile + cluster.m_edge + 1
    return obs_dim(n_dev), n_act


# --- train -------------------------------------------------------------------------

def cmd_train(cfg: ExperimentConfig, log=print) -> None:
    learned = [p for p in cfg.policies if p in LEARNED]
    if not learned:
        raise ExperimentConfigError("train needs at least one learning policy "
                                    f"({', '.join(LEARNED)}) in the policy list")
    cluster = cfg.cluster.build()
    env_cfg = cfg.env_config()
    od, n_act = _dims(cluster)
    for seed in cfg.seeds:
        train_jobs, test_jobs = cfg.workload.split(seed)
        sdir = _seed_dir(cfg, seed)
        (sdir / "test_jobs.jsonl").write_text(dump_trace(test_jobs))
        for kind in learned:
            tcfg = cfg.train_config(seed)
            agent = make_agent(kind, od, local_dim(n_act), n_act, tcfg)
            try:
                records = train(agent, cluster, train_jobs, tcfg, env_cfg)
            except DivergenceError as e:
                raise CliError(EXIT_DIVERGED, f"seed {seed}, {kind}: {e}") from None
            pdir = sdir / kind
            pdir.mkdir(exist_ok=True)
            (pdir / "train_log.csv").write_text(log_to_csv(records))
            save_agent(pdir / "checkpoint.json", agent)
            last = records[-1].smoothed_loss if records else float("nan")
            log(f"seed {seed} {kind}: {len(records)} episodes, final smoothed loss {last:.4g}")


# --- simulate ------------------------------------------------------------------------

def _policy(kind, cfg, seed, sdir):
    if kind in HEURISTIC:
        return HeuristicPolicy(kind)
    ck = sdir / kind / "checkpoint.json"
    if not ck.is_file():
        raise ExperimentConfigError(f"no checkpoint for {kind} at {ck}; run 'train' first")
    tcfg = cfg.train_config(seed)
    return LearnedPolicy(load_agent(ck, tcfg), cfg.env_config(), tcfg.window)


def checkpoint_reports(events, jobs, profiles, step_ms, weights, step: int = CHECKPOINT_STEP):
    """One report per job-count checkpoint (step, 2*step, ..., all jobs), each over
    the window ending when the last of those jobs completes."""
    jobs = sorted(jobs, key=lambda j: (j.submit_time_ms, j.job_id))
    counts = list(range(step, len(jobs) + 1, step))
    if not counts or counts[-1] != len(jobs):
        counts.append(len(jobs))
    return [metrics.report_from_log(events, jobs[:k], profiles, step_ms, weights=weights)
            for k in counts]


def cmd_simulate(cfg: ExperimentConfig, log=print) -> None:
    cluster = cfg.cluster.build()
    for seed in cfg.seeds:
        sdir = _seed_dir(cfg, seed)
        _, test_jobs = cfg.workload.split(seed)
        (sdir / "test_jobs.jsonl").write_text(dump_trace(test_jobs))
        for kind in cfg.policies:
            policy = _policy(kind, cfg, seed, sdir)
            report, sim = run_policy(policy, test_jobs, cluster, seed)
            pdir = sdir / kind
            pdir.mkdir(exist_ok=True)
            (pdir / "events.csv").write_text(events_to_csv(sim.events))
            reps = checkpoint_reports(sim.events, test_jobs, sim.profiles(), cluster.step_ms,
                                      cluster.load_weights)
            (pdir / "metrics.csv").write_text(metrics.reports_to_csv(reps))
            ms = np.median(list(report.makespan_ms.values()))
            log(f"seed {seed} {kind}: energy {report.energy_j:.4g} J, median makespan {ms:.4g} ms, "
                f"LS {report.load_status:.4g}, NU {report.network_usage:.4g}")


# --- report ------------------------------------------------------------------------------

def _rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def cmd_report(cfg: ExperimentConfig, log=print) -> list[str]:
    """Recompute the summary tables from the persisted logs. Missing pieces are
    skipped and listed in ``warnings.txt``."""
    cluster = cfg.cluster.build()
    out = Path(cfg.out) / "report"
    out.mkdir(parents=True, exist_ok=True)
    warnings = []
    loss_rows, span_rows, st_rows, metric_rows = [], [], [], []
    profiles = {d.id: d.profile for d in cluster.devices}
    for seed in cfg.seeds:
        sdir = Path(cfg.out) / f"seed-{seed}"
        jobs_path = sdir / "test_jobs.jsonl"
        jobs = load_trace(jobs_path) if jobs_path.is_file() else None
        for kind in cfg.policies:
            pdir = sdir / kind
            if kind in LEARNED:
                lp = pdir / "train_log.csv"
                if lp.is_file():
                    for r in csv.DictReader(io.StringIO(lp.read_text())):
                        loss_rows.append([kind, seed, int(r["episode"]), float(r["loss"]),
                                          float(r["smoothed_loss"]), float(r["abs_td"]),
                                          float(r["mean_reward"])])
                else:
                    warnings.append(f"seed {seed} {kind}: no training log")
            ep = pdir / "events.csv"
            if jobs is None or not ep.is_file():
                warnings.append(f"seed {seed} {kind}: no simulation events")
                continue
            events = events_from_csv(ep.read_text())
            jobs_sorted = sorted(jobs, key=lambda j: (j.submit_time_ms, j.job_id))
            reps = checkpoint_reports(events, jobs_sorted, profiles, cluster.step_ms, cluster.load_weights)
            for rep in reps:
                row = rep.row()
                metric_rows.append([kind, seed, row["n_jobs"], *[float(row[c]) for c in metrics.REPORT_COLUMNS]])
            full = reps[-1]
            for b in range(0, len(jobs_sorted), CHECKPOINT_STEP):
                block = [full.makespan_ms[j.job_id] for j in jobs_sorted[b:b + CHECKPOINT_STEP]
                         if j.job_id in full.makespan_ms]
                if block:
                    q = np.percentile(block, [0, 25, 50, 75, 100])
                    span_rows.append([kind, seed, b // CHECKPOINT_STEP + 1, *map(float, q)])
            for i, dev in enumerate(full.device_ids):
                st_rows.append([kind, seed, dev, *full.service_times[i].tolist()])
    n_blocks = max((len(r) - 3 for r in st_rows), default=0)
    (out / "loss.csv").write_text(_rows_to_csv(
        ["policy", "seed", "episode", "loss", "smoothed_loss", "abs_td", "mean_reward"], loss_rows))
    (out / "makespan.csv").write_text(_rows_to_csv(
        ["policy", "seed", "block", "min", "q1", "median", "q3", "max"], span_rows))
    (out / "service_times.csv").write_text(_rows_to_csv(
        ["policy", "seed", "device", *[f"block_{b + 1}" for b in range(n_blocks)]], st_rows))
    (out / "metrics.csv").write_text(_rows_to_csv(
        ["policy", "seed", "n_jobs", *metrics.REPORT_COLUMNS], metric_rows))
    wpath = out / "warnings.txt"
    if warnings:
        wpath.write_text("\n".join(warnings) + "\n")
        for w in warnings:
            log(f"warning: {w}")
    elif wpath.exists():
        wpath.unlink()
    log(f"report written to {out}")
    return warnings


# --- gradcheck ---------------------------------------------------------------------------

def cmd_gradcheck(seed: int = 0, log=print) -> bool:
    from .nn.gradcheck import THRESHOLD, run_suite
    errors = run_suite(seed)
    log(f"{'layer':<12} max relative error")
    for name, err in errors.items():
        flag = "ok" if err < THRESHOLD else "FAIL"
        log(f"{name:<12} {err:.3e}  {flag}")
    return all(e < THRESHOLD for e in errors.values())


# --- entry point ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config (defaults used when omitted)")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--seeds", help="comma-separated seed list, e.g. 0,1,2")
    common.add_argument("--trace", help="JSON-lines workload trace (overrides the generator)")
    p = argparse.ArgumentParser(prog="mecoffload", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run policies on the test workload")
    sub.add_parser("train", parents=[common], help="train the learning policies")
    sub.add_parser("report", parents=[common], help="summary tables from a run directory")
    sub.add_parser("gradcheck", parents=[common], help="finite-difference check of all backward passes")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gradcheck":
            seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [0]
            ok = all(cmd_gradcheck(s) for s in seeds)
            return EXIT_OK if ok else EXIT_GRADCHECK
        cfg = _config(args)
        {"train": cmd_train, "simulate": cmd_simulate, "report": cmd_report}[args.command](cfg)
        return EXIT_OK
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (ExperimentConfigError, ConfigError, TraceParseError, DagValidationError, FileNotFoundError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
