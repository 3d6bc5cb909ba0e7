"""Run the two heuristic policies on the desk cluster (5 mobiles, 10 edge
servers in 2 regions, 1 cloud) and compare the run metrics."""

import numpy as np

from mecoffload import metrics
from mecoffload.agents import HeuristicPolicy
from mecoffload.simulator import ClusterConfig, run_policy
from mecoffload.workload import WorkloadConfig, generate_synthetic

cluster = ClusterConfig.build(5, 10, 2)
jobs = generate_synthetic(WorkloadConfig(n_jobs=100, n_mobile=5, seed=7))

print(f"{'policy':<11} {'energy J':>9} {'latency ms':>11} {'LS':>8} {'NU':>10} {'median span':>12}")
for kind in ("local", "edge_first"):
    report, sim = run_policy(HeuristicPolicy(kind), jobs, cluster, seed=0)
    span = np.median(list(report.makespan_ms.values()))
    print(f"{kind:<11} {report.energy_j:9.2f} {report.avg_latency_ms:11.2f} {report.load_status:8.4f} "
          f"{report.network_usage:10.3g} {span:12.1f}")

    # where did the subtasks run?
    placed = dict(zip(report.device_ids, report.service_times.sum(axis=1)))
    busy = {d: int(n) for d, n in placed.items() if n}
    print("   placements:", busy)
    print(f"   placement entropy {metrics.placement_entropy(list(placed.values())):.3f} nats")
