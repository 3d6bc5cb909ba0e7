"""Short training runs of DQN, DRQN and Com-DDPG on a small cluster, then a
greedy evaluation on held-out jobs. Use the CLI for the full 200-episode runs."""

from dataclasses import replace

import numpy as np

from mecoffload.agents import HeuristicPolicy, LearnedPolicy, TrainConfig, make_agent, train
from mecoffload.environment import EnvConfig, local_dim, obs_dim
from mecoffload.simulator import ClusterConfig, run_policy
from mecoffload.workload import WorkloadConfig, generate_synthetic

cluster = ClusterConfig.build(3, 4, 1)
jobs = generate_synthetic(WorkloadConfig(n_jobs=120, n_mobile=3, seed=0))
train_jobs, test_jobs = jobs[:100], jobs[100:]
t0 = test_jobs[0].submit_time_ms
test_jobs = [replace(j, submit_time_ms=j.submit_time_ms - t0) for j in test_jobs]

n_act = cluster.n_mobile + cluster.m_edge + 1
tcfg = TrainConfig(episodes=20, hidden=32, brnn_hidden=16)
env_cfg = EnvConfig()

for kind in ("local", "edge_first"):
    report, _ = run_policy(HeuristicPolicy(kind), test_jobs, cluster)
    print(f"{kind:<10} median makespan {np.median(list(report.makespan_ms.values())):7.1f} ms, "
          f"energy {report.energy_j:7.2f} J")

for kind in ("dqn", "drqn", "comddpg"):
    agent = make_agent(kind, obs_dim(len(cluster.devices)), local_dim(n_act), n_act, tcfg)
    log = train(agent, cluster, train_jobs, tcfg, env_cfg)
    report, _ = run_policy(LearnedPolicy(agent, env_cfg, tcfg.window), test_jobs, cluster)
    print(f"{kind:<10} median makespan {np.median(list(report.makespan_ms.values())):7.1f} ms, "
          f"energy {report.energy_j:7.2f} J, smoothed TD loss {log[4].smoothed_loss:.3f} -> "
          f"{log[-1].smoothed_loss:.3f}")
