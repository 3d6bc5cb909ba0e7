"""Generate a DAG workload, round-trip it through the JSON-lines trace format,
and rank one job's subtasks with the AHP priority model."""

import numpy as np

from mecoffload.priority import DEFAULT_COMPARISON, factor_weights, priorities, priority_order
from mecoffload.workload import WorkloadConfig, generate_synthetic, parse_trace, topological_order, dump_trace

jobs = generate_synthetic(WorkloadConfig(n_jobs=20, n_mobile=5, seed=1))
print(f"{len(jobs)} jobs, {sum(len(j.subtasks) for j in jobs)} subtasks")

# the trace format is lossless
text = dump_trace(jobs)
assert parse_trace(text) == jobs
print("first trace line:", text.splitlines()[0][:100], "...")

job = max(jobs, key=lambda j: len(j.subtasks))
print(f"\njob {job.job_id} from {job.origin_device}, topological order:", topological_order(job))

# factor weights: deadline, cpu cycles, data size
lam = factor_weights(DEFAULT_COMPARISON)
print("factor weights (deadline, cycles, data):", np.round(lam, 4))

pv = priorities(job.subtasks)
order = priority_order(pv, [job.submit_time_ms] * len(pv), [s.id for s in job.subtasks])
for i in order:
    s = job.subtasks[i]
    print(f"  {s.id:>4}  pv={pv[i]:.3f}  deadline={s.deadline_ms:6.1f} ms  cycles={s.cpu_cycles:.2e}")
