"""Drive the experiment runner end to end on a small configuration and print
the report tables it writes."""

import sys
import tempfile
from pathlib import Path

from mecoffload import cli

CONFIG = """\
cluster: {n_mobile: 3, m_edge: 4, n_regions: 1}
workload: {test_jobs: 30, generator: {n_jobs: 90, n_mobile: 3}}
policies: [local, edge_first, dqn, comddpg]
train: {episodes: 6, hidden: 16, brnn_hidden: 8}
seeds: [0, 1]
"""

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp()) / "run"
out.mkdir(parents=True, exist_ok=True)
(out / "demo.yaml").write_text(CONFIG)
for cmd in ("train", "simulate", "report"):
    code = cli.main([cmd, "--config", str(out / "demo.yaml"), "--out", str(out)])
    assert code == cli.EXIT_OK, f"{cmd} exited with {code}"

for table in ("metrics", "makespan"):
    lines = (out / "report" / f"{table}.csv").read_text().splitlines()
    print(f"\n{table}.csv ({len(lines) - 1} rows)")
    for line in lines[:6]:
        print("  " + line[:110])
print(f"\nrun directory: {out}")
