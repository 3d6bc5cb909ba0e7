"""Experiment configuration: a YAML document with five sections.

.. code-block:: yaml

    cluster:   {n_mobile: 5, m_edge: 10, n_regions: 2, step_ms: 1.0,
                cross_region_gain: 0.1, load_weights: [0.7, 0.3], comparison: null}
    workload:  {trace: null, test_jobs: 100, generator: {n_jobs: 600, ...}}
    policies:  [local, edge_first, dqn, drqn, comddpg]
    train:     {episodes: 200, batch: 16, lr: 0.005, discount: 0.9, ...}
    reward:    {alpha: 0.3, beta: 0.5, gamma: 0.2}
    env:       {max_pending: 32, ...}
    out: runs/desk
    seeds: [0, 1, 2, 3, 4]

Unknown keys are errors. Missing keys take the defaults shown by
``ExperimentConfig().to_dict()``. With a trace, the last ``test_jobs`` jobs (by
submit time) form the test set and the rest the training set; otherwise the
generator runs once per seed with ``generator.seed + seed``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .agents import POLICIES, TrainConfig
from .environment import EnvConfig
from .priority import comparison_matrix
from .simulator import ClusterConfig
from .workload import WorkloadConfig, generate_synthetic, load_trace


class ExperimentConfigError(ValueError):
    pass


@dataclass
class ClusterSpec:
    n_mobile: int = 5
    m_edge: int = 10
    n_regions: int = 2
    step_ms: float = 1.0
    cross_region_gain: float = 0.1
    load_weights: tuple = (0.7, 0.3)
    comparison: list | None = None

    def __post_init__(self):
        self.load_weights = tuple(self.load_weights)

    def build(self) -> ClusterConfig:
        kw = {}
        if self.comparison is not None:
            kw["comparison"] = comparison_matrix(self.comparison)
        cfg = ClusterConfig.build(self.n_mobile, self.m_edge, self.n_regions, step_ms=self.step_ms,
                                  cross_region_gain=self.cross_region_gain,
                                  load_weights=tuple(self.load_weights), **kw)
        cfg.validate()
        return cfg


def _desk_generator() -> dict:
    return asdict(WorkloadConfig(n_jobs=600, n_mobile=5))


@dataclass
class WorkloadSpec:
    trace: str | None = None
    test_jobs: int = 100
    generator: dict = field(default_factory=_desk_generator)

    def __post_init__(self):
        # ranges kept as lists so a YAML round trip compares equal
        self.generator = {k: list(v) if isinstance(v, tuple) else v for k, v in self.generator.items()}

    def generator_config(self, seed: int = 0) -> WorkloadConfig:
        g = dict(self.generator)
        for k in ("subtasks_per_job", "data_in_bits", "data_out_bits", "cpu_cycles",
                  "deadline_ms", "interarrival_ms", "cpu_req_cps", "mem_req_bytes"):
            if g.get(k) is not None:
                g[k] = tuple(g[k])
        wc = WorkloadConfig(**g)
        return replace(wc, seed=wc.seed + seed)

    def split(self, seed: int = 0):
        """(train jobs, test jobs) with test submit times rebased to start at zero."""
        if self.trace is not None:
            jobs = load_trace(self.trace)
        else:
            jobs = generate_synthetic(self.generator_config(seed))
        jobs = sorted(jobs, key=lambda j: (j.submit_time_ms, j.job_id))
        if self.test_jobs >= len(jobs):
            raise ExperimentConfigError(
                f"workload has {len(jobs)} jobs; need more than test_jobs={self.test_jobs}")
        train, test = jobs[:len(jobs) - self.test_jobs], jobs[len(jobs) - self.test_jobs:]
        return train, rebase(test)


def rebase(jobs):
    if not jobs:
        return []
    t0 = min(j.submit_time_ms for j in jobs)
    return [replace(j, submit_time_ms=j.submit_time_ms - t0) for j in jobs]


@dataclass
class ExperimentConfig:
    cluster: ClusterSpec = field(default_factory=ClusterSpec)
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    policies: list = field(default_factory=lambda: list(POLICIES))
    train: TrainConfig = field(default_factory=TrainConfig)
    reward: dict = field(default_factory=lambda: {"alpha": 0.3, "beta": 0.5, "gamma": 0.2})
    env: dict = field(default_factory=dict)
    out: str = "runs/desk"
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])

    # --- construction ---------------------------------------------------------
    @classmethod
    def from_dict(cls, doc: dict | None) -> "ExperimentConfig":
        doc = dict(doc or {})
        _check_keys("top level", doc, {f.name for f in fields(cls)})
        try:
            cfg = cls(
                cluster=_section(ClusterSpec, doc.pop("cluster", None), "cluster"),
                workload=_section(WorkloadSpec, doc.pop("workload", None), "workload"),
                train=_section(TrainConfig, doc.pop("train", None), "train"),
                **doc)
        except TypeError as e:
            raise ExperimentConfigError(str(e)) from None
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        p = Path(path)
        if not p.is_file():
            raise ExperimentConfigError(f"config file not found: {p}")
        try:
            doc = yaml.safe_load(p.read_text())
        except yaml.YAMLError as e:
            raise ExperimentConfigError(f"{p}: {e}") from None
        if doc is not None and not isinstance(doc, dict):
            raise ExperimentConfigError(f"{p}: top level must be a mapping")
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cluster"]["load_weights"] = list(self.cluster.load_weights)
        d["workload"]["generator"] = {k: list(v) if isinstance(v, tuple) else v
                                      for k, v in self.workload.generator.items()}
        return d

    def dump(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))

    # --- validation and derived objects -----------------------------------------
    def validate(self) -> None:
        try:
            self.cluster.build()
            self.env_config()
            self.train.validate()
            wc = self.workload.generator_config()
            wc.validate()
        except (ValueError, TypeError) as e:
            raise ExperimentConfigError(str(e)) from None
        if self.workload.generator_config().n_mobile != self.cluster.n_mobile and self.workload.trace is None:
            raise ExperimentConfigError("generator n_mobile must equal cluster n_mobile")
        if self.workload.trace is not None and not Path(self.workload.trace).is_file():
            raise ExperimentConfigError(f"trace file not found: {self.workload.trace}")
        if self.workload.test_jobs < 1:
            raise ExperimentConfigError("test_jobs must be positive")
        if not self.policies:
            raise ExperimentConfigError("at least one policy is required")
        bad = [p for p in self.policies if p not in POLICIES]
        if bad:
            raise ExperimentConfigError(f"unknown policies {bad}; choose from {list(POLICIES)}")
        if not self.seeds or not all(isinstance(s, int) and s >= 0 for s in self.seeds):
            raise ExperimentConfigError("seeds must be a nonempty list of non-negative integers")

    def env_config(self) -> EnvConfig:
        _check_keys("reward", self.reward, {"alpha", "beta", "gamma"})
        _check_keys("env", self.env, {f.name for f in fields(EnvConfig)} - {"alpha", "beta", "gamma"})
        cfg = EnvConfig(**self.reward, **self.env)
        cfg.validate()
        return cfg

    def train_config(self, seed: int) -> TrainConfig:
        return replace(self.train, seed=self.train.seed + seed)


def _check_keys(where: str, doc: dict, allowed: set) -> None:
    if not isinstance(doc, dict):
        raise ExperimentConfigError(f"{where}: expected a mapping")
    bad = set(doc) - set(allowed)
    if bad:
        raise ExperimentConfigError(f"{where}: unknown keys {sorted(bad)}")


def _section(cls, doc, name):
    if doc is None:
        return cls()
    _check_keys(name, doc, {f.name for f in fields(cls)})
    if cls is WorkloadSpec and "generator" in doc:
        _check_keys("workload.generator", doc["generator"], {f.name for f in fields(WorkloadConfig)})
        doc = {**doc, "generator": {**_desk_generator(), **doc["generator"]}}
    try:
        return cls(**doc)
    except TypeError as e:
        raise ExperimentConfigError(f"{name}: {e}") from None


def default_config_text() -> str:
    return yaml.safe_dump(ExperimentConfig().to_dict(), sort_keys=False)
