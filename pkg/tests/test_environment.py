import numpy as np
import pytest

from mecoffload.environment import (EnvConfig, IntervalMetrics, MecEnv, RewardModel, TASK_FIELDS,
                                    Transition, action_value_targets, decision_view, local_dim,
                                    max_valid, obs_dim, observe, reward)
from mecoffload.simulator import DeadlockError, Simulator, TaskRun, alg1_mask
from mecoffload.workload import WorkloadConfig, generate_synthetic

from conftest import make_job, make_sub


def test_empty_pending_set_is_all_padding(small_cluster):
    obs = observe(Simulator(small_cluster), EnvConfig())
    assert obs.tasks.shape == (32, len(TASK_FIELDS))
    assert not obs.tasks.any()


def test_one_pending_subtask_one_valid_row(small_cluster):
    sim = Simulator(small_cluster)
    sim.submit([make_job("j0", [make_sub("t", din=5e5)])])
    cfg = EnvConfig()
    obs = observe(sim, cfg)
    assert obs.tasks[:, 0].sum() == 1.0
    assert obs.tasks[0, TASK_FIELDS.index("data_in")] == pytest.approx(5e5 / cfg.bits_max)
    assert len(obs.vector()) == obs_dim(len(sim.devices))


def test_usage_matches_trace(small_cluster):
    sim = Simulator(small_cluster)
    sim.submit([make_job("j0", [make_sub("t", cycles=5e6, pinned=True)])])
    for _ in range(3):
        sim.step()
        np.testing.assert_array_equal(observe(sim, EnvConfig()).usage, sim.usage_arrays()[0][:, -1])


def test_alg1_equality_admits():
    np.testing.assert_array_equal(alg1_mask([2.0], [[1.0], [3.0], [2.0]]), [0, 1, 1])


def test_saturated_devices_defer(small_cluster):
    sim = Simulator(small_cluster)
    sim.submit([make_job("j0", [make_sub("big", cpu_req=1.5e9)]), make_job("j1", [make_sub("t")], origin="mobile-1")])
    # fill every device so the next subtask has an all-zero mask
    hog = make_job("h", [make_sub("x")])
    for dev in range(len(sim.devices)):
        sim.reserved[dev].append(TaskRun(sub=make_sub("x", job="h", cpu_req=sim.cap_cpu[dev]), job=hog,
                                         key=f"h/{dev}", agent=0, origin=0, preds_left=0))
    view = decision_view(sim, (), EnvConfig())
    assert not view.active.any()
    sim.apply_actions({})
    assert len(sim.queued()) == 2


def test_unplaceable_subtask_raises_instead_of_hanging(small_cluster):
    env = MecEnv(small_cluster)
    with pytest.raises(DeadlockError):
        env.reset([make_job("j0", [make_sub("t", cpu_req=1e15)])])


def test_pinned_task_mask_is_origin_only(small_cluster):
    sim = Simulator(small_cluster)
    job = make_job("j0", [make_sub("t", pinned=True)])
    tr = TaskRun(sub=job.subtasks[0], job=job, key="j0/t", agent=0, origin=0, preds_left=0)
    np.testing.assert_array_equal(sim.valid_actions(tr), [1] + [0] * (sim.n_actions - 1))


def brute_mask(sim, tr):
    out = []
    for dev in sim.action_devices(tr.agent):
        cpu_used = sum(r.sub.cpu_req for r in sim.reserved[dev])
        mem_used = sum(r.sub.mem_req for r in sim.reserved[dev])
        cpu_ok = tr.sub.cpu_req <= sim.cap_cpu[dev] - cpu_used
        mem_ok = tr.sub.mem_req <= sim.cap_mem[dev] - mem_used
        out.append(int(cpu_ok and mem_ok))
    return out


def test_masks_equal_exhaustive_comparison(desk_cluster):
    rng = np.random.default_rng(7)
    for trial in range(1000):
        sim = Simulator(desk_cluster)
        dummy = make_job("x", [make_sub("d")])
        for dev in range(len(sim.devices)):
            for k in range(int(rng.integers(0, 6))):
                sub = make_sub(f"r{k}", job="x", cpu_req=float(rng.uniform(0, 2e9)),
                               mem_req=float(rng.uniform(0, 4e9)))
                sim.reserved[dev].append(TaskRun(sub=sub, job=dummy, key=f"x/{dev}/{k}", agent=0,
                                                 origin=0, preds_left=0))
        sub = make_sub("t", cpu_req=float(rng.uniform(0, 3e9)), mem_req=float(rng.uniform(0, 5e9)))
        tr = TaskRun(sub=sub, job=dummy, key="x/t", agent=int(rng.integers(0, 5)), origin=0, preds_left=0)
        assert list(sim.valid_actions(tr)) == brute_mask(sim, tr)


def test_reward_hand_cases():
    assert reward(0, 0, 0, 0, 0.3, 0.5, 0.2) == 0.0
    assert reward(1.0, 0, 0, 0, 1.0, 0.0, 0.0) == -1.0
    assert reward(1.0, 0.5, 0.0, -0.5, 1 / 3, 1 / 3, 1 / 3) == pytest.approx(-1 / 3)
    with pytest.raises(ValueError):
        reward(0, 0, 0, 0, 0.5, 0.5, 0.5)


def test_targets():
    assert action_value_targets([1.0], [2.0], [True], 0.9)[0] == 1.0
    assert action_value_targets([1.0], [2.0], [False], 0.0)[0] == 1.0
    assert action_value_targets([1.0], [2.0], [False], 0.9)[0] == pytest.approx(2.8)
    np.testing.assert_array_equal(max_valid(np.array([[1.0, 5.0, 3.0]]), np.array([[1, 0, 1]])), [3.0])


def interval(energy, latency=1.0, ls=0.1):
    e = np.atleast_1d(np.asarray(energy, dtype=float))
    return IntervalMetrics(energy=e, latency_ms=np.full(e.shape, latency), tardiness=np.zeros(e.shape),
                           load_status=ls, total_energy=float(e.sum()), total_latency_ms=latency * e.size)


def test_reward_invariant_to_energy_units():
    rng = np.random.default_rng(1)
    stream = [interval(rng.uniform(0.1, 2.0, 3), rng.uniform(1, 5), rng.uniform(0, 1)) for _ in range(500)]
    joules, millijoules = RewardModel(1.0, 0.0, 0.0), RewardModel(1.0, 0.0, 0.0)
    for m in stream:
        joules(m)
        millijoules(IntervalMetrics(m.energy * 1e3, m.latency_ms, m.tardiness, m.load_status,
                                    m.total_energy * 1e3, m.total_latency_ms))
    candidates = rng.uniform(0.1, 2.0, 6)
    # score candidates without mutating the accumulators
    best_j = np.argmax([-joules.en_tot.z(c) for c in candidates])
    best_mj = np.argmax([-millijoules.en_tot.z(c * 1e3) for c in candidates])
    assert best_j == best_mj


def test_transition_agent_count_checked(small_cluster):
    env = MecEnv(small_cluster)
    v = env.reset([make_job("j0", [make_sub("t")])])
    with pytest.raises(ValueError):
        Transition(v, np.zeros(3), np.zeros(2), v, False)


def test_episode_runs_to_completion(desk_cluster):
    jobs = generate_synthetic(WorkloadConfig(n_jobs=10, seed=2))
    env = MecEnv(desk_cluster, window=4)
    view = env.reset(jobs)
    assert len(view.window) == 4 and view.local.shape == (5, local_dim(16))
    done, steps = False, 0
    while not done:
        acts = {i: int(np.flatnonzero(view.masks[i])[0]) for i in np.flatnonzero(view.active)}
        view, r, R, done = env.step(acts)
        assert r.shape == (5,) and np.all(np.isfinite(r)) and np.isfinite(R)
        steps += 1
    assert env.sim.done and steps > 0
    assert set(env.sim.makespans()) == {j.job_id for j in jobs}


def test_per_agent_energy_sums_to_mobile_attributed_total(desk_cluster):
    jobs = generate_synthetic(WorkloadConfig(n_jobs=10, seed=5))
    env = MecEnv(desk_cluster)
    view = env.reset(jobs)
    done = False
    while not done:
        acts = {i: int(np.flatnonzero(view.masks[i])[-1]) for i in np.flatnonzero(view.active)}
        view, r, R, done = env.step(acts)
    sim = env.sim
    mob = np.array(sim.mobiles)
    assert sim.agent_energy.sum() == pytest.approx(sim.energy_comp.sum() + sim.energy_tx[mob].sum(), rel=1e-9)
