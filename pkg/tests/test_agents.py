import numpy as np
import pytest
from scipy import stats

from mecoffload.agents import (ComDDPGAgent, DQNAgent, DRQNAgent, DivergenceError, HeuristicPolicy,
                               LearnedPolicy, ReplayBuffer, TrainConfig, load_agent, make_agent,
                               policy_edge_first, policy_local, save_agent, train)
from mecoffload.environment import AgentView, MecEnv, local_dim, obs_dim
from mecoffload.simulator import run_policy
from mecoffload.workload import WorkloadConfig, generate_synthetic

SMALL = TrainConfig(episodes=3, batch=4, capacity=200, hidden=8, brnn_hidden=4, window=3, block_size=3)


def dims(cluster):
    n_act = cluster.n_mobile + cluster.m_edge + 1
    return obs_dim(len(cluster.devices)), local_dim(n_act), n_act


def small_jobs(n_mobile, n=12, seed=0):
    return generate_synthetic(WorkloadConfig(n_jobs=n, n_mobile=n_mobile, seed=seed))


def random_view(rng, n_agents, od, ld, n_act, window=3, mask=None):
    masks = (rng.random((n_agents, n_act)) < 0.5).astype(float) if mask is None else np.tile(mask, (n_agents, 1))
    masks[:, 0] = np.maximum(masks[:, 0], masks.sum(axis=1) == 0)
    return AgentView(window=tuple(rng.normal(size=od) for _ in range(window)),
                     local=rng.normal(size=(n_agents, ld)), masks=masks,
                     active=np.ones(n_agents, dtype=bool))


# --- heuristics ---------------------------------------------------------------------

def test_heuristic_choices():
    assert policy_local(np.array([1, 1, 1])) == 0
    assert policy_local(np.array([0, 1, 0])) == 1
    assert policy_local(np.zeros(3)) is None
    assert policy_edge_first(np.array([1, 1, 1, 1, 1]), 3) == 1
    assert policy_edge_first(np.array([1, 0, 0, 0, 1]), 3) == 4
    assert policy_edge_first(np.array([1, 0, 0, 0, 0]), 3) == 0
    assert policy_edge_first(np.zeros(5), 3) is None


def test_local_policy_transfers_nothing_when_local_fits(small_cluster):
    # sparse arrivals keep the own device free at every decision
    jobs = generate_synthetic(WorkloadConfig(n_jobs=100, n_mobile=2, seed=3, interarrival_ms=(200.0, 400.0)))
    seen = []

    class Spy(HeuristicPolicy):
        def act(self, sim, decisions):
            seen.extend(sim.valid_actions(tr)[0] for tr in decisions.values())
            return super().act(sim, decisions)
    report, _ = run_policy(Spy("local"), jobs, small_cluster, 0)
    assert seen and all(seen)
    assert report.total_bits == 0.0 and report.network_usage == 0.0


# --- replay and exploration -----------------------------------------------------------

def test_replay_sampling_uniform():
    buf = ReplayBuffer(100, seed=5)
    for i in range(100):
        buf.add(i)
    counts = np.zeros(100)
    for _ in range(10_000):
        for i in buf.sample(10):
            counts[i] += 1
    p = 0.1
    sigma = np.sqrt(10_000 * p * (1 - p))
    assert np.all(np.abs(counts - 1000) < 5 * sigma)


def test_replay_ring_and_underfull():
    buf = ReplayBuffer(3)
    for i in range(5):
        buf.add(i)
    assert sorted(buf.items) == [2, 3, 4]
    with pytest.raises(ValueError):
        buf.sample(4)


def test_full_exploration_is_uniform_over_valid():
    agent = DQNAgent(6, 4, 5, TrainConfig(hidden=4, seed=2))
    mask = np.array([1.0, 0, 1, 1, 0])
    view = AgentView((np.zeros(6),), np.zeros((1, 4)), mask[None], np.array([True]))
    picks = np.array([agent.act(view, 1.0)[0] for _ in range(3000)])
    assert set(picks) <= {0, 2, 3}
    counts = [np.sum(picks == a) for a in (0, 2, 3)]
    assert stats.chisquare(counts).pvalue > 1e-3


def test_greedy_follows_hand_set_values():
    agent = DQNAgent(6, 4, 5, TrainConfig(hidden=4))
    agent.params["q2.W"][...] = 0.0
    agent.params["q2.b"][...] = [0, 0, 3, 1, 0]
    rng = np.random.default_rng(0)
    for _ in range(50):
        view = random_view(rng, 3, 6, 4, 5)
        acts = agent.act(view, 0.0)
        for i, a in enumerate(acts):
            valid = view.masks[i]
            assert a == 2 if valid[2] else valid[a] == 1


def test_drqn_window_one_shapes():
    cfg = TrainConfig(hidden=6, window=1)
    dqn, drqn = DQNAgent(10, 4, 5, cfg), DRQNAgent(10, 4, 5, cfg)
    w = np.random.default_rng(0).normal(size=(2, 1, 10))
    local = np.zeros((2, 3, 4))
    assert dqn.q_values(dqn.params, w, local)[0].shape == drqn.q_values(drqn.params, w, local)[0].shape
    assert {k for k in drqn.params if k.startswith("q")} == set(dqn.params)


def test_encoder_starts_from_zero_state(monkeypatch):
    agent = DRQNAgent(10, 4, 5, TrainConfig(hidden=6, window=4))
    lstm = agent.encoder.lstm
    seen = []
    orig = lstm.forward

    def spy(xs, params=None, h0=None, c0=None):
        hs, c, cache = orig(xs, params, h0, c0)
        seen.append((h0, c0))
        return hs, c, cache
    monkeypatch.setattr(lstm, "forward", spy)
    agent.q_values(agent.params, np.ones((1, 4, 10)), np.zeros((1, 2, 4)))
    h0, c0 = seen[0]
    assert (h0 is None or not np.any(h0)) and (c0 is None or not np.any(c0))


# --- Com-DDPG -----------------------------------------------------------------------------

def test_single_agent_and_cross_agent_coupling():
    agent = ComDDPGAgent(8, 4, 5, TrainConfig(hidden=6, brnn_hidden=3))
    rng = np.random.default_rng(1)
    w, local = rng.normal(size=(1, 3, 8)), rng.normal(size=(1, 1, 4))
    masks = np.ones((1, 1, 5))
    s1, _, _ = agent.actor_forward(agent.actor, w, local, masks)
    s2, _, _ = agent.actor_forward(agent.actor, w, np.concatenate([local, rng.normal(size=(1, 2, 4))], 1),
                                   np.ones((1, 3, 5)))
    assert s1.shape == (1, 1, 5)
    assert not np.allclose(s1[0, 0], s2[0, 0])   # other agents do reach agent 0 when present


@pytest.mark.parametrize("cls", [DQNAgent, DRQNAgent, ComDDPGAgent])
def test_parameter_count_independent_of_agents(cls):
    agent = cls(12, 4, 6, TrainConfig(hidden=5, brnn_hidden=3, window=2))
    n0 = sum(v.size for v in agent.params.values())
    rng = np.random.default_rng(0)
    for n in (2, 8):
        acts = agent.act(random_view(rng, n, 12, 4, 6, window=2), 0.5)
        assert acts.shape == (n,)
    assert sum(v.size for v in agent.params.values()) == n0


@pytest.mark.parametrize("kind", ["dqn", "drqn", "comddpg"])
def test_training_never_emits_masked_action(kind, small_cluster):
    od, ld, na = dims(small_cluster)
    agent = make_agent(kind, od, ld, na, SMALL)
    orig = agent.act

    def checked(view, scale=0.0):
        acts = orig(view, scale)
        for i in np.flatnonzero(view.active):
            assert view.masks[i, acts[i]] == 1
        return acts
    agent.act = checked
    records = train(agent, small_cluster, small_jobs(2), SMALL)
    assert len(records) == SMALL.episodes
    assert all(r.updates > 0 for r in records[1:])
    report, _ = run_policy(LearnedPolicy(agent, window=SMALL.window), small_jobs(2, 6, 9), small_cluster, 0)
    assert report.makespan_ms


def test_soft_targets_stay_between_online_extremes(small_cluster):
    od, ld, na = dims(small_cluster)
    agent = ComDDPGAgent(od, ld, na, SMALL)
    lo = {k: v.copy() for k, v in agent.actor.items()}
    hi = {k: v.copy() for k, v in agent.actor.items()}
    orig = agent.update

    def tracked(batch):
        out = orig(batch)
        for k, v in agent.actor.items():
            np.minimum(lo[k], v, out=lo[k])
            np.maximum(hi[k], v, out=hi[k])
            t = agent.actor_target[k]
            assert np.all(t >= lo[k] - 1e-12) and np.all(t <= hi[k] + 1e-12)
        return out
    agent.update = tracked
    train(agent, small_cluster, small_jobs(2), SMALL)
    assert agent.updates > 0


def test_divergence_aborts(small_cluster):
    od, ld, na = dims(small_cluster)
    agent = make_agent("dqn", od, ld, na, SMALL)
    agent.update = lambda batch: (float("nan"), 0.0)
    with pytest.raises(DivergenceError):
        train(agent, small_cluster, small_jobs(2), SMALL)


def test_episode_zero_and_checkpoint_round_trip(tmp_path, small_cluster):
    od, ld, na = dims(small_cluster)
    for kind in ("dqn", "drqn", "comddpg"):
        agent = make_agent(kind, od, ld, na, SMALL)
        init = {k: v.copy() for k, v in agent.params.items()}
        assert train(agent, small_cluster, small_jobs(2), TrainConfig(**{**SMALL.to_dict(), "episodes": 0})) == []
        save_agent(tmp_path / f"{kind}.json", agent)
        back = load_agent(tmp_path / f"{kind}.json", SMALL)
        assert type(back) is type(agent)
        for k, v in init.items():
            np.testing.assert_array_equal(back.params[k], v)


def test_make_agent_rejects_unknown():
    with pytest.raises(ValueError):
        make_agent("ppo", 4, 4, 4)
    with pytest.raises(ValueError):
        TrainConfig(batch=20, capacity=10).validate()


def test_env_episode_drives_all_agents(small_cluster):
    env = MecEnv(small_cluster, window=3)
    view = env.reset(small_jobs(2, 3))
    assert view.local.shape[0] == small_cluster.n_mobile
    while not env.finished:
        acts = {i: 0 for i in np.flatnonzero(view.active)}
        view, _, _, _ = env.step(acts)
    assert len(env.sim.makespans()) == 3
