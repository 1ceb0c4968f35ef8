import numpy as np
import pytest

from droo.agent import AgentConfig, DrooAgent, run_episode, update_k
from droo.baselines import exhaustive_opt
from droo.channel import EpisodeSpec, make_topology, sample_frame
from droo.errors import DomainError
from droo.policy import TrainConfig
from droo.solver import solve_p2
from droo.system import ChannelFrame, SystemParams

P = SystemParams()


def test_update_k_rule():
    assert update_k([3, 5, 2], 10) == 6
    assert update_k([10, 4], 10) == 10
    assert update_k([1], 10) == 2
    with pytest.raises(DomainError):
        update_k([], 10)


def test_single_device_picks_the_better_mode():
    p1 = SystemParams(n=1, weights=[1.0])
    agent = DrooAgent(p1, AgentConfig(k=2), seed=0)
    gen = np.random.default_rng(0)
    for t in range(1, 30):
        h = np.array([gen.exponential() * 10 ** gen.uniform(-7, -4)])
        res = agent.step(ChannelFrame(t, h))
        assert sorted(res.candidates[:, 0].tolist()) == [0, 1]
        best = max(solve_p2(h, [0], p1).q, solve_p2(h, [1], p1).q)
        assert res.q == best


def test_all_zero_channel_picks_first_candidate():
    agent = DrooAgent(P, AgentConfig(), seed=1)
    res = agent.step(ChannelFrame(1, np.zeros(10)))
    assert res.q == 0.0
    assert res.k_star == 1
    assert np.all(res.candidate_q == 0)


def test_first_frame_accounting():
    agent = DrooAgent(P, AgentConfig(k=10), seed=2)
    topo = make_topology(10, 2, P)
    res = agent.step(sample_frame(topo, 1, 2))
    assert res.K_used == 10 == len(res.candidate_q)
    assert res.loss is None
    assert 1 <= res.k_star <= res.K_used
    assert res.q == res.candidate_q.max()
    assert res.q == res.candidate_q[res.k_star - 1]


def test_chosen_q_never_exceeds_exhaustive():
    topo = make_topology(10, 3, P)
    agent = DrooAgent(P, AgentConfig(k=10), seed=3)
    for t in range(1, 40):
        frame = sample_frame(topo, t, 3)
        res = agent.step(frame)
        assert res.q <= exhaustive_opt(frame.h, P)[1].q * (1 + 1e-12)
        assert res.alloc.a + res.alloc.tau.sum() <= 1 + 1e-9


def test_single_frame_episode_does_not_train():
    spec = EpisodeSpec(1, 5, make_topology(10, 5, P))
    out = run_episode(spec, P)
    assert len(out) == 1 and out[0].loss is None


def test_training_cadence():
    cfg = AgentConfig(k=10, train=TrainConfig(batch_size=16, train_interval=5, memory_size=64))
    out = run_episode(EpisodeSpec(40, 6, make_topology(10, 6, P)), P, cfg)
    trained = [r.t for r in out if r.loss is not None]
    assert trained == [20, 25, 30, 35, 40]


def test_adaptive_k_schedule():
    delta = 8
    cfg = AgentConfig(k_mode="adaptive", delta=delta)
    out = run_episode(EpisodeSpec(200, 7, make_topology(10, 7, P)), P, cfg)
    K = [r.K_used for r in out]
    assert K[:delta - 1] == [10] * (delta - 1)
    for t in range(delta, 201):
        window = [r.k_star for r in out[max(t - 1 - delta, 0) : t - 1]]
        if t % delta == 0:
            assert K[t - 1] == min(max(window) + 1, 10)
        else:
            assert K[t - 1] == K[t - 2]
    assert all(1 <= k <= 10 for k in K)


def test_never_updating_adaptive_equals_fixed_n():
    topo = make_topology(10, 8, P)
    fixed = run_episode(EpisodeSpec(60, 8, topo), P, AgentConfig(k=10))
    never = run_episode(EpisodeSpec(60, 8, topo), P, AgentConfig(k_mode="adaptive", delta=10**9))
    assert [r.k_star for r in fixed] == [r.k_star for r in never]
    assert [r.q for r in fixed] == [r.q for r in never]


def test_zero_gain_devices_are_stored_as_local():
    agent = DrooAgent(P, AgentConfig(k=11), seed=9)
    h = np.full(10, 5e-6)
    h[[2, 7]] = 0.0
    agent.step(ChannelFrame(1, h))
    _, x = agent.memory.contents()
    assert x[0, 2] == 0 and x[0, 7] == 0


def test_determinism_and_worker_invariance():
    topo = make_topology(10, 10, P)
    spec = EpisodeSpec(150, 10, topo)
    a = run_episode(spec, P, AgentConfig(k=10))
    b = run_episode(spec, P, AgentConfig(k=10))
    c = run_episode(spec, P, AgentConfig(k=10, workers=3))
    for x, y, z in zip(a, b, c):
        assert x.k_star == y.k_star == z.k_star
        np.testing.assert_array_equal(x.x_star, z.x_star)
        assert x.q == y.q == z.q
        assert x.loss == z.loss


def test_config_validation():
    with pytest.raises(DomainError):
        AgentConfig(k_mode="sometimes")
    with pytest.raises(DomainError):
        AgentConfig(quantizer="lsh")
    with pytest.raises(DomainError):
        DrooAgent(P, AgentConfig(k=12), seed=0)
    agent = DrooAgent(P, AgentConfig(), seed=0)
    with pytest.raises(DomainError):
        agent.step(ChannelFrame(1, np.ones(9) * 1e-6))
    with pytest.raises(DomainError):
        agent.set_params(SystemParams(n=4))
