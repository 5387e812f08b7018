import numpy as np
import pytest

from app.core.errors import ConfigurationError, InvalidActionError, SlicingError
from app.domain.models import (
    Allocation,
    ChannelConfig,
    IntervalStats,
    RewardWeights,
    SliceCounters,
    SlotConfig,
)
from app.domain.slices import ConstantInterArrival, ConstantPacketSize, IdleInterArrival, SliceSpec
from app.services.action_space import make_grid
from app.services.slicing_env import SlicingEnv, compute_qoe, compute_reward, compute_se
from app.services.traffic import default_scenario


def _single_packet_env(inter_arrival=None, **kwargs):
    spec = SliceSpec(
        name="volte",
        user_count=1,
        inter_arrival=inter_arrival or ConstantInterArrival(period_ms=1000),
        packet_size=ConstantPacketSize(bytes=40),
        sla_rate_bps=51e3,
        sla_latency_ms=10,
    )
    return SlicingEnv(
        [spec],
        make_grid(1, 1, 1),
        RewardWeights(),
        channel=ChannelConfig(fixed_gain=1.0),
        **kwargs,
    )


def test_compute_se_divides_by_band_and_interval():
    stats = IntervalStats(slices={"a": SliceCounters(delivered_bits=6e5), "b": SliceCounters(delivered_bits=4e5)})
    assert compute_se(stats, 1e6, 1.0) == pytest.approx(1.0)
    assert compute_se(stats, 1e6, 0.5) == pytest.approx(2.0)


def test_compute_qoe_weights_slices_by_arrivals():
    stats = IntervalStats(
        slices={
            "a": SliceCounters(arrived_packets=4, satisfied_packets=3),
            "b": SliceCounters(arrived_packets=0),
            "c": SliceCounters(arrived_packets=12, satisfied_packets=9),
        }
    )
    report = compute_qoe(stats)
    assert report.per_slice == {"a": 0.75, "b": 1.0, "c": 0.75}
    assert report.aggregate == pytest.approx(0.75)


def test_compute_qoe_without_arrivals_is_vacuously_satisfied():
    report = compute_qoe(IntervalStats.empty(["a", "b"]))
    assert report.aggregate == 1.0


def test_compute_reward_combines_weights():
    assert compute_reward(2.0, 0.5, RewardWeights(se_weight=0.01, qoe_weight=1)) == pytest.approx(0.52)
    assert compute_reward(2.0, 0.5, RewardWeights(se_weight=1, qoe_weight=0)) == pytest.approx(2.0)


def test_zero_traffic_reward_equals_qoe_weight():
    env = _single_packet_env(IdleInterArrival(), normalizers=[1.0])
    observation = env.reset(seed=0)
    result = env.step(Allocation(multipliers=(1,), resolution=1))
    assert observation.tolist() == [0.0]
    assert result.reward == pytest.approx(1.0)
    assert result.metrics.se == 0.0
    assert result.metrics.qoe == {"volte": 1.0}


def test_single_packet_step_matches_hand_computation():
    env = _single_packet_env()
    observation = env.reset(seed=0)
    result = env.step(Allocation(multipliers=(1,), resolution=1))

    assert observation.tolist() == [1.0]
    assert result.next_observation.tolist() == [1.0]
    assert result.metrics.se == pytest.approx(320 / 1e6)
    assert result.reward == pytest.approx(0.01 * 320 / 1e6 + 1.0)
    assert result.metrics.bandwidths == {"volte": 1.0}
    assert result.metrics.episode == 0


def test_reset_replays_identically_for_a_seed():
    def trajectory(seed):
        env = SlicingEnv(
            default_scenario(),
            make_grid(10, 0.2, 3),
            RewardWeights(),
            slot_config=SlotConfig(slots_per_interval=100),
        )
        first = env.reset(seed=seed)
        action = Allocation(multipliers=(16, 17, 17), resolution=0.2)
        rewards = [env.step(action).reward for _ in range(3)]
        return first, rewards

    first_a, rewards_a = trajectory(7)
    first_b, rewards_b = trajectory(7)
    np.testing.assert_array_equal(first_a, first_b)
    assert rewards_a == rewards_b


def test_step_rejects_off_lattice_actions():
    env = SlicingEnv(default_scenario(), make_grid(10, 0.2, 3), RewardWeights())
    with pytest.raises(InvalidActionError):
        env.step(Allocation(multipliers=(10, 20, 10), resolution=0.2))
    with pytest.raises(InvalidActionError):
        env.step(Allocation(multipliers=(1, 2, 2), resolution=2.0))


def test_step_before_reset_is_an_error():
    env = _single_packet_env()
    with pytest.raises(SlicingError):
        env.step(Allocation(multipliers=(1,), resolution=1))


def test_bytes_observation_uses_expected_bytes():
    env = _single_packet_env(demand_unit="bytes")
    assert env.normalizers.tolist() == [40.0]
    assert env.reset(seed=0).tolist() == [1.0]


def test_scenario_must_match_grid():
    with pytest.raises(ConfigurationError):
        SlicingEnv(default_scenario(), make_grid(10, 0.2, 2), RewardWeights())
    with pytest.raises(ConfigurationError):
        _single_packet_env(normalizers=[0.0])


def test_packet_finishing_after_the_interval_boundary_is_not_counted_twice():
    # arrivals at 0, 0.95, 1.9 ms; the 0.95 ms packet spills into the stepped interval
    spec = SliceSpec(
        name="volte",
        user_count=1,
        inter_arrival=ConstantInterArrival(period_ms=0.95),
        packet_size=ConstantPacketSize(bytes=40),
        sla_rate_bps=51e3,
        sla_latency_ms=10,
    )
    env = SlicingEnv(
        [spec],
        make_grid(4, 4, 1),
        RewardWeights(),
        slot_config=SlotConfig(slot_ms=0.5, slots_per_interval=2),
        channel=ChannelConfig(fixed_gain=1.0, mean_snr_db=0.0),
    )
    env.reset(seed=0)
    result = env.step(Allocation(multipliers=(1,), resolution=4))

    counters = result.metrics.stats.slices["volte"]
    assert (counters.arrived_packets, counters.delivered_packets, counters.satisfied_packets) == (1, 1, 1)
    assert counters.delivered_bits == pytest.approx(440.0)
    assert result.metrics.qoe_aggregate == pytest.approx(1.0)
    assert result.reward == pytest.approx(0.01 * 440.0 / 4e3 + 1.0)


def test_qoe_stays_in_unit_interval_under_load():
    env = SlicingEnv(
        default_scenario(),
        make_grid(10, 0.2, 3),
        RewardWeights(),
        slot_config=SlotConfig(slots_per_interval=100),
    )
    env.reset(seed=3)
    action = Allocation(multipliers=(16, 17, 17), resolution=0.2)
    for _ in range(40):
        metrics = env.step(action).metrics
        assert 0.0 <= metrics.qoe_aggregate <= 1.0
        for name, counters in metrics.stats.slices.items():
            assert 0.0 <= metrics.qoe[name] <= 1.0
            assert counters.satisfied_packets <= counters.delivered_packets <= counters.arrived_packets
