import numpy as np
import pytest

from app.core.errors import InvalidActionError
from app.domain.models import ChannelConfig, SliceCounters, SlotConfig
from app.domain.slices import ConstantInterArrival, ConstantPacketSize, IdleInterArrival, SliceSpec
from app.services.action_space import make_grid
from app.services.baselines import equal_allocation
from app.services.link_sim import LinkSimulator, SliceQueues, instantaneous_rate
from app.services.slicing_env import compute_qoe
from app.services.traffic import Packet, default_scenario
from app.util.constants import STALL_QUEUE_LIMIT
from app.util.random_streams import RandomStreams


def _spec(period_ms, users=1, latency_ms=10.0, name="volte"):
    return SliceSpec(
        name=name,
        user_count=users,
        inter_arrival=ConstantInterArrival(period_ms=period_ms),
        packet_size=ConstantPacketSize(bytes=40),
        sla_rate_bps=51e3,
        sla_latency_ms=latency_ms,
    )


def _packet(bits, arrival=0.0):
    return Packet(arrival_time=arrival, size=bits, remaining=bits)


class RecordingTrace:
    def __init__(self):
        self.rows = []

    def record(self, **row):
        self.rows.append(row)


def test_instantaneous_rate_examples():
    assert instantaneous_rate(5e6, 100.0, 0.0) == 0.0
    assert instantaneous_rate(1e6, 1.0, 1.0) == pytest.approx(1e6)
    assert instantaneous_rate(2e5, 3.0, 1.0) == pytest.approx(4e5)


def test_schedule_slot_with_empty_queues_is_a_no_op():
    queues = SliceQueues(_spec(10.0, users=3), snr_linear=1.0)
    counters = SliceCounters()
    assert queues.schedule_slot(1e6, np.ones(3), 0.0, 0.5, counters) == (None, 0.0, 0.0)
    assert queues.cursor == -1
    assert counters.delivered_bits == 0.0


def test_schedule_slot_delivers_small_packet_within_one_slot():
    queues = SliceQueues(_spec(10.0), snr_linear=1.0)
    counters = SliceCounters()
    queues.offer(0, _packet(100.0), counters)

    user, rate, delivered = queues.schedule_slot(1e6, np.ones(1), 0.0, 0.5, counters)

    assert (user, delivered) == (0, 100.0)
    assert rate == pytest.approx(1e6)
    assert counters.delivered_packets == 1
    assert counters.satisfied_packets == 1
    assert not queues.queues[0]


def test_round_robin_serves_each_backlogged_user_once():
    queues = SliceQueues(_spec(10.0, users=2), snr_linear=1.0)
    counters = SliceCounters()
    queues.offer(0, _packet(10_000.0), counters)
    queues.offer(1, _packet(10_000.0), counters)

    first = queues.schedule_slot(1e6, np.ones(2), 0.0, 0.5, counters)
    second = queues.schedule_slot(1e6, np.ones(2), 0.5, 0.5, counters)

    assert (first[0], second[0]) == (0, 1)
    assert first[2] == pytest.approx(500.0)
    assert queues.queues[0][0].remaining == pytest.approx(9_500.0)


def test_partial_service_cascades_to_the_next_packet():
    queues = SliceQueues(_spec(10.0), snr_linear=1.0)
    counters = SliceCounters()
    queues.offer(0, _packet(200.0), counters)
    queues.offer(0, _packet(400.0), counters)

    _, _, delivered = queues.schedule_slot(1e6, np.ones(1), 0.0, 0.5, counters)

    assert delivered == pytest.approx(500.0)
    assert counters.delivered_packets == 1
    assert queues.queues[0][0].remaining == pytest.approx(100.0)


def _simulator(specs, slots=2000, fixed_gain=1.0, seed=0, trace=None, trace_intervals=0):
    return LinkSimulator(
        specs,
        SlotConfig(slot_ms=0.5, slots_per_interval=slots),
        ChannelConfig(fixed_gain=fixed_gain),
        RandomStreams(seed),
        trace=trace,
        trace_intervals=trace_intervals,
    )


def test_zero_traffic_gives_empty_statistics():
    spec = SliceSpec(
        name="idle",
        user_count=4,
        inter_arrival=IdleInterArrival(),
        packet_size=ConstantPacketSize(bytes=40),
        sla_rate_bps=1e6,
        sla_latency_ms=10,
    )
    stats = _simulator([spec], slots=50).run_interval([1e6])
    counters = stats.slices["idle"]
    assert counters.arrived_packets == counters.delivered_packets == counters.expired_packets == 0
    assert counters.delivered_bits == 0.0


def test_single_packet_is_delivered_and_satisfied():
    stats = _simulator([_spec(1000.0)]).run_interval([1e6])
    counters = stats.slices["volte"]
    assert counters.arrived_packets == 1
    assert counters.delivered_packets == 1
    assert counters.satisfied_packets == 1
    assert counters.expired_packets == 0
    assert counters.delivered_bits == pytest.approx(320.0)


def test_stall_rule_discards_the_sixth_packet_while_rate_is_zero():
    # six arrivals 0.25 ms apart inside a 1.5 ms interval, nothing ever served
    sim = _simulator([_spec(0.25, latency_ms=100.0)], slots=3, fixed_gain=0.0)
    stats = sim.run_interval([1e6])
    counters = stats.slices["volte"]
    assert counters.arrived_packets == 6
    assert counters.stalled_arrivals == 1
    assert counters.delivered_packets == 0
    assert len(sim.queues("volte").queues[0]) == STALL_QUEUE_LIMIT


def test_expiry_frees_room_for_new_arrivals():
    # latency 1 ms: the head packets expire and later arrivals are accepted again
    sim = _simulator([_spec(0.25, latency_ms=1.0)], slots=8, fixed_gain=0.0)
    stats = sim.run_interval([1e6])
    counters = stats.slices["volte"]
    assert counters.expired_packets > 0
    assert counters.stalled_arrivals > 0
    assert counters.arrived_packets == 16
    assert sim.max_queue_length() <= STALL_QUEUE_LIMIT


def test_stalled_arrival_counts_against_qoe():
    # six 40-byte packets in the first slot: five are served and satisfied, one is discarded
    sim = _simulator([_spec(0.09)], slots=1)
    stats = sim.run_interval([1e6])
    counters = stats.slices["volte"]
    assert counters.arrived_packets == 6
    assert counters.stalled_arrivals == 1
    assert counters.satisfied_packets == 5
    assert compute_qoe(stats).per_slice["volte"] == pytest.approx(5 / 6)


def test_bits_are_conserved_and_queues_capped_on_default_scenario():
    scenario = default_scenario()
    grid = make_grid(10, 0.2, 3)
    sim = _simulator(scenario, fixed_gain=None, seed=21)
    bandwidths = equal_allocation(grid).bandwidths_hz
    for _ in range(100):
        stats = sim.run_interval(bandwidths)
        for counters in stats.slices.values():
            inflow = counters.arrived_bits + counters.pending_bits_start
            outflow = (
                counters.delivered_bits
                + counters.expired_bits
                + counters.stalled_bits
                + counters.pending_bits_end
            )
            assert inflow == pytest.approx(outflow, rel=1e-9, abs=1e-6)
            assert counters.satisfied_packets <= counters.delivered_packets <= counters.arrived_packets
        assert sim.max_queue_length() <= STALL_QUEUE_LIMIT


@pytest.mark.parametrize("slots", [2, 10])
def test_packet_outcomes_never_exceed_arrivals_on_short_intervals(slots):
    sim = _simulator(default_scenario(), slots=slots, fixed_gain=None, seed=8)
    bandwidths = equal_allocation(make_grid(10, 0.2, 3)).bandwidths_hz
    for _ in range(300):
        stats = sim.run_interval(bandwidths)
        qoe = compute_qoe(stats)
        assert 0.0 <= qoe.aggregate <= 1.0
        for name, counters in stats.slices.items():
            outcomes = counters.delivered_packets + counters.expired_packets + counters.stalled_arrivals
            assert counters.satisfied_packets <= counters.delivered_packets <= counters.arrived_packets
            assert outcomes <= counters.arrived_packets
            assert 0.0 <= qoe.per_slice[name] <= 1.0


@pytest.mark.parametrize(
    "period_ms, bandwidth_hz",
    [
        (10.0, 1e6),  # light load: everything that arrives is sent
        (0.25, 1e5),  # overload: the link is busy for the whole interval
    ],
)
def test_single_user_constant_gain_delivers_min_of_demand_and_capacity(period_ms, bandwidth_hz):
    sim = _simulator([_spec(period_ms, latency_ms=1000.0)], slots=2000)
    stats = sim.run_interval([bandwidth_hz])
    counters = stats.slices["volte"]

    rate = instantaneous_rate(bandwidth_hz, 100.0, 1.0)
    interval_s = 2000 * 0.5e-3
    slot_capacity = rate * 0.5e-3
    expected = min(counters.arrived_bits, rate * interval_s)
    assert abs(counters.delivered_bits - expected) <= slot_capacity


def test_more_bandwidth_never_delivers_less():
    spec = default_scenario()[0]
    low = _simulator([spec], slots=400, fixed_gain=None, seed=5).run_interval([2e5])
    high = _simulator([spec], slots=400, fixed_gain=None, seed=5).run_interval([2e6])
    assert high.slices["volte"].delivered_bits >= low.slices["volte"].delivered_bits


def test_identical_seeds_replay_identically():
    scenario = default_scenario()
    first = _simulator(scenario, slots=200, fixed_gain=None, seed=4).run_interval([3.2e6, 3.4e6, 3.4e6])
    second = _simulator(scenario, slots=200, fixed_gain=None, seed=4).run_interval([3.2e6, 3.4e6, 3.4e6])
    assert first == second


def test_invalid_bandwidth_vector_is_rejected():
    sim = _simulator([_spec(10.0)], slots=10)
    with pytest.raises(InvalidActionError):
        sim.run_interval([1e6, 1e6])
    with pytest.raises(InvalidActionError):
        sim.run_interval([-1.0])


def test_slot_trace_records_only_requested_intervals():
    trace = RecordingTrace()
    sim = _simulator([_spec(0.5)], slots=4, trace=trace, trace_intervals=1)
    sim.run_interval([1e6])
    recorded = len(trace.rows)
    sim.run_interval([1e6])
    assert recorded == 4
    assert len(trace.rows) == recorded
    assert {row["slice_name"] for row in trace.rows} == {"volte"}
