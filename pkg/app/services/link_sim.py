"""Slot-level downlink simulation of the slices sharing one base station."""

from __future__ import annotations

import logging
import math

from collections import deque
from typing import Optional, Protocol, Sequence

import numpy as np

from app.core.errors import InvalidActionError
from app.domain.models import ChannelConfig, IntervalStats, SliceCounters, SlotConfig
from app.domain.slices import SliceSpec
from app.services.traffic import Packet, TrafficState, generate_arrivals
from app.util.constants import STALL_QUEUE_LIMIT
from app.util.random_streams import RandomStreams, Stream


class SlotTrace(Protocol):
    def record(
        self,
        *,
        interval: int,
        slot: int,
        slice_name: str,
        user: int,
        rate_bps: float,
        delivered_bits: float,
        queue_length: int,
    ) -> None: ...


def instantaneous_rate(bandwidth_hz: float, mean_snr_linear: float, gain: float) -> float:
    """Shannon rate in bit/s of the whole band for one user."""
    return bandwidth_hz * math.log2(1.0 + mean_snr_linear * gain)


class SliceQueues:
    """Per-user FIFO queues of one slice plus its round-robin cursor.

    Packet outcomes are counted only for packets that arrived at or after
    interval_start_ms; older packets still contribute their bits.
    """

    def __init__(self, spec: SliceSpec, snr_linear: float) -> None:
        self.spec = spec
        self.snr_linear = snr_linear
        self.queues: list[deque[Packet]] = [deque() for _ in range(spec.user_count)]
        self.cursor = -1
        self.served_bits = np.zeros(spec.user_count)
        self.interval_start_ms = 0.0

    def pending_bits(self) -> float:
        return sum(packet.remaining for queue in self.queues for packet in queue)

    def offer(self, user: int, packet: Packet, counters: SliceCounters) -> bool:
        """Accept an arrival unless the user already holds the stall limit."""
        counters.arrived_packets += 1
        counters.arrived_bits += packet.size
        queue = self.queues[user]
        if len(queue) >= STALL_QUEUE_LIMIT:
            counters.stalled_arrivals += 1
            counters.stalled_bits += packet.size
            return False
        queue.append(packet)
        return True

    def expire(self, now_ms: float, counters: SliceCounters) -> None:
        latency = self.spec.sla_latency_ms
        for queue in self.queues:
            while queue and now_ms - queue[0].arrival_time > latency:
                packet = queue.popleft()
                counters.expired_bits += packet.remaining
                if self.counts_packet(packet):
                    counters.expired_packets += 1

    def counts_packet(self, packet: Packet) -> bool:
        return packet.arrival_time >= self.interval_start_ms

    def next_user(self) -> Optional[int]:
        count = len(self.queues)
        for step in range(1, count + 1):
            user = (self.cursor + step) % count
            if self.queues[user]:
                return user
        return None

    def schedule_slot(
        self,
        bandwidth_hz: float,
        gains: np.ndarray,
        slot_start_ms: float,
        slot_ms: float,
        counters: SliceCounters,
    ) -> tuple[Optional[int], float, float]:
        """Serve the next backlogged user for one slot.

        Returns (user, rate, delivered bits); user is None when every queue is
        empty, in which case the cursor does not move.
        """
        user = self.next_user()
        if user is None:
            return None, 0.0, 0.0
        self.cursor = user

        rate = instantaneous_rate(bandwidth_hz, self.snr_linear, float(gains[user]))
        if rate <= 0.0:
            return user, 0.0, 0.0

        queue = self.queues[user]
        slot_end = slot_start_ms + slot_ms
        now = slot_start_ms
        delivered = 0.0
        while queue:
            packet = queue[0]
            # a packet injected this slot cannot be sent before it arrives
            now = max(now, packet.arrival_time)
            if now >= slot_end:
                break
            capacity = rate * (slot_end - now) / 1000.0
            if packet.remaining > capacity:
                packet.remaining -= capacity
                delivered += capacity
                break
            now += packet.remaining / rate * 1000.0
            delivered += packet.remaining
            packet.remaining = 0.0
            queue.popleft()
            self._record_delivery(packet, now, counters)

        counters.delivered_bits += delivered
        self.served_bits[user] += delivered
        return user, rate, delivered

    def _record_delivery(self, packet: Packet, completed_ms: float, counters: SliceCounters) -> None:
        if not self.counts_packet(packet):
            return
        counters.delivered_packets += 1
        sojourn_ms = completed_ms - packet.arrival_time
        if sojourn_ms > self.spec.sla_latency_ms:
            return
        if sojourn_ms <= 0.0 or packet.size / (sojourn_ms / 1000.0) >= self.spec.sla_rate_bps:
            counters.satisfied_packets += 1


class LinkSimulator:
    """Carries queues, traffic streams and the clock from one interval to the next."""

    def __init__(
        self,
        slices: Sequence[SliceSpec],
        slot_config: SlotConfig,
        channel: ChannelConfig,
        streams: RandomStreams,
        *,
        trace: Optional[SlotTrace] = None,
        trace_intervals: int = 0,
    ) -> None:
        self.slices = list(slices)
        self.slot_config = slot_config
        self.channel = channel
        self.traffic_state = TrafficState()
        self.interval_index = 0
        self._queues = {
            spec.name: SliceQueues(spec, channel.snr_linear(spec.name)) for spec in self.slices
        }
        self._traffic_rngs = {
            (spec.name, user): streams.generator(Stream.TRAFFIC, slice_index, user)
            for slice_index, spec in enumerate(self.slices)
            for user in range(spec.user_count)
        }
        self._channel_rngs = {
            spec.name: streams.generator(Stream.CHANNEL, slice_index)
            for slice_index, spec in enumerate(self.slices)
        }
        self._trace = trace
        self._trace_intervals = trace_intervals
        self._logger = logging.getLogger(self.__class__.__name__)

    @property
    def slice_names(self) -> list[str]:
        return [spec.name for spec in self.slices]

    def queues(self, slice_name: str) -> SliceQueues:
        return self._queues[slice_name]

    def pending_bits(self) -> dict[str, float]:
        return {name: queues.pending_bits() for name, queues in self._queues.items()}

    def max_queue_length(self) -> int:
        return max(
            (len(queue) for queues in self._queues.values() for queue in queues.queues),
            default=0,
        )

    def run_interval(self, bandwidths_hz: Sequence[float]) -> IntervalStats:
        """Simulate one adjustment interval under per-slice bandwidths (Hz)."""
        if len(bandwidths_hz) != len(self.slices) or any(w < 0 for w in bandwidths_hz):
            raise InvalidActionError(
                f"expected {len(self.slices)} non-negative slice bandwidths, got {list(bandwidths_hz)}"
            )

        slots = self.slot_config.slots_per_interval
        slot_ms = self.slot_config.slot_ms
        start_ms = self.interval_index * self.slot_config.interval_ms
        end_ms = start_ms + self.slot_config.interval_ms
        stats = IntervalStats.empty(self.slice_names)

        buckets = {}
        gains = {}
        for spec in self.slices:
            queues = self._queues[spec.name]
            stats.slices[spec.name].pending_bits_start = queues.pending_bits()
            queues.served_bits[:] = 0.0
            queues.interval_start_ms = start_ms
            buckets[spec.name] = self._arrival_buckets(spec, start_ms, end_ms)
            gains[spec.name] = self._draw_gains(spec, slots)

        tracing = self._trace is not None and self.interval_index < self._trace_intervals
        for slot in range(slots):
            slot_start = start_ms + slot * slot_ms
            for spec, bandwidth in zip(self.slices, bandwidths_hz):
                queues = self._queues[spec.name]
                counters = stats.slices[spec.name]
                for user, packet in buckets[spec.name].get(slot, ()):
                    queues.offer(user, packet, counters)
                queues.expire(slot_start, counters)
                user, rate, delivered = queues.schedule_slot(
                    bandwidth, gains[spec.name][slot], slot_start, slot_ms, counters
                )
                if tracing and user is not None:
                    self._trace.record(
                        interval=self.interval_index,
                        slot=slot,
                        slice_name=spec.name,
                        user=user,
                        rate_bps=rate,
                        delivered_bits=delivered,
                        queue_length=len(queues.queues[user]),
                    )

        interval_s = self.slot_config.interval_s
        for spec in self.slices:
            queues = self._queues[spec.name]
            stats.slices[spec.name].pending_bits_end = queues.pending_bits()
            stats.user_rates[spec.name] = (queues.served_bits / interval_s).tolist()

        self.interval_index += 1
        self._logger.debug("interval %s simulated", self.interval_index - 1)
        return stats

    def _arrival_buckets(
        self, spec: SliceSpec, start_ms: float, end_ms: float
    ) -> dict[int, list[tuple[int, Packet]]]:
        slot_ms = self.slot_config.slot_ms
        last_slot = self.slot_config.slots_per_interval - 1
        buckets: dict[int, list[tuple[int, Packet]]] = {}
        for user in range(spec.user_count):
            rng = self._traffic_rngs[(spec.name, user)]
            for packet in generate_arrivals(spec, user, (start_ms, end_ms), rng, self.traffic_state):
                slot = min(int((packet.arrival_time - start_ms) // slot_ms), last_slot)
                buckets.setdefault(slot, []).append((user, packet))
        for bucket in buckets.values():
            bucket.sort(key=lambda item: (item[1].arrival_time, item[0]))
        return buckets

    def _draw_gains(self, spec: SliceSpec, slots: int) -> np.ndarray:
        # drawn for every user and slot so fading does not depend on the allocation
        if self.channel.fixed_gain is not None:
            return np.full((slots, spec.user_count), self.channel.fixed_gain)
        return self._channel_rngs[spec.name].exponential(1.0, size=(slots, spec.user_count))
