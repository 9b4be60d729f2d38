"""Per-TTI MAC: transmit buffers, RB scheduling, and decode-gated delivery.

Buffers are FIFO and tail-drop with a fixed bit capacity. Packets are
MAC-atomic: one that does not fit in a grant's remaining capacity stays
queued for a later TTI, so bit accounting is exact. Each grant gets one
decode decision per TTI, taken on the linear-mean SINR over its RBs; a
failed decode drops the packets it carried (no HARQ).

Round-robin scheduling deals RBs one at a time over the backlogged UEs in
ascending node-id order, resuming each TTI after the UE that took the last
RB of the previous one; over a window with a stable backlog this hands
every UE exactly the same number of RBs per full rotation. The max-CQI
scheduler instead fills greedily in descending CQI order (ties to the
lowest node id), spilling capacity a UE cannot use to the runner-up.
"""

from __future__ import annotations

from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field
from math import ceil
from typing import Optional, Sequence

from .binder import Binder, Direction
from .channel import ChannelModel, bits_per_rb, decode
from .engine import TTI_US
from .errors import MacError

BUFFER_CAPACITY_BITS = 8 * 2**20  # 1 MiB per buffer, tail-drop beyond


@dataclass
class BufferedPacket:
    packet_id: str
    size_bits: int
    enqueue_us: int
    created_us: int


class TxBuffer:
    """FIFO queue of packets for one endpoint and direction."""

    def __init__(self, owner: int, direction: Direction, capacity_bits: int) -> None:
        self.owner = owner
        self.direction = direction
        self.capacity_bits = capacity_bits
        self.queue: deque[BufferedPacket] = deque()
        self.occupancy_bits = 0
        # lifetime counters for conservation checks
        self.enqueued_bits = 0
        self.overflow_bits = 0
        self.delivered_bits = 0
        self.dropped_bits = 0
        self.cleared_bits = 0

    def push(self, packet: BufferedPacket) -> bool:
        if self.occupancy_bits + packet.size_bits > self.capacity_bits:
            self.overflow_bits += packet.size_bits
            return False
        self.queue.append(packet)
        self.occupancy_bits += packet.size_bits
        self.enqueued_bits += packet.size_bits
        return True

    def clear(self) -> int:
        bits = self.occupancy_bits
        self.queue.clear()
        self.occupancy_bits = 0
        self.cleared_bits += bits
        return bits


@dataclass(frozen=True)
class Grant:
    rb_set: tuple[int, ...]
    cqi_used: int


@dataclass
class Allocation:
    tti: int
    cell: int
    direction: Direction
    grants: dict[int, Grant] = field(default_factory=dict)

    def rb_count(self) -> int:
        return sum(len(g.rb_set) for g in self.grants.values())


@dataclass
class DeliveredPacket:
    packet_id: str
    owner: int
    direction: Direction
    size_bits: int
    created_us: int
    delivered_us: int

    @property
    def latency_us(self) -> int:
        return self.delivered_us - self.created_us


@dataclass
class GrantOutcome:
    ue: int
    rb_count: int
    cqi_used: int
    capacity_bits: int
    decoded: bool
    delivered: list[DeliveredPacket] = field(default_factory=list)
    dropped_bits: int = 0


@dataclass
class TtiOutcome:
    allocation: Allocation
    grant_outcomes: dict[int, GrantOutcome] = field(default_factory=dict)

    @property
    def delivered_bits(self) -> int:
        return sum(p.size_bits for g in self.grant_outcomes.values() for p in g.delivered)

    @property
    def dropped_bits(self) -> int:
        return sum(g.dropped_bits for g in self.grant_outcomes.values())


class Mac:
    def __init__(
        self, binder: Binder, capacity_bits: int = BUFFER_CAPACITY_BITS
    ) -> None:
        self.binder = binder
        self.capacity_bits = capacity_bits
        self._buffers: dict[tuple[int, Direction], TxBuffer] = {}
        self._rr_pointer: dict[tuple[int, Direction], int] = {}

    # ------------------------------------------------------------------
    # buffers

    def buffer(self, owner: int, direction: Direction) -> TxBuffer:
        key = (owner, direction)
        buf = self._buffers.get(key)
        if buf is None:
            buf = TxBuffer(owner, direction, self.capacity_bits)
            self._buffers[key] = buf
        return buf

    def enqueue(
        self,
        owner: int,
        direction: Direction,
        packet_id: str,
        size_bits: int,
        now_us: int,
        created_us: Optional[int] = None,
    ) -> bool:
        """Append a packet; False means it was tail-dropped on overflow."""
        if not self.binder.is_live(owner):
            raise MacError(f"cannot enqueue for node {owner}: not registered")
        if size_bits <= 0:
            raise MacError(f"packet {packet_id} has non-positive size {size_bits}")
        packet = BufferedPacket(
            packet_id, size_bits, now_us, now_us if created_us is None else created_us
        )
        return self.buffer(owner, direction).push(packet)

    def buffer_bits(self, owner: int, direction: Direction) -> int:
        buf = self._buffers.get((owner, direction))
        return buf.occupancy_bits if buf else 0

    def clear_node(self, owner: int) -> tuple[int, int]:
        """Empty both of a node's buffers; returns (DL bits, UL bits) cleared."""
        dl = self._buffers.get((owner, Direction.DL))
        ul = self._buffers.get((owner, Direction.UL))
        return (dl.clear() if dl else 0, ul.clear() if ul else 0)

    def clear_dl_buffer(self, owner: int) -> int:
        """Handover teardown: drop everything queued toward the UE."""
        buf = self._buffers.get((owner, Direction.DL))
        return buf.clear() if buf else 0

    # ------------------------------------------------------------------
    # scheduling

    def _backlogged(
        self, direction: Direction, ues_with_cqi: Sequence[tuple[int, int]]
    ) -> list[tuple[int, int]]:
        out = [
            (ue, cqi)
            for ue, cqi in sorted(ues_with_cqi)
            if cqi >= 1 and self.buffer_bits(ue, direction) > 0
        ]
        return out

    def schedule_tti_rr(
        self,
        cell: int,
        tti: int,
        direction: Direction,
        ues_with_cqi: Sequence[tuple[int, int]],
        tables,
    ) -> Allocation:
        """Round-robin: deal RBs one by one, resuming after last TTI's stop."""
        backlogged = self._backlogged(direction, ues_with_cqi)
        alloc = Allocation(tti, cell, direction)
        if not backlogged:
            return alloc
        ids = [ue for ue, _ in backlogged]
        cqis = dict(backlogged)
        pointer = self._rr_pointer.get((cell, direction))
        start = bisect_right(ids, pointer) % len(ids) if pointer is not None else 0
        order = ids[start:] + ids[:start]
        demand = {
            ue: ceil(self.buffer_bits(ue, direction) / bits_per_rb(cqis[ue], tables))
            for ue in ids
        }
        granted: dict[int, list[int]] = {ue: [] for ue in ids}
        cursor = 0
        last_served = None
        k = len(order)
        for rb in range(self.binder.num_rbs):
            for step in range(k):
                ue = order[(cursor + step) % k]
                if len(granted[ue]) < demand[ue]:
                    granted[ue].append(rb)
                    last_served = ue
                    cursor = (cursor + step + 1) % k
                    break
            else:
                break  # every demand met
        if last_served is not None:
            self._rr_pointer[(cell, direction)] = last_served
        alloc.grants = {
            ue: Grant(tuple(rbs), cqis[ue]) for ue, rbs in granted.items() if rbs
        }
        return alloc

    def schedule_tti_maxcqi(
        self,
        cell: int,
        tti: int,
        direction: Direction,
        ues_with_cqi: Sequence[tuple[int, int]],
        tables,
    ) -> Allocation:
        """Greedy fill by descending CQI, ties to the lowest node id."""
        backlogged = self._backlogged(direction, ues_with_cqi)
        alloc = Allocation(tti, cell, direction)
        rb_cursor = 0
        for ue, cqi in sorted(backlogged, key=lambda item: (-item[1], item[0])):
            if rb_cursor >= self.binder.num_rbs:
                break
            want = ceil(self.buffer_bits(ue, direction) / bits_per_rb(cqi, tables))
            take = min(want, self.binder.num_rbs - rb_cursor)
            if take > 0:
                alloc.grants[ue] = Grant(tuple(range(rb_cursor, rb_cursor + take)), cqi)
                rb_cursor += take
        return alloc

    # ------------------------------------------------------------------
    # transmission

    def transmit(
        self, allocation: Allocation, channel: ChannelModel, binder: Binder
    ) -> TtiOutcome:
        """Serve each grant through the decode gate at realized interference.

        The allocation must already be recorded in the binder grid so that
        overlapping cells see each other as interference.
        """
        outcome = TtiOutcome(allocation)
        deliver_us = (allocation.tti + 1) * TTI_US  # end of the slot
        for ue in sorted(allocation.grants):
            grant = allocation.grants[ue]
            expected_tx = allocation.cell if allocation.direction == Direction.DL else ue
            for rb in grant.rb_set:
                actual = binder.transmitter_on(allocation.tti, allocation.direction, allocation.cell, rb)
                if actual != expected_tx:
                    raise MacError(
                        f"grant for UE {ue} references RB {rb} of cell "
                        f"{allocation.cell} not recorded in the grid"
                    )
            per_rb_sinr = channel.sinr(
                ue, allocation.cell, allocation.tti, allocation.direction, grant.rb_set
            )
            capacity = len(grant.rb_set) * bits_per_rb(grant.cqi_used, channel.tables)
            buf = self.buffer(ue, allocation.direction)
            taken: list[BufferedPacket] = []
            remaining = capacity
            while buf.queue and buf.queue[0].size_bits <= remaining:
                pkt = buf.queue.popleft()
                buf.occupancy_bits -= pkt.size_bits
                remaining -= pkt.size_bits
                taken.append(pkt)
            ok = decode(per_rb_sinr, grant.cqi_used, channel.tables)
            result = GrantOutcome(
                ue=ue,
                rb_count=len(grant.rb_set),
                cqi_used=grant.cqi_used,
                capacity_bits=capacity,
                decoded=ok,
            )
            if ok:
                for pkt in taken:
                    result.delivered.append(
                        DeliveredPacket(
                            pkt.packet_id,
                            ue,
                            allocation.direction,
                            pkt.size_bits,
                            pkt.created_us,
                            deliver_us,
                        )
                    )
                    buf.delivered_bits += pkt.size_bits
            else:
                result.dropped_bits = sum(p.size_bits for p in taken)
                buf.dropped_bits += result.dropped_bits
            outcome.grant_outcomes[ue] = result
        return outcome
