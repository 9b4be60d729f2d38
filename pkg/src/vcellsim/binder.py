"""Central bookkeeping for the simulated network.

Every node (vehicle UE or eNB) registers here and gets a run-unique id and
an opaque address. The binder also keeps the per-TTI resource-block ledger:
for each cell and direction, which node transmits on which RB. Downlink and
uplink use two distinct RB sets. The grid for the previous TTI is retained
so interference can still be evaluated for the slot being decoded; anything
older is discarded.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Optional

from .errors import LedgerError, RegistryError

DEFAULT_NUM_RBS = 50  # 10 MHz LTE grid


class NodeKind(Enum):
    UE = "UE"
    ENB = "ENB"


class Direction(Enum):
    DL = "DL"
    UL = "UL"


@dataclass
class NodeRecord:
    node_id: int
    kind: NodeKind
    name: str
    address: int
    tx_power_dbm: float
    serving_cell: Optional[int] = None  # UE only
    position: tuple[float, float] = (0.0, 0.0)


# Per-TTI grid: direction -> rb index -> {cell id -> transmitter id}.
Grid = dict[Direction, dict[int, dict[int, int]]]


def _empty_grid() -> Grid:
    return {Direction.DL: {}, Direction.UL: {}}


class Binder:
    """Node registry plus RB allocation ledger.

    Node ids and addresses are handed out from monotonic counters starting
    at 1 and are never reused, so a stale reference is always detectable.
    """

    def __init__(self, num_rbs: int = DEFAULT_NUM_RBS) -> None:
        if num_rbs <= 0:
            raise ValueError("num_rbs must be positive")
        self.num_rbs = num_rbs
        self._next_node_id = 1
        self._next_address = 1
        self._nodes: dict[int, NodeRecord] = {}
        self._current_tti = -1
        self._grids: dict[int, Grid] = {-1: _empty_grid()}

    # ------------------------------------------------------------------
    # registry

    def register_node(
        self,
        kind: NodeKind,
        name: str,
        tx_power_dbm: float,
        position: tuple[float, float] = (0.0, 0.0),
    ) -> NodeRecord:
        for rec in self._nodes.values():
            if rec.name == name:
                raise RegistryError(f"a live node named {name!r} already exists")
        record = NodeRecord(
            node_id=self._next_node_id,
            kind=kind,
            name=name,
            address=self._next_address,
            tx_power_dbm=tx_power_dbm,
            position=position,
        )
        self._next_node_id += 1
        self._next_address += 1
        self._nodes[record.node_id] = record
        return record

    def deregister_node(self, node_id: int) -> None:
        """Drop a node and purge every retained grid entry that names it."""
        if node_id not in self._nodes:
            raise RegistryError(f"node {node_id} is not live (double deregistration?)")
        del self._nodes[node_id]
        for rec in self._nodes.values():
            if rec.serving_cell == node_id:
                rec.serving_cell = None
        for grid in self._grids.values():
            for per_rb in grid.values():
                empty_rbs = []
                for rb, cells in per_rb.items():
                    stale = [c for c, tx in cells.items() if c == node_id or tx == node_id]
                    for c in stale:
                        del cells[c]
                    if not cells:
                        empty_rbs.append(rb)
                for rb in empty_rbs:
                    del per_rb[rb]

    def is_live(self, node_id: int) -> bool:
        return node_id in self._nodes

    def node(self, node_id: int) -> NodeRecord:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise RegistryError(f"node {node_id} is not live") from None

    def live_nodes(self, kind: Optional[NodeKind] = None) -> list[NodeRecord]:
        recs = sorted(self._nodes.values(), key=lambda r: r.node_id)
        if kind is None:
            return recs
        return [r for r in recs if r.kind == kind]

    def live_ids(self) -> set[int]:
        return set(self._nodes)

    def set_position(self, node_id: int, x: float, y: float) -> None:
        self.node(node_id).position = (x, y)

    def set_serving_cell(self, ue_id: int, cell_id: Optional[int]) -> None:
        rec = self.node(ue_id)
        if rec.kind != NodeKind.UE:
            raise RegistryError(f"node {ue_id} is not a UE")
        if cell_id is not None:
            cell = self.node(cell_id)
            if cell.kind != NodeKind.ENB:
                raise RegistryError(f"node {cell_id} is not an eNB")
        rec.serving_cell = cell_id

    # ------------------------------------------------------------------
    # resource grid

    @property
    def current_tti(self) -> int:
        return self._current_tti

    def advance_tti(self, new_tti: int) -> None:
        """Open an empty grid for `new_tti`; keep only the previous one."""
        if new_tti != self._current_tti + 1:
            raise LedgerError(
                f"TTI must advance by exactly one ({self._current_tti} -> {new_tti})"
            )
        self._grids = {self._current_tti: self._grids[self._current_tti]}
        self._current_tti = new_tti
        self._grids[new_tti] = _empty_grid()

    def _grid(self, tti: int) -> Grid:
        try:
            return self._grids[tti]
        except KeyError:
            raise LedgerError(
                f"grid for TTI {tti} is not retained (current is {self._current_tti})"
            ) from None

    def record_allocation(
        self,
        tti: int,
        direction: Direction,
        cell: int,
        rb_set: Iterable[int],
        transmitter: int,
    ) -> None:
        if tti != self._current_tti:
            raise LedgerError(
                f"allocations may only be recorded for the current TTI "
                f"{self._current_tti}, got {tti}"
            )
        cell_rec = self.node(cell)
        if cell_rec.kind != NodeKind.ENB:
            raise RegistryError(f"allocation cell {cell} is not an eNB")
        if not self.is_live(transmitter):
            raise RegistryError(f"transmitter {transmitter} is not live")
        per_rb = self._grids[tti][direction]
        rbs = sorted(set(rb_set))
        for rb in rbs:
            if not 0 <= rb < self.num_rbs:
                raise LedgerError(f"RB index {rb} outside grid of {self.num_rbs} RBs")
            if cell in per_rb.get(rb, {}):
                raise LedgerError(
                    f"RB {rb} of cell {cell} ({direction.value}) already allocated "
                    f"in TTI {tti}"
                )
        for rb in rbs:
            per_rb.setdefault(rb, {})[cell] = transmitter

    def transmitter_on(
        self, tti: int, direction: Direction, cell: int, rb: int
    ) -> Optional[int]:
        return self._grid(tti)[direction].get(rb, {}).get(cell)

    def co_channel_transmitters(
        self, tti: int, direction: Direction, rb_index: int, excluding_cell: int
    ) -> list[tuple[int, float, tuple[float, float]]]:
        """All transmitters on `rb_index` in cells other than `excluding_cell`.

        Returns (node id, tx power dBm, current position) triples sorted by
        node id; empty when nothing co-channel is active.
        """
        cells = self._grid(tti)[direction].get(rb_index, {})
        out = []
        for cell, tx in cells.items():
            if cell == excluding_cell:
                continue
            rec = self._nodes[tx]
            out.append((tx, rec.tx_power_dbm, rec.position))
        out.sort(key=lambda item: item[0])
        return out

    def rb_occupancy(self, tti: int, direction: Direction) -> dict[int, dict[int, int]]:
        """Read-only view of rb -> {cell -> transmitter} for one TTI/direction."""
        return self._grid(tti)[direction]

    def allocation_items(
        self, tti: int, direction: Direction
    ) -> Iterator[tuple[int, int, int]]:
        """Iterate (cell, rb, transmitter) entries of one TTI/direction."""
        for rb, cells in self._grid(tti)[direction].items():
            for cell, tx in cells.items():
                yield (cell, rb, tx)
