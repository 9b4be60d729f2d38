"""Radio abstraction: path loss, shadowing, SINR, CQI, and MCS gating.

The propagation model is log-distance path loss, PL = A + B*log10(d / 1 km),
with the distance clamped below at a minimum coupling distance. Fast fading
is not modeled; optional log-normal shadowing draws one dB offset per node
pair and holds it for the whole run, which keeps runs reproducible from a
single seed.

Per-RB SINR is signal over (thermal noise + sum of co-channel received
powers), where co-channel transmitters come from the binder's allocation
ledger: other cells' eNBs in downlink, other cells' UEs in uplink. The mean
SINR (averaged in the linear domain) maps to a 4-bit CQI through a
threshold table, the CQI selects the MCS, and decoding succeeds exactly
when the mean SINR is at or above the threshold of the CQI the transmission
was sent with.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .binder import Binder, Direction, NodeRecord
from .errors import ChannelError

THERMAL_NOISE_DBM_PER_HZ = -174.0
RESOURCE_ELEMENTS_PER_RB = 144

# Link adaptation tables, index 0 holds CQI 1. Spectral efficiencies follow
# the standard 4-bit CQI table; one RB carries floor(efficiency * 144) bits.
CQI_SINR_THRESHOLDS_DB = (
    -6.7, -4.7, -2.3, 0.2, 2.4, 4.3, 5.9, 8.1, 10.3, 11.7, 14.1, 16.3, 18.7, 21.0, 22.7,
)
CQI_EFFICIENCY = (
    0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.9141,
    2.4063, 2.7305, 3.3223, 3.9023, 4.5234, 5.1152, 5.5547,
)
CQI_BITS_PER_RB = tuple(
    math.floor(eff * RESOURCE_ELEMENTS_PER_RB) for eff in CQI_EFFICIENCY
)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(linear: float) -> float:
    return 10.0 * math.log10(linear)


@dataclass(frozen=True)
class ChannelParams:
    pathloss_a_db: float = 128.1
    pathloss_b_db: float = 37.6
    min_distance_m: float = 35.0
    noise_figure_db: float = 9.0
    rb_bandwidth_hz: float = 180e3
    shadowing_enabled: bool = False
    shadowing_sigma_db: float = 8.0

    def __post_init__(self) -> None:
        if self.pathloss_b_db <= 0:
            raise ValueError("pathloss_b_db must be positive")
        if self.min_distance_m <= 0:
            raise ValueError("min_distance_m must be positive")
        if self.rb_bandwidth_hz <= 0:
            raise ValueError("rb_bandwidth_hz must be positive")


@dataclass(frozen=True)
class CqiTables:
    sinr_thresholds_db: tuple[float, ...] = CQI_SINR_THRESHOLDS_DB
    bits_per_rb: tuple[int, ...] = CQI_BITS_PER_RB

    def __post_init__(self) -> None:
        if len(self.sinr_thresholds_db) != 15 or len(self.bits_per_rb) != 15:
            raise ValueError("CQI tables must have 15 entries (CQI 1..15)")
        for a, b in zip(self.sinr_thresholds_db, self.sinr_thresholds_db[1:]):
            if b <= a:
                raise ValueError("SINR thresholds must be strictly ascending")
        for a, b in zip(self.bits_per_rb, self.bits_per_rb[1:]):
            if b <= a:
                raise ValueError("bits-per-RB values must be strictly ascending")
        if any(b <= 0 for b in self.bits_per_rb):
            raise ValueError("bits-per-RB values must be positive")


@dataclass
class ChannelReport:
    """One UE's view of one cell: received power, per-RB SINR, and CQI."""

    ue: int
    cell: int
    rx_power_dbm: float
    per_rb_sinr_db: list[float]
    mean_sinr_db: float
    cqi: int


def path_loss_db(distance_m: float, params: ChannelParams) -> float:
    """Log-distance path loss with the minimum coupling distance clamp."""
    d = max(distance_m, params.min_distance_m)
    return params.pathloss_a_db + params.pathloss_b_db * math.log10(d / 1000.0)


def noise_dbm(params: ChannelParams) -> float:
    """Thermal noise over one RB plus the receiver noise figure."""
    return (
        THERMAL_NOISE_DBM_PER_HZ
        + 10.0 * math.log10(params.rb_bandwidth_hz)
        + params.noise_figure_db
    )


def received_power_dbm(
    tx_power_dbm: float,
    tx_pos: tuple[float, float],
    rx_pos: tuple[float, float],
    params: ChannelParams,
    shadowing_db: float = 0.0,
) -> float:
    dist = math.hypot(tx_pos[0] - rx_pos[0], tx_pos[1] - rx_pos[1])
    return tx_power_dbm - path_loss_db(dist, params) - shadowing_db


def mean_sinr_db(per_rb_sinr_db: Sequence[float]) -> float:
    """Linear-domain average of per-RB SINR values, expressed in dB."""
    if not per_rb_sinr_db:
        raise ChannelError("cannot average an empty SINR list")
    mean_linear = sum(db_to_linear(v) for v in per_rb_sinr_db) / len(per_rb_sinr_db)
    return linear_to_db(mean_linear)


def cqi_from_sinr(mean_sinr: float, tables: CqiTables) -> int:
    """Largest CQI whose threshold the mean SINR meets; 0 below the lowest."""
    for k in range(15, 0, -1):
        if mean_sinr >= tables.sinr_thresholds_db[k - 1]:
            return k
    return 0


def decode(per_rb_sinr_db: Sequence[float], cqi_used: int, tables: CqiTables) -> bool:
    """True iff the linear-mean SINR meets the threshold of the CQI used.

    The comparison happens in the linear domain so that a transmission
    sitting exactly on its CQI threshold decodes (the dB round trip would
    lose that equality to rounding).
    """
    if not 1 <= cqi_used <= 15:
        raise ChannelError(f"cqi_used must be in 1..15, got {cqi_used}")
    if not per_rb_sinr_db:
        raise ChannelError("cannot decode over an empty SINR list")
    mean_linear = sum(db_to_linear(v) for v in per_rb_sinr_db) / len(per_rb_sinr_db)
    return mean_linear >= db_to_linear(tables.sinr_thresholds_db[cqi_used - 1])


def bits_per_rb(cqi: int, tables: CqiTables) -> int:
    if not 1 <= cqi <= 15:
        raise ChannelError(f"no transport block for CQI {cqi}")
    return tables.bits_per_rb[cqi - 1]


class ShadowingMap:
    """Log-normal shadowing, one symmetric draw per node pair per run.

    Draws pull from the run RNG on first use and are cached, so the value a
    pair sees does not depend on how often it is queried. The key is
    unordered: the channel is reciprocal.
    """

    def __init__(self, rng: random.Random, sigma_db: float, enabled: bool) -> None:
        self._rng = rng
        self._sigma = sigma_db
        self._enabled = enabled
        self._draws: dict[tuple[int, int], float] = {}

    def loss_db(self, node_a: int, node_b: int) -> float:
        if not self._enabled:
            return 0.0
        key = (node_a, node_b) if node_a <= node_b else (node_b, node_a)
        if key not in self._draws:
            self._draws[key] = self._rng.gauss(0.0, self._sigma)
        return self._draws[key]


class ChannelModel:
    """Binds propagation parameters to the binder's registry and ledger."""

    def __init__(
        self,
        binder: Binder,
        params: ChannelParams,
        tables: CqiTables,
        shadowing: Optional[ShadowingMap] = None,
    ) -> None:
        self.binder = binder
        self.params = params
        self.tables = tables
        self.shadowing = shadowing or ShadowingMap(random.Random(0), 0.0, enabled=False)

    def received_power_nodes(self, tx: NodeRecord, rx: NodeRecord) -> float:
        return received_power_dbm(
            tx.tx_power_dbm,
            tx.position,
            rx.position,
            self.params,
            self.shadowing.loss_db(tx.node_id, rx.node_id),
        )

    def rx_power_from_cell(self, ue_id: int, cell_id: int) -> float:
        """Power the UE receives from one eNB at current positions (dBm)."""
        return self.received_power_nodes(self.binder.node(cell_id), self.binder.node(ue_id))

    def _endpoints(
        self, ue: int, serving_cell: int, direction: Direction
    ) -> tuple[NodeRecord, NodeRecord]:
        ue_rec = self.binder.node(ue)
        cell_rec = self.binder.node(serving_cell)
        if direction == Direction.DL:
            return cell_rec, ue_rec
        return ue_rec, cell_rec

    def _interference_mw(
        self,
        occupants: dict[int, int],
        serving_cell: int,
        rx: NodeRecord,
        pair_cache: dict[int, float],
    ) -> float:
        total = 0.0
        for cell, tx_id in occupants.items():
            if cell == serving_cell:
                continue
            mw = pair_cache.get(tx_id)
            if mw is None:
                tx_rec = self.binder.node(tx_id)
                mw = db_to_linear(self.received_power_nodes(tx_rec, rx))
                pair_cache[tx_id] = mw
            total += mw
        return total

    def sinr(
        self,
        ue: int,
        serving_cell: int,
        tti: int,
        direction: Direction,
        rb_set: Iterable[int],
    ) -> list[float]:
        """Per-RB SINR (dB) for an allocated transmission.

        Every RB queried must be allocated to this transmission in the
        binder grid; the intercell interference on each RB comes from the
        co-channel transmitters the ledger reports for that RB.
        """
        tx, rx = self._endpoints(ue, serving_cell, direction)
        signal_mw = db_to_linear(self.received_power_nodes(tx, rx))
        n_mw = db_to_linear(noise_dbm(self.params))
        occupancy = self.binder.rb_occupancy(tti, direction)
        pair_cache: dict[int, float] = {}
        out = []
        for rb in sorted(set(rb_set)):
            occupants = occupancy.get(rb, {})
            if occupants.get(serving_cell) != tx.node_id:
                raise ChannelError(
                    f"RB {rb} of cell {serving_cell} ({direction.value}, TTI {tti}) "
                    f"is not allocated to node {tx.node_id}"
                )
            i_mw = self._interference_mw(occupants, serving_cell, rx, pair_cache)
            out.append(linear_to_db(signal_mw / (n_mw + i_mw)))
        return out

    def measure(
        self, ue: int, serving_cell: int, tti: int, direction: Direction
    ) -> ChannelReport:
        """Full-grid channel report against the allocation state of `tti`.

        Used for CQI: the serving link is evaluated on every RB of the grid
        whether or not it is allocated, with interference taken from the
        given (typically just-completed) TTI.
        """
        tx, rx = self._endpoints(ue, serving_cell, direction)
        signal_dbm = self.received_power_nodes(tx, rx)
        signal_mw = db_to_linear(signal_dbm)
        n_mw = db_to_linear(noise_dbm(self.params))
        baseline_db = linear_to_db(signal_mw / n_mw)
        per_rb = [baseline_db] * self.binder.num_rbs
        occupancy = self.binder.rb_occupancy(tti, direction)
        pair_cache: dict[int, float] = {}
        for rb, occupants in occupancy.items():
            i_mw = self._interference_mw(occupants, serving_cell, rx, pair_cache)
            if i_mw > 0.0:
                per_rb[rb] = linear_to_db(signal_mw / (n_mw + i_mw))
        mean_db = mean_sinr_db(per_rb)
        return ChannelReport(
            ue=ue,
            cell=serving_cell,
            rx_power_dbm=signal_dbm,
            per_rb_sinr_db=per_rb,
            mean_sinr_db=mean_db,
            cqi=cqi_from_sinr(mean_db, self.tables),
        )
