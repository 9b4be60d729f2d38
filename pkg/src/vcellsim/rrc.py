"""Control plane: initial cell association and A3-style handover.

A vehicle attaches when it enters the simulation, either to the cell it
receives most strongly (dynamic association) or to a manually configured
cell regardless of position. Received power is the default association
metric; mean downlink SINR against the current interference picture can be
selected instead for experimentation. While attached, a neighbor that exceeds the
serving cell's received power by more than the hysteresis margin for the
whole time-to-trigger window causes a handover: the old cell's downlink
buffer toward the UE is flushed (counted as handover-dropped) and the UE is
schedulable in the target from the next TTI.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .binder import Binder, Direction, NodeKind
from .channel import ChannelModel
from .errors import AssociationError
from .mac import Mac


class AssociationMode(Enum):
    DYNAMIC = "DYNAMIC"
    MANUAL = "MANUAL"


@dataclass(frozen=True)
class AssociationPolicy:
    mode: AssociationMode
    manual_cell: Optional[int] = None

    def __post_init__(self) -> None:
        if self.mode == AssociationMode.MANUAL and self.manual_cell is None:
            raise ValueError("MANUAL association requires a target cell")


@dataclass(frozen=True)
class HandoverConfig:
    enabled: bool = False
    hysteresis_db: float = 3.0
    time_to_trigger_us: int = 256_000

    def __post_init__(self) -> None:
        if self.hysteresis_db < 0:
            raise ValueError("hysteresis must be non-negative")
        if self.time_to_trigger_us < 0:
            raise ValueError("time-to-trigger must be non-negative")


@dataclass
class HandoverState:
    candidate: Optional[int] = None
    condition_since_us: Optional[int] = None


@dataclass(frozen=True)
class HandoverDecision:
    ue: int
    source: int
    target: int
    decided_us: int


class Rrc:
    def __init__(
        self,
        binder: Binder,
        channel: ChannelModel,
        config: HandoverConfig,
        association_metric: str = "rx_power",
    ) -> None:
        if association_metric not in ("rx_power", "sinr"):
            raise ValueError(f"unknown association metric {association_metric!r}")
        self.binder = binder
        self.channel = channel
        self.config = config
        self.association_metric = association_metric
        self._states: dict[int, HandoverState] = {}

    def _cell_powers(self, ue: int) -> list[tuple[int, float]]:
        cells = self.binder.live_nodes(NodeKind.ENB)
        if not cells:
            raise AssociationError("no eNB is registered")
        return [(c.node_id, self.channel.rx_power_from_cell(ue, c.node_id)) for c in cells]

    def _association_scores(self, ue: int) -> list[tuple[int, float]]:
        if self.association_metric == "rx_power":
            return self._cell_powers(ue)
        cells = self.binder.live_nodes(NodeKind.ENB)
        if not cells:
            raise AssociationError("no eNB is registered")
        tti = self.binder.current_tti
        return [
            (c.node_id, self.channel.measure(ue, c.node_id, tti, Direction.DL).mean_sinr_db)
            for c in cells
        ]

    def initial_association(self, ue: int, policy: AssociationPolicy) -> int:
        """Attach the UE and return its serving cell id."""
        if policy.mode == AssociationMode.MANUAL:
            cell = policy.manual_cell
            rec = self.binder.node(cell) if self.binder.is_live(cell) else None
            if rec is None or rec.kind != NodeKind.ENB:
                raise AssociationError(f"manual association target {cell} is not a live eNB")
            self.binder.set_serving_cell(ue, cell)
            return cell
        best_cell = None
        best_score = None
        for cell_id, score in self._association_scores(ue):
            if best_score is None or score > best_score:
                best_cell, best_score = cell_id, score
        self.binder.set_serving_cell(ue, best_cell)
        return best_cell

    def handover_check(self, ue: int, now_us: int) -> Optional[HandoverDecision]:
        """A3-style evaluation at current positions; None when nothing triggers."""
        if not self.config.enabled:
            return None
        serving = self.binder.node(ue).serving_cell
        if serving is None:
            return None
        powers = dict(self._cell_powers(ue))
        if serving not in powers or len(powers) < 2:
            return None
        best_cell = None
        best_power = None
        for cell_id in sorted(powers):
            if cell_id == serving:
                continue
            if best_power is None or powers[cell_id] > best_power:
                best_cell, best_power = cell_id, powers[cell_id]
        if best_power - powers[serving] <= self.config.hysteresis_db:
            self._states.pop(ue, None)  # condition lapsed
            return None
        state = self._states.get(ue)
        if state is None or state.candidate != best_cell:
            state = HandoverState(candidate=best_cell, condition_since_us=now_us)
            self._states[ue] = state
        if now_us - state.condition_since_us >= self.config.time_to_trigger_us:
            self._states.pop(ue, None)
            return HandoverDecision(ue=ue, source=serving, target=best_cell, decided_us=now_us)
        return None

    def execute_handover(self, decision: HandoverDecision, mac: Mac) -> Optional[int]:
        """Switch the serving cell; returns DL bits flushed, None if aborted.

        Aborts (and resets trigger state) when the target disappeared
        between decision and execution.
        """
        if not self.binder.is_live(decision.target):
            self._states.pop(decision.ue, None)
            return None
        if not self.binder.is_live(decision.ue):
            return None
        dropped = mac.clear_dl_buffer(decision.ue)
        self.binder.set_serving_cell(decision.ue, decision.target)
        return dropped

    def forget(self, ue: int) -> None:
        self._states.pop(ue, None)
