"""Scenario wiring and the per-TTI pipeline.

The TTI tick is the heartbeat: each slot runs mobility update, handover
evaluation, CQI measurement against the previous slot's interference,
scheduling, grid recording (so overlapping cells see each other), decode,
and finally handover execution at the slot boundary. Vehicle enter/leave
and packet arrivals fire between ticks in deterministic order.
"""

from __future__ import annotations

import random
import time

from .binder import Binder, Direction, NodeKind
from .channel import ChannelModel, ShadowingMap
from .config import ScenarioConfig
from .engine import TTI_US, Engine, EventKind, SimEvent, us_to_s
from .errors import ConfigError
from .mac import Mac
from .metrics import CellStats, MetricsReport, VehicleStats, write_outputs
from .mobility import Trajectory, apply_accident, lifecycle_events, load_trace, position_at
from .rrc import AssociationMode, AssociationPolicy, HandoverDecision, Rrc
from .traffic import Packet, backhaul_deliver, expand_flows, generate_flow_events

__all__ = ["Scenario", "run_scenario", "write_outputs"]


class Scenario:
    def __init__(self, config: ScenarioConfig) -> None:
        self.config = config
        self.engine = Engine()
        self.binder = Binder(config.num_rbs)
        self.rng = random.Random(config.seed)
        shadowing = ShadowingMap(
            self.rng, config.channel.shadowing_sigma_db, config.channel.shadowing_enabled
        )
        self.channel = ChannelModel(self.binder, config.channel, config.tables, shadowing)
        self.mac = Mac(self.binder)
        self.rrc = Rrc(
            self.binder, self.channel, config.handover, config.association_metric
        )

        self.cell_ids: list[int] = []
        self.cell_names: dict[int, str] = {}
        for enb in config.enbs:
            rec = self.binder.register_node(
                NodeKind.ENB, enb.name, enb.tx_power_dbm, (enb.x, enb.y)
            )
            self.cell_ids.append(rec.node_id)
            self.cell_names[rec.node_id] = enb.name

        self._load_vehicles()

        self.node_of: dict[str, int] = {}
        self.name_of: dict[int, str] = {}
        self.cqi_dl: dict[int, int] = {}
        self.cqi_ul: dict[int, int] = {}
        self.n_ttis = 0
        self.log: list[str] = []
        self._cell_stats = {name: CellStats(name) for name in self.cell_names.values()}

        self._schedule_initial_events()

        self.engine.on(EventKind.VEHICLE_ENTER, self._on_enter)
        self.engine.on(EventKind.VEHICLE_LEAVE, self._on_leave)
        self.engine.on(EventKind.PACKET_ARRIVAL, self._on_packet_arrival)
        self.engine.on(EventKind.BACKHAUL_DELIVERY, self._on_backhaul_delivery)
        self.engine.on(EventKind.TTI_TICK, self._on_tick)
        self.engine.on(EventKind.SIM_END, self._on_sim_end)

    # ------------------------------------------------------------------
    # setup

    def _load_vehicles(self) -> None:
        config = self.config
        trajectories = load_trace(config.trace_file)
        roster = sorted(trajectories, key=lambda t: (t.enter_us, t.vehicle_name))
        for i in config.cars:
            if i >= len(roster):
                raise ConfigError(
                    f"car[{i}] is configured but the trace defines only "
                    f"{len(roster)} vehicles"
                )

        self.trajs: dict[str, Trajectory] = {}
        self.policies: dict[str, AssociationPolicy] = {}
        self.ue_power: dict[str, float] = {}
        self.stats: dict[str, VehicleStats] = {}
        for i, traj in enumerate(roster):
            override = config.cars.get(i)
            if override is not None and override.accident is not None:
                traj = apply_accident(traj, override.accident)
            name = traj.vehicle_name
            master = None
            if override is not None and override.master_id is not None:
                master = override.master_id
            elif config.default_master_id is not None:
                master = config.default_master_id
            if config.dynamic_cell_association:
                policy = AssociationPolicy(AssociationMode.DYNAMIC)
            elif master is not None:
                policy = AssociationPolicy(
                    AssociationMode.MANUAL, manual_cell=self.cell_ids[master]
                )
            else:
                raise ConfigError(
                    f"car[{i}] ({name}) has no master_id and "
                    f"dynamic_cell_association is false"
                )
            power = config.ue_tx_power_dbm
            if override is not None and override.tx_power_dbm is not None:
                power = override.tx_power_dbm
            self.trajs[name] = traj
            self.policies[name] = policy
            self.ue_power[name] = power
            self.stats[name] = VehicleStats(name, traj.enter_us, traj.leave_us)

    def _schedule_initial_events(self) -> None:
        config = self.config
        for event in lifecycle_events(self.trajs.values()):
            if event.fire_time <= config.sim_end_us:
                self.engine.schedule(event)
        flows = expand_flows(list(config.flows), list(self.trajs))
        for flow in flows:
            if flow.target not in self.trajs:
                raise ConfigError(
                    f"flow {flow.name} targets unknown vehicle {flow.target!r}"
                )
            for event in generate_flow_events(flow):
                if event.fire_time <= config.sim_end_us:
                    self.engine.schedule(event)
        self.engine.schedule_at(config.sim_end_us, EventKind.SIM_END)
        # the first tick goes in last so same-time ENTER/arrival events precede it
        if config.sim_end_us > 0:
            self.engine.schedule_at(0, EventKind.TTI_TICK, 0)

    def _logline(self, text: str) -> None:
        self.log.append(f"{us_to_s(self.engine.now):.6f} {text}")

    # ------------------------------------------------------------------
    # event handlers

    def _on_enter(self, event: SimEvent) -> None:
        name = event.payload
        traj = self.trajs[name]
        pos = position_at(traj, self.engine.now)
        rec = self.binder.register_node(NodeKind.UE, name, self.ue_power[name], pos)
        self.node_of[name] = rec.node_id
        self.name_of[rec.node_id] = name
        cell = self.rrc.initial_association(rec.node_id, self.policies[name])
        cell_name = self.cell_names[cell]
        stats = self.stats[name]
        stats.first_cell = cell_name
        stats.timeline.append((self.engine.now, cell_name))
        self._logline(f"ENTER {name}")
        self._logline(f"ATTACH {name} cell={cell_name}")

    def _on_leave(self, event: SimEvent) -> None:
        name = event.payload
        node = self.node_of.pop(name)
        del self.name_of[node]
        dl_bits, ul_bits = self.mac.clear_node(node)
        self.stats[name].residual_bits += dl_bits + ul_bits
        self.rrc.forget(node)
        self.binder.deregister_node(node)
        self.cqi_dl.pop(node, None)
        self.cqi_ul.pop(node, None)
        self._logline(f"LEAVE {name} residual_bits={dl_bits + ul_bits}")

    def _on_packet_arrival(self, event: SimEvent) -> None:
        packet: Packet = event.payload
        stats = self.stats[packet.vehicle]
        stats.offered_bits += packet.size_bits
        node = self.node_of.get(packet.vehicle)
        if node is None:
            stats.lost_core_bits += packet.size_bits
            return
        if packet.direction == Direction.DL:
            serving = self.binder.node(node).serving_cell
            if serving is None:
                stats.lost_core_bits += packet.size_bits
                return
            self.engine.schedule(
                backhaul_deliver(packet, serving, self.config.backhaul, self.engine.now)
            )
            stats.backhaul_inflight_bits += packet.size_bits
        else:
            accepted = self.mac.enqueue(
                node,
                Direction.UL,
                packet.packet_id,
                packet.size_bits,
                self.engine.now,
                created_us=packet.created_us,
            )
            if not accepted:
                stats.dropped_radio_bits += packet.size_bits

    def _on_backhaul_delivery(self, event: SimEvent) -> None:
        packet, _sent_via = event.payload
        stats = self.stats[packet.vehicle]
        stats.backhaul_inflight_bits -= packet.size_bits
        node = self.node_of.get(packet.vehicle)
        if node is None:
            stats.lost_core_bits += packet.size_bits
            return
        accepted = self.mac.enqueue(
            node,
            Direction.DL,
            packet.packet_id,
            packet.size_bits,
            self.engine.now,
            created_us=packet.created_us,
        )
        if not accepted:
            stats.dropped_radio_bits += packet.size_bits

    def _on_sim_end(self, event: SimEvent) -> None:
        self._logline("SIM_END")

    def _live_ues(self) -> list[int]:
        return sorted(self.name_of)

    def _on_tick(self, event: SimEvent) -> None:
        now = self.engine.now
        tti = now // TTI_US
        self.binder.advance_tti(tti)
        self.n_ttis += 1

        for node in self._live_ues():
            traj = self.trajs[self.name_of[node]]
            x, y = position_at(traj, now)
            self.binder.set_position(node, x, y)

        decisions: list[HandoverDecision] = []
        if self.config.handover.enabled:
            for node in self._live_ues():
                decision = self.rrc.handover_check(node, now)
                if decision is not None:
                    decisions.append(decision)

        prev_tti = tti - 1
        for node in self._live_ues():
            serving = self.binder.node(node).serving_cell
            self.cqi_dl[node] = self.channel.measure(node, serving, prev_tti, Direction.DL).cqi
            self.cqi_ul[node] = self.channel.measure(node, serving, prev_tti, Direction.UL).cqi

        attached: dict[int, list[int]] = {cell: [] for cell in self.cell_ids}
        for node in self._live_ues():
            attached[self.binder.node(node).serving_cell].append(node)

        schedule = (
            self.mac.schedule_tti_rr
            if self.config.scheduler == "rr"
            else self.mac.schedule_tti_maxcqi
        )
        allocations = []
        for cell in self.cell_ids:
            for direction in (Direction.DL, Direction.UL):
                cqi_map = self.cqi_dl if direction == Direction.DL else self.cqi_ul
                ues = [(node, cqi_map[node]) for node in attached[cell]]
                alloc = schedule(cell, tti, direction, ues, self.channel.tables)
                if not alloc.grants:
                    continue
                for ue in sorted(alloc.grants):
                    transmitter = cell if direction == Direction.DL else ue
                    self.binder.record_allocation(
                        tti, direction, cell, alloc.grants[ue].rb_set, transmitter
                    )
                cell_stats = self._cell_stats[self.cell_names[cell]]
                cell_stats.rb_allocated[direction] += alloc.rb_count()
                cell_stats.ues_scheduled[direction] += len(alloc.grants)
                allocations.append(alloc)

        ul_extra_latency = self.config.backhaul.one_way_delay_us
        for alloc in allocations:
            outcome = self.mac.transmit(alloc, self.channel, self.binder)
            for ue in sorted(outcome.grant_outcomes):
                result = outcome.grant_outcomes[ue]
                stats = self.stats[self.name_of[ue]]
                for pkt in result.delivered:
                    latency = pkt.latency_us
                    if alloc.direction == Direction.UL:
                        latency += ul_extra_latency
                    stats.record_delivery(pkt.size_bits, latency)
                stats.dropped_radio_bits += result.dropped_bits

        for decision in decisions:
            dropped = self.rrc.execute_handover(decision, self.mac)
            if dropped is None:
                continue
            name = self.name_of[decision.ue]
            stats = self.stats[name]
            stats.dropped_handover_bits += dropped
            stats.handovers += 1
            target_name = self.cell_names[decision.target]
            stats.timeline.append((now, target_name))
            self._logline(
                f"HANDOVER {name} {self.cell_names[decision.source]}->{target_name}"
            )

        next_tick = now + TTI_US
        if next_tick < self.config.sim_end_us:
            self.engine.schedule_at(next_tick, EventKind.TTI_TICK, tti + 1)

    # ------------------------------------------------------------------
    # run

    def run(self) -> MetricsReport:
        started = time.perf_counter()
        summary = self.engine.run_until(self.config.sim_end_us)
        wall_ms = round((time.perf_counter() - started) * 1000)

        for name in list(self.node_of):
            node = self.node_of[name]
            dl_bits, ul_bits = self.mac.clear_node(node)
            self.stats[name].residual_bits += dl_bits + ul_bits
        for stats in self.stats.values():
            stats.residual_bits += stats.backhaul_inflight_bits
            stats.backhaul_inflight_bits = 0

        for cell_stats in self._cell_stats.values():
            cell_stats.rb_capacity = self.config.num_rbs * self.n_ttis

        report = MetricsReport(
            seed=self.config.seed,
            sim_end_us=self.config.sim_end_us,
            events_processed=summary.total,
            wall_ms=wall_ms,
            vehicles=self.stats,
            cells=self._cell_stats,
            event_log=self.log,
        )
        report.verify_conservation()
        return report


def run_scenario(config: ScenarioConfig) -> MetricsReport:
    return Scenario(config).run()
