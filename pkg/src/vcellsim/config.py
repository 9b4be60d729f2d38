"""Scenario configuration: flat key=value files with strict validation.

The surface is a flat UTF-8 ``key = value`` format. Entity groups use
indexed prefixes (``enb[0].x_m``, ``flow[1].interval_ms``); per-vehicle
settings use ``car[<i>].`` where ``<i>`` is the vehicle's position in enter
order (ties broken by name), and ``car.default.`` supplies the value for
every vehicle without an override. Unknown and duplicate keys are hard
errors: a typo must never silently run the wrong experiment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .binder import DEFAULT_NUM_RBS, Direction
from .channel import CQI_BITS_PER_RB, CQI_SINR_THRESHOLDS_DB, ChannelParams, CqiTables
from .engine import ms_to_us, s_to_us
from .errors import ConfigError
from .mobility import AccidentSpec
from .rrc import HandoverConfig
from .traffic import BackhaulConfig, FlowSpec

SCHEDULERS = ("rr", "maxcqi")

DEFAULT_UE_TX_POWER_DBM = 26.0
DEFAULT_ENB_TX_POWER_DBM = 46.0


@dataclass(frozen=True)
class EnbConfig:
    name: str
    x: float
    y: float
    tx_power_dbm: float


@dataclass(frozen=True)
class CarOverride:
    master_id: Optional[int] = None
    tx_power_dbm: Optional[float] = None
    accident: Optional[AccidentSpec] = None


@dataclass(frozen=True)
class ScenarioConfig:
    sim_end_us: int
    seed: int
    num_rbs: int
    scheduler: str
    trace_file: Path
    dynamic_cell_association: bool
    association_metric: str
    handover: HandoverConfig
    backhaul: BackhaulConfig
    channel: ChannelParams
    tables: CqiTables
    ue_tx_power_dbm: float
    default_master_id: Optional[int]
    enbs: tuple[EnbConfig, ...]
    cars: dict[int, CarOverride] = field(default_factory=dict)
    flows: tuple[FlowSpec, ...] = ()


class _KeyTable:
    """Raw key/value pairs with line numbers and used-key tracking."""

    def __init__(self, text: str) -> None:
        self.pairs: dict[str, tuple[str, int]] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#") or stripped.startswith(";"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, _, value = stripped.partition("=")
            key = key.strip()
            value = value.strip()
            if not key:
                raise ConfigError(f"line {lineno}: empty key")
            if key in self.pairs:
                raise ConfigError(
                    f"line {lineno}: duplicate key {key!r} "
                    f"(first set on line {self.pairs[key][1]})"
                )
            self.pairs[key] = (value, lineno)
        self._used: set[str] = set()

    def take(self, key: str) -> Optional[tuple[str, int]]:
        if key in self.pairs:
            self._used.add(key)
            return self.pairs[key]
        return None

    def matching(self, pattern: re.Pattern) -> list[tuple[re.Match, str, int]]:
        out = []
        for key, (value, lineno) in self.pairs.items():
            m = pattern.fullmatch(key)
            if m:
                self._used.add(key)
                out.append((m, value, lineno))
        return out

    def reject_unused(self) -> None:
        unused = [(ln, k) for k, (_, ln) in self.pairs.items() if k not in self._used]
        if unused:
            ln, key = min(unused)
            raise ConfigError(f"line {ln}: unknown key {key!r}")


def _as_int(value: str, lineno: int, key: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} expects an integer, got {value!r}") from None


def _as_float(value: str, lineno: int, key: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} expects a number, got {value!r}") from None


def _as_bool(value: str, lineno: int, key: str) -> bool:
    if value == "true":
        return True
    if value == "false":
        return False
    raise ConfigError(f"line {lineno}: {key} expects true or false, got {value!r}")


def _as_float_list(value: str, lineno: int, key: str) -> tuple[float, ...]:
    return tuple(_as_float(p.strip(), lineno, key) for p in value.split(","))


def _as_int_list(value: str, lineno: int, key: str) -> tuple[int, ...]:
    return tuple(_as_int(p.strip(), lineno, key) for p in value.split(","))


def _scalar(table, key, parser, default):
    hit = table.take(key)
    if hit is None:
        return default
    value, lineno = hit
    return parser(value, lineno, key)


_ENB_KEY = re.compile(r"enb\[(\d+)\]\.(name|x_m|y_m|tx_power_dbm)")
_CAR_KEY = re.compile(
    r"car\[(\d+)\]\.(master_id|tx_power_dbm|accident\.count|accident\.start_s|accident\.duration_s)"
)
_FLOW_KEY = re.compile(
    r"flow\[(\d+)\]\.(direction|target|packet_bits|interval_ms|start_s|stop_s)"
)


def _contiguous(indices: set[int], what: str) -> list[int]:
    ordered = sorted(indices)
    if ordered != list(range(len(ordered))):
        raise ConfigError(f"{what} indices must be contiguous from 0, got {ordered}")
    return ordered


def _collect_enbs(table: _KeyTable, default_power: float) -> tuple[EnbConfig, ...]:
    fields: dict[int, dict[str, tuple[str, int]]] = {}
    for m, value, lineno in table.matching(_ENB_KEY):
        fields.setdefault(int(m.group(1)), {})[m.group(2)] = (value, lineno)
    if not fields:
        raise ConfigError("missing required key: at least one enb[<i>].x_m/y_m block")
    enbs = []
    for i in _contiguous(set(fields), "enb"):
        entry = fields[i]
        for required in ("x_m", "y_m"):
            if required not in entry:
                raise ConfigError(f"missing required key enb[{i}].{required}")
        name = entry["name"][0] if "name" in entry else f"enb{i}"
        x = _as_float(*entry["x_m"], key=f"enb[{i}].x_m")
        y = _as_float(*entry["y_m"], key=f"enb[{i}].y_m")
        power = (
            _as_float(*entry["tx_power_dbm"], key=f"enb[{i}].tx_power_dbm")
            if "tx_power_dbm" in entry
            else default_power
        )
        enbs.append(EnbConfig(name=name, x=x, y=y, tx_power_dbm=power))
    names = [e.name for e in enbs]
    if len(set(names)) != len(names):
        raise ConfigError(f"enb names must be unique, got {names}")
    return tuple(enbs)


def _build_accident(entry: dict[str, tuple[str, int]], i: int) -> Optional[AccidentSpec]:
    count_field = entry.get("accident.count")
    if count_field is None:
        if any(k.startswith("accident.") for k in entry):
            raise ConfigError(f"car[{i}]: accident.start_s/duration_s need accident.count")
        return None
    count = _as_int(*count_field, key=f"car[{i}].accident.count")
    if count == 0:
        return None
    if count != 1:
        raise ConfigError(f"car[{i}]: accident.count must be 0 or 1, got {count}")
    for required in ("accident.start_s", "accident.duration_s"):
        if required not in entry:
            raise ConfigError(f"missing required key car[{i}].{required}")
    start = _as_float(*entry["accident.start_s"], key=f"car[{i}].accident.start_s")
    duration = _as_float(*entry["accident.duration_s"], key=f"car[{i}].accident.duration_s")
    try:
        return AccidentSpec(count, s_to_us(start), s_to_us(duration))
    except ValueError as exc:
        raise ConfigError(f"car[{i}]: {exc}") from None


def _collect_cars(table: _KeyTable, n_enbs: int) -> dict[int, CarOverride]:
    fields: dict[int, dict[str, tuple[str, int]]] = {}
    for m, value, lineno in table.matching(_CAR_KEY):
        fields.setdefault(int(m.group(1)), {})[m.group(2)] = (value, lineno)
    cars = {}
    for i, entry in sorted(fields.items()):
        master = None
        if "master_id" in entry:
            master = _as_int(*entry["master_id"], key=f"car[{i}].master_id")
            if not 0 <= master < n_enbs:
                raise ConfigError(
                    f"car[{i}].master_id = {master} does not reference a declared enb"
                )
        power = (
            _as_float(*entry["tx_power_dbm"], key=f"car[{i}].tx_power_dbm")
            if "tx_power_dbm" in entry
            else None
        )
        cars[i] = CarOverride(
            master_id=master, tx_power_dbm=power, accident=_build_accident(entry, i)
        )
    return cars


def _collect_flows(table: _KeyTable) -> tuple[FlowSpec, ...]:
    fields: dict[int, dict[str, tuple[str, int]]] = {}
    for m, value, lineno in table.matching(_FLOW_KEY):
        fields.setdefault(int(m.group(1)), {})[m.group(2)] = (value, lineno)
    flows = []
    for i in _contiguous(set(fields), "flow"):
        entry = fields[i]
        for required in ("direction", "target", "packet_bits", "interval_ms", "start_s", "stop_s"):
            if required not in entry:
                raise ConfigError(f"missing required key flow[{i}].{required}")
        raw_dir, dir_line = entry["direction"]
        if raw_dir not in ("dl", "ul"):
            raise ConfigError(f"line {dir_line}: flow[{i}].direction expects dl or ul")
        direction = Direction.DL if raw_dir == "dl" else Direction.UL
        try:
            flows.append(
                FlowSpec(
                    name=f"flow{i}",
                    direction=direction,
                    target=entry["target"][0],
                    packet_bits=_as_int(*entry["packet_bits"], key=f"flow[{i}].packet_bits"),
                    interval_us=ms_to_us(
                        _as_float(*entry["interval_ms"], key=f"flow[{i}].interval_ms")
                    ),
                    start_us=s_to_us(_as_float(*entry["start_s"], key=f"flow[{i}].start_s")),
                    stop_us=s_to_us(_as_float(*entry["stop_s"], key=f"flow[{i}].stop_s")),
                )
            )
        except ValueError as exc:
            raise ConfigError(f"flow[{i}]: {exc}") from None
    return tuple(flows)


def parse_config_text(text: str, base_dir: Path) -> ScenarioConfig:
    table = _KeyTable(text)

    sim_end_s = _scalar(table, "sim_end_s", _as_float, 10.0)
    if sim_end_s < 0:
        raise ConfigError("sim_end_s must be non-negative")
    seed = _scalar(table, "seed", _as_int, 1)
    num_rbs = _scalar(table, "num_rbs", _as_int, DEFAULT_NUM_RBS)
    if num_rbs <= 0:
        raise ConfigError("num_rbs must be positive")

    scheduler_hit = table.take("scheduler")
    scheduler = scheduler_hit[0] if scheduler_hit else "rr"
    if scheduler not in SCHEDULERS:
        where = f"line {scheduler_hit[1]}: " if scheduler_hit else ""
        raise ConfigError(f"{where}scheduler must be one of {SCHEDULERS}, got {scheduler!r}")

    trace_hit = table.take("trace_file")
    if trace_hit is None:
        raise ConfigError("missing required key trace_file")
    trace_file = Path(trace_hit[0])
    if not trace_file.is_absolute():
        trace_file = base_dir / trace_file
    if not trace_file.is_file():
        raise ConfigError(f"trace_file {trace_file} does not exist")

    dynamic = _scalar(table, "dynamic_cell_association", _as_bool, False)
    metric_hit = table.take("association_metric")
    association_metric = metric_hit[0] if metric_hit else "rx_power"
    if association_metric not in ("rx_power", "sinr"):
        where = f"line {metric_hit[1]}: " if metric_hit else ""
        raise ConfigError(
            f"{where}association_metric must be rx_power or sinr, got {association_metric!r}"
        )
    try:
        handover = HandoverConfig(
            enabled=_scalar(table, "enable_handover", _as_bool, False),
            hysteresis_db=_scalar(table, "handover.hysteresis_db", _as_float, 3.0),
            time_to_trigger_us=ms_to_us(
                _scalar(table, "handover.time_to_trigger_ms", _as_float, 256.0)
            ),
        )
        backhaul = BackhaulConfig(
            one_way_delay_us=ms_to_us(_scalar(table, "backhaul.delay_ms", _as_float, 1.0))
        )
        channel = ChannelParams(
            pathloss_a_db=_scalar(table, "channel.pathloss_a_db", _as_float, 128.1),
            pathloss_b_db=_scalar(table, "channel.pathloss_b_db", _as_float, 37.6),
            min_distance_m=_scalar(table, "channel.min_distance_m", _as_float, 35.0),
            noise_figure_db=_scalar(table, "channel.noise_figure_db", _as_float, 9.0),
            rb_bandwidth_hz=_scalar(table, "channel.rb_bandwidth_hz", _as_float, 180e3),
            shadowing_enabled=_scalar(table, "channel.shadowing", _as_bool, False),
            shadowing_sigma_db=_scalar(table, "channel.shadowing_sigma_db", _as_float, 8.0),
        )
        tables = CqiTables(
            sinr_thresholds_db=_scalar(
                table, "channel.cqi_thresholds_db", _as_float_list, CQI_SINR_THRESHOLDS_DB
            ),
            bits_per_rb=_scalar(table, "channel.bits_per_rb", _as_int_list, CQI_BITS_PER_RB),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    ue_power = _scalar(table, "channel.ue_tx_power_dbm", _as_float, DEFAULT_UE_TX_POWER_DBM)
    enb_power = _scalar(table, "channel.enb_tx_power_dbm", _as_float, DEFAULT_ENB_TX_POWER_DBM)
    default_master = _scalar(table, "car.default.master_id", _as_int, None)
    default_car_power = _scalar(table, "car.default.tx_power_dbm", _as_float, ue_power)

    enbs = _collect_enbs(table, enb_power)
    if default_master is not None and not 0 <= default_master < len(enbs):
        raise ConfigError(
            f"car.default.master_id = {default_master} does not reference a declared enb"
        )
    cars = _collect_cars(table, len(enbs))
    flows = _collect_flows(table)

    table.reject_unused()

    return ScenarioConfig(
        sim_end_us=s_to_us(sim_end_s),
        seed=seed,
        num_rbs=num_rbs,
        scheduler=scheduler,
        trace_file=trace_file,
        dynamic_cell_association=dynamic,
        association_metric=association_metric,
        handover=handover,
        backhaul=backhaul,
        channel=channel,
        tables=tables,
        ue_tx_power_dbm=default_car_power,
        default_master_id=default_master,
        enbs=enbs,
        cars=cars,
        flows=flows,
    )


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, path.parent)


def dump_defaults() -> str:
    """Canonical config text carrying every default explicitly.

    Loading the dumped text (with a trace.csv next to it) reproduces the
    same resolved configuration.
    """
    thresholds = ", ".join(repr(v) for v in CQI_SINR_THRESHOLDS_DB)
    bits = ", ".join(str(v) for v in CQI_BITS_PER_RB)
    return f"""# vcellsim scenario defaults
sim_end_s = 10.0
seed = 1
num_rbs = {DEFAULT_NUM_RBS}
scheduler = rr
trace_file = trace.csv

dynamic_cell_association = false
association_metric = rx_power
enable_handover = false
handover.hysteresis_db = 3.0
handover.time_to_trigger_ms = 256.0
backhaul.delay_ms = 1.0

channel.pathloss_a_db = 128.1
channel.pathloss_b_db = 37.6
channel.min_distance_m = 35.0
channel.noise_figure_db = 9.0
channel.rb_bandwidth_hz = 180000.0
channel.shadowing = false
channel.shadowing_sigma_db = 8.0
channel.cqi_thresholds_db = {thresholds}
channel.bits_per_rb = {bits}
channel.ue_tx_power_dbm = {DEFAULT_UE_TX_POWER_DBM}
channel.enb_tx_power_dbm = {DEFAULT_ENB_TX_POWER_DBM}

# manual association target used while dynamic_cell_association is false
car.default.master_id = 0

enb[0].name = enb0
enb[0].x_m = 0.0
enb[0].y_m = 0.0
enb[0].tx_power_dbm = {DEFAULT_ENB_TX_POWER_DBM}
"""
