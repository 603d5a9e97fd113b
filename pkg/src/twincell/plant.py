"""Deterministic discrete-event simulation of the modular production cell.

The plant is a pure-transition state machine over virtual time in integer
milliseconds. Sensors are never stored: every published signal is derived
from geometry and actuator state, so sensor consistency holds by
construction and signal changes fall out of snapshot diffs.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Iterable

from .errors import (
    EntranceOccupied,
    InvalidFaultTime,
    NoWorkpieceAtReadyPosition,
    UnknownTarget,
)

SUBSTEP_MS = 100

# Every signal value is a bool, number or string; "" means "nothing read".
SignalValue = bool | int | float | str


@dataclass
class SignalChange:
    """One raw signal transition, timestamped in virtual ms."""

    address: str
    old_value: SignalValue
    new_value: SignalValue
    at: int


@dataclass
class SimClock:
    """Virtual clock; advanced only by explicit stepping."""

    now: int = 0


@dataclass
class Workpiece:
    id: str
    station: str | None = None          # conveyor the piece sits on
    offset: float = 0.0                 # meters along the belt
    on_agv: str | None = None
    buffer: str | None = None           # off-system location after handover
    held: bool = False
    stuck: bool = False
    cleared_for_processing: bool = True


@dataclass
class ConveyorStation:
    id: str
    belt_length: float = 1.0
    belt_speed: float = 0.2             # m/s; 1 m belt traverses in 5 s
    belt_state: str = "stopped"         # stopped | forward | backward
    belt_timer_ms: int = 0              # remaining run time
    next_agent: str = ""
    rfid_check_delay_ms: int = 1000
    rfid_tag: str = ""                  # last read workpiece id
    rfid_check: str = ""                # "" | cleared | rejected
    sensor_dropouts: set[str] = field(default_factory=set)
    # (due_at, signal tag, value) internal timed effects, e.g. RFID checks
    pending_effects: list[tuple[int, str, SignalValue]] = field(default_factory=list)

    ENTRANCE_WINDOW = 0.05
    READY_WINDOW = 0.05

    def in_entrance_window(self, offset: float) -> bool:
        return 0.0 <= offset <= self.ENTRANCE_WINDOW

    def in_ready_window(self, offset: float) -> bool:
        return self.belt_length - self.READY_WINDOW <= offset <= self.belt_length


@dataclass
class AgvUnit:
    id: str
    location: str = ""                  # station id or "in_transit"
    destination: str = ""
    cargo: str | None = None            # workpiece id
    transit_timer_ms: int = 0
    hop_time_ms: int = 8000


@dataclass
class FaultSpec:
    kind: str                           # stuck_workpiece | sensor_dropout | custom
    target: str                         # workpiece id or "station.sensor"
    at: int
    detail: str = ""


@dataclass
class PlantState:
    clock: SimClock = field(default_factory=SimClock)
    stations: dict[str, ConveyorStation] = field(default_factory=dict)
    agvs: dict[str, AgvUnit] = field(default_factory=dict)
    workpieces: dict[str, Workpiece] = field(default_factory=dict)
    pending_faults: list[FaultSpec] = field(default_factory=list)

    def copy(self) -> "PlantState":
        return copy.deepcopy(self)


def _pieces_on(plant: PlantState, station_id: str) -> list[Workpiece]:
    return [w for w in plant.workpieces.values() if w.station == station_id]


def read_signals(plant: PlantState) -> dict[str, SignalValue]:
    """Flat map of fully-qualified signal addresses to current values.

    Pure: derives sensor booleans from workpiece geometry each call, with
    dropout faults pinning the affected sensor to False.
    """
    signals: dict[str, SignalValue] = {}
    for st in sorted(plant.stations.values(), key=lambda s: s.id):
        pieces = _pieces_on(plant, st.id)
        entrance = any(st.in_entrance_window(w.offset) for w in pieces)
        ready = any(st.in_ready_window(w.offset) for w in pieces)
        held = any(w.held for w in pieces)
        if "BG56" in st.sensor_dropouts:
            entrance = False
        if "BG51" in st.sensor_dropouts:
            ready = False
        signals[f"{st.id}.BG56.detected"] = entrance
        signals[f"{st.id}.BG51.detected"] = ready
        signals[f"{st.id}.H1.engaged"] = held
        signals[f"{st.id}.TF81.tag"] = st.rfid_tag
        signals[f"{st.id}.TF81.check"] = st.rfid_check
        signals[f"{st.id}.C1.state"] = st.belt_state
    for agv in sorted(plant.agvs.values(), key=lambda a: a.id):
        signals[f"{agv.id}.location"] = agv.location
        signals[f"{agv.id}.cargo"] = agv.cargo or ""
    return signals


def _diff(before: dict[str, SignalValue], after: dict[str, SignalValue],
          at: int) -> list[SignalChange]:
    changes = []
    for address in sorted(set(before) | set(after)):
        old, new = before.get(address), after.get(address)
        if old != new:
            changes.append(SignalChange(address, old, new, at))
    return changes


def _apply_due_faults(plant: PlantState) -> None:
    now = plant.clock.now
    still_pending = []
    for fault in plant.pending_faults:
        if fault.at > now:
            still_pending.append(fault)
        elif fault.kind == "stuck_workpiece":
            # Target may spawn after the fault time; stay pending until then.
            piece = plant.workpieces.get(fault.target)
            if piece is None:
                still_pending.append(fault)
            else:
                piece.stuck = True
        elif fault.kind == "sensor_dropout":
            station_id, sensor = fault.target.split(".", 1)
            plant.stations[station_id].sensor_dropouts.add(sensor)
        # custom faults carry no built-in semantics
    plant.pending_faults = still_pending


def _apply_due_effects(plant: PlantState) -> None:
    now = plant.clock.now
    for st in plant.stations.values():
        due = [e for e in st.pending_effects if e[0] <= now]
        st.pending_effects = [e for e in st.pending_effects if e[0] > now]
        for _, tag, value in due:
            if tag == "rfid_check":
                st.rfid_check = str(value)


def _move_belt_pieces(plant: PlantState, st: ConveyorStation, dt_ms: int) -> None:
    run_ms = min(dt_ms, st.belt_timer_ms) if st.belt_timer_ms > 0 else 0
    if st.belt_state == "stopped" or run_ms <= 0:
        return
    direction = 1.0 if st.belt_state == "forward" else -1.0
    delta = direction * st.belt_speed * (run_ms / 1000.0)
    for piece in _pieces_on(plant, st.id):
        if piece.held or piece.stuck:
            continue
        piece.offset = min(max(piece.offset + delta, 0.0), st.belt_length)


def _substep(plant: PlantState, dt_ms: int) -> None:
    """Advance plant state by one sub-step of at most SUBSTEP_MS."""
    for st in sorted(plant.stations.values(), key=lambda s: s.id):
        _move_belt_pieces(plant, st, dt_ms)
        if st.belt_timer_ms > 0:
            st.belt_timer_ms = max(0, st.belt_timer_ms - dt_ms)
            if st.belt_timer_ms == 0:
                st.belt_state = "stopped"
    for agv in sorted(plant.agvs.values(), key=lambda a: a.id):
        if agv.transit_timer_ms > 0:
            agv.transit_timer_ms = max(0, agv.transit_timer_ms - dt_ms)
            if agv.transit_timer_ms == 0:
                agv.location = agv.destination
                agv.destination = ""
    plant.clock.now += dt_ms
    _apply_due_faults(plant)
    _apply_due_effects(plant)


def advance(plant: PlantState, dt: int) -> list[SignalChange]:
    """Step the plant by dt ms, resolving sub-steps at 100 ms granularity.

    Mutates the plant in place and returns every raw signal change with the
    virtual time of the sub-step in which it occurred.
    """
    if dt <= 0:
        raise ValueError("advance requires dt > 0")
    changes: list[SignalChange] = []
    remaining = dt
    before = read_signals(plant)
    while remaining > 0:
        step = min(SUBSTEP_MS, remaining)
        _substep(plant, step)
        after = read_signals(plant)
        changes.extend(_diff(before, after, plant.clock.now))
        before = after
        remaining -= step
    return changes


def spawn_workpiece(plant: PlantState, station_id: str, workpiece_id: str,
                    offset: float = 0.0,
                    cleared_for_processing: bool = True) -> list[SignalChange]:
    """Place a new workpiece on a belt; emits the resulting sensor edges."""
    st = plant.stations.get(station_id)
    if st is None:
        raise UnknownTarget(f"no station {station_id!r}")
    if offset <= st.ENTRANCE_WINDOW:
        for piece in _pieces_on(plant, station_id):
            if st.in_entrance_window(piece.offset):
                raise EntranceOccupied(f"entrance of {station_id} holds {piece.id}")
    if workpiece_id in plant.workpieces:
        raise UnknownTarget(f"workpiece id {workpiece_id!r} already exists")
    before = read_signals(plant)
    plant.workpieces[workpiece_id] = Workpiece(
        id=workpiece_id, station=station_id, offset=offset,
        cleared_for_processing=cleared_for_processing,
    )
    return _diff(before, read_signals(plant), plant.clock.now)


def inject_fault(plant: PlantState, fault: FaultSpec,
                 future_workpieces: frozenset[str] | set[str] = frozenset()) -> None:
    """Queue a fault; it takes effect when the clock reaches fault.at.

    future_workpieces lists ids scheduled to spawn later, so scenarios can
    pre-declare faults on them.
    """
    if fault.at < plant.clock.now:
        raise InvalidFaultTime(f"fault at {fault.at} is before now={plant.clock.now}")
    if fault.kind == "stuck_workpiece":
        if fault.target not in plant.workpieces and fault.target not in future_workpieces:
            raise UnknownTarget(f"no workpiece {fault.target!r}")
    elif fault.kind == "sensor_dropout":
        station_id, _, sensor = fault.target.partition(".")
        if station_id not in plant.stations or sensor not in ("BG56", "BG51"):
            raise UnknownTarget(f"no sensor {fault.target!r}")
    elif fault.kind != "custom":
        raise UnknownTarget(f"unknown fault kind {fault.kind!r}")
    plant.pending_faults.append(fault)


def _ready_piece(plant: PlantState, st: ConveyorStation) -> Workpiece | None:
    for piece in sorted(_pieces_on(plant, st.id), key=lambda w: -w.offset):
        if st.in_ready_window(piece.offset):
            return piece
    return None


def actuate(plant: PlantState, station_id: str, service: str,
            args: list) -> list[SignalChange]:
    """Apply one validated actuation to the plant and return signal changes.

    Raises NoWorkpieceAtReadyPosition for holder/RFID commands against an
    empty ready window; the caller records that as a failed execution.
    """
    now = plant.clock.now
    before = read_signals(plant)
    if service in ("agv_move_to", "agv_load_workpiece", "agv_unload_workpiece"):
        _actuate_agv(plant, station_id, service, args)
        return _diff(before, read_signals(plant), now)

    st = plant.stations.get(station_id)
    if st is None:
        raise UnknownTarget(f"no station {station_id!r}")

    if service == "conveyor_belt_run":
        direction, duration_s = args[0], int(args[1])
        st.belt_state = direction
        st.belt_timer_ms = duration_s * 1000
    elif service == "conveyor_belt_stop":
        st.belt_state = "stopped"
        st.belt_timer_ms = 0
    elif service == "activate_material_holder":
        piece = _ready_piece(plant, st)
        if piece is None:
            raise NoWorkpieceAtReadyPosition(f"{station_id}: ready window empty")
        piece.held = True
    elif service == "deactivate_material_holder":
        for piece in _pieces_on(plant, st.id):
            piece.held = False
    elif service == "rfid_read":
        piece = _ready_piece(plant, st)
        if piece is None:
            raise NoWorkpieceAtReadyPosition(f"{station_id}: ready window empty")
        st.rfid_tag = piece.id
        st.rfid_check = ""
        verdict = "cleared" if piece.cleared_for_processing else "rejected"
        st.pending_effects.append((now + st.rfid_check_delay_ms, "rfid_check", verdict))
    elif service == "release_ready_workpiece_to_next_agent":
        piece = _ready_piece(plant, st)
        if piece is None:
            raise NoWorkpieceAtReadyPosition(f"{station_id}: ready window empty")
        piece.held = False
        piece.station = None
        piece.offset = 0.0
        piece.buffer = f"handover:{st.next_agent or station_id}"
        st.rfid_tag = ""
        st.rfid_check = ""
    else:
        raise UnknownTarget(f"service {service!r} has no plant actuation")
    return _diff(before, read_signals(plant), now)


def _actuate_agv(plant: PlantState, agv_id: str, service: str, args: list) -> None:
    agv = plant.agvs.get(agv_id)
    if agv is None:
        raise UnknownTarget(f"no AGV {agv_id!r}")
    if service == "agv_move_to":
        destination = str(args[0])
        if destination not in plant.stations:
            raise UnknownTarget(f"no station {destination!r}")
        agv.destination = destination
        agv.location = "in_transit"
        agv.transit_timer_ms = agv.hop_time_ms
    elif service == "agv_load_workpiece":
        st = plant.stations.get(agv.location)
        if st is None:
            raise NoWorkpieceAtReadyPosition(f"{agv.id} is not docked at a station")
        piece = _ready_piece(plant, st)
        if piece is None:
            raise NoWorkpieceAtReadyPosition(f"{agv.location}: ready window empty")
        piece.held = False
        piece.station = None
        piece.offset = 0.0
        piece.on_agv = agv.id
        agv.cargo = piece.id
    elif service == "agv_unload_workpiece":
        if agv.cargo is None:
            raise NoWorkpieceAtReadyPosition(f"{agv.id} carries no workpiece")
        piece = plant.workpieces[agv.cargo]
        piece.on_agv = None
        if agv.location in plant.stations:
            piece.station = agv.location
            piece.offset = 0.0
        else:
            piece.buffer = agv.location or "floor"
        agv.cargo = None


def check_place_invariant(plant: PlantState) -> list[str]:
    """Return ids of workpieces that are not in exactly one place."""
    bad = []
    for piece in plant.workpieces.values():
        places = sum(1 for p in (piece.station, piece.on_agv, piece.buffer) if p)
        if places != 1:
            bad.append(piece.id)
    return bad


def brute_force_sensors(plant: PlantState) -> dict[str, bool]:
    """Independent recomputation of sensor booleans from workpiece offsets.

    Deliberately written as a direct enumeration over workpieces so tests can
    compare it against read_signals.
    """
    out: dict[str, bool] = {}
    for st in plant.stations.values():
        entrance = False
        ready = False
        for piece in plant.workpieces.values():
            if piece.station != st.id:
                continue
            if 0.0 <= piece.offset <= 0.05:
                entrance = True
            if st.belt_length - 0.05 <= piece.offset <= st.belt_length:
                ready = True
        out[f"{st.id}.BG56.detected"] = entrance and "BG56" not in st.sensor_dropouts
        out[f"{st.id}.BG51.detected"] = ready and "BG51" not in st.sensor_dropouts
    return out


def build_plant(stations: Iterable[ConveyorStation] = (),
                agvs: Iterable[AgvUnit] = (),
                workpieces: Iterable[Workpiece] = ()) -> PlantState:
    plant = PlantState()
    for st in stations:
        plant.stations[st.id] = st
    for agv in agvs:
        plant.agvs[agv.id] = agv
    for piece in workpieces:
        plant.workpieces[piece.id] = piece
    return plant
