"""Movement models for the three group kinds, producing per-tick positions.

Patrols roam the map between random waypoints (shortest paths, long pauses);
buses loop over fixed cyclic stop sequences; people follow a daily rhythm of
home -> office (8 h, with intra-office wandering) -> optional evening
activity -> home, walking or riding buses between legs.

All randomness flows through the single run RNG in a fixed order (group and
node id), so one seed pins every trajectory.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .mapgraph import MapGraph, PathPlanner
from .scenario import BUS, DAY, PATROL, PERSON, GroupSpec, ScenarioConfig


@dataclass(frozen=True)
class Leg:
    mode: str  # "walk" | "bus"
    route: int = -1
    board_stop: int = -1
    alight_stop: int = -1


@dataclass
class DailySchedule:
    """One person-day: departure, work block, optional evening activity."""

    day: int
    work_start: float  # seconds after midnight; home departure time
    office_stay: float
    has_evening: bool
    evening_duration: float | None
    evening_spot: int | None = None
    evening_party: tuple[int, ...] = ()
    leg_to_work: Leg = field(default_factory=lambda: Leg("walk"))
    leg_to_spot: Leg = field(default_factory=lambda: Leg("walk"))
    leg_home: Leg = field(default_factory=lambda: Leg("walk"))


def draw_daily_schedule(spec: GroupSpec, day: int, rng: random.Random) -> DailySchedule:
    """Per-person draws: work start, evening coin, evening duration."""
    work_start = rng.uniform(spec.work_start_min, spec.work_start_max)
    has_evening = rng.random() < spec.evening_prob
    duration = rng.uniform(spec.evening_min, spec.evening_max) if has_evening else None
    return DailySchedule(day=day, work_start=work_start, office_stay=spec.office_stay,
                         has_evening=has_evening, evening_duration=duration)


class _Node:
    __slots__ = ("idx", "kind", "group", "spec", "wp", "phase", "path", "seg",
                 "speed", "walk_then", "home_wp", "office_wp", "work_end",
                 "schedule", "pending_schedule", "route", "stop_idx", "riders",
                 "ride_bus", "alight_stop", "ride_then", "wait_route", "wait_stop")

    def __init__(self, idx: int, kind: str, group: "_Group"):
        self.idx = idx
        self.kind = kind
        self.group = group
        self.spec = group.spec
        self.wp = -1
        self.phase = "init"
        self.path: list[int] = []
        self.seg = 0
        self.speed = 0.0
        self.walk_then = ""
        self.home_wp = -1
        self.office_wp = -1
        self.work_end = 0.0
        self.schedule: DailySchedule | None = None
        self.pending_schedule: DailySchedule | None = None
        self.route = -1
        self.stop_idx = 0
        self.riders: set[int] | None = None
        self.ride_bus = -1
        self.alight_stop = -1
        self.ride_then = ""
        self.wait_route = -1
        self.wait_stop = -1


class _Group:
    __slots__ = ("spec", "members", "homes", "offices", "meeting_spots", "route")

    def __init__(self, spec: GroupSpec):
        self.spec = spec
        self.members: list[int] = []
        self.homes: list[int] = []
        self.offices: list[int] = []
        self.meeting_spots: list[int] = []
        self.route = -1


def _pool_slice(pool: list[int], index: int, total: int) -> list[int]:
    if not pool:
        return []
    chosen = pool[index::total] if total <= len(pool) else [pool[index % len(pool)]]
    return chosen or [pool[index % len(pool)]]


class MobilityManager:
    """Owns every node's kinematic state; advances it tick by tick."""

    def __init__(self, cfg: ScenarioConfig, m: MapGraph, planner: PathPlanner,
                 rng: random.Random):
        self.cfg = cfg
        self.map = m
        self.planner = planner
        self.rng = rng
        n = cfg.node_count

        self.seg_ax = np.zeros(n)
        self.seg_ay = np.zeros(n)
        self.seg_dx = np.zeros(n)
        self.seg_dy = np.zeros(n)
        self.seg_t0 = np.zeros(n)
        self.seg_rate = np.zeros(n)
        self.next_event = np.full(n, math.inf)
        self._px = np.zeros(n)
        self._py = np.zeros(n)
        # nodes whose position may have changed since the last consume_moved()
        self._touched = np.ones(n, dtype=bool)
        self._moved = np.zeros(n, dtype=bool)
        self._next_due = 0.0

        self.nodes: list[_Node] = []
        self.groups: list[_Group] = []
        self.max_speed = max(g.speed_max for g in cfg.group_specs)

        person_groups = [g for g in cfg.group_specs if g.kind == PERSON]
        bus_groups = [g for g in cfg.group_specs if g.kind == BUS]
        p_idx = b_idx = 0
        next_id = 0
        for spec in cfg.group_specs:
            group = _Group(spec)
            if spec.kind == PERSON:
                group.homes = _pool_slice(m.homes, p_idx, len(person_groups))
                group.offices = _pool_slice(m.offices, p_idx, len(person_groups))
                group.meeting_spots = _pool_slice(m.meeting_spots, p_idx,
                                                  len(person_groups))
                p_idx += 1
            elif spec.kind == BUS:
                if not m.bus_routes:
                    raise ValueError("bus groups require a map with bus routes")
                group.route = spec.route if spec.route >= 0 else b_idx
                group.route %= len(m.bus_routes)
                b_idx += 1
            for _ in range(spec.size):
                self.nodes.append(_Node(next_id, spec.kind, group))
                group.members.append(next_id)
                next_id += 1
            self.groups.append(group)

        # routes actually served by at least one bus (bus legs need a vehicle)
        self._served_routes = sorted({g.route for g in self.groups
                                      if g.spec.kind == BUS})
        self._route_paths: dict[int, list[list[int]]] = {}
        for r in self._served_routes:
            stops = m.bus_routes[r]
            self._route_paths[r] = [
                planner.path(stops[i], stops[(i + 1) % len(stops)])
                for i in range(len(stops))
            ]

        self._waiting: dict[tuple[int, int], list[int]] = {}
        self._paused_buses: dict[tuple[int, int], list[int]] = {}
        self._rider_nodes = np.zeros(0, dtype=np.intp)
        self._rider_buses = np.zeros(0, dtype=np.intp)
        self._riders_dirty = False
        self._next_day_build = 0.0
        self._day = 0

        self._init_nodes()

    # -- initialization -----------------------------------------------------

    def _init_nodes(self) -> None:
        for node in self.nodes:
            if node.kind == PERSON:
                g = node.group
                member_i = g.members.index(node.idx)
                node.home_wp = g.homes[member_i % len(g.homes)]
                node.office_wp = g.offices[member_i % len(g.offices)]
                node.wp = node.home_wp
                node.phase = "home"
                self._set_paused(node.idx, node.wp, math.inf)
            elif node.kind == BUS:
                g = node.group
                node.route = g.route
                stops = self.map.bus_routes[node.route]
                member_i = g.members.index(node.idx)
                node.stop_idx = (member_i * (len(stops) // 2)) % len(stops)
                node.riders = set()
                node.wp = stops[node.stop_idx]
                self._bus_begin_pause(node, 0.0)
            else:  # patrol
                node.wp = self.rng.randrange(self.map.n)
                node.phase = "choose"
                self._set_paused(node.idx, node.wp, 0.0)

    # -- kinematic primitives ------------------------------------------------

    def _set_paused(self, i: int, wp: int, until: float) -> None:
        x, y = self.map.xs[wp], self.map.ys[wp]
        self.seg_ax[i] = x
        self.seg_ay[i] = y
        self.seg_dx[i] = 0.0
        self.seg_dy[i] = 0.0
        self.seg_rate[i] = 0.0
        self.next_event[i] = until
        self._touched[i] = True
        if until < self._next_due:
            self._next_due = until

    def _start_segment(self, node: _Node, now: float) -> None:
        """Begin the current path segment; zero-length segments are skipped."""
        i = node.idx
        while True:
            a = node.path[node.seg]
            b = node.path[node.seg + 1]
            ax, ay = self.map.xs[a], self.map.ys[a]
            bx, by = self.map.xs[b], self.map.ys[b]
            length = math.hypot(bx - ax, by - ay)
            if length > 1e-9:
                self.seg_ax[i] = ax
                self.seg_ay[i] = ay
                self.seg_dx[i] = bx - ax
                self.seg_dy[i] = by - ay
                self.seg_t0[i] = now
                self.seg_rate[i] = node.speed / length
                arrival = now + length / node.speed
                self.next_event[i] = arrival
                self._touched[i] = True
                if arrival < self._next_due:
                    self._next_due = arrival
                return
            node.seg += 1
            if node.seg + 1 >= len(node.path):
                node.wp = node.path[-1]
                self._set_paused(i, node.wp, now)  # arrival handled next dispatch
                node.phase = "arrive"
                return

    def _start_walk(self, node: _Node, path: list[int], speed_lo: float,
                    speed_hi: float, then: str, now: float) -> None:
        node.walk_then = then
        if len(path) < 2:
            node.wp = path[-1] if path else node.wp
            self._arrive(node, now)
            return
        node.phase = "walk"
        node.path = path
        node.seg = 0
        node.speed = self.rng.uniform(speed_lo, speed_hi)  # one speed per path
        self._start_segment(node, now)

    # -- event dispatch -----------------------------------------------------

    def advance(self, now: float) -> None:
        """Process every state-machine event due at or before `now`."""
        if now >= self._next_day_build:
            while now >= self._next_day_build:
                self._build_day_schedules(self._day, self._next_day_build)
                self._day += 1
                self._next_day_build = self._day * DAY
            self._next_due = float(self.next_event.min())
        if now < self._next_due:
            return
        guard = 0
        while True:
            due = np.nonzero(self.next_event <= now)[0]
            if due.size == 0:
                break
            guard += 1
            if guard > 64:
                raise RuntimeError("mobility event loop did not settle")
            for i in due:
                self._dispatch(self.nodes[int(i)], now)
        self._next_due = float(self.next_event.min())

    def positions(self, now: float) -> tuple[np.ndarray, np.ndarray]:
        frac = np.clip((now - self.seg_t0) * self.seg_rate, 0.0, 1.0)
        np.multiply(frac, self.seg_dx, out=self._px)
        self._px += self.seg_ax
        np.multiply(frac, self.seg_dy, out=self._py)
        self._py += self.seg_ay
        if self._riders_dirty:
            self._rebuild_rider_arrays()
        if self._rider_nodes.size:
            self._px[self._rider_nodes] = self._px[self._rider_buses]
            self._py[self._rider_nodes] = self._py[self._rider_buses]
        return self._px, self._py

    def consume_moved(self) -> np.ndarray:
        """Which nodes may have changed position since the previous call."""
        moved = self._moved
        np.not_equal(self.seg_rate, 0.0, out=moved)
        moved |= self._touched
        if self._rider_nodes.size:
            moved[self._rider_nodes] |= moved[self._rider_buses]
        self._touched[:] = False
        return moved

    def _dispatch(self, node: _Node, now: float) -> None:
        if node.phase == "walk":
            node.seg += 1
            if node.seg + 1 < len(node.path):
                self._start_segment(node, now)  # "arrive" settles on the next pass
            else:
                node.wp = node.path[-1]
                self._arrive(node, now)
        elif node.phase == "arrive":
            self._arrive(node, now)
        elif node.kind == PATROL:
            self._patrol_event(node, now)
        elif node.kind == BUS:
            self._bus_event(node, now)
        else:
            self._person_event(node, now)

    # -- patrol -------------------------------------------------------------

    def _patrol_event(self, node: _Node, now: float) -> None:
        # pause finished (or initial choose): head to a fresh random waypoint
        target = self.rng.randrange(self.map.n)
        while target == node.wp:
            target = self.rng.randrange(self.map.n)
        path = self.planner.path(node.wp, target)
        self._start_walk(node, path, node.spec.speed_min, node.spec.speed_max,
                         "patrol_arrived", now)

    # -- buses ----------------------------------------------------------------

    def _bus_begin_pause(self, node: _Node, now: float) -> None:
        stops = self.map.bus_routes[node.route]
        stop_wp = stops[node.stop_idx]
        node.wp = stop_wp
        node.phase = "bus_pause"
        pause = self.rng.uniform(node.spec.pause_min, node.spec.pause_max)
        self._set_paused(node.idx, stop_wp, now + pause)
        key = (node.route, stop_wp)
        self._paused_buses.setdefault(key, []).append(node.idx)
        self._bus_arrival_hook(node, stop_wp, now)

    def _bus_event(self, node: _Node, now: float) -> None:
        # pause over: drive to the next stop on the fixed cyclic route
        stops = self.map.bus_routes[node.route]
        stop_wp = stops[node.stop_idx]
        key = (node.route, stop_wp)
        if key in self._paused_buses and node.idx in self._paused_buses[key]:
            self._paused_buses[key].remove(node.idx)
            if not self._paused_buses[key]:
                del self._paused_buses[key]
        path = self._route_paths[node.route][node.stop_idx]
        node.stop_idx = (node.stop_idx + 1) % len(stops)
        self._start_walk(node, path, node.spec.speed_min, node.spec.speed_max,
                         "bus_stop", now)

    def _bus_arrival_hook(self, bus: _Node, stop_wp: int, now: float) -> None:
        # riders leave first, then waiting passengers board (node-id order)
        for rider_id in sorted(bus.riders):
            rider = self.nodes[rider_id]
            if rider.alight_stop == stop_wp:
                bus.riders.discard(rider_id)
                self._riders_dirty = True
                rider.ride_bus = -1
                rider.wp = stop_wp
                self._disembark(rider, now)
        key = (bus.route, stop_wp)
        for rider_id in list(self._waiting.get(key, ())):
            rider = self.nodes[rider_id]
            self._waiting[key].remove(rider_id)
            if not self._waiting[key]:
                del self._waiting[key]
            self._board(rider, bus, now)

    def _board(self, rider: _Node, bus: _Node, now: float) -> None:
        rider.phase = "ride"
        rider.ride_bus = bus.idx
        bus.riders.add(rider.idx)
        self._riders_dirty = True
        self.next_event[rider.idx] = math.inf
        self.seg_rate[rider.idx] = 0.0
        self._touched[rider.idx] = True

    def _disembark(self, rider: _Node, now: float) -> None:
        target, then = {
            "office": (rider.office_wp, "office"),
            "spot": (rider.schedule.evening_spot, "spot"),
            "home": (rider.home_wp, "home_arrived"),
        }[rider.ride_then]
        path = self.planner.path(rider.wp, target)
        self._start_walk(rider, path, rider.spec.speed_min, rider.spec.speed_max,
                         then, now)

    def _rebuild_rider_arrays(self) -> None:
        pairs = [(n.idx, n.ride_bus) for n in self.nodes
                 if n.kind == PERSON and n.phase == "ride"]
        if pairs:
            self._rider_nodes = np.array([p[0] for p in pairs], dtype=np.intp)
            self._rider_buses = np.array([p[1] for p in pairs], dtype=np.intp)
        else:
            self._rider_nodes = np.zeros(0, dtype=np.intp)
            self._rider_buses = np.zeros(0, dtype=np.intp)
        self._riders_dirty = False

    # -- people ---------------------------------------------------------------

    def _build_day_schedules(self, day: int, now: float) -> None:
        for group in self.groups:
            if group.spec.kind != PERSON:
                continue
            spec = group.spec
            schedules = {}
            for member in group.members:
                schedules[member] = draw_daily_schedule(spec, day, self.rng)
            goers = [m for m in group.members if schedules[m].has_evening]
            self.rng.shuffle(goers)
            while goers:
                size = self.rng.randint(1, min(spec.evening_group_max, len(goers)))
                party = tuple(sorted(goers[:size]))
                goers = goers[size:]
                spot = group.meeting_spots[self.rng.randrange(len(group.meeting_spots))] \
                    if group.meeting_spots else None
                for member in party:
                    sched = schedules[member]
                    sched.evening_party = party
                    sched.evening_spot = spot
                    if spot is None:  # no tagged spots on this map: stay at office
                        sched.has_evening = False
                        sched.evening_duration = None
            for member in group.members:
                node = self.nodes[member]
                sched = schedules[member]
                sched.leg_to_work = self._choose_transport(node.home_wp,
                                                           node.office_wp)
                if sched.has_evening:
                    sched.leg_to_spot = self._choose_transport(node.office_wp,
                                                               sched.evening_spot)
                    sched.leg_home = self._choose_transport(sched.evening_spot,
                                                            node.home_wp)
                else:
                    sched.leg_home = self._choose_transport(node.office_wp,
                                                            node.home_wp)
                if node.phase == "home":
                    # nodes still out keep their active schedule until they
                    # return home; otherwise evening legs would dangle
                    node.schedule = sched
                    self.next_event[node.idx] = now + sched.work_start
                else:
                    node.pending_schedule = sched

    def _choose_transport(self, a_wp: int, b_wp: int) -> Leg:
        """Bus when a served route saves enough walking (50/50 coin), else walk."""
        if not self._served_routes or a_wp == b_wp:
            return Leg("walk")
        direct = self.planner.distance(a_wp, b_wp)
        best = None
        for r in self._served_routes:
            stops = self.map.bus_routes[r]
            board = self.planner.nearest(a_wp, stops)
            alight = self.planner.nearest(b_wp, stops)
            if board == alight:
                continue
            walk_total = (self.planner.distance(a_wp, board)
                          + self.planner.distance(alight, b_wp))
            if best is None or walk_total < best[0]:
                best = (walk_total, r, board, alight)
        if best is not None and best[0] < 0.75 * direct and self.rng.random() < 0.5:
            return Leg("bus", route=best[1], board_stop=best[2], alight_stop=best[3])
        return Leg("walk")

    def _begin_leg(self, node: _Node, leg: Leg, target_wp: int, then: str,
                   now: float) -> None:
        if leg.mode == "bus":
            node.ride_then = {"office": "office", "spot": "spot",
                              "home_arrived": "home"}[then]
            node.alight_stop = leg.alight_stop
            node.wait_route = leg.route
            node.wait_stop = leg.board_stop
            path = self.planner.path(node.wp, leg.board_stop)
            self._start_walk(node, path, node.spec.speed_min, node.spec.speed_max,
                             "at_stop", now)
        else:
            path = self.planner.path(node.wp, target_wp)
            self._start_walk(node, path, node.spec.speed_min, node.spec.speed_max,
                             then, now)

    def _person_event(self, node: _Node, now: float) -> None:
        if node.phase == "home":
            sched = node.schedule
            self._begin_leg(node, sched.leg_to_work, node.office_wp, "office", now)
        elif node.phase == "office_pause":
            self._office_continue(node, now)
        elif node.phase == "evening":
            sched = node.schedule
            self._begin_leg(node, sched.leg_home, node.home_wp, "home_arrived", now)
        else:
            raise RuntimeError(f"person {node.idx} event in phase {node.phase}")

    def _arrive(self, node: _Node, now: float) -> None:
        then = node.walk_then
        if then == "patrol_arrived":
            node.phase = "patrol_pause"
            pause = self.rng.uniform(node.spec.pause_min, node.spec.pause_max)
            self._set_paused(node.idx, node.wp, now + pause)
        elif then == "bus_stop":
            self._bus_begin_pause(node, now)
        elif then == "office":
            node.work_end = now + node.schedule.office_stay
            self._office_pause(node, now)
        elif then == "office_wander":
            self._office_pause(node, now)
        elif then == "at_stop":
            self._wait_for_bus(node, now)
        elif then == "spot":
            node.phase = "evening"
            self._set_paused(node.idx, node.wp, now + node.schedule.evening_duration)
        elif then == "home_arrived":
            node.phase = "home"
            if node.pending_schedule is not None:
                node.schedule = node.pending_schedule
                node.pending_schedule = None
            sched = node.schedule
            depart = sched.day * DAY + sched.work_start if sched else math.inf
            # today's departure already passed: wait for the next day's build
            self._set_paused(node.idx, node.wp,
                             depart if depart > now else math.inf)
        else:
            raise RuntimeError(f"unknown walk continuation '{then}'")

    def _office_pause(self, node: _Node, now: float) -> None:
        if now >= node.work_end:
            self._leave_office(node, now)
            return
        node.phase = "office_pause"
        pause = self.rng.uniform(node.spec.pause_min, node.spec.pause_max)
        self._set_paused(node.idx, node.wp, min(now + pause, node.work_end))

    def _office_continue(self, node: _Node, now: float) -> None:
        if now >= node.work_end:
            self._leave_office(node, now)
            return
        # wander to another point of this office's interior cluster
        cluster = [node.office_wp] + self.map.office_interiors.get(node.office_wp, [])
        targets = [w for w in cluster if w != node.wp]
        if not targets:
            self._office_pause(node, now)
            return
        target = targets[self.rng.randrange(len(targets))]
        path = self.planner.path(node.wp, target)
        self._start_walk(node, path, node.spec.speed_min, node.spec.speed_max,
                         "office_wander", now)

    def _leave_office(self, node: _Node, now: float) -> None:
        sched = node.schedule
        if sched.has_evening and sched.evening_spot is not None:
            self._begin_leg(node, sched.leg_to_spot, sched.evening_spot, "spot", now)
        else:
            self._begin_leg(node, sched.leg_home, node.home_wp, "home_arrived", now)

    def _wait_for_bus(self, node: _Node, now: float) -> None:
        key = (node.wait_route, node.wait_stop)
        paused = self._paused_buses.get(key)
        if paused:
            self._board(node, self.nodes[paused[0]], now)
            return
        node.phase = "wait_bus"
        self._set_paused(node.idx, node.wp, math.inf)
        self._waiting.setdefault(key, []).append(node.idx)
