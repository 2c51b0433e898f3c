"""Deterministic tick loop binding mobility, contacts, routing and traffic.

One run = one seed. Per tick: mobility advances, contacts are sampled at
beacon granularity, transfers move bytes for the elapsed interval, contact
up/down events trigger protocol exchanges, new messages enter and stale ones
expire. All iteration is in sorted id order, so a (config, seed) pair pins
the result byte for byte regardless of scheduling.
"""

from __future__ import annotations

import io
import math
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import traffic as traffic_mod
from .mapgraph import MapGraph, PathPlanner, generate_map
from .mobility import MobilityManager
from .network import ContactEvent, LinkState, advance_link
from .routing import Buffer, Message, make_states, plan_offer_ids
from .scenario import (BUS, DAY, PERSON, ScenarioConfig, map_seed, pair_seed,
                       schedule_seed, validate)


@dataclass
class MessageRecord:
    msg_id: str
    src: int
    dst: int
    size: int
    created_at: float
    counted: bool
    delivered: bool = False
    delivered_at: float | None = None
    transfers: int = 0  # completed transfers of this message
    admits: int = 0     # successful copy placements, source copy included
    evictions: int = 0
    expirations: int = 0
    holders: set[int] = field(default_factory=set)

    @property
    def copies(self) -> int:
        return len(self.holders)


@dataclass
class RunResult:
    seed: int
    protocol: str
    created: int = 0
    delivered: int = 0
    forwardings: int = 0
    aborted: int = 0
    evictions: int = 0
    expirations: int = 0
    records: list[MessageRecord] = field(default_factory=list)
    contact_events: list[ContactEvent] = field(default_factory=list)

    def to_text(self) -> str:
        out = io.StringIO()
        out.write(f"run seed={self.seed} protocol={self.protocol}\n")
        out.write(f"created={self.created} delivered={self.delivered} "
                  f"forwardings={self.forwardings} aborted={self.aborted} "
                  f"evictions={self.evictions} expirations={self.expirations}\n")
        for r in self.records:
            delivered_at = f"{r.delivered_at:.3f}" if r.delivered_at is not None else "-"
            out.write(f"msg {r.msg_id} src={r.src} dst={r.dst} size={r.size} "
                      f"created={r.created_at:.3f} delivered={int(r.delivered)} "
                      f"delivered_at={delivered_at} transfers={r.transfers}\n")
        return out.getvalue()


class ConservationError(AssertionError):
    """Copy-conservation or causality bookkeeping went out of balance."""


# ---------------------------------------------------------------------------
# Contact sources
#
# A contact source reports, per beacon, which pairs flipped state since the
# previous beacon as (i, j, up) with i < j. The engine never sees positions.

class MobilityContacts:
    """Range test over live positions, updated incrementally.

    Only rows of nodes that moved since the previous beacon are recomputed;
    everyone else's pairwise distances are unchanged by construction.
    """

    def __init__(self, manager: MobilityManager, range_m: float):
        self.manager = manager
        self.range_sq = range_m * range_m
        self.n = manager.cfg.node_count
        self._in_range = np.zeros((self.n, self.n), dtype=bool)
        self._started = False

    def _full_recompute(self, px, py) -> np.ndarray:
        dx = px[:, None] - px[None, :]
        dy = py[:, None] - py[None, :]
        d2 = dx * dx + dy * dy
        self._in_range = d2 <= self.range_sq
        return self._in_range

    def pairs_at(self, now: float) -> list[tuple[int, int, bool]]:
        self.manager.advance(now)
        px, py = self.manager.positions(now)
        if not self._started:
            self._started = True
            self.manager.consume_moved()
            in_range = self._full_recompute(px, py)
            ii, jj = np.nonzero(np.triu(in_range, k=1))
            return [(int(i), int(j), True) for i, j in zip(ii, jj)]
        in_range = self._in_range
        moved = self.manager.consume_moved()
        if not moved.any():
            return []
        sel = np.nonzero(moved)[0]
        dx = px[sel, None] - px[None, :]
        dy = py[sel, None] - py[None, :]
        d2 = dx * dx + dy * dy
        new_rows = d2 <= self.range_sq
        old_rows = in_range[sel, :]
        if np.array_equal(new_rows, old_rows):
            return []
        si, jj = np.nonzero(new_rows != old_rows)
        in_range[sel, :] = new_rows
        in_range[:, sel] = new_rows.T
        flips = set()
        for s, j in zip(si.tolist(), jj.tolist()):
            i = int(sel[s])
            flips.add((i, j) if i < j else (j, i))
        return [(i, j, bool(in_range[i, j])) for i, j in sorted(flips)]


class ScriptedContacts:
    """Contact schedule given as (a, b, first_beacon, last_beacon) intervals."""

    def __init__(self, n_nodes: int, intervals):
        self.n = n_nodes
        self.intervals = []
        for a, b, start, end in intervals:
            if a == b:
                raise ValueError("contact interval endpoints must differ")
            lo, hi = (a, b) if a < b else (b, a)
            if end < start:
                raise ValueError("contact interval end before start")
            self.intervals.append((lo, hi, float(start), float(end)))
        self._prev: set[tuple[int, int]] = set()

    def pairs_at(self, now: float) -> list[tuple[int, int, bool]]:
        cur = {(a, b) for a, b, start, end in self.intervals
               if start <= now <= end}
        flips = [(i, j, True) for i, j in cur - self._prev]
        flips += [(i, j, False) for i, j in self._prev - cur]
        self._prev = cur
        return sorted(flips)


# ---------------------------------------------------------------------------
# The simulation proper

class Simulation:
    def __init__(self, cfg: ScenarioConfig, seed: int, contacts,
                 schedule: traffic_mod.TrafficSchedule, *,
                 debug: bool = False, collect_trace: bool = False,
                 progress: bool = False):
        self.cfg = cfg
        self.seed = seed
        self.contacts = contacts
        self.schedule = list(schedule)
        for prev, cur in zip(self.schedule, self.schedule[1:]):
            if cur.time < prev.time:
                raise ValueError("traffic schedule times must be non-decreasing")
        self.debug = debug
        self.collect_trace = collect_trace
        self.progress = progress

        n = cfg.node_count
        self.n = n
        cap = cfg.traffic.buffer_capacity
        self.buffers = [Buffer(cap) for _ in range(n)]
        self.states = make_states(cfg.protocol, range(n), cfg.protocol_params)
        self.links: dict[int, LinkState] = {}  # keyed by i * n + j, i < j
        self.node_links: list[set[int]] = [set() for _ in range(n)]
        self.busy: set[int] = set()
        self.pending: list[list[Message]] = [[] for _ in range(n)]
        self.pending_nodes: set[int] = set()
        # ttl is uniform, so messages expire in creation order
        self.expiry_queue: list[tuple[Message, MessageRecord]] = []
        self._expiry_pos = 0
        # msg_id -> (Message, MessageRecord); one lookup on the hot path
        self.entries: dict[str, tuple[Message, MessageRecord]] = {}
        self.result = RunResult(seed=seed, protocol=cfg.protocol)
        self._sched_pos = 0
        self._prev_beacon = 0.0
        self._transfer_prev = 0.0
        # messages that may still hold copies somewhere (debug bookkeeping)
        self._live: dict[str, MessageRecord] = {}

    # -- bookkeeping helpers --------------------------------------------------

    def _count_eviction(self, node: int, msg: Message) -> None:
        rec = self.entries[msg.msg_id][1]
        rec.evictions += 1
        rec.holders.discard(node)
        if rec.counted:
            self.result.evictions += 1
        if not rec.holders:  # no holder left; the message can never respawn
            self._live.pop(msg.msg_id, None)

    def _count_expiration(self, node: int, msg: Message) -> None:
        rec = self.entries[msg.msg_id][1]
        rec.expirations += 1
        rec.holders.discard(node)
        if rec.counted:
            self.result.expirations += 1
        if not rec.holders:
            self._live.pop(msg.msg_id, None)

    def _admit(self, node: int, msg: Message, now: float) -> bool:
        admitted, evicted, expired = self.buffers[node].admit(msg, now)
        for ex in expired:
            self._count_expiration(node, ex)
        for ev in evicted:
            self._count_eviction(node, ev)
        if not admitted:
            return False
        rec = self.entries[msg.msg_id][1]
        rec.admits += 1
        rec.holders.add(node)
        return True

    # -- transfer callbacks ---------------------------------------------------

    def _validate_job(self, msg_id: str, sender: int, receiver: int):
        msg = self.entries[msg_id][0]
        if msg.expires_at <= self._transfer_prev:
            return None
        if msg_id not in self.buffers[sender]._store:
            return None
        if msg_id in self.buffers[receiver]._store:
            return None
        return msg.size

    def _on_abort(self, job) -> None:
        # receiver already got the message elsewhere: a race, not a failure
        if job.msg_id in self.buffers[job.receiver]._store:
            return
        if self.entries[job.msg_id][1].counted:
            self.result.aborted += 1

    def _on_complete(self, msg_id: str, receiver: int, now: float) -> None:
        msg, rec = self.entries[msg_id]
        if msg.expires_at <= now:  # died in flight
            if rec.counted:
                self.result.aborted += 1
            return
        if self.debug and now < msg.created_at:
            raise ConservationError(f"{msg.msg_id} transferred before creation")
        rec.transfers += 1
        if rec.counted:
            self.result.forwardings += 1
        if msg_id in self.buffers[receiver]._store:
            return  # duplicate arrival; counted as a forwarding above
        if not self._admit(receiver, msg, now):
            return
        if receiver == msg.dst:
            if not rec.delivered:
                if self.debug and now <= msg.created_at:
                    raise ConservationError(f"{msg.msg_id} delivered instantly")
                rec.delivered = True
                rec.delivered_at = now
                if rec.counted:
                    self.result.delivered += 1
            # destination holds the copy but never re-offers it
        else:
            self.pending[receiver].append(msg)
            self.pending_nodes.add(receiver)

    # -- per-tick phases --------------------------------------------------------

    def _offer(self, sender: int, receiver: int, link: LinkState, now: float) -> None:
        front, rest = plan_offer_ids(sender, self.buffers[sender],
                                     self.states[sender], receiver,
                                     self.buffers[receiver]._store,
                                     self.states[receiver], now,
                                     link.offered(sender))
        if front or rest:
            if sender == link.a:
                queue, offered = link.queue_ab, link.offered_ab
            else:
                queue, offered = link.queue_ba, link.offered_ba
            for mid in front:
                offered.add(mid)
                queue.append((mid, now))
            for mid in rest:
                offered.add(mid)
                queue.append((mid, now))
            self.busy.add(link.key)

    def _beacon(self, now: float) -> None:
        flips = self.contacts.pairs_at(now)
        n = self.n

        ups = []
        if flips:
            for i, j, up in flips:
                if up:
                    ups.append(i * n + j)
                else:
                    self._contact_down(i * n + j, now)

        # every remaining busy link was in contact at both interval ends
        if self.busy:
            self._transfer_prev = self._prev_beacon
            bandwidth = self.cfg.radio.bandwidth_bps
            links = self.links
            for k in sorted(self.busy):
                link = links[k]
                advance_link(link, self._prev_beacon, now, bandwidth,
                             self._validate_job, self._on_complete,
                             self._on_abort)
                if not link.has_work():
                    self.busy.discard(k)

        for k in ups:
            self._contact_up(k, now)
        self._prev_beacon = now

    def _contact_down(self, k: int, now: float) -> None:
        link = self.links.pop(k, None)
        if link is None:
            return
        a, b = link.a, link.b
        self.node_links[a].discard(k)
        self.node_links[b].discard(k)
        self.busy.discard(k)
        for msg_id, _ in list(link.queue_ab) + list(link.queue_ba):
            rec = self.entries[msg_id][1]
            if rec.counted:
                self.result.aborted += 1
        for job in link.pending_jobs():
            if self.entries[job.msg_id][1].counted:
                self.result.aborted += 1
        link.abort_all()
        # pair last seen one beacon ago; `now` is the beacon that saw it gone
        duration = max((now - self.cfg.radio.beacon_interval) - link.start, 0.0)
        self.states[a].on_contact_close(self.states[b], duration, now)
        if self.collect_trace:
            self.result.contact_events.append(ContactEvent(a, b, link.start, now))

    def _contact_up(self, k: int, now: float) -> None:
        a, b = divmod(k, self.n)
        link = LinkState(a, b, now, key=k)
        self.links[k] = link
        self.node_links[a].add(k)
        self.node_links[b].add(k)
        self.states[a].on_encounter(self.states[b], now)
        self._offer(a, b, link, now)
        self._offer(b, a, link, now)

    def _create_messages(self, now: float) -> None:
        sched = self.schedule
        pos = self._sched_pos
        while pos < len(sched) and sched[pos].time <= now:
            sm = sched[pos]
            pos += 1
            msg = Message(sm.msg_id, sm.src, sm.dst, sm.size,
                          created_at=now, ttl=self.cfg.traffic.ttl)
            counted = now >= self.cfg.warmup
            rec = MessageRecord(sm.msg_id, sm.src, sm.dst, sm.size,
                                created_at=now, counted=counted)
            self.entries[sm.msg_id] = (msg, rec)
            self.expiry_queue.append((msg, rec))
            if counted:
                self.result.created += 1
            if self._admit(sm.src, msg, now):
                self._live[sm.msg_id] = rec
                self.pending[sm.src].append(msg)
                self.pending_nodes.add(sm.src)
        self._sched_pos = pos

    def _flush_pending(self, now: float) -> None:
        for node in sorted(self.pending_nodes):
            fresh = self.pending[node]
            self.pending[node] = []
            links = self.node_links[node]
            if not links:
                continue
            buf = self.buffers[node]._store
            live = [m for m in fresh if m.msg_id in buf]
            if not live:
                continue
            state = self.states[node]
            flood = getattr(state, "always_replicates", False)
            for k in sorted(links):
                link = self.links[k]
                if node == link.a:
                    peer, queue, offered = link.b, link.queue_ab, link.offered_ab
                else:
                    peer, queue, offered = link.a, link.queue_ba, link.offered_ba
                peer_held = self.buffers[peer]._store
                peer_state = self.states[peer]
                front, rest = [], []
                for msg in live:
                    mid = msg.msg_id
                    if mid in offered or mid in peer_held:
                        continue
                    dst = msg.dst
                    if dst == node or msg.expires_at <= now:
                        continue
                    if dst == peer:
                        front.append(mid)
                    elif flood or state.should_replicate(peer_state, dst, now):
                        rest.append(mid)
                if front or rest:
                    for mid in front:
                        offered.add(mid)
                        queue.append((mid, now))
                    for mid in rest:
                        offered.add(mid)
                        queue.append((mid, now))
                    self.busy.add(k)
        self.pending_nodes.clear()

    def _expire(self, now: float) -> None:
        queue = self.expiry_queue
        pos = self._expiry_pos
        while pos < len(queue) and queue[pos][0].expires_at <= now:
            msg, rec = queue[pos]
            pos += 1
            for node in sorted(rec.holders):
                self.buffers[node].remove(msg.msg_id)
                rec.expirations += 1
                if rec.counted:
                    self.result.expirations += 1
            rec.holders.clear()
            self._live.pop(msg.msg_id, None)
        self._expiry_pos = pos

    def _check_conservation(self, now: float) -> None:
        for rec in self._live.values():
            expected = rec.admits - rec.evictions - rec.expirations
            if rec.copies != expected:
                raise ConservationError(
                    f"{rec.msg_id}: copies {rec.copies} != admits {rec.admits} "
                    f"- evictions {rec.evictions} - expirations {rec.expirations}")
            if rec.copies < 0:
                raise ConservationError(f"{rec.msg_id}: negative copy count")
            if rec.delivered and rec.delivered_at < rec.created_at:
                raise ConservationError(f"{rec.msg_id}: delivered before creation")

    def _recount_copies(self) -> None:
        actual: dict[str, int] = {}
        for buf in self.buffers:
            for mid in buf.ids():
                actual[mid] = actual.get(mid, 0) + 1
        for _, rec in self.entries.values():
            if actual.get(rec.msg_id, 0) != rec.copies:
                raise ConservationError(
                    f"{rec.msg_id}: buffers hold {actual.get(rec.msg_id, 0)} "
                    f"copies, ledger says {rec.copies}")

    # -- main loop ----------------------------------------------------------------

    def run(self) -> RunResult:
        cfg = self.cfg
        tick = cfg.tick
        beacon_ticks = round(cfg.radio.beacon_interval / tick)
        total_ticks = math.ceil(cfg.sim_duration / tick)
        next_report = DAY

        sched = self.schedule
        next_creation = sched[0].time if sched else math.inf
        pending_nodes = self.pending_nodes
        debug = self.debug

        for t in range(total_ticks):
            now = t * tick
            if t % beacon_ticks == 0:
                self._beacon(now)
            if next_creation <= now:
                self._create_messages(now)
                next_creation = (sched[self._sched_pos].time
                                 if self._sched_pos < len(sched) else math.inf)
            if pending_nodes:
                self._flush_pending(now)
            queue = self.expiry_queue
            if (self._expiry_pos < len(queue)
                    and queue[self._expiry_pos][0].expires_at <= now):
                self._expire(now)
            if debug:
                self._check_conservation(now)
                if t % 3600 == 0:
                    self._recount_copies()
            if self.progress and now >= next_report:
                print(f"seed {self.seed}: day {int(now // DAY)} done",
                      file=sys.stderr)
                next_report += DAY
        end = total_ticks * tick
        if self.collect_trace:
            for k in sorted(self.links):
                link = self.links[k]
                self.result.contact_events.append(
                    ContactEvent(link.a, link.b, link.start,
                                 self._prev_beacon + cfg.radio.beacon_interval))
            self.result.contact_events.sort(key=lambda e: (e.start, e.a, e.b))
        self.result.records = [self.entries[m.msg_id][1] for m in self.schedule
                               if m.msg_id in self.entries
                               and self.entries[m.msg_id][1].counted]
        if debug:
            self._check_conservation(end)
            self._recount_copies()
        return self.result


# ---------------------------------------------------------------------------
# Run orchestration

def build_world(cfg: ScenarioConfig) -> tuple[MapGraph, PathPlanner]:
    """Generate the experiment map (shared across runs and protocol cells)."""
    person_groups = sum(1 for g in cfg.group_specs if g.kind == PERSON)
    bus_groups = [g for g in cfg.group_specs if g.kind == BUS]
    n_routes = max([g.route + 1 for g in bus_groups if g.route >= 0] +
                   [len(bus_groups)] + [1])
    m = generate_map(cfg.world_width, cfg.world_height, map_seed(cfg),
                     n_routes=n_routes,
                     n_homes=max(6 * person_groups, 1),
                     n_offices=max(2 * person_groups, 1),
                     n_meeting_spots=max(2 * person_groups, 1))
    return m, PathPlanner(m)


def build_traffic(cfg: ScenarioConfig) -> traffic_mod.TrafficSchedule:
    if cfg.traffic.pair_count == 0 or cfg.traffic.messages_per_day == 0:
        return traffic_mod.TrafficSchedule(())
    pairs = traffic_mod.build_pairs(cfg.node_ids(), cfg.traffic.pair_count,
                                    pair_seed(cfg))
    return traffic_mod.build_schedule(pairs, cfg.traffic, cfg.sim_duration,
                                      schedule_seed(cfg))


def run(cfg: ScenarioConfig, seed: int, *, map_graph: MapGraph | None = None,
        planner: PathPlanner | None = None,
        schedule: traffic_mod.TrafficSchedule | None = None,
        debug: bool = False, collect_trace: bool = False,
        progress: bool = False) -> RunResult:
    """Execute one run; identical (config, seed) yields identical results."""
    validate(cfg)
    if map_graph is None:
        map_graph, planner = build_world(cfg)
    elif planner is None:
        planner = PathPlanner(map_graph)
    if schedule is None:
        schedule = build_traffic(cfg)
    rng = random.Random(seed)
    manager = MobilityManager(cfg, map_graph, planner, rng)
    contacts = MobilityContacts(manager, cfg.radio.range_m)
    sim = Simulation(cfg, seed, contacts, schedule, debug=debug,
                     collect_trace=collect_trace, progress=progress)
    return sim.run()


def _run_task(args):
    cfg, seed, map_graph, schedule, debug = args
    return run(cfg, seed, map_graph=map_graph, schedule=schedule, debug=debug)


def run_experiment(cfg: ScenarioConfig, *, base_seed: int | None = None,
                   runs: int | None = None, jobs: int = 1,
                   map_graph: MapGraph | None = None,
                   schedule: traffic_mod.TrafficSchedule | None = None,
                   debug: bool = False, progress: bool = False) -> list[RunResult]:
    """Execute `runs` independent runs with seeds base..base+runs-1.

    Results come back ordered by seed regardless of `jobs`; runs share the
    map and traffic schedule but nothing mutable.
    """
    validate(cfg)
    if base_seed is None:
        base_seed = cfg.base_seed
    if runs is None:
        runs = cfg.runs
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if map_graph is None:
        map_graph, _ = build_world(cfg)
    if schedule is None:
        schedule = build_traffic(cfg)
    seeds = [base_seed + i for i in range(runs)]
    if jobs <= 1 or runs == 1:
        return [run(cfg, s, map_graph=map_graph, schedule=schedule,
                    debug=debug, progress=progress) for s in seeds]
    tasks = [(cfg, s, map_graph, schedule, debug) for s in seeds]
    with ProcessPoolExecutor(max_workers=min(jobs, runs)) as pool:
        return list(pool.map(_run_task, tasks))


# ---------------------------------------------------------------------------
# Scripted-trace harness (protocol behavior on hand-built contact plans)

def run_trace(n_nodes: int, contact_intervals, messages, *, protocol="epidemic",
              ttl: float, tick: float = 1.0, bandwidth: float = 1e12,
              buffer_capacity: int = 10 ** 12, duration: float | None = None,
              warmup: float = 0.0, params=None, debug: bool = True) -> RunResult:
    """Run routing over a scripted contact plan (no mobility, vast buffers).

    `contact_intervals` are (a, b, first_beacon, last_beacon) in seconds;
    `messages` are (msg_id, time, src, dst, size) tuples in any order.
    """
    from dataclasses import replace

    from .scenario import ScenarioConfig, patrol_group

    messages = sorted(messages, key=lambda m: m[1])
    if duration is None:
        horizon = max([end for _, _, _, end in contact_intervals] + [0.0])
        horizon = max(horizon, max([t for _, t, _, _, _ in messages] + [0.0]))
        duration = horizon + ttl + 2 * tick
    cfg = ScenarioConfig(
        node_count=n_nodes,
        group_specs=(patrol_group("trace", n_nodes),),
        sim_duration=duration,
        warmup=warmup,
        tick=tick,
        runs=1,
    )
    cfg = replace(cfg,
                  radio=replace(cfg.radio, bandwidth_bps=bandwidth,
                                beacon_interval=tick),
                  traffic=replace(cfg.traffic, ttl=ttl,
                                  buffer_capacity=buffer_capacity,
                                  size_max=max([s for *_, s in messages] +
                                               [cfg.traffic.size_max])),
                  protocol=protocol)
    if params is not None:
        cfg = replace(cfg, protocol_params=params)
    validate(cfg)
    sched = traffic_mod.TrafficSchedule(tuple(
        traffic_mod.ScheduledMessage(msg_id=mid, time=t, src=src, dst=dst, size=size)
        for mid, t, src, dst, size in messages))
    contacts = ScriptedContacts(n_nodes, contact_intervals)
    sim = Simulation(cfg, seed=0, contacts=contacts, schedule=sched,
                     debug=debug, collect_trace=True)
    return sim.run()
