"""Contacts and transfers: who can talk, and how many bytes actually move.

Contact detection samples positions at beacon granularity; transfers are
byte-accurate against a per-link bandwidth budget, so a message is delivered
only when its final byte lands.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass


@dataclass(frozen=True)
class ContactEvent:
    a: int
    b: int
    start: float  # beacon that first saw the pair in range
    end: float    # beacon that first saw it gone (so start < end always)

    @property
    def duration(self) -> float:
        return self.end - self.start


class TransferJob:
    __slots__ = ("msg_id", "sender", "receiver", "size", "bytes_remaining",
                 "started_at")

    def __init__(self, msg_id: str, sender: int, receiver: int, size: int,
                 bytes_remaining: int, started_at: float):
        self.msg_id = msg_id
        self.sender = sender
        self.receiver = receiver
        self.size = size
        self.bytes_remaining = bytes_remaining
        self.started_at = started_at

    def __repr__(self):
        return (f"TransferJob({self.msg_id}, {self.sender}->{self.receiver}, "
                f"{self.bytes_remaining}/{self.size}B)")


def detect_contacts(positions, range_m: float) -> set[tuple[int, int]]:
    """All unordered node pairs within `range_m` (inclusive) of each other."""
    if hasattr(positions, "items"):
        items = sorted(positions.items())
    else:
        items = list(enumerate(positions))
    r2 = range_m * range_m
    out = set()
    for idx, (i, (xi, yi)) in enumerate(items):
        for j, (xj, yj) in items[idx + 1:]:
            dx = xi - xj
            dy = yi - yj
            if dx * dx + dy * dy <= r2:
                out.add((i, j))
    return out


class LinkState:
    """Per-contact transfer state: two directed queues plus offered-id sets.

    One job per direction is in flight at a time (head of queue); the link's
    byte budget is split equally between directions whenever both have work.
    The offered sets stop a message from being queued twice within a single
    contact episode.
    """

    __slots__ = ("a", "b", "key", "start", "queue_ab", "queue_ba", "job_ab",
                 "job_ba", "offered_ab", "offered_ba")

    def __init__(self, a: int, b: int, start: float, key: int = -1):
        self.a = a
        self.b = b
        self.key = key
        self.start = start
        self.queue_ab: deque[tuple[str, float]] = deque()
        self.queue_ba: deque[tuple[str, float]] = deque()
        self.job_ab: TransferJob | None = None
        self.job_ba: TransferJob | None = None
        self.offered_ab: set[str] = set()
        self.offered_ba: set[str] = set()

    def enqueue(self, sender: int, msg_id: str, now: float, *, front: bool = False) -> None:
        queue = self.queue_ab if sender == self.a else self.queue_ba
        offered = self.offered_ab if sender == self.a else self.offered_ba
        offered.add(msg_id)
        if front:
            queue.appendleft((msg_id, now))
        else:
            queue.append((msg_id, now))

    def offered(self, sender: int) -> set[str]:
        return self.offered_ab if sender == self.a else self.offered_ba

    def has_work(self) -> bool:
        return bool(self.queue_ab or self.queue_ba or self.job_ab or self.job_ba)

    def pending_jobs(self) -> list[TransferJob]:
        return [j for j in (self.job_ab, self.job_ba) if j is not None]

    def abort_all(self) -> int:
        """Contact lost: drop partial transfers and queued offers; returns abort count."""
        aborted = len(self.queue_ab) + len(self.queue_ba)
        aborted += (self.job_ab is not None) + (self.job_ba is not None)
        self.queue_ab.clear()
        self.queue_ba.clear()
        self.job_ab = None
        self.job_ba = None
        return aborted


def _advance_direction(sender: int, receiver: int, queue, job, budget: float,
                       t_prev: float, t_now: float, bandwidth_bps: float,
                       validate_job, on_complete, on_abort):
    if job is not None:
        if validate_job(job.msg_id, sender, receiver) is None:
            on_abort(job)
            job = None
        else:
            remaining = job.bytes_remaining
            if remaining <= budget:
                budget -= remaining
                on_complete(job.msg_id, receiver, t_now)
                job = None
            else:
                job.bytes_remaining = remaining - budget
                return job
    while queue:
        if budget <= 0:
            return None
        msg_id, enq = queue.popleft()
        size = validate_job(msg_id, sender, receiver)
        if size is None:
            continue
        if enq > t_prev:
            # a job enqueued mid-interval only gets its elapsed share
            cap = bandwidth_bps * (t_now - enq) * 0.125
            if cap < budget:
                budget = cap
            if budget <= 0:
                return TransferJob(msg_id, sender, receiver, size, size, enq)
        if size <= budget:
            budget -= size
            on_complete(msg_id, receiver, t_now)
        else:
            return TransferJob(msg_id, sender, receiver, size, size - budget,
                               max(enq, t_prev))
    return None


def advance_link(link: LinkState, t_prev: float, t_now: float,
                 bandwidth_bps: float, validate_job, on_complete,
                 on_abort) -> None:
    """Move bytes across one link for the interval [t_prev, t_now).

    `validate_job(msg_id, sender, receiver)` returns the message size while
    the transfer is still worth doing (sender holds it, receiver lacks it,
    not expired) or None. A queued entry failing validation is dropped
    silently; an in-flight job failing it is aborted via `on_abort(job)`.
    `on_complete(msg_id, receiver, t_now)` fires when the final byte lands.
    Per interval, total bytes moved never exceed bandwidth * dt / 8; the
    budget is split equally when both directions have work, and within one
    direction jobs run sequentially in queue order.
    """
    dt = t_now - t_prev
    if dt <= 0:
        return
    total_budget = bandwidth_bps * dt * 0.125
    ab_active = link.job_ab is not None or bool(link.queue_ab)
    ba_active = link.job_ba is not None or bool(link.queue_ba)
    if not ab_active and not ba_active:
        return
    share = total_budget * 0.5 if (ab_active and ba_active) else total_budget
    if ab_active:
        link.job_ab = _advance_direction(link.a, link.b, link.queue_ab,
                                         link.job_ab, share, t_prev, t_now,
                                         bandwidth_bps, validate_job,
                                         on_complete, on_abort)
    if ba_active:
        link.job_ba = _advance_direction(link.b, link.a, link.queue_ba,
                                         link.job_ba, share, t_prev, t_now,
                                         bandwidth_bps, validate_job,
                                         on_complete, on_abort)


def transfer_ticks(size_bytes: int, bandwidth_bps: float, tick: float) -> int:
    """Ticks needed to move `size_bytes` on an otherwise idle link."""
    return math.ceil(size_bytes * 8.0 / bandwidth_bps / tick)
