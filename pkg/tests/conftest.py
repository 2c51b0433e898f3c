"""Shared test helpers: independent oracles kept free of engine internals."""

from __future__ import annotations

import math
import random


def reachable_deliveries(contacts, messages, ttl, tick=1.0):
    """Brute-force time-respecting reachability over a scripted contact plan.

    Mirrors only the public timing conventions: creation lands on the first
    tick >= its scheduled time; bytes enqueued at beacon t arrive at t+tick
    provided the pair is visible at both ends of the interval; an arrival at
    or past expiry does not count; a message never relays through its own
    destination. Implemented as per-message forward propagation, with no
    buffers, queues or protocol state.
    """
    delivered = set()
    last_beacon = max([e for _, _, _, e in contacts], default=0.0)
    for msg_id, t_create, src, dst, _size in messages:
        t0 = math.ceil(t_create / tick) * tick
        expiry = t0 + ttl
        acq = {src: t0}
        t = t0
        while t <= last_beacon and dst not in acq:
            t_next = t + tick
            if t_next >= expiry:
                break
            for a, b, s, e in contacts:
                if s <= t and t_next <= e:
                    if a in acq and acq[a] <= t and a != dst and b not in acq:
                        acq[b] = t_next
                    if b in acq and acq[b] <= t and b != dst and a not in acq:
                        acq[a] = t_next
            t = t_next
        if dst in acq:
            delivered.add(msg_id)
    return delivered


def random_trace(seed, n_nodes=6, n_contacts=10, n_messages=5, horizon=60,
                 ttl=40.0):
    """A reproducible scripted contact plan plus a message list."""
    rng = random.Random(seed)
    contacts = []
    for _ in range(n_contacts):
        a = rng.randrange(n_nodes)
        b = rng.randrange(n_nodes)
        while b == a:
            b = rng.randrange(n_nodes)
        start = float(rng.randrange(horizon))
        end = min(start + rng.randrange(0, 15), float(horizon))
        contacts.append((a, b, start, end))
    messages = []
    for k in range(n_messages):
        src = rng.randrange(n_nodes)
        dst = rng.randrange(n_nodes)
        while dst == src:
            dst = rng.randrange(n_nodes)
        messages.append((f"T{k:03d}", float(rng.randrange(horizon // 2)),
                         src, dst, 1000))
    return contacts, messages
