"""Deterministic message workload over a fixed set of source/destination pairs.

The pair set and the schedule are derived from experiment-level seeds, never
from run seeds, so every protocol cell and every run replays the identical
workload — the precondition for a fair comparison.
"""

from __future__ import annotations

import io
import math
import random
from dataclasses import dataclass

from .scenario import DAY, TrafficConfig


class TrafficError(Exception):
    pass


@dataclass(frozen=True)
class ScheduledMessage:
    msg_id: str
    time: float
    src: int
    dst: int
    size: int


@dataclass(frozen=True)
class TrafficSchedule:
    messages: tuple[ScheduledMessage, ...]

    def __len__(self) -> int:
        return len(self.messages)

    def __iter__(self):
        return iter(self.messages)


def build_pairs(node_ids: list[int], pair_count: int, seed: int) -> list[tuple[int, int]]:
    """Seed-derived set of ordered (src, dst) pairs, src != dst.

    Sampling is over pair indices, so the same (nodes, count, seed) always
    yields the same set regardless of interpreter hash state.
    """
    n = len(node_ids)
    total = n * (n - 1)
    if pair_count > total:
        raise TrafficError(f"pair_count {pair_count} exceeds {total} possible pairs")
    rng = random.Random(seed)
    picks = rng.sample(range(total), pair_count)
    pairs = []
    for k in picks:
        src = k // (n - 1)
        off = k % (n - 1)
        dst = off if off < src else off + 1
        pairs.append((node_ids[src], node_ids[dst]))
    pairs.sort()
    return pairs


def _poisson(rng: random.Random, lam: float) -> int:
    """Knuth sampler, chunked so exp(-lam) never underflows."""
    count = 0
    while lam > 0:
        step = min(lam, 50.0)
        lam -= step
        limit = math.exp(-step)
        product = rng.random()
        while product > limit:
            count += 1
            product *= rng.random()
    return count


def build_schedule(pairs: list[tuple[int, int]], cfg: TrafficConfig,
                   duration: float, seed: int) -> TrafficSchedule:
    """Scatter ~messages_per_day creations uniformly over each day.

    Per-day counts are Poisson draws with mean messages_per_day (scaled for
    a partial final day); pair and size draws are uniform. Message ids are
    assigned in creation-time order.
    """
    if duration <= 0 or cfg.messages_per_day == 0:
        return TrafficSchedule(())
    if not pairs:
        raise TrafficError("cannot generate traffic without source/destination pairs")
    rng = random.Random(seed)
    entries = []
    day = 0
    t0 = 0.0
    while t0 < duration:
        span = min(DAY, duration - t0)
        lam = cfg.messages_per_day * (span / DAY)
        for _ in range(_poisson(rng, lam)):
            t = t0 + rng.random() * span
            src, dst = pairs[rng.randrange(len(pairs))]
            size = rng.randint(cfg.size_min, cfg.size_max)
            entries.append((t, len(entries), src, dst, size))
        day += 1
        t0 = day * DAY
    entries.sort(key=lambda e: (e[0], e[1]))
    messages = tuple(
        ScheduledMessage(msg_id=f"M{i:06d}", time=t, src=src, dst=dst, size=size)
        for i, (t, _, src, dst, size) in enumerate(entries)
    )
    return TrafficSchedule(messages)


# ---------------------------------------------------------------------------
# Plain-text export/import, so identical workloads can be replayed

HEADER = "# time src dst size id"


def dump_schedule(schedule: TrafficSchedule) -> str:
    out = io.StringIO()
    out.write(HEADER + "\n")
    for m in schedule:
        out.write(f"{m.time:.3f} {m.src} {m.dst} {m.size} {m.msg_id}\n")
    return out.getvalue()


def load_schedule(text: str) -> TrafficSchedule:
    messages = []
    last_t = -math.inf
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 5:
            raise TrafficError(f"line {lineno}: expected 5 columns, got {len(parts)}")
        try:
            t, src, dst, size = float(parts[0]), int(parts[1]), int(parts[2]), int(parts[3])
        except ValueError as exc:
            raise TrafficError(f"line {lineno}: malformed row: {raw!r}") from exc
        if t < last_t:
            raise TrafficError(f"line {lineno}: creation times must be non-decreasing")
        last_t = t
        messages.append(ScheduledMessage(msg_id=parts[4], time=t, src=src,
                                         dst=dst, size=size))
    return TrafficSchedule(tuple(messages))
