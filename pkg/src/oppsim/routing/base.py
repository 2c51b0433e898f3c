"""Shared routing machinery: messages, bounded FIFO buffers, forward decisions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Message:
    msg_id: str
    src: int
    dst: int
    size: int
    created_at: float
    ttl: float
    expires_at: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "expires_at", self.created_at + self.ttl)

    def expired(self, now: float) -> bool:
        return self.expires_at <= now


@dataclass(frozen=True)
class ForwardDecision:
    msg_id: str
    replicate: bool
    delivered: bool  # set only when the peer is the message destination


class Buffer:
    """Bounded message store with FIFO-by-receipt eviction.

    Insertion order of the backing dict is the receipt order, so the oldest
    received message is always evicted first.
    """

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.occupancy = 0
        self._store: dict[str, Message] = {}
        self._min_expiry = math.inf  # earliest expiry among residents (lazy)

    def __len__(self) -> int:
        return len(self._store)

    def __contains__(self, msg_id: str) -> bool:
        return msg_id in self._store

    def get(self, msg_id: str) -> Message | None:
        return self._store.get(msg_id)

    def ids(self):
        return self._store.keys()

    def messages(self):
        return self._store.values()

    def drop_expired(self, now: float) -> list[Message]:
        """Remove exactly the messages with created_at + ttl <= now."""
        if now < self._min_expiry:
            return []
        removed = [m for m in self._store.values() if m.expires_at <= now]
        for m in removed:
            del self._store[m.msg_id]
            self.occupancy -= m.size
        self._min_expiry = min((m.expires_at for m in self._store.values()),
                               default=math.inf)
        return removed

    def remove(self, msg_id: str) -> Message | None:
        m = self._store.pop(msg_id, None)
        if m is not None:
            self.occupancy -= m.size
        return m

    def admit(self, msg: Message, now: float) -> tuple[bool, list[Message], list[Message]]:
        """Store a message, evicting oldest-received entries if needed.

        Returns (admitted, evicted, expired). Expired residents are purged
        first; a message larger than the whole buffer is rejected; FIFO
        eviction never touches the incoming message itself.
        """
        store = self._store
        if msg.msg_id in store:
            raise ValueError(f"duplicate message id {msg.msg_id}")
        expired = self.drop_expired(now) if now >= self._min_expiry else ()
        size = msg.size
        occupancy = self.occupancy + size
        if occupancy <= self.capacity:  # fits without eviction
            store[msg.msg_id] = msg
            self.occupancy = occupancy
            if msg.expires_at < self._min_expiry:
                self._min_expiry = msg.expires_at
            return True, (), expired
        if size > self.capacity:
            return False, (), expired
        evicted = []
        occupancy -= size
        limit = self.capacity - size
        while occupancy > limit:
            oldest = next(iter(store))
            old = store.pop(oldest)
            occupancy -= old.size
            evicted.append(old)
        store[msg.msg_id] = msg
        self.occupancy = occupancy + size
        if msg.expires_at < self._min_expiry:
            self._min_expiry = msg.expires_at
        return True, evicted, expired


def expire_messages(buffer: Buffer, now: float) -> list[Message]:
    """Purge stale messages from a buffer; returns what was removed."""
    return buffer.drop_expired(now)
