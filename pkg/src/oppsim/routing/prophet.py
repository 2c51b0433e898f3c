"""Encounter-history protocol: per-destination delivery predictabilities.

Predictabilities grow on encounters, decay with time, and propagate
transitively through met peers; a message is handed to a peer only when the
peer's predictability for its destination is strictly higher.
"""

from __future__ import annotations

import math

from ..scenario import ProtocolParams

# entries below this are dropped from the table; a missing entry reads as 0
_PRUNE_AT = 1e-12


def encounter_update(p_old: float, p_init: float) -> float:
    """P_new = P_old + (1 - P_old) * P_init."""
    if not 0.0 <= p_old <= 1.0:
        raise ValueError(f"predictability out of range: {p_old}")
    if not 0.0 < p_init <= 1.0:
        raise ValueError(f"p_init out of range: {p_init}")
    return p_old + (1.0 - p_old) * p_init


def age(p: float, elapsed_units: float, gamma: float) -> float:
    """P * gamma^k for k elapsed aging units."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"predictability out of range: {p}")
    if elapsed_units < 0:
        raise ValueError("elapsed_units must be non-negative")
    return p * math.pow(gamma, elapsed_units)


def transitive_update(p_ac: float, p_ab: float, p_bc: float, beta: float) -> float:
    """P_ac_new = P_ac + (1 - P_ac) * P_ab * P_bc * beta."""
    for value in (p_ac, p_ab, p_bc):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"predictability out of range: {value}")
    return p_ac + (1.0 - p_ac) * p_ab * p_bc * beta


def prophet_decide(p_self: float, p_peer: float) -> bool:
    """Replicate iff the peer is strictly better positioned; ties hold."""
    return p_peer > p_self


class ProphetState:
    """One node's predictability table, aged lazily as a whole."""

    def __init__(self, node_id: int, params: ProtocolParams):
        self.node_id = node_id
        self.params = params
        self.table: dict[int, float] = {}
        self.last_aged = 0.0

    def age_to(self, now: float) -> None:
        if now <= self.last_aged:
            return
        k = (now - self.last_aged) / self.params.aging_unit
        factor = math.pow(self.params.gamma, k)
        self.last_aged = now
        if not self.table:
            return
        table = self.table
        for dest in list(table):
            p = table[dest] * factor
            if p < _PRUNE_AT:
                del table[dest]
            else:
                table[dest] = p

    def p_for(self, dest: int) -> float:
        return self.table.get(dest, 0.0)

    def on_encounter(self, peer: "ProphetState", now: float) -> None:
        """Contact-up bookkeeping: age both sides, direct update, transitivity."""
        self.age_to(now)
        peer.age_to(now)
        p_init = self.params.p_init
        beta = self.params.beta
        self.table[peer.node_id] = encounter_update(self.p_for(peer.node_id), p_init)
        peer.table[self.node_id] = encounter_update(peer.p_for(self.node_id), p_init)
        # transitive pass uses the peer's post-update table snapshot (and vice versa)
        mine = dict(self.table)
        theirs = dict(peer.table)
        p_ab = self.table[peer.node_id]
        for dest, p_bc in theirs.items():
            if dest == self.node_id or dest == peer.node_id:
                continue
            self.table[dest] = transitive_update(self.p_for(dest), p_ab, p_bc, beta)
        p_ba = peer.table[self.node_id]
        for dest, p_ac in mine.items():
            if dest == peer.node_id or dest == self.node_id:
                continue
            peer.table[dest] = transitive_update(peer.p_for(dest), p_ba, p_ac, beta)

    def on_contact_close(self, peer: "ProphetState", duration: float, now: float) -> None:
        pass

    def should_replicate(self, peer: "ProphetState", dst: int, now: float) -> bool:
        self.age_to(now)
        peer.age_to(now)
        return prophet_decide(self.p_for(dst), peer.p_for(dst))
