"""Flooding protocol: replicate everything the peer lacks."""

from __future__ import annotations

from typing import AbstractSet, Iterable


def epidemic_decide(held: Iterable[str], peer_held: AbstractSet[str]) -> list[str]:
    """Summary-vector difference: every held id the peer does not hold."""
    return [msg_id for msg_id in held if msg_id not in peer_held]


class EpidemicState:
    """Flooding needs no per-node state; kept for the uniform protocol surface."""

    always_replicates = True

    def __init__(self, node_id: int, params=None):
        self.node_id = node_id

    def on_encounter(self, peer: "EpidemicState", now: float) -> None:
        pass

    def on_contact_close(self, peer: "EpidemicState", duration: float, now: float) -> None:
        pass

    def should_replicate(self, peer: "EpidemicState", dst: int, now: float) -> bool:
        return True
