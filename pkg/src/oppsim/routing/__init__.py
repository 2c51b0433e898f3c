"""Routing protocols behind one contract: epidemic, prophet, bubblerap."""

from __future__ import annotations

from ..scenario import ProtocolParams
from .base import Buffer, ForwardDecision, Message, expire_messages
from .bubble import BubbleState, bubble_decide
from .epidemic import EpidemicState, epidemic_decide
from .prophet import ProphetState, prophet_decide

PROTOCOL_STATES = {
    "epidemic": EpidemicState,
    "prophet": ProphetState,
    "bubblerap": BubbleState,
}


def make_states(protocol: str, node_ids, params: ProtocolParams):
    """Fresh per-node protocol state objects for a run."""
    try:
        cls = PROTOCOL_STATES[protocol]
    except KeyError:
        raise ValueError(f"unknown protocol '{protocol}' "
                         f"(valid: {', '.join(sorted(PROTOCOL_STATES))})") from None
    return {i: cls(i, params) for i in node_ids}


def plan_offer_ids(sender_id: int, sender_buffer: Buffer, sender_state,
                   peer_id: int, peer_held, peer_state, now: float,
                   already_offered) -> tuple[list[str], list[str]]:
    """Replication queue for one side of a contact, as (to-destination, rest).

    Both lists keep receipt order. Messages the peer holds, expired
    messages, messages already offered on this contact, and messages this
    node is the destination of are skipped.
    """
    front: list[str] = []
    rest: list[str] = []
    if getattr(sender_state, "always_replicates", False):
        for msg in sender_buffer.messages():
            mid = msg.msg_id
            if mid in already_offered or mid in peer_held:
                continue
            dst = msg.dst
            if dst == sender_id or msg.expires_at <= now:
                continue
            (front if dst == peer_id else rest).append(mid)
        return front, rest
    for msg in sender_buffer.messages():
        mid = msg.msg_id
        if mid in already_offered or mid in peer_held:
            continue
        dst = msg.dst
        if dst == sender_id:  # delivered copy is kept but never re-offered
            continue
        if msg.expires_at <= now:
            continue
        if dst == peer_id:
            front.append(mid)
        elif sender_state.should_replicate(peer_state, dst, now):
            rest.append(mid)
    return front, rest


def plan_offers(sender_id: int, sender_buffer: Buffer, sender_state,
                peer_id: int, peer_held, peer_state, now: float,
                already_offered) -> list[ForwardDecision]:
    """Ordered replication queue for one side of a contact.

    Destination-bound messages come first (flagged delivered), then the
    rest in receipt order.
    """
    front, rest = plan_offer_ids(sender_id, sender_buffer, sender_state,
                                 peer_id, peer_held, peer_state, now,
                                 already_offered)
    return ([ForwardDecision(mid, replicate=True, delivered=True) for mid in front]
            + [ForwardDecision(mid, replicate=True, delivered=False) for mid in rest])
