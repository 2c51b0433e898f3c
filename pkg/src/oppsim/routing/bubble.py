"""Social-similarity protocol: online community detection plus popularity ranking.

Communities grow from cumulative contact time (familiar peers join, whole
communities merge on sufficient overlap); popularity is the mean count of
unique encounters over recent fixed-length windows, kept both globally and
restricted to the node's own community.
"""

from __future__ import annotations

from collections import deque

from ..scenario import ProtocolParams


def bubble_decide(self_state: "BubbleState", peer_state: "BubbleState",
                  dst: int, now: float) -> bool:
    """Hand a copy up the popularity gradient, or into the destination's community.

    Replicate iff the peer is the destination; or the peer's community holds
    the destination and ours does not; or both communities hold it and the
    peer has strictly higher local popularity; or neither holds it and the
    peer has strictly higher global popularity.
    """
    if peer_state.node_id == dst:
        return True
    peer_has = dst in peer_state.community
    self_has = dst in self_state.community
    if peer_has and not self_has:
        return True
    if peer_has and self_has:
        return peer_state.local_centrality(now) > self_state.local_centrality(now)
    if not peer_has and not self_has:
        return peer_state.global_centrality(now) > self_state.global_centrality(now)
    return False


class BubbleState:
    """One node's social view: contact durations, community, windowed centrality."""

    def __init__(self, node_id: int, params: ProtocolParams):
        self.node_id = node_id
        self.params = params
        self.contact_seconds: dict[int, float] = {}
        self.familiar: set[int] = set()
        self.community: set[int] = {node_id}
        self.window_start = 0.0
        self.window_peers: set[int] = set()
        self.global_hist: deque[int] = deque(maxlen=params.window_count)
        self.local_hist: deque[int] = deque(maxlen=params.window_count)

    def roll_to(self, now: float) -> None:
        """Close any centrality windows that ended before `now`."""
        window = self.params.centrality_window
        while now - self.window_start >= window:
            self.global_hist.append(len(self.window_peers))
            self.local_hist.append(len(self.window_peers & self.community))
            self.window_peers = set()
            self.window_start += window

    def global_centrality(self, now: float) -> float:
        self.roll_to(now)
        if not self.global_hist:
            return 0.0
        return sum(self.global_hist) / len(self.global_hist)

    def local_centrality(self, now: float) -> float:
        self.roll_to(now)
        if not self.local_hist:
            return 0.0
        return sum(self.local_hist) / len(self.local_hist)

    def on_encounter(self, peer: "BubbleState", now: float) -> None:
        pass

    def update_social(self, peer_id: int, duration: float,
                      peer_community: set[int], now: float) -> None:
        """Fold a closed contact into the social state.

        Accumulates contact time, promotes the peer to familiar/community at
        the threshold, merges communities on sufficient overlap, and counts
        the encounter in the current centrality window.
        """
        if duration < 0:
            raise ValueError("contact duration must be non-negative")
        self.roll_to(now)
        total = self.contact_seconds.get(peer_id, 0.0) + duration
        self.contact_seconds[peer_id] = total
        if total >= self.params.familiar_threshold:
            self.familiar.add(peer_id)
            self.community.add(peer_id)
        if peer_community:
            overlap = len(peer_community & self.community) / len(peer_community)
            if overlap > self.params.merge_fraction:
                self.community |= peer_community
        self.window_peers.add(peer_id)

    def on_contact_close(self, peer: "BubbleState", duration: float, now: float) -> None:
        peer_community = set(peer.community)
        own_community = set(self.community)
        self.update_social(peer.node_id, duration, peer_community, now)
        peer.update_social(self.node_id, duration, own_community, now)

    def should_replicate(self, peer: "BubbleState", dst: int, now: float) -> bool:
        return bubble_decide(self, peer, dst, now)
