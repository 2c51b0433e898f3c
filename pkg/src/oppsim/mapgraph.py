"""Street-map substrate for all movement: waypoints, edges, tagged locations.

Maps are either generated synthetically (deterministic per seed) or loaded
from a plain-text file. Movement never leaves the graph.
"""

from __future__ import annotations

import heapq
import io
import math
import random
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra


class MapError(Exception):
    pass


@dataclass
class MapGraph:
    xs: list[float]
    ys: list[float]
    # adjacency: node -> sorted list of (neighbor, edge length)
    adj: list[list[tuple[int, float]]]
    homes: list[int] = field(default_factory=list)
    offices: list[int] = field(default_factory=list)
    meeting_spots: list[int] = field(default_factory=list)
    bus_routes: list[list[int]] = field(default_factory=list)
    # office waypoint -> interior waypoints used for intra-office wandering
    office_interiors: dict[int, list[int]] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.xs)

    def distance(self, a: int, b: int) -> float:
        return math.hypot(self.xs[a] - self.xs[b], self.ys[a] - self.ys[b])

    def edge_list(self) -> list[tuple[int, int, float]]:
        edges = []
        for a, nbrs in enumerate(self.adj):
            for b, w in nbrs:
                if a < b:
                    edges.append((a, b, w))
        return edges


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise MapError(msg)


def validate_map(m: MapGraph) -> MapGraph:
    """Connectivity, metric sanity and tag existence."""
    n = m.n
    _check(n >= 2, "map needs at least two waypoints")
    for a, nbrs in enumerate(m.adj):
        for b, w in nbrs:
            _check(0 <= b < n and b != a, f"edge ({a},{b}) malformed")
            _check(w >= m.distance(a, b) - 1e-6,
                   f"edge ({a},{b}) shorter than straight-line distance")
    # connectivity via BFS
    seen = {0}
    frontier = [0]
    while frontier:
        cur = frontier.pop()
        for b, _ in m.adj[cur]:
            if b not in seen:
                seen.add(b)
                frontier.append(b)
    _check(len(seen) == n, "map graph is not connected")
    for label, tags in (("home", m.homes), ("office", m.offices),
                        ("meeting_spot", m.meeting_spots)):
        for wp in tags:
            _check(0 <= wp < n, f"{label} tag {wp} is not a waypoint")
    for i, route in enumerate(m.bus_routes):
        _check(len(route) >= 2, f"bus route {i} needs at least two stops")
        for wp in route:
            _check(0 <= wp < n, f"bus route {i} stop {wp} is not a waypoint")
    for office, interior in m.office_interiors.items():
        _check(office in set(m.offices), f"interior tag on non-office {office}")
        for wp in interior:
            _check(0 <= wp < n, f"office interior {wp} is not a waypoint")
    return m


# ---------------------------------------------------------------------------
# Shortest paths

def _dijkstra_from(m: MapGraph, target: int) -> list[float]:
    dist = [math.inf] * m.n
    dist[target] = 0.0
    heap = [(0.0, target)]
    while heap:
        d, cur = heapq.heappop(heap)
        if d > dist[cur]:
            continue
        for nbr, w in m.adj[cur]:
            nd = d + w
            if nd < dist[nbr]:
                dist[nbr] = nd
                heapq.heappush(heap, (nd, nbr))
    return dist


def _greedy_reconstruct(m: MapGraph, src: int, dst: int, dist_to_dst) -> list[int]:
    # among equal-length shortest paths, always step to the smallest feasible
    # neighbor id -> lexicographically smallest waypoint sequence
    path = [src]
    cur = src
    guard = 0
    while cur != dst:
        best = -1
        for nbr, w in m.adj[cur]:  # adj is sorted by neighbor id
            if abs(dist_to_dst[nbr] + w - dist_to_dst[cur]) <= 1e-6:
                best = nbr
                break
        if best < 0:
            raise MapError(f"path reconstruction stuck at {cur} -> {dst}")
        path.append(best)
        cur = best
        guard += 1
        if guard > m.n:
            raise MapError("path reconstruction did not terminate")
    return path


def shortest_path(m: MapGraph, src: int, dst: int) -> tuple[list[int], float]:
    """Minimum-length path between waypoints.

    Ties broken by smallest lexicographic waypoint-id sequence. Identity
    queries return an empty path of length 0.
    """
    _check(0 <= src < m.n, f"waypoint {src} does not exist")
    _check(0 <= dst < m.n, f"waypoint {dst} does not exist")
    if src == dst:
        return [], 0.0
    dist = _dijkstra_from(m, dst)
    if math.isinf(dist[src]):
        raise MapError(f"waypoint {dst} unreachable from {src}")
    return _greedy_reconstruct(m, src, dst, dist), dist[src]


class PathPlanner:
    """All-pairs distance matrix with on-demand path reconstruction.

    Produces exactly the paths `shortest_path` would (same tie-break), but
    amortizes the graph search: the distance matrix is computed once per map.
    """

    def __init__(self, m: MapGraph):
        self.map = m
        rows, cols, data = [], [], []
        for a, nbrs in enumerate(m.adj):
            for b, w in nbrs:
                rows.append(a)
                cols.append(b)
                data.append(w)
        graph = csr_matrix((data, (rows, cols)), shape=(m.n, m.n))
        self.dist = _csgraph_dijkstra(graph, directed=False)

    def distance(self, a: int, b: int) -> float:
        return float(self.dist[a, b])

    def path(self, src: int, dst: int) -> list[int]:
        if src == dst:
            return []
        col = self.dist[:, dst]
        if math.isinf(col[src]):
            raise MapError(f"waypoint {dst} unreachable from {src}")
        return _greedy_reconstruct(self.map, src, dst, col)

    def nearest(self, src: int, candidates: list[int]) -> int:
        """Candidate closest to src by road distance (smallest id on ties)."""
        best = candidates[0]
        best_d = self.dist[src, best]
        for c in candidates[1:]:
            d = self.dist[src, c]
            if d < best_d - 1e-9 or (abs(d - best_d) <= 1e-9 and c < best):
                best, best_d = c, d
        return best


# ---------------------------------------------------------------------------
# Synthetic map generation

def generate_map(width: float, height: float, seed: int, *,
                 n_routes: int = 8, n_homes: int = 48, n_offices: int = 16,
                 n_meeting_spots: int = 16, spacing: float = 300.0) -> MapGraph:
    """Deterministic synthetic street grid with tagged locations.

    Same (width, height, seed) always yields an identical map. The grid is
    thinned by ~12% (staying connected), intersections get positional
    jitter, and each office waypoint receives a wide cluster of interior
    waypoints for intra-office wandering (an office spans about a city
    block, so two workers in one office can drift out of radio range).
    """
    if width <= 0 or height <= 0:
        raise MapError("map dimensions must be positive")
    rng = random.Random(seed)
    margin = min(100.0, width / 10, height / 10)
    cols = max(2, round((width - 2 * margin) / spacing) + 1)
    rows = max(2, round((height - 2 * margin) / spacing) + 1)
    sx = (width - 2 * margin) / (cols - 1)
    sy = (height - 2 * margin) / (rows - 1)
    jitter = 0.15 * min(sx, sy)

    xs, ys = [], []
    for r in range(rows):
        for c in range(cols):
            xs.append(margin + c * sx + rng.uniform(-jitter, jitter))
            ys.append(margin + r * sy + rng.uniform(-jitter, jitter))
    n_grid = rows * cols

    def wp(r, c):
        return r * cols + c

    edges = set()
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.add((wp(r, c), wp(r, c + 1)))
            if r + 1 < rows:
                edges.add((wp(r, c), wp(r + 1, c)))

    # thin the grid without disconnecting it
    adj_sets = [set() for _ in range(n_grid)]
    for a, b in edges:
        adj_sets[a].add(b)
        adj_sets[b].add(a)

    def connected_without(a, b):
        adj_sets[a].discard(b)
        adj_sets[b].discard(a)
        seen = {a}
        stack = [a]
        ok = False
        while stack:
            cur = stack.pop()
            if cur == b:
                ok = True
                break
            for nbr in adj_sets[cur]:
                if nbr not in seen:
                    seen.add(nbr)
                    stack.append(nbr)
        adj_sets[a].add(b)
        adj_sets[b].add(a)
        return ok

    removable = sorted(edges)
    rng.shuffle(removable)
    target_removals = int(0.12 * len(edges))
    removed = 0
    for a, b in removable:
        if removed >= target_removals:
            break
        if len(adj_sets[a]) > 1 and len(adj_sets[b]) > 1 and connected_without(a, b):
            edges.discard((a, b))
            adj_sets[a].discard(b)
            adj_sets[b].discard(a)
            removed += 1

    # location tags over distinct grid waypoints; small maps get fewer tags
    pool = list(range(n_grid))
    rng.shuffle(pool)
    need = n_homes + n_offices + n_meeting_spots
    budget = max(3, int(0.8 * n_grid))
    if need > budget:
        scale = budget / need
        n_homes = max(1, int(n_homes * scale))
        n_offices = max(1, int(n_offices * scale))
        n_meeting_spots = max(1, int(n_meeting_spots * scale))
        need = n_homes + n_offices + n_meeting_spots
    if need > n_grid:
        raise MapError("map too small for requested location tags")
    homes = sorted(pool[:n_homes])
    offices = sorted(pool[n_homes:n_homes + n_offices])
    meeting = sorted(pool[n_homes + n_offices:need])

    # interior clusters: 3 waypoints around each office, spread widely enough
    # that two workers at opposite ends of one office can drift out of a
    # 100 m radio range (office footprint ~ a city block)
    office_interiors: dict[int, list[int]] = {}
    for office in offices:
        interior = []
        for k in range(3):
            angle = rng.uniform(0, 2 * math.pi)
            radius = rng.uniform(35.0, 70.0)
            ix = min(max(xs[office] + radius * math.cos(angle), 1.0), width - 1.0)
            iy = min(max(ys[office] + radius * math.sin(angle), 1.0), height - 1.0)
            idx = len(xs)
            xs.append(ix)
            ys.append(iy)
            interior.append(idx)
            edges.add((office, idx))
        edges.add((interior[0], interior[1]))
        edges.add((interior[1], interior[2]))
        office_interiors[office] = interior

    # bus routes: 4-6 stops ordered into a loop around their centroid
    routes = []
    for _ in range(n_routes):
        n_stops = min(rng.randint(4, 6), n_grid)
        stops = rng.sample(range(n_grid), n_stops)
        cx = sum(xs[s] for s in stops) / n_stops
        cy = sum(ys[s] for s in stops) / n_stops
        stops.sort(key=lambda s: math.atan2(ys[s] - cy, xs[s] - cx))
        routes.append(stops)

    n = len(xs)
    adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for a, b in sorted(edges):
        w = math.hypot(xs[a] - xs[b], ys[a] - ys[b])
        adj[a].append((b, w))
        adj[b].append((a, w))
    for lst in adj:
        lst.sort()

    m = MapGraph(xs=xs, ys=ys, adj=adj, homes=homes, offices=offices,
                 meeting_spots=meeting, bus_routes=routes,
                 office_interiors=office_interiors)
    return validate_map(m)


# ---------------------------------------------------------------------------
# Plain-text map files

def dump_map(m: MapGraph) -> str:
    """Line-oriented map text: waypoints, edges, tags, routes, interiors."""
    out = io.StringIO()
    out.write("# waypoint <id> <x> <y>\n")
    for i in range(m.n):
        out.write(f"waypoint {i} {m.xs[i]!r} {m.ys[i]!r}\n")
    out.write("# edge <a> <b> <length>\n")
    for a, b, w in m.edge_list():
        out.write(f"edge {a} {b} {w!r}\n")
    for wp in m.homes:
        out.write(f"tag home {wp}\n")
    for wp in m.offices:
        out.write(f"tag office {wp}\n")
    for wp in m.meeting_spots:
        out.write(f"tag meeting_spot {wp}\n")
    for i, route in enumerate(m.bus_routes):
        out.write(f"route {i} {' '.join(str(s) for s in route)}\n")
    for office in sorted(m.office_interiors):
        pts = " ".join(str(p) for p in m.office_interiors[office])
        out.write(f"interior {office} {pts}\n")
    return out.getvalue()


def load_map(text: str) -> MapGraph:
    xs: list[float] = []
    ys: list[float] = []
    edges: list[tuple[int, int, float]] = []
    homes: list[int] = []
    offices: list[int] = []
    meeting: list[int] = []
    routes: dict[int, list[int]] = {}
    interiors: dict[int, list[int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if parts[0] == "waypoint":
                idx, x, y = int(parts[1]), float(parts[2]), float(parts[3])
                if idx != len(xs):
                    raise MapError(f"line {lineno}: waypoint ids must be sequential")
                xs.append(x)
                ys.append(y)
            elif parts[0] == "edge":
                edges.append((int(parts[1]), int(parts[2]), float(parts[3])))
            elif parts[0] == "tag":
                kind, wp = parts[1], int(parts[2])
                {"home": homes, "office": offices,
                 "meeting_spot": meeting}[kind].append(wp)
            elif parts[0] == "route":
                routes[int(parts[1])] = [int(p) for p in parts[2:]]
            elif parts[0] == "interior":
                interiors[int(parts[1])] = [int(p) for p in parts[2:]]
            else:
                raise MapError(f"line {lineno}: unknown record '{parts[0]}'")
        except (IndexError, ValueError, KeyError) as exc:
            raise MapError(f"line {lineno}: malformed record: {raw!r}") from exc

    adj: list[list[tuple[int, float]]] = [[] for _ in range(len(xs))]
    for a, b, w in edges:
        if not (0 <= a < len(xs) and 0 <= b < len(xs)):
            raise MapError(f"edge ({a},{b}) references missing waypoint")
        adj[a].append((b, w))
        adj[b].append((a, w))
    for lst in adj:
        lst.sort()
    route_list = [routes[k] for k in sorted(routes)]
    m = MapGraph(xs=xs, ys=ys, adj=adj, homes=homes, offices=offices,
                 meeting_spots=meeting, bus_routes=route_list,
                 office_interiors=interiors)
    return validate_map(m)
