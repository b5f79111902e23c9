"""Network topologies: grids, edge-list files, BFS distances, bipartiteness.

Nodes are dense integers 0..P-1. Grids are row-major (last axis fastest).
Every directed edge carries a rational rate, 1 by default.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    P: int
    edges: tuple  # sorted tuple of (u, v) with u < v
    root: int = 0
    label: str = ""
    rates: dict = field(default_factory=dict, compare=False)  # (i, j) -> Fraction

    @property
    def adj(self):
        # cached adjacency, built once per instance
        a = self.__dict__.get("_adj")
        if a is None:
            a = [[] for _ in range(self.P)]
            for u, v in self.edges:
                a[u].append(v)
                a[v].append(u)
            for lst in a:
                lst.sort()
            self.__dict__["_adj"] = a
        return a

    def rate(self, i, j):
        return self.rates.get((i, j), Fraction(1))

    def directed_edges(self):
        """All directed edges in canonical (sorted) order."""
        out = []
        for u, v in self.edges:
            out.append((u, v))
            out.append((v, u))
        out.sort()
        return out

    def has_edge(self, u, v):
        if u > v:
            u, v = v, u
        return (u, v) in self.__dict__.setdefault("_eset", set(self.edges))


def make_topology(P, edge_pairs, root=0, label="", rates=None):
    if P < 1:
        raise TopologyError("node count must be positive")
    eset = set()
    for u, v in edge_pairs:
        if u == v:
            raise TopologyError(f"self loop at node {u}")
        if not (0 <= u < P and 0 <= v < P):
            raise TopologyError(f"edge ({u},{v}) out of range for P={P}")
        eset.add((min(u, v), max(u, v)))
    if not (0 <= root < P):
        raise TopologyError(f"root {root} out of range")
    t = Topology(P=P, edges=tuple(sorted(eset)), root=root, label=label,
                 rates=dict(rates or {}))
    if P > 1:
        d = bfs_distances(t, root)
        if any(x < 0 for x in d):
            raise TopologyError("topology is disconnected")
    return t


def grid(dims, root=0, label=""):
    """n-dimensional grid. dims like (4, 4) or (2, 2, 4)."""
    if not dims or any(d < 1 for d in dims):
        raise TopologyError(f"bad grid dims {dims}")
    P = 1
    for d in dims:
        P *= d
    strides = [1] * len(dims)
    for i in range(len(dims) - 2, -1, -1):
        strides[i] = strides[i + 1] * dims[i + 1]

    def nid(coord):
        return sum(c * s for c, s in zip(coord, strides))

    edges = []
    def walk(coord, axis):
        if axis == len(dims):
            u = nid(coord)
            for ax in range(len(dims)):
                if coord[ax] + 1 < dims[ax]:
                    c2 = list(coord)
                    c2[ax] += 1
                    edges.append((u, nid(c2)))
            return
        for x in range(dims[axis]):
            walk(coord + [x], axis + 1)
    walk([], 0)
    if not label:
        label = "x".join(str(d) for d in dims)
    return make_topology(P, edges, root=root, label=label)


def grid_dims(t):
    """Recover grid dimensions from the label if this topology came from grid()."""
    try:
        dims = tuple(int(x) for x in t.label.split("x"))
    except (ValueError, AttributeError):
        return None
    P = 1
    for d in dims:
        P *= d
    if P != t.P or any(d < 1 for d in dims):
        return None
    # confirm adjacency actually matches; labels are advisory
    g = grid(dims, root=t.root)
    return dims if g.edges == t.edges else None


def bfs_distances(t, root=None):
    """Exact hop distances from the root; -1 marks unreachable nodes."""
    if root is None:
        root = t.root
    dist = [-1] * t.P
    dist[root] = 0
    q = deque([root])
    while q:
        u = q.popleft()
        for v in t.adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def is_bipartite(t):
    """Returns (flag, coloring). coloring is per-node 0/1 when flag is true."""
    color = [-1] * t.P
    for s in range(t.P):
        if color[s] >= 0:
            continue
        color[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for v in t.adj[u]:
                if color[v] < 0:
                    color[v] = 1 - color[u]
                    q.append(v)
                elif color[v] == color[u]:
                    return False, None
    return True, color


def from_edge_list(text, root=None, label=""):
    """Parse the edge-list format.

    First non-comment line: `p <P>`. Then `<u> <v>` per edge, optional third
    token `num/den` sets the rate in both directions. `#` starts a comment.
    """
    P = None
    pairs = []
    rates = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if P is None:
            if len(parts) != 2 or parts[0] != "p":
                raise TopologyError(f"line {lineno}: expected 'p <P>'")
            try:
                P = int(parts[1])
            except ValueError:
                raise TopologyError(f"line {lineno}: bad node count")
            if P < 1:
                raise TopologyError(f"line {lineno}: node count must be positive")
            continue
        if len(parts) not in (2, 3):
            raise TopologyError(f"line {lineno}: expected '<u> <v> [rate]'")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise TopologyError(f"line {lineno}: bad node id")
        if len(parts) == 3:
            try:
                num, den = parts[2].split("/")
                r = Fraction(int(num), int(den))
            except (ValueError, ZeroDivisionError):
                raise TopologyError(f"line {lineno}: bad rate {parts[2]!r}")
            if r <= 0:
                raise TopologyError(f"line {lineno}: rate must be positive")
            rates[(u, v)] = r
            rates[(v, u)] = r
        pairs.append((u, v))
    if P is None:
        raise TopologyError("empty edge-list file")
    return make_topology(P, pairs, root=root if root is not None else 0,
                         label=label, rates=rates)


def to_edge_list(t):
    lines = [f"p {t.P}"]
    for u, v in t.edges:
        r = t.rate(u, v)
        if r != 1:
            lines.append(f"{u} {v} {r.numerator}/{r.denominator}")
        else:
            lines.append(f"{u} {v}")
    return "\n".join(lines) + "\n"
