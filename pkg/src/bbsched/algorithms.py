"""Step policies: the scheduled broadcast and three baselines.

Every policy is a callable (topology, state) -> list of transfers that
the engine validates and applies. Packet choices everywhere go through
forward-potential selection: prefer the packet missing at the most of
the receiver's neighbors, so a transfer seeds as many future transfers
as possible. Held packet sets are bitmasks, and the potential counts
are kept as carry-save bit planes so one selection costs a handful of
mask operations instead of a per-packet loop.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .schedule import compile_balanced, first_fit_classes

POLICY_NAMES = ("bbs", "greedy", "btree", "srda")


def packet_selection(u, v, state, t):
    """Packet held at u, missing at v, maximizing the count of v's
    neighbors that also miss it; ties to the lowest id; None if u has
    nothing new for v."""
    held = state.held
    cand = held[u] & ~held[v]
    if not cand:
        return None
    planes = []     # planes[i] holds bit i of each packet's neighbor-miss count
    for w in t.adj[v]:
        x = cand & ~held[w]
        for i in range(len(planes)):
            carry = planes[i] & x
            planes[i] ^= x
            x = carry
            if not x:
                break
        if x:
            planes.append(x)
    nb = len(planes)
    for score in range(len(t.adj[v]), -1, -1):
        if score >> nb:
            continue
        hit = cand
        for i in range(nb):
            hit &= planes[i] if (score >> i) & 1 else ~planes[i]
            if not hit:
                break
        if hit:
            return (hit & -hit).bit_length() - 1
    return None


# ---------------------------------------------------------------------------
# scheduled broadcast

@dataclass(frozen=True)
class BbsPolicy:
    schedule: object

    def __call__(self, t, state):
        return bbs_step(state, self, t)


def bbs_step(state, policy, t):
    frames = policy.schedule.frames
    if not frames:
        return []
    out = []
    for (u, v) in frames[state.step % len(frames)]:
        p = packet_selection(u, v, state, t)
        if p is not None:
            out.append((u, v, p))
    return out


# ---------------------------------------------------------------------------
# greedy matching

def greedy_step(state, t):
    """Each holder offers its most deficient neighbor one packet; each
    node accepts the offer from the sender with the most to give. Offers
    are resolved in receiver-id order, skipping any node already used,
    so the step stays a half-duplex matching. Not maximal: completing
    the matching measurably overshoots the intended opportunism and
    drops broadcast times well below the reference behavior."""
    held = state.held
    N = state.N
    offers = {}
    for u in range(t.P):
        best = None
        for v in t.adj[u]:
            m = held[u] & ~held[v]
            if m:
                key = (held[v].bit_count() - N, v)   # deficit descending
                if best is None or key < best[0]:
                    best = (key, v, m.bit_count())
        if best is not None:
            _, v, gives = best
            cur = offers.get(v)
            if cur is None or (-gives, u) < cur[0]:
                offers[v] = ((-gives, u), u)
    used = [False] * t.P
    out = []
    for v in sorted(offers):
        _, u = offers[v]
        if used[u] or used[v]:
            continue
        used[u] = True
        used[v] = True
        out.append((u, v, packet_selection(u, v, state, t)))
    return out


@dataclass(frozen=True)
class GreedyPolicy:
    def __call__(self, t, state):
        return greedy_step(state, t)


# ---------------------------------------------------------------------------
# binary tree

@dataclass(frozen=True)
class TreePlan:
    parent: tuple
    children: tuple     # tuple of child tuples, BFS adoption order
    order: tuple        # BFS processing order, root first
    relaxed: bool       # True when overflow forced a third child somewhere


def build_binary_tree(t):
    """BFS from the root adopting up to two unvisited neighbors, lowest
    id first. Nodes no binary tree can reach (every visited neighbor is
    full) attach to their lowest-id visited neighbor past the cap, and
    the plan is marked relaxed."""
    P = t.P
    children = [[] for _ in range(P)]
    parent = [-1] * P
    seen = [False] * P
    seen[t.root] = True
    order = [t.root]
    q = deque([t.root])
    relaxed = False
    while q:
        u = q.popleft()
        for v in t.adj[u]:
            if not seen[v] and len(children[u]) < 2:
                seen[v] = True
                parent[v] = u
                children[u].append(v)
                order.append(v)
                q.append(v)
    pending = [v for v in range(P) if not seen[v]]
    while pending:
        rest = []
        for v in pending:
            anchors = [w for w in t.adj[v] if seen[w]]
            if anchors:
                u = min(anchors)
                seen[v] = True
                parent[v] = u
                children[u].append(v)
                order.append(v)
                relaxed = True
            else:
                rest.append(v)
        if len(rest) == len(pending):
            raise ValueError("topology is not connected")
        pending = rest
    return TreePlan(tuple(parent), tuple(tuple(c) for c in children),
                    tuple(order), relaxed)


def binary_tree_step(state, plan):
    """Pipelined push down the tree. Parents yield to a child that has
    its own pending push (the child's send outranks a refill), otherwise
    feed the child with the largest deficit, lowest id on ties, lowest
    missing packet first. A node receiving this step does not send."""
    held = state.held
    N = state.N
    receiving = [False] * len(held)
    out = []
    for u in plan.order:
        if receiving[u]:
            continue
        best = None
        for c in plan.children[u]:
            miss = held[u] & ~held[c]
            if not miss:
                continue
            if any(held[c] & ~held[g] for g in plan.children[c]):
                continue
            key = (held[c].bit_count() - N, c)
            if best is None or key < best[0]:
                best = (key, c, miss)
        if best is not None:
            _, c, miss = best
            out.append((u, c, (miss & -miss).bit_length() - 1))
            receiving[c] = True
    return out


@dataclass(frozen=True)
class BinaryTreePolicy:
    plan: TreePlan

    def __call__(self, t, state):
        return binary_tree_step(state, self.plan)


# ---------------------------------------------------------------------------
# scatter plus allgather

@dataclass(frozen=True)
class SrdaPlan:
    owner: tuple        # packet id -> owning node
    seg_mask: tuple     # per node, bitmask of its segment
    order: tuple        # BFS order over the scatter tree
    depth: tuple
    hop: tuple          # per node, dict owner -> next child toward it
    down: tuple         # per node, descendants by depth descending
    classes: tuple      # allgather round structure: edge color classes


def build_srda_plan(t, N):
    P = t.P
    base, extra = divmod(N, P)
    seg_mask = []
    owner = [0] * N
    start = 0
    for i in range(P):
        size = base + (1 if i < extra else 0)
        seg_mask.append(((1 << size) - 1) << start if size else 0)
        for p in range(start, start + size):
            owner[p] = i
        start += size
    parent = [-1] * P
    seen = [False] * P
    seen[t.root] = True
    order = [t.root]
    depth = [0] * P
    q = deque([t.root])
    while q:
        u = q.popleft()
        for v in t.adj[u]:
            if not seen[v]:
                seen[v] = True
                parent[v] = u
                depth[v] = depth[u] + 1
                order.append(v)
                q.append(v)
    hop = [dict() for _ in range(P)]
    for w in range(P):
        path = [w]
        x = w
        while parent[x] != -1:
            x = parent[x]
            path.append(x)
        path.reverse()
        for a, b in zip(path, path[1:]):
            hop[a][w] = b
    # segments are contiguous by node id, so within one depth the owner
    # with the earliest segment also has the lowest packet ids
    seg_start = [m.bit_length() - m.bit_count() if m else 0 for m in seg_mask]
    down = [tuple(sorted(hop[u], key=lambda w: (-depth[w], seg_start[w])))
            for u in range(P)]
    classes = first_fit_classes(P, sorted((u, v) for (u, v) in t.edges))
    return SrdaPlan(tuple(owner), tuple(seg_mask), tuple(order),
                    tuple(depth), tuple(hop), tuple(down),
                    tuple(tuple(c) for c in classes))


class SrdaPolicy:
    """Scatter along the tree until every node holds its own segment,
    then cycle the color classes, each edge sending in whichever
    direction has more to offer (round parity decides exact ties)."""

    def __init__(self, plan):
        self.plan = plan
        self.scatter_done = False
        self.gstep = 0

    def __call__(self, t, state):
        plan = self.plan
        held = state.held
        P = t.P
        if not self.scatter_done:
            self.scatter_done = all(
                held[i] & plan.seg_mask[i] == plan.seg_mask[i] for i in range(P))
        if not self.scatter_done:
            # candidate push per child: deepest owner first, then lowest packet
            routeby = [dict() for _ in range(P)]
            haver = [False] * P
            for u in range(P):
                hu = held[u]
                if not hu:
                    continue
                for w in plan.down[u]:
                    c = plan.hop[u][w]
                    if c in routeby[u]:
                        continue
                    m = plan.seg_mask[w] & hu & ~held[c]
                    if m:
                        p = (m & -m).bit_length() - 1
                        routeby[u][c] = ((-plan.depth[w], p), p)
                        haver[u] = True
            receiving = [False] * P
            out = []
            for u in plan.order:
                if receiving[u] or not haver[u]:
                    continue
                best = None
                for c, (key, p) in routeby[u].items():
                    if haver[c]:
                        continue   # the child's own push takes the slot
                    if best is None or (key, c) < (best[0], best[2]):
                        best = (key, p, c)
                if best is None:
                    continue
                _, p, c = best
                out.append((u, c, p))
                receiving[c] = True
            return out
        cls = plan.classes[self.gstep % len(plan.classes)]
        flip = (self.gstep // len(plan.classes)) % 2 == 1
        self.gstep += 1
        out = []
        for (u, v) in cls:
            give_uv = (held[u] & ~held[v]).bit_count()
            give_vu = (held[v] & ~held[u]).bit_count()
            if give_uv == 0 and give_vu == 0:
                continue
            if give_uv > give_vu:
                a, b = u, v
            elif give_vu > give_uv:
                a, b = v, u
            else:
                a, b = (v, u) if flip else (u, v)
            out.append((a, b, packet_selection(a, b, state, t)))
        return out


def srda_policy(t, N):
    return SrdaPolicy(build_srda_plan(t, N))


# ---------------------------------------------------------------------------
# registry

def make_policy(name, t, N, schedule=None):
    """Policy by registry name. bbs compiles the topology's schedule
    unless one is supplied; the other names ignore schedule."""
    if name == "bbs":
        if schedule is None:
            schedule, _ = compile_balanced(t)
        return BbsPolicy(schedule)
    if name == "greedy":
        return GreedyPolicy()
    if name == "btree":
        return BinaryTreePolicy(build_binary_tree(t))
    if name == "srda":
        return SrdaPolicy(build_srda_plan(t, N))
    raise ValueError("unknown algorithm %r (choose from %s)"
                     % (name, ", ".join(POLICY_NAMES)))
