"""Synchronous half-duplex broadcast simulator.

One packet crosses one edge per step; a node takes part in at most one
transfer per step, in one role. The engine trusts no policy: every
proposed transfer is checked against the topology and the pre-step
state, and violations abort the run with the step and the offending
transfer named. Policies are callables (topology, state) -> transfers
and may keep private state, but within a step they must read only the
pre-step packet sets; the engine applies the whole step atomically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction


class ProtocolViolation(Exception):
    pass


class LivelockError(Exception):
    pass


@dataclass(frozen=True)
class SimConfig:
    N: int
    max_steps: int = 0          # 0 means the default 100 N + 100 P cap
    retain_transfers: bool = False

    def cap(self, P):
        return self.max_steps if self.max_steps > 0 else 100 * self.N + 100 * P


@dataclass
class SimState:
    held: list                  # per-node packet bitmask
    step: int
    N: int

    @property
    def full(self):
        return (1 << self.N) - 1


@dataclass
class RunTrace:
    active: list = field(default_factory=list)      # transfers per step
    covered: list = field(default_factory=list)     # nodes with >= 1 packet
    completed: list = field(default_factory=list)   # nodes with all N
    transfers: list = None                          # per-step lists, if retained
    edge_totals: dict = field(default_factory=dict)

    @property
    def T(self):
        return len(self.active)

    @property
    def total_transfers(self):
        return sum(self.active)


@dataclass(frozen=True)
class PhaseBreakdown:
    T_I: int
    T_S: int
    T_F: int
    clamped: bool = False


@dataclass(frozen=True)
class RunResult:
    T: int
    avg_active_edges: Fraction
    normalized_active: Fraction
    phases: PhaseBreakdown
    total_transfers: int
    trace: RunTrace = None


def initial_state(t, N):
    held = [0] * t.P
    held[t.root] = (1 << N) - 1
    return SimState(held, 0, N)


def apply_step(t, state, transfers):
    """Validate one synchronous round and return the next state."""
    used = set()
    step = state.step + 1  # 1-based, matching trace rows
    for tr in transfers:
        u, v, p = tr
        if not t.has_edge(u, v):
            raise ProtocolViolation("step %d: (%d, %d) is not an edge" % (step, u, v))
        if not 0 <= p < state.N:
            raise ProtocolViolation("step %d: packet %d out of range" % (step, p))
        if u in used or v in used:
            w = u if u in used else v
            raise ProtocolViolation(
                "step %d: node %d used twice (transfer %d->%d)" % (step, w, u, v))
        used.add(u)
        used.add(v)
        if not state.held[u] >> p & 1:
            raise ProtocolViolation(
                "step %d: sender %d does not hold packet %d" % (step, u, p))
        if state.held[v] >> p & 1:
            raise ProtocolViolation(
                "step %d: receiver %d already holds packet %d" % (step, v, p))
    held = list(state.held)
    for (u, v, p) in transfers:
        held[v] |= 1 << p
    return SimState(held, state.step + 1, state.N)


def run(t, policy, cfg):
    """Drive policy to full broadcast and measure it."""
    if cfg.N < 1:
        raise ValueError("N must be >= 1")
    state = initial_state(t, cfg.N)
    full = state.full
    cap = cfg.cap(t.P)
    trace = RunTrace()
    if cfg.retain_transfers:
        trace.transfers = []
    uniform = all(t.rate(*e) == 1 for e in t.directed_edges())
    credit = None if uniform else {e: Fraction(0) for e in t.directed_edges()}
    while any(h != full for h in state.held):
        if state.step >= cap:
            raise LivelockError("no completion after %d steps" % cap)
        if credit is not None:
            for e in credit:
                credit[e] += t.rate(*e)
        transfers = list(policy(t, state))
        if credit is not None:
            for (u, v, p) in transfers:
                if credit[(u, v)] < 1:
                    raise ProtocolViolation(
                        "step %d: edge (%d, %d) not yet eligible at its rate"
                        % (state.step, u, v))
                credit[(u, v)] -= 1
        state = apply_step(t, state, transfers)
        trace.active.append(len(transfers))
        trace.covered.append(sum(1 for h in state.held if h))
        trace.completed.append(sum(1 for h in state.held if h == full))
        if trace.transfers is not None:
            trace.transfers.append(list(transfers))
        for (u, v, _) in transfers:
            trace.edge_totals[(u, v)] = trace.edge_totals.get((u, v), 0) + 1
    T = trace.T
    avg, norm = compute_metrics(trace, t.P)
    phases = detect_phases(trace, cfg.N, t.P)
    return RunResult(T, avg, norm, phases, trace.total_transfers, trace)


def detect_phases(trace, N, P):
    """Split T into fill, steady, drain.

    T_I ends when every node holds something; the step at which a second
    node completes opens T_F; T_S is the remainder. For tiny N the fill
    and drain windows overlap, in which case T_F is cut back so the
    three parts still sum to T, and the result is flagged clamped.
    """
    T = trace.T
    if T == 0:
        if P != 1:
            raise ValueError("incomplete trace")
        return PhaseBreakdown(0, 0, 0)
    if trace.completed[-1] != P:
        raise ValueError("incomplete trace")
    T_I = None
    for i, c in enumerate(trace.covered):
        if c == P:
            T_I = i + 1
            break
    if T_I is None:
        raise ValueError("incomplete trace")
    t_c = None
    for i, c in enumerate(trace.completed):
        if c >= 2:
            t_c = i + 1
            break
    if t_c is None:        # P == 1 handled above; unreachable for P >= 2
        raise ValueError("incomplete trace")
    raw_F = T - t_c + 1
    T_F = min(raw_F, T - T_I)
    T_S = T - T_I - T_F
    return PhaseBreakdown(T_I, T_S, T_F, clamped=T_F != raw_F)


def compute_metrics(trace, P):
    T = trace.T
    if T == 0:
        return Fraction(0), Fraction(0)
    avg = Fraction(trace.total_transfers, T)
    return avg, avg / (P // 2)


def trace_csv(trace):
    lines = ["step,active_edges,covered_nodes,completed_nodes"]
    for i in range(trace.T):
        lines.append("%d,%d,%d,%d" % (i + 1, trace.active[i],
                                      trace.covered[i], trace.completed[i]))
    return "\n".join(lines) + "\n"


def transfers_csv(trace):
    if trace.transfers is None:
        raise ValueError("transfers were not retained")
    lines = ["step,sender,receiver,packet"]
    for i, ts in enumerate(trace.transfers):
        for (u, v, p) in ts:
            lines.append("%d,%d,%d,%d" % (i + 1, u, v, p))
    return "\n".join(lines) + "\n"
