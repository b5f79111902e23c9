"""Command-line front end.

Subcommands: gen, solve, build, run, bench. Everything here is parsing
and formatting; the work happens in the library modules.

Exit codes: 0 success, 2 configuration or parse error, 3 protocol
violation inside the simulator, 4 livelock cap reached.

Bench config file: flat `key = value` lines, `#` comments. Keys:
  grids    comma-separated grid dims (e.g. 4x4, 2x2x4)
  edges    comma-separated edge-list file paths
  root     root node id (default 0)
  algos    comma-separated algorithm names (default all four)
  packets  comma-separated N values (default 100, 500, 2500)
  out      output directory
  trace    true/false, retain per-transfer dumps on runs
  max_den  denominator bound for schedule compilation (default 8)
  jobs     worker process count (default 1)
Command-line flags override file values.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

from .algorithms import POLICY_NAMES, BbsPolicy, make_policy
from .balance import LPError, solve_balanced, verify_constraints
from .schedule import (ScheduleError, compile_balanced,
                       compile_from_occupancies, deserialize_schedule,
                       serialize_schedule)
from .sim import (LivelockError, ProtocolViolation, SimConfig, run,
                  trace_csv, transfers_csv)
from .topology import TopologyError, from_edge_list, grid, to_edge_list

CSV_HEADER = "topology,algorithm,N,T,avg_AE,norm_AE,T_I,T_S,T_F,T_over_Tb"

CONFIG_KEYS = ("grids", "edges", "root", "algos", "packets", "out", "trace",
               "max_den", "jobs")


class CliError(Exception):
    pass


def _parse_dims(s):
    try:
        dims = tuple(int(x) for x in s.split("x"))
    except ValueError:
        raise TopologyError("bad grid spec %r (want e.g. 4x4 or 8x8x16)" % s)
    if not dims:
        raise TopologyError("bad grid spec %r" % s)
    return dims


def _load_one_topology(grid_spec, edges_path, root):
    if (grid_spec is None) == (edges_path is None):
        raise CliError("give exactly one of --grid or --edges")
    if grid_spec is not None:
        return grid(_parse_dims(grid_spec), root=root if root is not None else 0)
    with open(edges_path) as fh:
        text = fh.read()
    label = os.path.splitext(os.path.basename(edges_path))[0]
    return from_edge_list(text, root=root, label=label)


def _out_path(out_dir, name):
    d = out_dir or "."
    os.makedirs(d, exist_ok=True)
    return os.path.join(d, name)


def _frac(s):
    f = Fraction(s)
    return "%d/%d" % (f.numerator, f.denominator) if f.denominator != 1 else str(f.numerator)


# ---------------------------------------------------------------------------
# subcommands

def cmd_gen(args):
    if args.grid is None:
        raise CliError("gen needs --grid")
    t = grid(_parse_dims(args.grid), root=args.root if args.root is not None else 0)
    path = _out_path(args.out, t.label + ".edges")
    with open(path, "w") as fh:
        fh.write(to_edge_list(t))
    print("%s: %d nodes, %d edges" % (path, t.P, len(t.edges)))
    return 0


def cmd_solve(args):
    t = _load_one_topology(args.grid, args.edges, args.root)
    sol = solve_balanced(t)
    bad = verify_constraints(t, sol.occupancies, C=sol.C)
    if bad:
        print("internal error: solution fails verification: %s" % bad,
              file=sys.stderr)
        return 1
    lines = ["# C=%d/%d" % (sol.C.numerator, sol.C.denominator)]
    for (i, j) in sorted(sol.occupancies):
        o = sol.occupancies[(i, j)]
        lines.append("%d,%d,%d,%d" % (i, j, o.numerator, o.denominator))
    body = "\n".join(lines) + "\n"
    print("C = %s" % _frac(sol.C))
    if args.out:
        path = _out_path(args.out, t.label + ".occupancies.csv")
        with open(path, "w") as fh:
            fh.write(body)
        print(path)
    else:
        sys.stdout.write(body)
    return 0


def _read_occupancies(path):
    occ = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ScheduleError(
                    "%s line %d: expected 'i,j,num,den'" % (path, lineno))
            try:
                occ[(int(parts[0]), int(parts[1]))] = Fraction(
                    int(parts[2]), int(parts[3]))
            except (ValueError, ZeroDivisionError):
                raise ScheduleError("%s line %d: bad value" % (path, lineno))
    return occ


def cmd_build(args):
    t = _load_one_topology(args.grid, args.edges, args.root)
    if args.occ:
        occ = _read_occupancies(args.occ)
        sched = compile_from_occupancies(t, occ, max_den=args.max_den)
    else:
        sched, _ = compile_balanced(t, max_den=args.max_den or 8)
    path = _out_path(args.out, t.label + ".schedule")
    with open(path, "w") as fh:
        fh.write(serialize_schedule(sched))
    print("%s: %d frames" % (path, sched.period))
    return 0


def cmd_run(args):
    t = _load_one_topology(args.grid, args.edges, args.root)
    if args.algo not in POLICY_NAMES:
        raise CliError("unknown algorithm %r (choose from %s)"
                       % (args.algo, ", ".join(POLICY_NAMES)))
    if args.packets is None or args.packets < 1:
        raise CliError("--packets must be a positive integer")
    N = args.packets
    if args.schedule:
        with open(args.schedule) as fh:
            sched = deserialize_schedule(fh.read())
        if sched.P != t.P or sched.root != t.root:
            raise CliError("schedule is for p=%d root=%d, topology has p=%d root=%d"
                           % (sched.P, sched.root, t.P, t.root))
        if args.algo != "bbs":
            raise CliError("--schedule only applies to --algo bbs")
        policy = BbsPolicy(sched)
    else:
        policy = make_policy(args.algo, t, N)
    result = run(t, policy, SimConfig(N, retain_transfers=args.trace))
    report = {
        "topology": t.label or ("p%d" % t.P),
        "algorithm": args.algo,
        "N": N,
        "T": result.T,
        "avg_AE": round(float(result.avg_active_edges), 4),
        "avg_AE_exact": _frac(result.avg_active_edges),
        "norm_AE": round(float(result.normalized_active), 4),
        "norm_AE_exact": _frac(result.normalized_active),
        "T_I": result.phases.T_I,
        "T_S": result.phases.T_S,
        "T_F": result.phases.T_F,
        "phases_clamped": result.phases.clamped,
        "total_transfers": result.total_transfers,
    }
    if args.trace:
        base = "%s_%s_%d" % (report["topology"], args.algo, N)
        tpath = _out_path(args.out, base + ".trace.csv")
        with open(tpath, "w") as fh:
            fh.write(trace_csv(result.trace))
        xpath = _out_path(args.out, base + ".transfers.csv")
        with open(xpath, "w") as fh:
            fh.write(transfers_csv(result.trace))
        report["trace_csv"] = tpath
        report["transfers_csv"] = xpath
    print(json.dumps(report, indent=2))
    return 0


# ---------------------------------------------------------------------------
# bench

def _read_config(path):
    cfg = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError("%s line %d: expected 'key = value'" % (path, lineno))
            k, v = (s.strip() for s in line.split("=", 1))
            if k not in CONFIG_KEYS:
                raise CliError("%s line %d: unknown key %r (known: %s)"
                               % (path, lineno, k, ", ".join(CONFIG_KEYS)))
            cfg[k] = v
    return cfg


def _csvlist(s):
    return [x.strip() for x in s.split(",") if x.strip()]


def _bench_cell(payload):
    (edge_text, root, label, algo, N, sched_text) = payload
    t = from_edge_list(edge_text, root=root, label=label)
    if sched_text is not None:
        policy = BbsPolicy(deserialize_schedule(sched_text))
    else:
        policy = make_policy(algo, t, N)
    r = run(t, policy, SimConfig(N))
    row = (label, algo, N, r.T, float(r.avg_active_edges),
           float(r.normalized_active), r.phases.T_I, r.phases.T_S,
           r.phases.T_F)
    series = trace_csv(r.trace)
    return row, series


def cmd_bench(args):
    cfg = _read_config(args.config) if args.config else {}
    grids = args.grid if args.grid else _csvlist(cfg.get("grids", ""))
    edge_files = args.edges if args.edges else _csvlist(cfg.get("edges", ""))
    root = args.root if args.root is not None else (
        int(cfg["root"]) if "root" in cfg else None)
    algos = args.algo if args.algo else (
        _csvlist(cfg["algos"]) if "algos" in cfg else list(POLICY_NAMES))
    packets = args.packets if args.packets else (
        [int(x) for x in _csvlist(cfg["packets"])] if "packets" in cfg
        else [100, 500, 2500])
    out_dir = args.out or cfg.get("out") or "."
    max_den = args.max_den if args.max_den is not None else int(cfg.get("max_den", 8))
    jobs = args.jobs if args.jobs is not None else int(cfg.get("jobs", 1))
    if not algos:
        raise CliError("empty algorithm list")
    if not packets or any(n < 1 for n in packets):
        raise CliError("packet counts must be positive")
    for a in algos:
        if a not in POLICY_NAMES:
            raise CliError("unknown algorithm %r" % a)
    topologies = []
    for g in grids:
        topologies.append(grid(_parse_dims(g), root=root if root is not None else 0))
    for path in edge_files:
        with open(path) as fh:
            text = fh.read()
        label = os.path.splitext(os.path.basename(path))[0]
        topologies.append(from_edge_list(text, root=root, label=label))
    if not topologies:
        raise CliError("no topologies given (grids or edges)")
    labels = [t.label for t in topologies]
    if len(set(labels)) != len(labels):
        raise CliError("duplicate topology labels: %s" % ", ".join(labels))

    schedules = {}
    for t in topologies:
        if "bbs" in algos:
            sched, _ = compile_balanced(t, max_den=max_den)
            schedules[t.label] = serialize_schedule(sched)
    cells = []
    for t in topologies:
        for algo in algos:
            for N in packets:
                cells.append((to_edge_list(t), t.root, t.label, algo, N,
                              schedules.get(t.label) if algo == "bbs" else None))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_bench_cell, cells))
    else:
        results = [_bench_cell(c) for c in cells]

    rows = []
    bbs_T = {}
    for (label, algo, N, T, avg, norm, ti, ts, tf), series in results:
        if algo == "bbs":
            bbs_T[(label, N)] = T
        rows.append((label, algo, N, T, avg, norm, ti, ts, tf))
        spath = _out_path(out_dir, "%s_%s_%d.series.csv" % (label, algo, N))
        with open(spath, "w") as fh:
            fh.write(series)
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    lines = [CSV_HEADER]
    for (label, algo, N, T, avg, norm, ti, ts, tf) in rows:
        tb = bbs_T.get((label, N))
        ratio = "%.4f" % (T / tb) if tb else ""
        lines.append("%s,%s,%d,%d,%.4f,%.4f,%d,%d,%d,%s"
                     % (label, algo, N, T, avg, norm, ti, ts, tf, ratio))
    path = _out_path(out_dir, "results.csv")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("%s: %d rows" % (path, len(rows)))
    return 0


# ---------------------------------------------------------------------------

def _build_parser():
    p = argparse.ArgumentParser(
        prog="bbsched",
        description="Balanced broadcast schedules: solve, build, simulate, benchmark.")
    sub = p.add_subparsers(dest="cmd", required=True)

    def topo_flags(sp, multi=False):
        if multi:
            sp.add_argument("--grid", action="append",
                            help="grid dims AxB[xC]; repeatable")
            sp.add_argument("--edges", action="append",
                            help="edge-list file; repeatable")
        else:
            sp.add_argument("--grid", help="grid dims AxB[xC]")
            sp.add_argument("--edges", help="edge-list file")
        sp.add_argument("--root", type=int, help="root node id (default 0)")
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("gen", help="write a grid as an edge-list file")
    topo_flags(sp)
    sp.set_defaults(fn=cmd_gen)

    sp = sub.add_parser("solve", help="balanced occupancies and C")
    topo_flags(sp)
    sp.set_defaults(fn=cmd_solve)

    sp = sub.add_parser("build", help="compile a cyclic frame schedule")
    topo_flags(sp)
    sp.add_argument("--occ", help="occupancy CSV from solve; omit to build directly")
    sp.add_argument("--max-den", type=int, dest="max_den",
                    help="denominator bound (default 8 direct, exact with --occ)")
    sp.set_defaults(fn=cmd_build)

    sp = sub.add_parser("run", help="simulate one algorithm")
    topo_flags(sp)
    sp.add_argument("--algo", required=True, help="|".join(POLICY_NAMES))
    sp.add_argument("--packets", type=int, required=True, help="packet count N")
    sp.add_argument("--schedule", help="schedule file (bbs only; default compiles)")
    sp.add_argument("--trace", action="store_true",
                    help="write trace and transfer CSVs")
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("bench", help="sweep topologies x algorithms x N")
    topo_flags(sp, multi=True)
    sp.add_argument("--algo", action="append", help="algorithm; repeatable")
    sp.add_argument("--packets", type=int, action="append",
                    help="packet count; repeatable")
    sp.add_argument("--config", help="key=value config file")
    sp.add_argument("--max-den", type=int, dest="max_den")
    sp.add_argument("--jobs", type=int, help="worker processes (default 1)")
    sp.set_defaults(fn=cmd_bench)
    return p


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, TopologyError, ScheduleError, LPError, ValueError) as e:
        print("error: %s" % e, file=sys.stderr)
        return 2
    except OSError as e:
        print("error: %s" % e, file=sys.stderr)
        return 2
    except ProtocolViolation as e:
        print("protocol violation: %s" % e, file=sys.stderr)
        return 3
    except LivelockError as e:
        print("livelock: %s" % e, file=sys.stderr)
        return 4
