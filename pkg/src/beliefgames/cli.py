"""Command-line front door: solve, simulate, cascade-scan and verify pipelines
over spec files, with deterministic machine-readable outputs.

Every output file records the tool version and a digest of the run
configuration, and contains no timestamps, so identical (spec, config, seed)
runs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

from . import __version__
from .beliefs import JointPublicBelief, Prescription, PublicBelief
from .cascades import check_equivalence, is_cascading_belief
from .game import validate_spec
from .investment import in_analytic_cascade, monte_carlo
from .solver import (
    SolverConfig,
    SolverError,
    backward_solve,
    forward_construct,
    verify_equilibrium,
)
from .specfile import SpecFileError, parse_spec_file

EXIT_OK = 0
EXIT_SPEC_ERROR = 2
EXIT_SOLVER_FAILURE = 3
EXIT_VERIFY_FAILURE = 4


def _file_sha(path):
    try:
        with open(path, "rb") as fh:
            return hashlib.sha256(fh.read()).hexdigest()
    except OSError:
        return None


def _config_digest(args):
    # digest the configuration by content, not location: input files enter as
    # hashes and the output directory is excluded, so identical (spec, config,
    # seed) runs produce identical digests wherever they write
    payload = {}
    for k, v in sorted(vars(args).items()):
        if k in ("func", "out"):
            continue
        if k in ("spec", "rule") and v is not None:
            v = _file_sha(v)
        payload[k] = v
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _header(args):
    return {"tool": "beliefgames", "version": __version__,
            "config_digest": _config_digest(args)}


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _load_parsed(args):
    try:
        parsed = parse_spec_file(args.spec)
    except FileNotFoundError:
        print(f"spec file not found: {args.spec}", file=sys.stderr)
        raise SystemExit(EXIT_SPEC_ERROR)
    except SpecFileError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_SPEC_ERROR)
    if args.horizon is not None:
        import dataclasses
        parsed.spec = dataclasses.replace(parsed.spec, horizon=args.horizon)
        if parsed.investment is not None:
            parsed.investment = dataclasses.replace(parsed.investment,
                                                    horizon=args.horizon)
    violations = validate_spec(parsed.spec)
    if violations:
        for v in violations:
            print(f"spec invalid: {v}", file=sys.stderr)
        raise SystemExit(EXIT_SPEC_ERROR)
    return parsed


def _solver_config(args):
    return SolverConfig(grid_k=args.grid, tolerance=args.tol)


def _solve(parsed, args):
    try:
        return backward_solve(parsed.spec, parsed.root_or_default(),
                              _solver_config(args))
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_SOLVER_FAILURE)


class LoadedNode:
    def __init__(self, data):
        self.node_id = data["id"]
        self.t = data["t"]
        comps = []
        for comp in data["belief"]:
            comps.append(PublicBelief(tuple(tuple(a) for a in comp["atoms"]),
                                      tuple(comp["weights"]),
                                      off_equilibrium=comp["off_equilibrium"]))
        self.belief = JointPublicBelief(tuple(comps))
        self.prescriptions = tuple(
            Prescription(tuple(tuple(c) for c in p["cells"]),
                         tuple(tuple(d) for d in p["dists"]))
            for p in data["prescriptions"])
        self.children = {int(k): v for k, v in data["children"].items()}
        self.child_off = {int(k): v for k, v in data["child_off_equilibrium"].items()}
        self.residual = data["residual"]


class RuleView:
    """Read-only equilibrium rule reconstructed from a serialized rule file;
    enough surface for simulation, forward construction and cascade scans."""

    def __init__(self, spec, data):
        self.spec = spec
        self.root_id = data["root"]
        self.nodes = {n["id"]: LoadedNode(n) for n in data["nodes"]}

    def node(self, node_id):
        return self.nodes[node_id]

    def reachable_ids(self):
        return sorted(self.nodes, key=lambda n: (self.nodes[n].t, n))


def _rule_for(parsed, args):
    if getattr(args, "rule", None):
        with open(args.rule, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return RuleView(parsed.spec, data["rule"])
    return _solve(parsed, args)


def cmd_solve(args):
    parsed = _load_parsed(args)
    rule = _solve(parsed, args)
    os.makedirs(args.out, exist_ok=True)
    serialized = rule.to_jsonable()
    _write_json(os.path.join(args.out, "rule.json"),
                {**_header(args), "rule": serialized})
    root = rule.node(rule.root_id)
    summary = {
        **_header(args),
        "num_nodes": serialized["num_nodes"],
        "max_residual": rule.max_residual(),
        "root_values": serialized["nodes"][0]["values"],
        "root_prescription_actions": [
            [max(range(len(d)), key=lambda a: d[a]) for d in gam.dists]
            for gam in root.prescriptions],
    }
    _write_json(os.path.join(args.out, "solve_summary.json"), summary)
    return EXIT_OK


def _parse_policy(text, n):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) == 1:
        parts = parts * n
    if len(parts) != n:
        raise SystemExit(EXIT_SPEC_ERROR)
    return tuple(int(p) for p in parts)


def cmd_simulate(args):
    parsed = _load_parsed(args)
    if parsed.investment is None:
        print("simulate requires an [investment] spec", file=sys.stderr)
        return EXIT_SPEC_ERROR
    params = parsed.investment
    policy = rule = None
    if args.policy is not None:
        policy = _parse_policy(args.policy, params.num_players)
    else:
        rule = _rule_for(parsed, args)
    force = None
    if args.force_state is not None:
        force = 1 if args.force_state in ("+1", "1") else 0
    result = monte_carlo(params, rule=rule, policy=policy,
                         num_traj=args.traj, seed=args.seed, force_states=force)
    os.makedirs(args.out, exist_ok=True)
    if args.format == "csv":
        path = os.path.join(args.out, "trajectories.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# beliefgames {__version__} config {_config_digest(args)}\n")
            fh.write("traj,t,player,xi,action,in_cascade\n")
            for k, tr in enumerate(result.trajectories):
                for t in range(1, params.horizon + 1):
                    for i in range(params.num_players):
                        fh.write(f"{k},{t},{i},{tr.xi[i][t - 1]!r},"
                                 f"{tr.actions[t - 1][i]},"
                                 f"{int(tr.in_cascade[t - 1][i])}\n")
    summary = {
        **_header(args),
        "num_traj": result.num_traj,
        "seed": result.seed,
        "stats": {k: (v if not isinstance(v, dict) else
                      {str(a): dict(sorted((str(t), c) for t, c in h.items()))
                       for a, h in v.items()})
                  for k, v in result.stats.items()},
    }
    _write_json(os.path.join(args.out, "sim_summary.json"), summary)
    return EXIT_OK


def cmd_cascade_scan(args):
    parsed = _load_parsed(args)
    rule = _rule_for(parsed, args)
    spec = parsed.spec
    profiles = spec.joint_actions()
    report_nodes = []
    for nid in rule.reachable_ids():
        node = rule.node(nid)
        entry = {"id": nid, "t": node.t, "profiles": {}}
        for aflat, a in enumerate(profiles):
            check = is_cascading_belief(rule, nid, a)
            info = {"cascading": check.cascading}
            if not check.cascading:
                info["violation_stage"] = check.violation[0]
                info["violation_player"] = check.violation[1]
            if parsed.investment is not None:
                info["analytic"] = in_analytic_cascade(node.belief, a,
                                                       parsed.investment)
            entry["profiles"][str(aflat)] = info
        report_nodes.append(entry)

    profile = forward_construct(rule, spec)
    depth = min(args.depth, spec.horizon - 1)
    histories = [[]]
    frontier = [[]]
    for _ in range(depth):
        nxt = []
        for h in frontier:
            for aflat in range(spec.num_joint_actions):
                nxt.append(h + [aflat])
        histories.extend(nxt)
        frontier = nxt
    mismatch_report = {}
    for aflat, a in enumerate(profiles):
        mismatches = check_equivalence(profile, rule, histories, a)
        mismatch_report[str(aflat)] = [list(m["history"]) for m in mismatches]

    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "cascade_report.json"), {
        **_header(args),
        "nodes": report_nodes,
        "equivalence_mismatches": mismatch_report,
    })
    return EXIT_OK


def cmd_verify(args):
    parsed = _load_parsed(args)
    rule = _solve(parsed, args)
    gain = float(verify_equilibrium(rule))
    os.makedirs(args.out, exist_ok=True)
    passed = bool(gain <= 1e-8)
    _write_json(os.path.join(args.out, "deviation_report.json"), {
        **_header(args),
        "max_gain": gain,
        "pass": passed,
        "threshold": 1e-8,
    })
    return EXIT_OK if passed else EXIT_VERIFY_FAILURE


def build_parser():
    parser = argparse.ArgumentParser(
        prog="beliefgames",
        description="Solve, simulate and analyze finite dynamic games with "
                    "asymmetric information.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--spec", required=True, help="spec file path")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--grid", type=int, default=51, help="simplex grid size K")
        p.add_argument("--tol", type=float, default=1e-9, help="solver tolerance")
        p.add_argument("--seed", type=int, default=0, help="random seed")
        p.add_argument("--traj", type=int, default=1000, help="Monte Carlo trajectories")
        p.add_argument("--horizon", type=int, default=None, help="horizon override")
        p.add_argument("--format", choices=("csv", "summary"), default="csv")

    p = sub.add_parser("solve", help="backward-solve the reachable belief tree")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="Monte Carlo simulation (investment game)")
    common(p)
    p.add_argument("--rule", default=None, help="solved rule.json (default: solve)")
    p.add_argument("--policy", default=None,
                   help="fixed constant actions, e.g. '1' or '1,0' (skips solving)")
    p.add_argument("--force-state", default=None, choices=("+1", "-1", "0", "1"),
                   help="force every player's true state")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cascade-scan", help="cascade membership and equivalence scan")
    common(p)
    p.add_argument("--rule", default=None, help="solved rule.json (default: solve)")
    p.add_argument("--depth", type=int, default=3, help="history depth for equivalence")
    p.set_defaults(func=cmd_cascade_scan)

    p = sub.add_parser("verify", help="deviation check on the solved rule")
    common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
