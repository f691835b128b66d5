"""Command-line entry point.

    multiscale-bft run <config.json> [--out DIR] [--workers N]
    multiscale-bft verify [--workers N] [--criteria 1,2,3]
    multiscale-bft topo-export <config.json> [--edges]
"""

from __future__ import annotations

import argparse
import json
import sys

from .acceptance import verify_paper_claims
from .campaigns import ConfigError, ExperimentConfig, _build_stack, run_campaign, write_results
from .topology import SizingError, build_hypercube


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    result = run_campaign(cfg, args.workers)
    csv_path, manifest_path = write_results(result, args.out or cfg.output.get("dir", "."))
    status = "all verdicts passed" if result.passed else f"{result.failures} rows failed"
    print(f"{cfg.name}: {len(result.rows)} rows, {status}")
    print(f"wrote {csv_path} and {manifest_path}")
    return 0 if result.passed else 1


def _cmd_verify(args) -> int:
    criteria = [int(x) for x in args.criteria.split(",")] if args.criteria else None
    report = verify_paper_claims(criteria, workers=args.workers)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(report.text())
    return report.exit_status()


def _cmd_topo_export(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    topo = cfg.topology
    if cfg.kind == "securecomm":
        stack = _build_stack(topo)
        doc = stack.to_dict()
        doc["sizes"] = list(stack.sizes)
        if args.edges:
            doc["layers"] = [
                {"layer": lay.index, "size": lay.size, "degree": lay.degree,
                 "adjacency": [list(map(list, block)) for block in lay.adjacency]}
                for lay in stack.layers
            ]
    elif "s" in topo and "L" in topo:
        hc = build_hypercube(int(topo["s"]), int(topo["L"]))
        doc = hc.to_dict()
        doc["degree"] = hc.degree
        if args.edges:
            doc["neighbors"] = [sorted(hc.neighbor_set(v)) for v in hc.nodes]
    else:
        raise ConfigError(f"a {cfg.kind} config has no network topology to export")
    json.dump(doc, sys.stdout, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multiscale-bft", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment configuration")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (default: the config's output.dir or .)")
    run.add_argument("--workers", type=int, default=1, help="process count; does not change outputs")
    run.set_defaults(func=_cmd_run)

    verify = sub.add_parser("verify", help="run the bundled acceptance suite")
    verify.add_argument("--workers", type=int, default=2, help="worker count used by the determinism rerun")
    verify.add_argument("--criteria", help="comma-separated subset, e.g. 1,2,3")
    verify.add_argument("--report", help="also write the report lines to this file")
    verify.set_defaults(func=_cmd_verify)

    topo = sub.add_parser("topo-export", help="print the topology of a configuration as JSON")
    topo.add_argument("config")
    topo.add_argument("--edges", action="store_true", help="include adjacency lists")
    topo.set_defaults(func=_cmd_topo_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SizingError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
