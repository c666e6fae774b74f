"""Command-line entry point.

Subcommands:
  run       full ecosystem simulation: event log, metrics, snapshot, DOT
  evolve    single-habitat evolution of the first habitat's first request
  oracle    exhaustive best chain for the same inputs as evolve
  topology  business-graph growth experiment (degree CSV, DOT, trajectory)
  validate  parse and validate a config, printing all violations

Exit status: 0 on success, 1 on validation failure, 2 on runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import engine
from .config import ConfigError, parse_config, serialize_config, serialize_snapshot
from .ecosystem import EcosystemError
from .evolution import EvolutionError, brute_force_best, evolve
from .manifest import Catalog, ManifestError
from .rng import derive_substream
from .topology import (
    TopologyError,
    grow,
    inject_and_track,
    seed_business_graph,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

LOCK_NAME = ".dbesim.lock"


class OutputDir:
    """Output directory with a lock file: one invocation at a time."""

    def __init__(self, path: str):
        self.path = path
        self.lock_path = os.path.join(path, LOCK_NAME)
        self._fd = None

    def __enter__(self):
        os.makedirs(self.path, exist_ok=True)
        try:
            self._fd = os.open(self.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RuntimeError(
                f"output directory {self.path!r} is locked by another invocation "
                f"(remove {self.lock_path} if stale)")
        return self

    def __exit__(self, *exc):
        if self._fd is not None:
            os.close(self._fd)
            os.remove(self.lock_path)
        return False

    def write(self, name: str, text: str) -> str:
        target = os.path.join(self.path, name)
        with open(target, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        return target


def _first_habitat_inputs(cfg):
    """Catalog and request used by the evolve/oracle subcommands.

    Both operate on the first scenario habitat's catalog and the first
    request template of its profile.
    """
    spec = cfg.scenario.habitats[0]
    catalog = Catalog(s.copy() for s in spec.services)
    request = spec.profile[0].request
    return catalog, request


def cmd_run(cfg, state, out: OutputDir, quiet: bool) -> int:
    result = engine.run(cfg, state=state)
    out.write("resolved_config.json", serialize_config(cfg))
    out.write("events.jsonl", engine.serialize_events(result.events))
    out.write("metrics.csv", engine.serialize_metrics(result.metrics))
    out.write("snapshot.json", serialize_snapshot(cfg, result.final_state()))
    out.write("ecosystem.dot", result.eco.to_dot())
    out.write("business.dot", result.graph.to_dot())
    out.write("flows.csv", result.graph.flows_csv())
    if not quiet:
        last = result.metrics[-1] if result.metrics else None
        print(f"run complete: {cfg.epochs} epochs, {len(result.events)} events")
        if last:
            print(f"final epoch {last.epoch}: mean_best_fitness={last.mean_best_fitness:.4f} "
                  f"success_rate={last.deployment_success_rate:.4f} "
                  f"clustering={last.clustering_statistic:.4f}")
    return EXIT_OK


def cmd_evolve(cfg, out: OutputDir | None, quiet: bool) -> int:
    catalog, request = _first_habitat_inputs(cfg)
    rng = derive_substream(cfg.master_seed, "evolve")
    trace = evolve(catalog, request, cfg.evolution, rng)
    if out is not None:
        out.write("resolved_config.json", serialize_config(cfg))
        out.write("trace.csv", trace.to_csv())
    print(f"best_chain={' '.join(trace.best.genome)}")
    print(f"best_fitness={trace.best.fitness!r}")
    if not quiet:
        print(f"generations={trace.generations[-1].generation}")
    return EXIT_OK


def cmd_oracle(cfg, out: OutputDir | None, quiet: bool) -> int:
    catalog, request = _first_habitat_inputs(cfg)
    genome, fit = brute_force_best(catalog, request, beta=cfg.evolution.beta)
    if out is not None:
        out.write("resolved_config.json", serialize_config(cfg))
    print(f"best_chain={' '.join(genome) if genome else ''}")
    print(f"best_fitness={fit!r}")
    return EXIT_OK


def cmd_topology(cfg, out: OutputDir, quiet: bool) -> int:
    topo = cfg.topology
    rng = derive_substream(cfg.master_seed, "growth")
    graph = seed_business_graph(topo.seed_vertices, topo.eta, rng)
    out.write("resolved_config.json", serialize_config(cfg))
    if topo.inject_at is not None:
        trajectory = inject_and_track(graph, topo.inject_eta, topo.inject_at,
                                      topo.steps, topo.m, topo.eta, rng)
        lines = ["step,rank"] + [f"{step},{rank}" for step, rank in trajectory]
        out.write("trajectory.csv", "\n".join(lines) + "\n")
        if not quiet:
            print(f"injected vertex final rank: {trajectory[-1][1]}")
    else:
        grow(graph, topo.steps, topo.m, topo.eta, rng)
    out.write("degrees.csv", graph.degree_csv())
    out.write("business.dot", graph.to_dot())
    degrees = sorted(v.degree for v in graph.vertices.values())
    if not quiet:
        print(f"vertices={len(graph.vertices)} edges={len(graph.attachment_edges)} "
              f"max_degree={degrees[-1]} median_degree={degrees[len(degrees) // 2]}")
    return EXIT_OK


def cmd_validate(path, seed_override) -> int:
    try:
        parse_config(path, seed_override=seed_override)
    except ConfigError as e:
        print(f"invalid: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"cannot read config: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print("ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dbesim",
        description="Deterministic digital business ecosystem simulator.")
    parser.add_argument("subcommand",
                        choices=["run", "evolve", "oracle", "topology", "validate"])
    parser.add_argument("--config", required=True, help="config or snapshot JSON path")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--quiet", action="store_true")
    verbosity.add_argument("--verbose", action="store_true")
    return parser


def dispatch(args) -> int:
    if args.subcommand == "validate":
        return cmd_validate(args.config, args.seed)
    try:
        cfg, state = parse_config(args.config, seed_override=args.seed)
    except ConfigError as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"cannot read config: {e}", file=sys.stderr)
        return EXIT_RUNTIME

    try:
        if args.subcommand == "run":
            out_path = args.out or "out"
            with OutputDir(out_path) as out:
                return cmd_run(cfg, state, out, args.quiet)
        if args.subcommand == "evolve":
            if args.out:
                with OutputDir(args.out) as out:
                    return cmd_evolve(cfg, out, args.quiet)
            return cmd_evolve(cfg, None, args.quiet)
        if args.subcommand == "oracle":
            if args.out:
                with OutputDir(args.out) as out:
                    return cmd_oracle(cfg, out, args.quiet)
            return cmd_oracle(cfg, None, args.quiet)
        if args.subcommand == "topology":
            out_path = args.out or "out"
            with OutputDir(out_path) as out:
                return cmd_topology(cfg, out, args.quiet)
    except engine.ValidationFailure as e:
        for v in e.violations:
            print(f"invalid config: {v}", file=sys.stderr)
        return EXIT_VALIDATION
    except (EcosystemError, EvolutionError, ManifestError, TopologyError,
            engine.SnapshotError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    raise AssertionError(f"unhandled subcommand {args.subcommand!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
