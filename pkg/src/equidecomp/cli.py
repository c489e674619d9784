"""Command-line driver.

Exit codes: 0 ok, 1 negative result, 2 usage error, 3 pipeline failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import NotFound
from .pipeline import ConfigError, Run, RunConfig, StageError, run_pipeline, read_json
from .spectral import estimate_gap, monte_carlo_gap
from .sphere import equal_area_partition

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2, 3
DEFAULT_OUT = "runs/default"


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration; flags override its values")
    p.add_argument("--generators", help="preset:NAME or a rotation-set JSON file")
    p.add_argument("--seed", type=int)
    p.add_argument("--cells", type=int, help="target number of sphere cells")
    p.add_argument("--eta", type=float)
    p.add_argument("--max-degree", type=int)
    p.add_argument("--max-phases", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--samples", type=int, help="Monte Carlo sample points")
    p.add_argument("--out", help=f"artifact directory (default {DEFAULT_OUT})")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="equidecomp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "gap": "spectral gap of the symmetrized generator set",
        "expand": "covering set T, eta and the expander set S",
        "graph": "build the orbit graph (runs the earlier stages if needed)",
        "match": "iterated matchings on an existing graph",
        "decompose": "pieces, report and image from an existing matching",
        "pipeline": "all stages plus a MANIFEST of hashes",
    }
    for name, h in helps.items():
        _common(sub.add_parser(name, help=h))
    v = sub.add_parser("verify", help="re-check every claim and bound in an artifact directory")
    v.add_argument("directory", nargs="?")
    v.add_argument("--out", help="same as DIRECTORY")
    v.add_argument("-v", "--verbose", action="store_true")
    return ap


def _config(args) -> RunConfig:
    overrides = dict(generators=args.generators, seed=args.seed, cells=args.cells, eta=args.eta,
                     max_degree=args.max_degree, max_phases=args.max_phases, epsilon=args.epsilon,
                     samples=args.samples)
    path = args.config
    out = Path(args.out or DEFAULT_OUT)
    if path is None and args.command in ("match", "decompose") and (out / "config.json").is_file():
        stored = read_json(out / "config.json")
        stored.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.load(None, **stored)
    return RunConfig.load(path, **overrides)


def cmd_gap(args) -> int:
    cfg = _config(args)
    if args.out:
        run = Run(cfg, args.out)
        doc = run.stage_gap()
    else:
        from .pipeline import load_generators
        from .rotations import symmetrize

        S = symmetrize(load_generators(cfg.generators, cfg.base_dir))
        report = estimate_gap(S, cfg.max_degree)
        doc = report.to_json()
        P = equal_area_partition(cfg.cells)
        doc["monte_carlo_norm"] = monte_carlo_gap(S, P, cfg.samples or 10 * P.n_cells, seed=cfg.seed)
    for e in doc["per_degree"]:
        print(f"l={e['l']:<3d} norm={e['norm']:.6f}")
    print(f"gap lower bound  {doc['gap_lower_bound']:.6f}  ({doc['certified_range']})")
    print(f"monte carlo norm {doc['monte_carlo_norm']:.6f}")
    return EXIT_OK if doc["gap_lower_bound"] > 0 else EXIT_NEGATIVE


def _stages(args, names) -> Run:
    cfg = _config(args)
    return run_pipeline(cfg, args.out or DEFAULT_OUT, stages=names)


def cmd_expand(args) -> int:
    try:
        run = _stages(args, ("config", "sets", "expand"))
    except StageError as exc:
        if isinstance(exc.cause, NotFound):
            print(exc, file=sys.stderr)
            return EXIT_NEGATIVE
        raise
    doc = read_json(run.path("expansion.json"))
    print(f"|T| = {doc['T_size']}  eta = {doc['eta']:.6g} (bound {doc['eta_bound']:.6g})")
    print(f"|S| = {doc['S_size']} (word radius {doc['S_radius']}), {doc['trials']} caps passed")
    return EXIT_OK


def cmd_graph(args) -> int:
    out = Path(args.out or DEFAULT_OUT)
    names = ("config", "sets", "expand", "graph") if not (out / "S.json").is_file() else ("config", "sets", "graph")
    run = _stages(args, names)
    doc = read_json(run.path("graph_summary.json"))
    print(f"|R| = {doc['R_size']}  edges = {doc['n_edges']}  hall deficiency = {doc['hall_deficiency']}")
    print(f"edge symmetry {doc['edge_symmetry_fraction']:.4f}  claim 1 on A: {doc['claim1_A']['ok']}")
    return EXIT_OK


def cmd_match(args) -> int:
    run = _stages(args, ("match",))
    doc = read_json(run.path("match_summary.json"))
    print(f"{doc['phases']} phases, matching size {doc['matching_size']}, "
          f"unmatched {doc['unmatched_measure']:.3g} (epsilon {doc['epsilon']:.3g}), anomalies {doc['anomalies']}")
    return EXIT_OK if doc["anomalies"] == 0 else EXIT_NEGATIVE


def cmd_decompose(args) -> int:
    run = _stages(args, ("decompose",))
    doc = read_json(run.path("decompose_summary.json"))
    print(f"{doc['pieces']} pieces, residual {doc['residual_measure']:.3g}, "
          f"render total variation {doc['render_tv_distance']:.4f}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    run = _stages(args, None)
    m = read_json(run.path("match_summary.json"))
    dsum = read_json(run.path("decompose_summary.json"))
    print(f"artifacts in {run.out}")
    print(f"residual {dsum['residual_measure']:.3g} after {m['phases']} phases; anomalies {m['anomalies']}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import MissingArtifact, exit_code, format_table, verify_directory

    directory = args.directory or args.out
    if directory is None:
        print("verify needs an artifact directory", file=sys.stderr)
        return EXIT_USAGE
    try:
        checks = verify_directory(directory)
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(format_table(checks))
    return exit_code(checks)


COMMANDS = {
    "gap": cmd_gap, "expand": cmd_expand, "graph": cmd_graph, "match": cmd_match,
    "decompose": cmd_decompose, "pipeline": cmd_pipeline, "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
