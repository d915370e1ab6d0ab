"""Command-line entry point: simulate, mine, diagnose, evaluate.

Machine-readable output goes to files or stdout; logs go to stderr.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .cmdb import load_cmdb, save_cmdb
from .config import PipelineConfig, load_config
from .errors import BsodiagError, NoCandidatesError
from .evaluation import render_table, run_benchmark
from .fcm import load_fkg, load_history, mine_fkg, save_fkg
from .mfd import ChangeWhitelist, load_whitelist
from .model import load_catalog, load_snapshot, save_catalog, save_snapshot
from .orca import diagnose
from .simgen import (
    PRESETS,
    default_catalog,
    default_whitelist,
    generate_history,
    generate_topology,
    inject_scenario,
    load_library,
    save_truth,
)

logger = logging.getLogger("bsodiag")


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides = {}
    for flag, key in (
        ("delta_minutes", "delta_minutes"),
        ("eta_minutes", "eta_minutes"),
        ("alpha", "alpha"),
        ("k", "k"),
        ("spot_q", "spot.q"),
        ("spot_init_quantile", "spot.init_quantile"),
        ("whitelist", "whitelist_path"),
        ("support_mode", "support_mode"),
        ("pcr_denominator", "pcr_denominator"),
        ("walk_iterations", "walk.iterations"),
        ("walk_damping", "walk.damping"),
        ("disable_fkg", "disable_fkg"),
        ("disable_cmdb", "disable_cmdb"),
    ):
        value = getattr(args, flag, None)
        if value is not None and value is not False:
            overrides[key] = value
    return load_config(path=getattr(args, "config", None), overrides=overrides)


def _load_whitelist_for(config: PipelineConfig) -> ChangeWhitelist:
    if config.whitelist_path:
        return load_whitelist(config.whitelist_path)
    return default_whitelist()


def _add_common_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="path to a bsodiag.toml (or set BSODIAG_CONFIG)")
    p.add_argument("--delta-minutes", dest="delta_minutes", type=int)
    p.add_argument("--eta-minutes", dest="eta_minutes", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("-k", dest="k", type=int)
    p.add_argument("--spot-q", dest="spot_q", type=float)
    p.add_argument("--spot-init-quantile", dest="spot_init_quantile", type=float)
    p.add_argument("--whitelist", dest="whitelist", help="change whitelist JSON path")
    p.add_argument("--support-mode", dest="support_mode", choices=("groups", "literal"))
    p.add_argument(
        "--pcr-denominator", dest="pcr_denominator", choices=("predicted", "truth")
    )
    p.add_argument("--walk-iterations", dest="walk_iterations", type=int)
    p.add_argument("--walk-damping", dest="walk_damping", type=float)
    p.add_argument("--disable-fkg", dest="disable_fkg", action="store_true", default=None)
    p.add_argument("--disable-cmdb", dest="disable_cmdb", action="store_true", default=None)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bsodiag",
        description="Batch-servers-outage diagnosis toolkit",
    )
    parser.add_argument("--version", action="version", version=f"bsodiag {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate synthetic outage scenarios")
    src = p_sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", help="scenario library TOML file")
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in library")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--cases", type=int, default=1, help="number of outage cases")
    p_sim.add_argument(
        "--history-days", type=int, default=0, help="also emit history.jsonl over N days"
    )
    _add_common_config_flags(p_sim)

    p_mine = sub.add_parser("mine", help="mine the failure knowledge graph")
    p_mine.add_argument("--history", required=True, help="history.jsonl corpus")
    p_mine.add_argument("--out", required=True, help="fkg.json output path")
    p_mine.add_argument("--catalog", help="catalog.json (defaults to built-in taxonomy)")
    _add_common_config_flags(p_mine)

    p_diag = sub.add_parser("diagnose", help="diagnose one outage snapshot")
    p_diag.add_argument("--snapshot", required=True, help="snapshot bundle directory")
    p_diag.add_argument("--fkg", required=True, help="fkg.json path")
    p_diag.add_argument("--cmdb", required=True, help="cmdb.json path")
    p_diag.add_argument("--catalog", help="catalog.json (defaults to bundle's, then built-in)")
    p_diag.add_argument("--out", help="diagnosis.json output path (default stdout)")
    _add_common_config_flags(p_diag)

    p_eval = sub.add_parser("evaluate", help="benchmark methods over scenario cases")
    p_eval.add_argument("--scenarios", required=True, help="directory of case bundles")
    p_eval.add_argument("--fkg", required=True, help="fkg.json path")
    p_eval.add_argument("--cmdb", help="cmdb.json (defaults to scenarios/cmdb.json)")
    p_eval.add_argument("--catalog", help="catalog.json (defaults to scenarios/catalog.json)")
    p_eval.add_argument(
        "--methods",
        default="bsodiag,time_first,hierarchy_first,random",
        help="comma-separated method list",
    )
    p_eval.add_argument("--out", help="report.json output path")
    p_eval.add_argument("--csv", help="optional CSV export of the metric table")
    p_eval.add_argument("--seed", type=int, default=0)
    _add_common_config_flags(p_eval)

    return parser


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    library = load_library(args.spec) if args.spec else PRESETS[args.preset]()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    cmdb = generate_topology(library.topology)
    catalog = default_catalog()
    save_cmdb(cmdb, out_dir / "cmdb.json")
    save_catalog(catalog, out_dir / "catalog.json")
    (out_dir / "whitelist.json").write_text(
        json.dumps(default_whitelist().to_dict(), indent=2) + "\n", encoding="utf-8"
    )

    rng = np.random.default_rng(args.seed)
    for i in range(args.cases):
        spec = library.draw(rng)
        snapshot, truth = inject_scenario(cmdb, spec, seed=int(rng.integers(0, 2**31)))
        case_dir = out_dir if args.cases == 1 else out_dir / f"case_{i:04d}"
        save_snapshot(snapshot, case_dir)
        save_truth(truth, case_dir / "truth.json")
        logger.info("wrote %s (%s)", case_dir, spec.name)

    if args.history_days > 0:
        from .fcm import save_history

        history = generate_history(cmdb, library, n_days=args.history_days, seed=args.seed)
        save_history(history, out_dir / "history.jsonl")
        logger.info("wrote %s (%d events)", out_dir / "history.jsonl", len(history))
    logger.info("effective config hash: %s", config.hash())
    return 0


def _cmd_mine(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    catalog = load_catalog(args.catalog) if args.catalog else default_catalog()
    history = load_history(args.history)
    rule_tree = dict(catalog.levels())
    for tagged in history:
        rule_tree.setdefault(tagged.event.type_failure, 0)
    fkg = mine_fkg(history, config.alpha, rule_tree, mode=config.support_mode)
    save_fkg(fkg, args.out)
    logger.info(
        "mined %d nodes / %d edges from %d events (alpha=%s, mode=%s)",
        len(fkg.nodes),
        len(fkg.edges),
        len(history),
        config.alpha,
        config.support_mode,
    )
    return 0


def _resolve_catalog(explicit: Optional[str], *candidates: Path):
    if explicit:
        return load_catalog(explicit)
    for c in candidates:
        if c.exists():
            return load_catalog(c)
    return default_catalog()


def _cmd_diagnose(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    snapshot_dir = Path(args.snapshot)
    catalog = _resolve_catalog(
        args.catalog, snapshot_dir / "catalog.json", snapshot_dir.parent / "catalog.json"
    )
    snapshot = load_snapshot(snapshot_dir, catalog)
    fkg = load_fkg(args.fkg)
    cmdb = load_cmdb(args.cmdb)
    whitelist = _load_whitelist_for(config)
    try:
        result = diagnose(snapshot, fkg, cmdb, catalog, config, whitelist=whitelist)
    except NoCandidatesError as e:
        payload = json.dumps(
            {"status": "no_candidates", "detail": str(e), "config_hash": config.hash()},
            indent=2,
        )
        if args.out:
            Path(args.out).write_text(payload + "\n", encoding="utf-8")
        else:
            print(payload)
        logger.error("diagnosis aborted: %s", e)
        return 1
    payload = result.to_json()
    if args.out:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
        logger.info("wrote %s", args.out)
    else:
        print(payload)
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    scenarios = Path(args.scenarios)
    catalog = _resolve_catalog(args.catalog, scenarios / "catalog.json")
    cmdb = load_cmdb(args.cmdb if args.cmdb else scenarios / "cmdb.json")
    fkg = load_fkg(args.fkg)
    whitelist_path = scenarios / "whitelist.json"
    if config.whitelist_path:
        whitelist = load_whitelist(config.whitelist_path)
    elif whitelist_path.exists():
        whitelist = load_whitelist(whitelist_path)
    else:
        whitelist = default_whitelist()
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    report = run_benchmark(
        scenarios,
        methods,
        fkg,
        cmdb,
        catalog,
        config,
        whitelist=whitelist,
        seed=args.seed,
    )
    print(render_table(report, k=config.k))
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
        logger.info("wrote %s", args.out)
    if args.csv:
        _write_csv(report, Path(args.csv), config.k)
    return 0


def _write_csv(report, path: Path, k: int) -> None:
    import csv

    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["method"] + [f"pr@{i}" for i in range(1, k + 1)] + ["map", "pcr"]
        writer.writerow(header)
        for method in sorted(report.metrics):
            m = report.metrics[method]
            writer.writerow(
                [method]
                + [m.get(f"pr@{i}", "") for i in range(1, k + 1)]
                + [m.get("map", ""), m.get("pcr", "")]
            )


_COMMANDS = {
    "simulate": _cmd_simulate,
    "mine": _cmd_mine,
    "diagnose": _cmd_diagnose,
    "evaluate": _cmd_evaluate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except BsodiagError as e:
        logger.error("%s", e)
        return 1
    except OSError as e:
        logger.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
