"""Command-line entry point: ``cellplan {generate,train,plan,evaluate,render}``.

Exit codes: 0 success, 1 usage error, 2 data/format/IO error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from cellplan.data import clean_dataset, ingest_measurements, split_dataset, write_measurements
from cellplan.io import (
    ConfigError,
    RunConfig,
    export_plan,
    initial_sites,
    plan_from_csv,
    read_sites,
    render_coverage,
    write_sites,
)
from cellplan.planner import evaluate_plan, plan
from cellplan.predictor import load_model, predict_map, save_model, train
from cellplan.scenario import (
    generate_scenario,
    load_scenario,
    oracle_coverage,
    oracle_evaluator,
    save_scenario,
    synthesize_measurements,
)

log = logging.getLogger("cellplan")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cellplan", description="Budget-aware cell-site placement planner")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="flat 'key = value' run configuration")
        sp.add_argument("--out", default=".", help="working directory for inputs/outputs (default: .)")
        sp.add_argument("--scenario", help="scenario dump (default: paths.scenario)")
        return sp

    g = common(sub.add_parser("generate", help="scenario + initial sites + synthetic measurements"))
    g.add_argument("--seed", type=int, help="override scenario.seed")

    t = common(sub.add_parser("train", help="measurements -> model file"))
    t.add_argument("--measurements")
    t.add_argument("--model")

    pl = common(sub.add_parser("plan", help="scenario + sites + model -> plan CSV + final sites"))
    pl.add_argument("--sites")
    pl.add_argument("--model")
    pl.add_argument("--plan")

    e = common(sub.add_parser("evaluate", help="plan vs oracle -> metrics JSON"))
    e.add_argument("--sites")
    e.add_argument("--plan")

    r = common(sub.add_parser("render", help="coverage map -> PGM raster"))
    r.add_argument("--sites", help="site list to render (default: final sites if present, else initial)")
    r.add_argument("--model", help="render the model's predicted map instead of the oracle")
    r.add_argument("--raster", help="output PGM path (default: paths.raster)")
    return p


def _path(args, cfg, attr, key) -> Path:
    given = getattr(args, attr, None)
    if given:
        return Path(given)
    return Path(args.out) / cfg[key]


def cmd_generate(args, cfg):
    if args.seed is not None:
        cfg.set("scenario.seed", args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scenario = generate_scenario(cfg["scenario.seed"], cfg.grid(), cfg.terrain())
    sites = initial_sites(cfg)
    ms = synthesize_measurements(sites, scenario, cfg.radio(), cfg["scenario.measurements"],
                                 cfg["scenario.seed"] + 1, cfg.missing())
    save_scenario(scenario, _path(args, cfg, "scenario", "paths.scenario"))
    write_sites(sites, out / cfg["paths.sites"])
    write_measurements(ms, out / cfg["paths.measurements"])
    print(f"generated {cfg.grid().n}x{cfg.grid().n} scenario (seed {cfg['scenario.seed']}), "
          f"{len(sites)} sites, {len(ms)} measurements in {out}")


def cmd_train(args, cfg):
    scenario = load_scenario(_path(args, cfg, "scenario", "paths.scenario"))
    ms = ingest_measurements(_path(args, cfg, "measurements", "paths.measurements"), scenario.norm_stats)
    ds = clean_dataset(ms)
    for k, v in ds.provenance.items():
        log.info("cleaning %s: %s", k, v)
    train_part, test_part = split_dataset(ds, cfg["train.test_fraction"], cfg["train.seed"])
    model = train(train_part, cfg.hyperparams())
    pred = model.forward(test_part.features)
    rmse = float(np.sqrt(np.mean((pred - test_part.targets) ** 2)))
    baseline = float(np.sqrt(np.mean((train_part.targets.mean() - test_part.targets) ** 2)))
    save_model(model, _path(args, cfg, "model", "paths.model"))
    print(json.dumps({"train_rows": len(train_part), "test_rows": len(test_part),
                      "heldout_rmse_db": rmse, "baseline_rmse_db": baseline}))


def cmd_plan(args, cfg):
    scenario = load_scenario(_path(args, cfg, "scenario", "paths.scenario"))
    sites = read_sites(_path(args, cfg, "sites", "paths.sites"), scenario.grid,
                       cfg["site.eirp_dbm"], cfg["site.frequency_mhz"])
    model = load_model(_path(args, cfg, "model", "paths.model"))
    result = plan(sites, scenario, model, cfg.policy(), oracle=oracle_evaluator(scenario, cfg.radio()))
    export_plan(result, _path(args, cfg, "plan", "paths.plan"))
    write_sites(result.final, Path(args.out) / cfg["paths.final_sites"])
    print(f"stop_reason={result.stop_reason} sites_added={result.sites_added} spend={result.spend!r}")


def cmd_evaluate(args, cfg):
    scenario = load_scenario(_path(args, cfg, "scenario", "paths.scenario"))
    sites = read_sites(_path(args, cfg, "sites", "paths.sites"), scenario.grid,
                       cfg["site.eirp_dbm"], cfg["site.frequency_mhz"])
    policy = cfg.policy()
    result = plan_from_csv(_path(args, cfg, "plan", "paths.plan"), sites, policy)
    metrics = evaluate_plan(result, scenario, cfg.radio(), policy.tau_dbm)
    metrics["max_sites"] = policy.budget.max_sites()
    text = json.dumps(metrics, indent=2, sort_keys=True)
    (Path(args.out) / cfg["paths.metrics"]).write_text(text + "\n")
    print(text)


def cmd_render(args, cfg):
    scenario = load_scenario(_path(args, cfg, "scenario", "paths.scenario"))
    if args.sites:
        site_path = Path(args.sites)
    else:
        site_path = Path(args.out) / cfg["paths.final_sites"]
        if not site_path.exists():
            site_path = Path(args.out) / cfg["paths.sites"]
    sites = read_sites(site_path, scenario.grid, cfg["site.eirp_dbm"], cfg["site.frequency_mhz"])
    if args.model:
        cov = predict_map(load_model(args.model), sites, scenario)
    else:
        cov = oracle_coverage(sites, scenario, cfg.radio())
    out = Path(args.raster) if args.raster else Path(args.out) / cfg["paths.raster"]
    render_coverage(cov, out, cfg["render.lo_dbm"], cfg["render.hi_dbm"])
    print(f"wrote {out}")


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "plan": cmd_plan,
            "evaluate": cmd_evaluate, "render": cmd_render}


def run_cli(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(parser.format_usage() + str(exc), file=sys.stderr)
        return 1
    if args.command is None:
        print(parser.format_help(), file=sys.stderr, end="")
        return 1
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        COMMANDS[args.command](args, cfg)
    except (ConfigError, ValueError, OSError, RuntimeError) as exc:
        print(f"cellplan {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
