"""Command-line front end.

Subcommands ``balance-experiment``, ``decide``, ``campaign``, ``suitability``
and ``robustness`` each read a TOML config, write CSV outputs to ``--out``
plus ``manifest.json`` (resolved config and output digests) and
``summary.txt``.  Exit status: 0 ok, 1 runtime error, 2 config error.
"""

import argparse
import hashlib
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .acquisition import metadata_suitability_check, run_campaign, subsample_robustness_study
from .balance_experiment import ExperimentData, run_balance_experiment, sampling_bounds
from .conic import gpaml_step
from .config import (
    ConfigError, build_dataset, build_design, build_learner, build_policy, build_run_config,
    load_config,
)
from .dataset import MetadataDataset

logger = logging.getLogger("gpaml")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _finish(out, command, cfg, outputs, summary):
    manifest = {
        "tool": "gpaml",
        "version": __version__,
        "command": command,
        "seed": cfg["seed"],
        "config": cfg,
        "outputs": {name: _sha256(os.path.join(out, name)) for name in outputs},
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out, "summary.txt"), "w") as fh:
        fh.write("\n".join(summary) + "\n")
    for line in summary:
        print(line)


def _state(cfg, dataset):
    """Current balance and the dataset its sampling bounds come from."""
    n_a = cfg["experiment.n_a"] if cfg["experiment.n_a"] is not None else dataset.n_a
    n_b = cfg["experiment.n_b"] if cfg["experiment.n_b"] is not None else dataset.n_b
    if (n_a, n_b) != dataset.counts:
        dataset = MetadataDataset.from_counts(n_a, n_b, p0=dataset.p0)
    return n_a, n_b, dataset


def cmd_balance_experiment(args, cfg):
    dataset = build_dataset(cfg)
    data = run_balance_experiment(dataset, build_learner(cfg), build_design(cfg),
                                  seed=cfg["seed"], n_jobs=args.jobs)
    data.to_csv(os.path.join(args.out, "observations.csv"))
    return ["observations.csv"], [
        f"balance experiment: N={dataset.n} (A={dataset.n_a}, B={dataset.n_b}), "
        f"p0=({dataset.p0[0]:.4g}, {dataset.p0[1]:.4g})",
        f"design: b={cfg['experiment.b']}, z={cfg['experiment.z']}, r={len(data)}, "
        f"bounds={data.bounds}, invalid rows={int(np.sum(~data.valid))}",
        f"score range: [{np.nanmin(data.Y):.4f}, {np.nanmax(data.Y):.4f}]",
    ]


def cmd_decide(args, cfg):
    dataset = build_dataset(cfg)
    n_a, n_b, ref = _state(cfg, dataset)
    bounds = sampling_bounds(ref)
    data = ExperimentData.from_csv(args.observations, bounds=bounds)
    n = cfg["experiment.n"]
    d = gpaml_step(data, n_a, n_b, n, cfg["experiment.q"])
    d.write_decision_csv(os.path.join(args.out, "decision.csv"))
    d.write_cone_csv(os.path.join(args.out, "cone.csv"))
    d.surrogate.write_report(os.path.join(args.out, "gp_fit.csv"))
    gp = d.surrogate
    return ["decision.csv", "cone.csv", "gp_fit.csv"], [
        f"state: ({n_a}, {n_b}), move n={n}, bounds={bounds}, q={cfg['experiment.q']}",
        f"GP: theta={gp.theta_:.4g}, g={gp.g_:.4g}, tau2={gp.tau2_:.4g}, "
        f"noise var={gp.noise_var_:.4g}, loglik={gp.log_likelihood_:.6g}",
        f"decision: (n_a, n_b) = ({d.n_a}, {d.n_b}), ending balance "
        f"({n_a + d.n_a}, {n_b + d.n_b}), G={d.G[d.index]:.6f}",
    ]


def cmd_campaign(args, cfg):
    dataset = build_dataset(cfg)
    policy = build_policy(cfg)
    trace = run_campaign(dataset, build_learner(cfg), policy, build_run_config(cfg, args.jobs),
                         seed=cfg["seed"])
    trace.to_csv(os.path.join(args.out, "trace.csv"))
    last = trace.final
    lines = [
        f"campaign: policy={policy.name}, {len(trace) - 1} steps, final N={last.N} "
        f"(A={last.n_a_total}, B={last.n_b_total}, prop_a={last.prop_a:.4f})",
        f"final OOS {cfg['metric']}: {last.oos_score:.4f}",
    ]
    if trace.stop_reason:
        lines.append(f"stopped early: {trace.stop_reason}")
    return ["trace.csv"], lines


def cmd_suitability(args, cfg):
    dataset = build_dataset(cfg)
    res = metadata_suitability_check(
        dataset, build_learner(cfg), reps=cfg["suitability.reps"],
        split=(cfg["suitability.major"], cfg["suitability.minor"]),
        holdout=cfg["suitability.holdout"], metric=cfg["metric"], seed=cfg["seed"],
    )
    res.to_csv(os.path.join(args.out, "suitability.csv"))
    return ["suitability.csv"], [
        f"mostly-A mean: {np.mean(res.scores['A']):.4f}, mostly-B mean: {np.mean(res.scores['B']):.4f}",
        f"difference (A - B): {res.difference:.4f} (s.e. {res.std_error:.4f})",
    ]


def cmd_robustness(args, cfg):
    dataset = build_dataset(cfg)
    n_a, n_b, ref = _state(cfg, dataset)
    sizes = [int(s) for s in cfg["robustness.sizes"]]
    good = None
    if cfg["robustness.good_n_a_range"] is not None:
        lo, hi = cfg["robustness.good_n_a_range"]
        good = lambda na, nb: lo <= na <= hi  # noqa: E731
    res = subsample_robustness_study(
        ref, build_learner(cfg), (n_a, n_b, cfg["experiment.n"]),
        b_total=cfg["robustness.b_total"], sizes=sizes, reps=cfg["robustness.reps"],
        z=cfg["experiment.z"], q=cfg["experiment.q"], metric=cfg["metric"], good=good,
        seed=cfg["seed"],
    )
    res.to_csv(os.path.join(args.out, "robustness.csv"))
    return ["robustness.csv"], [
        f"size {s}: good fraction {res.fraction_good(s):.3f}, var(n_a) {res.variance(s):.3f}"
        for s in sizes
    ]


COMMANDS = {
    "balance-experiment": cmd_balance_experiment,
    "decide": cmd_decide,
    "campaign": cmd_campaign,
    "suitability": cmd_suitability,
    "robustness": cmd_robustness,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="gpaml", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gpaml {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for learner runs")
        if name == "decide":
            p.add_argument("--observations", required=True, help="observations.csv to fit")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, {"seed": args.seed})
        os.makedirs(args.out, exist_ok=True)
        outputs, summary = COMMANDS[args.command](args, cfg)
        _finish(args.out, args.command, cfg, outputs, summary)
    except ConfigError as exc:
        print(f"gpaml: config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any module failure maps to status 1
        print(f"gpaml {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
