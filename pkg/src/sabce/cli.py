"""Command-line entry point: ``sabce {train,select,evaluate,sweep,stability}``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, default_config, load_config
from .data import load_csv
from .errors import ConfigError, DataError, NumericalError
from .evaluation import (accuracy_vs_feature_count, lambda_sweep, mu_grid_analysis,
                         near_zero_count, preprocess, protocol_experiment1,
                         protocol_experiment2, stability, write_curve_csv,
                         write_heatmap_csv, write_report)
from .selection import (apply_elbow, rank_features, write_ranking_csv,
                        write_sparsity_curve)
from .trainer import report_checkpoint, train

log = logging.getLogger("sabce")

OUT_DIR_ENV = "SABCE_OUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, data: bool = True):
    if data:
        p.add_argument("--data", required=True, help="CSV file with a header row")
        p.add_argument("--label-column", help="label column name or index (default: last)")
        p.add_argument("--impute-missing", action="store_true", default=None,
                       help="fill missing cells with the column mean")
    p.add_argument("--config", help="YAML run config")
    p.add_argument("--mode", choices=["bce", "sbce", "sabce"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", help=f"output directory (default: ${OUT_DIR_ENV} or ./sabce_out)")
    p.add_argument("--n-jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sabce", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"sabce {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train and write checkpoint, loss history and ranking")
    _common(p)
    p.add_argument("--resume", help="checkpoint to continue from")

    p = sub.add_parser("select", help="rank features and apply the elbow cut-off")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--normalize-elbow", action="store_true",
                   help="rescale both axes to [0,1] before measuring distances")
    p.add_argument("--out-dir")

    p = sub.add_parser("evaluate", help="run a benchmark protocol")
    _common(p)
    p.add_argument("--protocol", choices=["exp1", "exp2", "curve"], default="exp2")
    p.add_argument("--k", type=int, nargs="+")
    p.add_argument("--repeats", type=int, default=20)

    p = sub.add_parser("sweep", help="mu-grid heatmap or lambda sparsity curves")
    _common(p)
    p.add_argument("--grid-mu1", type=float, nargs="+")
    p.add_argument("--grid-mu2", type=float, nargs="+")
    p.add_argument("--bottleneck-hidden", type=int, default=50)
    p.add_argument("--lambda1-list", type=float, nargs="+")
    p.add_argument("--lambda2-list", type=float, nargs="+")

    p = sub.add_parser("stability", help="Jaccard stability of selected sets over runs")
    _common(p)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--same-seed", action="store_true")
    return parser


def _out_dir(args) -> Path:
    out = Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or "sabce_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else default_config()
    return cfg.override(mode=args.mode, seed=args.seed,
                        label_column=getattr(args, "label_column", None),
                        impute_missing=getattr(args, "impute_missing", None))


def _load_data(args, cfg: RunConfig):
    label = cfg.values["label_column"]
    label = -1 if label is None else label
    if isinstance(label, str) and label.lstrip("-").isdigit():
        label = int(label)
    return load_csv(args.data, label, bool(cfg.values["impute_missing"]))


class Manifest:
    def __init__(self, command: str, args, cfg: RunConfig | None):
        self.t0 = time.perf_counter()
        self.data = {"command": command, "argv": sys.argv[1:], "tool_version": __version__,
                     "config_path": getattr(args, "config", None),
                     "config": cfg.values if cfg else None,
                     "seed": cfg.values["seed"] if cfg else None, "artifacts": []}

    def add(self, path) -> Path:
        self.data["artifacts"].append(str(path))
        return Path(path)

    def write(self, out: Path):
        self.data["wall_clock_seconds"] = time.perf_counter() - self.t0
        (out / "manifest.json").write_text(json.dumps(self.data, indent=2, sort_keys=True,
                                                      default=str) + "\n")


def cmd_train(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(args)
    man = Manifest("train", args, cfg)
    ds = _load_data(args, cfg)
    (ds,) = preprocess(ds, method=cfg.values["preprocess"])
    resume = load_checkpoint(args.resume) if args.resume else None
    ckpt_dir = out / "checkpoints" if cfg.train.checkpoint_every else None
    report = train(ds, cfg.train, checkpoint_dir=ckpt_dir, resume=resume)
    save_checkpoint(man.add(out / "checkpoint.npz"), report_checkpoint(report, ds))
    report.write_history_csv(man.add(out / "loss_history.csv"))
    ranking = apply_elbow(rank_features(report.params.spl, ds.feature_names))
    write_ranking_csv(ranking, man.add(out / "ranking.csv"))
    write_sparsity_curve(ranking, man.add(out / "sparsity_curve.csv"))
    cfg.dump(man.add(out / "resolved_config.yaml"))
    man.data["train_seconds"] = report.seconds
    man.write(out)
    print(f"trained {cfg.train.mode.value} on {ds.n}x{ds.d} for {len(report.history)} epochs; "
          f"elbow selects {ranking.n_selected} of {ds.d} features -> {out}")
    return 0


def cmd_select(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    out = _out_dir(args)
    man = Manifest("select", args, None)
    ranking = apply_elbow(rank_features(ckpt.params.spl, ckpt.feature_names),
                          normalize=args.normalize_elbow)
    write_ranking_csv(ranking, man.add(out / "ranking.csv"))
    write_sparsity_curve(ranking, man.add(out / "sparsity_curve.csv"))
    summary = {"elbow_index": ranking.elbow_index, "n_selected": ranking.n_selected,
               "n_features": int(ranking.order.size), "collinear": ranking.collinear,
               "normalized_axes": bool(args.normalize_elbow),
               "selected": sorted(ranking.selected)}
    man.add(out / "elbow.json").write_text(json.dumps(summary, indent=2) + "\n")
    man.write(out)
    print(f"elbow at rank {ranking.elbow_index}: {ranking.n_selected} of "
          f"{ranking.order.size} features selected")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(args)
    man = Manifest("evaluate", args, cfg)
    ds = _load_data(args, cfg)
    method = cfg.values["preprocess"]
    tune = cfg.values["tune"]
    seed = cfg.train.seed
    if args.protocol == "exp1":
        res = protocol_experiment1(ds, cfg.train, args.k or [10, 50], args.repeats, seed,
                                   cfg.ann, tune, method)
        results = [res[k] for k in sorted(res)]
    elif args.protocol == "exp2":
        results = [protocol_experiment2(ds, cfg.train, (args.k or [50])[0], args.repeats, seed,
                                        cfg.ann, tune, method)]
    else:
        ks = args.k or [10, 20, 30, 40, 50]
        curve = accuracy_vs_feature_count(ds, cfg.train, ks, seed, cfg.ann, method)
        write_curve_csv(curve, man.add(out / "accuracy_vs_k.csv"))
        man.write(out)
        for k, acc in curve:
            print(f"K={k}: validation accuracy {acc:.4f}")
        return 0
    write_report(results, man.add(out / f"report_{args.protocol}.json"))
    man.add(out / f"report_{args.protocol}.csv")
    man.write(out)
    for r in results:
        print(f"{r.protocol} K={r.k}: mean {100 * r.mean:.2f}% sd {100 * r.sd:.2f} "
              f"over {len(r.accuracies)} repeats")
    return 0


def cmd_sweep(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(args)
    man = Manifest("sweep", args, cfg)
    ds = _load_data(args, cfg)
    method = cfg.values["preprocess"]
    did = False
    if args.grid_mu1 or args.grid_mu2:
        if not (args.grid_mu1 and args.grid_mu2):
            raise UsageError("--grid-mu1 and --grid-mu2 go together")
        errs = mu_grid_analysis(ds, args.grid_mu1, args.grid_mu2, cfg.train,
                                hidden=args.bottleneck_hidden, seed=cfg.train.seed,
                                method=method, n_jobs=args.n_jobs)
        write_heatmap_csv(args.grid_mu1, args.grid_mu2, errs, man.add(out / "mu_heatmap.csv"))
        did = True
    if args.lambda1_list or args.lambda2_list:
        (pds,) = preprocess(ds, method=method)
        curves = lambda_sweep(pds, cfg.train, args.lambda1_list or [], args.lambda2_list or [],
                              n_jobs=args.n_jobs)
        rows = ["which,value,near_zero_count"]
        for (which, value), ranking in curves.items():
            write_sparsity_curve(ranking, man.add(out / f"sparsity_{which}_{value:g}.csv"))
            rows.append(f"{which},{value!r},{near_zero_count(ranking.magnitudes)}")
        man.add(out / "lambda_sweep_summary.csv").write_text("\n".join(rows) + "\n")
        did = True
    if not did:
        raise UsageError("sweep needs --grid-mu1/--grid-mu2 or --lambda1-list/--lambda2-list")
    man.write(out)
    print(f"sweep artifacts written to {out}")
    return 0


def cmd_stability(args) -> int:
    if args.runs < 2:
        raise UsageError("need >= 2 runs for a stability report")
    cfg = _resolve(args)
    out = _out_dir(args)
    man = Manifest("stability", args, cfg)
    ds = _load_data(args, cfg)
    (ds,) = preprocess(ds, method=cfg.values["preprocess"])
    res = stability(ds, cfg.train, args.runs, cfg.train.seed, args.same_seed, args.n_jobs)
    man.add(out / "stability.json").write_text(json.dumps(res.to_dict(), indent=2) + "\n")
    np.savetxt(man.add(out / "pairwise_overlap.csv"), res.overlap, fmt="%d", delimiter=",")
    man.write(out)
    print(f"Jaccard index over {args.runs} runs: {res.jaccard:.4f}; "
          f"set sizes {[len(s) for s in res.selected]}")
    return 0


COMMANDS = {"train": cmd_train, "select": cmd_select, "evaluate": cmd_evaluate,
            "sweep": cmd_sweep, "stability": cmd_stability}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"sabce: error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"sabce: data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"sabce: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
