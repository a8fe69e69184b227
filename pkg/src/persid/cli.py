"""Command-line front end.

Subcommands: train, detect, eval, perturb, saliency, cross, bench. Every run
is reproducible: identical flags and seeds produce byte-identical artifacts
(sorted JSON keys, floats at 17 significant digits). The PID_SEED environment
variable overrides any --seed flag, and --no-figures skips the PNG rendering
that otherwise accompanies the delimited outputs.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import bench, figures, pid
from .bench import (
    N_FEATURES,
    SuiteConfig,
    cross_features,
    gen_synthetic,
    ground_truth_pairs,
    parse_function_id,
    perturb_network,
    read_dataset_csv,
    roc_auc,
    run_experiment,
    write_dataset_csv,
    write_report_csv,
    write_report_json,
)
from .model_io import forward_activations, load_network, local_weights, save_network
from .pid import (
    detect,
    pairwise_strengths,
    saliency,
    stability_check,
    stability_records,
    write_ledger_json,
    write_matrix_csv,
    write_saliency_pgm,
)
from .serialize import write_json
from .trainer import TrainConfig, train_mlp, write_train_log_csv


def _add_train_flags(sp):
    sp.add_argument("--arch", default="140,100,60,20",
                    help="comma-separated hidden layer widths (default 140,100,60,20)")
    sp.add_argument("--lr", type=float, default=5e-3, help="Adam learning rate (default 5e-3)")
    sp.add_argument("--l1", type=float, default=5e-5,
                    help="L1 penalty on weights (default 5e-5)")
    sp.add_argument("--batch", type=int, default=100, help="minibatch size (default 100)")
    sp.add_argument("--max-epochs", type=int, default=300, help="epoch cap (default 300)")
    sp.add_argument("--early-stop", type=int, default=100,
                    help="patience in epochs without validation improvement (default 100)")
    sp.add_argument("--dtype", choices=("float64", "float32"), default="float64",
                    help="training arithmetic precision (default float64)")


def _add_detect_flags(sp):
    sp.add_argument("--layer", type=int, default=1, help="target layer (default 1)")
    sp.add_argument("--p", type=float, default=2.0, help="persistence norm exponent (default 2)")
    sp.add_argument("--eta", type=float, default=0.0,
                    help="prune edges with strength below this fraction (default 0)")


def _add_common(sp):
    sp.add_argument("--seed", type=int, default=0,
                    help="random seed (default 0; PID_SEED overrides)")
    sp.add_argument("--out-dir", default=".", help="directory for artifacts (default .)")
    sp.add_argument("--no-figures", action="store_true", help="skip PNG rendering")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="persid",
        description="Feature-interaction detection in feed-forward networks via "
        "connectivity persistence, plus the synthetic benchmark around it.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("train", help="train an MLP and save the model JSON plus a log CSV")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="dataset CSV (columns x0..x{d-1},y)")
    src.add_argument("--function", help="synthetic function id (F1..F10) to generate")
    sp.add_argument("--n", type=int, default=10_000,
                    help="samples when generating (default 10000)")
    _add_train_flags(sp)
    _add_common(sp)

    sp = sub.add_parser("detect", help="write the ranked ledger JSON and pairwise CSV")
    sp.add_argument("--model", required=True, help="model JSON path")
    _add_detect_flags(sp)
    sp.add_argument("--terminal-death", choices=pid.TERMINAL_DEATHS, default="last-threshold",
                    help="death threshold for the final live candidate")
    _add_common(sp)

    sp = sub.add_parser("eval", help="score pairwise strengths against a function's ground truth")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="model JSON to detect on")
    src.add_argument("--pairwise", help="pairwise strengths CSV to score directly")
    sp.add_argument("--function", required=True, help="synthetic function id (F1..F10)")
    _add_detect_flags(sp)
    _add_common(sp)

    sp = sub.add_parser("perturb", help="perturb weights and report strength stability")
    sp.add_argument("--model", required=True)
    sp.add_argument("--delta", type=float, required=True,
                    help="uniform noise size on the normalized-strength scale")
    _add_detect_flags(sp)
    _add_common(sp)

    sp = sub.add_parser("saliency", help="per-pixel importance of a sample's local interactions")
    sp.add_argument("--model", required=True)
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--sample", help="comma-separated input values")
    src.add_argument("--sample-file", help="text file with comma-separated input values")
    sp.add_argument("--height", type=int, required=True)
    sp.add_argument("--width", type=int, required=True)
    _add_detect_flags(sp)
    _add_common(sp)

    sp = sub.add_parser("cross", help="append Cartesian-product features to a dataset CSV")
    sp.add_argument("--data", required=True)
    sp.add_argument("--candidates", required=True,
                    help="semicolon-separated feature sets, e.g. '0,1;2,3,4'")
    sp.add_argument("--buckets", type=int, default=100,
                    help="quantile buckets for dense features (default 100)")
    _add_common(sp)

    sp = sub.add_parser("bench", help="run the synthetic-function benchmark suite")
    sp.add_argument("--functions", default="all",
                    help="comma-separated ids (F3,F5,...) or 'all' (default)")
    sp.add_argument("--trials", type=int, default=5, help="trials per function (default 5)")
    sp.add_argument("--n", type=int, default=10_000, help="samples per dataset (default 10000)")
    _add_train_flags(sp)
    _add_detect_flags(sp)
    sp.add_argument("--threads", type=int, default=1, help="parallel trial workers (default 1)")
    _add_common(sp)

    return ap


def _parse_arch(text: str) -> tuple[int, ...]:
    try:
        arch = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ValueError(f"bad --arch {text!r}; expected comma-separated integers") from None
    if not arch:
        raise ValueError("--arch needs at least one width")
    return arch


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        arch=_parse_arch(args.arch),
        lr=args.lr,
        l1=args.l1,
        batch=args.batch,
        max_epochs=args.max_epochs,
        early_stop_rounds=args.early_stop,
        seed=args.seed,
        dtype=args.dtype,
    )


def _outdir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_train(args) -> int:
    if args.data:
        data = read_dataset_csv(args.data)
    else:
        data = gen_synthetic(args.function, args.n, args.seed)
    net, log = train_mlp(data, _train_config(args))
    out = _outdir(args)
    save_network(net, out / "model.json", meta=dict(data.provenance))
    write_train_log_csv(log, out / "train_log.csv")
    if not args.no_figures:
        figures.save_training_curves(log, out / "train_curve.png")
    print(f"best_epoch={log.best_epoch} val_mse={min(log.val_mse):.6g} "
          f"test_mse={log.test_mse:.6g} -> {out / 'model.json'}")
    return 0


def _cmd_detect(args) -> int:
    net = load_network(args.model)
    ledger = detect(net, args.layer, args.p, args.eta, terminal_death=args.terminal_death)
    out = _outdir(args)
    write_ledger_json(ledger, out / "ledger.json")
    matrix = pairwise_strengths(ledger, net.d)
    write_matrix_csv(matrix, out / "pairwise.csv")
    if not args.no_figures:
        figures.save_pairwise_heatmap(matrix, out / "pairwise.png")
    print(f"{len(ledger.entries)} candidates -> {out / 'ledger.json'}")
    return 0


def _read_matrix_csv(path) -> np.ndarray:
    rows = [
        [float(v) for v in ln.split(",")]
        for ln in Path(path).read_text().splitlines()
        if ln and not ln.startswith("#")
    ]
    return np.array(rows)


def _cmd_eval(args) -> int:
    fid = parse_function_id(args.function)
    truth = ground_truth_pairs(fid)
    if args.model:
        net = load_network(args.model)
        ledger = detect(net, args.layer, args.p, args.eta)
        matrix = pairwise_strengths(ledger, net.d)
    else:
        matrix = _read_matrix_csv(args.pairwise)
    if matrix.shape != (N_FEATURES, N_FEATURES):
        raise ValueError(
            f"pairwise matrix is {matrix.shape}, but F{fid} is defined over "
            f"{N_FEATURES} features"
        )
    auc = roc_auc(matrix, truth)
    out = _outdir(args)
    write_json({"function": f"F{fid}", "auc": auc, "n_true_pairs": len(truth.pairs)},
               out / "auc.json")
    if not args.no_figures:
        figures.save_pairwise_heatmap(matrix, out / "pairwise.png",
                                      truth_pairs=sorted(truth.pairs), title=f"F{fid}")
    print(f"F{fid} auc={auc:.4f} -> {out / 'auc.json'}")
    return 0


def _cmd_perturb(args) -> int:
    net = load_network(args.model)
    other = perturb_network(net, args.delta, seed=args.seed)
    report = stability_check(net, other, args.layer, args.p, args.eta)
    out = _outdir(args)
    obj = stability_records(report)
    obj["nominal_delta"] = args.delta
    obj["seed"] = args.seed
    write_json(obj, out / "stability.json")
    if not args.no_figures and report.common:
        figures.save_stability_diffs(report, out / "stability.png")
    status = "ok" if report.bound_satisfied else "VIOLATED"
    print(f"delta={report.delta:.6g} bound={report.bound:.6g} "
          f"max_diff={report.max_diff:.6g} [{status}] -> {out / 'stability.json'}")
    return 0


def _cmd_saliency(args) -> int:
    net = load_network(args.model)
    if args.sample:
        text = args.sample
    else:
        text = Path(args.sample_file).read_text()
    x = np.array([float(v) for v in text.replace("\n", ",").split(",") if v.strip()])
    trace = forward_activations(net, x)
    ledger = detect(local_weights(net, trace), args.layer, args.p, args.eta)
    grid = saliency(ledger, (args.height, args.width))
    out = _outdir(args)
    peak = grid.max()
    norm = grid / peak if peak > 0 else grid
    write_matrix_csv(norm, out / "saliency.csv")
    write_saliency_pgm(grid, out / "saliency.pgm")
    if not args.no_figures:
        figures.save_saliency_map(grid, out / "saliency.png")
    print(f"{len(ledger.entries)} local candidates -> {out / 'saliency.csv'}")
    return 0


def _cmd_cross(args) -> int:
    data = read_dataset_csv(args.data)
    cands = []
    for chunk in args.candidates.split(";"):
        if chunk.strip():
            cands.append(tuple(int(v) for v in chunk.split(",") if v.strip()))
    crossed = cross_features(data, cands, args.buckets)
    out = _outdir(args)
    write_dataset_csv(crossed, out / "crossed.csv")
    print(f"added {len(cands)} crossed columns -> {out / 'crossed.csv'}")
    return 0


def _cmd_bench(args) -> int:
    if args.functions.strip().lower() == "all":
        fids = tuple(range(1, 11))
    else:
        fids = tuple(parse_function_id(v) for v in args.functions.split(",") if v.strip())
    cfg = SuiteConfig(
        functions=fids,
        trials=args.trials,
        n=args.n,
        seed=args.seed,
        train=_train_config(args),
        layer=args.layer,
        p=args.p,
        eta=args.eta,
        threads=args.threads,
    )
    report = run_experiment(cfg)
    out = _outdir(args)
    write_report_json(report, out / "report.json")
    write_report_csv(report, out / "report.csv")
    if not args.no_figures:
        figures.save_auc_bars(report.summaries, report.average_auc, out / "auc_bars.png")
        for fid in fids:
            mats = [t.pairwise for t in report.trials if t.fid == fid and t.pairwise is not None]
            if mats:
                figures.save_pairwise_heatmap(
                    np.mean(mats, axis=0), out / f"heatmap_F{fid}.png",
                    truth_pairs=sorted(ground_truth_pairs(fid).pairs), title=f"F{fid}",
                )
    for s in report.summaries:
        print(f"F{s.fid}: auc={s.mean_auc:.4f} +/- {s.std_auc:.4f} "
              f"(used {s.n_used}/{s.n_trials}, mse={s.mean_test_mse:.2e})")
    print(f"average auc={report.average_auc:.4f} -> {out / 'report.json'}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "detect": _cmd_detect,
    "eval": _cmd_eval,
    "perturb": _cmd_perturb,
    "saliency": _cmd_saliency,
    "cross": _cmd_cross,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if "PID_SEED" in os.environ and hasattr(args, "seed"):
        args.seed = int(os.environ["PID_SEED"])
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, RuntimeError) as e:
        print(f"persid {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
