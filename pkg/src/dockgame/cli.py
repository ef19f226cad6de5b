"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 input/validation failure,
3 numerical failure. All file outputs are CSV or line-delimited JSON.
"""

import argparse
import json
import logging
import sys

import numpy as np

from . import data, engine, game, gradcheck, metrics, nets
from .config import ConfigError, load_config
from .data import DatasetFormatError
from .graph import InvalidComplexError

log = logging.getLogger("dockgame")

PRED_SCHEMA = "dockgame-pred-v1"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser():
    parser = _Parser(prog="dockgame", description=__doc__)
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--config", help="INI config file")
        p.add_argument("--seed", type=int, help="master random seed")
        p.add_argument("--tiny", action="store_true", default=None,
                       help="use the small network preset")
        p.add_argument("--jobs", type=int,
                       help="worker count (1 = deterministic reference mode)")

    p = sub.add_parser("gen", parents=[], help="generate a synthetic dataset")
    common(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="run alternating self-play training")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True,
                   help="output directory for trace.csv and checkpoint.npz")

    p = sub.add_parser("infer", help="predict poses with a trained checkpoint")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    common(p)
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("verify-potential",
                       help="unilateral-deviation probes of the potential")
    common(p)
    p.add_argument("--probes", type=int, default=100,
                   help="probes per player")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out", help="optional probe CSV")

    p = sub.add_parser("gradcheck",
                       help="finite-difference check of all parameter tensors")
    common(p)
    p.add_argument("--threshold", type=float, default=1e-4)
    p.add_argument("--samples", type=int, default=6,
                   help="entries sampled per parameter tensor")

    p = sub.add_parser("ablate", help="sweep (M,N) loop settings")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--grid", nargs="+", required=True, metavar="M,N",
                   help="loop settings, e.g. --grid 1,1 2,2")
    p.add_argument("--out", required=True)
    return parser


def _setup_logging(level):
    logging.basicConfig(stream=sys.stderr,
                        level=getattr(logging, level.upper()),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_run_config(args):
    return load_config(args.config, seed=args.seed, jobs=args.jobs,
                       tiny=args.tiny)


def cmd_gen(args):
    cfg = _load_run_config(args)
    from dataclasses import replace
    spec = cfg.synth
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    records = data.generate(spec)
    data.save_dataset(args.out, records)
    print(f"wrote {len(records)} complexes to {args.out}")
    return EXIT_OK


def _load_records(path):
    records, warnings = data.load_dataset(path)
    for w in warnings:
        log.warning("%s: %s", path, w)
    return records


def cmd_train(args):
    import os
    cfg = _load_run_config(args)
    records = _load_records(args.data)
    os.makedirs(args.out, exist_ok=True)
    players, trace = engine.train(records, cfg.weights, cfg.net, cfg.loop,
                                  cfg.graph, cfg.seed, checkpoint_dir=args.out)
    trace.write_csv(os.path.join(args.out, "trace.csv"))
    nets.save_checkpoint(os.path.join(args.out, "checkpoint.npz"), players,
                         cfg.net, extra={"seed": cfg.seed})
    final = trace.entries[-1].report
    print(f"trained {cfg.loop.epochs} epochs, {len(trace.entries)} steps; "
          f"final F={final.potential:.6f}")
    return EXIT_OK


def cmd_infer(args):
    cfg = _load_run_config(args)
    records = _load_records(args.data)
    players, net_cfg, _ = nets.load_checkpoint(args.checkpoint)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema": PRED_SCHEMA}) + "\n")
        for record in records:
            result = engine.infer(record, players, net_cfg, cfg.loop, cfg.graph)
            fh.write(json.dumps({
                "id": record.complex_id,
                "ligand": np.asarray(result.ligand_coords).tolist(),
                "pocket_index": result.residue_index.tolist(),
                "pocket_coords": np.asarray(result.pocket_coords).tolist(),
                "indicator": result.selection.indicator.tolist(),
                "runtime": result.elapsed,
            }) + "\n")
    print(f"wrote {len(records)} predictions to {args.out}")
    return EXIT_OK


def _load_predictions(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetFormatError("empty prediction file")
    header = json.loads(lines[0])
    if not isinstance(header, dict) or header.get("schema") != PRED_SCHEMA:
        raise DatasetFormatError(f"line 1: unsupported schema {header!r}")
    preds = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            preds[str(obj["id"])] = obj
        except (json.JSONDecodeError, KeyError) as exc:
            raise DatasetFormatError(f"line {lineno}: {exc}") from exc
    return preds


def cmd_eval(args):
    preds = _load_predictions(args.pred)
    records = _load_records(args.truth)
    rmsds, runtimes, indicators, labels, pocket_rmsds = [], [], [], [], []
    for record in records:
        if record.complex_id not in preds:
            raise DatasetFormatError(
                f"missing prediction for complex {record.complex_id}")
        p = preds[record.complex_id]
        pred_lig = np.asarray(p["ligand"], dtype=np.float64)
        rmsds.append(metrics.ligand_rmsd(pred_lig, record.holo_ligand))
        runtimes.append(float(p["runtime"]))
        indicators.append(np.asarray(p["indicator"], dtype=np.int64))
        labels.append(record.pocket_labels)
        # scatter predicted pocket coordinates back into the full protein,
        # then score over the true-pocket residues
        full = record.apo_residues.copy()
        idx = np.asarray(p["pocket_index"], dtype=np.int64)
        full[idx] = np.asarray(p["pocket_coords"], dtype=np.float64)
        mask = record.pocket_labels == 1
        pocket_rmsds.append(
            metrics.ligand_rmsd(full[mask], record.holo_residues[mask]))
    summary = metrics.summarize(
        rmsds, runtimes,
        pocket_accuracy_pct=metrics.pocket_accuracy(indicators, labels),
        pocket_rmsds=pocket_rmsds)
    table = metrics.summary_csv(summary)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(table)
    print(table, end="")
    return EXIT_OK


def cmd_verify_potential(args):
    cfg = _load_run_config(args)
    record = data.generate_complex(cfg.synth, 0)
    players = engine.init_players(cfg.net, cfg.seed)
    probes = game.run_potential_probes(record, players, cfg.weights, cfg.net,
                                       cfg.graph, n_probes=args.probes,
                                       tol=args.tol)
    if args.out:
        game.write_probe_csv(args.out, probes)
    worst = max(p.residual / (1.0 + abs(p.delta_f)) for p in probes)
    failed = sum(not p.passed for p in probes)
    print(f"{len(probes)} probes, worst relative residual {worst:.3e}, "
          f"{failed} failed at tol {args.tol:g}")
    if failed:
        raise engine.NumericalError(
            f"{failed} deviation probes violated the potential identity")
    return EXIT_OK


def cmd_gradcheck(args):
    cfg = _load_run_config(args)
    players = engine.init_players(cfg.net, cfg.seed)
    errors, worst = gradcheck.run_gradcheck(
        players, cfg.weights, cfg.net, cfg.graph, seed=7,
        samples_per_tensor=args.samples)
    for (store, name), err in sorted(errors.items()):
        log.info("gradcheck %s/%s: %.3e", store, name, err)
    print(f"checked {len(errors)} parameter tensors, "
          f"max relative error {worst:.3e}")
    if worst > args.threshold:
        raise engine.NumericalError(
            f"gradient check failed: {worst:.3e} > {args.threshold:g}")
    return EXIT_OK


def _parse_grid(cells):
    grid = []
    for cell in cells:
        parts = cell.split(",")
        if len(parts) != 2:
            raise ConfigError(f"grid cell must be M,N: {cell!r}")
        try:
            grid.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise ConfigError(f"grid cell must be M,N integers: {cell!r}") from exc
    return grid


def cmd_ablate(args):
    import csv as csv_mod
    from dataclasses import replace
    cfg = _load_run_config(args)
    records = _load_records(args.data)
    train_set, _, test_set = data.split(records, (0.8, 0.1, 0.1), cfg.seed)
    if not test_set:
        test_set = train_set
    grid = _parse_grid(args.grid)
    rows = []
    for m, n in grid:
        loop_cfg = replace(cfg.loop, m_ligand=m, m_protein=m,
                           n_ligand=n, n_protein=n)
        players, _ = engine.train(train_set, cfg.weights, cfg.net, loop_cfg,
                                  cfg.graph, cfg.seed)
        rmsds = []
        for record in test_set:
            result = engine.infer(record, players, cfg.net, loop_cfg, cfg.graph)
            rmsds.append(metrics.ligand_rmsd(result.ligand_coords,
                                             record.holo_ligand))
        below2, below5 = metrics.success_rates(rmsds)
        rows.append([m, n, repr(float(np.mean(rmsds))), repr(below2),
                     repr(below5)])
        print(f"loops ({m},{n}): mean test RMSD {float(np.mean(rmsds)):.4f}")
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv_mod.writer(fh)
        writer.writerow(["outer_loops", "inner_loops", "mean_rmsd",
                         "pct_below_2A", "pct_below_5A"])
        writer.writerows(rows)
    return EXIT_OK


_COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "verify-potential": cmd_verify_potential,
    "gradcheck": cmd_gradcheck,
    "ablate": cmd_ablate,
}


def dispatch(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    _setup_logging(args.log_level)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, DatasetFormatError, InvalidComplexError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (engine.NumericalError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
