"""Command-line entry point: ``predbeam <command> [options]``.

Commands: gen-data, train, eval, sweep-nmse, sweep-power, gradcheck.
Configuration is resolved as defaults < --config file < --paper-scale <
--set KEY=VALUE < dedicated flags such as --seed.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .errors import PredbeamError
from .experiments import (
    Dataset,
    emit_results,
    evaluate,
    generate_dataset,
    sweep_nmse,
    sweep_power,
    train,
    write_manifest,
)
from .nn.checkpoint import load_model, save_model
from .nn.gradcheck import gradient_check
from .predictors import CLRNET, METHODS

log = logging.getLogger("predbeam")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out-dir", type=Path, default=Path("runs"), help="output directory (default: runs)")
    p.add_argument("--paper-scale", action="store_true", help="2,000 realizations and 10,000 training examples")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="predbeam", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="simulate a training dataset (.npz)")
    _common(p)
    p.add_argument("--rho", type=float, help="NMSE of the sensing noise (default: config nmse)")

    p = sub.add_parser("train", help="train a CLRNet and write its checkpoint")
    _common(p)
    p.add_argument("--rho", type=float, help="NMSE used when generating the dataset")
    p.add_argument("--data", type=Path, help="dataset from gen-data instead of simulating one")

    p = sub.add_parser("eval", help="Monte-Carlo sum-rate at one (NMSE, power) point")
    _common(p)
    p.add_argument("--rho", type=float)
    p.add_argument("--power-dbm", type=float)
    p.add_argument("--model", type=Path, help="CLRNet checkpoint (needed for the clrnet method)")
    p.add_argument("--methods", nargs="+", choices=METHODS)

    p = sub.add_parser("sweep-nmse", help="sum-rate versus NMSE at the configured power")
    _common(p)
    p.add_argument("--model-dir", type=Path, help="reuse clrnet_nmse_<rho>.json checkpoints found here")

    p = sub.add_parser("sweep-power", help="sum-rate versus total power at sweep_power_nmse")
    _common(p)
    p.add_argument("--model", type=Path, help="CLRNet checkpoint to evaluate instead of training")

    p = sub.add_parser("gradcheck", help="finite-difference check of the analytic gradients")
    _common(p)
    p.add_argument("--draws", type=int, default=20)
    p.add_argument("--tolerance", type=float, default=1e-5)
    return parser


def resolve_config(args):
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise PredbeamError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value
    if args.seed is not None:
        overrides["seed"] = args.seed
    return load_config(args.config, overrides, args.paper_scale)


def checkpoint_name(rho: float) -> str:
    return f"clrnet_nmse_{rho:g}.json"


def _progress(it, loss, val):
    log.info("iteration %d  batch loss %.6g  validation loss %.6g", it, loss, val)


def _save_dataset(ds: Dataset, path: Path):
    np.savez(path, inputs=ds.inputs, labels=ds.labels, nmse=np.asarray(ds.nmse),
             angle_second_moment=ds.angle_second_moment)


def _load_dataset(path: Path) -> Dataset:
    with np.load(path) as z:
        return Dataset(z["inputs"], z["labels"], tuple(float(v) for v in z["nmse"]),
                       float(z["angle_second_moment"]))


def cmd_gen_data(args, cfg, out: Path):
    ds = generate_dataset(cfg, args.rho)
    path = out / "dataset.npz"
    _save_dataset(ds, path)
    print(f"wrote {len(ds)} examples to {path}")


def cmd_train(args, cfg, out: Path):
    ds = _load_dataset(args.data) if args.data else generate_dataset(cfg, args.rho)
    result = train(cfg, ds, _progress)
    name = checkpoint_name(ds.nmse[0]) if len(ds.nmse) == 1 else "clrnet_mixed.json"
    (out / name).write_bytes(save_model(result.model))
    with (out / "loss_trace.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("iteration", "loss"))
        w.writerows((i, repr(v)) for i, v in enumerate(result.loss_trace, 1))
    print(f"initial loss {result.initial_train_loss:.6g}, final loss {result.final_train_loss:.6g}, "
          f"validation RMSE {result.val_rmse():.5f} rad")
    print(f"wrote {out / name}")


def cmd_eval(args, cfg, out: Path):
    rho = cfg.nmse if args.rho is None else args.rho
    power = cfg.total_power_dbm if args.power_dbm is None else args.power_dbm
    model = load_model(args.model.read_bytes()) if args.model else None
    methods = args.methods or [m for m in METHODS if m != CLRNET or model is not None]
    results = evaluate(cfg, rho, power, methods, model)
    emit_results(results, out, cfg, "eval.csv")
    for r in results:
        print(f"{r.method:12s} {r.mean_sum_rate:.4f} +- {r.std_error:.4f} bits/s/Hz")


def cmd_sweep_nmse(args, cfg, out: Path):
    models = {}
    if args.model_dir:
        for rho in cfg.nmse_grid:
            path = args.model_dir / checkpoint_name(rho)
            if path.exists():
                models[rho] = load_model(path.read_bytes())
    results, models = sweep_nmse(cfg, models, _progress)
    for rho, model in models.items():
        (out / checkpoint_name(rho)).write_bytes(save_model(model))
    emit_results(results, out, cfg, "sweep_nmse.csv")
    print(f"wrote {out / 'sweep_nmse.csv'}")


def cmd_sweep_power(args, cfg, out: Path):
    model = load_model(args.model.read_bytes()) if args.model else None
    results, model = sweep_power(cfg, model, _progress)
    (out / checkpoint_name(cfg.sweep_power_nmse)).write_bytes(save_model(model))
    emit_results(results, out, cfg, "sweep_power.csv")
    print(f"wrote {out / 'sweep_power.csv'}")


def cmd_gradcheck(args, cfg, out: Path):
    res = gradient_check(n_draws=args.draws, seed=cfg.seed)
    for name, err in res.per_param.items():
        print(f"{name:8s} {err:.3e}")
    ok = res.max_relative_error < args.tolerance
    print(f"max relative error {res.max_relative_error:.3e} ({'PASS' if ok else 'FAIL'} at {args.tolerance:g})")
    return 0 if ok else 1


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep-nmse": cmd_sweep_nmse,
    "sweep-power": cmd_sweep_power,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        out = args.out_dir
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(cfg, out, " ".join(["predbeam"] + list(argv if argv is not None else sys.argv[1:])))
        (out / "config.txt").write_text(cfg.to_text())
        return COMMANDS[args.command](args, cfg, out) or 0
    except PredbeamError as exc:
        print(f"predbeam: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
