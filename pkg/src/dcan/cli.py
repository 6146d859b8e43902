"""``dcan`` command line: synth, train, eval, gradcheck and baseline.

Exit codes: 0 success, 1 verification failure, 2 usage or config error,
3 runtime or data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import pca as pca_mod
from .cca import SingularCovarianceError, cca_embed, fit_cca
from .config import ConfigError, RunConfig, describe, load_config
from .dataset import DatasetError, ViewDataset, generate_synthetic, load_dataset, save_dataset
from .evaluation import cross_view_eval, evaluate_embeddings, neighbor_preservation
from .objective import DivergedError, grad_check, small_instance
from .trainer import embed, load_model, resolve_widths, save_model, train

log = logging.getLogger("dcan")

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3
GRADCHECK_TOL = 1e-5

MODEL_FILE = "model.dcan"
REPORT_FILE = "report.csv"
CCA_REPORT_FILE = "cca_report.csv"
COMPARISON_FILE = "comparison.csv"


class UsageError(Exception):
    """Bad invocation; maps to exit code 2."""


def synthetic_dataset(cfg: RunConfig) -> ViewDataset:
    return generate_synthetic(classes=cfg["data.classes"], per_class=cfg["data.per_class"],
                              ambient_dim=cfg["data.ambient_dim"], view_warp_seed=cfg["data.seed"],
                              noise_sigma=cfg["data.noise"], latent_dim=cfg["data.latent_dim"],
                              warp_gain=cfg["data.warp_gain"], warp=cfg["data.warp"])


def dataset_from_config(cfg: RunConfig) -> ViewDataset:
    if cfg["data.source"] == "synthetic":
        return synthetic_dataset(cfg)
    paths = [cfg["data.x"], cfg["data.y"], cfg["data.labels"]]
    if not all(paths):
        raise UsageError("data.source=files needs data.x, data.y and data.labels")
    split = cfg["data.split"] or None
    for p in paths + ([split] if split else []):
        if not Path(p).is_file():
            raise UsageError(f"data file not found: {p}")
    return load_dataset(*paths, path_split=split)


# --------------------------------------------------------------------------
# commands

def cmd_synth(cfg: RunConfig, args) -> int:
    try:
        data = synthetic_dataset(cfg)
    except ValueError as exc:
        raise ConfigError(f"synthetic generator: {exc}") from None
    out = cfg.output_dir
    save_dataset(data, out)
    cfg.echo()
    n_train = int(np.sum(data.split == "train"))
    summary = (f"samples={data.n} dim={data.d} classes={np.unique(data.labels).size} "
               f"train={n_train} test={data.n - n_train}")
    (out / "summary.txt").write_text(summary + "\n")
    print(summary)
    return EXIT_OK


def cmd_train(cfg: RunConfig, args) -> int:
    data = dataset_from_config(cfg)
    tcfg = cfg.train_config()
    model = train(data, tcfg)
    out = cfg.output_dir
    cfg.echo()
    save_model(model, out / MODEL_FILE)
    for h in model.history:
        h["result"].write_trace(out / f"trace_layer{h['layer']}.csv")
        print(f"layer {h['layer']}: {h['initial_value']:.6g} -> {h['final_value']:.6g} "
              f"({h['iterations']} iterations, {h['status']})")
    print(f"model written to {out / MODEL_FILE}")
    return EXIT_OK


def _depth(cfg, model):
    depth = cfg["eval.depth"] or model.depth
    if not 1 <= depth <= model.depth:
        raise UsageError(f"eval.depth {depth} outside [1, {model.depth}]")
    return depth


def cmd_eval(cfg: RunConfig, args) -> int:
    out = cfg.output_dir
    model_path = Path(args.model) if args.model else out / MODEL_FILE
    if not model_path.is_file():
        raise UsageError(f"model file not found: {model_path}")
    model = load_model(model_path)
    data = dataset_from_config(cfg)
    if model.pca.input_dim != data.d:
        raise DatasetError(f"dimension mismatch: model expects {model.pca.input_dim} features, "
                           f"data has {data.d}")
    depth = _depth(cfg, model)
    cfg.echo()
    report = cross_view_eval(model, data, metric=cfg["eval.metric"], depth=depth)
    report.write_csv(out / REPORT_FILE)
    if args.json:
        report.write_json(out / "report.json")
    te = data.test
    pooled = None
    if args.plot2d or args.neighbors:
        pooled = np.vstack([embed(model, te.view_x, "x", depth), embed(model, te.view_y, "y", depth)])
    if args.plot2d:
        pca_mod.project_2d(pooled, np.concatenate([te.labels, te.labels]), out / "plot2d.csv")
    if args.neighbors:
        original = np.vstack([pca_mod.transform(model.pca, te.view_x),
                              pca_mod.transform(model.pca, te.view_y)])
        if not 1 <= args.neighbors < original.shape[0]:
            raise UsageError(f"--neighbors must lie in [1, {original.shape[0] - 1}]")
        frac = neighbor_preservation(original, pooled, args.neighbors)
        with open(out / "neighbors.csv", "w") as fh:
            fh.write("k,fraction\n")
            for k, v in enumerate(frac, 1):
                fh.write(f"{k},{v!r}\n")
    for name, acc in report.csv_rows():
        print(f"{name},{acc:.4f}")
    return EXIT_OK


def cmd_gradcheck(cfg: RunConfig, args) -> int:
    seed = cfg["train.seed"]
    params, x, y, pairs, ocfg = small_instance(seed)
    report = grad_check(params, x, y, pairs, ocfg)
    print(report.csv_line())
    return EXIT_OK if report.max_rel_err < GRADCHECK_TOL else EXIT_VERIFY


def _read_report(path: Path) -> dict[str, float]:
    rows = {}
    for line in path.read_text().splitlines()[1:]:
        name, acc = line.split(",")
        rows[name] = float(acc)
    return rows


def cmd_baseline(cfg: RunConfig, args) -> int:
    data = dataset_from_config(cfg)
    tcfg = cfg.train_config()
    tr, te = data.train, data.test
    if te.n == 0:
        raise DatasetError("test split is empty")
    pooled = np.vstack([tr.view_x, tr.view_y])
    widths = resolve_widths(tcfg, *pooled.shape)
    pm = pca_mod.fit_pca(pooled, widths[0])
    r = min(cfg["cca.dim"] or widths[-1], widths[0])
    model = fit_cca(pca_mod.transform(pm, tr.view_x), pca_mod.transform(pm, tr.view_y), r, cfg["cca.reg"])
    ex = cca_embed(model, pca_mod.transform(pm, te.view_x), "x")
    ey = cca_embed(model, pca_mod.transform(pm, te.view_y), "y")
    report = evaluate_embeddings(ex, ey, te.labels, cfg["eval.metric"])
    out = cfg.output_dir
    cfg.echo()
    report.write_csv(out / CCA_REPORT_FILE)

    rows = []
    dcan_path = out / REPORT_FILE
    if dcan_path.is_file():
        dcan = _read_report(dcan_path)
        rows += [("dcan", d, dcan[d]) for d in ("x->y", "y->x")]
    else:
        log.warning("no network report at %s; writing a CCA-only comparison", dcan_path)
    rows += [("cca", d, acc) for d, acc in report.csv_rows() if d != "mean"]
    with open(out / COMPARISON_FILE, "w") as fh:
        fh.write("method,direction,accuracy\n")
        for method, d, acc in rows:
            fh.write(f"{method},{d},{acc!r}\n")
    for method, d, acc in rows:
        print(f"{method},{d},{acc:.4f}")
    return EXIT_OK


COMMANDS = {
    "synth": (cmd_synth, "write a synthetic two-view dataset"),
    "train": (cmd_train, "train a coupled network"),
    "eval": (cmd_eval, "rank-1 cross-view evaluation of a trained model"),
    "gradcheck": (cmd_gradcheck, "finite-difference check of the layer gradient"),
    "baseline": (cmd_baseline, "linear CCA baseline and side-by-side comparison"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcan", formatter_class=argparse.RawDescriptionHelpFormatter,
        description="Coupled auto-encoder networks for cross-view recognition.",
        epilog="config keys (default, meaning):\n" + describe())
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-c", "--config", help="flat key = value config file")
        p.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable; wins over the file)")
        if name == "eval":
            p.add_argument("--model", help=f"model file (default: output.dir/{MODEL_FILE})")
            p.add_argument("--plot2d", action="store_true", help="write plot2d.csv of the embeddings")
            p.add_argument("--neighbors", type=int, default=0, metavar="K",
                           help="write neighbors.csv for k = 1..K")
            p.add_argument("--json", action="store_true", help="also write report.json")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    func = COMMANDS[args.command][0]
    try:
        cfg = load_config(args.config, args.set)
        return func(cfg, args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, pca_mod.DegenerateDataError, SingularCovarianceError,
            DivergedError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
