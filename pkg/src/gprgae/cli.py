"""Command-line entry point: ``gprgae <command> [--config FILE] [--set key=value ...]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
``GPRGAE_OUTPUT_DIR`` overrides ``output.dir``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
from filelock import FileLock, Timeout

from . import config as config_mod
from .attack import AttackConfig, prbcd_lite, random_flip_attack
from .classifier import GcnParams
from .config import ConfigError
from .datasets import planted_partition
from .estimators import GCNNodeClassifier, GPRGAEPurifier
from .graph import GraphFormatError, LabeledGraph, load_graph, read_edges, save_graph, write_edges
from .model import GprGaeParams

logger = logging.getLogger("gprgae")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class DataError(RuntimeError):
    pass


def _output_dir(cfg: dict) -> Path:
    base = os.environ.get("GPRGAE_OUTPUT_DIR") or cfg["output.dir"]
    out = Path(base) / cfg["output.run_id"]
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_dataset(cfg: dict) -> LabeledGraph:
    paths = [cfg[f"data.{k}"] for k in ("edges", "features", "labels", "split")]
    if all(p is None for p in paths):
        s = config_mod.section(cfg, "synthetic")
        return planted_partition(n_nodes=s["n_nodes"], n_classes=s["n_classes"], p_in=s["p_in"],
                                 p_out=s["p_out"], n_features=s["n_features"],
                                 feature_noise=s["feature_noise"], random_state=s["seed"])
    if any(p is None for p in paths):
        raise ConfigError("data.edges, data.features, data.labels and data.split go together")
    try:
        return load_graph(*paths)
    except OSError as exc:
        raise DataError(str(exc)) from None


def _graph_with_edges(g: LabeledGraph, edges_path) -> LabeledGraph:
    if edges_path is None:
        return g
    try:
        adjacency, _ = read_edges(edges_path, n=g.n)
    except OSError as exc:
        raise DataError(str(exc)) from None
    return g.with_adjacency(adjacency)


def _purifier(cfg: dict) -> GPRGAEPurifier:
    s, p = config_mod.section(cfg, "purifier"), config_mod.section(cfg, "purify")
    return GPRGAEPurifier(k=s["k"], z1=s["z1"], z2=s["z2"], p=s["p"], q=s["q"], eta=s["eta"],
                          delta=s["delta"], epochs=s["epochs"], lr=s["lr"],
                          weight_decay=s["weight_decay"], dropout=s["dropout"],
                          self_loops=s["self_loops"], reweight=s["reweight"],
                          n_val_sets=s["n_val_sets"], alpha=p["alpha"], tau=p["tau"],
                          max_steps=p["max_steps"], prune_eps=p["prune_eps"],
                          single_step_discretize=p["single_step_discretize"],
                          random_state=s["seed"])


def _load_purifier(cfg: dict, path) -> GPRGAEPurifier:
    params = _read_checkpoint(GprGaeParams, path)
    est = _purifier(cfg)
    fitted = GPRGAEPurifier.from_params(params)
    fitted.set_params(**{k: v for k, v in est.get_params().items()
                         if k not in ("k", "z1", "z2")})
    return fitted


def _classifier(cfg: dict) -> GCNNodeClassifier:
    s = config_mod.section(cfg, "classifier")
    return GCNNodeClassifier(hidden=s["hidden"], dropout=s["dropout"], lr=s["lr"],
                             weight_decay=s["weight_decay"], loss=s["loss"],
                             max_epochs=s["max_epochs"], patience=s["patience"],
                             random_state=s["seed"])


def _read_checkpoint(cls, path):
    try:
        return cls.load(path)
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from None
    except (ValueError, KeyError) as exc:
        raise DataError(f"bad checkpoint {path}: {exc}") from None


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- commands ------------------------------------------------------------

def cmd_generate_data(cfg, args, out):
    g = _load_dataset(cfg)
    target = Path(args.out) if args.out else out / "data"
    paths = save_graph(g, target)
    return {k: str(v) for k, v in paths.items()}


def cmd_train_purifier(cfg, args, out):
    g = _load_dataset(cfg)
    est = _purifier(cfg)
    est.fit_graph(g)
    ckpt = out / "purifier.json"
    est.params_.save(ckpt)
    with open(out / "purifier_log.jsonl", "w") as fh:
        for row in est.history_:
            fh.write(json.dumps(row) + "\n")
    best = est.history_[est.best_epoch_ - 1] if est.history_ else {}
    return {"checkpoint": str(ckpt), "best_epoch": est.best_epoch_,
            "val_auc": best.get("val_auc"), "val_ap": best.get("val_ap")}


def cmd_train_classifier(cfg, args, out):
    g = _load_dataset(cfg)
    est = _classifier(cfg).fit_graph(g)
    ckpt = out / "classifier.json"
    est.params_.save(ckpt)
    with open(out / "classifier_log.jsonl", "w") as fh:
        for row in est.history_:
            fh.write(json.dumps(row) + "\n")
    return {"checkpoint": str(ckpt), "epochs": len(est.history_),
            "best_val_acc": max(r["val_acc"] for r in est.history_)}


def cmd_attack(cfg, args, out):
    g = _load_dataset(cfg)
    clf = GCNNodeClassifier.from_params(_read_checkpoint(GcnParams, args.classifier))
    s = config_mod.section(cfg, "attack")
    acfg = AttackConfig(epsilon=s["epsilon"], block_size=s["block_size"], rounds=s["rounds"],
                        seed=s["seed"])
    if s["kind"] == "prbcd_lite":
        attacked, report = prbcd_lite(clf.params_, g.adjacency, g.features, g.labels, g.test, acfg)
    else:
        attacked, report = random_flip_attack(g.adjacency, g.test, acfg)
    report["victim_acc_before"] = clf.score(g.features, g.labels, g.adjacency, g.test)
    report["victim_acc_after"] = clf.score(g.features, g.labels, attacked, g.test)
    edges = Path(args.out_edges) if args.out_edges else out / "attacked_edges.tsv"
    write_edges(attacked, edges)
    _write_json(out / "attack_report.json", report)
    return {**report, "edges": str(edges)}


def cmd_purify(cfg, args, out):
    g = _graph_with_edges(_load_dataset(cfg), args.edges)
    est = _load_purifier(cfg, args.purifier)
    trace = est.purify(g.features, g.adjacency)
    edges = Path(args.out_edges) if args.out_edges else out / "purified_edges.tsv"
    write_edges(trace.final, edges)
    (out / "purify_trace.json").write_text(trace.to_json() + "\n")
    return {"edges": str(edges), "steps": len(trace.steps), "termination": trace.termination,
            "ratios": trace.ratios}


def cmd_evaluate(cfg, args, out):
    g = _graph_with_edges(_load_dataset(cfg), args.edges)
    clf = GCNNodeClassifier.from_params(_read_checkpoint(GcnParams, args.classifier))
    result = {"accuracy": clf.score(g.features, g.labels, g.adjacency, g.test),
              "n_test": int(len(g.test)), "edges": args.edges or "dataset"}
    _write_json(out / "evaluation.json", result)
    return result


def cmd_lipschitz(cfg, args, out):
    g = _graph_with_edges(_load_dataset(cfg), args.edges)
    est = _load_purifier(cfg, args.purifier)
    s = config_mod.section(cfg, "lipschitz")
    value = est.lipschitz(g.features, g.adjacency, pairs=s["pairs"], max_budget=s["max_budget"],
                          random_state=s["seed"])
    result = {"lipschitz": value, "pairs": s["pairs"], "max_budget": s["max_budget"]}
    _write_json(out / "lipschitz.json", result)
    return result


def export_coefficients(params: GprGaeParams) -> list[list[float]]:
    """Filter coefficients with each row's sign flipped so its last entry is >= 0."""
    rows = []
    for k in range(params.k_max + 1):
        row = params.gamma[k, :k + 1].copy()
        if row[-1] < 0:
            row = -row
        rows.append(row.tolist())
    return rows


def cmd_export_coefficients(cfg, args, out):
    params = _read_checkpoint(GprGaeParams, args.purifier)
    rows = export_coefficients(params)
    path = Path(args.out) if args.out else out / "coefficients.csv"
    path.write_text("".join(",".join(f"{v:.6g}" for v in row) + "\n" for row in rows))
    return {"csv": str(path), "filters": len(rows)}


COMMANDS = {
    "generate-data": cmd_generate_data,
    "train-purifier": cmd_train_purifier,
    "train-classifier": cmd_train_classifier,
    "attack": cmd_attack,
    "purify": cmd_purify,
    "evaluate": cmd_evaluate,
    "lipschitz": cmd_lipschitz,
    "export-coefficients": cmd_export_coefficients,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gprgae", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration key (repeatable)")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("purify", "lipschitz", "export-coefficients"):
            p.add_argument("--purifier", required=True, help="purifier checkpoint")
        if name in ("attack", "evaluate"):
            p.add_argument("--classifier", required=True, help="classifier checkpoint")
        if name in ("purify", "evaluate", "lipschitz"):
            p.add_argument("--edges", help="edges.tsv replacing the dataset graph")
        if name in ("attack", "purify"):
            p.add_argument("--out-edges", help="where to write the resulting edges.tsv")
        if name in ("generate-data", "export-coefficients"):
            p.add_argument("--out", help="output path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_mod.override(config_mod.load(args.config), args.set)
        out = _output_dir(cfg)
        with FileLock(str(out / ".lock"), timeout=0):
            result = COMMANDS[args.command](cfg, args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Timeout:
        print("config error: run directory is locked by another process", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, GraphFormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(json.dumps(result, sort_keys=True, default=_json_default))
    return EXIT_OK


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(type(obj).__name__)


if __name__ == "__main__":
    sys.exit(main())
