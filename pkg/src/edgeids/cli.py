"""``edgeids`` command line: preprocess, search, train, evaluate, profile, bench, extract.

Exit codes: 0 success, 1 usage, 2 data error, 3 no feasible candidate, 4 I/O.
Output verbosity comes from ``EDGEIDS_VERBOSITY`` (0 quiet, 1 info, 2 debug).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import dataio
from .cnn.arch import CnnArch, GeometryError
from .cnn.model import init_model
from .cnn.train import TrainConfig, TrainingError, train
from .dataio import DataError, Dataset
from .flowext import FeatureSchema, PcapFormatError, PcapReplay, aggregate, write_feature_csv
from .flowext.features import SchemaError
from .hwcost import KB, HardwareBudget, check_budget, profile_cnn
from .metrics import evaluate
from .runtime import (
    ArtifactError,
    ModelArtifact,
    SchemaMismatchError,
    benchmark_latency,
    classify_stream,
    energy_report,
    read_artifact,
    write_ndjson,
)
from .runtime.stream import check_schema
from .search import (
    CnnTrainer,
    EventLog,
    GridSpace,
    NasConfig,
    NasSpace,
    NoFeasibleCandidate,
    constrained_grid_search,
    evolve,
)
from .trees import Family, TreeHyperParams, train_ensemble

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3, 4
VERBOSITY_ENV = "EDGEIDS_VERBOSITY"

FAMILIES = {"rf": Family.RF, "leafwise": Family.GBDT_LEAFWISE, "levelwise": Family.GBDT_LEVELWISE}
TASK_MAPPINGS = {"6class": "edge_iiotset_6class.json", "2class": "edge_iiotset_2class.json"}
CONFIG_ONLY_KEYS = {"grid", "nas_space"}

log = logging.getLogger("edgeids")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- helpers -----------------------------------------------------------------


def _emit(doc, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _budget(args) -> HardwareBudget:
    return HardwareBudget(args.budget_flash_kb * KB, args.budget_ram_kb * KB, args.budget_ops)


def load_mapping(task: str, mapping_path: str | None):
    if mapping_path:
        return json.loads(Path(mapping_path).read_text())
    if task == "15class":
        return None
    text = resources.files("edgeids").joinpath("data", TASK_MAPPINGS[task]).read_text()
    return json.loads(text)


def _load_data(args) -> Dataset:
    d = dataio.clean(dataio.load_csv(args.data, args.label_column))
    mapping = load_mapping(args.task, args.mapping)
    if mapping is not None:
        d = dataio.remap_classes(d, mapping)
    log.info("loaded %d rows, %d features, %d classes", d.n_rows, d.n_features, d.n_classes)
    return d


def _scale(params: dataio.ScalerParams, d: Dataset) -> Dataset:
    return Dataset(params.transform(d.features), d.labels, d.feature_names, d.class_names)


def _fit_scaler(train_d: Dataset, *others: Dataset):
    scaled, params = dataio.minmax_scale(train_d)
    return params, scaled, *(_scale(params, o) for o in others)


def _read_descriptor(path) -> dict:
    return json.loads(Path(path).read_text())


def _is_cnn(desc: dict) -> bool:
    return "blocks" in desc


def _cnn_arch(desc: dict, d: Dataset) -> CnnArch:
    full = {"input_len": d.n_features, "n_classes": d.n_classes, **desc}
    return CnnArch.from_dict(full)


def _train_config(args, seed: int) -> TrainConfig:
    return TrainConfig(max_epochs=args.max_epochs, batch_size=args.batch_size,
                       initial_lr=args.initial_lr, seed=seed)


def _fit_descriptor(desc: dict, train_d: Dataset, args, seed: int):
    """Train one model from a descriptor on already-scaled data."""
    if _is_cnn(desc):
        arch = _cnn_arch(desc, train_d)
        fit_d, val_d = dataio.stratified_split(train_d, args.holdout, seed)
        model, _ = train(init_model(arch, seed), fit_d, val_d, _train_config(args, seed))
        return model
    return train_ensemble(train_d, TreeHyperParams.from_dict(desc), seed)


# --- subcommands -----------------------------------------------------------------


def cmd_preprocess(args) -> int:
    d = _load_data(args)
    scaled, params = dataio.minmax_scale(d)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataio.save_csv(scaled, out / "clean.csv", label_column=args.label_column)
    params.save(out / "scaler.json")
    _emit({"rows": d.n_rows, "features": d.n_features, "classes": list(d.class_names),
           "class_counts": d.class_counts().tolist()}, None)
    return EXIT_OK


def _search_setup(args):
    d = _load_data(args)
    tr, va = dataio.stratified_split(d, args.holdout, args.seed)
    params, tr, va = _fit_scaler(tr, va)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return d, params, tr, va, out


def _finish_search(summary, best_model, d, params, out, budget) -> int:
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    art = ModelArtifact(best_model, d.feature_names, d.class_names, scaler=params,
                        meta={"budget": budget.to_dict()})
    art.save(out / "best.hams")
    _emit(summary["best"], None)
    return EXIT_OK


def cmd_gridsearch(args) -> int:
    budget = _budget(args)
    d, params, tr, va, out = _search_setup(args)
    space = GridSpace(family=FAMILIES[args.family], **(args.grid or {}))
    log.info("%d grid candidates", space.size())
    res = constrained_grid_search(space, budget, tr, va, args.seed, workers=args.workers,
                                  event_log=EventLog(out / "events.ndjson"))
    summary = res.summary()
    if not res.feasible:
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        raise NoFeasibleCandidate("no grid candidate satisfies the budget", res.best_infeasible)
    return _finish_search(summary, res.best.model, d, params, out, budget)


def cmd_nas(args) -> int:
    budget = _budget(args)
    d, params, tr, va, out = _search_setup(args)
    cfg = NasConfig(generations=args.generations, children_per_generation=args.children,
                    initial_population=args.initial_population, seed=args.seed,
                    workers=args.workers)
    space = NasSpace(**{k: tuple(v) for k, v in (args.nas_space or {}).items()})
    trainer = CnnTrainer(_train_config(args, args.seed))
    res = evolve(cfg, space, budget, tr, va, trainer, event_log=EventLog(out / "events.ndjson"))
    return _finish_search(res.summary(), res.best.model, d, params, out, budget)


def cmd_train(args) -> int:
    d = _load_data(args)
    desc = _read_descriptor(args.descriptor)
    params, sd = _fit_scaler(d)
    model = _fit_descriptor(desc, sd, args, args.seed)
    art = ModelArtifact(model, d.feature_names, d.class_names, scaler=params)
    art.save(args.out)
    _emit({"model": str(args.out), "kind": art.kind, "profile": art.profile.to_dict()}, None)
    return EXIT_OK


def cmd_eval(args) -> int:
    d = _load_data(args)
    if args.model:
        desc = read_artifact(args.model).descriptor
    elif args.descriptor:
        desc = _read_descriptor(args.descriptor)
    else:
        raise UsageError("eval needs --model or --descriptor")
    plan = dataio.stratified_kfold(d, args.folds, args.seed)
    folds = []
    for i, (tr_idx, te_idx) in enumerate(plan.folds()):
        _, tr, te = _fit_scaler(d.subset(tr_idx), d.subset(te_idx))
        model = _fit_descriptor(desc, tr, args, args.seed)
        rep = evaluate(model, te)
        log.info("fold %d: accuracy %.4f", i, rep.accuracy)
        folds.append(rep)
    doc = {"k": args.folds, "descriptor": desc, "folds": [r.to_dict() for r in folds]}
    for m in ("accuracy", "macro_f1", "weighted_f1"):
        vals = np.array([getattr(r, m) for r in folds])
        doc[m] = {"mean": float(vals.mean()), "std": float(vals.std())}
    _emit(doc, args.out)
    return EXIT_OK


def cmd_profile(args) -> int:
    budget = _budget(args)
    if args.model:
        art = read_artifact(args.model)
        prof, desc = art.profile, art.descriptor
    elif args.descriptor:
        desc = _read_descriptor(args.descriptor)
        if not _is_cnn(desc):
            raise UsageError("tree cost depends on the trained structure; profile an artifact")
        if "input_len" not in desc or "n_classes" not in desc:
            raise UsageError("CNN descriptor needs input_len and n_classes to be profiled")
        prof = profile_cnn(CnnArch.from_dict(desc))
    else:
        raise UsageError("profile needs --model or --descriptor")
    verdict = check_budget(prof, budget)
    _emit({"descriptor": desc, "profile": prof.to_dict(), "budget": budget.to_dict(),
           "feasible": verdict.feasible, "violated": list(verdict.violated)}, args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    art = read_artifact(args.model)
    if args.data:
        d = dataio.clean(dataio.load_csv(args.data, args.label_column))
        X = dataio.select_features(d, art.feature_names).features
    else:
        rng = np.random.default_rng(args.seed)
        lo = art.scaler.mins if art.scaler is not None else np.zeros(len(art.feature_names))
        hi = art.scaler.maxs if art.scaler is not None else np.ones(len(art.feature_names))
        X = rng.uniform(lo, hi, size=(max(args.runs, 1), len(art.feature_names)))
    lat = benchmark_latency(art.predict_proba, X, runs=args.runs)
    res = energy_report(lat.mean, args.current_ma, args.voltage, latency=lat)
    _emit(res.to_dict(), args.out)
    return EXIT_OK


def _schema(args) -> FeatureSchema:
    return FeatureSchema.load(args.schema) if args.schema else FeatureSchema.default()


def cmd_extract(args) -> int:
    schema = _schema(args)
    replay = PcapReplay(args.pcap)
    n = write_feature_csv(args.out, aggregate(replay, args.idle_timeout), schema, label=args.label)
    _emit({"flows": n, "packets": replay.stats.parsed, "skipped": replay.stats.skipped,
           "truncated": replay.stats.truncated}, None)
    return EXIT_OK


def cmd_classify(args) -> int:
    art = read_artifact(args.model)
    schema = _schema(args)
    check_schema(art, schema)
    replay = PcapReplay(args.pcap, pacing=args.pacing, speed=args.speed)
    records = classify_stream(art, aggregate(replay, args.idle_timeout), schema)
    if args.out:
        with open(args.out, "w") as fh:
            write_ndjson(records, fh)
    else:
        write_ndjson(records, sys.stdout)
    return EXIT_OK


# --- parser -----------------------------------------------------------------------


def _data_flags(p, required=True):
    p.add_argument("--data", required=required, help="CSV with feature columns and a label column")
    p.add_argument("--label-column", default="label")
    p.add_argument("--task", choices=("15class", "6class", "2class"), default="15class",
                   help="label granularity; 6class/2class use the bundled Edge-IIoTset mapping")
    p.add_argument("--mapping", help="JSON file mapping original labels to task labels")


def _budget_flags(p):
    p.add_argument("--budget-flash-kb", type=float, default=300.0)
    p.add_argument("--budget-ram-kb", type=float, default=50.0)
    p.add_argument("--budget-ops", type=float, default=1.5e6)


def _cnn_train_flags(p):
    p.add_argument("--max-epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=2048)
    p.add_argument("--initial-lr", type=float, default=0.008)


def _command(sub, name, help):
    # --config is accepted after the subcommand name as well as before it
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    return sub.add_parser(name, help=help, parents=[common])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="edgeids", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file of default flag values (flags override it)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = _command(sub, "preprocess", help="clean, relabel and min-max scale a CSV")
    _data_flags(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_preprocess)

    for name, func, helptext in (("gridsearch", cmd_gridsearch, "budgeted tree grid search"),
                                 ("nas", cmd_nas, "hardware-aware evolutionary CNN search")):
        p = _command(sub, name, help=helptext)
        _data_flags(p)
        _budget_flags(p)
        p.add_argument("--out-dir", required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--holdout", type=float, default=0.2)
        if name == "gridsearch":
            p.add_argument("--family", choices=sorted(FAMILIES), default="leafwise")
        else:
            p.add_argument("--generations", type=int, default=100)
            p.add_argument("--children", type=int, default=15)
            p.add_argument("--initial-population", type=int, default=10)
            _cnn_train_flags(p)
        p.set_defaults(func=func)

    p = _command(sub, "train", help="train one model from a JSON descriptor")
    _data_flags(p)
    p.add_argument("--descriptor", required=True)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--holdout", type=float, default=0.2, help="CNN early-stopping split")
    _cnn_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = _command(sub, "eval", help="stratified k-fold cross-validation report")
    _data_flags(p)
    p.add_argument("--model", help="take the descriptor from this model file")
    p.add_argument("--descriptor")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--holdout", type=float, default=0.2)
    p.add_argument("--out")
    _cnn_train_flags(p)
    p.set_defaults(func=cmd_eval)

    p = _command(sub, "profile", help="flash/RAM/compute estimate and budget verdict")
    p.add_argument("--model")
    p.add_argument("--descriptor")
    p.add_argument("--out")
    _budget_flags(p)
    p.set_defaults(func=cmd_profile)

    p = _command(sub, "bench", help="batch-1 latency and energy per prediction")
    p.add_argument("--model", required=True)
    p.add_argument("--data", help="CSV of inputs (default: uniform draws in the scaler range)")
    p.add_argument("--label-column", default="label")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--current-ma", type=float, required=True,
                   help="measured current above idle during inference")
    p.add_argument("--voltage", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    for name, func, helptext in (("extract", cmd_extract, "pcap to flow feature CSV"),
                                 ("classify", cmd_classify, "classify flows replayed from a pcap")):
        p = _command(sub, name, help=helptext)
        p.add_argument("--pcap", required=True)
        p.add_argument("--schema", help="JSON feature schema (default: built-in 24 features)")
        p.add_argument("--idle-timeout", type=float, default=60.0)
        if name == "extract":
            p.add_argument("--out", required=True)
            p.add_argument("--label", default="unknown")
        else:
            p.add_argument("--model", required=True)
            p.add_argument("--out")
            p.add_argument("--pacing", action="store_true")
            p.add_argument("--speed", type=float, default=1.0)
        p.set_defaults(func=func)
    return parser


def _prescan(argv, commands):
    """Find ``--config`` and the subcommand without enforcing required flags."""
    config, command = None, None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            config = argv[i + 1]
        elif tok.startswith("--config="):
            config = tok.split("=", 1)[1]
        elif command is None and tok in commands:
            command = tok
    return config, command


def parse_args(argv=None) -> argparse.Namespace:
    """Parse flags; a ``--config`` JSON supplies defaults that explicit flags override."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    choices = parser._subparsers._group_actions[0].choices
    config, command = _prescan(argv, choices)
    if config and command:
        try:
            cfg = json.loads(Path(config).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        sub = choices[command]
        known = {a.dest for a in sub._actions} | CONFIG_ONLY_KEYS
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {unknown}")
        for a in sub._actions:
            if a.dest in cfg:
                a.required = False
        sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def _setup_logging():
    try:
        level = int(os.environ.get(VERBOSITY_ENV, "0"))
    except ValueError:
        level = 0
    logging.basicConfig(
        level={0: logging.WARNING, 1: logging.INFO}.get(level, logging.DEBUG),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv=None) -> int:
    _setup_logging()
    try:
        args = parse_args(argv)
        for key in CONFIG_ONLY_KEYS:
            if not hasattr(args, key):
                setattr(args, key, None)
        return args.func(args)
    except UsageError as exc:
        print(f"edgeids: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoFeasibleCandidate as exc:
        print(f"edgeids: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except FileNotFoundError as exc:
        print(f"edgeids: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DataError, SchemaError, SchemaMismatchError, ArtifactError, PcapFormatError,
            GeometryError, TrainingError, ValueError, KeyError) as exc:
        print(f"edgeids: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"edgeids: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
