"""Command line entry point: ``missnet <command> [options]``.

Exit status is 0 on success, 1 on a usage error and 2 when the command
itself fails. Output files default to ``$MISSNET_OUT_DIR`` (or the working
directory) and are byte-identical across runs with the same seed.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from ..bundled import load_source
from ..corrupt import CorruptionReport, MissingSpec, corrupt
from ..data import (Column, Dataset, MaskedMatrix, dataset_from_modal, decode, encode,
                    format_schema, modal_from_dataset, schema_of, simulate_multimodal,
                    simulate_xor, write_csv)
from ..errors import MissnetError
from ..impute import apply_imputer, fit_imputer
from ..nn import (OptimizerConfig, TrainConfig, build_network, load_network, neutralizer_tables,
                  save_network, train, write_neutralizers)
from .config import ExperimentConfig, coerce, default_out_dir, parse_config_text
from .experiments import (representation_units, run_benchmark, run_fusion_experiment, run_xor_experiment,
                          summarize_benchmark)
from .explain import counterfactual_interpret, write_attributions
from .results import learning_curves, write_curves, write_trajectories

log = logging.getLogger("missnet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Raise instead of exiting so usage errors map to status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _out(path: str | None, default: str) -> Path:
    p = Path(path) if path else default_out_dir() / default
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _beside(path: str | None, main: Path, suffix: str) -> Path:
    """Explicit path, or a sibling of ``main`` named ``<stem><suffix>``."""
    return _out(path, "") if path else main.with_name(main.stem + suffix)


def _write_dataset(path: Path, ds: Dataset) -> None:
    write_csv(path, ds)
    path.with_suffix(".schema").write_text(format_schema(schema_of(ds)), encoding="utf-8")


def encoded_dataset(ds: Dataset) -> Dataset:
    """One-hot/0-1 encoded copy; one-hot columns are named ``<column>=<category>``."""
    X, emap = encode(ds)
    cols = []
    for b in emap.blocks:
        name = ds.columns[b.source].name
        if b.kind == "categorical":
            cols += [Column(f"{name}={c}") for c in b.categories]
        else:
            cols.append(Column(name))
    return Dataset(X, ds.target, tuple(cols), ds.name, ds.task)


def _network_inputs(net, ds: Dataset):
    enc = encoded_dataset(ds)
    if len(net.input_names) == 1:
        return enc.features
    return modal_from_dataset(enc).as_inputs()


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_simulate(a) -> None:
    if a.kind == "xor":
        ds = simulate_xor(a.n, a.noise_var, a.seed)
    else:
        sizes = [int(s) for s in a.sizes.split(",")]
        sep = [float(s) for s in a.separation.split(",")]
        md = simulate_multimodal(sizes, a.n, sep if len(sep) == len(sizes) else sep[0], a.seed,
                                 positive_rate=a.positive_rate, cell_missing_rate=a.cell_missing_rate,
                                 modality_missing_rate=a.modality_missing_rate)
        ds = dataset_from_modal(md, "multimodal")
    _write_dataset(_out(a.out, f"{a.kind}.csv"), ds)


def cmd_corrupt(a) -> None:
    ds = load_source(a.input)
    cond = a.cond_feature if a.cond_feature is not None else (1 if a.mechanism == "mar" else None)
    X, report = corrupt(ds.features, MissingSpec(a.mechanism, a.fraction, a.feature, cond, a.seed))
    out = _out(a.out, f"{Path(a.input).stem}_{a.mechanism}.csv")
    _write_dataset(out, Dataset(X, ds.target, ds.columns, ds.name, ds.task))
    if a.report:
        with open(a.report, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CorruptionReport.CSV_HEADER)
            w.writerow(report.csv_row())


def cmd_impute(a) -> None:
    ds = load_source(a.input)
    X, emap = encode(ds)
    fit_on = encode(load_source(a.fit_on))[0] if a.fit_on else X
    imp = fit_imputer(a.imputer, fit_on)
    filled = decode(MaskedMatrix.complete(apply_imputer(imp, X)), emap)
    out = _out(a.out, f"{Path(a.input).stem}_imputed.csv")
    _write_dataset(out, Dataset(filled, ds.target, ds.columns, ds.name, ds.task))


def cmd_train(a) -> None:
    ds = load_source(a.input)
    enc = encoded_dataset(ds)
    spec = {"preset": a.preset, "method": a.method}
    if a.preset == "fusion":
        md = modal_from_dataset(enc)
        spec["modalities"] = [(k, w, representation_units(w)) for k, w in zip(md.names, md.sizes)]
    else:
        spec["p"] = enc.features.p
        if a.preset == "benchmark":
            spec["task"] = ds.task
    net = build_network(spec)
    opt = OptimizerConfig(a.optimizer, a.lr)
    _, hist = train(net, _network_inputs(net, ds), ds.target, opt,
                    TrainConfig(a.epochs, a.batch_size, a.seed))
    save_network(net, _out(a.model, "model.txt"))
    log.info("final training loss %.6f", hist.loss[-1] if hist.loss else float("nan"))


def cmd_predict(a) -> None:
    net = load_network(a.model)
    ds = load_source(a.input)
    scores = net.predict_score(_network_inputs(net, ds))
    with open(_out(a.out, "predictions.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "score"])
        for i, s in enumerate(scores):
            w.writerow([i, repr(float(s))])


def _experiment_config(a, experiment: str) -> ExperimentConfig:
    keys = ("datasets", "mechanisms", "fractions", "methods", "repetitions", "folds", "seed",
            "epochs", "batch_size", "optimizer", "lr", "n", "sizes", "separation", "imputer",
            "trajectory_repetitions", "n_test", "noise_var", "positive_rate",
            "cell_missing_rate", "modality_missing_rate", "representation")
    flags = {k: getattr(a, k) for k in keys if getattr(a, k, None) is not None}
    if a.config:
        kv = parse_config_text(Path(a.config).read_text(encoding="utf-8"))
        kv.pop("experiment", None)
        kv.update(flags)
    else:
        kv = flags
    return ExperimentConfig(experiment=experiment, **coerce(kv))


def cmd_xor(a) -> None:
    cfg = _experiment_config(a, "xor")
    table = run_xor_experiment(cfg, a.only)
    out = _out(a.out, "xor_results.csv")
    table.to_csv(out)
    write_curves(_beside(a.curves, out, "_curves.csv"), learning_curves(table))


def cmd_bench(a) -> None:
    cfg = _experiment_config(a, "benchmark")
    table = run_benchmark(cfg, repetitions=a.only)
    out = _out(a.out, "benchmark_results.csv")
    table.to_csv(out)
    with open(_beside(a.summary, out, "_summary.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "mechanism", "fraction", "method", "value"])
        for metric in ("auc_drop", "smse_increase"):
            for (mech, frac, method), v in summarize_benchmark(table, metric).items():
                w.writerow([metric, mech, repr(frac), method, repr(v)])


def cmd_fusion(a) -> None:
    cfg = _experiment_config(a, "fusion")
    res = run_fusion_experiment(cfg, a.only)
    out = _out(a.out, "fusion_results.csv")
    res.table.to_csv(out)
    write_trajectories(_beside(a.trajectories, out, "_trajectories.csv"), res.trajectories)
    if a.model_dir:
        d = Path(a.model_dir)
        d.mkdir(parents=True, exist_ok=True)
        for name, net in res.nets.items():
            save_network(net, d / f"fusion_{name}.txt")


def _read_row(path, net) -> dict[str, MaskedMatrix]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        row = next(reader)
    vals = np.array([np.nan if t.strip().lower() in ("", "nan") else float(t) for t in row])
    keep = [i for i, h in enumerate(header) if h != "y"]
    names = [header[i] for i in keep]
    vals = vals[keep]
    if len(net.input_names) == 1:
        return {net.input_names[0]: MaskedMatrix.from_nan(vals[None, :])}
    out = {}
    for inp in net.input_names:
        idx = [i for i, h in enumerate(names) if h.split(".", 1)[0] == inp]
        out[inp] = MaskedMatrix.from_nan(vals[idx][None, :])
    return out


def cmd_explain(a) -> None:
    net = load_network(a.model)
    attributions = counterfactual_interpret(net, _read_row(a.row, net), a.unit)
    write_attributions(_out(a.out, "attributions.csv"), attributions)


def cmd_export_neutralizers(a) -> None:
    net = load_network(a.model)
    write_neutralizers(_out(a.out, "neutralizers.csv"), neutralizer_tables(net, a.epsilon))


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _experiment_flags(p) -> None:
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--datasets", "--dataset", dest="datasets", help="comma list of bundled names or CSV paths")
    p.add_argument("--mechanism", "--mechanisms", dest="mechanisms", help="comma list of mcar,mar,mnar")
    p.add_argument("--fraction", "--fractions", dest="fractions", help="comma list of fractions")
    p.add_argument("--method", "--methods", dest="methods", help="comma list of methods")
    p.add_argument("--reps", "--repetitions", dest="repetitions", type=int)
    p.add_argument("--only", type=lambda s: [int(x) for x in s.split(",")],
                   help="run only these repetition indices")
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--optimizer", choices=("sgd", "adam"))
    p.add_argument("--lr", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--out", help="result CSV path")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="missnet", description="Neural networks that train and predict on incomplete data.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write a synthetic dataset")
    p.add_argument("--kind", choices=("xor", "multimodal"), default="xor")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--noise-var", dest="noise_var", type=float, default=0.25)
    p.add_argument("--sizes", default="6,4,5,3,8")
    p.add_argument("--separation", default="1.0")
    p.add_argument("--positive-rate", dest="positive_rate", type=float, default=0.5)
    p.add_argument("--cell-missing-rate", dest="cell_missing_rate", type=float, default=0.0)
    p.add_argument("--modality-missing-rate", dest="modality_missing_rate", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("corrupt", help="inject MCAR/MAR/MNAR missingness into one column")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--mechanism", choices=("mcar", "mar", "mnar"), required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--feature", type=int, default=0)
    p.add_argument("--cond-feature", dest="cond_feature", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--report", help="also write the corruption report CSV here")
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("impute", help="fill missing cells")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--imputer", default="mean", help="zero | constant:c | mean | knn:k | iterative:cycles:tol")
    p.add_argument("--fit-on", dest="fit_on", help="fit on this CSV instead of the input")
    p.add_argument("--out")
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("train", help="train a preset network on a CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--preset", choices=("xor", "benchmark", "fusion"), default="benchmark")
    p.add_argument("--method", choices=("dense", "promissing", "m_promissing"), default="promissing")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=10)
    p.add_argument("--optimizer", choices=("sgd", "adam"), default="sgd")
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", help="model file to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a CSV with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("xor", help="XOR learning-curve experiment")
    _experiment_flags(p)
    p.add_argument("--noise-var", dest="noise_var", type=float)
    p.add_argument("--curves", help="plot-ready curve CSV path")
    p.set_defaults(func=cmd_xor)

    p = sub.add_parser("bench", help="tabular benchmark against the full model")
    _experiment_flags(p)
    p.add_argument("--summary", help="summary CSV path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fusion", help="multimodal fusion and removal trajectories")
    _experiment_flags(p)
    p.add_argument("--sizes")
    p.add_argument("--separation")
    p.add_argument("--imputer")
    p.add_argument("--trajectory-repetitions", dest="trajectory_repetitions", type=int)
    p.add_argument("--n-test", dest="n_test", type=int)
    p.add_argument("--positive-rate", dest="positive_rate", type=float)
    p.add_argument("--cell-missing-rate", dest="cell_missing_rate", type=float)
    p.add_argument("--modality-missing-rate", dest="modality_missing_rate", type=float)
    p.add_argument("--representation")
    p.add_argument("--trajectories", help="trajectory CSV path")
    p.add_argument("--model-dir", dest="model_dir", help="save the trained nets here")
    p.set_defaults(func=cmd_fusion)

    p = sub.add_parser("explain", help="counterfactual attributions for one row")
    p.add_argument("--model", required=True)
    p.add_argument("--row", required=True, help="CSV with a header and one data row")
    p.add_argument("--unit", choices=("modality", "feature"), default="modality")
    p.add_argument("--out")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("export-neutralizers", help="write the neutralizer matrices of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--epsilon", type=float, default=1e-8)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_neutralizers)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:   # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (MissnetError, ValueError, OSError, KeyError) as exc:
        print(f"missnet {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
