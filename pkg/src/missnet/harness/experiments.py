"""End-to-end pipelines: XOR learning curves, tabular benchmark and multimodal fusion."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..bundled import CLASSIFICATION, REGRESSION, load_source
from ..corrupt import MissingSpec, augment_modalities, corrupt, rank_features_mi, round_half_up
from ..data import (Dataset, MaskedMatrix, ModalDataset, encode, modal_from_dataset, rebalance,
                    rng_for, simulate_multimodal, simulate_xor, split_kfold, standardize)
from ..errors import ExperimentError, MissnetError, TooFewRowsError
from ..impute import apply_imputer, fit_imputer
from ..metrics import auc, smse
from ..nn import Network, OptimizerConfig, TrainConfig, build_network, train
from .config import ExperimentConfig, is_imputer, method_name, repetition_seed
from .results import ResultTable, Trajectory

log = logging.getLogger("missnet.harness")

AUC_FLOOR = 0.6
SMSE_CEILING = 1.0
BENCHMARK_FRACTIONS = (0.1, 0.25, 0.5, 0.9)


def _optimizer(cfg: ExperimentConfig) -> OptimizerConfig:
    return OptimizerConfig(cfg.optimizer, cfg.lr)


def _repetitions(cfg: ExperimentConfig, repetitions) -> list[tuple[int, int]]:
    reps = range(cfg.repetitions) if repetitions is None else repetitions
    return [(int(r), repetition_seed(cfg.seed, r)) for r in reps]


def imputer_for(method: str, has_categorical: bool = False) -> str:
    """KNN falls back to k=1 when one-hot blocks are present, so filled blocks stay one-hot."""
    if method_name(method) == "knn" and ":" not in method and has_categorical:
        return "knn:1"
    return method


def prepare_inputs(method: str, train: MaskedMatrix, tests=(), cols=None, *,
                   has_categorical: bool = False, scale: bool = True):
    """Apply a method's preprocessing to a train matrix and any number of test matrices.

    Imputer methods are fitted on ``train`` and fill every matrix; network
    methods keep the masks. With ``scale`` the listed columns are then
    standardized on observed train cells.
    """
    mats = [train, *tests]
    if is_imputer(method):
        imp = fit_imputer(imputer_for(method, has_categorical), train)
        mats = [MaskedMatrix.complete(apply_imputer(imp, m)) for m in mats]
    if scale:
        mats, _ = standardize(mats[0], mats[1:], cols)
    return mats


def _annotate(fn, repetition, seed):
    try:
        return fn()
    except MissnetError as exc:
        raise ExperimentError(str(exc), repetition, seed) from exc


# --------------------------------------------------------------------------
# XOR
# --------------------------------------------------------------------------

def xor_spec(mechanism: str, fraction: float, seed: int) -> MissingSpec:
    """The first feature loses values; MAR conditions on the second."""
    return MissingSpec(mechanism, fraction, 0, 1 if mechanism == "mar" else None, seed)


def run_xor_experiment(cfg: ExperimentConfig, repetitions=None) -> ResultTable:
    """Learning curves on the noisy XOR problem.

    Per repetition: simulate, corrupt the whole sample, split it 50/50,
    train the ``xor`` preset per method and record AUC after every epoch
    on the clean and on the corrupted test half. A ``full`` model trained
    on clean data gives the reference for ``train_bias``.
    """
    table = ResultTable()
    for r, seed in _repetitions(cfg, repetitions):
        _annotate(lambda: _xor_repetition(cfg, r, seed, table), r, seed)
    return table


def _xor_repetition(cfg, r, seed, table):
    ds = simulate_xor(cfg.n, cfg.noise_var, seed)
    tr, te = split_kfold(ds.n, 2, seed).folds[0]
    y_tr, y_te = ds.target[tr], ds.target[te]
    X = ds.features
    opt = _optimizer(cfg)
    tcfg = TrainConfig(cfg.epochs, cfg.batch_size, seed)

    def fit(method, X_train, evals, mechanism, fraction):
        net = build_network({"preset": "xor", "p": X.p, "method": method_name(method)})
        base = dict(experiment="xor", dataset="xor", mechanism=mechanism, fraction=fraction,
                    method=method, repetition=r, seed=seed)
        final = {}

        def on_epoch(epoch, model):
            for name, Xe in evals.items():
                final[name] = auc(model.predict_score(Xe), y_te)
                table.add(**base, metric=f"{name}@{epoch + 1}", value=final[name])

        train(net, X_train, y_tr, opt, tcfg, on_epoch)
        for name, v in final.items():
            table.add(**base, metric=name, value=v)
        return final, base

    full, _ = fit("full", X.take(tr), {"auc_clean": X.take(te)}, "none", 0.0)
    for mech in cfg.mechanisms:
        for f in cfg.fractions:
            Xc, _ = corrupt(X, xor_spec(mech, f, seed))
            for method in cfg.methods:
                Xtr, Xclean, Xcor = prepare_inputs(method, Xc.take(tr), [X.take(te), Xc.take(te)],
                                                   scale=False)
                final, base = fit(method, Xtr, {"auc_clean": Xclean, "auc_corrupted": Xcor}, mech, f)
                table.add(**base, metric="train_bias", value=full["auc_clean"] - final["auc_clean"])
                table.add(**base, metric="test_bias", value=final["auc_clean"] - final["auc_corrupted"])


# --------------------------------------------------------------------------
# benchmark
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class _Prepared:
    name: str
    task: str
    X: MaskedMatrix
    y: np.ndarray
    cont: list[int]
    has_categorical: bool
    ranking: list[int]


def _prepare_dataset(ds: Dataset) -> _Prepared:
    X, emap = encode(ds)
    keep = ~X.mask.any(axis=1)
    if not keep.all():
        log.info("%s: dropping %d incomplete rows before the benchmark", ds.name, int((~keep).sum()))
        X, y = X.take(np.flatnonzero(keep)), ds.target[keep]
    else:
        y = ds.target
    cont = emap.continuous_columns
    ranking = [c for c, _ in rank_features_mi(X, y, cols=cont)] if cont else []
    return _Prepared(ds.name, ds.task, X, y, cont, emap.has_categorical, ranking)


def benchmark_spec(d: _Prepared, mechanism: str, fraction: float, seed: int) -> MissingSpec:
    """Every mechanism removes values of the most informative continuous feature;
    MAR picks the rows from a window of the second most informative one."""
    if not d.ranking:
        raise MissnetError(f"{d.name}: no continuous feature to corrupt")
    if mechanism == "mar":
        if len(d.ranking) < 2:
            raise MissnetError(f"{d.name}: MAR needs two continuous features")
        return MissingSpec("mar", fraction, d.ranking[0], d.ranking[1], seed)
    return MissingSpec(mechanism, fraction, d.ranking[0], None, seed)


def _fit_score(d: _Prepared, method: str, X: MaskedMatrix, train_idx, test_idx, cfg, seed) -> float:
    Xtr, Xte = prepare_inputs(method, X.take(train_idx), [X.take(test_idx)], d.cont,
                              has_categorical=d.has_categorical)
    y_tr, y_te = d.y[train_idx], d.y[test_idx]
    if d.task == "regression":
        mu, sd = y_tr.mean(), y_tr.std() or 1.0
        y_tr, y_te = (y_tr - mu) / sd, (y_te - mu) / sd
    net = build_network({"preset": "benchmark", "p": X.p, "task": d.task,
                         "method": method_name(method)})
    train(net, Xtr, y_tr, _optimizer(cfg), TrainConfig(cfg.epochs, cfg.batch_size, seed))
    pred = net.predict_score(Xte)
    return smse(pred, y_te) if d.task == "regression" else auc(pred, y_te)


def _baseline_ok(d: _Prepared, scores) -> tuple[bool, str]:
    m = float(np.mean(scores))
    if d.task == "regression" and m > SMSE_CEILING:
        return False, f"baseline SMSE {m:.3f} > {SMSE_CEILING}"
    if d.task == "classification" and m < AUC_FLOOR:
        return False, f"baseline AUC {m:.3f} < {AUC_FLOOR}"
    return True, ""


def run_benchmark(cfg: ExperimentConfig, datasets=None, repetitions=None) -> ResultTable:
    """Cross-validated drop relative to the full model on tabular datasets.

    ``datasets`` may hold :class:`Dataset` objects; otherwise ``cfg.datasets``
    (bundled names or CSV paths) is used, defaulting to every bundled
    classification and regression table. Per fold the pipeline is corrupt,
    impute (imputer methods), standardize, train, evaluate. Rows carry the
    raw metric (``auc`` / ``smse``) and the change against the full model
    (``auc_drop`` / ``smse_increase``). A dataset whose full model misses
    the sanity threshold on repetition 0 is excluded and logged.
    """
    if datasets is None:
        datasets = [load_source(s) for s in (cfg.datasets or CLASSIFICATION + REGRESSION)]
    table = ResultTable()
    for ds in datasets:
        d = _prepare_dataset(ds)
        reps = _repetitions(cfg, repetitions)
        full_cache = {}

        def full_scores(seed):
            if seed not in full_cache:
                folds = split_kfold(len(d.y), cfg.folds, seed)
                full_cache[seed] = [_fit_score(d, "full", d.X, a, b, cfg, seed) for a, b in folds]
            return full_cache[seed]

        seed0 = repetition_seed(cfg.seed, 0)
        ok, reason = _annotate(lambda: _baseline_ok(d, full_scores(seed0)), 0, seed0)
        if not ok:
            log.warning("excluding dataset %s: %s", d.name, reason)
            table.add(experiment="benchmark", dataset=d.name, mechanism="none", fraction=0.0,
                      method="full", repetition=0, metric="excluded", value=1.0, seed=seed0)
            continue
        for r, seed in reps:
            _annotate(lambda: _benchmark_repetition(cfg, d, r, seed, full_scores(seed), table), r, seed)
    return table


def _benchmark_repetition(cfg, d: _Prepared, r, seed, full, table):
    metric = "smse" if d.task == "regression" else "auc"
    delta = "smse_increase" if d.task == "regression" else "auc_drop"
    folds = split_kfold(len(d.y), cfg.folds, seed)
    base = dict(experiment="benchmark", dataset=d.name, repetition=r, seed=seed)
    for k, v in enumerate(full):
        table.add(**base, mechanism="none", fraction=0.0, method="full", fold=k, metric=metric, value=v)
    for mech in cfg.mechanisms:
        for f in cfg.fractions:
            try:
                Xc, _ = corrupt(d.X, benchmark_spec(d, mech, f, seed))
            except (TooFewRowsError, MissnetError) as exc:
                log.warning("%s %s f=%s skipped: %s", d.name, mech, f, exc)
                continue
            for method in cfg.methods:
                for k, (a, b) in enumerate(folds):
                    v = _fit_score(d, method, Xc, a, b, cfg, seed)
                    change = v - full[k] if d.task == "regression" else full[k] - v
                    cell = dict(base, mechanism=mech, fraction=f, method=method, fold=k)
                    table.add(**cell, metric=metric, value=v)
                    table.add(**cell, metric=delta, value=change)


def summarize_benchmark(table: ResultTable, metric: str = "auc_drop") -> dict[tuple, float]:
    """``(mechanism, fraction, method) -> mean over repetitions of the median over
    datasets`` of the fold-averaged ``metric``."""
    cells: dict[tuple, dict[int, dict[str, list[float]]]] = {}
    for row in table.rows:
        if row.metric != metric:
            continue
        key = (row.mechanism, row.fraction, row.method)
        cells.setdefault(key, {}).setdefault(row.repetition, {}).setdefault(row.dataset, []).append(row.value)
    out = {}
    for key, reps in sorted(cells.items()):
        medians = [float(np.median([np.mean(v) for v in by_ds.values()])) for _, by_ds in sorted(reps.items())]
        out[key] = float(np.mean(medians))
    return out


# --------------------------------------------------------------------------
# multimodal fusion
# --------------------------------------------------------------------------

def representation_units(width: int) -> int:
    return 2 if width == 1 else 5 if width < 12 else 10


@dataclass
class FusionResult:
    nets: dict[str, Network]
    trajectories: list[Trajectory]
    table: ResultTable
    test: ModalDataset
    orders: list[tuple[str, ...]]


def fusion_data(cfg: ExperimentConfig, seed: int) -> tuple[ModalDataset, ModalDataset, str]:
    """``(train, test, name)``: complete test rows, incomplete training rows.

    A CSV source uses its complete rows (at most ``n_test``) as the test set.
    The synthetic generator draws ``n + n_test`` rows and clears the masks of
    the last ``n_test``.
    """
    if cfg.datasets:
        md = modal_from_dataset(load_source(cfg.datasets[0]))
        complete = np.flatnonzero(~md.combined().mask.any(axis=1))
        if complete.size < 2:
            raise MissnetError("fusion needs complete rows for the test set")
        test = complete[:cfg.n_test]
        train = np.setdiff1d(np.arange(md.n), test)
        return md.take(train), md.take(test), str(cfg.datasets[0])
    sep = cfg.separation if len(cfg.separation) == len(cfg.sizes) else cfg.separation[0]
    md = simulate_multimodal(cfg.sizes, cfg.n + cfg.n_test, sep, seed,
                             positive_rate=cfg.positive_rate,
                             cell_missing_rate=cfg.cell_missing_rate,
                             modality_missing_rate=cfg.modality_missing_rate)
    train = md.take(np.arange(cfg.n))
    test = md.take(np.arange(cfg.n, cfg.n + cfg.n_test))
    test = ModalDataset(tuple((k, v.replace(mask=np.zeros_like(v.mask))) for k, v in test.modalities),
                        test.target)
    return train, test, "synthetic_multimodal"


def _impute_modal(imp, md: ModalDataset) -> ModalDataset:
    return md.with_combined(MaskedMatrix.complete(apply_imputer(imp, md.combined())))


def _standardize_modal(train: ModalDataset, others):
    mats, _ = standardize(train.combined(), [o.combined() for o in others])
    return [m_.with_combined(x) for m_, x in zip([train, *others], mats)]


def run_fusion_experiment(cfg: ExperimentConfig, repetitions=None) -> FusionResult:
    """Train imputer-based, promissing and m_promissing fusion nets and record
    prediction trajectories as modalities are removed in random order.

    Training rows are rebalanced; the promissing nets see every subset of
    up to ``M - 1`` removed modalities. All three nets share the removal
    orders. The imputer net has no prediction once every modality is gone.
    """
    r, seed = _repetitions(cfg, repetitions)[0]
    return _annotate(lambda: _fusion(cfg, r, seed), r, seed)


def _fusion(cfg, r, seed) -> FusionResult:
    train_md, test_md, name = fusion_data(cfg, seed)
    if train_md.M < 3:
        raise MissnetError("fusion needs at least three modalities")
    balanced = train_md.take(rebalance(train_md.target, np.arange(train_md.n), seed))
    balanced, test_md = _standardize_modal(balanced, [test_md])
    M, names = balanced.M, balanced.names
    mods = [(k, w, representation_units(w)) for k, w in zip(names, balanced.sizes)]
    opt, tcfg = _optimizer(cfg), TrainConfig(cfg.epochs, cfg.batch_size, seed)

    def make(method):
        return build_network({"preset": "fusion", "modalities": mods, "method": method,
                              "head_weight": cfg.head_weight, "representation": cfg.representation})

    augmented = augment_modalities(balanced, M - 1, seed)
    imputer_method = method_name(cfg.imputer)
    imp = fit_imputer(cfg.imputer, balanced.combined())
    nets = {imputer_method: make(imputer_method)}
    # the imputer net trains on the un-augmented rows; stretch its epochs so it
    # takes as many optimizer steps as the nets trained on augmented data
    stretch = math.ceil(augmented.n / cfg.batch_size) / math.ceil(balanced.n / cfg.batch_size)
    icfg = TrainConfig(round(cfg.epochs * stretch), cfg.batch_size, seed)
    train(nets[imputer_method], _impute_modal(imp, balanced), balanced.target, opt, icfg)
    for method in ("promissing", "m_promissing"):
        nets[method] = make(method)
        train(nets[method], augmented, augmented.target, opt, tcfg)

    rng = rng_for(seed, "removal_order")
    orders = [tuple(names[i] for i in rng.permutation(M)) for _ in range(cfg.trajectory_repetitions)]
    table = ResultTable()
    base = dict(experiment="fusion", dataset=name, mechanism="modality",
                fraction=cfg.modality_missing_rate, repetition=r, seed=seed)
    probs = {}
    for method, net in nets.items():
        per_order = np.full((len(orders), M + 1, test_md.n), np.nan)
        for t, order in enumerate(orders):
            for step in range(M + 1):
                masked = test_md.mask_modalities(order[:step])
                if method == imputer_method:
                    if step == M:
                        continue
                    masked = _impute_modal(imp, masked)
                per_order[t, step] = net.predict_score(masked)
        probs[method] = per_order
        table.add(**base, method=method, metric="auc", value=auc(per_order[0, 0], test_md.target))
        # the imputer net has no prediction once every modality is gone
        for step in range(M if method == imputer_method else M + 1):
            table.add(**base, method=method, metric=f"mean_prob@{step}",
                      value=float(np.mean(per_order[:, step])))
        if method != imputer_method:
            last = per_order[:, M]
            table.add(**base, method=method, metric="all_missing_prob", value=float(last[0, 0]))
            table.add(**base, method=method, metric="all_missing_spread", value=float(np.ptp(last)))
    trajectories = [Trajectory(method, t, i, orders[t], probs[method][t, :, i])
                    for method in nets for t in range(len(orders)) for i in range(test_md.n)]
    return FusionResult(nets, trajectories, table, test_md, orders)
