"""Experiment orchestration: train, bound, perturb, attack, report.

One repetition = split data, train plain + convexified baselines, derive the
sensitivity report, measure DP accuracy loss and membership-inference leakage
per (mechanism, epsilon), all off seeds derived from the master seed.  Every
number in the final CSV is recomputable from the per-repetition JSON
artifacts kept next to it.
"""

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels, checkpoint, sensitivity
from .attack import (
    AttackConfig,
    accuracy_loss,
    build_shadow_corpus,
    evaluate_leakage,
    train_attack_model,
)
from .data import LabeledDataset, load_dataset, make_synthetic
from .errors import InputError
from .mechanisms import MECHANISMS, PrivacyBudget, per_query_budget
from .network import LOSS_CONVEXIFIED, LOSS_PLAIN, NetworkTopology, TrainingConfig
from .predict import DpPredictionRequest, predict_batch_dp, predict_dp
from .seeding import derive_seed
from .training import train

REPORT_FILENAME = "report.csv"
REPORT_COLUMNS = [
    "row_kind",
    "mechanism",
    "epsilon",
    "loss_kind",
    "train_acc_mean",
    "train_acc_std",
    "test_acc_mean",
    "test_acc_std",
    "acc_gap_mean",
    "oaro_bound_mean",
    "leakage_mean",
    "leakage_std",
    "leakage_bound",
    "acc_loss_mean",
    "acc_loss_std",
    "n_reps",
]


@dataclass
class ExperimentConfig:
    # data source: a CSV path or a synthetic spec (exactly one)
    dataset_path: Optional[str] = None
    label_column: str = "label"
    normalize: bool = False
    synthetic: Optional[dict] = None  # classes/rows/features/separation
    # target model
    train_size: int = 500
    hidden_units: int = 128
    learning_rate: float = 0.001
    batch_size: int = 100
    epochs: int = 100
    l2_coefficient: float = 0.001
    alpha: float = 1.0
    # privacy sweep
    epsilon_grid: tuple = (0.01, 0.1, 1.0, 10.0, 100.0)
    mechanisms: tuple = ("gaussian",)
    queries_per_budget: int = 1  # grid values are totals over this many queries
    # attack
    shadow_count: int = 2
    shadow_size: Optional[int] = None  # defaults to train_size
    # run control
    repetitions: int = 1
    output_dir: str = "privout-out"
    master_seed: int = 0

    def __post_init__(self):
        if (self.dataset_path is None) == (self.synthetic is None):
            raise InputError("configure exactly one of dataset_path / synthetic")
        self.epsilon_grid = tuple(float(e) for e in self.epsilon_grid)
        self.mechanisms = tuple(self.mechanisms)
        if not self.epsilon_grid or any(e <= 0 for e in self.epsilon_grid):
            raise InputError("epsilon grid values must be positive")
        for mech in self.mechanisms:
            if mech not in MECHANISMS:
                raise InputError(f"unknown mechanism {mech!r}")
        if self.repetitions < 1:
            raise InputError("repetitions must be >= 1")
        if self.queries_per_budget < 1:
            raise InputError("queries_per_budget must be >= 1")
        if self.train_size < 2:
            raise InputError("train_size must be >= 2")

    @property
    def effective_shadow_size(self):
        return self.train_size if self.shadow_size is None else self.shadow_size

    def to_dict(self):
        payload = asdict(self)
        payload["epsilon_grid"] = list(self.epsilon_grid)
        payload["mechanisms"] = list(self.mechanisms)
        return payload

    @classmethod
    def from_dict(cls, payload):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(payload) - known
        if unknown:
            raise InputError(f"unknown experiment config keys: {sorted(unknown)}")
        return cls(**payload)


@dataclass
class ExperimentOutcome:
    rows: list
    report_path: Path
    output_dir: Path
    failed_repetitions: dict = field(default_factory=dict)


def format_cell(value):
    """Report cells: 6 decimal places for reals, empty string for missing."""
    if value is None or value == "":
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.6f}"


def theoretical_leakage_bound(epsilon, baseline_leakage):
    """min(exp(eps) - 1, measured baseline leakage)."""
    if epsilon <= 0:
        raise InputError("epsilon must be positive")
    return min(math.expm1(epsilon), baseline_leakage)


def _load_experiment_dataset(config):
    if config.dataset_path is not None:
        return load_dataset(
            config.dataset_path,
            label_column=config.label_column,
            normalize=config.normalize,
        )
    spec = dict(config.synthetic)
    spec.setdefault("seed", derive_seed(config.master_seed, "synthetic-data"))
    return make_synthetic(**spec)


def _experiment_topology(config, dataset):
    return NetworkTopology.dense(
        dataset.n_features, config.hidden_units, dataset.class_count
    )


def _training_config(config, loss_kind, seed):
    return TrainingConfig(
        learning_rate=config.learning_rate,
        batch_size=config.batch_size,
        epochs=config.epochs,
        l2_coefficient=config.l2_coefficient,
        alpha=config.alpha,
        loss_kind=loss_kind,
        seed=seed,
    )


def _dp_accuracy(model, report, budget, rng, test_set):
    batch = predict_batch_dp(test_set.features, model, report, budget, rng)
    if batch.refused_at is not None:
        raise InputError("budget sized too small for the evaluation")
    predictions = np.array([np.argmax(r.probs) for r in batch.results])
    return float(np.mean(predictions == test_set.labels))


def _dump_attack(path, result, members, non_members):
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["set", "index", "true_class", "predicted_member"])
        for set_name, dataset, decisions in (
            ("member", members, result.member_decisions),
            ("nonmember", non_members, result.nonmember_decisions),
        ):
            for i, decision in enumerate(decisions):
                writer.writerow([set_name, i, int(dataset.labels[i]), int(decision)])


def _run_repetition(dataset, config, rep, rep_dir):
    rep_dir.mkdir(parents=True, exist_ok=True)
    shadow_need = config.shadow_count * 2 * config.effective_shadow_size
    need = 2 * config.train_size + shadow_need
    if dataset.n_rows < need:
        raise InputError(
            f"dataset has {dataset.n_rows} rows; need {need} "
            f"(2x{config.train_size} target + {shadow_need} shadow pool)"
        )
    order = np.random.default_rng(
        derive_seed(config.master_seed, rep, "split")
    ).permutation(dataset.n_rows)
    train_set = dataset.subset(order[: config.train_size], name="target-train")
    test_set = dataset.subset(
        order[config.train_size : 2 * config.train_size], name="target-test"
    )
    pool = dataset.subset(order[2 * config.train_size :], name="shadow-pool")

    topology = _experiment_topology(config, dataset)
    baselines = {}
    for loss_kind in (LOSS_PLAIN, LOSS_CONVEXIFIED):
        model = train(
            train_set,
            topology,
            _training_config(
                config, loss_kind, derive_seed(config.master_seed, rep, "train", loss_kind)
            ),
            test_set=test_set,
        )
        checkpoint.save_model(model, rep_dir / f"baseline_{loss_kind}.model.json")
        baselines[loss_kind] = model

    defended = baselines[LOSS_CONVEXIFIED]
    sens = sensitivity.report(defended)
    sensitivity.save_report(
        sens, rep_dir / "sensitivity.json", rep_dir / "sensitivity.txt"
    )

    attack_config = AttackConfig(
        shadow_count=config.shadow_count,
        shadow_topology=topology,
        shadow_training=defended.config,
        shadow_size=config.effective_shadow_size,
        seed=derive_seed(config.master_seed, rep, "attack"),
    )
    corpus = build_shadow_corpus(pool, attack_config)
    attack_models = train_attack_model(corpus, attack_config)

    baseline_attack = evaluate_leakage(
        lambda x: defended.predict_proba(x)[0], train_set, test_set, attack_models
    )
    _dump_attack(rep_dir / "attack_baseline.csv", baseline_attack, train_set, test_set)

    dp_cells = []
    for mechanism in config.mechanisms:
        for epsilon in config.epsilon_grid:
            eps_query = per_query_budget(epsilon, config.queries_per_budget, mechanism)
            eval_queries = test_set.n_rows + train_set.n_rows + test_set.n_rows
            budget = PrivacyBudget.from_per_query(
                eps_query,
                eval_queries,
                dataset.class_count,
                mechanism,
                train_size=train_set.n_rows,
            )
            rng = np.random.default_rng(
                derive_seed(config.master_seed, rep, "dp", mechanism, epsilon)
            )
            dp_acc = _dp_accuracy(defended, sens, budget, rng, test_set)

            def dp_query(x):
                return predict_dp(
                    DpPredictionRequest(x, defended, sens, budget, rng)
                ).probs

            dp_attack = evaluate_leakage(dp_query, train_set, test_set, attack_models)
            _dump_attack(
                rep_dir / f"attack_dp_{mechanism}_{epsilon:g}.csv",
                dp_attack,
                train_set,
                test_set,
            )
            dp_cells.append(
                {
                    "mechanism": mechanism,
                    "epsilon": epsilon,
                    "epsilon_per_query": eps_query,
                    "test_accuracy": dp_acc,
                    "accuracy_loss": accuracy_loss(
                        dp_acc, defended.report.test_accuracy
                    ),
                    "leakage": dp_attack.privacy_leakage,
                    "tpr": dp_attack.true_positive_rate,
                    "fpr": dp_attack.false_positive_rate,
                }
            )

    result = {
        "repetition": rep,
        "baselines": {
            kind: {
                "train_accuracy": model.report.train_accuracy,
                "test_accuracy": model.report.test_accuracy,
                "accuracy_gap": model.report.train_accuracy
                - model.report.test_accuracy,
            }
            for kind, model in baselines.items()
        },
        "sensitivity": asdict(sens),
        "baseline_leakage": baseline_attack.privacy_leakage,
        "baseline_tpr": baseline_attack.true_positive_rate,
        "baseline_fpr": baseline_attack.false_positive_rate,
        "dp": dp_cells,
        "error": None,
    }
    (rep_dir / "rep_result.json").write_text(json.dumps(result) + "\n")
    return result


def _mean(values):
    return float(np.mean(values)) if values else None


def _std(values):
    return float(np.std(values)) if values else None


def _clamp_unit(value):
    if value is None:
        return None
    return min(max(value, 0.0), 1.0)


def build_report_rows(results, config):
    """Aggregate per-repetition artifacts into the summary rows.

    Leakage columns are clamped into [0, 1] here (the metric's stated range);
    the per-repetition JSON keeps raw values.
    """
    done = [r for r in results if r.get("error") is None]
    rows = []
    for loss_kind in (LOSS_PLAIN, LOSS_CONVEXIFIED):
        accs = [r["baselines"][loss_kind] for r in done]
        row = {
            "row_kind": "baseline",
            "loss_kind": loss_kind,
            "train_acc_mean": _mean([a["train_accuracy"] for a in accs]),
            "train_acc_std": _std([a["train_accuracy"] for a in accs]),
            "test_acc_mean": _mean([a["test_accuracy"] for a in accs]),
            "test_acc_std": _std([a["test_accuracy"] for a in accs]),
            "acc_gap_mean": _mean([a["accuracy_gap"] for a in accs]),
            "n_reps": len(done),
        }
        if loss_kind == LOSS_CONVEXIFIED:
            row["oaro_bound_mean"] = _mean(
                [r["sensitivity"]["oaro_bound"] for r in done]
            )
            row["leakage_mean"] = _clamp_unit(
                _mean([r["baseline_leakage"] for r in done])
            )
            row["leakage_std"] = _std([r["baseline_leakage"] for r in done])
        rows.append(row)

    baseline_leakage = rows[-1].get("leakage_mean")
    for mechanism in config.mechanisms:
        for epsilon in config.epsilon_grid:
            cells = [
                c
                for r in done
                for c in r["dp"]
                if c["mechanism"] == mechanism and c["epsilon"] == epsilon
            ]
            rows.append(
                {
                    "row_kind": "dp",
                    "mechanism": mechanism,
                    "epsilon": epsilon,
                    "acc_loss_mean": _mean([c["accuracy_loss"] for c in cells]),
                    "acc_loss_std": _std([c["accuracy_loss"] for c in cells]),
                    "leakage_mean": _clamp_unit(_mean([c["leakage"] for c in cells])),
                    "leakage_std": _std([c["leakage"] for c in cells]),
                    "leakage_bound": (
                        theoretical_leakage_bound(epsilon, baseline_leakage)
                        if cells and baseline_leakage is not None
                        else None
                    ),
                    "n_reps": len(cells),
                }
            )
    return rows


def write_report(rows, path):
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow([format_cell(row.get(col)) for col in REPORT_COLUMNS])


def run_experiment(config):
    """Run (or resume) all repetitions and write the summary report."""
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    config_path = outdir / "config.json"
    payload = config.to_dict()
    if config_path.exists():
        if json.loads(config_path.read_text()) != payload:
            raise InputError(
                f"{outdir} already holds a different experiment configuration"
            )
    else:
        config_path.write_text(json.dumps(payload) + "\n")

    dataset = _load_experiment_dataset(config)
    results, failed = [], {}
    for rep in range(config.repetitions):
        rep_dir = outdir / f"rep_{rep:03d}"
        marker = rep_dir / "rep_result.json"
        if marker.exists():
            recorded = json.loads(marker.read_text())
            if recorded.get("error") is None:
                results.append(recorded)
                continue
        try:
            results.append(_run_repetition(dataset, config, rep, rep_dir))
        except Exception as exc:  # recorded per repetition, run continues
            failed[rep] = f"{type(exc).__name__}: {exc}"
            rep_dir.mkdir(parents=True, exist_ok=True)
            marker.write_text(
                json.dumps({"repetition": rep, "error": failed[rep]}) + "\n"
            )

    rows = build_report_rows(results, config)
    report_path = outdir / REPORT_FILENAME
    write_report(rows, report_path)
    meta = {
        "config": payload,
        "kernel_backend": _kernels.BACKEND,
        "completed_repetitions": [r["repetition"] for r in results if not r.get("error")],
        "failed_repetitions": failed,
        "dataset": {
            "name": dataset.name,
            "rows": dataset.n_rows,
            "features": dataset.n_features,
            "classes": dataset.class_count,
        },
    }
    (outdir / "report_meta.json").write_text(json.dumps(meta) + "\n")
    return ExperimentOutcome(
        rows=rows, report_path=report_path, output_dir=outdir, failed_repetitions=failed
    )
