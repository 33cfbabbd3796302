"""Command-line interface.

Exit codes: 0 success, 1 usage or data-format error, 2 numeric failure,
3 privacy budget exhausted.
"""

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import checkpoint, sensitivity
from .attack import AttackConfig, build_shadow_corpus, evaluate_leakage, train_attack_model
from .data import load_dataset, make_synthetic, save_dataset
from .errors import (
    BudgetExhaustedError,
    DataFormatError,
    InputError,
    InsufficientPoolError,
    NumericError,
    PrivoutError,
)
from .experiment import ExperimentConfig, run_experiment
from .mechanisms import MECHANISMS, PrivacyBudget, delta_of_epsilon, split_budget
from .network import LOSS_KINDS, LOSS_PLAIN, NetworkTopology, TrainingConfig
from .predict import DpPredictionRequest, predict_dp
from .training import train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_BUDGET = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; this project reserves 2
    # for numeric failures.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_data_options(parser):
    parser.add_argument("--label-column", default="label")
    parser.add_argument("--normalize", action="store_true",
                        help="min-max scale features into [-1, 1]")


def _cmd_train(args):
    dataset = load_dataset(args.data, args.label_column, normalize=args.normalize)
    test_set = (
        load_dataset(args.eval_data, args.label_column, normalize=args.normalize)
        if args.eval_data
        else None
    )
    topology = NetworkTopology.dense(
        dataset.n_features, args.hidden, dataset.class_count
    )
    config = TrainingConfig(
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        epochs=args.epochs,
        l2_coefficient=args.l2,
        alpha=args.alpha,
        loss_kind=args.loss,
        seed=args.seed,
    )
    model = train(dataset, topology, config, test_set=test_set)
    checkpoint.save_model(model, args.out)
    print(f"saved model to {args.out}")
    print(f"train_accuracy = {model.report.train_accuracy:.6f}")
    if model.report.test_accuracy is not None:
        print(f"test_accuracy = {model.report.test_accuracy:.6f}")
    return EXIT_OK


def _cmd_sensitivity(args):
    model = checkpoint.load_model(args.model)
    rpt = sensitivity.report(model, n=args.n, l2_coefficient=args.l2)
    json_path = Path(args.out).with_suffix(".json")
    text_path = Path(args.out).with_suffix(".txt")
    sensitivity.save_report(rpt, json_path, text_path)
    for key, value in asdict(rpt).items():
        print(f"{key} = {value!r}")
    print(f"written to {json_path} and {text_path}")
    return EXIT_OK


def _cmd_budget(args):
    budget = PrivacyBudget(
        args.epsilon_total,
        args.queries,
        args.classes,
        args.mechanism,
        train_size=args.train_size,
    )
    print(f"mechanism = {budget.mechanism}")
    print(f"epsilon_total = {budget.epsilon_total!r}")
    print(f"queries_allowed = {budget.queries_allowed}")
    print(f"epsilon_per_query = {budget.epsilon_per_query!r}")
    print(f"epsilon_sampling = {budget.epsilon_sampling!r}")
    print(f"epsilon_neuron = {budget.epsilon_neuron!r}")
    print(f"delta = {budget.delta!r}")
    if args.mechanism == "gaussian":
        print(f"delta_of_epsilon_total = {delta_of_epsilon(args.epsilon_total)!r}")
    return EXIT_OK


def _read_query_rows(path, n_features):
    with Path(path).open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        rows = []
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise DataFormatError(
                    f"{path}: line {line_number}: non-numeric value", line_number
                ) from None
            if len(rows[-1]) != n_features:
                raise DataFormatError(
                    f"{path}: line {line_number}: expected {n_features} features, "
                    f"got {len(rows[-1])}",
                    line_number,
                )
    return np.asarray(rows, dtype=np.float64)


def _cmd_predict_dp(args):
    model = checkpoint.load_model(args.model)
    rpt = sensitivity.load_report(args.sensitivity)
    budget = PrivacyBudget(
        args.epsilon_total,
        args.queries,
        model.topology.class_count,
        args.mechanism,
        train_size=model.train_size,
    )
    queries = _read_query_rows(args.input, model.topology.feature_count)
    rng = np.random.default_rng(args.seed)
    n_classes = model.topology.class_count
    exhausted = None
    with Path(args.out).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(
            ["query_id"]
            + [f"p{i}" for i in range(n_classes)]
            + ["neuron", "epsilon_consumed"]
        )
        for i, x in enumerate(queries):
            try:
                result = predict_dp(DpPredictionRequest(x, model, rpt, budget, rng))
            except BudgetExhaustedError as exc:
                exhausted = exc
                break
            writer.writerow(
                [i]
                + [f"{p:.6f}" for p in result.probs]
                + [result.neuron, f"{result.epsilon_consumed!r}"]
            )
    if exhausted is not None:
        print(f"budget exhausted after {budget.queries_answered} queries", file=sys.stderr)
        return EXIT_BUDGET
    print(f"wrote {len(queries)} predictions to {args.out}")
    return EXIT_OK


def _cmd_attack(args):
    model = checkpoint.load_model(args.model)
    pool = load_dataset(args.pool, args.label_column, normalize=args.normalize,
                        class_count=model.topology.class_count)
    members = load_dataset(args.members, args.label_column, normalize=args.normalize,
                           class_count=model.topology.class_count)
    non_members = load_dataset(args.non_members, args.label_column,
                               normalize=args.normalize,
                               class_count=model.topology.class_count)
    shadow_size = args.shadow_size or model.train_size
    config = AttackConfig(
        shadow_count=args.shadow_count,
        shadow_topology=model.topology,
        shadow_training=model.config,
        shadow_size=shadow_size,
        seed=args.seed,
    )
    corpus = build_shadow_corpus(pool, config)
    attack_models = train_attack_model(corpus, config)

    if args.epsilon_per_query is not None:
        rpt = sensitivity.load_report(args.sensitivity)
        budget = PrivacyBudget.from_per_query(
            args.epsilon_per_query,
            members.n_rows + non_members.n_rows,
            model.topology.class_count,
            args.mechanism,
            train_size=model.train_size,
        )
        rng = np.random.default_rng(args.seed)

        def query(x):
            return predict_dp(DpPredictionRequest(x, model, rpt, budget, rng)).probs

    else:
        def query(x):
            return model.predict_proba(x)[0]

    result = evaluate_leakage(query, members, non_members, attack_models)
    summary = {
        "true_positive_rate": result.true_positive_rate,
        "false_positive_rate": result.false_positive_rate,
        "privacy_leakage": result.privacy_leakage,
        "privacy_leakage_clamped": result.privacy_leakage_clamped,
        "attack_accuracy": result.attack_accuracy,
        "skipped_classes": attack_models.skipped,
    }
    Path(f"{args.out}.json").write_text(json.dumps(summary) + "\n")
    with Path(f"{args.out}_dump.csv").open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["set", "index", "true_class", "predicted_member"])
        for set_name, dataset, decisions in (
            ("member", members, result.member_decisions),
            ("nonmember", non_members, result.nonmember_decisions),
        ):
            for i, d in enumerate(decisions):
                writer.writerow([set_name, i, int(dataset.labels[i]), int(d)])
    for key, value in summary.items():
        print(f"{key} = {value}")
    return EXIT_OK


def _csv_floats(text):
    return tuple(float(v) for v in text.split(","))


def _csv_strings(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _cmd_experiment(args):
    payload = {}
    if args.config:
        try:
            payload = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{args.config}: not valid JSON ({exc})") from exc
    overrides = {
        "dataset_path": args.dataset,
        "train_size": args.train_size,
        "hidden_units": args.hidden,
        "epochs": args.epochs,
        "epsilon_grid": args.epsilon_grid,
        "mechanisms": args.mechanisms,
        "queries_per_budget": args.queries_per_budget,
        "shadow_count": args.shadow_count,
        "shadow_size": args.shadow_size,
        "repetitions": args.repetitions,
        "output_dir": args.output_dir,
        "master_seed": args.master_seed,
        "alpha": args.alpha,
        "l2_coefficient": args.l2,
        "learning_rate": args.learning_rate,
        "batch_size": args.batch_size,
    }
    for key, value in overrides.items():
        if value is not None:
            payload[key] = value
    config = ExperimentConfig.from_dict(payload)
    outcome = run_experiment(config)
    print(f"report written to {outcome.report_path}")
    if outcome.failed_repetitions:
        for rep, error in sorted(outcome.failed_repetitions.items()):
            print(f"repetition {rep} failed: {error}", file=sys.stderr)
    return EXIT_OK


def _cmd_synth(args):
    dataset = make_synthetic(
        classes=args.classes,
        rows=args.rows,
        features=args.features,
        separation=args.separation,
        seed=args.seed,
    )
    save_dataset(dataset, args.out)
    print(f"wrote {dataset.n_rows} rows to {args.out}")
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="privout", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[], help="train a baseline classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--eval-data")
    _add_data_options(p)
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--learning-rate", type=float, default=0.001)
    p.add_argument("--l2", type=float, default=0.001)
    p.add_argument("--loss", choices=LOSS_KINDS, default=LOSS_PLAIN)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("sensitivity", help="sensitivity report for a checkpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, help="training-set size override")
    p.add_argument("--l2", type=float, help="L2 coefficient override")
    p.add_argument("--out", required=True, help="output basename (.json/.txt)")
    p.set_defaults(func=_cmd_sensitivity)

    p = sub.add_parser("budget", help="show a privacy-budget split")
    p.add_argument("--epsilon-total", type=float, required=True)
    p.add_argument("--queries", type=int, required=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--mechanism", choices=MECHANISMS, required=True)
    p.add_argument("--train-size", type=int)
    p.set_defaults(func=_cmd_budget)

    p = sub.add_parser("predict-dp", help="DP prediction vectors for query rows")
    p.add_argument("--model", required=True)
    p.add_argument("--sensitivity", required=True)
    p.add_argument("--epsilon-total", type=float, required=True)
    p.add_argument("--queries", type=int, required=True)
    p.add_argument("--mechanism", choices=MECHANISMS, required=True)
    p.add_argument("--input", required=True, help="CSV of query rows (header)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict_dp)

    p = sub.add_parser("attack", help="shadow-model membership-inference attack")
    p.add_argument("--model", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--members", required=True)
    p.add_argument("--non-members", required=True)
    _add_data_options(p)
    p.add_argument("-k", "--shadow-count", type=int, default=2)
    p.add_argument("--shadow-size", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon-per-query", type=float,
                   help="attack a DP-wrapped target at this per-query budget")
    p.add_argument("--mechanism", choices=MECHANISMS, default="gaussian")
    p.add_argument("--sensitivity", help="required with --epsilon-per-query")
    p.add_argument("--out", required=True, help="output basename")
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("experiment", help="full train/bound/perturb/attack sweep")
    p.add_argument("--config", help="JSON config file; flags override")
    p.add_argument("--dataset")
    p.add_argument("--train-size", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--epsilon-grid", type=_csv_floats)
    p.add_argument("--mechanisms", type=_csv_strings)
    p.add_argument("--queries-per-budget", type=int)
    p.add_argument("--shadow-count", type=int)
    p.add_argument("--shadow-size", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--master-seed", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--l2", type=float)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--batch-size", type=int)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("synth", help="generate a synthetic blob dataset CSV")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--features", type=int, required=True)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BudgetExhaustedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, DataFormatError, InsufficientPoolError, PrivoutError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
