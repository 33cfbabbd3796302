"""Black-box shadow-model membership-inference harness.

Shadow models mimic the target (same topology, same training config) on
disjoint chunks of a data pool.  Their prediction vectors on their own
training rows (members) and on held-out rows (non-members) train one binary
attack classifier per class label; the attack input is the sorted prediction
probability vector.
"""

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import LabeledDataset
from .errors import InputError, InsufficientPoolError
from .network import LOSS_PLAIN, NetworkTopology, TrainingConfig
from .seeding import derive_seed
from .training import train

ATTACK_HIDDEN_UNITS = 64
ATTACK_L2 = 1e-6
ATTACK_LEARNING_RATE = 0.01


@dataclass
class AttackConfig:
    shadow_count: int
    shadow_topology: NetworkTopology  # same shape as the target
    shadow_training: TrainingConfig  # same hyper-parameters as the target
    shadow_size: int  # rows in each shadow's train half (= its test half)
    attack_hidden_units: int = ATTACK_HIDDEN_UNITS
    attack_l2: float = ATTACK_L2
    attack_learning_rate: float = ATTACK_LEARNING_RATE
    seed: int = 0

    def __post_init__(self):
        if self.shadow_count < 1:
            raise InputError("shadow_count must be >= 1")
        if self.shadow_size < 1:
            raise InputError("shadow_size must be >= 1")


@dataclass
class AttackCorpus:
    vectors: np.ndarray  # (N, C) prediction vectors, sorted descending
    class_labels: np.ndarray  # (N,) true class of the queried sample
    member: np.ndarray  # (N,) 1 = shadow-training row, 0 = held-out row


@dataclass
class AttackModelSet:
    models: dict  # class label -> TrainedModel (binary: non-member/member)
    skipped: list  # classes with no corpus rows
    class_count: int


@dataclass
class AttackResult:
    true_positive_rate: float
    false_positive_rate: float
    privacy_leakage: float  # raw TPR - FPR, may be slightly negative
    attack_accuracy: float
    member_decisions: Optional[np.ndarray] = None
    nonmember_decisions: Optional[np.ndarray] = None

    @property
    def privacy_leakage_clamped(self):
        """Metric range used in summary tables."""
        return min(max(self.privacy_leakage, 0.0), 1.0)


def sort_vectors(probs):
    """Sort each prediction vector descending (the attack-model input form)."""
    return np.sort(np.atleast_2d(probs), axis=1)[:, ::-1]


def build_shadow_corpus(pool, config):
    """Train shadows on disjoint pool chunks; label their in/out predictions."""
    need = config.shadow_count * 2 * config.shadow_size
    if pool.n_rows < need:
        raise InsufficientPoolError(
            f"pool has {pool.n_rows} rows, need {need} for "
            f"{config.shadow_count} shadows of size {config.shadow_size}",
            required=need,
            available=pool.n_rows,
        )
    order = np.random.default_rng(derive_seed(config.seed, "shadow-split")).permutation(
        pool.n_rows
    )
    vectors, class_labels, member = [], [], []
    for i in range(config.shadow_count):
        start = i * 2 * config.shadow_size
        train_idx = order[start : start + config.shadow_size]
        test_idx = order[start + config.shadow_size : start + 2 * config.shadow_size]
        shadow_config = TrainingConfig(
            learning_rate=config.shadow_training.learning_rate,
            batch_size=config.shadow_training.batch_size,
            epochs=config.shadow_training.epochs,
            l2_coefficient=config.shadow_training.l2_coefficient,
            alpha=config.shadow_training.alpha,
            loss_kind=config.shadow_training.loss_kind,
            seed=derive_seed(config.seed, "shadow", i),
        )
        shadow = train(pool.subset(train_idx), config.shadow_topology, shadow_config)
        for idx, flag in ((train_idx, 1), (test_idx, 0)):
            vectors.append(sort_vectors(shadow.predict_proba(pool.features[idx])))
            class_labels.append(pool.labels[idx])
            member.append(np.full(len(idx), flag, dtype=np.int64))
    return AttackCorpus(
        vectors=np.concatenate(vectors),
        class_labels=np.concatenate(class_labels),
        member=np.concatenate(member),
    )


def train_attack_model(corpus, config):
    """One binary classifier per class; classes without rows are skipped."""
    class_count = config.shadow_topology.class_count
    models, skipped = {}, []
    for label in range(class_count):
        mask = corpus.class_labels == label
        if not np.any(mask):
            warnings.warn(f"no attack corpus rows for class {label}; skipping")
            skipped.append(label)
            continue
        rows = LabeledDataset(
            features=corpus.vectors[mask],
            labels=corpus.member[mask],
            class_count=2,
            name=f"attack-class-{label}",
        )
        attack_config = TrainingConfig(
            learning_rate=config.attack_learning_rate,
            batch_size=config.shadow_training.batch_size,
            epochs=config.shadow_training.epochs,
            l2_coefficient=config.attack_l2,
            loss_kind=LOSS_PLAIN,
            seed=derive_seed(config.seed, "attack-model", label),
        )
        topology = NetworkTopology.dense(
            class_count, config.attack_hidden_units, 2
        )
        models[label] = train(rows, topology, attack_config)
    return AttackModelSet(models=models, skipped=skipped, class_count=class_count)


def classify_membership(attack_models, vectors, class_labels):
    """Per-class routing; samples of skipped classes default to non-member."""
    vectors = np.atleast_2d(vectors)
    class_labels = np.asarray(class_labels, dtype=np.int64)
    decisions = np.zeros(vectors.shape[0], dtype=np.int64)
    for label, model in attack_models.models.items():
        mask = class_labels == label
        if np.any(mask):
            probs = model.predict_proba(vectors[mask])
            decisions[mask] = np.argmax(probs, axis=1)
    return decisions


def evaluate_leakage(target_query_fn, members, non_members, attack_models):
    """Query the target once per sample and score the attack.

    `members` / `non_members` expose `.features` and `.labels` and must be the
    same size.  Budget refusals from a DP target propagate to the caller.
    """
    if members.n_rows != non_members.n_rows:
        raise InputError("member and non-member sets must be the same size")
    decisions = {}
    for key, dataset in (("member", members), ("nonmember", non_members)):
        vectors = np.stack(
            [np.asarray(target_query_fn(x), dtype=np.float64) for x in dataset.features]
        )
        decisions[key] = classify_membership(
            attack_models, sort_vectors(vectors), dataset.labels
        )
    tp = int(np.sum(decisions["member"] == 1))
    fp = int(np.sum(decisions["nonmember"] == 1))
    tn = non_members.n_rows - fp
    tpr = tp / members.n_rows
    fpr = fp / non_members.n_rows
    return AttackResult(
        true_positive_rate=tpr,
        false_positive_rate=fpr,
        privacy_leakage=tpr - fpr,
        attack_accuracy=(tp + tn) / (members.n_rows + non_members.n_rows),
        member_decisions=decisions["member"],
        nonmember_decisions=decisions["nonmember"],
    )


def accuracy_loss(dp_test_accuracy, baseline_test_accuracy):
    """1 - dp/baseline; 0 means the DP model matches the baseline."""
    if baseline_test_accuracy <= 0:
        raise InputError("baseline accuracy must be positive")
    return 1.0 - dp_test_accuracy / baseline_test_accuracy
