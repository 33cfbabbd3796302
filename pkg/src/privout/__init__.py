"""Differentially private predictions from small feed-forward classifiers.

Train a Tanh/softmax classifier on a convexified cross-entropy objective,
compute closed-form global-sensitivity bounds for it, answer queries with
noise injected into one exponential-mechanism-sampled output neuron, account
the privacy budget across queries, and measure the resulting privacy-utility
trade-off with shadow-model membership-inference attacks.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .attack import (
    AttackConfig,
    AttackCorpus,
    AttackModelSet,
    AttackResult,
    accuracy_loss,
    build_shadow_corpus,
    classify_membership,
    evaluate_leakage,
    train_attack_model,
)
from .checkpoint import load_model, save_model
from .data import LabeledDataset, load_dataset, make_synthetic, save_dataset
from .errors import (
    BudgetExhaustedError,
    DataFormatError,
    DegenerateModelError,
    InputError,
    InsufficientPoolError,
    NumericError,
    PrivoutError,
)
from .experiment import (
    ExperimentConfig,
    ExperimentOutcome,
    run_experiment,
    theoretical_leakage_bound,
)
from .mechanisms import (
    MECH_GAUSSIAN,
    MECH_LAPLACE,
    NoiseSpec,
    PrivacyBudget,
    delta_of_epsilon,
    exp_mechanism_sample,
    exp_mechanism_weights,
    gdp_compose,
    per_query_budget,
    sample_gaussian,
    sample_laplace,
    split_budget,
)
from .network import (
    LOSS_CONVEXIFIED,
    LOSS_PLAIN,
    ForwardTrace,
    ModelParams,
    NetworkTopology,
    TrainingConfig,
    forward,
    gradients,
    loss_convexified,
    loss_plain,
)
from .predict import (
    DpBatchResult,
    DpPredictionRequest,
    DpPredictionResult,
    predict_batch_dp,
    predict_dp,
)
from .sensitivity import (
    SensitivityInputs,
    SensitivityReport,
    delta2_w,
    delta_omega,
    delta_p,
    delta_z,
    lipschitz_bound,
    oaro_bound,
    report,
    report_from_inputs,
)
from .training import TrainedModel, TrainingReport, accuracy, train

__version__ = "0.1.0"
