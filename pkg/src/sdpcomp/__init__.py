"""Binary classification from similar/dissimilar pairs that also carry a comparison order."""

from .core import (
    ClassPrior,
    Correction,
    Estimator,
    LabeledPair,
    LossKind,
    NoiseRates,
    PairArrays,
    RiskSpec,
    Sample,
    SDPcompError,
    class_prior_from,
    validate_pair_dataset,
)
from .datagen import GaussianMixtureSpec, estimate_prior, generate_sdpc_pairs, sample_labeled
from .estimators import (
    PairScores,
    alpha_coefficients,
    eight_terms,
    risk_combined,
    risk_convex,
    risk_gradient,
    risk_pcomp,
    risk_sd,
    risk_sdpc,
)
from .model import Scorer
from .train_eval import EstimatedPrior, KnownPrior, TrainConfig, TrialSpec, accuracy, auc, run_trial, train

__version__ = "0.1.0"
