"""Driver attention-state classification from EEG recordings.

Library layout:

- recording: containers, RT computation, percentile labeling, epoching,
  class balancing
- atdr: binary recording container + CSV fixture loader
- spectral: exact-length DFT (radix-2 / Bluestein), periodogram, band powers
- eegnet: from-scratch compact CNN (forward, backward, Adam, max-norm,
  training loop, random search)
- svm: SMO-trained kernel SVM on standardized band powers
- stats: Wilcoxon signed-ranks, Pearson, RT dispersion
- evaluation: mixed / leave-one-subject-out protocols and report shaping
- synth: seeded synthetic driving sessions with ground truth
- pipeline + cli: end-to-end orchestration
"""

__version__ = "0.1.0"

from .recording import (  # noqa: F401
    DeviationEvent,
    LabeledEpoch,
    LabelPolicy,
    Recording,
    Session,
    TrialLabel,
    balance_classes,
    build_labeled_set,
    compute_reaction_times,
    extract_epoch,
    label_trials,
    percentile_nearest_rank,
)
from .spectral import (  # noqa: F401
    BandSpec,
    FeatureVector,
    band_powers,
    default_bands,
    dft,
    idft,
    periodogram,
)
from .eegnet import EEGNetConfig, EEGNetModel, TrainHistory, bce_loss, shape_trace  # noqa: F401
from .svm import SvmConfig, SvmModel, Standardizer, svm_predict, svm_train  # noqa: F401
from .stats import StatResult, pearson, rt_dispersion, wilcoxon_signed_ranks  # noqa: F401
from .evaluation import EvalReport, accuracy, run_loso, split_mixed  # noqa: F401
from .synth import GroundTruth, SynthConfig, generate_dataset, oracle_agreement  # noqa: F401
