from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .network import (OUTPUT_KINDS, Network, NetworkConfig, NetworkError, NNLMVocabulary, init_network)
from .outputs import (BlackOutOutput, HierarchicalSoftmaxOutput, NCEOutput, Partition, SoftmaxOutput,
                      build_hsoftmax_partition, classifier_probability, log_softmax, softmax_nll)
from .sampling import AliasTable, NoiseSampler, noise_distribution, sample_noise
from .scoring import NNLMScorer, OOSError, score_tokens
from .training import Adagrad, TrainingConfig, TrainingError, TrainingResult, make_batches, train

__all__ = [
    "Adagrad", "AliasTable", "BlackOutOutput", "CheckpointError", "HierarchicalSoftmaxOutput", "NCEOutput",
    "NNLMScorer", "NNLMVocabulary", "Network", "NetworkConfig", "NetworkError", "NoiseSampler", "OOSError",
    "OUTPUT_KINDS", "Partition", "SoftmaxOutput", "TrainingConfig", "TrainingError", "TrainingResult",
    "build_hsoftmax_partition", "classifier_probability", "init_network", "load_checkpoint", "log_softmax",
    "make_batches", "noise_distribution", "sample_noise", "save_checkpoint", "score_tokens", "softmax_nll",
    "train",
]
