from .arpa import export_arpa, load_arpa
from .classlm import ClassNGramModel, class_counts, train_class_ngram
from .evaluate import OOV_POLICIES, PerplexityResult, perplexity, scored_logprobs
from .mixture import MixtureModel, component_probabilities, em_weights, mixture_em
from .model import (NGramError, NGramModel, kn_discounts, kn_modified_counts, train_kn,
                    train_witten_bell)

__all__ = [
    "ClassNGramModel", "MixtureModel", "NGramError", "NGramModel", "OOV_POLICIES", "PerplexityResult",
    "class_counts", "component_probabilities", "em_weights", "export_arpa", "kn_discounts",
    "kn_modified_counts", "load_arpa", "mixture_em", "perplexity", "scored_logprobs", "train_class_ngram",
    "train_kn", "train_witten_bell",
]
