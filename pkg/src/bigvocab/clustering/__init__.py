"""Word clustering: exchange, Brown, k-means over embeddings and rule merging."""

from .brown import brown_train
from .classmap import ClassMap, ClassMapError, class_token, init_classes
from .exchange import (ExchangeStatistics, class_bigram_objective, exchange_objective,
                       exchange_train)
from .kmeans import EmbeddingTable, kmeans_cluster
from .rules import Rule, RuleSet, RuleSyntaxError, rules_merge

__all__ = [
    "ClassMap", "ClassMapError", "EmbeddingTable", "ExchangeStatistics", "Rule", "RuleSet",
    "RuleSyntaxError", "brown_train", "class_bigram_objective", "class_token",
    "exchange_objective", "exchange_train", "init_classes", "kmeans_cluster", "rules_merge",
]
