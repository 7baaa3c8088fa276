from .decoder import (DEFAULT_MAX_PATHS, LatticeScorer, PathResult, PruningConfig, join_output, nbest_exhaustive,
                      rescore)
from .slf import NULL_UNIT, Lattice, LatticeError, Link, parse_slf, read_slf, write_slf

__all__ = [
    "DEFAULT_MAX_PATHS", "Lattice", "LatticeError", "LatticeScorer", "Link", "NULL_UNIT", "PathResult",
    "PruningConfig", "join_output", "nbest_exhaustive", "parse_slf", "read_slf", "rescore", "write_slf",
]
