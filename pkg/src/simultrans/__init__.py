"""Adaptive simultaneous transduction at desk scale.

Delay-token transition system, restricted dynamic oracle, imitation-learning
training over the two extreme oracle paths, latency-constrained decoding with
temperature control, and latency/quality metrics.
"""

from .transitions import (
    Action,
    ActionSequence,
    DELAY,
    DELAY_TOKEN,
    EOS_TOKEN,
    EMPTY_STATE,
    PrefixState,
    Vocab,
    apply_action,
    applicable_actions,
    replay,
    replay_states,
)
from .oracle import (
    AGGRESSIVE,
    CONSERVATIVE,
    OracleConfig,
    effective_lag,
    enumerate_oracle_paths,
    extreme_path,
    oracle_actions,
    waitk_path,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ActionSequence",
    "AGGRESSIVE",
    "CONSERVATIVE",
    "DELAY",
    "DELAY_TOKEN",
    "EOS_TOKEN",
    "EMPTY_STATE",
    "OracleConfig",
    "PrefixState",
    "Vocab",
    "apply_action",
    "applicable_actions",
    "effective_lag",
    "enumerate_oracle_paths",
    "extreme_path",
    "oracle_actions",
    "replay",
    "replay_states",
    "waitk_path",
]
