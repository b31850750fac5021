"""Score-based causal discovery with tiered background knowledge.

Learns tiered maximally oriented PDAGs from observational Gaussian data via
TGES, with GES and STGES baselines, plus simulation and evaluation tooling.
"""

__version__ = "0.1.0"

from .graphs import (
    EdgeMark,
    FormatError,
    GraphError,
    MismatchError,
    Pdag,
    TieredKnowledge,
    consistent_extension,
    d_separated,
    dag_to_cpdag,
    encodes,
    in_agreement,
    is_dag,
    meek_closure,
    restrict,
    tiered_mpdag_of,
    topological_order,
)
from .metrics import (
    ConfusionMatrix,
    EvalReport,
    adjacency_confusion,
    direction_confusion,
    evaluate,
    sshd,
)
from .oracle import best_scoring_graph, enumerate_dags, restricted_class_of
from .scoring import Dataset, ScoreError, Scorer, tune_lambda
from .search import (
    Move,
    SearchState,
    backward_step,
    forward_step,
    ges,
    neighbors,
    stges,
    tges,
    turning_step,
)
from .simulate import (
    GroundTruth,
    SimConfig,
    SimError,
    draw_samples,
    gen_truth,
    sample_data,
)
