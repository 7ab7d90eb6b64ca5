"""Transport-aligned, diversity-aware training data selection.

Core pieces: feature projection and EVF I/O, an entropic transport solver
with dual-potential gradients, a Gram-kernel diversity energy, the joint
selector, five baseline selectors, subset diagnostics, and a seeded
simulator of the iterative generation-selection loop.
"""

from .features import (
    EvfFormatError,
    FeatureError,
    FeatureMatrix,
    ProjectionSpec,
    RawFeatureMatrix,
    normalize_rows,
    project,
    read_csv,
    read_evf,
    read_features,
    write_evf,
)
from .ot import (
    CostMatrix,
    OtError,
    SimplexWeights,
    SinkhornParams,
    SinkhornOverflowError,
    TransportSolution,
    cost_matrix,
    exact_ot_small,
    ot_gradient,
    sinkhorn,
)
from .diversity import GramKernel, diversity_energy, diversity_gradient
from .selector import (
    EvoParams,
    SelectionResult,
    SelectorError,
    budget,
    evoselect,
    exp_update,
    standardize,
    top_k,
)
from .baselines import (
    AttributionScores,
    InfeasibleBudgetError,
    TsdsParams,
    attribution_scores,
    select_attr_div,
    select_attribution,
    select_diversity,
    select_random,
    select_tsds,
)
from .metrics import SubsetReport, mean_attribution, subset_ot, vendi_score
from .loopsim import LoopConfig, LoopReport, MixtureComponent, generate_candidates, run_loop

__version__ = "0.1.0"
