"""Economic complexity and relatedness toolkit for country x activity counts."""

__version__ = "0.1.0"

from .complexity import (
    ComplexityScores,
    EconomicComplexity,
    compute_complexity,
    compute_complexity_eigen,
    compute_complexity_fixed_point,
    rank_table,
    rescale_minmax,
)
from .dynamics import (
    SpecializationPanel,
    build_panel,
    build_transition_dataset,
    correlate_ubiquity_external,
    detect_events,
)
from .econometrics.iv import TwoStageLeastSquares, build_similarity_instrument, tsls
from .econometrics.linear import OLS, ols
from .econometrics.logit import Logit, logit
from .econometrics.paper_models import run_paper_models
from .econometrics.spec import ModelSpec
from .ingest import (
    apply_sample_filters,
    clean_filter_aggregate,
    load_adjacency,
    load_indicators,
    parse_ghig,
)
from .pipeline import PipelineConfig, load_config, run_pipeline
from .relatedness import Relatedness, backbone, proximity, relatedness_density
from .specialization import (
    CountMatrix,
    RevealedComparativeAdvantage,
    SpecializationMatrix,
    binarize,
    build_count_matrix,
    margins,
    nested_sort,
    rca,
)

