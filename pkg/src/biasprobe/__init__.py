"""Workbench for demonstrating selection-induced spurious correlations.

The pipeline: sample a small structural causal model where dataset selection
depends on both gender and a covariate, verify the induced dependence by
d-separation and by counting, train or attach a masked-token scorer, probe it
with gender-neutral sentences along an axis, and quantify how strongly the
predicted gendered-word mass tracks the axis.
"""

from .errors import (
    BiasProbeError,
    ConfigError,
    DegenerateSeriesError,
    DegenerateVariableError,
    FitError,
    InputError,
    ProtocolError,
    ScorerError,
    TemplateError,
    UndefinedPosteriorError,
    UnknownAxisValueError,
)
from .experiment import (
    ExperimentConfig,
    RunManifest,
    RunResult,
    compute_run_id,
    load_run,
    render_plot,
    run_experiment,
)
from .scm import (
    CausalDag,
    DependenceReport,
    PopulationSample,
    ScmParams,
    apply_selection,
    build_dag,
    d_separated,
    dependence_report,
    posterior_female_given_w,
    sample_population,
)
from .scorer import (
    GenderMass,
    MaskPrediction,
    MockScorer,
    RemoteScorer,
    SyntheticScorerModel,
    TokenScore,
    gender_mass,
    remote_score,
    score,
    train_synthetic_scorer,
)
from .stats import (
    FitResult,
    SeriesPoint,
    aggregate,
    fit,
    pearson_r,
    report_table,
)
from .svgplot import render_series_plot
from .templates import (
    AxisSpec,
    GenderLexicon,
    ProbeText,
    TemplateSpec,
    builtin_axis,
    builtin_lexicon,
    builtin_templates,
    render_probes,
    validate_neutral,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BiasProbeError",
    "ConfigError",
    "InputError",
    "TemplateError",
    "FitError",
    "ScorerError",
    "ProtocolError",
    "DegenerateVariableError",
    "DegenerateSeriesError",
    "UndefinedPosteriorError",
    "UnknownAxisValueError",
    "CausalDag",
    "ScmParams",
    "PopulationSample",
    "DependenceReport",
    "build_dag",
    "d_separated",
    "sample_population",
    "apply_selection",
    "posterior_female_given_w",
    "dependence_report",
    "GenderLexicon",
    "AxisSpec",
    "TemplateSpec",
    "ProbeText",
    "builtin_lexicon",
    "builtin_axis",
    "builtin_templates",
    "render_probes",
    "validate_neutral",
    "TokenScore",
    "MaskPrediction",
    "GenderMass",
    "SyntheticScorerModel",
    "MockScorer",
    "RemoteScorer",
    "score",
    "gender_mass",
    "train_synthetic_scorer",
    "remote_score",
    "SeriesPoint",
    "FitResult",
    "aggregate",
    "pearson_r",
    "fit",
    "report_table",
    "render_series_plot",
    "ExperimentConfig",
    "RunManifest",
    "RunResult",
    "run_experiment",
    "render_plot",
    "load_run",
    "compute_run_id",
]
