"""Learn, evaluate, certify and tune neural reachability classifiers.

The package covers the full loop for deterministic hybrid systems:

* ``systems``: the benchmark models (inverted pendulum, spiking neuron,
  quadcopter altitude controller) behind a common kernel interface.
* ``ode`` / ``simulate``: adaptive Dormand-Prince integration and
  grid-synchronized reachability labeling of trajectories.
* ``sampling``: deterministic uniform and adaptive dataset generation.
* ``nets`` / ``train``: feedforward classifiers, Levenberg-Marquardt and
  gradient-descent training, and incremental adaptation.
* ``stats`` / ``sprt``: confidence-interval evaluation and sequential
  probability-ratio certification of accuracy targets.
* ``analysis``: region maps, adaptation loops, threshold and horizon sweeps.
"""

from .analysis import (
    AdaptationReport,
    RegionReport,
    SweepReport,
    adaptation_loop,
    default_train_config,
    region_analysis,
    save_region_csv,
    save_sweep_csv,
    select_threshold_min_fn,
    threshold_sweep,
    timebound_analysis,
    train_ensemble,
    train_network,
)
from .errors import (
    BlowUpError,
    ConfigError,
    ContractError,
    DivergenceError,
    ParseError,
    ReachLearnError,
    SimulationError,
    SingularityError,
)
from .nets import (
    Ensemble,
    Network,
    build_ensemble,
    build_network,
    classify,
    forward,
    init_nguyen_widrow,
    load_model,
    save_model,
)
from .sampling import (
    AdaptiveConfig,
    Dataset,
    adaptive_preset,
    generate_dataset,
    labeled_uniform,
    load_csv,
    sample_uniform,
    save_csv,
    split,
)
from .simulate import (
    IntegratorConfig,
    SimTrace,
    grid_count,
    label_states,
    reach_label,
    save_trace_csv,
    simulate,
)
from .sprt import SPRTConfig, SPRTVerdict, certification_stream, sprt_certify
from .stats import (
    MetricsReport,
    evaluate,
    evaluate_predictions,
    metrics_from_counts,
    normal_quantile,
    wilson_ci,
)
from .systems import HybridSystem, ModelSpec, State, available_models, get_model
from .train import TrainConfig, TrainLog, adapt, gradient, train

__version__ = "0.1.0"

__all__ = [
    "AdaptationReport",
    "AdaptiveConfig",
    "BlowUpError",
    "ConfigError",
    "ContractError",
    "Dataset",
    "DivergenceError",
    "Ensemble",
    "HybridSystem",
    "IntegratorConfig",
    "MetricsReport",
    "ModelSpec",
    "Network",
    "ParseError",
    "ReachLearnError",
    "RegionReport",
    "SPRTConfig",
    "SPRTVerdict",
    "SimTrace",
    "SimulationError",
    "SingularityError",
    "State",
    "SweepReport",
    "TrainConfig",
    "TrainLog",
    "adapt",
    "adaptation_loop",
    "adaptive_preset",
    "available_models",
    "build_ensemble",
    "build_network",
    "certification_stream",
    "classify",
    "default_train_config",
    "evaluate",
    "evaluate_predictions",
    "forward",
    "generate_dataset",
    "get_model",
    "gradient",
    "grid_count",
    "init_nguyen_widrow",
    "label_states",
    "labeled_uniform",
    "load_csv",
    "load_model",
    "metrics_from_counts",
    "normal_quantile",
    "reach_label",
    "region_analysis",
    "sample_uniform",
    "save_csv",
    "save_model",
    "save_region_csv",
    "save_sweep_csv",
    "save_trace_csv",
    "select_threshold_min_fn",
    "simulate",
    "split",
    "sprt_certify",
    "threshold_sweep",
    "timebound_analysis",
    "train",
    "train_ensemble",
    "train_network",
    "wilson_ci",
]
