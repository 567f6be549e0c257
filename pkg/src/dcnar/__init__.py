"""Two-stage dynamic causal inference for balanced panel time series.

Stage one learns a sparse directed influence network from the data with an
additive neural autoregression and prunes it by edge ablation; stage two
fits a time-varying network autoregression constrained to that structure
and interrogates it through impulse responses, counterfactual
trajectories, and probabilistic forecast metrics against standard
baselines.
"""

from .analysis import (Intervention, counterfactual, country_irf,
                       impulse_response, normalized_response,
                       response_magnitude, smoothness_metrics)
from .baselines import (LstmConfig, fit_lstm, fit_ridge_var, fit_tvvar,
                        lstm_mc_forecast, ridge_forecast, tvvar_forecast,
                        var_structure)
from .discovery import (AdditiveModel, CausalScoreMatrix, DiscoveryConfig,
                        causal_scores, contributions, fit_navar, predict_navar)
from .forecast import ForecastEnsemble
from .metrics import (IntervalSpec, crps_multi_horizon, crps_sample,
                      interval_coverage, local_crps)
from .panel import (LagDesign, PanelDataset, SplitSpec, build_lag_design,
                    load_panel, normalized_time, save_panel, split_panel)
from .prior import (AblationProtocol, AdjacencyPrior, CandidateGraph,
                    ablate_and_score, build_prior, build_structural_prior,
                    candidate_edges, coherence_screen, dm_test)
from .synth import (GeneratorSpec, GroundTruth, PathSpec, generate_panel,
                    score_recovery)
from .tvnar import (KernelSpec, TvNarModel, coefficient_matrix, fit_tvnar,
                    forecast_ensemble, local_estimate, stability_report)

__version__ = "0.1.0"
