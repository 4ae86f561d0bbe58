"""Bayesian optimal experimental design for seismic monitoring networks.

Expected information gain about event location and magnitude from phase
detections and arrival times, sensitivity maps, and greedy sensor
placement with a Gaussian-process surrogate.
"""

__version__ = "0.1.0"

from ._errors import *  # noqa: F401,F403
from .arrivals import (
    PickNoiseModel,
    SnrModel,
    arrival_loglik_conditional,
    arrival_loglik_marginal,
    assemble_covariance,
    sigma_meas,
    snr_mean,
    total_sigma,
)
from .bundle import ModelBundle, default_bundle
from .detection import (
    CatalogRow,
    DetectionModel,
    detection_loglik,
    detection_probability,
    fit_detection_model,
)
from .earthmodel import (
    CorrelationModel,
    Ensemble,
    VelocityProfile,
    empirical_correlation,
    ensemble_stats,
    fit_kernel_length,
    fit_surrogates,
    kernel_correlation,
    synthetic_ensemble,
    travel_time,
)
from .eig import (
    DiscreteDistribution,
    EigReport,
    SensitivityRecord,
    eig_event,
    eig_total,
    kl_divergence,
    posterior_weights,
    sensitivity_map,
)
from .geo import (
    MONITORING_BOX,
    Domain,
    GeoPoint,
    PolygonRegion,
    degrees_to_km,
    great_circle_distance,
    point_in_polygon,
    sobol_events,
)
from .network import SensorNetwork, grid_network
from .optimize import (
    GpSurrogate,
    OptimizationTrace,
    expected_improvement,
    gp_fit,
    gp_predict,
    greedy_place,
    propose_next,
)
from .priors import (
    Event,
    MixtureSpec,
    PriorSpec,
    WeightedEventSet,
    importance_weights,
    log_prior_density,
    sample_prior,
)
from .synth import SyntheticDataset, sample_arrivals, sample_detections, synth_dataset
