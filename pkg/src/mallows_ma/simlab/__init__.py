"""Seeded simulation experiments for the averaging and thresholding estimators."""

from .config import ConfigError, config_echo, load_config, parse_config
from .dgp import (
    CoefficientSpec,
    NoiseSpec,
    ar1_design,
    calibrate_sigma2,
    gen_coefficients,
    gen_noise,
)
from .experiment import (
    RESULT_COLUMNS,
    SCENARIO_METHODS,
    ExperimentConfig,
    ExperimentResult,
    FieldError,
    ResultRow,
    read_result_csv,
    run_experiment,
    summarize,
    write_result_csv,
)
from .rng import coefficient_rng, design_rng, replication_rng
