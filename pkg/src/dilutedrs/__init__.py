"""Replica-symmetric cavity computations for diluted mean-field spin systems."""

from .errors import (
    ArgumentError,
    ConfigError,
    DigestMismatchError,
    DilutedError,
    NoClosedFormError,
    ResourceError,
    UnsupportedError,
)
from .finite import (
    HypergraphInstance,
    count_approx_solutions,
    exact_gse,
    exact_log_partition,
    mcmc_log_partition,
    sample_instances,
)
from .functionals import (
    FunctionalEstimate,
    closed_form,
    eval_P_finite,
    eval_P_infty,
    eval_P_magnetization,
)
from .hardcore import hc_eval_P, hc_solve, hc_tree_dp, hc_volume_mc
from .models import (
    ModelSpec,
    ScalarLaw,
    custom_table_model,
    hardcore_soft_model,
    ksat_model,
    nae_ksat_model,
    perceptron_model,
    potts_model,
    pspin_model,
    xy_model,
)
from .rde import gw_samples, population_step, solve_magnetization, solve_population
from .spin import Population, SpinSpace, population_distance, w1_scalar

__version__ = "0.1.0"
