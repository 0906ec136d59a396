"""d-variable Hilbert-Schmidt independence criterion (dHSIC) and tests of
joint independence."""

from .api import METHODS, independence_test
from .baselines import BmrConfig, PairwiseConfig, bmr_statistic, bmr_test, pairwise_hsic_test
from .causal import DagReport, DagSpec, dag_rank, dag_verify, enumerate_dags, regress_node
from .dataset import CONTINUOUS, DISCRETE, Dataset
from .errors import DhsicError, InputError, NumericError
from .estimator import DhsicValue, core_h_vstat, dhsic, dhsic_statistic, hsic2_trace_form
from .gamma_approx import gamma_params, gamma_quantile, gamma_test
from .kernels import GramStack, KernelSpec, gram, gram_stack, median_bandwidth
from .resampling import (
    BOOTSTRAP,
    PERMUTATION,
    TestOutcome,
    bootstrap_test,
    dhsic_resampling_test,
    exact_resampling_distribution,
    permutation_test,
)
from .simlab import ScenarioConfig, ScenarioResult, run_scenario

__version__ = "0.1.0"
