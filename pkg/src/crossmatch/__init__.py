"""Distribution-free K-sample tests from minimum non-bipartite matchings.

The main entry points are :func:`run_test` (functional) and
:class:`CrossMatchTest` (estimator style). Group labels of any type are
accepted and coded ``0..K-1`` in sorted order.
"""

__version__ = "0.1.0"

from ._validation import NumericalError, PreconditionError
from .alternative import (AlternativeSpec, CustomDensity, Gaussian, LogNormal,
                          bootstrap_sample, clt_diagnostic,
                          conditional_mean_mu, gamma2_two_sample,
                          gamma_matrices, h_matrix, henze_penrose,
                          hp_aggregate)
from .counts import (count_matrix, cross_edge_total, cross_vector,
                     mst_cross_total)
from .estimators import CrossMatchTest
from .geometry import (EdgeList, Matching, apply_odd_policy,
                       brute_force_matching, min_nonbipartite_matching,
                       minimum_spanning_tree, pairwise_distances)
from .null_dist import (ExactPmf, NullMoments, covariance_condition_check,
                        enumerate_support, exact_pmf, mcm_moments,
                        null_covariance, null_covariance_limit, null_mean,
                        null_moments)
from .simulate import (FamilyConfig, PowerReport, anderson_test,
                       emit_power_table, estimate_power, lrt_covariance,
                       sample_family)
from .stattests import (PairwiseTable, TestResult, asymptotic_pvalue_mcm,
                        asymptotic_pvalue_mmcm, bh_adjust, exact_pvalue,
                        mcm_statistic, mmcm_statistic,
                        pairwise_class_selection, permutation_test, run_test)
