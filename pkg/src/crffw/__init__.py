"""MAP inference for pairwise MRFs/CRFs.

Regularized Frank-Wolfe solvers with l2 and entropic direction steps,
the classical first-order baselines (mean field, projected gradient,
accelerated projections, multiplicative updates, two-block splitting),
plus rounding schemes, brute-force oracles, and convergence-bound
diagnostics for desk-scale instances.
"""

from .diagnostics import (ConvergenceParams, OracleReport, TightnessReport,
                          brute_force_map, convergence_params, decrease_bound,
                          feasible_set_diameter, finite_diff_gradient,
                          tightness_report, vertex_regularizer_constancy)
from .errors import (CapacityError, Diverged, InstanceFormatError,
                     UnsupportedFeatureError)
from .instances import (GeneratorSpec, RandomDense, RandomEdgeList, RandomGrid,
                        generate, potts_matrix, read_json, read_uai, write_json)
from .model import (CrfInstance, DenseMatrix, DiagonalShift, EdgeList,
                    GaussianKernel, pairwise_matvec)
from .regularizers import (EntropyRegularizer, L2Regularizer, Regularizer,
                           regularizer_bounds, regularizer_value,
                           strong_convexity)
from .schedules import (Adaptive, Constant, ConstantLength, Harmonic, InvSqrt,
                        LineSearch, HarmonicRamp, StepContext,
                        StepsizeSchedule, stepsize)
from .simplex import (BcdRounding, NearestRounding, RoundingScheme,
                      check_feasible, decode, is_feasible, project_feasible,
                      project_simplex, round_bcd, round_nearest,
                      rounding_constant, softmax_rows)
from .solvers import (ADMM, EMD, PGD, ConvexFW, DampedMeanField, EntropicFW,
                      FastPGM, IterationRecord, IterationTrace, L2FW,
                      MeanField, SolverConfig, SolverMethod, VanillaFW,
                      admm_run, conditional_gradient_norm, convexify,
                      direction_efw, direction_l2fw, emd_run, fpgm_run,
                      initial_point, lmo_vanilla, mean_field_run, pgd_run,
                      run_generalized_fw)

__version__ = "0.1.0"
