"""Data-driven polynomial chaos surrogates with coefficient-based
Sobol' sensitivity analysis on quasi-Monte-Carlo training designs."""

from .distributions import (ParameterSpace, ScaledBeta, TruncatedLogNormal,
                            Uniform, porous_flow_space)
from .qmc import (DesignMatrix, SobolGenerator, map_design, mc_design,
                  mc_points, qmc_design, sobol_points)
from .polybasis import (MomentSet, OrthonormalBasis1D, build_basis,
                        eval_basis, raw_moments)
from .multires import (Decomposition, DegreeIndexSet, PiecewiseBasis,
                       build_piecewise_basis, coeff_count, decompose,
                       degree_set, linear_index, locate)
from .surrogate import (SurrogateModel, TrainingSet, assemble_design, fit,
                        predict, predict_batch)
from .gsa import (SensitivityReport, amrpc_sobol, amrpc_total,
                  amrpc_variance_index, analyze, mc_sobol_oracle,
                  mean_from_coeffs, pce_sobol, pce_total, sobol_index,
                  space_average, total_index, variance_from_coeffs)
from .metrics import (ReferenceStats, l2_field_error, mc_reference,
                      relative_mse, rmse)
from .benchmarks import AnalyticModel, field_toy, g_function, ishigami, span_polynomial
from .storage import (load_design, load_model, load_outputs, save_design,
                      save_model, save_outputs)

__version__ = "0.1.0"
