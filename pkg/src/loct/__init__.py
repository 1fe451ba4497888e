"""Loss-optimal oblique classification trees by mixed-integer optimization.

Trees route points through linear splits chosen by a MILP that couples
routing binaries, big-M forwarding rows, and per-layer loss slacks
(piecewise-linear logistic, hinge, or misclassification), regularized
by l1 weight norms or l0 feature selection. The solver is an embedded
branch-and-bound over a bounded-variable simplex; training wraps it
with a greedy warm start and an exact last-layer refinement.
"""

from .dataset import (Dataset, SplitSpec, kfolds, load_csv, standardize,
                      train_test_split)
from .evaluation import (ConfusionCounts, GapCurve, ProfileCurve, RunResult,
                         balanced_accuracy, emit_report, gap_curve,
                         performance_profiles, sparsity)
from .fitting import fit_l1_hinge, fit_l1_logistic
from .formulation import (LossSpec, MilpModel, RegularizerSpec, TangentLine,
                          add_l0_structure, build_margot_l1, build_oct_misclass,
                          build_olct, census, export_lp, hinge_loss,
                          logistic_loss, pwl_logistic, tangent_lines)
from .simplex import LpSolution, LpTimeout, SimplexError, solve_bounded_lp
from .solver import (MipSolution, SolverConfig, solve_lp, solve_mip,
                     validate_assignment)
from .synth import (dataset_by_name, dataset_names, make_near_separable,
                    make_two_gaussians, make_xor, save_csv)
from .training import (TrainConfig, TrainReport, build_model, cross_validate,
                       exact_objective, greedy_warm_start, refine_last_layer,
                       train)
from .tree import (InfluenceTable, Prediction, TreeModel, TreeTopology,
                   feature_influence)

__version__ = "0.1.0"

__all__ = [
    "Dataset", "SplitSpec", "load_csv", "standardize", "train_test_split",
    "kfolds",
    "TreeTopology", "TreeModel", "Prediction", "InfluenceTable",
    "feature_influence",
    "LossSpec", "RegularizerSpec", "MilpModel", "TangentLine",
    "tangent_lines", "pwl_logistic", "logistic_loss", "hinge_loss",
    "build_olct", "build_margot_l1", "build_oct_misclass",
    "add_l0_structure", "census", "export_lp",
    "LpSolution", "LpTimeout", "SimplexError", "solve_bounded_lp",
    "SolverConfig", "MipSolution", "solve_mip", "solve_lp",
    "validate_assignment",
    "fit_l1_logistic", "fit_l1_hinge",
    "TrainConfig", "TrainReport", "train", "build_model",
    "greedy_warm_start", "refine_last_layer", "exact_objective",
    "cross_validate",
    "ConfusionCounts", "balanced_accuracy", "sparsity",
    "performance_profiles", "gap_curve", "emit_report",
    "ProfileCurve", "GapCurve", "RunResult",
    "make_xor", "make_near_separable", "make_two_gaussians",
    "dataset_by_name", "dataset_names", "save_csv",
    "__version__",
]
