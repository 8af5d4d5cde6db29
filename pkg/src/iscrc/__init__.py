"""Image-set classification by collaborative hull representation over compressed galleries."""

from .baselines import baseline_src_crc, classify_baseline
from .bench import BenchReport, run_benchmark
from .compression import DictLearnConfig, compress_gallery, compress_set
from .core import (ClassificationResult, CompressedGalleryCollection, FeatureMatrix, HullSolution, ImageSet,
                   KernelSpec, SolverConfig, classify, residual_per_class)
from .data import DatasetManifest, load_dataset, load_gallery, save_gallery
from .errors import (ConfigError, DataError, DegenerateGeometryError, DimensionError, InfeasibleError,
                     ISCRCError, SolverError)
from .kch import classify_kch, kernel_matrix, solve_kch
from .rh import classify_rh, solve_l1, solve_l2
from .solvers import (CappedSimplex, LassoProblem, constrained_ridge_solve, lasso_solve, project_capped_simplex,
                      qp_capped_simplex_blocks)
from .synthetic import SyntheticSpec, generate_synthetic

__version__ = "0.1.0"
