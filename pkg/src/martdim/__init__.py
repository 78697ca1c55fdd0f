"""Dimension of Brownian-driven matrix-integrand martingales: simulation, rank, reduction, checks."""
from martdim.errors import (ConfigError, DimensionMismatch, FormatError, IndexOutOfRange,
                            InvalidArgument, MartdimError, OrthonormalityError, RankMismatch)
from martdim.factor import FactorizationResult, gram_schmidt_factor, reduce_to_kBM, time_change_normalize
from martdim.genbm import BlockSpec, GeneralBM, check_regular, exact_bm, represent_on_S1, split_S
from martdim.integrand import FrameField, MatrixIntegrand
from martdim.ito import MartingaleProcess, instantaneous_covariation, ito_integrate, realized_covariation
from martdim.paths import BrownianPaths, TimeGrid, generate_brownian, load_paths, make_grid, save_paths
from martdim.rank_dim import DimensionReport, RankTolerance, estimate_dimension, numerical_rank

__version__ = "0.1.0"

__all__ = [
    "BlockSpec", "BrownianPaths", "ConfigError", "DimensionMismatch", "DimensionReport",
    "FactorizationResult", "FormatError", "FrameField", "GeneralBM", "IndexOutOfRange",
    "InvalidArgument",
    "MartdimError", "MartingaleProcess", "MatrixIntegrand", "OrthonormalityError", "RankMismatch",
    "RankTolerance", "TimeGrid", "check_regular", "estimate_dimension", "exact_bm",
    "generate_brownian", "gram_schmidt_factor", "instantaneous_covariation", "ito_integrate",
    "load_paths", "make_grid", "numerical_rank", "realized_covariation", "reduce_to_kBM",
    "represent_on_S1", "save_paths", "split_S", "time_change_normalize",
]
