"""Minkowski tensors and intrinsic volumes from Voronoi tensor measures."""

from .errors import EstimationError, NumericalError, PreconditionError
from .symtensor import SymTensor, evaluate, rotate, sup_norm, sym_pow, sym_product, tensor_norm
from .shapes import (
    Annulus,
    Disk,
    Ellipse,
    Lattice,
    PointSample,
    Rectangle,
    digitize,
    ground_truth,
    hausdorff_to_sample,
    read_pbm,
    shape_from_json,
    write_pbm,
)
from .cells import RestrictedCell, VoronoiCells, build_cell, moments_exact_2d, moments_mc
from .measures import (
    ALL_SPACE,
    MeasureValue,
    RegionOfInterest,
    interior_filter,
    measure_sweep,
    refined_measure,
    shell_measure,
    voronoi_tensor_measure,
)
from .estimators import (
    EstimatorConfig,
    SteinerMatrix,
    TensorEstimate,
    auto_radii,
    estimate_local,
    estimate_refined,
    estimate_sample,
    estimate_tensors,
    kappa,
    omega,
    reduced_radius_estimate,
    steiner_matrix,
    volume_tensor_hat,
    volume_tensor_pixels,
)

__version__ = "0.1.0"
