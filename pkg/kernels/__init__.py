"""
GPMorph Kernels Module
======================
Matrix-valued covariance functions, their composition algebra, mean functions
and the kernel expression language.
"""

from .expr import KernelExpr, call
from .weights import (
    WeightFunction,
    ConstantWeight,
    StepWeight,
    SigmoidWeight,
    BumpWeight,
    OneMinusWeight,
)
from .means import MeanFunction, ZeroMean, EmpiricalMean, SumMean, WeightedMean, ShiftedMean, combine_means
from .base import (
    ScalarKernel,
    ScalarGaussian,
    ScalarConstant,
    MatrixKernel,
    DiagonalKernel,
    GaussianKernel,
    ConstantKernel,
    SumKernel,
    MultiscaleKernel,
    ScaledKernel,
    ProductKernel,
    AnisotropicKernel,
    LocalizedKernel,
    SpatiallyVaryingKernel,
    as_points,
    block_matrix,
    gram_matrix,
    gauss,
    multiscale,
    diag,
    kernel_sum,
    kernel_product,
    scale,
    anisotropic,
    localize,
    spatially_varying,
    ones,
    zero,
)
from .datasets import (
    DeformationFieldSet,
    EmpiricalKernel,
    empirical,
    load_deformation_set,
    write_deformation_set,
)
from .dsl import (
    parse_kernel,
    format_kernel,
    build_kernel,
    build_weight,
    kernel_from_text,
    load_kernel,
    tokenize,
)


__all__ = [
    "KernelExpr",
    "call",
    "WeightFunction",
    "ConstantWeight",
    "StepWeight",
    "SigmoidWeight",
    "BumpWeight",
    "OneMinusWeight",
    "MeanFunction",
    "ZeroMean",
    "EmpiricalMean",
    "SumMean",
    "WeightedMean",
    "ShiftedMean",
    "combine_means",
    "ScalarKernel",
    "ScalarGaussian",
    "ScalarConstant",
    "MatrixKernel",
    "DiagonalKernel",
    "GaussianKernel",
    "ConstantKernel",
    "SumKernel",
    "MultiscaleKernel",
    "ScaledKernel",
    "ProductKernel",
    "AnisotropicKernel",
    "LocalizedKernel",
    "SpatiallyVaryingKernel",
    "as_points",
    "block_matrix",
    "gram_matrix",
    "gauss",
    "multiscale",
    "diag",
    "kernel_sum",
    "kernel_product",
    "scale",
    "anisotropic",
    "localize",
    "spatially_varying",
    "ones",
    "zero",
    "DeformationFieldSet",
    "EmpiricalKernel",
    "empirical",
    "load_deformation_set",
    "write_deformation_set",
    "parse_kernel",
    "format_kernel",
    "build_kernel",
    "build_weight",
    "kernel_from_text",
    "load_kernel",
    "tokenize",
]
