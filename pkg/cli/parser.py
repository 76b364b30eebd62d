"""
Argument parser for every subcommand. Usage errors raise UsageError instead
of exiting so the entry point reports them with the common error prefix.
"""

import argparse
from typing import Optional

from config import NystromConfig, RegistrationConfig, ShapeModelConfig
from errors import UsageError
from registration import OPTIMIZERS


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = (lambda value: argparse.SUPPRESS) if suppress else (lambda value: value)
    parser.add_argument("--seed", type=int, default=default(0),
                        help="seed for every random choice (default 0)")
    parser.add_argument("--threads", type=int, default=default(None),
                        help="worker threads (default: GPMM_THREADS or all cores)")
    parser.add_argument("--verbose", action="store_true", default=default(False),
                        help="debug logging")


def _fit_flags(parser: argparse.ArgumentParser, points: Optional[int]) -> None:
    parser.add_argument("--model", required=True, help="model manifest")
    parser.add_argument("--eta", type=float, default=RegistrationConfig.ETA,
                        help=f"regularization weight (default {RegistrationConfig.ETA:g})")
    parser.add_argument("--optimizer", choices=OPTIMIZERS, default="lbfgs",
                        help="coefficient optimizer (default lbfgs)")
    parser.add_argument("--max-iters", type=int, default=RegistrationConfig.DEFAULT_MAX_ITERS,
                        help=f"iteration budget (default {RegistrationConfig.DEFAULT_MAX_ITERS})")
    parser.add_argument("--tol", type=float, default=RegistrationConfig.DEFAULT_TOL,
                        help=f"convergence tolerance (default {RegistrationConfig.DEFAULT_TOL:g})")
    parser.add_argument("--points", type=int, default=points,
                        help=f"integration points (default {points or 'the reference vertices'})")
    parser.add_argument("--batch", type=int, default=RegistrationConfig.SGD_BATCH,
                        help=f"sgd mini-batch size (default {RegistrationConfig.SGD_BATCH})")
    parser.add_argument("--step", type=float, default=None,
                        help="gd / sgd initial step size")


def _landmark_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--landmarks-ref", help="reference landmark CSV (hybrid fit)")
    parser.add_argument("--landmarks-target", help="target landmark CSV (hybrid fit)")
    parser.add_argument("--landmark-sigma", type=float, default=0.0,
                        help="landmark noise standard deviation (default 0)")


def _domain_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--domain", help="reference mesh (.ply) or image (.mhd)")
    group.add_argument("--interval", type=float, nargs=2, metavar=("LOW", "HIGH"),
                       help="uniform measure on a 1D interval")
    group.add_argument("--gaussian", type=float, metavar="S2",
                       help="1D Gaussian measure N(0, S2)")
    parser.add_argument("--mask", help="mask image (.mhd) restricting an image domain")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="gpmorph",
                            description="Low-rank Gaussian process morphable models")
    _global_flags(parser, suppress=False)
    common = ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    commands = parser.add_subparsers(dest="command", metavar="command", parser_class=ArgumentParser)
    commands.required = True

    def add(name: str, help_text: str) -> ArgumentParser:
        return commands.add_parser(name, help=help_text, description=help_text, parents=[common])

    # build-model
    p = add("build-model", "build a low-rank model from a kernel file by the Nyström method")
    p.add_argument("--kernel", required=True, help="kernel DSL file (.kdsl)")
    _domain_flags(p)
    p.add_argument("--n", type=int, default=NystromConfig.DEFAULT_POINTS,
                   help=f"Nyström points (default {NystromConfig.DEFAULT_POINTS})")
    rank = p.add_mutually_exclusive_group()
    rank.add_argument("--rank", type=int, help="fixed model rank")
    rank.add_argument("--variance-fraction", type=float,
                      help="smallest rank explaining this fraction of the variance")
    p.add_argument("--max-rank", type=int, default=NystromConfig.DEFAULT_MAX_RANK,
                   help=f"rank ceiling (default {NystromConfig.DEFAULT_MAX_RANK})")
    p.add_argument("--method", choices=("auto", "dense", "randomized"), default="auto",
                   help="eigensolver (default auto)")
    p.add_argument("--oversampling", type=int, default=NystromConfig.OVERSAMPLING,
                   help=f"randomized-solver oversampling (default {NystromConfig.OVERSAMPLING})")
    p.add_argument("--power-iters", type=int, default=NystromConfig.POWER_ITERS,
                   help=f"randomized-solver power iterations (default {NystromConfig.POWER_ITERS})")
    p.add_argument("--out", required=True, help="model manifest to write (.gpm)")

    # sample
    p = add("sample", "write random model instances as warped reference meshes")
    p.add_argument("--model", required=True, help="low-rank model manifest (.gpm)")
    p.add_argument("--count", type=int, default=5, help="number of samples (default 5)")
    p.add_argument("--reference", help="reference mesh (default: the model's own)")
    p.add_argument("--out-prefix", required=True, help="output path prefix, e.g. out/s_")

    # posterior
    p = add("posterior", "condition a model on landmark pairs")
    p.add_argument("--model", required=True, help="low-rank model manifest (.gpm)")
    p.add_argument("--landmarks-ref", required=True, help="reference landmark CSV")
    p.add_argument("--landmarks-target", required=True, help="target landmark CSV")
    p.add_argument("--sigma", type=float, default=0.0, help="landmark noise standard deviation")
    p.add_argument("--out", required=True, help="posterior model manifest to write (.gpm)")

    # fit-surface
    p = add("fit-surface", "fit a model to a target mesh")
    _fit_flags(p, RegistrationConfig.SURFACE_POINTS)
    _landmark_flags(p)
    p.add_argument("--target", required=True, help="target mesh (.ply)")
    p.add_argument("--reference", help="reference mesh (default: the model's own)")
    p.add_argument("--out", required=True, help="warped reference (.ply); the fit result goes next to it (.json)")

    # fit-image
    p = add("fit-image", "fit a model to a target image")
    _fit_flags(p, RegistrationConfig.IMAGE_POINTS)
    _landmark_flags(p)
    p.add_argument("--reference", required=True, help="reference image (.mhd)")
    p.add_argument("--target", required=True, help="target image (.mhd)")
    p.add_argument("--mask", help="reference mask (.mhd)")
    p.add_argument("--out", required=True,
                   help="target resampled on the reference grid (.mhd); the fit result goes next to it (.json)")

    # eval-model
    p = add("eval-model", "specificity and compactness of a model")
    p.add_argument("--model", required=True, help="low-rank (.gpm) or discrete model manifest")
    p.add_argument("--training", required=True, help="directory of training meshes (.ply)")
    p.add_argument("--metrics", default="specificity,compactness",
                   help="comma-separated subset of specificity,compactness")
    p.add_argument("--reference", help="reference mesh for low-rank models (default: the model's own)")
    p.add_argument("--samples", type=int, default=ShapeModelConfig.SPECIFICITY_SAMPLES,
                   help=f"specificity samples (default {ShapeModelConfig.SPECIFICITY_SAMPLES})")
    p.add_argument("--components", type=int, help="components for compactness (default: all)")
    p.add_argument("--out", help="also write the report here (.json)")

    # generalize
    p = add("generalize", "fit a model to held-out meshes and report the residual distance")
    _fit_flags(p, None)
    p.add_argument("--targets", required=True, help="directory of held-out meshes (.ply)")
    p.add_argument("--reference", help="reference mesh for low-rank models (default: the model's own)")
    p.add_argument("--out", help="also write the report here (.json)")

    # validate-nystrom
    p = add("validate-nystrom", "compare a 1D Nyström model with the closed-form Gaussian spectrum")
    p.add_argument("--sigma", type=float, default=1.0, help="kernel bandwidth (default 1)")
    p.add_argument("--s2", type=float, default=1.0, help="measure variance (default 1)")
    p.add_argument("--n", type=int, default=1000, help="Nyström points (default 1000)")
    p.add_argument("--rank", type=int, default=20, help="eigenpairs to compare (default 20)")
    p.add_argument("--out", required=True, help="comparison table (.csv)")

    # project-error
    p = add("project-error", "projection error of exact GP samples onto a low-rank model")
    p.add_argument("--kernel", required=True, help="kernel DSL file (.kdsl)")
    _domain_flags(p)
    p.add_argument("--variance-fraction", type=float, default=0.99,
                   help="variance fraction the model keeps (default 0.99)")
    p.add_argument("--n", type=int, default=NystromConfig.DEFAULT_POINTS,
                   help=f"Nyström points (default {NystromConfig.DEFAULT_POINTS})")
    p.add_argument("--max-rank", type=int, default=NystromConfig.DEFAULT_MAX_RANK,
                   help=f"rank ceiling (default {NystromConfig.DEFAULT_MAX_RANK})")
    p.add_argument("--method", choices=("auto", "dense", "randomized"), default="auto",
                   help="eigensolver (default auto)")
    p.add_argument("--probes", type=int, default=1000, help="probe points (default 1000)")
    p.add_argument("--trials", type=int, default=50, help="exact samples (default 50)")
    p.add_argument("--out", help="also write the report here (.json)")

    # analytic-spectrum
    p = add("analytic-spectrum", "closed-form spectrum of the 1D Gaussian kernel")
    p.add_argument("--sigma", type=float, default=1.0, help="kernel bandwidth (default 1)")
    p.add_argument("--s2", type=float, default=1.0, help="measure variance (default 1)")
    p.add_argument("--count", type=int, default=20, help="eigenvalues to list (default 20)")
    p.add_argument("--out", required=True, help="spectrum table (.csv)")

    # bounds
    p = add("bounds", "Nyström accuracy bounds for a kernel bound kappa")
    p.add_argument("--kappa", type=float, default=1.0, help="sup of k(x, x) (default 1)")
    confidence = p.add_mutually_exclusive_group(required=True)
    confidence.add_argument("--confidence", type=float, help="probability the bounds hold")
    confidence.add_argument("--tau", type=float, help="confidence parameter tau directly")
    p.add_argument("--n", type=int, required=True, help="Nyström points")
    p.add_argument("--gap", type=float, help="eigenvalue gap for the eigenfunction bound")
    p.add_argument("--tolerance", type=float, help="report the points needed for this eigenvalue accuracy")

    return parser
